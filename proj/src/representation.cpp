#include "sfreq/representation.hpp"

#include <algorithm>
#include <stdexcept>

namespace sfreq {

namespace {

struct Candidate {
    int index;
    double value;
};

void sort_by_height(std::vector<Candidate>& c) {
    std::sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.index < b.index;
    });
}

}  // namespace

PeakList pick_peaks(const FreqRepresentation& fr, int count) {
    const int n = static_cast<int>(fr.values.size());
    if (count < 1) throw std::invalid_argument("pick_peaks: count must be >= 1");
    if (n == 0) throw std::invalid_argument("pick_peaks: empty representation");
    count = std::min(count, n);

    const auto& v = fr.values;
    std::vector<Candidate> maxima;

    // Walk circular runs of equal value; a run is a peak when both flanking
    // runs sit strictly lower. The run's first index in walk order stands for
    // the plateau.
    int first_change = -1;
    for (int i = 0; i < n; ++i) {
        if (v[static_cast<std::size_t>(i)] != v[static_cast<std::size_t>((i + n - 1) % n)]) {
            first_change = i;
            break;
        }
    }
    if (first_change >= 0) {
        int covered = 0;
        int run_start = first_change;
        while (covered < n) {
            const double value = v[static_cast<std::size_t>(run_start)];
            int run_len = 1;
            while (run_len < n &&
                   v[static_cast<std::size_t>((run_start + run_len) % n)] == value)
                ++run_len;
            const double left = v[static_cast<std::size_t>((run_start + n - 1) % n)];
            const double right = v[static_cast<std::size_t>((run_start + run_len) % n)];
            if (value > left && value > right) maxima.push_back({run_start, value});
            covered += run_len;
            run_start = (run_start + run_len) % n;
        }
    }
    sort_by_height(maxima);

    PeakList out;
    const int from_maxima = std::min<int>(count, static_cast<int>(maxima.size()));
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (int i = 0; i < from_maxima; ++i) {
        out.frequencies.push_back(fr.grid.point(maxima[static_cast<std::size_t>(i)].index));
        used[static_cast<std::size_t>(maxima[static_cast<std::size_t>(i)].index)] = true;
    }

    if (from_maxima < count) {
        out.degenerate = true;
        std::vector<Candidate> rest;
        rest.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            if (!used[static_cast<std::size_t>(i)]) rest.push_back({i, v[static_cast<std::size_t>(i)]});
        sort_by_height(rest);
        for (int i = 0; i < count - from_maxima; ++i)
            out.frequencies.push_back(fr.grid.point(rest[static_cast<std::size_t>(i)].index));
    }
    return out;
}

}  // namespace sfreq
