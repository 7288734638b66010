#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace sfreq {

// Frequencies live on the unit circle: f and f+1 alias at unit-rate sampling.
// All distances default to the wrap-around metric; the plain metric is kept
// selectable for comparisons against conventions that ignore the wrap.
enum class DistanceMode { Wrap, Plain };

inline double wrap_distance(double a, double b) {
    double d = std::fmod(std::fabs(a - b), 1.0);
    return d <= 0.5 ? d : 1.0 - d;
}

inline double frequency_distance(double a, double b, DistanceMode mode) {
    return mode == DistanceMode::Wrap ? wrap_distance(a, b) : std::fabs(a - b);
}

// Uniform grid of `size` points over [0, 1).
struct Grid {
    int size = 1000;

    double point(int g) const { return static_cast<double>(g) / size; }
    double spacing() const { return 1.0 / size; }
    std::vector<double> points() const {
        std::vector<double> u(static_cast<std::size_t>(size));
        for (int g = 0; g < size; ++g) u[static_cast<std::size_t>(g)] = point(g);
        return u;
    }
};

// A real-valued function of frequency sampled on a uniform grid over [0, 1).
struct FreqRepresentation {
    enum class Kind { Periodogram, Music, Learned, Target };

    std::vector<double> values;
    Grid grid;
    Kind kind = Kind::Target;
};

struct PeakList {
    std::vector<double> frequencies;  // grid locations, sorted by height descending
    bool degenerate = false;          // fewer circular maxima than requested; padded
};

// Locate the `count` highest circular local maxima of `fr`. A local maximum is
// strictly higher than both neighbours; plateaus count once, at their leftmost
// index. When fewer maxima exist than requested the result is padded with the
// highest remaining grid values and flagged.
PeakList pick_peaks(const FreqRepresentation& fr, int count);

}  // namespace sfreq
