#include "sfreq/metrics.hpp"

#include <limits>
#include <stdexcept>

namespace sfreq {
namespace {

double nearest(const double f, const std::vector<double>& pool, const DistanceMode mode) {
    double best = std::numeric_limits<double>::infinity();
    for (const double p : pool) best = std::min(best, frequency_distance(f, p, mode));
    return best;
}

}  // namespace

int missed_count(const std::vector<double>& truth, const std::vector<double>& estimates,
                 int n_samples, DistanceMode mode) {
    if (n_samples < 1) throw std::invalid_argument("fnr: n_samples must be positive");
    const double radius = detection_radius(n_samples);
    int missed = 0;
    for (const double f : truth)
        if (nearest(f, estimates, mode) > radius) missed += 1;
    return missed;
}

double fnr(const std::vector<double>& truth, const std::vector<double>& estimates, int n_samples,
           DistanceMode mode) {
    if (truth.empty()) throw std::invalid_argument("fnr: truth list is empty");
    return static_cast<double>(missed_count(truth, estimates, n_samples, mode)) /
           static_cast<double>(truth.size());
}

double chamfer(const std::vector<double>& a, const std::vector<double>& b, DistanceMode mode) {
    if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (const double f : a) total += nearest(f, b, mode);
    for (const double f : b) total += nearest(f, a, mode);
    return total;
}

double counting_error(const std::vector<int>& truth_counts,
                      const std::vector<int>& estimated_counts) {
    if (truth_counts.size() != estimated_counts.size())
        throw std::invalid_argument("counting error: list lengths differ");
    if (truth_counts.empty()) throw std::invalid_argument("counting error: empty lists");
    int wrong = 0;
    for (std::size_t i = 0; i < truth_counts.size(); ++i)
        if (truth_counts[i] != estimated_counts[i]) wrong += 1;
    return static_cast<double>(wrong) / static_cast<double>(truth_counts.size());
}

}  // namespace sfreq
