#pragma once

#include <vector>

#include "sfreq/representation.hpp"

namespace sfreq {

// Detection radius for a record of n samples; an estimate within this wrap
// distance of a true frequency counts as finding it.
inline double detection_radius(int n_samples) { return 1.0 / (2.0 * n_samples); }

// Number of true frequencies with no estimate inside the detection radius.
int missed_count(const std::vector<double>& truth, const std::vector<double>& estimates,
                 int n_samples, DistanceMode mode = DistanceMode::Wrap);

// missed_count / |truth|. Rejects an empty truth list. Aggregating a test set
// as (total missed)/(total true) pools records; averaging per-record values
// weights every signal equally instead.
double fnr(const std::vector<double>& truth, const std::vector<double>& estimates, int n_samples,
           DistanceMode mode = DistanceMode::Wrap);

// Symmetric sum of nearest-neighbour distances between the two frequency
// sets. Either side empty yields +infinity; callers report that case as a
// failure instead of folding it into averages.
double chamfer(const std::vector<double>& a, const std::vector<double>& b,
               DistanceMode mode = DistanceMode::Wrap);

// Fraction of records whose estimated component count is wrong.
double counting_error(const std::vector<int>& truth_counts, const std::vector<int>& estimated_counts);

}  // namespace sfreq
