#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sfreq/networks.hpp"
#include "sfreq/signal_model.hpp"

namespace sfreq {

struct Estimate {
    std::vector<double> frequencies;
    int count = 0;
};

// One estimation pipeline under evaluation. `run` receives the noisy samples
// and either the true component count or -1, in which case the method must
// choose the count itself. Methods that cannot choose (a learned
// representation without a counting head) set can_count to false and sit out
// the unknown-count protocol.
struct Method {
    std::string name;
    bool can_count = true;
    std::function<Estimate(const std::vector<cplx>&, int known_m)> run;
};

// Peaks of the magnitude spectrum; the count comes from an eigenvalue
// information criterion ("aic", "mdl", or "sorte") over a covariance of the
// given window size.
Method periodogram_method(const Grid& grid, const std::string& count_rule = "aic",
                          int window = 25);

// Peaks of the noise-subspace pseudospectrum; same count rules.
Method music_method(const Grid& grid, const std::string& count_rule = "mdl", int window = 25);

// Peaks of a learned frequency representation. Without a counter the method
// only supports the known-count protocol. The networks are only read, so one
// instance may serve concurrent records.
Method learned_method(std::string name, FrNet<float>& model, CounterNet<float>* counter = nullptr);

enum class Protocol { KnownM, Full };

std::string protocol_name(Protocol protocol);

struct BenchmarkConfig {
    GeneratorConfig generator;  // the sigma range is overridden per noise level
    int n_records = 1000;
    std::vector<double> sigmas = {0.1};
    // false pools records as (total missed)/(total true); true averages
    // per-record rates, weighting every signal equally.
    bool per_signal_fnr = false;
    int threads = 1;
};

// One noise level. Columns that a protocol does not measure hold NaN and are
// left empty in the CSV. runtime_ms is wall clock for the whole level; it is
// reported only by timing_csv so the other reports stay byte-reproducible.
struct EvalRow {
    double sigma = 0.0;
    double snr_db = 0.0;
    double fnr = 0.0;
    double counting_error = 0.0;
    double mean_chamfer = 0.0;
    double chamfer_std_err = 0.0;
    double failure_rate = 0.0;
    double runtime_ms = 0.0;
};

struct EvalReport {
    std::string method;
    std::string protocol;
    std::uint64_t seed = 0;
    int n_records = 0;
    std::vector<EvalRow> rows;
};

// Evaluate one method under one protocol. Every noise level reuses the
// config seed, so all levels share the same clean signals and differ only in
// the noise draw. A record where the method throws is excluded from every
// metric and counted into failure_rate.
EvalReport evaluate_method(const Method& method, const BenchmarkConfig& cfg, Protocol protocol);

// Cross product of methods and protocols, skipping unknown-count rows for
// methods that cannot choose a count.
std::vector<EvalReport> run_benchmark(const std::vector<Method>& methods,
                                      const BenchmarkConfig& cfg,
                                      const std::vector<Protocol>& protocols = {
                                          Protocol::KnownM, Protocol::Full});

// Long-format table, one row per method/protocol/noise level. NaN cells are
// empty, infinities print as "inf".
std::string report_csv(const std::vector<EvalReport>& reports);
std::string report_json(const std::vector<EvalReport>& reports);

// Wall-clock sidecar (total and per-record milliseconds per noise level),
// kept out of report_csv/report_json so those are identical across runs.
std::string timing_csv(const std::vector<EvalReport>& reports);

// Representation output averaged over trials that keep the mixture's
// frequencies and amplitude magnitudes but redraw every phase and the noise.
struct FrProfile {
    Grid grid;
    std::vector<double> mean;
    std::vector<double> std_err;
};

FrProfile fr_profile(FrNet<float>& model, const SinusoidMixture& prototype, int n_trials,
                     double sigma, std::uint64_t seed, int threads = 1);

}  // namespace sfreq
