#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfreq/networks.hpp"
#include "sfreq/signal_model.hpp"

namespace sfreq {

// Training loss stopped being finite. Mapped to exit status 4 by the CLI.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    int n_signals = 2000;  // 0: use every provided record
    int epochs = 20;
    int batch_size = 256;
    double lr = 3e-4;
    double sigma_min = 0.0;
    double sigma_max = 1.0;
    double val_fraction = 0.05;  // trailing records, fixed noise; 0 disables
    std::uint64_t seed = 0;
    int eval_every = 1;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    bool validated = false;
    double wall_seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;  // on resume: only the epochs run now
    int best_epoch = 0;               // 0 when validation never ran
    double best_val_loss = std::numeric_limits<double>::infinity();
    double final_train_loss = 0.0;
};

struct TrainIo {
    std::ostream* log = nullptr;  // one JSON object per finished epoch
    std::string checkpoint_path;  // rewritten after every epoch when set
    bool resume = false;          // continue from checkpoint_path
    int threads = 1;              // record-level precomputation only
};

// Fixes the clean signals up front, then draws a fresh noise level and noise
// vector for every signal in every epoch and regresses the network output
// onto the ground-truth representation. Returns with the best-validation
// weights installed (final weights when validation is disabled).
TrainResult train_fr(FrNet<float>& model, const std::vector<SampleRecord>& records,
                     const TrainConfig& cfg, const TrainIo& io = {});

// Same regime, but each signal is first pushed through the frozen
// representation network and the counter regresses the component count.
// `fr_model` is evaluated in inference mode and never updated.
TrainResult train_counter(CounterNet<float>& model, FrNet<float>& fr_model,
                          const std::vector<SampleRecord>& records, const TrainConfig& cfg,
                          const TrainIo& io = {});

}  // namespace sfreq
