#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfreq/networks.hpp"
#include "sfreq/signal_model.hpp"

namespace sfreq {

// A file failed validation: bad magic, checksum mismatch, or a config that
// does not match its tensor table. Mapped to exit status 3 by the CLI.
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// FNV-1a over a byte range; `state` chains calls across ranges.
std::uint64_t fnv1a64(const unsigned char* data, std::size_t len,
                      std::uint64_t state = 0xCBF29CE484222325ull);

// Provenance carried inside a model file.
struct TrainMeta {
    std::uint64_t seed = 0;
    int epochs = 0;
    double final_train_loss = 0.0;
    double best_val_loss = 0.0;
};

// One entry of a file's tensor table.
struct NamedTensor {
    std::string name;
    Tensor<float> value;
};

// Generic tensor container behind both model files and training checkpoints:
// magic, format version, length-prefixed canonical JSON header (sorted keys),
// tensor table (name, dtype tag, shape, little-endian payload), trailing
// 64-bit checksum of every preceding byte.
void write_container(const std::string& path, const std::string& magic,
                     const std::string& header_json, const std::vector<NamedTensor>& tensors);

struct Container {
    std::string header_json;
    std::vector<NamedTensor> tensors;
};

Container read_container(const std::string& path, const std::string& expect_magic);

// Model files ("SFRQ"). The header records the architecture kind, its config,
// and training metadata; the table holds the network state exactly once per
// entry, in registration order.
void save_fr_model(const std::string& path, FrNet<float>& model, const TrainMeta& meta);
void save_counter_model(const std::string& path, CounterNet<float>& model, const TrainMeta& meta);

// Peek at the architecture kind ("fr" or "counter") without loading tensors.
std::string model_file_kind(const std::string& path);

struct LoadedFrModel {
    FrNet<float> model;
    TrainMeta meta;
};

struct LoadedCounterModel {
    CounterNet<float> model;
    TrainMeta meta;
};

LoadedFrModel load_fr_model(const std::string& path);
LoadedCounterModel load_counter_model(const std::string& path);

// Dataset files ("SFDS"): generator config plus full records (truth, clean
// and noisy samples), all payloads little-endian doubles.
struct Dataset {
    GeneratorConfig config;
    std::vector<SampleRecord> records;
};

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

// Training checkpoints ("SFCK") reuse the container as-is; the training loop
// owns the header schema and tensor naming.
void save_checkpoint(const std::string& path, const std::string& header_json,
                     const std::vector<NamedTensor>& tensors);
Container load_checkpoint(const std::string& path);

}  // namespace sfreq
