#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfreq/autograd.hpp"
#include "sfreq/signal_model.hpp"

namespace sfreq {

// Frequency-representation network layout. The deepfreq variant feeds C
// parallel linear maps into a conv stack and upsamples with a transposed
// convolution; the psnet variant uses a single map (C = 1) into the same
// stack and a fully connected decoder.
struct FrNetConfig {
    std::string variant = "deepfreq";  // or "psnet"
    int n_samples = 50;
    int channels = 64;       // encoder maps (1 for psnet)
    int encoder_out = 125;   // M, length of each encoded sequence
    int conv_layers = 20;
    int conv_filter = 3;
    int conv_channels = 64;
    int decoder_kernel = 25;
    int decoder_stride = 8;
    int grid = 1000;

    double kernel_std() const { return 0.3 / n_samples; }
    int input_size() const { return 2 * n_samples; }
    int encoder_channels() const { return variant == "psnet" ? 1 : channels; }
    void validate() const;
};

struct CounterConfig {
    int grid = 1000;
    int stem_filters = 16;
    int stem_kernel = 25;
    int stem_stride = 5;
    int conv_layers = 20;
    int conv_filters = 16;
    int conv_kernel = 3;
    int m_max = 10;

    int stem_out() const { return grid / stem_stride; }
    void validate() const;
};

template <typename T>
struct FrNet {
    FrNetConfig config;
    Parameter<T> encoder_w, encoder_b;
    std::vector<Parameter<T>> conv_w, conv_b;
    std::vector<BatchNorm<T>> bn;
    Parameter<T> decoder_w, decoder_b;

    explicit FrNet(FrNetConfig cfg);

    // Fills weights from streams derived from (seed, parameter index); biases
    // stay zero and normalization affine parameters keep their defaults.
    void init(std::uint64_t seed);

    // Fixed registration order; doubles as the serialization order.
    std::vector<Parameter<T>*> parameters();
    std::int64_t parameter_count() const;

    // Everything persistence must capture: trainables plus normalization
    // running statistics, in a fixed order shared by save and load.
    std::vector<std::pair<std::string, Tensor<T>*>> state();

    // x [B, 2N] -> raw representation [B, G] (may be negative; clamp on export)
    typename Graph<T>::Id forward(Graph<T>& g, typename Graph<T>::Id x, bool training);
};

template <typename T>
struct CounterNet {
    CounterConfig config;
    Parameter<T> stem_w, stem_b;
    BatchNorm<T> stem_bn;
    std::vector<Parameter<T>> conv_w, conv_b;
    std::vector<BatchNorm<T>> bn;
    Parameter<T> head_w, head_b;

    explicit CounterNet(CounterConfig cfg);
    void init(std::uint64_t seed);
    std::vector<Parameter<T>*> parameters();
    std::int64_t parameter_count() const;
    std::vector<std::pair<std::string, Tensor<T>*>> state();

    // x [B, 1, G] -> [B, 1] raw component-count estimates
    typename Graph<T>::Id forward(Graph<T>& g, typename Graph<T>::Id x, bool training);
};

// Rows of measurements as network input: each complex sample contributes an
// adjacent (real, imag) pair, and every row is divided by its largest sample
// modulus (all-zero rows pass through unchanged).
template <typename T>
Tensor<T> measurement_tensor(const std::vector<std::vector<cplx>>& batch, int n_samples);

// Single-signal eval-mode pass; negative outputs are clamped to zero.
template <typename T>
FreqRepresentation fr_forward(FrNet<T>& model, const std::vector<cplx>& samples);

// Eval-mode counting head over a representation's values.
template <typename T>
double counter_forward(CounterNet<T>& model, const std::vector<double>& fr_values);

// Nearest integer, kept inside [1, m_max].
int clamp_count(double raw, int m_max);

// clamp_count(counter_forward(...), m_max)
template <typename T>
int count_components(CounterNet<T>& model, const FreqRepresentation& fr);

// For each encoder map: the magnitude response of its rows, as an M x G
// matrix of |dtft| values (row -> N complex coefficients, interleaved).
template <typename T>
std::vector<Tensor<double>> inspect_encoder(const FrNet<T>& model, const Grid& grid);

}  // namespace sfreq
