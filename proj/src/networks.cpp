#include "sfreq/networks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sfreq {

void FrNetConfig::validate() const {
    if (variant != "deepfreq" && variant != "psnet")
        throw std::invalid_argument("fr config: unknown variant '" + variant + "'");
    if (n_samples < 1 || channels < 1 || encoder_out < 1 || conv_layers < 1 || conv_channels < 1)
        throw std::invalid_argument("fr config: dimensions must be positive");
    if (encoder_out * decoder_stride != grid)
        throw std::invalid_argument("fr config: encoder_out * decoder_stride must equal grid");
    if (conv_filter % 2 == 0 || decoder_kernel % 2 == 0)
        throw std::invalid_argument("fr config: filter widths must be odd");
}

void CounterConfig::validate() const {
    if (grid < 1 || stem_filters < 1 || conv_layers < 1 || conv_filters < 1 || m_max < 1)
        throw std::invalid_argument("counter config: dimensions must be positive");
    if (grid % stem_stride != 0)
        throw std::invalid_argument("counter config: stem stride must divide the grid size");
    if (stem_kernel % 2 == 0 || conv_kernel % 2 == 0)
        throw std::invalid_argument("counter config: filter widths must be odd");
}

namespace {

template <typename T>
void init_ordered(std::vector<Parameter<T>*> params, const std::vector<int>& fan_in, std::uint64_t seed) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (fan_in[i] == 0) continue;  // biases and affine terms keep their defaults
        RandomStream rng(seed, stream_id("init", static_cast<std::uint64_t>(i)));
        init_uniform_fanin(*params[i], fan_in[i], rng);
    }
}

template <typename T>
std::int64_t count_all(std::vector<Parameter<T>*> params) {
    std::int64_t n = 0;
    for (const Parameter<T>* p : params) n += p->value.size();
    return n;
}

}  // namespace

template <typename T>
FrNet<T>::FrNet(FrNetConfig cfg) : config(std::move(cfg)) {
    config.validate();
    const int c = config.encoder_channels();
    const int m = config.encoder_out;
    if (config.variant == "psnet") {
        encoder_w = Parameter<T>("encoder.weight", {m, config.input_size()});
        encoder_b = Parameter<T>("encoder.bias", {m});
        decoder_w = Parameter<T>("decoder.weight", {config.grid, config.conv_channels * m});
        decoder_b = Parameter<T>("decoder.bias", {config.grid});
    } else {
        encoder_w = Parameter<T>("encoder.weight", {c * m, config.input_size()});
        encoder_b = Parameter<T>("encoder.bias", {c * m});
        decoder_w = Parameter<T>("decoder.weight", {config.conv_channels, 1, config.decoder_kernel});
        decoder_b = Parameter<T>("decoder.bias", {1});
    }
    for (int l = 0; l < config.conv_layers; ++l) {
        const int in = l == 0 ? c : config.conv_channels;
        const std::string tag = "conv" + std::to_string(l + 1);
        conv_w.emplace_back(tag + ".weight", std::vector<int>{config.conv_channels, in, config.conv_filter});
        conv_b.emplace_back(tag + ".bias", std::vector<int>{config.conv_channels});
        bn.emplace_back("bn" + std::to_string(l + 1), config.conv_channels);
    }
}

template <typename T>
std::vector<Parameter<T>*> FrNet<T>::parameters() {
    std::vector<Parameter<T>*> out{&encoder_w, &encoder_b};
    for (int l = 0; l < config.conv_layers; ++l) {
        out.push_back(&conv_w[static_cast<std::size_t>(l)]);
        out.push_back(&conv_b[static_cast<std::size_t>(l)]);
        out.push_back(&bn[static_cast<std::size_t>(l)].gamma);
        out.push_back(&bn[static_cast<std::size_t>(l)].beta);
    }
    out.push_back(&decoder_w);
    out.push_back(&decoder_b);
    return out;
}

template <typename T>
void FrNet<T>::init(std::uint64_t seed) {
    std::vector<int> fan_in{config.input_size(), 0};
    for (int l = 0; l < config.conv_layers; ++l) {
        const int in = l == 0 ? config.encoder_channels() : config.conv_channels;
        fan_in.insert(fan_in.end(), {in * config.conv_filter, 0, 0, 0});
    }
    if (config.variant == "psnet")
        fan_in.insert(fan_in.end(), {config.conv_channels * config.encoder_out, 0});
    else
        fan_in.insert(fan_in.end(), {config.conv_channels * config.decoder_kernel, 0});
    init_ordered(parameters(), fan_in, seed);
}

template <typename T>
std::int64_t FrNet<T>::parameter_count() const {
    return count_all(const_cast<FrNet<T>*>(this)->parameters());
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> FrNet<T>::state() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (Parameter<T>* p : parameters()) out.emplace_back(p->name, &p->value);
    for (int l = 0; l < config.conv_layers; ++l) {
        const std::string tag = "bn" + std::to_string(l + 1);
        out.emplace_back(tag + ".running_mean", &bn[static_cast<std::size_t>(l)].running_mean);
        out.emplace_back(tag + ".running_var", &bn[static_cast<std::size_t>(l)].running_var);
    }
    return out;
}

template <typename T>
typename Graph<T>::Id FrNet<T>::forward(Graph<T>& g, typename Graph<T>::Id x, bool training) {
    const int batch = g.value(x).dim(0);
    const int c = config.encoder_channels();
    const int m = config.encoder_out;
    auto h = g.linear(x, encoder_w, encoder_b);
    h = g.reshape(h, {batch, c, m});
    for (int l = 0; l < config.conv_layers; ++l) {
        h = g.conv1d(h, conv_w[static_cast<std::size_t>(l)], conv_b[static_cast<std::size_t>(l)], 1);
        h = g.batchnorm1d(h, bn[static_cast<std::size_t>(l)], training);
        h = g.relu(h);
    }
    if (config.variant == "psnet") {
        h = g.reshape(h, {batch, config.conv_channels * m});
        h = g.linear(h, decoder_w, decoder_b);
    } else {
        h = g.conv_transpose1d(h, decoder_w, decoder_b, config.decoder_stride);
        h = g.reshape(h, {batch, config.grid});
    }
    return h;
}

template <typename T>
CounterNet<T>::CounterNet(CounterConfig cfg) : config(std::move(cfg)) {
    config.validate();
    stem_w = Parameter<T>("stem.weight", {config.stem_filters, 1, config.stem_kernel});
    stem_b = Parameter<T>("stem.bias", {config.stem_filters});
    stem_bn = BatchNorm<T>("stem_bn", config.stem_filters);
    for (int l = 0; l < config.conv_layers; ++l) {
        const int in = l == 0 ? config.stem_filters : config.conv_filters;
        const std::string tag = "conv" + std::to_string(l + 1);
        conv_w.emplace_back(tag + ".weight", std::vector<int>{config.conv_filters, in, config.conv_kernel});
        conv_b.emplace_back(tag + ".bias", std::vector<int>{config.conv_filters});
        bn.emplace_back("bn" + std::to_string(l + 1), config.conv_filters);
    }
    head_w = Parameter<T>("head.weight", {1, config.conv_filters * config.stem_out()});
    head_b = Parameter<T>("head.bias", {1});
}

template <typename T>
std::vector<Parameter<T>*> CounterNet<T>::parameters() {
    std::vector<Parameter<T>*> out{&stem_w, &stem_b, &stem_bn.gamma, &stem_bn.beta};
    for (int l = 0; l < config.conv_layers; ++l) {
        out.push_back(&conv_w[static_cast<std::size_t>(l)]);
        out.push_back(&conv_b[static_cast<std::size_t>(l)]);
        out.push_back(&bn[static_cast<std::size_t>(l)].gamma);
        out.push_back(&bn[static_cast<std::size_t>(l)].beta);
    }
    out.push_back(&head_w);
    out.push_back(&head_b);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> CounterNet<T>::state() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (Parameter<T>* p : parameters()) out.emplace_back(p->name, &p->value);
    out.emplace_back("stem_bn.running_mean", &stem_bn.running_mean);
    out.emplace_back("stem_bn.running_var", &stem_bn.running_var);
    for (int l = 0; l < config.conv_layers; ++l) {
        const std::string tag = "bn" + std::to_string(l + 1);
        out.emplace_back(tag + ".running_mean", &bn[static_cast<std::size_t>(l)].running_mean);
        out.emplace_back(tag + ".running_var", &bn[static_cast<std::size_t>(l)].running_var);
    }
    return out;
}

template <typename T>
void CounterNet<T>::init(std::uint64_t seed) {
    std::vector<int> fan_in{config.stem_kernel, 0, 0, 0};
    for (int l = 0; l < config.conv_layers; ++l) {
        const int in = l == 0 ? config.stem_filters : config.conv_filters;
        fan_in.insert(fan_in.end(), {in * config.conv_kernel, 0, 0, 0});
    }
    fan_in.insert(fan_in.end(), {config.conv_filters * config.stem_out(), 0});
    init_ordered(parameters(), fan_in, seed);
}

template <typename T>
std::int64_t CounterNet<T>::parameter_count() const {
    return count_all(const_cast<CounterNet<T>*>(this)->parameters());
}

template <typename T>
typename Graph<T>::Id CounterNet<T>::forward(Graph<T>& g, typename Graph<T>::Id x, bool training) {
    const int batch = g.value(x).dim(0);
    auto h = g.conv1d(x, stem_w, stem_b, config.stem_stride);
    h = g.batchnorm1d(h, stem_bn, training);
    h = g.relu(h);
    for (int l = 0; l < config.conv_layers; ++l) {
        h = g.conv1d(h, conv_w[static_cast<std::size_t>(l)], conv_b[static_cast<std::size_t>(l)], 1);
        h = g.batchnorm1d(h, bn[static_cast<std::size_t>(l)], training);
        h = g.relu(h);
    }
    h = g.reshape(h, {batch, config.conv_filters * config.stem_out()});
    return g.linear(h, head_w, head_b);
}

template <typename T>
Tensor<T> measurement_tensor(const std::vector<std::vector<cplx>>& batch, int n_samples) {
    if (batch.empty()) throw std::invalid_argument("measurement_tensor: empty batch");
    Tensor<T> out({static_cast<int>(batch.size()), 2 * n_samples});
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const std::vector<cplx>& y = batch[b];
        if (static_cast<int>(y.size()) != n_samples)
            throw std::invalid_argument("measurement_tensor: row has " + std::to_string(y.size()) +
                                        " samples, expected " + std::to_string(n_samples));
        double peak = 0.0;
        for (const cplx& v : y) peak = std::max(peak, std::abs(v));
        const double scale = peak > 0.0 ? 1.0 / peak : 1.0;
        T* row = out.data.data() + b * static_cast<std::size_t>(2 * n_samples);
        for (int k = 0; k < n_samples; ++k) {
            row[2 * k] = static_cast<T>(y[static_cast<std::size_t>(k)].real() * scale);
            row[2 * k + 1] = static_cast<T>(y[static_cast<std::size_t>(k)].imag() * scale);
        }
    }
    return out;
}

template <typename T>
FreqRepresentation fr_forward(FrNet<T>& model, const std::vector<cplx>& samples) {
    Graph<T> g;
    const auto x = g.input(measurement_tensor<T>({samples}, model.config.n_samples));
    const auto out = model.forward(g, x, false);
    FreqRepresentation fr;
    fr.grid = Grid{model.config.grid};
    fr.kind = FreqRepresentation::Kind::Learned;
    fr.values.resize(static_cast<std::size_t>(model.config.grid));
    const Tensor<T>& raw = g.value(out);
    for (std::size_t i = 0; i < fr.values.size(); ++i)
        fr.values[i] = std::max(0.0, static_cast<double>(raw.data[i]));
    return fr;
}

template <typename T>
double counter_forward(CounterNet<T>& model, const std::vector<double>& fr_values) {
    if (static_cast<int>(fr_values.size()) != model.config.grid)
        throw std::invalid_argument("counter_forward: representation length mismatch");
    Graph<T> g;
    Tensor<T> x({1, 1, model.config.grid});
    for (std::size_t i = 0; i < fr_values.size(); ++i) x.data[i] = static_cast<T>(fr_values[i]);
    const auto out = model.forward(g, g.input(std::move(x)), false);
    return static_cast<double>(g.value(out).data[0]);
}

int clamp_count(double raw, int m_max) {
    return std::clamp(static_cast<int>(std::lround(raw)), 1, m_max);
}

template <typename T>
int count_components(CounterNet<T>& model, const FreqRepresentation& fr) {
    return clamp_count(counter_forward(model, fr.values), model.config.m_max);
}

template <typename T>
std::vector<Tensor<double>> inspect_encoder(const FrNet<T>& model, const Grid& grid) {
    const int c = model.config.encoder_channels();
    const int m = model.config.encoder_out;
    const int n = model.config.n_samples;
    std::vector<Tensor<double>> maps;
    maps.reserve(static_cast<std::size_t>(c));
    std::vector<cplx> row(static_cast<std::size_t>(n));
    for (int i = 0; i < c; ++i) {
        Tensor<double> map({m, grid.size});
        for (int j = 0; j < m; ++j) {
            const T* w = model.encoder_w.value.data.data() +
                         (static_cast<std::size_t>(i) * m + j) * (2 * n);
            for (int k = 0; k < n; ++k)
                row[static_cast<std::size_t>(k)] = cplx{static_cast<double>(w[2 * k]),
                                                        static_cast<double>(w[2 * k + 1])};
            for (int g = 0; g < grid.size; ++g)
                map.data[static_cast<std::size_t>(j) * grid.size + g] = std::abs(dtft(row, grid.point(g)));
        }
        maps.push_back(std::move(map));
    }
    return maps;
}

template struct FrNet<float>;
template struct FrNet<double>;
template struct CounterNet<float>;
template struct CounterNet<double>;
template Tensor<float> measurement_tensor<float>(const std::vector<std::vector<cplx>>&, int);
template Tensor<double> measurement_tensor<double>(const std::vector<std::vector<cplx>>&, int);
template FreqRepresentation fr_forward<float>(FrNet<float>&, const std::vector<cplx>&);
template FreqRepresentation fr_forward<double>(FrNet<double>&, const std::vector<cplx>&);
template double counter_forward<float>(CounterNet<float>&, const std::vector<double>&);
template double counter_forward<double>(CounterNet<double>&, const std::vector<double>&);
template int count_components<float>(CounterNet<float>&, const FreqRepresentation&);
template int count_components<double>(CounterNet<double>&, const FreqRepresentation&);
template std::vector<Tensor<double>> inspect_encoder<float>(const FrNet<float>&, const Grid&);
template std::vector<Tensor<double>> inspect_encoder<double>(const FrNet<double>&, const Grid&);

}  // namespace sfreq
