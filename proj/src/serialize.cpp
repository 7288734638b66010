#include "sfreq/serialize.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <utility>

namespace sfreq {
namespace {

using nlohmann::json;

constexpr std::uint16_t kFormatVersion = 1;
constexpr std::uint8_t kTagF32 = 1;
constexpr std::uint8_t kTagF64 = 2;

// All multi-byte fields are little-endian on disk, assembled bytewise so the
// layout does not depend on the host.
struct ByteSink {
    std::string bytes;

    void u8(std::uint8_t v) { bytes.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) {
        std::uint32_t b;
        std::memcpy(&b, &v, sizeof b);
        u32(b);
    }
    void f64(double v) {
        std::uint64_t b;
        std::memcpy(&b, &v, sizeof b);
        u64(b);
    }
    void raw(const void* p, std::size_t n) { bytes.append(static_cast<const char*>(p), n); }
    void str16(const std::string& s) {
        if (s.size() > 0xFFFF) throw std::invalid_argument("serialize: name too long");
        u16(static_cast<std::uint16_t>(s.size()));
        raw(s.data(), s.size());
    }
    void str32(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }

private:
    void put(std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
};

struct ByteSource {
    const unsigned char* data;
    std::size_t size;
    std::size_t pos = 0;
    std::string label;

    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    float f32() {
        const std::uint32_t b = u32();
        float v;
        std::memcpy(&v, &b, sizeof v);
        return v;
    }
    double f64() {
        const std::uint64_t b = u64();
        double v;
        std::memcpy(&v, &b, sizeof v);
        return v;
    }
    std::string str16() { return str(u16()); }
    std::string str32() { return str(u32()); }

private:
    const unsigned char* take(std::size_t n) {
        if (size - pos < n) throw IntegrityError(label + ": truncated");
        const unsigned char* p = data + pos;
        pos += n;
        return p;
    }
    std::uint64_t get(int width) {
        const unsigned char* p = take(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= std::uint64_t{p[i]} << (8 * i);
        return v;
    }
    std::string str(std::size_t n) {
        const unsigned char* p = take(n);
        return std::string(reinterpret_cast<const char*>(p), n);
    }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw std::invalid_argument("read failed: " + path);
    return bytes;
}

void spill(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::invalid_argument("cannot write file: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw std::invalid_argument("write failed: " + path);
}

// Checks length, checksum, magic and version, and hands back a source
// positioned just past the version field.
ByteSource open_checked(const std::string& bytes, const std::string& magic, const std::string& label) {
    const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 14) throw IntegrityError(label + ": truncated");
    const std::size_t body = bytes.size() - 8;
    ByteSource tail{data, bytes.size(), body, label};
    if (tail.u64() != fnv1a64(data, body)) throw IntegrityError(label + ": checksum mismatch");
    ByteSource src{data, body, 0, label};
    std::string found(reinterpret_cast<const char*>(data), 4);
    src.pos = 4;
    if (found != magic) throw IntegrityError(label + ": bad magic '" + found + "'");
    const std::uint16_t version = src.u16();
    if (version != kFormatVersion)
        throw IntegrityError(label + ": unsupported format version " + std::to_string(version));
    return src;
}

std::string label_for(const std::string& magic) {
    if (magic == "SFRQ") return "model file";
    if (magic == "SFDS") return "dataset file";
    if (magic == "SFCK") return "checkpoint file";
    return magic + " file";
}

json fr_config_json(const FrNetConfig& c) {
    return json{{"variant", c.variant},
                {"n_samples", c.n_samples},
                {"channels", c.channels},
                {"encoder_out", c.encoder_out},
                {"conv_layers", c.conv_layers},
                {"conv_filter", c.conv_filter},
                {"conv_channels", c.conv_channels},
                {"decoder_kernel", c.decoder_kernel},
                {"decoder_stride", c.decoder_stride},
                {"grid", c.grid}};
}

FrNetConfig fr_config_from(const json& j) {
    FrNetConfig c;
    c.variant = j.at("variant").get<std::string>();
    c.n_samples = j.at("n_samples").get<int>();
    c.channels = j.at("channels").get<int>();
    c.encoder_out = j.at("encoder_out").get<int>();
    c.conv_layers = j.at("conv_layers").get<int>();
    c.conv_filter = j.at("conv_filter").get<int>();
    c.conv_channels = j.at("conv_channels").get<int>();
    c.decoder_kernel = j.at("decoder_kernel").get<int>();
    c.decoder_stride = j.at("decoder_stride").get<int>();
    c.grid = j.at("grid").get<int>();
    return c;
}

json counter_config_json(const CounterConfig& c) {
    return json{{"grid", c.grid},
                {"stem_filters", c.stem_filters},
                {"stem_kernel", c.stem_kernel},
                {"stem_stride", c.stem_stride},
                {"conv_layers", c.conv_layers},
                {"conv_filters", c.conv_filters},
                {"conv_kernel", c.conv_kernel},
                {"m_max", c.m_max}};
}

CounterConfig counter_config_from(const json& j) {
    CounterConfig c;
    c.grid = j.at("grid").get<int>();
    c.stem_filters = j.at("stem_filters").get<int>();
    c.stem_kernel = j.at("stem_kernel").get<int>();
    c.stem_stride = j.at("stem_stride").get<int>();
    c.conv_layers = j.at("conv_layers").get<int>();
    c.conv_filters = j.at("conv_filters").get<int>();
    c.conv_kernel = j.at("conv_kernel").get<int>();
    c.m_max = j.at("m_max").get<int>();
    return c;
}

json meta_json(const TrainMeta& m) {
    // A run that never validated carries an infinite best loss; JSON has no
    // infinity literal, so null stands in for it.
    return json{{"seed", m.seed},
                {"epochs", m.epochs},
                {"final_train_loss", m.final_train_loss},
                {"best_val_loss",
                 std::isfinite(m.best_val_loss) ? json(m.best_val_loss) : json()}};
}

TrainMeta meta_from(const json& j) {
    TrainMeta m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.epochs = j.at("epochs").get<int>();
    m.final_train_loss = j.at("final_train_loss").get<double>();
    const json& best = j.at("best_val_loss");
    m.best_val_loss = best.is_null() ? std::numeric_limits<double>::infinity()
                                     : best.get<double>();
    return m;
}

json parse_header(const std::string& text, const std::string& label) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw IntegrityError(label + ": header is not valid JSON");
    return j;
}

// Copies the tensor table onto a freshly constructed network, insisting that
// names, shapes, and entry counts line up exactly.
template <typename Net>
void restore_state(Net& net, const std::vector<NamedTensor>& tensors) {
    std::unordered_map<std::string, const NamedTensor*> table;
    for (const NamedTensor& t : tensors) {
        if (!table.emplace(t.name, &t).second)
            throw IntegrityError("model file: duplicate tensor '" + t.name + "'");
    }
    const auto state = net.state();
    if (state.size() != tensors.size())
        throw IntegrityError("model file: expected " + std::to_string(state.size()) +
                             " tensors, found " + std::to_string(tensors.size()));
    for (const auto& [name, slot] : state) {
        const auto it = table.find(name);
        if (it == table.end()) throw IntegrityError("model file: missing tensor '" + name + "'");
        if (it->second->value.shape != slot->shape)
            throw IntegrityError("model file: tensor '" + name + "' has shape " +
                                 shape_string(it->second->value.shape) + ", expected " +
                                 shape_string(slot->shape));
        *slot = it->second->value;
    }
}

template <typename Net>
void save_model(const std::string& path, Net& net, const json& config, const std::string& kind,
                const TrainMeta& meta) {
    std::vector<NamedTensor> tensors;
    for (const auto& [name, slot] : net.state()) tensors.push_back({name, *slot});
    const json header{{"kind", kind}, {"config", config}, {"meta", meta_json(meta)}};
    write_container(path, "SFRQ", header.dump(), tensors);
}

json model_header(const Container& c, const std::string& expect_kind) {
    const json header = parse_header(c.header_json, "model file");
    const std::string kind = header.at("kind").get<std::string>();
    if (kind != expect_kind)
        throw IntegrityError("model file: kind is '" + kind + "', expected '" + expect_kind + "'");
    return header;
}

}  // namespace

std::uint64_t fnv1a64(const unsigned char* data, std::size_t len, std::uint64_t state) {
    for (std::size_t i = 0; i < len; ++i) {
        state ^= data[i];
        state *= 0x100000001B3ull;
    }
    return state;
}

void write_container(const std::string& path, const std::string& magic,
                     const std::string& header_json, const std::vector<NamedTensor>& tensors) {
    if (magic.size() != 4) throw std::invalid_argument("container: magic must be 4 bytes");
    ByteSink sink;
    sink.raw(magic.data(), 4);
    sink.u16(kFormatVersion);
    sink.str32(header_json);
    sink.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const NamedTensor& t : tensors) {
        sink.str16(t.name);
        sink.u8(kTagF32);
        sink.u8(static_cast<std::uint8_t>(t.value.rank()));
        for (const int d : t.value.shape) sink.u32(static_cast<std::uint32_t>(d));
        for (const float v : t.value.data) sink.f32(v);
    }
    sink.u64(fnv1a64(reinterpret_cast<const unsigned char*>(sink.bytes.data()), sink.bytes.size()));
    spill(path, sink.bytes);
}

Container read_container(const std::string& path, const std::string& expect_magic) {
    const std::string label = label_for(expect_magic);
    const std::string bytes = slurp(path);
    ByteSource src = open_checked(bytes, expect_magic, label);
    Container out;
    out.header_json = src.str32();
    const std::uint32_t count = src.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = src.str16();
        const std::uint8_t tag = src.u8();
        if (tag != kTagF32 && tag != kTagF64)
            throw IntegrityError(label + ": unknown dtype tag " + std::to_string(tag));
        const int rank = src.u8();
        if (rank < 1 || rank > 8) throw IntegrityError(label + ": bad tensor rank");
        std::vector<int> shape;
        std::int64_t numel = 1;
        for (int r = 0; r < rank; ++r) {
            const std::uint32_t d = src.u32();
            if (d == 0 || d > (1u << 30)) throw IntegrityError(label + ": bad dimension");
            shape.push_back(static_cast<int>(d));
            numel *= d;
            if (numel > (std::int64_t{1} << 31)) throw IntegrityError(label + ": tensor too large");
        }
        const std::size_t payload = static_cast<std::size_t>(numel) * (tag == kTagF32 ? 4 : 8);
        if (src.size - src.pos < payload) throw IntegrityError(label + ": truncated");
        t.value = Tensor<float>(shape);
        if (tag == kTagF32)
            for (float& v : t.value.data) v = src.f32();
        else
            for (float& v : t.value.data) v = static_cast<float>(src.f64());
        out.tensors.push_back(std::move(t));
    }
    return out;
}

void save_fr_model(const std::string& path, FrNet<float>& model, const TrainMeta& meta) {
    save_model(path, model, fr_config_json(model.config), "fr", meta);
}

void save_counter_model(const std::string& path, CounterNet<float>& model, const TrainMeta& meta) {
    save_model(path, model, counter_config_json(model.config), "counter", meta);
}

std::string model_file_kind(const std::string& path) {
    const Container c = read_container(path, "SFRQ");
    return parse_header(c.header_json, "model file").at("kind").get<std::string>();
}

LoadedFrModel load_fr_model(const std::string& path) {
    const Container c = read_container(path, "SFRQ");
    const json header = model_header(c, "fr");
    LoadedFrModel out{FrNet<float>(fr_config_from(header.at("config"))), meta_from(header.at("meta"))};
    restore_state(out.model, c.tensors);
    return out;
}

LoadedCounterModel load_counter_model(const std::string& path) {
    const Container c = read_container(path, "SFRQ");
    const json header = model_header(c, "counter");
    LoadedCounterModel out{CounterNet<float>(counter_config_from(header.at("config"))),
                           meta_from(header.at("meta"))};
    restore_state(out.model, c.tensors);
    return out;
}

void save_dataset(const std::string& path, const Dataset& ds) {
    const GeneratorConfig& g = ds.config;
    const json header{{"n_samples", g.n_samples},
                      {"m_max", g.m_max},
                      {"sep_floor", g.sep_floor},
                      {"sep_spread_std", g.sep_spread_std},
                      {"amp_floor", g.amp_floor},
                      {"sigma_min", g.sigma_min},
                      {"sigma_max", g.sigma_max},
                      {"seed", g.seed},
                      {"distance", g.distance == DistanceMode::Wrap ? "wrap" : "plain"}};
    ByteSink sink;
    sink.raw("SFDS", 4);
    sink.u16(kFormatVersion);
    sink.str32(header.dump());
    sink.u32(static_cast<std::uint32_t>(ds.records.size()));
    for (const SampleRecord& r : ds.records) {
        sink.u32(static_cast<std::uint32_t>(r.truth.count()));
        for (int j = 0; j < r.truth.count(); ++j) {
            sink.f64(r.truth.frequencies[static_cast<std::size_t>(j)]);
            sink.f64(r.truth.amplitudes[static_cast<std::size_t>(j)].real());
            sink.f64(r.truth.amplitudes[static_cast<std::size_t>(j)].imag());
        }
        sink.f64(r.sigma);
        sink.u32(static_cast<std::uint32_t>(r.clean.size()));
        for (const cplx& v : r.clean) {
            sink.f64(v.real());
            sink.f64(v.imag());
        }
        for (const cplx& v : r.noisy) {
            sink.f64(v.real());
            sink.f64(v.imag());
        }
    }
    sink.u64(fnv1a64(reinterpret_cast<const unsigned char*>(sink.bytes.data()), sink.bytes.size()));
    spill(path, sink.bytes);
}

Dataset load_dataset(const std::string& path) {
    const std::string label = "dataset file";
    const std::string bytes = slurp(path);
    ByteSource src = open_checked(bytes, "SFDS", label);
    const json header = parse_header(src.str32(), label);
    Dataset ds;
    ds.config.n_samples = header.at("n_samples").get<int>();
    ds.config.m_max = header.at("m_max").get<int>();
    ds.config.sep_floor = header.at("sep_floor").get<double>();
    ds.config.sep_spread_std = header.at("sep_spread_std").get<double>();
    ds.config.amp_floor = header.at("amp_floor").get<double>();
    ds.config.sigma_min = header.at("sigma_min").get<double>();
    ds.config.sigma_max = header.at("sigma_max").get<double>();
    ds.config.seed = header.at("seed").get<std::uint64_t>();
    const std::string mode = header.at("distance").get<std::string>();
    if (mode != "wrap" && mode != "plain") throw IntegrityError(label + ": unknown distance mode");
    ds.config.distance = mode == "wrap" ? DistanceMode::Wrap : DistanceMode::Plain;
    const std::uint32_t count = src.u32();
    ds.records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        SampleRecord r;
        const std::uint32_t m = src.u32();
        if (m == 0 || m > (1u << 20)) throw IntegrityError(label + ": bad component count");
        for (std::uint32_t j = 0; j < m; ++j) {
            r.truth.frequencies.push_back(src.f64());
            const double re = src.f64();
            const double im = src.f64();
            r.truth.amplitudes.emplace_back(re, im);
        }
        r.sigma = src.f64();
        const std::uint32_t n = src.u32();
        if (n == 0 || n > (1u << 20)) throw IntegrityError(label + ": bad sample count");
        r.clean.reserve(n);
        r.noisy.reserve(n);
        for (std::uint32_t k = 0; k < n; ++k) {
            const double re = src.f64();
            const double im = src.f64();
            r.clean.emplace_back(re, im);
        }
        for (std::uint32_t k = 0; k < n; ++k) {
            const double re = src.f64();
            const double im = src.f64();
            r.noisy.emplace_back(re, im);
        }
        ds.records.push_back(std::move(r));
    }
    return ds;
}

void save_checkpoint(const std::string& path, const std::string& header_json,
                     const std::vector<NamedTensor>& tensors) {
    write_container(path, "SFCK", header_json, tensors);
}

Container load_checkpoint(const std::string& path) {
    return read_container(path, "SFCK");
}

}  // namespace sfreq
