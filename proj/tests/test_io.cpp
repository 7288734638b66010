#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sfreq/serialize.hpp"
#include "sfreq/signal_model.hpp"

using namespace sfreq;

namespace {

std::string tmp_path(const std::string& name) {
    const std::string path = "/tmp/sfreq-io-" + name;
    std::remove(path.c_str());
    return path;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

FrNetConfig tiny_fr_config() {
    FrNetConfig cfg;
    cfg.n_samples = 4;
    cfg.channels = 3;
    cfg.encoder_out = 5;
    cfg.conv_layers = 2;
    cfg.conv_filter = 3;
    cfg.conv_channels = 3;
    cfg.decoder_kernel = 3;
    cfg.decoder_stride = 2;
    cfg.grid = 10;
    return cfg;
}

CounterConfig tiny_counter_config() {
    CounterConfig cfg;
    cfg.grid = 20;
    cfg.stem_filters = 4;
    cfg.stem_kernel = 5;
    cfg.stem_stride = 5;
    cfg.conv_layers = 2;
    cfg.conv_filters = 4;
    cfg.conv_kernel = 3;
    cfg.m_max = 10;
    return cfg;
}

bool bits_equal(const Tensor<float>& a, const Tensor<float>& b) {
    if (a.shape != b.shape) return false;
    return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("checksum matches the published test vectors") {
    CHECK(fnv1a64(nullptr, 0) == 0xcbf29ce484222325ull);
    const unsigned char a[] = {'a'};
    CHECK(fnv1a64(a, 1) == 0xaf63dc4c8601ec8cull);
    const unsigned char foobar[] = {'f', 'o', 'o', 'b', 'a', 'r'};
    CHECK(fnv1a64(foobar, 6) == 0x85944171f73967e8ull);
    const unsigned char magic[] = {'S', 'F', 'R', 'Q'};
    CHECK(fnv1a64(magic, 4) == 0x283e7824298b7c51ull);
}

TEST_CASE("container round-trips header and tensors bit-for-bit") {
    const std::string path = tmp_path("container.bin");
    std::vector<NamedTensor> tensors;
    tensors.push_back({"alpha", Tensor<float>({3, 1, 7})});
    tensors.push_back({"beta", Tensor<float>({4})});
    float x = -1.25f;
    for (float& v : tensors[0].value.data) v = (x *= -1.0625f);
    tensors[1].value.data = {0.0f, -0.0f, 3.5e-12f, 1.0e20f};
    write_container(path, "SFCK", "{\"purpose\":\"round-trip\"}", tensors);

    const Container back = read_container(path, "SFCK");
    CHECK(back.header_json == "{\"purpose\":\"round-trip\"}");
    REQUIRE(back.tensors.size() == 2);
    CHECK(back.tensors[0].name == "alpha");
    CHECK(back.tensors[1].name == "beta");
    CHECK(bits_equal(back.tensors[0].value, tensors[0].value));
    CHECK(bits_equal(back.tensors[1].value, tensors[1].value));
}

TEST_CASE("corruption anywhere in the file is rejected") {
    const std::string path = tmp_path("corrupt.bin");
    std::vector<NamedTensor> tensors{{"t", Tensor<float>({5, 5})}};
    for (std::size_t i = 0; i < tensors[0].value.data.size(); ++i)
        tensors[0].value.data[i] = static_cast<float>(i) * 0.25f;
    write_container(path, "SFCK", "{}", tensors);
    const std::string good = file_bytes(path);

    for (const std::size_t pos : {std::size_t{5}, good.size() / 2, good.size() - 1}) {
        std::string bad = good;
        bad[pos] = static_cast<char>(bad[pos] ^ 0x40);
        write_bytes(path, bad);
        CHECK_THROWS_AS(read_container(path, "SFCK"), IntegrityError);
    }

    write_bytes(path, good.substr(0, good.size() - 3));
    CHECK_THROWS_AS(read_container(path, "SFCK"), IntegrityError);

    write_bytes(path, good);
    CHECK_THROWS_AS(read_container(path, "SFRQ"), IntegrityError);  // wrong magic
    CHECK_NOTHROW(read_container(path, "SFCK"));
}

TEST_CASE("representation model files restore state, output, and metadata") {
    const std::string path = tmp_path("fr.model");
    FrNet<float> model(tiny_fr_config());
    model.init(3);
    // nudge the running statistics away from their defaults so they count
    for (auto& layer : model.bn) {
        layer.running_mean.data[0] = 0.125f;
        layer.running_var.data[1] = 2.5f;
    }
    TrainMeta meta;
    meta.seed = 3;
    meta.epochs = 17;
    meta.final_train_loss = 0.0625;
    meta.best_val_loss = 0.03125;
    save_fr_model(path, model, meta);

    LoadedFrModel back = load_fr_model(path);
    CHECK(back.meta.seed == 3);
    CHECK(back.meta.epochs == 17);
    CHECK(back.meta.final_train_loss == 0.0625);
    CHECK(back.meta.best_val_loss == 0.03125);
    CHECK(back.model.config.variant == "deepfreq");
    CHECK(back.model.config.grid == 10);

    auto a = model.state();
    auto b = back.model.state();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].first == b[i].first);
        CHECK(bits_equal(*a[i].second, *b[i].second));
    }

    std::vector<cplx> probe;
    RandomStream rng(9, 0);
    for (int k = 0; k < 4; ++k) probe.emplace_back(rng.normal(), rng.normal());
    const FreqRepresentation f0 = fr_forward(model, probe);
    const FreqRepresentation f1 = fr_forward(back.model, probe);
    REQUIRE(f0.values.size() == f1.values.size());
    for (std::size_t g = 0; g < f0.values.size(); ++g) CHECK(f0.values[g] == f1.values[g]);

    CHECK(model_file_kind(path) == "fr");
    CHECK_THROWS_AS(load_counter_model(path), IntegrityError);
}

TEST_CASE("counter model files round-trip") {
    const std::string path = tmp_path("counter.model");
    CounterNet<float> model(tiny_counter_config());
    model.init(11);
    model.stem_bn.running_mean.data[2] = -0.75f;
    save_counter_model(path, model, TrainMeta{});

    LoadedCounterModel back = load_counter_model(path);
    CHECK(back.model.config.stem_filters == 4);
    auto a = model.state();
    auto b = back.model.state();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(bits_equal(*a[i].second, *b[i].second));

    std::vector<double> fr_values(20);
    for (std::size_t g = 0; g < fr_values.size(); ++g) fr_values[g] = 0.05 * static_cast<double>(g);
    CHECK(counter_forward(model, fr_values) == counter_forward(back.model, fr_values));
    CHECK(model_file_kind(path) == "counter");
    CHECK_THROWS_AS(load_fr_model(path), IntegrityError);
}

TEST_CASE("a model file must carry exactly the tensors its config implies") {
    const std::string path = tmp_path("tamper.model");
    FrNet<float> model(tiny_fr_config());
    model.init(5);
    save_fr_model(path, model, TrainMeta{});
    Container c = read_container(path, "SFRQ");

    SUBCASE("dropping a tensor") {
        c.tensors.pop_back();
        write_container(path, "SFRQ", c.header_json, c.tensors);
        CHECK_THROWS_AS(load_fr_model(path), IntegrityError);
    }
    SUBCASE("renaming a tensor") {
        c.tensors[0].name = "imposter";
        write_container(path, "SFRQ", c.header_json, c.tensors);
        CHECK_THROWS_AS(load_fr_model(path), IntegrityError);
    }
    SUBCASE("duplicating a tensor") {
        c.tensors[1] = c.tensors[0];
        write_container(path, "SFRQ", c.header_json, c.tensors);
        CHECK_THROWS_AS(load_fr_model(path), IntegrityError);
    }
    SUBCASE("reshaping a tensor") {
        c.tensors[0].value = Tensor<float>({2, 2});
        write_container(path, "SFRQ", c.header_json, c.tensors);
        CHECK_THROWS_AS(load_fr_model(path), IntegrityError);
    }
}

TEST_CASE("dataset files round-trip every record exactly") {
    const std::string path = tmp_path("data.ds");
    GeneratorConfig cfg = GeneratorConfig::for_n(16);
    cfg.m_max = 4;
    cfg.sigma_min = 0.1;
    cfg.sigma_max = 0.4;
    cfg.seed = 77;
    Dataset ds{cfg, generate_records(cfg, 12)};
    save_dataset(path, ds);

    const Dataset back = load_dataset(path);
    CHECK(back.config.n_samples == 16);
    CHECK(back.config.m_max == 4);
    CHECK(back.config.sep_floor == cfg.sep_floor);
    CHECK(back.config.sep_spread_std == cfg.sep_spread_std);
    CHECK(back.config.amp_floor == cfg.amp_floor);
    CHECK(back.config.sigma_min == 0.1);
    CHECK(back.config.sigma_max == 0.4);
    CHECK(back.config.seed == 77);
    CHECK(back.config.distance == DistanceMode::Wrap);
    REQUIRE(back.records.size() == 12);
    for (std::size_t i = 0; i < back.records.size(); ++i) {
        const SampleRecord& a = ds.records[i];
        const SampleRecord& b = back.records[i];
        CHECK(a.sigma == b.sigma);
        REQUIRE(a.truth.count() == b.truth.count());
        for (int j = 0; j < a.truth.count(); ++j) {
            CHECK(a.truth.frequencies[static_cast<std::size_t>(j)] ==
                  b.truth.frequencies[static_cast<std::size_t>(j)]);
            CHECK(a.truth.amplitudes[static_cast<std::size_t>(j)] ==
                  b.truth.amplitudes[static_cast<std::size_t>(j)]);
        }
        REQUIRE(a.clean.size() == b.clean.size());
        REQUIRE(a.noisy.size() == b.noisy.size());
        for (std::size_t k = 0; k < a.clean.size(); ++k) {
            CHECK(a.clean[k] == b.clean[k]);
            CHECK(a.noisy[k] == b.noisy[k]);
        }
    }
}

TEST_CASE("saving the same content twice yields identical bytes") {
    GeneratorConfig cfg = GeneratorConfig::for_n(8);
    cfg.m_max = 2;
    cfg.seed = 5;
    Dataset ds{cfg, generate_records(cfg, 6)};
    const std::string p1 = tmp_path("rep1.ds");
    const std::string p2 = tmp_path("rep2.ds");
    save_dataset(p1, ds);
    save_dataset(p2, ds);
    CHECK(file_bytes(p1) == file_bytes(p2));

    FrNet<float> model(tiny_fr_config());
    model.init(21);
    const std::string m1 = tmp_path("rep1.model");
    const std::string m2 = tmp_path("rep2.model");
    save_fr_model(m1, model, TrainMeta{});
    save_fr_model(m2, model, TrainMeta{});
    CHECK(file_bytes(m1) == file_bytes(m2));
}

TEST_CASE("missing files and unwritable paths are reported") {
    CHECK_THROWS_AS(load_dataset("/tmp/sfreq-io-definitely-absent.ds"), std::invalid_argument);
    CHECK_THROWS_AS(load_fr_model("/tmp/sfreq-io-definitely-absent.model"), std::invalid_argument);
    FrNet<float> model(tiny_fr_config());
    CHECK_THROWS_AS(save_fr_model("/tmp/no-such-dir/x.model", model, TrainMeta{}),
                    std::invalid_argument);
}
