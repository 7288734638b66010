#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "sfreq/signal_model.hpp"

using namespace sfreq;

namespace {

// Reference synthesis in extended precision, written independently of the
// library path: evaluate each term with long double trig and sum.
std::vector<cplx> synth_reference(const SinusoidMixture& mix, int n) {
    std::vector<cplx> out(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) {
        long double re = 0.0L, im = 0.0L;
        for (int j = 0; j < mix.count(); ++j) {
            const long double phase =
                2.0L * std::numbers::pi_v<long double> * static_cast<long double>(mix.frequencies[static_cast<std::size_t>(j)]) * k;
            const long double ar = mix.amplitudes[static_cast<std::size_t>(j)].real();
            const long double ai = mix.amplitudes[static_cast<std::size_t>(j)].imag();
            const long double c = std::cos(phase), s = std::sin(phase);
            re += ar * c - ai * s;
            im += ar * s + ai * c;
        }
        out[static_cast<std::size_t>(k - 1)] = cplx{static_cast<double>(re), static_cast<double>(im)};
    }
    return out;
}

double norm2(const std::vector<cplx>& v) {
    double acc = 0.0;
    for (const cplx& x : v) acc += std::norm(x);
    return std::sqrt(acc);
}

const SinusoidMixture kThreeTone{
    {0.123, 0.456, 0.789},
    {cplx{1.0, 0.0}, cplx{0.3, -0.7}, cplx{-0.2, 0.5}},
};

}  // namespace

TEST_CASE("synthesize matches an extended-precision reference") {
    const int n = 50;
    const auto got = synthesize(kThreeTone, n);
    const auto want = synth_reference(kThreeTone, n);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k)
        CHECK(std::abs(got[k] - want[k]) < 1e-12);
}

TEST_CASE("synthesize of a unit tone advances phase by 2 pi f per sample") {
    const double f = 0.2371;
    const auto s = synthesize({{f}, {cplx{1.0, 0.0}}}, 30);
    for (const cplx& v : s) CHECK(std::abs(v) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        const cplx ratio = s[k + 1] / s[k];
        CHECK(std::arg(ratio) == doctest::Approx(2.0 * std::numbers::pi * f).epsilon(1e-9));
    }
}

TEST_CASE("synthesize is linear in the amplitudes") {
    SinusoidMixture a = kThreeTone;
    SinusoidMixture b = kThreeTone;
    b.amplitudes = {cplx{0.5, 0.5}, cplx{-1.0, 0.2}, cplx{0.0, -0.3}};
    SinusoidMixture ab = kThreeTone;
    for (std::size_t j = 0; j < ab.amplitudes.size(); ++j) ab.amplitudes[j] += b.amplitudes[j];

    const auto sa = synthesize(a, 40), sb = synthesize(b, 40), sab = synthesize(ab, 40);
    for (std::size_t k = 0; k < sab.size(); ++k)
        CHECK(std::abs(sab[k] - (sa[k] + sb[k])) < 1e-12);
}

TEST_CASE("synthesize rejects an empty mixture") {
    CHECK_THROWS(synthesize(SinusoidMixture{}, 10));
    CHECK_THROWS(synthesize(kThreeTone, 0));
}

TEST_CASE("dirichlet kernel agrees with the defining sum") {
    const int n = 50;
    for (const double f : {0.0, 0.013, 0.25, 0.4999, 0.5, 0.77, 0.999, -0.3, 1.7}) {
        cplx direct{0.0, 0.0};
        for (int k = 1; k <= n; ++k) {
            const double phase = -2.0 * std::numbers::pi * k * f;
            direct += cplx{std::cos(phase), std::sin(phase)};
        }
        const cplx closed = dirichlet_kernel(f, n);
        CHECK(std::abs(closed - direct) < 1e-9);
    }
}

TEST_CASE("dirichlet kernel peaks at integers and vanishes at other multiples of 1/N") {
    const int n = 50;
    CHECK(std::abs(dirichlet_kernel(0.0, n) - cplx{static_cast<double>(n), 0.0}) < 1e-12);
    CHECK(std::abs(dirichlet_kernel(1.0, n) - cplx{static_cast<double>(n), 0.0}) < 1e-12);
    CHECK(std::abs(dirichlet_kernel(-2.0, n) - cplx{static_cast<double>(n), 0.0}) < 1e-12);
    for (int j = 1; j < n; ++j) CHECK(std::abs(dirichlet_kernel(static_cast<double>(j) / n, n)) < 1e-9);
    // 1-periodic
    CHECK(std::abs(dirichlet_kernel(0.31, n) - dirichlet_kernel(1.31, n)) < 1e-9);
    // conjugate symmetric
    const cplx d = dirichlet_kernel(0.2, n);
    CHECK(std::abs(dirichlet_kernel(-0.2, n) - std::conj(d)) < 1e-12);
}

TEST_CASE("dtft of a mixture is the amplitude-weighted sum of shifted kernels") {
    const int n = 50;
    const auto samples = synthesize(kThreeTone, n);
    for (const double f : {0.05, 0.123, 0.3, 0.5, 0.9}) {
        cplx expected{0.0, 0.0};
        for (int j = 0; j < kThreeTone.count(); ++j)
            expected += kThreeTone.amplitudes[static_cast<std::size_t>(j)] *
                        dirichlet_kernel(f - kThreeTone.frequencies[static_cast<std::size_t>(j)], n);
        CHECK(std::abs(dtft(samples, f) - expected) < 1e-9);
    }
}

TEST_CASE("dtft matches its defining sum on arbitrary data") {
    std::vector<cplx> samples{{1.0, 2.0}, {-0.5, 0.25}, {0.0, -1.0}, {3.0, 0.0}};
    const double f = 0.37;
    cplx direct{0.0, 0.0};
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const double phase = -2.0 * std::numbers::pi * static_cast<double>(k + 1) * f;
        direct += samples[k] * cplx{std::cos(phase), std::sin(phase)};
    }
    CHECK(std::abs(dtft(samples, f) - direct) < 1e-12);
}

TEST_CASE("apply_noise reaches the requested noise-to-signal ratio exactly") {
    const auto clean = synthesize(kThreeTone, 50);
    RandomStream rng(5, stream_id("noise-test"));
    for (const double sigma : {0.01, 0.1, 0.5, 1.0, 2.0}) {
        const auto noisy = apply_noise(clean, sigma, rng);
        std::vector<cplx> z(clean.size());
        for (std::size_t k = 0; k < clean.size(); ++k) z[k] = noisy[k] - clean[k];
        CHECK(norm2(z) / norm2(clean) == doctest::Approx(sigma).epsilon(1e-12));
    }
}

TEST_CASE("apply_noise with sigma zero is the identity") {
    const auto clean = synthesize(kThreeTone, 20);
    RandomStream rng(5, 6);
    const auto noisy = apply_noise(clean, 0.0, rng);
    CHECK(noisy == clean);
}

TEST_CASE("apply_noise rejects an all-zero signal when noise is requested") {
    std::vector<cplx> zero(10, cplx{0.0, 0.0});
    RandomStream rng(1, 1);
    CHECK_THROWS(apply_noise(zero, 0.5, rng));
    CHECK(apply_noise(zero, 0.0, rng) == zero);
}

TEST_CASE("snr in decibels inverts the noise ratio") {
    CHECK(snr_db(1.0) == doctest::Approx(0.0));
    CHECK(snr_db(0.1) == doctest::Approx(20.0));
    CHECK(snr_db(0.5) == doctest::Approx(6.0206).epsilon(1e-4));
    CHECK(std::isinf(snr_db(0.0)));
}

TEST_CASE("ground truth representation has unit peaks and Gaussian falloff") {
    const int n = 50;
    const double std_dev = 0.3 / n;
    SinusoidMixture mix{{0.25, 0.75}, {cplx{1.0, 0.0}, cplx{1.0, 0.0}}};

    // far apart: each peak is an isolated unit-height kernel
    CHECK(ground_truth_fr_at(mix, 0.25, std_dev) == doctest::Approx(1.0).epsilon(1e-12));
    const double off = ground_truth_fr_at(mix, 0.25 + std_dev, std_dev);
    CHECK(off == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
}

TEST_CASE("ground truth representation adds up at the midpoint of a close pair") {
    const int n = 50;
    const double std_dev = 0.3 / n;
    const double d = 1.0 / (2 * n);
    SinusoidMixture mix{{0.5 - d / 2, 0.5 + d / 2}, {cplx{1.0, 0.0}, cplx{1.0, 0.0}}};
    const double expected = 2.0 * std::exp(-(d / 2) * (d / 2) / (2.0 * std_dev * std_dev));
    CHECK(ground_truth_fr_at(mix, 0.5, std_dev) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ground truth representation wraps around the circle") {
    const double std_dev = 0.3 / 50;
    SinusoidMixture mix{{0.001}, {cplx{1.0, 0.0}}};
    CHECK(ground_truth_fr_at(mix, 0.999, std_dev) ==
          doctest::Approx(std::exp(-0.002 * 0.002 / (2 * std_dev * std_dev))).epsilon(1e-9));
    // plain mode sees the long way around instead
    CHECK(ground_truth_fr_at(mix, 0.999, std_dev, DistanceMode::Plain) < 1e-300);
}

TEST_CASE("ground truth grid evaluation matches pointwise evaluation") {
    const Grid grid{100};
    const double std_dev = 0.3 / 50;
    const auto fr = ground_truth_fr(kThreeTone, grid, std_dev);
    REQUIRE(fr.values.size() == 100);
    CHECK(fr.kind == FreqRepresentation::Kind::Target);
    for (int g = 0; g < grid.size; ++g)
        CHECK(fr.values[static_cast<std::size_t>(g)] ==
              doctest::Approx(ground_truth_fr_at(kThreeTone, grid.point(g), std_dev)).epsilon(1e-12));
}

TEST_CASE("sampled mixtures respect the configured floors") {
    GeneratorConfig cfg = GeneratorConfig::for_n(50);
    cfg.m_max = 10;
    RandomStream rng(99, stream_id("mixture-stat"));
    int max_m_seen = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const auto mix = sample_mixture(cfg, rng);
        REQUIRE(mix.count() >= 1);
        REQUIRE(mix.count() <= cfg.m_max);
        max_m_seen = std::max(max_m_seen, mix.count());
        for (int j = 0; j < mix.count(); ++j) {
            const double f = mix.frequencies[static_cast<std::size_t>(j)];
            CHECK(f >= 0.0);
            CHECK(f < 1.0);
            CHECK(std::abs(mix.amplitudes[static_cast<std::size_t>(j)]) >= cfg.amp_floor);
            for (int l = j + 1; l < mix.count(); ++l)
                CHECK(wrap_distance(f, mix.frequencies[static_cast<std::size_t>(l)]) >=
                      cfg.sep_floor - 1e-12);
        }
    }
    CHECK(max_m_seen == cfg.m_max);
}

TEST_CASE("sampled amplitude phases cover the circle uniformly") {
    GeneratorConfig cfg = GeneratorConfig::for_n(50);
    cfg.m_max = 1;
    RandomStream rng(3, stream_id("phase-stat"));
    std::vector<int> bins(8, 0);
    const int trials = 8000;
    for (int t = 0; t < trials; ++t) {
        const auto mix = sample_mixture(cfg, rng);
        double theta = std::arg(mix.amplitudes[0]);
        if (theta < 0) theta += 2.0 * std::numbers::pi;
        const int b = std::min(7, static_cast<int>(theta / (2.0 * std::numbers::pi) * 8));
        ++bins[static_cast<std::size_t>(b)];
    }
    for (const int b : bins) CHECK(std::abs(b - trials / 8) < 150);
}

TEST_CASE("record generation is reproducible and index-independent") {
    GeneratorConfig cfg = GeneratorConfig::for_n(50);
    cfg.seed = 77;
    const auto a = generate_record(cfg, 12);
    const auto b = generate_record(cfg, 12);
    CHECK(a.noisy == b.noisy);
    CHECK(a.truth.frequencies == b.truth.frequencies);
    CHECK(a.sigma == b.sigma);
    const auto c = generate_record(cfg, 13);
    CHECK(a.noisy != c.noisy);
}

TEST_CASE("record sigma stays inside the configured range") {
    GeneratorConfig cfg = GeneratorConfig::for_n(50);
    cfg.sigma_min = 0.1;
    cfg.sigma_max = 0.4;
    for (std::uint64_t i = 0; i < 200; ++i) {
        const auto rec = generate_record(cfg, i);
        CHECK(rec.sigma >= cfg.sigma_min);
        CHECK(rec.sigma <= cfg.sigma_max);
        CHECK(rec.n_samples() == cfg.n_samples);
    }
}

TEST_CASE("batch generation is identical for any thread count") {
    GeneratorConfig cfg = GeneratorConfig::for_n(50);
    cfg.seed = 5;
    const auto serial = generate_records(cfg, 64, 1);
    const auto parallel = generate_records(cfg, 64, 4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].noisy == parallel[i].noisy);
        CHECK(serial[i].truth.frequencies == parallel[i].truth.frequencies);
    }
    // and element i matches the single-record path
    const auto solo = generate_record(cfg, 17);
    CHECK(serial[17].noisy == solo.noisy);
}
