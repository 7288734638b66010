#include "sfreq/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "sfreq/parallel.hpp"

namespace sfreq {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double l2_norm(const std::vector<cplx>& v) {
    double acc = 0.0;
    for (const cplx& x : v) acc += std::norm(x);
    return std::sqrt(acc);
}
}  // namespace

std::vector<cplx> synthesize(const SinusoidMixture& mix, int n) {
    if (mix.count() == 0) throw std::invalid_argument("synthesize: empty mixture");
    if (mix.frequencies.size() != mix.amplitudes.size())
        throw std::invalid_argument("synthesize: frequency/amplitude length mismatch");
    if (n < 1) throw std::invalid_argument("synthesize: n must be positive");

    std::vector<cplx> out(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) {
        cplx acc{0.0, 0.0};
        for (int j = 0; j < mix.count(); ++j) {
            const double phase = kTwoPi * mix.frequencies[static_cast<std::size_t>(j)] * k;
            acc += mix.amplitudes[static_cast<std::size_t>(j)] * cplx{std::cos(phase), std::sin(phase)};
        }
        out[static_cast<std::size_t>(k - 1)] = acc;
    }
    return out;
}

std::vector<cplx> apply_noise(const std::vector<cplx>& clean, double sigma, RandomStream& rng) {
    if (sigma < 0) throw std::invalid_argument("apply_noise: sigma must be non-negative");
    if (sigma == 0.0) return clean;

    const double clean_norm = l2_norm(clean);
    if (clean_norm == 0.0) throw std::invalid_argument("apply_noise: all-zero input with sigma > 0");

    std::vector<cplx> noise(clean.size());
    double noise_norm_sq = 0.0;
    for (cplx& z : noise) {
        z = cplx{rng.normal(), rng.normal()};
        noise_norm_sq += std::norm(z);
    }
    const double scale = sigma * clean_norm / std::sqrt(noise_norm_sq);

    std::vector<cplx> out(clean.size());
    for (std::size_t k = 0; k < clean.size(); ++k) out[k] = clean[k] + scale * noise[k];
    return out;
}

SinusoidMixture sample_mixture(const GeneratorConfig& cfg, RandomStream& rng, int max_retries) {
    if (cfg.m_max < 1) throw std::invalid_argument("sample_mixture: m_max must be >= 1");
    if (cfg.sep_floor <= 0 || cfg.amp_floor <= 0)
        throw std::invalid_argument("sample_mixture: separation and amplitude floors must be positive");

    const int m = static_cast<int>(rng.uniform_int(1, static_cast<std::uint64_t>(cfg.m_max)));

    for (int attempt = 0; attempt < max_retries; ++attempt) {
        std::vector<double> freqs(static_cast<std::size_t>(m));
        freqs[0] = rng.uniform();
        for (int j = 1; j < m; ++j) {
            const double sep = cfg.sep_floor + std::fabs(rng.normal()) * cfg.sep_spread_std;
            freqs[static_cast<std::size_t>(j)] =
                std::fmod(freqs[static_cast<std::size_t>(j - 1)] + sep, 1.0);
        }

        bool ok = true;
        for (int j = 0; j < m && ok; ++j)
            for (int l = j + 1; l < m; ++l)
                if (frequency_distance(freqs[static_cast<std::size_t>(j)],
                                       freqs[static_cast<std::size_t>(l)], cfg.distance) <
                    cfg.sep_floor) {
                    ok = false;
                    break;
                }
        if (!ok) continue;

        SinusoidMixture mix;
        mix.frequencies = std::move(freqs);
        mix.amplitudes.resize(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            const double mag = cfg.amp_floor + std::fabs(rng.normal());
            const double theta = rng.uniform(0.0, kTwoPi);
            mix.amplitudes[static_cast<std::size_t>(j)] =
                mag * cplx{std::cos(theta), std::sin(theta)};
        }
        return mix;
    }
    throw std::runtime_error("sample_mixture: separation constraint infeasible for this config");
}

SampleRecord generate_record(const GeneratorConfig& cfg, std::uint64_t record_index) {
    RandomStream rng(cfg.seed, stream_id("record", record_index));
    SampleRecord rec;
    rec.truth = sample_mixture(cfg, rng);
    rec.clean = synthesize(rec.truth, cfg.n_samples);
    rec.sigma = cfg.sigma_min == cfg.sigma_max ? cfg.sigma_min
                                               : rng.uniform(cfg.sigma_min, cfg.sigma_max);
    rec.noisy = apply_noise(rec.clean, rec.sigma, rng);
    return rec;
}

std::vector<SampleRecord> generate_records(const GeneratorConfig& cfg, int count, int threads) {
    std::vector<SampleRecord> records(static_cast<std::size_t>(count));
    parallel_for(count, threads, [&](int i) {
        records[static_cast<std::size_t>(i)] = generate_record(cfg, static_cast<std::uint64_t>(i));
    });
    return records;
}

cplx dirichlet_kernel(double f, int n) {
    if (n < 1) throw std::invalid_argument("dirichlet_kernel: n must be positive");
    // 1-periodic; reduce to r in [-1/2, 1/2] and use sin(pi n r)/sin(pi r).
    const double r = f - std::round(f);
    if (r == 0.0) return cplx{static_cast<double>(n), 0.0};
    const double ratio = std::sin(std::numbers::pi * n * r) / std::sin(std::numbers::pi * r);
    const double phase = -std::numbers::pi * (n + 1) * r;
    return ratio * cplx{std::cos(phase), std::sin(phase)};
}

cplx dtft(const std::vector<cplx>& samples, double f) {
    cplx acc{0.0, 0.0};
    for (std::size_t k = 1; k <= samples.size(); ++k) {
        const double phase = -kTwoPi * static_cast<double>(k) * f;
        acc += samples[k - 1] * cplx{std::cos(phase), std::sin(phase)};
    }
    return acc;
}

double ground_truth_fr_at(const SinusoidMixture& mix, double u, double kernel_std,
                          DistanceMode mode) {
    if (kernel_std <= 0) throw std::invalid_argument("ground_truth_fr: kernel_std must be positive");
    double acc = 0.0;
    for (const double f : mix.frequencies) {
        const double d = frequency_distance(u, f, mode);
        acc += std::exp(-d * d / (2.0 * kernel_std * kernel_std));
    }
    return acc;
}

FreqRepresentation ground_truth_fr(const SinusoidMixture& mix, const Grid& grid, double kernel_std,
                                   DistanceMode mode) {
    FreqRepresentation fr;
    fr.grid = grid;
    fr.kind = FreqRepresentation::Kind::Target;
    fr.values.resize(static_cast<std::size_t>(grid.size));
    for (int g = 0; g < grid.size; ++g)
        fr.values[static_cast<std::size_t>(g)] = ground_truth_fr_at(mix, grid.point(g), kernel_std, mode);
    return fr;
}

}  // namespace sfreq
