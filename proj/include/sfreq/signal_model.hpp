#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "sfreq/representation.hpp"
#include "sfreq/rng.hpp"

namespace sfreq {

using cplx = std::complex<double>;

// A multisinusoidal signal: S(t) = sum_j a_j * exp(i 2 pi f_j t).
struct SinusoidMixture {
    std::vector<double> frequencies;  // cycles/sample, each in [0, 1)
    std::vector<cplx> amplitudes;     // same length

    int count() const { return static_cast<int>(frequencies.size()); }
};

// N measurements of a mixture: y_k = S(k) + z_k, k = 1..N, with the noise
// scaled so that ||z|| / ||S|| equals `sigma` exactly.
struct SampleRecord {
    std::vector<cplx> clean;
    std::vector<cplx> noisy;
    double sigma = 0.0;
    SinusoidMixture truth;

    int n_samples() const { return static_cast<int>(clean.size()); }
};

struct GeneratorConfig {
    int n_samples = 50;
    int m_max = 10;
    double sep_floor = 1.0 / 50;       // minimum pairwise wrap separation
    double sep_spread_std = 2.5 / 50;  // spread of the separation law
    double amp_floor = 0.1;
    double sigma_min = 0.0;
    double sigma_max = 1.0;
    std::uint64_t seed = 0;
    DistanceMode distance = DistanceMode::Wrap;

    static GeneratorConfig for_n(int n) {
        GeneratorConfig cfg;
        cfg.n_samples = n;
        cfg.sep_floor = 1.0 / n;
        cfg.sep_spread_std = 2.5 / n;
        return cfg;
    }
};

// S(k) for k = 1..n, in double precision. Rejects empty mixtures.
std::vector<cplx> synthesize(const SinusoidMixture& mix, int n);

// clean + z with z i.i.d. circular Gaussian rescaled so ||z|| = sigma*||clean||.
// sigma == 0 returns the input unchanged. Rejects an all-zero input when
// sigma > 0 (the rescaling is undefined).
std::vector<cplx> apply_noise(const std::vector<cplx>& clean, double sigma, RandomStream& rng);

inline double snr_db(double sigma) {
    return sigma > 0 ? -20.0 * std::log10(sigma) : std::numeric_limits<double>::infinity();
}

// Draw one mixture: m uniform on {1..m_max}, consecutive separations
// sep_floor + |Normal(0, sep_spread_std^2)| accumulated from a uniform start,
// amplitudes (amp_floor + |Normal(0,1)|) * exp(i*theta) with uniform phase.
// Draws are rejected until every pairwise wrap distance clears sep_floor;
// throws after `max_retries` rejections.
SinusoidMixture sample_mixture(const GeneratorConfig& cfg, RandomStream& rng, int max_retries = 1000);

// One full record: mixture, clean samples, sigma uniform on the config range,
// noise. Each record index has its own derived stream, so generation order
// (or parallelism) cannot change the output.
SampleRecord generate_record(const GeneratorConfig& cfg, std::uint64_t record_index);

std::vector<SampleRecord> generate_records(const GeneratorConfig& cfg, int count, int threads = 1);

// Dirichlet kernel D_N(f) = sum_{k=1..N} exp(-i 2 pi k f), evaluated in
// closed form; D_N is 1-periodic and equals N at integer f.
cplx dirichlet_kernel(double f, int n);

// DTFT of the samples at frequency f: sum_{k=1..N} samples[k-1] exp(-i 2 pi k f).
cplx dtft(const std::vector<cplx>& samples, double f);

// Ground-truth frequency representation: unit-height Gaussian kernels of
// width `kernel_std` at each mixture frequency, evaluated at u.
double ground_truth_fr_at(const SinusoidMixture& mix, double u, double kernel_std,
                          DistanceMode mode = DistanceMode::Wrap);

FreqRepresentation ground_truth_fr(const SinusoidMixture& mix, const Grid& grid, double kernel_std,
                                   DistanceMode mode = DistanceMode::Wrap);

}  // namespace sfreq
