#include "sfreq/spectral_estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "sfreq/hermitian_eig.hpp"

namespace sfreq {

namespace {
constexpr double kEigenFloor = 1e-12;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double set_variance(const double* begin, int count) {
    double mean = 0.0;
    for (int i = 0; i < count; ++i) mean += begin[i];
    mean /= count;
    double acc = 0.0;
    for (int i = 0; i < count; ++i) acc += (begin[i] - mean) * (begin[i] - mean);
    return acc / count;
}

// Shared argmin over k of -n (L-k) log(GM_k / AM_k) + penalty(k).
template <typename Penalty>
int information_criterion_order(const CovarianceEstimate& cov, Penalty penalty) {
    const int L = static_cast<int>(cov.eigenvalues.size());
    if (L < 1 || cov.snapshots < 1)
        throw std::invalid_argument("order selection: eigenvalues and snapshots required");

    std::vector<double> lam(cov.eigenvalues);
    for (double& v : lam) v = std::max(v, kEigenFloor);

    int best_k = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < L; ++k) {
        double log_sum = 0.0, sum = 0.0;
        const int tail = L - k;
        for (int i = k; i < L; ++i) {
            log_sum += std::log(lam[static_cast<std::size_t>(i)]);
            sum += lam[static_cast<std::size_t>(i)];
        }
        const double log_gm = log_sum / tail;
        const double log_am = std::log(sum / tail);
        const double value = -static_cast<double>(cov.snapshots) * tail * (log_gm - log_am) + penalty(k);
        if (value < best) {
            best = value;
            best_k = k;
        }
    }
    return best_k;
}

}  // namespace

CovarianceEstimate CovarianceEstimate::from_eigenvalues(std::vector<double> values, int snapshots) {
    CovarianceEstimate cov;
    std::sort(values.begin(), values.end(), std::greater<>());
    cov.window = static_cast<int>(values.size());
    cov.snapshots = snapshots;
    cov.eigenvalues = std::move(values);
    return cov;
}

FreqRepresentation periodogram(const std::vector<cplx>& samples, const Grid& grid) {
    if (samples.empty()) throw std::invalid_argument("periodogram: empty input");
    FreqRepresentation fr;
    fr.grid = grid;
    fr.kind = FreqRepresentation::Kind::Periodogram;
    fr.values.resize(static_cast<std::size_t>(grid.size));
    const double n = static_cast<double>(samples.size());
    for (int g = 0; g < grid.size; ++g)
        fr.values[static_cast<std::size_t>(g)] = std::norm(dtft(samples, grid.point(g))) / n;
    return fr;
}

CovarianceEstimate build_covariance(const std::vector<cplx>& samples, int window) {
    const int n = static_cast<int>(samples.size());
    const int L = window;
    if (L < 1 || L > n) throw std::invalid_argument("build_covariance: window outside [1, N]");

    const int n_win = n - L + 1;
    CovarianceEstimate cov;
    cov.window = L;
    cov.snapshots = 2 * n_win;
    cov.matrix.assign(static_cast<std::size_t>(L) * L, cplx{0.0, 0.0});

    // Forward windows ...
    for (int t = 0; t < n_win; ++t)
        for (int r = 0; r < L; ++r)
            for (int c = 0; c < L; ++c)
                cov.matrix[static_cast<std::size_t>(r) * L + c] +=
                    samples[static_cast<std::size_t>(t + r)] * std::conj(samples[static_cast<std::size_t>(t + c)]);
    // ... plus conjugate-reversed windows.
    for (int t = 0; t < n_win; ++t)
        for (int r = 0; r < L; ++r)
            for (int c = 0; c < L; ++c)
                cov.matrix[static_cast<std::size_t>(r) * L + c] +=
                    std::conj(samples[static_cast<std::size_t>(t + L - 1 - r)]) *
                    samples[static_cast<std::size_t>(t + L - 1 - c)];

    const double scale = 1.0 / (2.0 * n_win);
    for (cplx& v : cov.matrix) v *= scale;

    // Exact Hermitization kills rounding drift before the eigensolve.
    for (int r = 0; r < L; ++r) {
        cov.matrix[static_cast<std::size_t>(r) * L + r] =
            cplx{cov.matrix[static_cast<std::size_t>(r) * L + r].real(), 0.0};
        for (int c = r + 1; c < L; ++c) {
            const cplx m = 0.5 * (cov.matrix[static_cast<std::size_t>(r) * L + c] +
                                  std::conj(cov.matrix[static_cast<std::size_t>(c) * L + r]));
            cov.matrix[static_cast<std::size_t>(r) * L + c] = m;
            cov.matrix[static_cast<std::size_t>(c) * L + r] = std::conj(m);
        }
    }

    EighResult eig = eigh(cov.matrix, L);
    cov.eigenvalues = std::move(eig.values);
    cov.eigenvectors = std::move(eig.vectors);
    return cov;
}

FreqRepresentation music_pseudospectrum(const CovarianceEstimate& cov, int m, const Grid& grid) {
    const int L = cov.window;
    if (m < 1 || m >= L) throw std::invalid_argument("music: need 1 <= m < L");
    if (cov.eigenvectors.size() != static_cast<std::size_t>(L) * L)
        throw std::invalid_argument("music: covariance carries no eigenvectors");

    FreqRepresentation fr;
    fr.grid = grid;
    fr.kind = FreqRepresentation::Kind::Music;
    fr.values.resize(static_cast<std::size_t>(grid.size));

    const int noise_dim = L - m;
    const double inv_sqrt_l = 1.0 / std::sqrt(static_cast<double>(L));
    std::vector<cplx> steering(static_cast<std::size_t>(L));
    for (int g = 0; g < grid.size; ++g) {
        const double u = grid.point(g);
        for (int l = 0; l < L; ++l) {
            const double phase = kTwoPi * u * l;
            steering[static_cast<std::size_t>(l)] =
                cplx{std::cos(phase), std::sin(phase)} * inv_sqrt_l;
        }
        double energy = 0.0;
        for (int j = 0; j < noise_dim; ++j) {
            cplx proj{0.0, 0.0};
            for (int l = 0; l < L; ++l)
                proj += std::conj(cov.eigenvectors[static_cast<std::size_t>(l) * L + (m + j)]) *
                        steering[static_cast<std::size_t>(l)];
            energy += std::norm(proj);
        }
        fr.values[static_cast<std::size_t>(g)] = 1.0 / std::max(energy, 1e-300);
    }
    return fr;
}

int aic_order(const CovarianceEstimate& cov) {
    const int L = static_cast<int>(cov.eigenvalues.size());
    return information_criterion_order(
        cov, [L](int k) { return static_cast<double>(k) * (2 * L - k); });
}

int mdl_order(const CovarianceEstimate& cov) {
    const int L = static_cast<int>(cov.eigenvalues.size());
    const double log_n = std::log(static_cast<double>(cov.snapshots));
    return information_criterion_order(
        cov, [L, log_n](int k) { return 0.5 * k * (2 * L - k) * log_n; });
}

int sorte_order(const CovarianceEstimate& cov) {
    const int L = static_cast<int>(cov.eigenvalues.size());
    if (L < 4) throw std::invalid_argument("sorte: need at least 4 eigenvalues");

    std::vector<double> lam(cov.eigenvalues);
    std::sort(lam.begin(), lam.end(), std::greater<>());
    std::vector<double> gaps(static_cast<std::size_t>(L - 1));
    for (int i = 0; i + 1 < L; ++i)
        gaps[static_cast<std::size_t>(i)] = lam[static_cast<std::size_t>(i)] - lam[static_cast<std::size_t>(i + 1)];

    const int n_gaps = L - 1;
    int best_k = 0;
    double best = std::numeric_limits<double>::infinity();
    // Gap index i (0-based) splits signal eigenvalues 0..i from the rest;
    // the candidate order is i + 1.
    for (int i = 0; i + 2 < n_gaps; ++i) {
        const double den = set_variance(&gaps[static_cast<std::size_t>(i)], n_gaps - i);
        const double num = set_variance(&gaps[static_cast<std::size_t>(i + 1)], n_gaps - i - 1);
        double value;
        if (den == 0.0 && num == 0.0)
            continue;  // flat tail, uninformative
        else if (den == 0.0)
            value = std::numeric_limits<double>::infinity();
        else
            value = num / den;
        if (value < best) {
            best = value;
            best_k = i + 1;
        }
    }
    return best_k;
}

}  // namespace sfreq
