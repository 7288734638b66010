#pragma once

#include <complex>
#include <vector>

#include "sfreq/representation.hpp"
#include "sfreq/signal_model.hpp"

namespace sfreq {

// Forward-backward spatially smoothed covariance of a single snapshot,
// eigendecomposed eagerly (every consumer needs the eigenvalues).
struct CovarianceEstimate {
    int window = 0;                  // L
    int snapshots = 0;               // 2 * (N - L + 1)
    std::vector<cplx> matrix;        // L x L Hermitian, row-major
    std::vector<double> eigenvalues; // descending
    std::vector<cplx> eigenvectors;  // L x L, eigenvector j in column j

    // For synthetic order-selection inputs: eigenvalues only, no matrix.
    static CovarianceEstimate from_eigenvalues(std::vector<double> values, int snapshots);
};

// |DTFT|^2 / N on the grid.
FreqRepresentation periodogram(const std::vector<cplx>& samples, const Grid& grid);

// Average of x_t x_t^H over all length-L sliding windows plus their
// conjugate-reversed counterparts.
CovarianceEstimate build_covariance(const std::vector<cplx>& samples, int window);

// 1 / ||E_n^H e(u)||^2 with E_n the L-m minor eigenvectors and e(u) the
// unit-norm steering vector.
FreqRepresentation music_pseudospectrum(const CovarianceEstimate& cov, int m, const Grid& grid);

// Wax-Kailath information-criterion order estimates and the eigenvalue-gap
// statistic. All three return the estimated number of components.
int aic_order(const CovarianceEstimate& cov);
int mdl_order(const CovarianceEstimate& cov);
int sorte_order(const CovarianceEstimate& cov);

}  // namespace sfreq
