#pragma once

#include <complex>
#include <vector>

namespace sfreq {

// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending,
// eigenvectors orthonormal. `vectors` is row-major n x n with eigenvector j
// in column j. Throws if the input deviates from Hermitian symmetry by more
// than 1e-10 relative to its largest entry.
//
// Householder reduction to tridiagonal form, a diagonal phase similarity to
// make the off-diagonal real, then implicit-shift QL with eigenvector
// accumulation. Intended for the modest window sizes used here (n <= 64).
struct EighResult {
    std::vector<double> values;
    std::vector<std::complex<double>> vectors;
};

EighResult eigh(const std::vector<std::complex<double>>& matrix, int n);

}  // namespace sfreq
