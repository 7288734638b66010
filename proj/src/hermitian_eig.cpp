#include "sfreq/hermitian_eig.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sfreq {

namespace {
using cd = std::complex<double>;
}

EighResult eigh(const std::vector<cd>& matrix, int n) {
    if (n < 1 || matrix.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
        throw std::invalid_argument("eigh: matrix size does not match n");

    double max_abs = 0.0;
    for (const cd& v : matrix) max_abs = std::max(max_abs, std::abs(v));
    const double herm_tol = 1e-10 * std::max(1.0, max_abs);
    for (int r = 0; r < n; ++r)
        for (int c = r; c < n; ++c)
            if (std::abs(matrix[static_cast<std::size_t>(r) * n + c] -
                         std::conj(matrix[static_cast<std::size_t>(c) * n + r])) > herm_tol)
                throw std::invalid_argument("eigh: input is not Hermitian");

    // Work on an exactly Hermitian copy.
    std::vector<cd> a(matrix);
    for (int r = 0; r < n; ++r) {
        a[static_cast<std::size_t>(r) * n + r] = cd{a[static_cast<std::size_t>(r) * n + r].real(), 0.0};
        for (int c = r + 1; c < n; ++c) {
            const cd m = 0.5 * (a[static_cast<std::size_t>(r) * n + c] +
                                std::conj(a[static_cast<std::size_t>(c) * n + r]));
            a[static_cast<std::size_t>(r) * n + c] = m;
            a[static_cast<std::size_t>(c) * n + r] = std::conj(m);
        }
    }

    std::vector<cd> q(static_cast<std::size_t>(n) * n, cd{0.0, 0.0});
    for (int i = 0; i < n; ++i) q[static_cast<std::size_t>(i) * n + i] = cd{1.0, 0.0};

    // Householder reduction to Hermitian tridiagonal form.
    std::vector<cd> u(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n)),
        w(static_cast<std::size_t>(n));
    for (int k = 0; k + 2 < n; ++k) {
        const int len = n - k - 1;
        double tail = 0.0;
        for (int i = 1; i < len; ++i) tail += std::norm(a[static_cast<std::size_t>(k + 1 + i) * n + k]);
        if (tail == 0.0) continue;

        const cd x0 = a[static_cast<std::size_t>(k + 1) * n + k];
        const double xnorm = std::sqrt(std::norm(x0) + tail);
        const cd phase = x0 == cd{0.0, 0.0} ? cd{1.0, 0.0} : x0 / std::abs(x0);
        const cd alpha = -phase * xnorm;

        // Reflector H = I - tau u u^H with u = x - alpha e1 (no cancellation:
        // |u0| = |x0| + ||x||).
        u[0] = x0 - alpha;
        for (int i = 1; i < len; ++i) u[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(k + 1 + i) * n + k];
        double unorm2 = 0.0;
        for (int i = 0; i < len; ++i) unorm2 += std::norm(u[static_cast<std::size_t>(i)]);
        const double tau = 2.0 / unorm2;

        // Trailing-block similarity: A2 <- A2 - u w^H - w u^H,
        // w = tau A2 u - (tau^2/2) (u^H A2 u) u.
        for (int r = 0; r < len; ++r) {
            cd acc{0.0, 0.0};
            const cd* row = &a[static_cast<std::size_t>(k + 1 + r) * n + (k + 1)];
            for (int c = 0; c < len; ++c) acc += row[c] * u[static_cast<std::size_t>(c)];
            p[static_cast<std::size_t>(r)] = tau * acc;
        }
        double kappa = 0.0;
        for (int i = 0; i < len; ++i)
            kappa += (std::conj(u[static_cast<std::size_t>(i)]) * p[static_cast<std::size_t>(i)]).real();
        kappa *= 0.5 * tau;
        for (int i = 0; i < len; ++i)
            w[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)] - kappa * u[static_cast<std::size_t>(i)];
        for (int r = 0; r < len; ++r) {
            cd* row = &a[static_cast<std::size_t>(k + 1 + r) * n + (k + 1)];
            const cd ur = u[static_cast<std::size_t>(r)];
            const cd wr = w[static_cast<std::size_t>(r)];
            for (int c = 0; c < len; ++c)
                row[c] -= ur * std::conj(w[static_cast<std::size_t>(c)]) +
                          wr * std::conj(u[static_cast<std::size_t>(c)]);
        }

        a[static_cast<std::size_t>(k + 1) * n + k] = alpha;
        a[static_cast<std::size_t>(k) * n + (k + 1)] = std::conj(alpha);
        for (int i = k + 2; i < n; ++i) {
            a[static_cast<std::size_t>(i) * n + k] = cd{0.0, 0.0};
            a[static_cast<std::size_t>(k) * n + i] = cd{0.0, 0.0};
        }

        // Q <- Q H
        for (int r = 0; r < n; ++r) {
            cd* row = &q[static_cast<std::size_t>(r) * n + (k + 1)];
            cd dot{0.0, 0.0};
            for (int c = 0; c < len; ++c) dot += row[c] * u[static_cast<std::size_t>(c)];
            dot *= tau;
            for (int c = 0; c < len; ++c) row[c] -= dot * std::conj(u[static_cast<std::size_t>(c)]);
        }
    }

    // Diagonal phase similarity makes the off-diagonal real and non-negative.
    std::vector<double> d(static_cast<std::size_t>(n)), e(static_cast<std::size_t>(n), 0.0);
    cd phi{1.0, 0.0};
    for (int i = 0; i < n; ++i) {
        d[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i) * n + i].real();
        for (int r = 0; r < n; ++r) q[static_cast<std::size_t>(r) * n + i] *= phi;
        if (i + 1 < n) {
            const cd off = a[static_cast<std::size_t>(i + 1) * n + i];
            const double mag = std::abs(off);
            e[static_cast<std::size_t>(i)] = mag;
            if (mag > 0.0) phi *= off / mag;
        }
    }

    // Implicit-shift QL on the real tridiagonal, rotations accumulated into q.
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::fabs(d[static_cast<std::size_t>(m)]) +
                                  std::fabs(d[static_cast<std::size_t>(m + 1)]);
                if (std::fabs(e[static_cast<std::size_t>(m)]) <= DBL_EPSILON * dd) break;
            }
            if (m != l) {
                if (iter++ == 50) throw std::runtime_error("eigh: QL iteration failed to converge");
                double g = (d[static_cast<std::size_t>(l + 1)] - d[static_cast<std::size_t>(l)]) /
                           (2.0 * e[static_cast<std::size_t>(l)]);
                double r = std::hypot(g, 1.0);
                g = d[static_cast<std::size_t>(m)] - d[static_cast<std::size_t>(l)] +
                    e[static_cast<std::size_t>(l)] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, pp = 0.0;
                int i;
                for (i = m - 1; i >= l; --i) {
                    double f = s * e[static_cast<std::size_t>(i)];
                    const double b = c * e[static_cast<std::size_t>(i)];
                    r = std::hypot(f, g);
                    e[static_cast<std::size_t>(i + 1)] = r;
                    if (r == 0.0) {
                        d[static_cast<std::size_t>(i + 1)] -= pp;
                        e[static_cast<std::size_t>(m)] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[static_cast<std::size_t>(i + 1)] - pp;
                    r = (d[static_cast<std::size_t>(i)] - g) * s + 2.0 * c * b;
                    pp = s * r;
                    d[static_cast<std::size_t>(i + 1)] = g + pp;
                    g = c * r - b;
                    for (int row = 0; row < n; ++row) {
                        cd* col = &q[static_cast<std::size_t>(row) * n];
                        const cd tmp = col[i + 1];
                        col[i + 1] = s * col[i] + c * tmp;
                        col[i] = c * col[i] - s * tmp;
                    }
                }
                if (r == 0.0 && i >= l) continue;
                d[static_cast<std::size_t>(l)] -= pp;
                e[static_cast<std::size_t>(l)] = g;
                e[static_cast<std::size_t>(m)] = 0.0;
            }
        } while (m != l);
    }

    // Sort descending, carrying eigenvector columns along.
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return d[static_cast<std::size_t>(x)] > d[static_cast<std::size_t>(y)];
    });

    EighResult out;
    out.values.resize(static_cast<std::size_t>(n));
    out.vectors.assign(static_cast<std::size_t>(n) * n, cd{0.0, 0.0});
    for (int j = 0; j < n; ++j) {
        out.values[static_cast<std::size_t>(j)] = d[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
        for (int r = 0; r < n; ++r)
            out.vectors[static_cast<std::size_t>(r) * n + j] =
                q[static_cast<std::size_t>(r) * n + order[static_cast<std::size_t>(j)]];
    }
    return out;
}

}  // namespace sfreq
