#pragma once

#include "qetlab/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace qetlab {

struct EigResult {
    std::vector<double> eigenvalues; // ascending
    ComplexMatrix eigenvectors;      // columns, unitary: m = V diag(w) V^dagger
};

namespace detail {

/// Implicit-shift QL on a real symmetric tridiagonal matrix (diagonal d,
/// subdiagonal e[i] between d[i] and d[i+1], sized n with a spare last slot).
/// Rotations are accumulated into vt, which holds the transformation
/// TRANSPOSED (row i of vt = column i of the accumulated unitary) so the
/// rotation updates run over contiguous memory.
inline void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e, ComplexMatrix& vt) {
    const std::size_t n = d.size();
    if (n <= 1) return;
    if (e.size() < n) throw Error("tridiagonal_ql: workspace too small");
    constexpr double eps = std::numeric_limits<double>::epsilon();

    // absolute deflation floor: without it, blocks of eigenvalues many orders
    // below the matrix norm (near-pure reduced densities) never satisfy the
    // relative test and the sweep cycles in denormals
    double anorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = std::abs(d[i]);
        if (i > 0) row += std::abs(e[i - 1]);
        if (i + 1 < n) row += std::abs(e[i]);
        anorm = std::max(anorm, row);
    }
    const double deflate_floor = eps * anorm;

    for (std::size_t l = 0; l < n; ++l) {
        std::size_t iter = 0;
        while (true) {
            std::size_t m = l;
            while (m + 1 < n) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= eps * dd || std::abs(e[m]) <= deflate_floor) break;
                ++m;
            }
            if (m == l) break;
            if (++iter > 64) throw Error("hermitian_eig: QL iteration did not converge");

            double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            double r = std::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
            double s = 1.0, c = 1.0, p = 0.0;
            bool underflow = false;
            for (std::size_t i1 = m; i1-- > l;) {
                const std::size_t i = i1;
                double f = s * e[i];
                const double b = c * e[i];
                r = std::hypot(f, g);
                e[i + 1] = r;
                if (r == 0.0) {
                    // rotation annihilated exactly; deflate and restart
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;

                cdouble* lo = vt.row(i);
                cdouble* hi = vt.row(i + 1);
                for (std::size_t k = 0; k < n; ++k) {
                    const cdouble fk = hi[k];
                    hi[k] = s * lo[k] + c * fk;
                    lo[k] = c * lo[k] - s * fk;
                }
            }
            if (underflow) continue;
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

} // namespace detail

/// Full eigendecomposition of a Hermitian matrix: Householder reduction to a
/// real tridiagonal form (with a diagonal phase similarity absorbing the
/// complex subdiagonal), then implicit-shift QL. Self-contained and adequate
/// for the desk-scale dimensions this library targets.
inline EigResult hermitian_eig(const ComplexMatrix& m) {
    const std::size_t n = m.dim();
    if (n == 0) throw Error("hermitian_eig: empty matrix");
    {
        const double scale = std::max(m.max_abs(), 1e-300);
        if (!m.is_hermitian(1e-10 * scale)) throw Error("hermitian_eig: matrix is not Hermitian");
    }

    ComplexMatrix a = m;
    // Symmetrize exactly so rounding asymmetries cannot leak into the sweep.
    for (std::size_t i = 0; i < n; ++i) {
        a(i, i) = a(i, i).real();
        for (std::size_t j = i + 1; j < n; ++j) {
            const cdouble z = 0.5 * (a(i, j) + std::conj(a(j, i)));
            a(i, j) = z;
            a(j, i) = std::conj(z);
        }
    }

    // Householder vectors for columns 0..n-3 (v_k acts on rows k+1..n-1).
    std::vector<std::vector<cdouble>> reflectors(n >= 2 ? n - 2 : 0);
    std::vector<cdouble> w, q;
    for (std::size_t k = 0; k + 2 < n; ++k) {
        const std::size_t len = n - k - 1;
        double norm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) norm2 += std::norm(a(i, k));
        const double norm_x = std::sqrt(norm2);
        if (norm_x == 0.0) continue;

        const cdouble x0 = a(k + 1, k);
        const double ax0 = std::abs(x0);
        const cdouble phase = (ax0 > 0.0) ? x0 / ax0 : cdouble(1.0, 0.0);
        const cdouble alpha = -phase * norm_x;

        std::vector<cdouble> v(len);
        for (std::size_t i = 0; i < len; ++i) v[i] = a(k + 1 + i, k);
        v[0] -= alpha;
        double vnorm2 = 0.0;
        for (const auto& z : v) vnorm2 += std::norm(z);
        if (vnorm2 == 0.0) continue;
        const double inv = 1.0 / std::sqrt(vnorm2);
        for (auto& z : v) z *= inv;

        // Trailing block update B <- (I-2vv')B(I-2vv') via rank-2 form.
        w.assign(len, cdouble(0.0, 0.0));
        for (std::size_t i = 0; i < len; ++i) {
            cdouble acc = 0.0;
            const cdouble* arow = a.row(k + 1 + i) + (k + 1);
            for (std::size_t j = 0; j < len; ++j) acc += arow[j] * v[j];
            w[i] = acc;
        }
        double kappa = 0.0;
        for (std::size_t i = 0; i < len; ++i)
            kappa += (std::conj(v[i]) * w[i]).real();
        q.assign(len, cdouble(0.0, 0.0));
        for (std::size_t i = 0; i < len; ++i) q[i] = w[i] - kappa * v[i];
        for (std::size_t i = 0; i < len; ++i) {
            cdouble* arow = a.row(k + 1 + i) + (k + 1);
            const cdouble vi2 = 2.0 * v[i];
            const cdouble qi2 = 2.0 * q[i];
            for (std::size_t j = 0; j < len; ++j)
                arow[j] -= vi2 * std::conj(q[j]) + qi2 * std::conj(v[j]);
        }

        a(k + 1, k) = alpha;
        a(k, k + 1) = std::conj(alpha);
        for (std::size_t i = k + 2; i < n; ++i) {
            a(i, k) = 0.0;
            a(k, i) = 0.0;
        }
        reflectors[k] = std::move(v);
    }

    // Real tridiagonal via diagonal phase similarity.
    std::vector<double> d(n), e(n, 0.0);
    std::vector<cdouble> col_phase(n, cdouble(1.0, 0.0));
    for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i).real();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const cdouble c = a(i + 1, i);
        const double ac = std::abs(c);
        e[i] = ac;
        const cdouble ph = (ac > 0.0) ? c / ac : cdouble(1.0, 0.0);
        col_phase[i + 1] = col_phase[i] * ph;
    }

    // Accumulate the unitary: reflectors applied in reverse touch only the
    // trailing block, then scale columns by the phases.
    ComplexMatrix v = ComplexMatrix::identity(n);
    std::vector<cdouble> t;
    for (std::size_t k1 = reflectors.size(); k1-- > 0;) {
        const auto& refl = reflectors[k1];
        if (refl.empty()) continue;
        const std::size_t k = k1;
        const std::size_t len = refl.size();
        t.assign(n - k - 1, cdouble(0.0, 0.0));
        for (std::size_t i = 0; i < len; ++i) {
            const cdouble cvi = std::conj(refl[i]);
            const cdouble* vrow = v.row(k + 1 + i) + (k + 1);
            for (std::size_t j = 0; j < n - k - 1; ++j) t[j] += cvi * vrow[j];
        }
        for (std::size_t i = 0; i < len; ++i) {
            const cdouble vi2 = 2.0 * refl[i];
            cdouble* vrow = v.row(k + 1 + i) + (k + 1);
            for (std::size_t j = 0; j < n - k - 1; ++j) vrow[j] -= vi2 * t[j];
        }
    }
    // QL works on the transpose so its rotations touch contiguous rows.
    ComplexMatrix vt(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) vt(j, i) = v(i, j) * col_phase[j];

    detail::tridiagonal_ql(d, e, vt);

    // Sort ascending, permuting eigenvector columns (= vt rows).
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return d[i] < d[j]; });
    EigResult out;
    out.eigenvalues.resize(n);
    out.eigenvectors = ComplexMatrix(n);
    for (std::size_t j = 0; j < n; ++j) {
        out.eigenvalues[j] = d[order[j]];
        const cdouble* src = vt.row(order[j]);
        for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, j) = src[i];
    }
    return out;
}

/// exp(-i theta g) for Hermitian g, evaluated spectrally.
inline ComplexMatrix unitary_from_generator(const ComplexMatrix& g, double theta) {
    const EigResult eg = hermitian_eig(g);
    const std::size_t n = g.dim();
    const ComplexMatrix& v = eg.eigenvectors;
    ComplexMatrix u(n);
    // u = v diag(exp(-i theta w)) v^dagger
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            cdouble acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double ph = -theta * eg.eigenvalues[k];
                acc += v(i, k) * cdouble(std::cos(ph), std::sin(ph)) * std::conj(v(j, k));
            }
            u(i, j) = acc;
        }
    }
    return u;
}

/// Sum of absolute eigenvalues (Hermitian argument only).
inline double trace_norm(const ComplexMatrix& x) {
    const EigResult e = hermitian_eig(x);
    double s = 0.0;
    for (double w : e.eigenvalues) s += std::abs(w);
    return s;
}

/// Largest absolute eigenvalue (Hermitian argument only).
inline double operator_norm(const ComplexMatrix& y) {
    const EigResult e = hermitian_eig(y);
    double s = 0.0;
    for (double w : e.eigenvalues) s = std::max(s, std::abs(w));
    return s;
}

} // namespace qetlab
