#pragma once

#include "qetlab/eig.hpp"
#include "qetlab/space.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace qetlab {

/// Eigenvalues below this are treated as exact zeros inside entropies
/// (0 ln 0 = 0 convention).
inline constexpr double kEntropyKernelCutoff = 1e-14;

/// Density eigenvalues in [-kDensityClamp, 0] are clamped to 0; anything more
/// negative is rejected as a genuine non-density.
inline constexpr double kDensityClamp = 1e-12;

inline bool is_density(const ComplexMatrix& m, double tol) {
    if (!m.all_finite()) return false;
    const double scale = std::max(m.max_abs(), 1e-300);
    if (!m.is_hermitian(tol * std::max(1.0, scale))) return false;
    if (std::abs(m.trace() - cdouble(1.0, 0.0)) > tol) return false;
    const EigResult e = hermitian_eig(m);
    return e.eigenvalues.front() >= -tol;
}

/// Trace out the complement of `keep` (ascending site indices) from a
/// full-space density matrix. Kept sites stay in ascending site order.
inline ComplexMatrix partial_trace(const ComplexMatrix& rho, const std::vector<std::size_t>& keep,
                                   const HilbertSpace& space) {
    if (rho.dim() != space.total_dim()) throw Error("partial_trace: density/space dimension mismatch");
    for (std::size_t i = 1; i < keep.size(); ++i)
        if (keep[i] <= keep[i - 1]) throw Error("partial_trace: keep sites must be strictly ascending");
    const std::vector<std::size_t> rest = space.complement(keep);
    const std::vector<std::size_t> keep_off = space.subset_offsets(keep);
    const std::vector<std::size_t> rest_off = space.subset_offsets(rest);

    ComplexMatrix out(keep_off.size());
    for (std::size_t i = 0; i < keep_off.size(); ++i)
        for (std::size_t j = 0; j < keep_off.size(); ++j) {
            cdouble acc = 0.0;
            for (std::size_t r : rest_off) acc += rho(keep_off[i] + r, keep_off[j] + r);
            out(i, j) = acc;
        }
    return out;
}

/// Reduced density matrix of a pure state on `keep`, without forming the
/// full-space projector. O(dim_keep^2 * dim_rest).
inline ComplexMatrix reduced_density(const StateVector& psi, const std::vector<std::size_t>& keep,
                                     const HilbertSpace& space) {
    if (psi.size() != space.total_dim()) throw Error("reduced_density: state/space dimension mismatch");
    for (std::size_t i = 1; i < keep.size(); ++i)
        if (keep[i] <= keep[i - 1]) throw Error("reduced_density: keep sites must be strictly ascending");
    const std::vector<std::size_t> rest = space.complement(keep);
    const std::vector<std::size_t> keep_off = space.subset_offsets(keep);
    const std::vector<std::size_t> rest_off = space.subset_offsets(rest);

    ComplexMatrix out(keep_off.size());
    for (std::size_t i = 0; i < keep_off.size(); ++i)
        for (std::size_t j = i; j < keep_off.size(); ++j) {
            cdouble acc = 0.0;
            for (std::size_t r : rest_off) acc += psi[keep_off[i] + r] * std::conj(psi[keep_off[j] + r]);
            out(i, j) = acc;
            out(j, i) = std::conj(acc);
        }
    return out;
}

namespace detail {

inline std::vector<double> density_spectrum(const ComplexMatrix& rho, const char* who) {
    std::vector<double> w = hermitian_eig(rho).eigenvalues;
    for (double& x : w) {
        if (x < -kDensityClamp)
            throw Error(std::string(who) + ": eigenvalue " + std::to_string(x) +
                        " below the density clamp threshold");
        if (x < 0.0) x = 0.0;
    }
    return w;
}

} // namespace detail

/// -Tr[rho ln rho] in nats.
inline double von_neumann_entropy(const ComplexMatrix& rho) {
    double s = 0.0;
    for (double w : detail::density_spectrum(rho, "von_neumann_entropy"))
        if (w >= kEntropyKernelCutoff) s -= w * std::log(w);
    return s;
}

/// S(rho || phi) = Tr[rho ln rho] - Tr[rho ln phi] in nats; returns +inf when
/// rho has support on the kernel of phi (phi eigenvalues below the cutoff).
inline double relative_entropy(const ComplexMatrix& rho, const ComplexMatrix& phi) {
    if (rho.dim() != phi.dim()) throw Error("relative_entropy: dimension mismatch");
    double tr_rho_ln_rho = 0.0;
    for (double w : detail::density_spectrum(rho, "relative_entropy"))
        if (w >= kEntropyKernelCutoff) tr_rho_ln_rho += w * std::log(w);

    const EigResult ephi = hermitian_eig(phi);
    const std::size_t n = phi.dim();
    double tr_rho_ln_phi = 0.0;
    double kernel_mass = 0.0;
    std::vector<cdouble> f(n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) f[i] = ephi.eigenvectors(i, k);
        const double diag = inner(f, apply_dense(rho, f)).real(); // <f_k| rho |f_k>
        const double mu = ephi.eigenvalues[k];
        if (mu < kEntropyKernelCutoff)
            kernel_mass += std::max(diag, 0.0);
        else
            tr_rho_ln_phi += diag * std::log(mu);
    }
    if (kernel_mass > 1e-12) return std::numeric_limits<double>::infinity();
    return tr_rho_ln_rho - tr_rho_ln_phi;
}

} // namespace qetlab
