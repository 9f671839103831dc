#pragma once

#include "qetlab/matrix.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace qetlab {

using StateVector = std::vector<cdouble>;

/// Tensor-product structure of the chain: ordered per-site dimensions with
/// site 0 as the slowest index (matching the left factor of kron).
class HilbertSpace {
public:
    explicit HilbertSpace(std::vector<std::size_t> site_dims, std::size_t dim_cap = 4096)
        : site_dims_(std::move(site_dims)) {
        if (site_dims_.empty()) throw Error("HilbertSpace: no sites");
        total_dim_ = 1;
        for (std::size_t d : site_dims_) {
            if (d < 2) throw Error("HilbertSpace: site dimension must be >= 2");
            if (total_dim_ > dim_cap / d)
                throw Error("HilbertSpace: total dimension exceeds cap " + std::to_string(dim_cap));
            total_dim_ *= d;
        }
        strides_.resize(site_dims_.size());
        std::size_t s = 1;
        for (std::size_t n = site_dims_.size(); n-- > 0;) {
            strides_[n] = s;
            s *= site_dims_[n];
        }
    }

    static HilbertSpace qubits(std::size_t n, std::size_t dim_cap = 4096) {
        return HilbertSpace(std::vector<std::size_t>(n, 2), dim_cap);
    }

    std::size_t num_sites() const { return site_dims_.size(); }
    std::size_t site_dim(std::size_t n) const { return site_dims_[n]; }
    const std::vector<std::size_t>& site_dims() const { return site_dims_; }
    std::size_t total_dim() const { return total_dim_; }
    std::size_t stride(std::size_t n) const { return strides_[n]; }

    /// Product of site dimensions over the inclusive interval [first, last].
    std::size_t interval_dim(std::size_t first, std::size_t last) const {
        check_interval(first, last);
        std::size_t d = 1;
        for (std::size_t n = first; n <= last; ++n) d *= site_dims_[n];
        return d;
    }

    std::size_t subset_dim(const std::vector<std::size_t>& sites) const {
        std::size_t d = 1;
        for (std::size_t n : sites) {
            check_site(n);
            d *= site_dims_[n];
        }
        return d;
    }

    void check_site(std::size_t n) const {
        if (n >= site_dims_.size())
            throw Error("site index " + std::to_string(n) + " out of range (N=" +
                        std::to_string(site_dims_.size()) + ")");
    }

    void check_interval(std::size_t first, std::size_t last) const {
        if (first > last) throw Error("empty site interval");
        check_site(first);
        check_site(last);
    }

    /// Offsets into the full index contributed by each basis state of the
    /// given site subset (ascending site order, first site slowest).
    std::vector<std::size_t> subset_offsets(const std::vector<std::size_t>& sites) const {
        std::vector<std::size_t> offsets{0};
        for (std::size_t n : sites) {
            check_site(n);
            std::vector<std::size_t> next;
            next.reserve(offsets.size() * site_dims_[n]);
            for (std::size_t base : offsets)
                for (std::size_t k = 0; k < site_dims_[n]; ++k) next.push_back(base + k * strides_[n]);
            offsets = std::move(next);
        }
        return offsets;
    }

    std::vector<std::size_t> complement(const std::vector<std::size_t>& sites) const {
        std::vector<bool> in(site_dims_.size(), false);
        for (std::size_t n : sites) {
            check_site(n);
            in[n] = true;
        }
        std::vector<std::size_t> rest;
        for (std::size_t n = 0; n < site_dims_.size(); ++n)
            if (!in[n]) rest.push_back(n);
        return rest;
    }

private:
    std::vector<std::size_t> site_dims_;
    std::vector<std::size_t> strides_;
    std::size_t total_dim_ = 0;
};

/// Embed an operator acting on the contiguous sites [first, last] into the
/// full space: identity on every other site.
inline ComplexMatrix embed_local(const ComplexMatrix& op, std::size_t first, std::size_t last,
                                 const HilbertSpace& space) {
    const std::size_t d_mid = space.interval_dim(first, last);
    if (op.dim() != d_mid)
        throw Error("embed_local: operator dim " + std::to_string(op.dim()) +
                    " does not match interval dim " + std::to_string(d_mid));
    std::size_t d_left = 1, d_right = 1;
    for (std::size_t n = 0; n < first; ++n) d_left *= space.site_dim(n);
    for (std::size_t n = last + 1; n < space.num_sites(); ++n) d_right *= space.site_dim(n);
    ComplexMatrix out = kron(ComplexMatrix::identity(d_left), op);
    return kron(out, ComplexMatrix::identity(d_right));
}

/// Apply an operator on sites [first, last] to a full-space state without
/// forming the embedded matrix. O(total_dim * interval_dim).
inline StateVector apply_local(const ComplexMatrix& op, std::size_t first, std::size_t last,
                               const HilbertSpace& space, const StateVector& psi) {
    const std::size_t d_mid = space.interval_dim(first, last);
    if (op.dim() != d_mid) throw Error("apply_local: operator/interval dimension mismatch");
    if (psi.size() != space.total_dim()) throw Error("apply_local: state dimension mismatch");
    std::size_t d_left = 1, d_right = 1;
    for (std::size_t n = 0; n < first; ++n) d_left *= space.site_dim(n);
    for (std::size_t n = last + 1; n < space.num_sites(); ++n) d_right *= space.site_dim(n);

    StateVector out(psi.size(), cdouble(0.0, 0.0));
    std::vector<cdouble> in_block(d_mid), out_block(d_mid);
    for (std::size_t l = 0; l < d_left; ++l) {
        const std::size_t base_l = l * d_mid * d_right;
        for (std::size_t r = 0; r < d_right; ++r) {
            for (std::size_t m = 0; m < d_mid; ++m) in_block[m] = psi[base_l + m * d_right + r];
            for (std::size_t m = 0; m < d_mid; ++m) {
                cdouble acc = 0.0;
                const cdouble* orow = op.row(m);
                for (std::size_t k = 0; k < d_mid; ++k) acc += orow[k] * in_block[k];
                out_block[m] = acc;
            }
            for (std::size_t m = 0; m < d_mid; ++m) out[base_l + m * d_right + r] = out_block[m];
        }
    }
    return out;
}

inline StateVector apply_dense(const ComplexMatrix& m, const StateVector& psi) {
    if (m.dim() != psi.size()) throw Error("apply_dense: dimension mismatch");
    StateVector out(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) {
        cdouble acc = 0.0;
        const cdouble* mi = m.row(i);
        for (std::size_t j = 0; j < psi.size(); ++j) acc += mi[j] * psi[j];
        out[i] = acc;
    }
    return out;
}

inline cdouble inner(const StateVector& a, const StateVector& b) {
    if (a.size() != b.size()) throw Error("inner: dimension mismatch");
    cdouble s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

inline double norm(const StateVector& a) {
    double s = 0.0;
    for (const auto& z : a) s += std::norm(z);
    return std::sqrt(s);
}

/// <psi| m |psi> for Hermitian m; returns the real part.
inline double expectation(const ComplexMatrix& m, const StateVector& psi) {
    return inner(psi, apply_dense(m, psi)).real();
}

/// rho += w |psi><psi|
inline void add_outer(ComplexMatrix& rho, const StateVector& psi, double w) {
    if (rho.dim() != psi.size()) throw Error("add_outer: dimension mismatch");
    const std::size_t n = psi.size();
    for (std::size_t i = 0; i < n; ++i) {
        const cdouble wi = w * psi[i];
        cdouble* ri = rho.row(i);
        for (std::size_t j = 0; j < n; ++j) ri[j] += wi * std::conj(psi[j]);
    }
}

} // namespace qetlab
