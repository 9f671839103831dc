#pragma once

#include "qetlab/errors.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace qetlab {

using cdouble = std::complex<double>;

/// Dense square complex matrix, row-major. Carries every operator and
/// density matrix in the library; kept deliberately small (no expression
/// templates, no views) since dimensions stay at desk scale.
class ComplexMatrix {
public:
    ComplexMatrix() = default;

    explicit ComplexMatrix(std::size_t dim) : dim_(dim), a_(dim * dim, cdouble(0.0, 0.0)) {}

    ComplexMatrix(std::size_t dim, std::initializer_list<cdouble> entries) : ComplexMatrix(dim) {
        if (entries.size() != dim * dim)
            throw Error("ComplexMatrix: initializer size does not match dim*dim");
        std::size_t k = 0;
        for (const auto& z : entries) a_[k++] = z;
    }

    static ComplexMatrix identity(std::size_t dim) {
        ComplexMatrix m(dim);
        for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }

    static ComplexMatrix diagonal(const std::vector<double>& d) {
        ComplexMatrix m(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t dim() const { return dim_; }

    cdouble& operator()(std::size_t i, std::size_t j) { return a_[i * dim_ + j]; }
    const cdouble& operator()(std::size_t i, std::size_t j) const { return a_[i * dim_ + j]; }

    cdouble* row(std::size_t i) { return a_.data() + i * dim_; }
    const cdouble* row(std::size_t i) const { return a_.data() + i * dim_; }

    cdouble* data() { return a_.data(); }
    const cdouble* data() const { return a_.data(); }

    ComplexMatrix& operator+=(const ComplexMatrix& o) {
        require_same_dim(o, "operator+=");
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
        return *this;
    }

    ComplexMatrix& operator-=(const ComplexMatrix& o) {
        require_same_dim(o, "operator-=");
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
        return *this;
    }

    ComplexMatrix& operator*=(cdouble s) {
        for (auto& z : a_) z *= s;
        return *this;
    }

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(cdouble s, ComplexMatrix a) { return a *= s; }
    friend ComplexMatrix operator*(ComplexMatrix a, cdouble s) { return a *= s; }

    friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
        a.require_same_dim(b, "operator*");
        const std::size_t n = a.dim_;
        ComplexMatrix c(n);
        // ikj order keeps the inner loop contiguous in both b and c.
        for (std::size_t i = 0; i < n; ++i) {
            const cdouble* ai = a.row(i);
            cdouble* ci = c.row(i);
            for (std::size_t k = 0; k < n; ++k) {
                const cdouble aik = ai[k];
                if (aik == cdouble(0.0, 0.0)) continue;
                const cdouble* bk = b.row(k);
                for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
            }
        }
        return c;
    }

    ComplexMatrix adjoint() const {
        ComplexMatrix m(dim_);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j) m(j, i) = std::conj((*this)(i, j));
        return m;
    }

    cdouble trace() const {
        cdouble t = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
        return t;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& z : a_) m = std::max(m, std::abs(z));
        return m;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (const auto& z : a_) s += std::norm(z);
        return std::sqrt(s);
    }

    bool all_finite() const {
        for (const auto& z : a_)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        return true;
    }

    bool is_hermitian(double tol) const {
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = i; j < dim_; ++j)
                if (std::abs((*this)(i, j) - std::conj((*this)(j, i))) > tol) return false;
        return true;
    }

    bool is_unitary(double tol) const {
        const std::size_t n = dim_;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                cdouble s = 0.0;
                for (std::size_t k = 0; k < n; ++k) s += std::conj((*this)(k, i)) * (*this)(k, j);
                if (std::abs(s - (i == j ? 1.0 : 0.0)) > tol) return false;
            }
        }
        return true;
    }

private:
    void require_same_dim(const ComplexMatrix& o, const char* op) const {
        if (dim_ != o.dim_)
            throw Error(std::string("ComplexMatrix ") + op + ": dimension mismatch " +
                        std::to_string(dim_) + " vs " + std::to_string(o.dim_));
    }

    std::size_t dim_ = 0;
    std::vector<cdouble> a_;
};

/// Hard guard against runaway Kronecker products; full-space operators above
/// this are never meaningful at desk scale.
inline constexpr std::size_t kKronDimCap = 8192;

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    const std::size_t na = a.dim(), nb = b.dim();
    if (na != 0 && na * nb / na != nb)
        throw Error("kron: dimension overflow");
    const std::size_t n = na * nb;
    if (n > kKronDimCap)
        throw Error("kron: result dimension " + std::to_string(n) + " exceeds cap " +
                    std::to_string(kKronDimCap));
    ComplexMatrix c(n);
    for (std::size_t i1 = 0; i1 < na; ++i1)
        for (std::size_t j1 = 0; j1 < na; ++j1) {
            const cdouble aij = a(i1, j1);
            if (aij == cdouble(0.0, 0.0)) continue;
            for (std::size_t i2 = 0; i2 < nb; ++i2)
                for (std::size_t j2 = 0; j2 < nb; ++j2)
                    c(i1 * nb + i2, j1 * nb + j2) = aij * b(i2, j2);
        }
    return c;
}

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.dim() != b.dim()) throw Error("commutator: dimension mismatch");
    return a * b - b * a;
}

/// Tr[a b] in O(dim^2) without forming the product.
inline cdouble trace_of_product(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.dim() != b.dim()) throw Error("trace_of_product: dimension mismatch");
    const std::size_t n = a.dim();
    cdouble t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const cdouble* ai = a.row(i);
        for (std::size_t j = 0; j < n; ++j) t += ai[j] * b(j, i);
    }
    return t;
}

// Pauli matrices and the standard single-qubit building blocks.
inline ComplexMatrix pauli_x() { return ComplexMatrix(2, {0, 1, 1, 0}); }
inline ComplexMatrix pauli_y() {
    return ComplexMatrix(2, {0, cdouble(0, -1), cdouble(0, 1), 0});
}
inline ComplexMatrix pauli_z() { return ComplexMatrix(2, {1, 0, 0, -1}); }

/// axis . (sx, sy, sz) for a real 3-vector axis (normalized by the caller).
inline ComplexMatrix bloch_axis_operator(double ux, double uy, double uz) {
    ComplexMatrix m(2);
    m(0, 0) = uz;
    m(0, 1) = cdouble(ux, -uy);
    m(1, 0) = cdouble(ux, uy);
    m(1, 1) = -uz;
    return m;
}

} // namespace qetlab
