#pragma once

#include "qetlab/matrix.hpp"

#include <cmath>
#include <cstdint>

namespace qetlab {

/// splitmix64: used to expand a user seed into stream states so that
/// per-sample generators are independent and order-free.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256** (Blackman/Vigna). The documented PRNG of this library: every
/// randomized suite draws from a stream seeded via splitmix64, so results are
/// reproducible from the 64-bit seed alone.
class Xoshiro256StarStar {
public:
    explicit Xoshiro256StarStar(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& s : s_) s = splitmix64(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller on the uniform stream.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 == 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    cdouble complex_gaussian() {
        const double re = gaussian();
        const double im = gaussian();
        return cdouble(re, im);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Derive the seed of the i-th independent sample stream from a base seed.
inline std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t index) {
    std::uint64_t sm = base_seed ^ (0x9e3779b97f4a7c15ULL + index);
    splitmix64(sm);
    return splitmix64(sm);
}

inline ComplexMatrix random_hermitian(Xoshiro256StarStar& rng, std::size_t dim) {
    ComplexMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        m(i, i) = rng.gaussian();
        for (std::size_t j = i + 1; j < dim; ++j) {
            const cdouble z = 0.5 * rng.complex_gaussian();
            m(i, j) = z;
            m(j, i) = std::conj(z);
        }
    }
    return m;
}

/// Full-rank (almost surely) random density: rho = A A^dagger / Tr[A A^dagger]
/// with complex Gaussian A.
inline ComplexMatrix random_density(Xoshiro256StarStar& rng, std::size_t dim) {
    ComplexMatrix a(dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) a(i, j) = rng.complex_gaussian();
    ComplexMatrix rho = a * a.adjoint();
    const double tr = rho.trace().real();
    rho *= cdouble(1.0 / tr, 0.0);
    return rho;
}

} // namespace qetlab
