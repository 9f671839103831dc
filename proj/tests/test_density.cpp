#include "qetlab/density.hpp"
#include "qetlab/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace qetlab;

namespace {

const double kLn2 = std::log(2.0);

StateVector bell_pair() {
    StateVector psi(4, cdouble(0.0, 0.0));
    psi[0] = 1.0 / std::sqrt(2.0);
    psi[3] = 1.0 / std::sqrt(2.0);
    return psi;
}

ComplexMatrix pure_density(const StateVector& psi) {
    ComplexMatrix rho(psi.size());
    add_outer(rho, psi, 1.0);
    return rho;
}

} // namespace

TEST_CASE("partial trace of |00><00| onto site 0 is |0><0|") {
    const HilbertSpace space = HilbertSpace::qubits(2);
    StateVector psi(4, cdouble(0.0, 0.0));
    psi[0] = 1.0;
    const ComplexMatrix reduced = partial_trace(pure_density(psi), {0}, space);
    CHECK(std::abs(reduced(0, 0) - cdouble(1.0, 0.0)) <= 1e-15);
    CHECK(std::abs(reduced(1, 1)) <= 1e-15);
}

TEST_CASE("either qubit of a Bell pair reduces to the maximally mixed state") {
    const HilbertSpace space = HilbertSpace::qubits(2);
    const ComplexMatrix rho = pure_density(bell_pair());
    for (std::size_t site : {0u, 1u}) {
        const ComplexMatrix red = partial_trace(rho, {site}, space);
        CHECK(std::abs(red(0, 0) - cdouble(0.5, 0.0)) <= 1e-15);
        CHECK(std::abs(red(1, 1) - cdouble(0.5, 0.0)) <= 1e-15);
        CHECK(std::abs(red(0, 1)) <= 1e-15);
    }
}

TEST_CASE("partial trace of a product density returns the kept factor") {
    Xoshiro256StarStar rng(314);
    const HilbertSpace space = HilbertSpace::qubits(2);
    for (int rep = 0; rep < 10; ++rep) {
        const ComplexMatrix ra = random_density(rng, 2);
        const ComplexMatrix rb = random_density(rng, 2);
        const ComplexMatrix red = partial_trace(kron(ra, rb), {0}, space);
        double diff = 0.0;
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) diff = std::max(diff, std::abs(red(i, j) - ra(i, j)));
        CHECK(diff <= 1e-13);
    }
}

TEST_CASE("partial trace preserves the trace and maps densities to densities") {
    Xoshiro256StarStar rng(2718);
    const HilbertSpace space = HilbertSpace::qubits(3);
    for (int rep = 0; rep < 10; ++rep) {
        const ComplexMatrix rho = random_density(rng, 8);
        const ComplexMatrix red = partial_trace(rho, {0, 2}, space);
        CHECK(std::abs(red.trace() - cdouble(1.0, 0.0)) <= 1e-10);
        CHECK(hermitian_eig(red).eigenvalues.front() >= -1e-9);
    }
}

TEST_CASE("partial trace rejects out-of-range keep sets") {
    const HilbertSpace space = HilbertSpace::qubits(2);
    const ComplexMatrix rho = ComplexMatrix::identity(4) * cdouble(0.25, 0.0);
    CHECK_THROWS_AS(partial_trace(rho, {2}, space), Error);
}

TEST_CASE("reduced_density on a pure state matches partial_trace of its projector") {
    Xoshiro256StarStar rng(55);
    const HilbertSpace space(std::vector<std::size_t>{2, 3, 2});
    StateVector psi(space.total_dim());
    for (auto& z : psi) z = rng.complex_gaussian();
    const double nn = norm(psi);
    for (auto& z : psi) z /= nn;

    const std::vector<std::size_t> keep{0, 2};
    const ComplexMatrix a = reduced_density(psi, keep, space);
    const ComplexMatrix b = partial_trace(pure_density(psi), keep, space);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = 0; j < a.dim(); ++j) diff = std::max(diff, std::abs(a(i, j) - b(i, j)));
    CHECK(diff <= 1e-13);
}

TEST_CASE("entropy of pure states is zero, of the maximally mixed qubit ln 2") {
    StateVector psi(4, cdouble(0.0, 0.0));
    psi[1] = cdouble(0.0, 1.0);
    CHECK(von_neumann_entropy(pure_density(psi)) <= 1e-12);
    CHECK(von_neumann_entropy(cdouble(0.5, 0.0) * ComplexMatrix::identity(2)) ==
          Catch::Approx(kLn2).epsilon(1e-12));
}

TEST_CASE("binary entropy value for diag(0.25, 0.75)") {
    const ComplexMatrix rho = ComplexMatrix::diagonal({0.25, 0.75});
    const double expect = -(0.25 * std::log(0.25) + 0.75 * std::log(0.75));
    CHECK(von_neumann_entropy(rho) == Catch::Approx(expect).epsilon(1e-13));
}

TEST_CASE("entropy purity symmetry across a random bipartition") {
    Xoshiro256StarStar rng(808);
    const HilbertSpace space = HilbertSpace::qubits(5);
    StateVector psi(space.total_dim());
    for (auto& z : psi) z = rng.complex_gaussian();
    const double nn = norm(psi);
    for (auto& z : psi) z /= nn;

    const std::vector<std::size_t> part{1, 3};
    const double sa = von_neumann_entropy(reduced_density(psi, part, space));
    const double sb = von_neumann_entropy(reduced_density(psi, space.complement(part), space));
    CHECK(std::abs(sa - sb) <= 1e-9);
}

TEST_CASE("entropy rejects genuinely negative spectra") {
    CHECK_THROWS_AS(von_neumann_entropy(ComplexMatrix::diagonal({1.5, -0.5})), Error);
}

TEST_CASE("relative entropy of a state with itself is zero") {
    Xoshiro256StarStar rng(4242);
    const ComplexMatrix rho = random_density(rng, 4);
    CHECK(std::abs(relative_entropy(rho, rho)) <= 1e-10);
}

TEST_CASE("relative entropy of |0><0| against I/2 is ln 2") {
    ComplexMatrix rho(2);
    rho(0, 0) = 1.0;
    const ComplexMatrix phi = cdouble(0.5, 0.0) * ComplexMatrix::identity(2);
    CHECK(relative_entropy(rho, phi) == Catch::Approx(kLn2).epsilon(1e-12));
}

TEST_CASE("relative entropy returns the infinity marker on support violation") {
    ComplexMatrix rho(2), phi(2);
    rho(0, 0) = 1.0;
    phi(1, 1) = 1.0;
    CHECK(std::isinf(relative_entropy(rho, phi)));
}

TEST_CASE("is_density accepts densities and rejects the rest") {
    Xoshiro256StarStar rng(17);
    CHECK(is_density(random_density(rng, 5), 1e-9));
    CHECK_FALSE(is_density(pauli_z(), 1e-9));                                // trace 0
    CHECK_FALSE(is_density(cdouble(2.0, 0.0) * ComplexMatrix::identity(2), 1e-9)); // trace 4
}
