#include "qetlab/infotheory.hpp"
#include "qetlab/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace qetlab;

namespace {

// golden values from tests/oracle/reference_oracle.py (numpy eigh)
constexpr double kRefSEnt = 0.14007771272046832;
constexpr double kRefIAB = 0.022964097968480535;
constexpr double kRefIApB = 0.010434884056121363;
constexpr double kRefHalfTraceSq = 0.0049073353105295809;
constexpr double kRefRoleETilde = 1.8019895491327986e-06;
constexpr double kRefRoleHNorm = 6.3979950183272276;
constexpr double kRefRoleSEnt = 0.17044136671672336;

const double kLn2 = std::log(2.0);

struct ReferenceSetup {
    RenormalizedChain chain;
    Region a, b;
    ProtocolOperators ops;
    MeasurementScheme scheme;
    FeedbackControl control;

    explicit ReferenceSetup(double g = 0.5)
        : chain(renormalize(ChainModel::ising(8, 1.0, g))),
          a{1, 0},
          b{5, 1},
          ops(ProtocolOperators::build(chain.model, a, b)),
          scheme(MeasurementScheme::bloch_projective(chain.model.space(), a, {{{1, 0, 0}}})),
          control(FeedbackControl::bloch_generator(chain.model.space(), b, {0, 1, 0}, 2)) {
        const ThetaOptimum opt =
            optimize_theta(chain.ground, scheme, control.generators, ops, chain.model);
        control.thetas = opt.thetas;
    }
};

GroundState bell_ground() {
    GroundState gs;
    gs.vector = StateVector(4, cdouble(0.0, 0.0));
    gs.vector[0] = 1.0 / std::sqrt(2.0);
    gs.vector[3] = 1.0 / std::sqrt(2.0);
    gs.energy = 0.0;
    gs.gap = 1.0;
    return gs;
}

} // namespace

TEST_CASE("mutual information vanishes on a product ground state") {
    const RenormalizedChain chain = renormalize(ChainModel::ising(6, 1.0, 0.0));
    CHECK(std::abs(mutual_information(chain.ground, chain.model.space(), {0}, {3, 4})) <= 1e-10);
}

TEST_CASE("mutual information of a Bell pair is 2 ln 2") {
    const HilbertSpace space = HilbertSpace::qubits(2);
    CHECK(mutual_information(bell_ground(), space, {0}, {1}) ==
          Catch::Approx(2 * kLn2).epsilon(1e-10));
}

TEST_CASE("mutual information rejects overlapping regions") {
    const HilbertSpace space = HilbertSpace::qubits(3);
    CHECK_THROWS_AS(mutual_information(bell_ground(), space, {0, 1}, {1}), Error);
}

TEST_CASE("reference mutual information matches the golden value") {
    ReferenceSetup s;
    const double i_ab =
        mutual_information(s.chain.ground, s.chain.model.space(), {1}, {3, 4, 5, 6, 7});
    CHECK(i_ab == Catch::Approx(kRefIAB).margin(1e-9));
}

TEST_CASE("entanglement entropy: product state, Bell qubit, reference site") {
    const RenormalizedChain product = renormalize(ChainModel::ising(6, 1.0, 0.0));
    CHECK(entanglement_entropy(product.ground, product.model.space(), {2}) <= 1e-10);

    CHECK(entanglement_entropy(bell_ground(), HilbertSpace::qubits(2), {0}) ==
          Catch::Approx(kLn2).epsilon(1e-10));

    ReferenceSetup s;
    CHECK(entanglement_entropy(s.chain.ground, s.chain.model.space(), {1}) ==
          Catch::Approx(kRefSEnt).margin(1e-9));
}

TEST_CASE("identity measurement produces a single block equal to rho_B") {
    ReferenceSetup s;
    MeasurementScheme ident;
    ident.kraus = {ComplexMatrix::identity(2)};
    ident.labels = {"id"};
    const PointerEnsemble ens =
        pointer_ensemble(s.chain.ground, ident, s.a, {4, 5, 6}, s.chain.model.space());
    REQUIRE(ens.blocks.size() == 1);
    CHECK(ens.probabilities[0] == Catch::Approx(1.0).margin(1e-12));
    ComplexMatrix d = ens.blocks[0];
    d -= ens.rho_b;
    CHECK(d.max_abs() <= 1e-12);
    CHECK(post_measurement_mutual_info(ens) <= 1e-10);
}

TEST_CASE("orthogonal measurement on a product ground state gives identical blocks") {
    const RenormalizedChain chain = renormalize(ChainModel::ising(8, 1.0, 0.0));
    const Region a{1, 0};
    const auto scheme = MeasurementScheme::bloch_projective(chain.model.space(), a, {{{1, 0, 0}}});
    const PointerEnsemble ens =
        pointer_ensemble(chain.ground, scheme, a, {4, 5, 6}, chain.model.space());
    REQUIRE(ens.blocks.size() == 2);
    ComplexMatrix d = ens.blocks[0];
    d -= ens.blocks[1];
    CHECK(d.max_abs() <= 1e-12);
    CHECK(post_measurement_mutual_info(ens) <= 1e-10);
}

TEST_CASE("perfectly distinguishing binary measurement carries ln 2") {
    PointerEnsemble ens;
    ens.probabilities = {0.5, 0.5};
    ComplexMatrix b0(2), b1(2);
    b0(0, 0) = 1.0;
    b1(1, 1) = 1.0;
    ens.blocks = {b0, b1};
    ens.rho_b = cdouble(0.5, 0.0) * ComplexMatrix::identity(2);
    CHECK(post_measurement_mutual_info(ens) == Catch::Approx(kLn2).epsilon(1e-12));
}

TEST_CASE("pointer ensemble invariants and both I(A':B) forms on the reference run") {
    ReferenceSetup s;
    std::vector<std::size_t> window{3, 4, 5, 6, 7};
    const PointerEnsemble ens =
        pointer_ensemble(s.chain.ground, s.scheme, s.a, window, s.chain.model.space());
    CHECK(std::abs(ens.total_trace() - 1.0) <= 1e-10);
    CHECK(ens.marginal_defect() <= 1e-9);

    const double via_entropy = post_measurement_mutual_info(ens);
    const double via_relative = post_measurement_mutual_info_relative(ens);
    CHECK(via_entropy == Catch::Approx(kRefIApB).margin(1e-9));
    CHECK(std::abs(via_entropy - via_relative) <= 1e-9);
}

TEST_CASE("witness operator: zero angles give H_B blocks and the H_B norm") {
    ReferenceSetup s;
    FeedbackControl zero = s.control;
    zero.thetas = {0.0, 0.0};
    const WitnessOperator w = bound_witness_operator(zero, s.ops.h_b, s.b, s.chain.model.space());
    REQUIRE(w.blocks.size() == 2);
    for (const auto& blk : w.blocks) {
        ComplexMatrix d = blk;
        d -= s.ops.h_b.op;
        CHECK(d.max_abs() <= 1e-12);
    }
    CHECK(std::abs(w.norm() - s.ops.h_b_norm) <= 1e-10);
}

TEST_CASE("witness traces reproduce -E_B and <H> on the reference run") {
    ReferenceSetup s;
    const QetRun run = run_protocol(s.chain.model, s.chain.ground, s.scheme, s.control, s.ops);
    const BoundChainReport rep =
        bound_chain(run, s.chain.ground, s.scheme, s.control, s.ops, s.chain.model);
    CHECK(rep.witness_eb_residual <= 1e-9);
    CHECK(rep.witness_meanh_residual <= 1e-9);
    CHECK(rep.witness_norm_residual <= 1e-10);
}

TEST_CASE("bound chain on the reference run: golden values and ordered links") {
    ReferenceSetup s;
    const QetRun run = run_protocol(s.chain.model, s.chain.ground, s.scheme, s.control, s.ops);
    const BoundChainReport rep =
        bound_chain(run, s.chain.ground, s.scheme, s.control, s.ops, s.chain.model);

    CHECK(rep.s_ent == Catch::Approx(kRefSEnt).margin(1e-9));
    CHECK(rep.i_ab == Catch::Approx(kRefIAB).margin(1e-9));
    CHECK(rep.i_apb == Catch::Approx(kRefIApB).margin(1e-9));
    CHECK(rep.half_trace_sq == Catch::Approx(kRefHalfTraceSq).margin(1e-9));

    CHECK(rep.slack_ent_iab >= -1e-9);
    CHECK(rep.slack_iab_iapb >= -1e-9);
    CHECK(rep.slack_iapb_trace >= -1e-9);
    CHECK(rep.slack_trace_witness >= -1e-9);
    CHECK(rep.eq70_checked);
    CHECK(rep.slack_witness_eb >= -1e-9);
    CHECK(rep.purity_residual <= 1e-9);
    CHECK(rep.sent_half_iaa_residual <= 1e-9);
    CHECK(rep.pass());
}

TEST_CASE("bound chain at theta = 0 reduces to the entropic links") {
    ReferenceSetup s;
    FeedbackControl zero = s.control;
    zero.thetas = {0.0, 0.0};
    QetRun run = measure(s.chain.ground, s.scheme, s.ops, s.chain.model);
    apply_feedback(run, zero, s.ops, s.chain.model);
    run.mean_h = mean_post_feedback_energy(s.chain.ground, s.scheme, zero, s.ops, s.chain.model);
    const BoundChainReport rep =
        bound_chain(run, s.chain.ground, s.scheme, zero, s.ops, s.chain.model);
    CHECK(rep.rhs_22 <= 1e-12);
    CHECK(rep.rhs_70 <= 1e-12);
    CHECK(rep.slack_ent_iab >= -1e-9);
    CHECK(rep.slack_iab_iapb >= -1e-9);
    CHECK(rep.i_ab >= -1e-9);
}

TEST_CASE("separable ground state attains equality throughout the chain") {
    ReferenceSetup s(0.0);
    const QetRun run = run_protocol(s.chain.model, s.chain.ground, s.scheme, s.control, s.ops);
    const BoundChainReport rep =
        bound_chain(run, s.chain.ground, s.scheme, s.control, s.ops, s.chain.model);
    CHECK(std::abs(rep.s_ent) <= 1e-9);
    CHECK(std::abs(rep.i_ab) <= 1e-9);
    CHECK(std::abs(rep.i_apb) <= 1e-9);
    CHECK(std::abs(rep.half_trace_sq) <= 1e-9);
    CHECK(std::abs(run.e_b_direct + run.mean_h) <= 1e-9);
    CHECK(rep.pass());
}

TEST_CASE("mutual information monotonicity under discarding and measurement") {
    ReferenceSetup s;
    const HilbertSpace& space = s.chain.model.space();
    const std::vector<std::size_t> sites_a{1};
    const std::vector<std::size_t> window{3, 4, 5, 6, 7};

    const double i_a_abar =
        mutual_information(s.chain.ground, space, sites_a, space.complement(sites_a));
    const double i_ab = mutual_information(s.chain.ground, space, sites_a, window);
    const PointerEnsemble ens = pointer_ensemble(s.chain.ground, s.scheme, s.a, window, space);
    const double i_apb = post_measurement_mutual_info(ens);

    CHECK(i_a_abar >= i_ab - 1e-9);
    CHECK(i_ab >= i_apb - 1e-9);
}

TEST_CASE("role exchange on the N=10 mirrored run matches the golden values") {
    const RenormalizedChain chain = renormalize(ChainModel::ising(10, 1.0, 0.5));
    const Region measured{7, 1}, receiver{2, 1};
    const auto scheme = MeasurementScheme::bloch_projective(
        chain.model.space(), measured, {{{1, 0, 0}, {1, 0, 0}, {1, 0, 0}}});
    FeedbackControl control = FeedbackControl::bloch_generator(chain.model.space(), receiver,
                                                               {0, 1, 0}, scheme.kraus.size());
    const ProtocolOperators ops = ProtocolOperators::build(chain.model, measured, receiver);
    const ThetaOptimum opt =
        optimize_theta(chain.ground, scheme, control.generators, ops, chain.model);
    control.thetas = opt.thetas;

    const RoleExchangeReport rep =
        role_exchange_bound(chain.model, chain.ground, measured, receiver, scheme, control);
    CHECK(rep.e_tilde == Catch::Approx(kRefRoleETilde).margin(1e-9));
    CHECK(rep.h_tilde_norm == Catch::Approx(kRefRoleHNorm).margin(1e-9));
    CHECK(rep.s_ent_receiver == Catch::Approx(kRefRoleSEnt).margin(1e-9));
    CHECK(std::abs(rep.s_ent_receiver - rep.s_ent_complement) <= 1e-9);
    CHECK(rep.slack >= -1e-9);
    CHECK(rep.pass());
}

TEST_CASE("role exchange requires an extended receiver region") {
    const RenormalizedChain chain = renormalize(ChainModel::ising(8, 1.0, 0.5));
    MeasurementScheme dummy;
    dummy.kraus = {ComplexMatrix::identity(2)};
    dummy.labels = {"id"};
    FeedbackControl fc;
    CHECK_THROWS_AS(
        role_exchange_bound(chain.model, chain.ground, Region{5, 0}, Region{1, 0}, dummy, fc),
        GeometryError);
}

TEST_CASE("pinsker: identical states, orthogonal pure states, seeded sweep") {
    Xoshiro256StarStar rng(7777);
    const ComplexMatrix rho = random_density(rng, 3);
    CHECK(std::abs(pinsker_check(rho, rho)) <= 1e-9);

    ComplexMatrix p0(2), p1(2);
    p0(0, 0) = 1.0;
    p1(1, 1) = 1.0;
    CHECK(std::isinf(pinsker_check(p0, p1))); // S = inf beats (1/2) * 2^2

    for (int i = 0; i < 200; ++i) {
        Xoshiro256StarStar stream(sample_seed(42, static_cast<std::uint64_t>(i)));
        const std::size_t dim = 2 + static_cast<std::size_t>(stream.next() % 7);
        const ComplexMatrix a = random_density(stream, dim);
        const ComplexMatrix b = random_density(stream, dim);
        CHECK(pinsker_check(a, b) >= -1e-9);
    }
}

TEST_CASE("holder: equality at X=Y=sz, trace bound at Y=I, seeded sweep") {
    CHECK(std::abs(holder_check(pauli_z(), pauli_z())) <= 1e-12);

    Xoshiro256StarStar rng(2024);
    const ComplexMatrix x = random_hermitian(rng, 4);
    const double slack_identity = holder_check(x, ComplexMatrix::identity(4));
    CHECK(slack_identity >= -1e-10);
    CHECK(trace_norm(x) - std::abs(x.trace().real()) ==
          Catch::Approx(slack_identity).margin(1e-12));

    for (int i = 0; i < 200; ++i) {
        Xoshiro256StarStar stream(sample_seed(99, static_cast<std::uint64_t>(i)));
        const std::size_t dim = 2 + static_cast<std::size_t>(stream.next() % 7);
        const ComplexMatrix a = random_hermitian(stream, dim);
        const ComplexMatrix b = random_hermitian(stream, dim);
        CHECK(holder_check(a, b) >= -1e-10);
    }
}

TEST_CASE("holder rejects a zero Y") {
    CHECK_THROWS_AS(holder_check(pauli_z(), ComplexMatrix(2)), Error);
}

TEST_CASE("trace-norm spectral identity holds on seeded pairs") {
    for (int i = 0; i < 100; ++i) {
        Xoshiro256StarStar stream(sample_seed(123, static_cast<std::uint64_t>(i)));
        const std::size_t dim = 2 + static_cast<std::size_t>(stream.next() % 7);
        const ComplexMatrix a = random_density(stream, dim);
        const ComplexMatrix b = random_density(stream, dim);
        CHECK(trace_norm_spectral_residual(a, b) <= 1e-10);
    }
}
