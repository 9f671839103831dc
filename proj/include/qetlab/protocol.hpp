#pragma once

#include "qetlab/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace qetlab {

/// Probabilities below this have undefined conditional states; such outcomes
/// are pruned from the run and reported.
inline constexpr double kOutcomePruneThreshold = 1e-14;

/// Symmetric site interval [center - half_width, center + half_width].
/// The receiver's feedback unitary acts only on the interior (half_width - 1
/// around the center) so that it commutes with every energy density outside
/// the localized-energy window.
struct Region {
    long center = 0;
    long half_width = 0;

    long first() const { return center - half_width; }
    long last() const { return center + half_width; }
    long interior_first() const { return center - (half_width - 1); }
    long interior_last() const { return center + (half_width - 1); }

    std::vector<std::size_t> sites() const {
        std::vector<std::size_t> out;
        for (long n = first(); n <= last(); ++n) out.push_back(static_cast<std::size_t>(n));
        return out;
    }
};

struct GeometryViolation {
    std::string rule;
    double required = 0.0;
    double actual = 0.0;
};

struct GeometryReport {
    bool ok = true;
    std::vector<GeometryViolation> violations;

    std::string to_string() const {
        if (ok) return "geometry ok";
        std::ostringstream os;
        os << "geometry violations:";
        for (const auto& v : violations)
            os << " [" << v.rule << ": need " << v.required << ", have " << v.actual << "]";
        return os.str();
    }
};

/// Separation rule |n_A - n_B| >= 2 + l_A + l_B plus chain bounds. The rule
/// leaves at least one untouched site between the measured region and the
/// support window of the receiver's localized energy, which is what makes
/// every locality statement downstream exact.
inline GeometryReport validate_geometry(const Region& a, const Region& b, const HilbertSpace& space) {
    GeometryReport rep;
    const long n_sites = static_cast<long>(space.num_sites());
    auto violate = [&rep](const std::string& rule, double required, double actual) {
        rep.ok = false;
        rep.violations.push_back({rule, required, actual});
    };

    if (a.half_width < 0) violate("sender half-width >= 0", 0, static_cast<double>(a.half_width));
    if (b.half_width < 1) violate("receiver half-width >= 1", 1, static_cast<double>(b.half_width));
    if (a.first() < 0) violate("sender interval start >= 0", 0, static_cast<double>(a.first()));
    if (a.last() >= n_sites)
        violate("sender interval end < N", static_cast<double>(n_sites - 1), static_cast<double>(a.last()));
    if (b.first() < 0) violate("receiver interval start >= 0", 0, static_cast<double>(b.first()));
    if (b.last() >= n_sites)
        violate("receiver interval end < N", static_cast<double>(n_sites - 1), static_cast<double>(b.last()));

    const long separation = std::abs(a.center - b.center);
    const long required = 2 + a.half_width + b.half_width;
    if (separation < required)
        violate("separation |n_A - n_B| >= 2 + l_A + l_B", static_cast<double>(required),
                static_cast<double>(separation));
    return rep;
}

inline void require_valid_geometry(const Region& a, const Region& b, const HilbertSpace& space) {
    const GeometryReport rep = validate_geometry(a, b, space);
    if (!rep.ok) throw GeometryError(rep.to_string());
}

/// Outcome-indexed Kraus operators on the measured region's subspace.
struct MeasurementScheme {
    std::vector<ComplexMatrix> kraus;
    std::vector<std::string> labels;

    /// max-abs deviation of sum M^dagger M from the identity.
    double completeness_defect() const {
        if (kraus.empty()) return 1.0;
        const std::size_t d = kraus.front().dim();
        ComplexMatrix acc(d);
        for (const auto& m : kraus) acc += m.adjoint() * m;
        acc -= ComplexMatrix::identity(d);
        return acc.max_abs();
    }

    bool is_complete(double tol = 1e-10) const { return completeness_defect() <= tol; }

    /// Projective measurement of a Bloch-axis spin component on every site of
    /// the region; outcomes are sign patterns, later sites varying fastest.
    static MeasurementScheme bloch_projective(const HilbertSpace& space, const Region& region,
                                              const std::vector<std::array<double, 3>>& axes) {
        const auto sites = region.sites();
        if (axes.size() != sites.size())
            throw Error("bloch_projective: need one axis per region site");
        MeasurementScheme scheme;
        scheme.kraus = {ComplexMatrix::identity(1)};
        scheme.labels = {""};
        for (std::size_t s = 0; s < sites.size(); ++s) {
            if (space.site_dim(sites[s]) != 2)
                throw Error("bloch_projective: sites must be qubits");
            auto [ux, uy, uz] = axes[s];
            const double len = std::sqrt(ux * ux + uy * uy + uz * uz);
            if (len < 1e-12) throw Error("bloch_projective: zero axis");
            const ComplexMatrix su = bloch_axis_operator(ux / len, uy / len, uz / len);
            const ComplexMatrix plus = cdouble(0.5, 0.0) * (ComplexMatrix::identity(2) + su);
            const ComplexMatrix minus = cdouble(0.5, 0.0) * (ComplexMatrix::identity(2) - su);
            std::vector<ComplexMatrix> next_k;
            std::vector<std::string> next_l;
            for (std::size_t i = 0; i < scheme.kraus.size(); ++i) {
                next_k.push_back(kron(scheme.kraus[i], plus));
                next_l.push_back(scheme.labels[i] + "+");
                next_k.push_back(kron(scheme.kraus[i], minus));
                next_l.push_back(scheme.labels[i] + "-");
            }
            scheme.kraus = std::move(next_k);
            scheme.labels = std::move(next_l);
        }
        return scheme;
    }
};

/// Per-outcome Hermitian generators on the receiver's actuation interior and
/// the rotation angles theta.
struct FeedbackControl {
    std::vector<ComplexMatrix> generators;
    std::vector<double> thetas;

    /// Same single-site Bloch-axis Pauli at the region center for every
    /// outcome, embedded in the interior subspace. Involutive by construction.
    static FeedbackControl bloch_generator(const HilbertSpace& space, const Region& b,
                                           std::array<double, 3> axis, std::size_t n_outcomes) {
        if (b.half_width < 1) throw Error("bloch_generator: receiver half-width must be >= 1");
        const auto [ux, uy, uz] = axis;
        const double len = std::sqrt(ux * ux + uy * uy + uz * uz);
        if (len < 1e-12) throw Error("bloch_generator: zero axis");
        std::vector<std::size_t> dims;
        for (long n = b.interior_first(); n <= b.interior_last(); ++n) {
            space.check_site(static_cast<std::size_t>(n));
            dims.push_back(space.site_dim(static_cast<std::size_t>(n)));
        }
        const HilbertSpace interior(dims, space.total_dim());
        if (space.site_dim(static_cast<std::size_t>(b.center)) != 2)
            throw Error("bloch_generator: center site must be a qubit");
        const ComplexMatrix su = bloch_axis_operator(ux / len, uy / len, uz / len);
        const std::size_t pos = static_cast<std::size_t>(b.center - b.interior_first());
        const ComplexMatrix g = embed_local(su, pos, pos, interior);
        FeedbackControl control;
        control.generators.assign(n_outcomes, g);
        control.thetas.assign(n_outcomes, 0.0);
        return control;
    }
};

/// Operators a protocol run needs repeatedly, built once per (model, regions).
struct ProtocolOperators {
    Region a, b;
    ComplexMatrix h;     // full-space Hamiltonian
    SupportOperator h_b; // localized energy of B on its support window
    double h_b_norm = 0.0;

    static ProtocolOperators build(const ChainModel& model, const Region& a, const Region& b) {
        require_valid_geometry(a, b, model.space());
        ProtocolOperators ops;
        ops.a = a;
        ops.b = b;
        ops.h = hamiltonian(model);
        ops.h_b = localized_energy_support(model, static_cast<std::size_t>(b.first()),
                                           static_cast<std::size_t>(b.last()));
        // the operator norm is embedding-invariant, so the window suffices
        ops.h_b_norm = operator_norm(ops.h_b.op);
        return ops;
    }
};

struct OutcomeRecord {
    std::size_t index = 0; // position in the scheme's outcome list
    std::string label;
    double probability = 0.0;
    double theta = 0.0;
    StateVector psi1, psi2;
    double localized_energy_post = 0.0; // <psi2| H_B |psi2>
};

/// Full protocol record: measurement statistics, both teleported-energy
/// routes, the mean post-feedback energy, and every locality residual.
struct QetRun {
    Region region_a, region_b;
    std::vector<OutcomeRecord> outcomes;
    std::vector<std::string> pruned_outcomes;

    ComplexMatrix rho1, rho2;
    double prob_sum = 0.0;
    double e_a = 0.0;
    double e_b_direct = 0.0;
    double e_b_correlator = 0.0;
    double mean_h = 0.0;
    double h_b_norm = 0.0;

    double tr_hb_rho1 = 0.0;
    double tr_hb_rho2 = 0.0;
    double conservation_residual = 0.0;
    double far_site_residual = 0.0;
    double commutator_residual = 0.0;
    double route_residual = 0.0;
    double max_imag_correlator = 0.0;
    double eq17_residual = 0.0;
};

namespace detail {

inline void require_scheme(const MeasurementScheme& scheme, const Region& a,
                           const HilbertSpace& space, double tol = 1e-10) {
    const std::size_t d = space.interval_dim(static_cast<std::size_t>(a.first()),
                                             static_cast<std::size_t>(a.last()));
    if (scheme.kraus.empty()) throw Error("measurement scheme has no outcomes");
    for (const auto& m : scheme.kraus)
        if (m.dim() != d) throw Error("measurement operator does not act on the sender region");
    const double defect = scheme.completeness_defect();
    if (defect > tol)
        throw Error("measurement scheme is incomplete: sum M^t M deviates from I by " +
                    std::to_string(defect));
}

inline void require_control(const FeedbackControl& control, const Region& b,
                            const HilbertSpace& space, std::size_t n_outcomes) {
    if (control.generators.size() != n_outcomes || control.thetas.size() != n_outcomes)
        throw Error("feedback control must supply one generator and angle per outcome");
    const std::size_t d = space.interval_dim(static_cast<std::size_t>(b.interior_first()),
                                             static_cast<std::size_t>(b.interior_last()));
    for (const auto& g : control.generators) {
        if (g.dim() != d)
            throw Error("feedback generator leaks outside the receiver's actuation interior");
        const double scale = std::max(g.max_abs(), 1.0);
        if (!g.is_hermitian(1e-10 * scale)) throw Error("feedback generator is not Hermitian");
    }
}

/// U_B(mu) on the actuation interior.
inline ComplexMatrix interior_unitary(const FeedbackControl& control, std::size_t mu) {
    return unitary_from_generator(control.generators[mu], control.thetas[mu]);
}

} // namespace detail

/// Alice's POVM on the ground state: probabilities, conditional states, the
/// average post-measurement state, and the injected energy.
inline QetRun measure(const GroundState& gs, const MeasurementScheme& scheme,
                      const ProtocolOperators& ops, const ChainModel& model) {
    const HilbertSpace& space = model.space();
    detail::require_scheme(scheme, ops.a, space);

    QetRun run;
    run.region_a = ops.a;
    run.region_b = ops.b;
    run.h_b_norm = ops.h_b_norm;
    run.rho1 = ComplexMatrix(space.total_dim());

    const auto a_first = static_cast<std::size_t>(ops.a.first());
    const auto a_last = static_cast<std::size_t>(ops.a.last());
    for (std::size_t mu = 0; mu < scheme.kraus.size(); ++mu) {
        StateVector phi = apply_local(scheme.kraus[mu], a_first, a_last, space, gs.vector);
        const double p = inner(phi, phi).real();
        run.prob_sum += p;
        if (p < kOutcomePruneThreshold) {
            run.pruned_outcomes.push_back(scheme.labels[mu]);
            continue;
        }
        const double inv = 1.0 / std::sqrt(p);
        for (auto& z : phi) z *= inv;
        add_outer(run.rho1, phi, p);
        OutcomeRecord rec;
        rec.index = mu;
        rec.label = scheme.labels[mu];
        rec.probability = p;
        rec.psi1 = std::move(phi);
        run.outcomes.push_back(std::move(rec));
    }
    double e_a = 0.0;
    for (const auto& rec : run.outcomes) e_a += rec.probability * expectation(ops.h, rec.psi1);
    run.e_a = e_a;
    run.tr_hb_rho1 = 0.0;
    for (const auto& rec : run.outcomes)
        run.tr_hb_rho1 += rec.probability * ops.h_b.expectation(space, rec.psi1);
    return run;
}

/// |Tr[H_B rho1]| — zero for any valid geometry because the measurement
/// cannot excite the receiver's localized energy.
inline double locality_check_rho1(const QetRun& run) { return std::abs(run.tr_hb_rho1); }

/// Bob's conditioned unitary: per-outcome states, the average post-feedback
/// state, and the direct teleported-energy route Tr[H rho1] - Tr[H rho2].
/// Control entries are indexed by the scheme's outcome order (pruned outcomes
/// keep their slots; their controls are simply never applied).
inline void apply_feedback(QetRun& run, const FeedbackControl& control,
                           const ProtocolOperators& ops, const ChainModel& model) {
    const HilbertSpace& space = model.space();
    detail::require_control(control, ops.b, space, run.outcomes.size() + run.pruned_outcomes.size());

    const auto int_first = static_cast<std::size_t>(ops.b.interior_first());
    const auto int_last = static_cast<std::size_t>(ops.b.interior_last());
    run.rho2 = ComplexMatrix(space.total_dim());
    double e_after = 0.0;
    run.tr_hb_rho2 = 0.0;
    for (auto& rec : run.outcomes) {
        rec.theta = control.thetas[rec.index];
        const ComplexMatrix u = detail::interior_unitary(control, rec.index);
        rec.psi2 = apply_local(u, int_first, int_last, space, rec.psi1);
        add_outer(run.rho2, rec.psi2, rec.probability);
        e_after += rec.probability * expectation(ops.h, rec.psi2);
        rec.localized_energy_post = ops.h_b.expectation(space, rec.psi2);
        run.tr_hb_rho2 += rec.probability * rec.localized_energy_post;
    }
    run.e_b_direct = run.e_a - e_after;
}

/// E_B from the ground-state correlator route: the sum over outcomes of
/// -<g| Pi(mu) U^t H_B U |g>, with the commutator [Pi(mu), H_B(mu)] checked
/// on the joint support subspace en route.
struct CorrelatorResult {
    double e_b = 0.0;
    double max_imag = 0.0;
    double max_commutator_norm = 0.0;
};

inline CorrelatorResult teleported_energy_correlator(const GroundState& gs,
                                                     const MeasurementScheme& scheme,
                                                     const FeedbackControl& control,
                                                     const ProtocolOperators& ops,
                                                     const ChainModel& model) {
    const HilbertSpace& space = model.space();
    detail::require_scheme(scheme, ops.a, space);
    detail::require_control(control, ops.b, space, scheme.kraus.size());

    const auto a_first = static_cast<std::size_t>(ops.a.first());
    const auto a_last = static_cast<std::size_t>(ops.a.last());
    const auto int_first = static_cast<std::size_t>(ops.b.interior_first());
    const auto int_last = static_cast<std::size_t>(ops.b.interior_last());

    // joint subspace of the sender sites and the H_B support window, for the
    // commutator check (embedding with identities preserves the norm)
    std::vector<std::size_t> joint_sites;
    for (std::size_t n = a_first; n <= a_last; ++n) joint_sites.push_back(n);
    for (std::size_t n = ops.h_b.first; n <= ops.h_b.last; ++n) joint_sites.push_back(n);
    std::sort(joint_sites.begin(), joint_sites.end());
    if (std::adjacent_find(joint_sites.begin(), joint_sites.end()) != joint_sites.end())
        throw GeometryError("sender region overlaps the receiver's localized-energy window");
    std::vector<std::size_t> joint_dims;
    for (std::size_t n : joint_sites) joint_dims.push_back(space.site_dim(n));
    const HilbertSpace joint(joint_dims, space.total_dim());
    auto joint_pos = [&](std::size_t site) {
        return static_cast<std::size_t>(std::lower_bound(joint_sites.begin(), joint_sites.end(), site) -
                                        joint_sites.begin());
    };
    const HilbertSpace window = ops.h_b.window_space(space);

    CorrelatorResult out;
    for (std::size_t mu = 0; mu < scheme.kraus.size(); ++mu) {
        // Pi(mu)|g> via two local applications
        StateVector pig = apply_local(scheme.kraus[mu], a_first, a_last, space, gs.vector);
        pig = apply_local(scheme.kraus[mu].adjoint(), a_first, a_last, space, pig);

        // H_B(mu)|g> = U^t (H_B (U |g>))
        const ComplexMatrix u = detail::interior_unitary(control, mu);
        StateVector t = apply_local(u, int_first, int_last, space, gs.vector);
        t = ops.h_b.apply(space, t);
        t = apply_local(u.adjoint(), int_first, int_last, space, t);

        const cdouble val = inner(pig, t);
        out.e_b -= val.real();
        out.max_imag = std::max(out.max_imag, std::abs(val.imag()));

        // [Pi(mu), H_B(mu)] on the joint subspace
        const ComplexMatrix pi_small = scheme.kraus[mu].adjoint() * scheme.kraus[mu];
        const ComplexMatrix pi_joint = embed_local(pi_small, joint_pos(a_first), joint_pos(a_last), joint);
        const std::size_t wpos0 = static_cast<std::size_t>(ops.b.interior_first()) - ops.h_b.first;
        const std::size_t wpos1 = static_cast<std::size_t>(ops.b.interior_last()) - ops.h_b.first;
        const ComplexMatrix u_w = embed_local(u, wpos0, wpos1, window);
        const ComplexMatrix hbmu_w = u_w.adjoint() * ops.h_b.op * u_w;
        const ComplexMatrix hbmu_joint =
            embed_local(hbmu_w, joint_pos(ops.h_b.first), joint_pos(ops.h_b.last), joint);
        out.max_commutator_norm =
            std::max(out.max_commutator_norm, commutator(pi_joint, hbmu_joint).frobenius_norm());
    }
    return out;
}

struct ConservationReport {
    double conservation_residual = 0.0; // |E_B + Tr[H_B rho2]|
    double tr_hb_rho2 = 0.0;
    double far_site_residual = 0.0;
    bool negative_region_ok = true; // Tr[H_B rho2] < 0 whenever E_B > tol
};

/// Local energy bookkeeping after feedback: E_B = -Tr[H_B rho2], the
/// negative-energy region around the receiver, and the untouched far sites.
inline ConservationReport energy_conservation_check(const QetRun& run, const ProtocolOperators& ops,
                                                    const ChainModel& model, double tol = 1e-9) {
    const HilbertSpace& space = model.space();
    ConservationReport rep;
    rep.tr_hb_rho2 = run.tr_hb_rho2;
    rep.conservation_residual = std::abs(run.e_b_direct + run.tr_hb_rho2);
    if (run.e_b_direct > tol) rep.negative_region_ok = (run.tr_hb_rho2 < 0.0);

    const long n_sites = static_cast<long>(space.num_sites());
    for (long n = 0; n < n_sites; ++n) {
        if (std::abs(n - ops.b.center) < ops.b.half_width + 1) continue;
        const SupportOperator t = energy_density_support(model, static_cast<std::size_t>(n));
        double before = 0.0, after = 0.0;
        for (const auto& rec : run.outcomes) {
            before += rec.probability * t.expectation(space, rec.psi1);
            after += rec.probability * t.expectation(space, rec.psi2);
        }
        rep.far_site_residual = std::max(rep.far_site_residual, std::abs(before - after));
    }
    return rep;
}

/// <H> = sum_mu p_A(mu) <g| U^t H U |g>: the mean excitation energy of
/// applying the feedback family directly to the ground state.
inline double mean_post_feedback_energy(const GroundState& gs, const MeasurementScheme& scheme,
                                        const FeedbackControl& control, const ProtocolOperators& ops,
                                        const ChainModel& model) {
    const HilbertSpace& space = model.space();
    detail::require_scheme(scheme, ops.a, space);
    detail::require_control(control, ops.b, space, scheme.kraus.size());
    const auto a_first = static_cast<std::size_t>(ops.a.first());
    const auto a_last = static_cast<std::size_t>(ops.a.last());
    const auto int_first = static_cast<std::size_t>(ops.b.interior_first());
    const auto int_last = static_cast<std::size_t>(ops.b.interior_last());

    double total = 0.0;
    for (std::size_t mu = 0; mu < scheme.kraus.size(); ++mu) {
        const StateVector mg = apply_local(scheme.kraus[mu], a_first, a_last, space, gs.vector);
        const double p = inner(mg, mg).real();
        if (p < kOutcomePruneThreshold) continue;
        const ComplexMatrix u = detail::interior_unitary(control, mu);
        const StateVector ug = apply_local(u, int_first, int_last, space, gs.vector);
        total += p * expectation(ops.h, ug);
    }
    return total;
}

/// Verifies the identity <g|U^t H_B U|g> = <g|U^t H U|g> per outcome; its
/// derivation needs only far-site locality, so it holds on any ground state.
inline double eq_localization_residual(const GroundState& gs, const FeedbackControl& control,
                                       const ProtocolOperators& ops, const ChainModel& model) {
    const HilbertSpace& space = model.space();
    const auto int_first = static_cast<std::size_t>(ops.b.interior_first());
    const auto int_last = static_cast<std::size_t>(ops.b.interior_last());
    double worst = 0.0;
    for (std::size_t mu = 0; mu < control.generators.size(); ++mu) {
        const ComplexMatrix u = detail::interior_unitary(control, mu);
        const StateVector ug = apply_local(u, int_first, int_last, space, gs.vector);
        const double via_hb = ops.h_b.expectation(space, ug);
        const double via_h = expectation(ops.h, ug);
        worst = std::max(worst, std::abs(via_hb - via_h));
    }
    return worst;
}

struct PerturbativeResult {
    double first_order = 0.0;
    double max_imag = 0.0;
};

/// First-order expansion of E_B in the angles: sum_mu theta(mu) <g| Pi(mu)
/// Gdot(mu) |g> with Gdot = i [H_B, G].
inline PerturbativeResult perturbative_eb(const GroundState& gs, const MeasurementScheme& scheme,
                                          const FeedbackControl& control, const ProtocolOperators& ops,
                                          const ChainModel& model) {
    const HilbertSpace& space = model.space();
    detail::require_scheme(scheme, ops.a, space);
    detail::require_control(control, ops.b, space, scheme.kraus.size());
    const auto a_first = static_cast<std::size_t>(ops.a.first());
    const auto a_last = static_cast<std::size_t>(ops.a.last());
    const HilbertSpace window = ops.h_b.window_space(space);
    const std::size_t wpos0 = static_cast<std::size_t>(ops.b.interior_first()) - ops.h_b.first;
    const std::size_t wpos1 = static_cast<std::size_t>(ops.b.interior_last()) - ops.h_b.first;

    PerturbativeResult out;
    for (std::size_t mu = 0; mu < scheme.kraus.size(); ++mu) {
        const ComplexMatrix g_w = embed_local(control.generators[mu], wpos0, wpos1, window);
        const ComplexMatrix gdot = cdouble(0.0, 1.0) * commutator(ops.h_b.op, g_w);

        StateVector pig = apply_local(scheme.kraus[mu], a_first, a_last, space, gs.vector);
        pig = apply_local(scheme.kraus[mu].adjoint(), a_first, a_last, space, pig);
        const StateVector gg = apply_local(gdot, ops.h_b.first, ops.h_b.last, space, gs.vector);
        const cdouble val = inner(pig, gg);
        out.first_order += control.thetas[mu] * val.real();
        out.max_imag = std::max(out.max_imag, std::abs(val.imag()));
    }
    return out;
}

struct ThetaOptimum {
    std::vector<double> thetas;
    double e_b = 0.0;
    bool closed_form = false;
};

namespace detail {

/// Per-outcome contribution to E_B as a function of theta, evaluated through
/// local applications only (the generator is diagonalized once).
class OutcomeObjective {
public:
    OutcomeObjective(const GroundState& gs, const ComplexMatrix& kraus, const ComplexMatrix& generator,
                     const ProtocolOperators& ops, const ChainModel& model)
        : space_(model.space()), ops_(ops), gen_eig_(hermitian_eig(generator)) {
        const auto a_first = static_cast<std::size_t>(ops.a.first());
        const auto a_last = static_cast<std::size_t>(ops.a.last());
        pig_ = apply_local(kraus, a_first, a_last, space_, gs.vector);
        pig_ = apply_local(kraus.adjoint(), a_first, a_last, space_, pig_);
        g_ = gs.vector;
    }

    double operator()(double theta) const {
        const ComplexMatrix u = unitary_of(theta);
        const auto int_first = static_cast<std::size_t>(ops_.b.interior_first());
        const auto int_last = static_cast<std::size_t>(ops_.b.interior_last());
        StateVector t = apply_local(u, int_first, int_last, space_, g_);
        t = ops_.h_b.apply(space_, t);
        t = apply_local(u.adjoint(), int_first, int_last, space_, t);
        return -inner(pig_, t).real();
    }

private:
    ComplexMatrix unitary_of(double theta) const {
        const std::size_t n = gen_eig_.eigenvectors.dim();
        const ComplexMatrix& v = gen_eig_.eigenvectors;
        ComplexMatrix u(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                cdouble acc = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double ph = -theta * gen_eig_.eigenvalues[k];
                    acc += v(i, k) * cdouble(std::cos(ph), std::sin(ph)) * std::conj(v(j, k));
                }
                u(i, j) = acc;
            }
        return u;
    }

    const HilbertSpace& space_;
    const ProtocolOperators& ops_;
    EigResult gen_eig_;
    StateVector pig_, g_;
};

inline bool is_involutive(const ComplexMatrix& g, double tol = 1e-10) {
    ComplexMatrix sq = g * g;
    sq -= ComplexMatrix::identity(g.dim());
    return sq.max_abs() <= tol;
}

/// Golden-section maximum refinement on [lo, hi].
template <typename F>
inline double golden_section_max(const F& f, double lo, double hi, double tol = 1e-10) {
    const double gr = 0.6180339887498948482; // (sqrt(5)-1)/2
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

} // namespace detail

/// Maximize E_B over the angles. The objective separates over outcomes, so
/// each theta(mu) is optimized independently: a closed form when the
/// generator is involutive (the contribution is alpha + beta cos 2theta +
/// gamma sin 2theta), otherwise a 360-point scan over [-pi, pi) with
/// golden-section refinement. Equivalent maximizers differing by a global
/// phase of U are resolved toward the smallest |theta|.
inline ThetaOptimum optimize_theta(const GroundState& gs, const MeasurementScheme& scheme,
                                   const std::vector<ComplexMatrix>& generators,
                                   const ProtocolOperators& ops, const ChainModel& model,
                                   bool force_scan = false) {
    const HilbertSpace& space = model.space();
    detail::require_scheme(scheme, ops.a, space);
    if (generators.size() != scheme.kraus.size())
        throw Error("optimize_theta: need one generator per outcome");

    constexpr double kPi = 3.14159265358979323846;
    ThetaOptimum out;
    out.closed_form = true;
    out.thetas.resize(scheme.kraus.size(), 0.0);
    for (std::size_t mu = 0; mu < scheme.kraus.size(); ++mu) {
        const detail::OutcomeObjective f(gs, scheme.kraus[mu], generators[mu], ops, model);
        if (!force_scan && detail::is_involutive(generators[mu])) {
            const double f0 = f(0.0), f45 = f(kPi / 4), f90 = f(kPi / 2);
            const double alpha = 0.5 * (f0 + f90);
            const double beta = 0.5 * (f0 - f90);
            const double gamma = f45 - alpha;
            out.thetas[mu] = 0.5 * std::atan2(gamma, beta);
            out.e_b += alpha + std::hypot(beta, gamma);
        } else {
            out.closed_form = false;
            const int n_grid = 360;
            std::vector<double> grid_vals(n_grid + 1);
            grid_vals[0] = f(0.0); // theta = 0 is always feasible
            double best_val = grid_vals[0];
            for (int k = 0; k < n_grid; ++k) {
                const double th = -kPi + (2.0 * kPi * k) / n_grid;
                grid_vals[k + 1] = f(th);
                best_val = std::max(best_val, grid_vals[k + 1]);
            }
            // near-ties are physically equivalent maxima; take the one
            // closest to zero rotation
            const double tie_tol = 1e-12 * (1.0 + std::abs(best_val));
            double best_theta = 0.0;
            bool have = grid_vals[0] >= best_val - tie_tol;
            for (int k = 0; k < n_grid; ++k) {
                const double th = -kPi + (2.0 * kPi * k) / n_grid;
                if (grid_vals[k + 1] >= best_val - tie_tol &&
                    (!have || std::abs(th) < std::abs(best_theta))) {
                    best_theta = th;
                    have = true;
                }
            }
            const double step = 2.0 * kPi / n_grid;
            const double refined =
                detail::golden_section_max(f, best_theta - step, best_theta + step, 1e-10);
            const double refined_val = f(refined);
            if (refined_val >= best_val) {
                best_theta = refined;
                best_val = refined_val;
            }
            out.thetas[mu] = best_theta;
            out.e_b += best_val;
        }
    }
    return out;
}

/// End-to-end protocol execution with every route and diagnostic filled in.
inline QetRun run_protocol(const ChainModel& model, const GroundState& gs,
                           const MeasurementScheme& scheme, const FeedbackControl& control,
                           const ProtocolOperators& ops) {
    QetRun run = measure(gs, scheme, ops, model);
    apply_feedback(run, control, ops, model);

    const CorrelatorResult corr = teleported_energy_correlator(gs, scheme, control, ops, model);
    run.e_b_correlator = corr.e_b;
    run.max_imag_correlator = corr.max_imag;
    run.commutator_residual = corr.max_commutator_norm;
    run.route_residual = std::abs(run.e_b_direct - run.e_b_correlator);

    const ConservationReport cons = energy_conservation_check(run, ops, model);
    run.conservation_residual = cons.conservation_residual;
    run.far_site_residual = cons.far_site_residual;

    run.mean_h = mean_post_feedback_energy(gs, scheme, control, ops, model);
    run.eq17_residual = eq_localization_residual(gs, control, ops, model);
    return run;
}

} // namespace qetlab
