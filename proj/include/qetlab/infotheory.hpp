#pragma once

#include "qetlab/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace qetlab {

/// I(A:B) = S_A + S_B - S_AB of the pure state on two disjoint site sets.
inline double mutual_information(const GroundState& gs, const HilbertSpace& space,
                                 const std::vector<std::size_t>& sites_a,
                                 const std::vector<std::size_t>& sites_b) {
    std::vector<std::size_t> joint = sites_a;
    joint.insert(joint.end(), sites_b.begin(), sites_b.end());
    std::sort(joint.begin(), joint.end());
    if (std::adjacent_find(joint.begin(), joint.end()) != joint.end())
        throw Error("mutual_information: regions overlap");
    const double s_a = von_neumann_entropy(reduced_density(gs.vector, sites_a, space));
    const double s_b = von_neumann_entropy(reduced_density(gs.vector, sites_b, space));
    const double s_ab = von_neumann_entropy(reduced_density(gs.vector, joint, space));
    return s_a + s_b - s_ab;
}

/// S_ent(A, complement) = S(rho_A) for the pure ground state.
inline double entanglement_entropy(const GroundState& gs, const HilbertSpace& space,
                                   const std::vector<std::size_t>& sites_a) {
    return von_neumann_entropy(reduced_density(gs.vector, sites_a, space));
}

/// Outcome-labeled ensemble of conditional receiver states: the
/// measurement-pointer construction realized directly in its block-diagonal
/// form (one receiver-window block per outcome, weighted by probability).
struct PointerEnsemble {
    std::vector<double> probabilities;
    std::vector<ComplexMatrix> blocks; // rho_B(mu), unit trace each
    ComplexMatrix rho_b;               // ensemble marginal = reduced ground state

    std::size_t block_dim() const { return rho_b.dim(); }

    /// max-abs deviation of sum_mu p(mu) rho_B(mu) from rho_B.
    double marginal_defect() const {
        ComplexMatrix acc(block_dim());
        for (std::size_t mu = 0; mu < blocks.size(); ++mu) {
            ComplexMatrix w = blocks[mu];
            w *= cdouble(probabilities[mu], 0.0);
            acc += w;
        }
        acc -= rho_b;
        return acc.max_abs();
    }

    double total_trace() const {
        double t = 0.0;
        for (std::size_t mu = 0; mu < blocks.size(); ++mu)
            t += probabilities[mu] * blocks[mu].trace().real();
        return t;
    }

    /// Dense block-diagonal rho_{A'B} (outcome index slow, window index fast).
    ComplexMatrix assembled() const {
        const std::size_t d = block_dim();
        ComplexMatrix out(blocks.size() * d);
        for (std::size_t mu = 0; mu < blocks.size(); ++mu)
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    out(mu * d + i, mu * d + j) = probabilities[mu] * blocks[mu](i, j);
        return out;
    }

    /// Dense rho_{A'} (x) rho_B on the same index layout.
    ComplexMatrix assembled_product() const {
        const std::size_t d = block_dim();
        ComplexMatrix out(blocks.size() * d);
        for (std::size_t mu = 0; mu < blocks.size(); ++mu)
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    out(mu * d + i, mu * d + j) = probabilities[mu] * rho_b(i, j);
        return out;
    }
};

/// Build the pointer ensemble over the given receiver sites (ascending).
/// Outcomes with pruned probability are skipped, matching the run record.
inline PointerEnsemble pointer_ensemble(const GroundState& gs, const MeasurementScheme& scheme,
                                        const Region& region_a,
                                        const std::vector<std::size_t>& receiver_sites,
                                        const HilbertSpace& space) {
    PointerEnsemble ens;
    ens.rho_b = reduced_density(gs.vector, receiver_sites, space);
    const auto a_first = static_cast<std::size_t>(region_a.first());
    const auto a_last = static_cast<std::size_t>(region_a.last());
    for (std::size_t mu = 0; mu < scheme.kraus.size(); ++mu) {
        StateVector phi = apply_local(scheme.kraus[mu], a_first, a_last, space, gs.vector);
        const double p = inner(phi, phi).real();
        if (p < kOutcomePruneThreshold) continue;
        const double inv = 1.0 / std::sqrt(p);
        for (auto& z : phi) z *= inv;
        ens.probabilities.push_back(p);
        ens.blocks.push_back(reduced_density(phi, receiver_sites, space));
    }
    return ens;
}

/// I(A':B) from the entropy combination S(rho_A') + S(rho_B) - S(rho_A'B);
/// the block structure turns S(rho_A'B) into a sum over block spectra.
inline double post_measurement_mutual_info(const PointerEnsemble& ens) {
    double s_ap = 0.0;
    for (double p : ens.probabilities)
        if (p >= kEntropyKernelCutoff) s_ap -= p * std::log(p);
    const double s_b = von_neumann_entropy(ens.rho_b);
    double s_apb = 0.0;
    for (std::size_t mu = 0; mu < ens.blocks.size(); ++mu) {
        for (double w : hermitian_eig(ens.blocks[mu]).eigenvalues) {
            const double pw = ens.probabilities[mu] * std::max(w, 0.0);
            if (pw >= kEntropyKernelCutoff) s_apb -= pw * std::log(pw);
        }
    }
    return s_ap + s_b - s_apb;
}

/// The same quantity through the relative-entropy identity
/// I(A':B) = S(rho_A'B || rho_A' (x) rho_B); used as a cross-check.
inline double post_measurement_mutual_info_relative(const PointerEnsemble& ens) {
    return relative_entropy(ens.assembled(), ens.assembled_product());
}

/// Block-diagonal witness operator: block mu is U_B(mu)^t H_B U_B(mu) on the
/// receiver window. Its operator norm equals ||H_B||.
struct WitnessOperator {
    std::vector<ComplexMatrix> blocks;

    double norm() const {
        double n = 0.0;
        for (const auto& b : blocks) n = std::max(n, operator_norm(b));
        return n;
    }
};

inline WitnessOperator bound_witness_operator(const FeedbackControl& control,
                                              const SupportOperator& h_b, const Region& region_b,
                                              const HilbertSpace& space) {
    if (control.generators.empty()) throw Error("bound_witness_operator: no outcome blocks");
    const HilbertSpace window = h_b.window_space(space);
    const std::size_t wpos0 = static_cast<std::size_t>(region_b.interior_first()) - h_b.first;
    const std::size_t wpos1 = static_cast<std::size_t>(region_b.interior_last()) - h_b.first;
    WitnessOperator w;
    for (std::size_t mu = 0; mu < control.generators.size(); ++mu) {
        const ComplexMatrix u_small = detail::interior_unitary(control, mu);
        const ComplexMatrix u_w = embed_local(u_small, wpos0, wpos1, window);
        w.blocks.push_back(u_w.adjoint() * h_b.op * u_w);
    }
    return w;
}

/// Every link of the entanglement bound chain with its slack, plus the
/// consistency residuals gathered while assembling it.
struct BoundChainReport {
    double s_ent = 0.0;        // S(rho_A)
    double i_ab = 0.0;         // mutual information A : receiver window
    double i_apb = 0.0;        // post-measurement mutual information
    double half_trace_sq = 0.0; // (1/2) ||rho_A'B - rho_A' rho_B||_1^2
    double witness_term = 0.0;  // |E_B + <H>|^2 / (2 ||H_B||^2)
    double rhs_22 = 0.0;        // |E_B + <H>|^2 / (4 ||H_B||^2)
    double rhs_70 = 0.0;        // E_B^2 / (4 ||H_B||^2)

    double slack_ent_iab = 0.0;       // S_ent - I_AB/2
    double slack_iab_iapb = 0.0;      // (I_AB - I_A'B)/2
    double slack_iapb_trace = 0.0;    // I_A'B/2 - ||.||_1^2/4
    double slack_trace_witness = 0.0; // ||.||_1^2/4 - rhs_22
    double slack_witness_eb = 0.0;    // rhs_22 - rhs_70
    bool eq70_checked = false;        // final link only asserted for E_B >= 0

    double purity_residual = 0.0;        // |S(rho_A) - S(rho_Abar)|
    double sent_half_iaa_residual = 0.0; // |S_ent - I(A:Abar)/2|
    double iapb_form_residual = 0.0;     // entropy combination vs relative entropy
    double marginal_defect = 0.0;        // pointer marginal vs rho_B
    double witness_norm_residual = 0.0;  // | ||M|| - ||H_B|| |
    double witness_eb_residual = 0.0;    // |Tr[rho_A'B M] + E_B|
    double witness_meanh_residual = 0.0; // |Tr[rho_A' rho_B M] - <H>|

    bool pass(double tol = 1e-9) const {
        const bool slacks = slack_ent_iab >= -tol && slack_iab_iapb >= -tol &&
                            slack_iapb_trace >= -tol && slack_trace_witness >= -tol &&
                            (!eq70_checked || slack_witness_eb >= -tol);
        const bool checks = purity_residual <= tol && sent_half_iaa_residual <= tol &&
                            iapb_form_residual <= tol && marginal_defect <= tol &&
                            witness_eb_residual <= tol && witness_meanh_residual <= tol;
        return slacks && checks;
    }
};

/// Evaluate the full bound chain for a completed run. The receiver system of
/// the pointer construction is the support window of H_B (the receiver region
/// padded by one bond site each side): that is where H_B and the conditioned
/// unitaries act, so every link is provable there.
inline BoundChainReport bound_chain(const QetRun& run, const GroundState& gs,
                                    const MeasurementScheme& scheme, const FeedbackControl& control,
                                    const ProtocolOperators& ops, const ChainModel& model) {
    const HilbertSpace& space = model.space();
    BoundChainReport rep;

    const auto sites_a = ops.a.sites();
    std::vector<std::size_t> window_sites;
    for (std::size_t n = ops.h_b.first; n <= ops.h_b.last; ++n) window_sites.push_back(n);

    rep.s_ent = entanglement_entropy(gs, space, sites_a);
    const double s_abar = entanglement_entropy(gs, space, space.complement(sites_a));
    rep.purity_residual = std::abs(rep.s_ent - s_abar);
    // global state is rank one: S(|g><g|) = -|g|^2 ln |g|^2, so I(A:Abar)
    // needs no full-space eigensolve
    const double g2 = inner(gs.vector, gs.vector).real();
    const double s_global = (g2 > 0.0) ? -g2 * std::log(g2) : 0.0;
    const double i_a_abar = rep.s_ent + s_abar - s_global;
    rep.sent_half_iaa_residual = std::abs(rep.s_ent - 0.5 * i_a_abar);

    rep.i_ab = mutual_information(gs, space, sites_a, window_sites);

    const PointerEnsemble ens = pointer_ensemble(gs, scheme, ops.a, window_sites, space);
    rep.marginal_defect = ens.marginal_defect();
    rep.i_apb = post_measurement_mutual_info(ens);
    const double i_apb_rel = post_measurement_mutual_info_relative(ens);
    rep.iapb_form_residual = std::isinf(i_apb_rel) ? std::numeric_limits<double>::infinity()
                                                   : std::abs(rep.i_apb - i_apb_rel);

    // trace-norm term: block structure makes ||.||_1 a weighted block sum
    double tn = 0.0;
    for (std::size_t mu = 0; mu < ens.blocks.size(); ++mu) {
        ComplexMatrix d = ens.blocks[mu];
        d -= ens.rho_b;
        tn += ens.probabilities[mu] * trace_norm(d);
    }
    rep.half_trace_sq = 0.5 * tn * tn;

    // witness operator values
    const WitnessOperator w = bound_witness_operator(control, ops.h_b, ops.b, space);
    rep.witness_norm_residual = std::abs(w.norm() - ops.h_b_norm);
    double tr_rho_m = 0.0, tr_prod_m = 0.0;
    for (std::size_t mu = 0; mu < ens.blocks.size(); ++mu) {
        tr_rho_m += ens.probabilities[mu] * trace_of_product(ens.blocks[mu], w.blocks[mu]).real();
        tr_prod_m += ens.probabilities[mu] * trace_of_product(ens.rho_b, w.blocks[mu]).real();
    }
    rep.witness_eb_residual = std::abs(tr_rho_m + run.e_b_direct);
    rep.witness_meanh_residual = std::abs(tr_prod_m - run.mean_h);

    const double hb2 = ops.h_b_norm * ops.h_b_norm;
    const double num = run.e_b_direct + run.mean_h;
    rep.witness_term = num * num / (2.0 * hb2);
    rep.rhs_22 = num * num / (4.0 * hb2);
    rep.rhs_70 = run.e_b_direct * run.e_b_direct / (4.0 * hb2);

    rep.slack_ent_iab = rep.s_ent - 0.5 * rep.i_ab;
    rep.slack_iab_iapb = 0.5 * (rep.i_ab - rep.i_apb);
    rep.slack_iapb_trace = 0.5 * rep.i_apb - 0.5 * rep.half_trace_sq;
    rep.slack_trace_witness = 0.5 * rep.half_trace_sq - rep.rhs_22;
    rep.eq70_checked = run.e_b_direct >= 0.0;
    rep.slack_witness_eb = rep.rhs_22 - rep.rhs_70;
    return rep;
}

/// Mirrored-protocol bound: measure a region of the complement, actuate the
/// interior of A, and bound A's entanglement entropy by the energy extracted
/// from it.
struct RoleExchangeReport {
    QetRun run;
    BoundChainReport chain;
    double s_ent_receiver = 0.0;      // S(rho_A) over the receiver interval
    double s_ent_complement = 0.0;    // same quantity from the other side
    double e_tilde = 0.0;             // energy teleported into the interior
    double h_tilde_norm = 0.0;        // ||H_A|| of the receiver interval
    double slack = 0.0;               // S_ent - E^2/(4||H||^2)

    bool pass(double tol = 1e-9) const {
        return slack >= -tol && std::abs(s_ent_receiver - s_ent_complement) <= tol &&
               chain.pass(tol);
    }
};

inline RoleExchangeReport role_exchange_bound(const ChainModel& model, const GroundState& gs,
                                              const Region& measured, const Region& receiver,
                                              const MeasurementScheme& scheme,
                                              const FeedbackControl& control) {
    if (receiver.half_width < 1)
        throw GeometryError("role exchange needs an extended receiver region (half-width >= 1)");
    const ProtocolOperators ops = ProtocolOperators::build(model, measured, receiver);
    RoleExchangeReport rep;
    rep.run = run_protocol(model, gs, scheme, control, ops);
    rep.chain = bound_chain(rep.run, gs, scheme, control, ops, model);

    const HilbertSpace& space = model.space();
    const auto recv_sites = receiver.sites();
    rep.s_ent_receiver = entanglement_entropy(gs, space, recv_sites);
    rep.s_ent_complement = entanglement_entropy(gs, space, space.complement(recv_sites));
    rep.e_tilde = rep.run.e_b_direct;
    rep.h_tilde_norm = rep.run.h_b_norm;
    rep.slack = rep.s_ent_receiver -
                rep.e_tilde * rep.e_tilde / (4.0 * rep.h_tilde_norm * rep.h_tilde_norm);
    return rep;
}

/// S(rho||phi) - ||rho - phi||_1^2 / 2, with an infinite relative entropy
/// counting as a pass (the trace-distance side is always finite).
inline double pinsker_check(const ComplexMatrix& rho, const ComplexMatrix& phi) {
    const double rel = relative_entropy(rho, phi);
    if (std::isinf(rel)) return std::numeric_limits<double>::infinity();
    ComplexMatrix d = rho;
    d -= phi;
    const double tn = trace_norm(d);
    return rel - 0.5 * tn * tn;
}

/// ||X||_1 - |Tr[XY]| / ||Y|| for Hermitian X, Y.
inline double holder_check(const ComplexMatrix& x, const ComplexMatrix& y) {
    if (x.dim() != y.dim()) throw Error("holder_check: dimension mismatch");
    const double scale_x = std::max(x.max_abs(), 1e-300);
    const double scale_y = std::max(y.max_abs(), 1e-300);
    if (!x.is_hermitian(1e-10 * scale_x) || !y.is_hermitian(1e-10 * scale_y))
        throw Error("holder_check: arguments must be Hermitian");
    const double ynorm = operator_norm(y);
    if (ynorm < 1e-300) throw Error("holder_check: Y must be nonzero");
    return trace_norm(x) - std::abs(trace_of_product(x, y).real()) / ynorm;
}

/// |  ||rho-phi||_1 - 2 (p+ - q+) | where P+ projects on the non-negative
/// part of rho - phi: the spectral identity behind the Pinsker-type bound.
inline double trace_norm_spectral_residual(const ComplexMatrix& rho, const ComplexMatrix& phi) {
    ComplexMatrix d = rho;
    d -= phi;
    const EigResult e = hermitian_eig(d);
    const std::size_t n = d.dim();
    double tn = 0.0;
    for (double w : e.eigenvalues) tn += std::abs(w);
    // P+ from the non-negative eigenvectors
    ComplexMatrix pplus(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (e.eigenvalues[k] < 0.0) continue;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                pplus(i, j) += e.eigenvectors(i, k) * std::conj(e.eigenvectors(j, k));
    }
    const double p_plus = trace_of_product(rho, pplus).real();
    const double q_plus = trace_of_product(phi, pplus).real();
    return std::abs(tn - 2.0 * (p_plus - q_plus));
}

} // namespace qetlab
