#pragma once

#include "qetlab/density.hpp"
#include "qetlab/eig.hpp"
#include "qetlab/space.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace qetlab {

/// One nearest-neighbor interaction channel: a per-site Hermitian operator
/// and a real coupling per bond (bond (n, n+1) stored at index n).
struct CouplingChannel {
    std::vector<ComplexMatrix> y_ops;
    std::vector<double> bond_g;
};

/// Nearest-neighbor spin chain with open boundaries. Energy density at site n
/// carries half of each adjacent bond; end sites simply have one bond, which
/// keeps every site term well defined on a finite chain.
class ChainModel {
public:
    ChainModel(HilbertSpace space, std::vector<ComplexMatrix> x_ops,
               std::vector<CouplingChannel> channels)
        : space_(std::move(space)), x_ops_(std::move(x_ops)), channels_(std::move(channels)) {
        const std::size_t n = space_.num_sites();
        if (x_ops_.size() != n) throw Error("ChainModel: need one X operator per site");
        for (std::size_t s = 0; s < n; ++s) {
            if (x_ops_[s].dim() != space_.site_dim(s))
                throw Error("ChainModel: X dimension mismatch at site " + std::to_string(s));
            require_hermitian(x_ops_[s], "X", s);
        }
        for (const auto& ch : channels_) {
            if (ch.y_ops.size() != n) throw Error("ChainModel: need one Y operator per site");
            if (ch.bond_g.size() + 1 != n)
                throw Error("ChainModel: need one coupling per bond (N-1 values)");
            for (std::size_t s = 0; s < n; ++s) {
                if (ch.y_ops[s].dim() != space_.site_dim(s))
                    throw Error("ChainModel: Y dimension mismatch at site " + std::to_string(s));
                require_hermitian(ch.y_ops[s], "Y", s);
            }
            for (double g : ch.bond_g)
                if (!std::isfinite(g)) throw Error("ChainModel: non-finite coupling");
        }
    }

    /// Transverse-field Ising preset: X_n = b sz (site constants start at 0
    /// and are fixed later by renormalize), Y_n = sx, uniform coupling g.
    static ChainModel ising(std::size_t n_sites, double b, double g) {
        HilbertSpace space = HilbertSpace::qubits(n_sites);
        std::vector<ComplexMatrix> xs(n_sites, cdouble(b, 0.0) * pauli_z());
        CouplingChannel ch{std::vector<ComplexMatrix>(n_sites, pauli_x()),
                           std::vector<double>(n_sites > 0 ? n_sites - 1 : 0, g)};
        return ChainModel(std::move(space), std::move(xs), {std::move(ch)});
    }

    const HilbertSpace& space() const { return space_; }
    std::size_t num_sites() const { return space_.num_sites(); }
    const ComplexMatrix& x_op(std::size_t n) const { return x_ops_[n]; }
    const std::vector<CouplingChannel>& channels() const { return channels_; }

    /// New model with X_n shifted by -shift[n] * I (ground-state vector is
    /// unchanged by identity shifts).
    ChainModel shifted(const std::vector<double>& shifts) const {
        if (shifts.size() != x_ops_.size()) throw Error("ChainModel::shifted: size mismatch");
        std::vector<ComplexMatrix> xs = x_ops_;
        for (std::size_t n = 0; n < xs.size(); ++n) {
            const std::size_t d = xs[n].dim();
            for (std::size_t i = 0; i < d; ++i) xs[n](i, i) -= shifts[n];
        }
        return ChainModel(space_, std::move(xs), channels_);
    }

private:
    static void require_hermitian(const ComplexMatrix& m, const char* what, std::size_t site) {
        const double scale = std::max(m.max_abs(), 1.0);
        if (!m.is_hermitian(1e-10 * scale))
            throw Error(std::string("ChainModel: ") + what + " at site " + std::to_string(site) +
                        " is not Hermitian");
    }

    HilbertSpace space_;
    std::vector<ComplexMatrix> x_ops_;
    std::vector<CouplingChannel> channels_;
};

/// An operator together with the contiguous site window it acts on; embedding
/// it with identities reproduces the full-space operator exactly.
struct SupportOperator {
    std::size_t first = 0;
    std::size_t last = 0;
    ComplexMatrix op;

    HilbertSpace window_space(const HilbertSpace& full) const {
        std::vector<std::size_t> dims;
        for (std::size_t n = first; n <= last; ++n) dims.push_back(full.site_dim(n));
        return HilbertSpace(std::move(dims), full.total_dim());
    }

    ComplexMatrix embedded(const HilbertSpace& full) const { return embed_local(op, first, last, full); }

    StateVector apply(const HilbertSpace& full, const StateVector& psi) const {
        return apply_local(op, first, last, full, psi);
    }

    double expectation(const HilbertSpace& full, const StateVector& psi) const {
        return inner(psi, apply(full, psi)).real();
    }
};

namespace detail {

/// Sum of energy densities T_n for n in [first, last], built on the window
/// [first-1, last+1] clipped to the chain (bond terms reach one site beyond
/// the interval ends).
inline SupportOperator energy_density_window(const ChainModel& model, std::size_t first,
                                             std::size_t last) {
    const HilbertSpace& space = model.space();
    space.check_interval(first, last);
    const std::size_t n_sites = space.num_sites();
    SupportOperator out;
    out.first = (first == 0) ? 0 : first - 1;
    out.last = std::min(last + 1, n_sites - 1);
    const HilbertSpace win = out.window_space(space);
    ComplexMatrix acc(win.total_dim());

    auto embed1 = [&](const ComplexMatrix& op, std::size_t site) {
        return embed_local(op, site - out.first, site - out.first, win);
    };
    auto embed2 = [&](const ComplexMatrix& a, const ComplexMatrix& b, std::size_t left_site) {
        return embed_local(kron(a, b), left_site - out.first, left_site - out.first + 1, win);
    };

    for (std::size_t n = first; n <= last; ++n) {
        acc += embed1(model.x_op(n), n);
        for (const auto& ch : model.channels()) {
            if (n > 0)
                acc += cdouble(-0.5 * ch.bond_g[n - 1], 0.0) * embed2(ch.y_ops[n - 1], ch.y_ops[n], n - 1);
            if (n + 1 < n_sites)
                acc += cdouble(-0.5 * ch.bond_g[n], 0.0) * embed2(ch.y_ops[n], ch.y_ops[n + 1], n);
        }
    }
    out.op = std::move(acc);
    return out;
}

} // namespace detail

/// Energy density operator at site n on its support window (at most sites
/// n-1, n, n+1).
inline SupportOperator energy_density_support(const ChainModel& model, std::size_t n) {
    return detail::energy_density_window(model, n, n);
}

/// Full-space energy density operator at site n.
inline ComplexMatrix energy_density(const ChainModel& model, std::size_t n) {
    return energy_density_support(model, n).embedded(model.space());
}

/// Localized energy of a contiguous region (sum of its energy densities) on
/// its support window.
inline SupportOperator localized_energy_support(const ChainModel& model, std::size_t first,
                                                std::size_t last) {
    return detail::energy_density_window(model, first, last);
}

/// Full-space localized energy operator of a contiguous region.
inline ComplexMatrix localized_energy(const ChainModel& model, std::size_t first, std::size_t last) {
    return localized_energy_support(model, first, last).embedded(model.space());
}

/// Total Hamiltonian as the literal sum of the energy densities, so the
/// bookkeeping identity sum_n T_n = H holds by construction.
inline ComplexMatrix hamiltonian(const ChainModel& model) {
    return localized_energy(model, 0, model.num_sites() - 1);
}

struct GroundState {
    StateVector vector;
    double energy = 0.0;
    double gap = 0.0;
};

inline constexpr double kDefaultGapThreshold = 1e-8;

/// Lowest eigenpair of H with the spectral gap as a degeneracy witness.
/// Models whose gap falls below the threshold are rejected: every protocol
/// statement downstream assumes a unique ground state.
inline GroundState ground_state(const ChainModel& model, double gap_threshold = kDefaultGapThreshold) {
    const ComplexMatrix h = hamiltonian(model);
    const EigResult e = hermitian_eig(h);
    const std::size_t dim = h.dim();
    GroundState gs;
    gs.energy = e.eigenvalues[0];
    gs.gap = (dim > 1) ? e.eigenvalues[1] - e.eigenvalues[0] : std::numeric_limits<double>::infinity();
    if (gs.gap <= gap_threshold)
        throw DegenerateGroundStateError("ground state is degenerate: gap " + std::to_string(gs.gap) +
                                         " <= threshold " + std::to_string(gap_threshold));
    gs.vector.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) gs.vector[i] = e.eigenvectors(i, 0);
    // fix the global phase: largest-magnitude amplitude becomes real positive
    std::size_t imax = 0;
    double amax = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double a = std::abs(gs.vector[i]);
        if (a > amax) {
            amax = a;
            imax = i;
        }
    }
    if (amax > 0.0) {
        const cdouble ph = std::conj(gs.vector[imax]) / amax;
        for (auto& z : gs.vector) z *= ph;
        gs.vector[imax] = cdouble(gs.vector[imax].real(), 0.0);
    }
    return gs;
}

struct RenormalizedChain {
    ChainModel model;
    std::vector<double> shifts; // subtracted from X_n as shifts[n] * I
    GroundState ground;         // of the shifted model (same vector, energy ~ 0)
};

/// Shift each X_n so that <g|T_n|g> = 0 at every site, which also zeroes the
/// ground energy and makes H non-negative. Identity shifts commute with
/// everything, so the ground-state vector is reused rather than re-solved.
inline RenormalizedChain renormalize(const ChainModel& model,
                                     double gap_threshold = kDefaultGapThreshold) {
    const GroundState gs = ground_state(model, gap_threshold);
    const std::size_t n_sites = model.num_sites();
    std::vector<double> shifts(n_sites);
    double total = 0.0;
    for (std::size_t n = 0; n < n_sites; ++n) {
        shifts[n] = energy_density_support(model, n).expectation(model.space(), gs.vector);
        total += shifts[n];
    }
    RenormalizedChain out{model.shifted(shifts), std::move(shifts), gs};
    out.ground.energy = gs.energy - total;
    return out;
}

} // namespace qetlab
