#pragma once

#include "qetlab/record.hpp"
#include "qetlab/rng.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace qetlab {

namespace detail {

/// Run fn(i) for i in [0, count) on up to `workers` threads. Results are keyed
/// by index, so the output is independent of scheduling.
template <typename F>
inline void parallel_for(std::size_t count, int workers, F&& fn) {
    const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(count)));
    if (n_threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace detail

/// Pass/fail thresholds for a run at a configurable base tolerance.
struct PassFlags {
    bool prob_sum_ok = false;
    bool locality_rho1_ok = false;
    bool route_ok = false;
    bool conservation_ok = false;
    bool far_site_ok = false;
    bool commutator_ok = false;
    bool passivity_ok = false;
    bool negative_region_ok = false;
    bool eq17_ok = false;
    bool chain_ok = false;

    bool all() const {
        return prob_sum_ok && locality_rho1_ok && route_ok && conservation_ok && far_site_ok &&
               commutator_ok && passivity_ok && negative_region_ok && eq17_ok && chain_ok;
    }
};

inline PassFlags evaluate_pass_flags(const QetRun& run, const BoundChainReport& chain, double tol) {
    PassFlags f;
    f.prob_sum_ok = std::abs(run.prob_sum - 1.0) <= 1e-10;
    f.locality_rho1_ok = std::abs(run.tr_hb_rho1) <= tol;
    f.route_ok = run.route_residual <= tol * (1.0 + run.h_b_norm);
    f.conservation_ok = run.conservation_residual <= tol;
    f.far_site_ok = run.far_site_residual <= tol;
    f.commutator_ok = run.commutator_residual <= 1e-11;
    f.passivity_ok = run.e_a >= -tol && run.mean_h >= -tol && run.e_b_direct <= run.e_a + tol;
    f.negative_region_ok = (run.e_b_direct <= tol) || (run.tr_hb_rho2 < 0.0);
    f.eq17_ok = run.eq17_residual <= tol;
    f.chain_ok = chain.pass(tol);
    return f;
}

/// Execute one full pipeline: model, renormalization, ground state, protocol,
/// bound chain, record. Deterministic given the config.
inline RunRecord execute_run(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();

    const ChainModel raw = cfg.model.build();
    const RenormalizedChain chain = renormalize(raw);
    const Region a = cfg.regions.region_a();
    const Region b = cfg.regions.region_b();
    const ProtocolOperators ops = ProtocolOperators::build(chain.model, a, b);
    const MeasurementScheme scheme = cfg.measurement.build(chain.model.space(), a);

    FeedbackControl control = cfg.control.build(chain.model.space(), b, scheme.kraus.size());
    if (cfg.control.optimize) {
        const ThetaOptimum opt =
            optimize_theta(chain.ground, scheme, control.generators, ops, chain.model);
        control.thetas = opt.thetas;
    }

    const QetRun run = run_protocol(chain.model, chain.ground, scheme, control, ops);
    const BoundChainReport rep = bound_chain(run, chain.ground, scheme, control, ops, chain.model);
    const PerturbativeResult pert = perturbative_eb(chain.ground, scheme, control, ops, chain.model);
    const PassFlags flags = evaluate_pass_flags(run, rep, cfg.tolerance);

    RunRecord rec;
    rec.seed = cfg.seed;
    rec.model_desc = cfg.model.is_preset() ? cfg.model.preset : "custom";
    rec.n_sites = chain.model.num_sites();
    rec.b = cfg.model.b;
    rec.g = cfg.model.g;
    rec.regions = cfg.regions;
    rec.theta_source = cfg.control.optimize ? "optimized" : "fixed";
    for (const auto& o : run.outcomes) {
        rec.labels.push_back(o.label);
        rec.probabilities.push_back(o.probability);
        rec.thetas.push_back(o.theta);
        rec.localized_energy_post.push_back(o.localized_energy_post);
    }
    rec.pruned = run.pruned_outcomes;
    rec.ground_energy = chain.ground.energy;
    rec.gap = chain.ground.gap;
    rec.e_a = run.e_a;
    rec.e_b_direct = run.e_b_direct;
    rec.e_b_correlator = run.e_b_correlator;
    rec.e_b_perturbative = pert.first_order;
    rec.mean_h = run.mean_h;
    rec.h_b_norm = run.h_b_norm;
    rec.tr_hb_rho1 = run.tr_hb_rho1;
    rec.tr_hb_rho2 = run.tr_hb_rho2;
    rec.prob_sum = run.prob_sum;
    rec.conservation_residual = run.conservation_residual;
    rec.far_site_residual = run.far_site_residual;
    rec.commutator_residual = run.commutator_residual;
    rec.route_residual = run.route_residual;
    rec.eq17_residual = run.eq17_residual;
    rec.max_imag_correlator = run.max_imag_correlator;
    rec.chain = rep;
    rec.pass = flags.all();

    rec.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

struct SweepPoint {
    std::size_t n_sites = 0;
    double b = 0.0;
    double g = 0.0;
    long distance = 0;
    double axis_angle = 0.0;
    bool angle_swept = false;
};

/// Cartesian expansion in canonical axis order (n_sites, b, g, distance,
/// axis_angle); missing axes fall back to the base config's values.
inline std::vector<SweepPoint> expand_sweep(const ExperimentConfig& cfg) {
    if (cfg.sweep.empty()) throw ConfigError("sweep: at least one axis is required");
    if (!cfg.model.is_preset())
        throw ConfigError("sweep: axes apply to preset models only");
    const bool angle_swept = !cfg.sweep.axis_angle.empty();
    if (angle_swept && cfg.measurement.explicit_kraus())
        throw ConfigError("sweep.axis_angle: requires an axis-based measurement");
    std::vector<std::size_t> ns = cfg.sweep.n_sites;
    if (ns.empty()) ns = {cfg.model.n_sites};
    std::vector<double> bs = cfg.sweep.b;
    if (bs.empty()) bs = {cfg.model.b};
    std::vector<double> gs = cfg.sweep.g;
    if (gs.empty()) gs = {cfg.model.g};
    std::vector<long> ds = cfg.sweep.distance;
    if (ds.empty()) ds = {std::abs(cfg.regions.n_b - cfg.regions.n_a)};
    std::vector<double> as = cfg.sweep.axis_angle;
    if (as.empty()) as = {0.0};

    std::vector<SweepPoint> grid;
    for (std::size_t n : ns)
        for (double b : bs)
            for (double g : gs)
                for (long d : ds)
                    for (double a : as) grid.push_back({n, b, g, d, a, angle_swept});
    return grid;
}

struct SweepRow {
    SweepPoint point;
    std::string status = "ok"; // or the error category
    RunRecord record;          // valid when status == "ok"
};

/// Derive the per-point config: the sweep distance moves the receiver
/// (sender stays where the base config put it), and a swept axis angle
/// replaces the measurement axis with (cos a, 0, sin a) on every sender site.
inline ExperimentConfig config_for_point(const ExperimentConfig& base, const SweepPoint& p) {
    ExperimentConfig cfg = base;
    cfg.model.n_sites = p.n_sites;
    cfg.model.b = p.b;
    cfg.model.g = p.g;
    cfg.regions.n_b = cfg.regions.n_a + p.distance;
    if (p.angle_swept) {
        cfg.measurement.kraus.clear();
        cfg.measurement.labels.clear();
        cfg.measurement.axes.assign(1, {std::cos(p.axis_angle), 0.0, std::sin(p.axis_angle)});
    }
    cfg.sweep = SweepSpec{};
    return cfg;
}

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg) {
    const std::vector<SweepPoint> grid = expand_sweep(cfg);
    std::vector<SweepRow> rows(grid.size());
    detail::parallel_for(grid.size(), cfg.workers, [&](std::size_t i) {
        rows[i].point = grid[i];
        try {
            rows[i].record = execute_run(config_for_point(cfg, grid[i]));
        } catch (const GeometryError&) {
            rows[i].status = "geometry_error";
        } catch (const DegenerateGroundStateError&) {
            rows[i].status = "degenerate_ground_state";
        } catch (const ConfigError&) {
            rows[i].status = "config_error";
        } catch (const Error&) {
            rows[i].status = "error";
        }
    });
    return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    const auto& cols = sweep_csv_columns();
    for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
    os << "\n";
    for (const auto& row : rows) {
        os << row.point.n_sites << "," << format_scalar(row.point.b) << ","
           << format_scalar(row.point.g) << "," << row.point.distance << ","
           << format_scalar(row.point.axis_angle) << "," << row.status;
        if (row.status == "ok") {
            const RunRecord& r = row.record;
            const double vals[] = {r.e_a,
                                   r.e_b_direct,
                                   r.e_b_correlator,
                                   r.mean_h,
                                   r.h_b_norm,
                                   r.chain.s_ent,
                                   r.chain.i_ab,
                                   r.chain.i_apb,
                                   r.chain.half_trace_sq,
                                   r.chain.rhs_22,
                                   r.chain.rhs_70,
                                   r.chain.slack_ent_iab,
                                   r.chain.slack_iab_iapb,
                                   r.chain.slack_iapb_trace,
                                   r.chain.slack_trace_witness,
                                   r.chain.slack_witness_eb};
            for (double v : vals) os << "," << format_scalar(v);
            os << "," << (r.pass ? "true" : "false");
        } else {
            for (std::size_t c = 6; c < cols.size(); ++c) os << ",";
        }
        os << "\n";
    }
    return os.str();
}

struct VerifyReport {
    std::size_t samples = 0;
    double min_pinsker_slack = std::numeric_limits<double>::infinity();
    double min_holder_slack = std::numeric_limits<double>::infinity();
    double max_spectral_residual = 0.0;
    std::uint64_t worst_pinsker_sample = 0;
    std::uint64_t worst_holder_sample = 0;
    std::uint64_t worst_spectral_sample = 0;

    double pinsker_bound = -1e-9;
    double holder_bound = -1e-10;
    double spectral_bound = 1e-10;

    bool pass() const {
        return min_pinsker_slack >= pinsker_bound && min_holder_slack >= holder_bound &&
               max_spectral_residual <= spectral_bound;
    }
};

/// Seeded random-pair suites for the two inequalities and the trace-norm
/// spectral identity. Sample streams are independent (seed derived per
/// index), so the result does not depend on the worker count.
inline VerifyReport run_verify(const ExperimentConfig& cfg,
                               std::optional<double> slack_bound_override = std::nullopt) {
    if (cfg.verify.samples < 1) throw ConfigError("verify.samples must be >= 1");
    const std::size_t n = cfg.verify.samples;
    const std::size_t dim_span = cfg.verify.max_dim - cfg.verify.min_dim + 1;

    std::vector<double> pinsker(n), holder(n), spectral(n);
    detail::parallel_for(n, cfg.workers, [&](std::size_t i) {
        Xoshiro256StarStar rng(sample_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        const std::size_t dim = cfg.verify.min_dim + static_cast<std::size_t>(rng.next() % dim_span);
        const ComplexMatrix rho = random_density(rng, dim);
        const ComplexMatrix phi = random_density(rng, dim);
        pinsker[i] = pinsker_check(rho, phi);
        spectral[i] = trace_norm_spectral_residual(rho, phi);
        const ComplexMatrix x = random_hermitian(rng, dim);
        const ComplexMatrix y = random_hermitian(rng, dim);
        holder[i] = holder_check(x, y);
    });

    VerifyReport rep;
    rep.samples = n;
    if (slack_bound_override) {
        rep.pinsker_bound = *slack_bound_override;
        rep.holder_bound = *slack_bound_override;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (pinsker[i] < rep.min_pinsker_slack) {
            rep.min_pinsker_slack = pinsker[i];
            rep.worst_pinsker_sample = i;
        }
        if (holder[i] < rep.min_holder_slack) {
            rep.min_holder_slack = holder[i];
            rep.worst_holder_sample = i;
        }
        if (spectral[i] > rep.max_spectral_residual) {
            rep.max_spectral_residual = spectral[i];
            rep.worst_spectral_sample = i;
        }
    }
    return rep;
}

} // namespace qetlab
