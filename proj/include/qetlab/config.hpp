#pragma once

#include "qetlab/protocol.hpp"
#include "qetlab/version.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace qetlab {

using nlohmann::json;

namespace cfg_detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config error at '" + path + "': " + what);
}

inline const json& require(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) fail(path + "." + key, "missing required field");
    return *it;
}

inline double as_double(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

inline std::int64_t as_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<std::int64_t>();
}

inline std::uint64_t as_u64(const json& j, const std::string& path) {
    if (!j.is_number_unsigned() && !j.is_number_integer()) fail(path, "expected an integer");
    const auto v = j.get<std::int64_t>();
    if (j.is_number_integer() && v < 0) fail(path, "expected a non-negative integer");
    return j.get<std::uint64_t>();
}

inline std::array<double, 3> as_axis(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) fail(path, "expected a 3-vector [x, y, z]");
    std::array<double, 3> out{};
    for (std::size_t i = 0; i < 3; ++i) out[i] = as_double(j[i], path + "[" + std::to_string(i) + "]");
    return out;
}

/// Matrices are nested arrays of [re, im] pairs, row-major.
inline ComplexMatrix as_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
    const std::size_t dim = j.size();
    ComplexMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const json& row = j[i];
        const std::string rpath = path + "[" + std::to_string(i) + "]";
        if (!row.is_array() || row.size() != dim) fail(rpath, "expected a row of length " + std::to_string(dim));
        for (std::size_t k = 0; k < dim; ++k) {
            const json& z = row[k];
            const std::string zpath = rpath + "[" + std::to_string(k) + "]";
            if (!z.is_array() || z.size() != 2) fail(zpath, "expected a [re, im] pair");
            m(i, k) = cdouble(as_double(z[0], zpath + "[0]"), as_double(z[1], zpath + "[1]"));
        }
    }
    if (!m.all_finite()) fail(path, "matrix entries must be finite");
    return m;
}

inline json matrix_to_json(const ComplexMatrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.dim(); ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < m.dim(); ++k)
            row.push_back(json::array({m(i, k).real(), m(i, k).imag()}));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace cfg_detail

struct ModelSpec {
    std::string preset; // "ising", or empty for a custom chain
    std::size_t n_sites = 0;
    double b = 0.0;
    double g = 0.0;

    std::vector<std::size_t> site_dims;
    std::vector<ComplexMatrix> x_ops;
    struct ChannelSpec {
        std::vector<ComplexMatrix> y_ops;
        std::vector<double> bond_g;
    };
    std::vector<ChannelSpec> channels;

    bool is_preset() const { return !preset.empty(); }

    ChainModel build() const {
        if (is_preset()) {
            if (preset != "ising") throw ConfigError("unknown model preset '" + preset + "'");
            return ChainModel::ising(n_sites, b, g);
        }
        std::vector<CouplingChannel> chs;
        for (const auto& c : channels) chs.push_back({c.y_ops, c.bond_g});
        return ChainModel(HilbertSpace(site_dims), x_ops, std::move(chs));
    }
};

struct RegionSpec {
    long n_a = 0, l_a = 0;
    long n_b = 0, l_b = 1;

    Region region_a() const { return Region{n_a, l_a}; }
    Region region_b() const { return Region{n_b, l_b}; }
};

struct MeasurementSpec {
    std::vector<std::array<double, 3>> axes; // one per sender site, or one broadcast
    std::vector<ComplexMatrix> kraus;        // explicit operators (override)
    std::vector<std::string> labels;

    bool explicit_kraus() const { return !kraus.empty(); }

    MeasurementScheme build(const HilbertSpace& space, const Region& a) const {
        if (explicit_kraus()) {
            MeasurementScheme s;
            s.kraus = kraus;
            s.labels = labels;
            if (s.labels.size() != s.kraus.size()) {
                s.labels.clear();
                for (std::size_t i = 0; i < s.kraus.size(); ++i) s.labels.push_back("k" + std::to_string(i));
            }
            return s;
        }
        const std::size_t n = a.sites().size();
        std::vector<std::array<double, 3>> per_site = axes;
        if (per_site.size() == 1 && n > 1) per_site.assign(n, axes[0]);
        return MeasurementScheme::bloch_projective(space, a, per_site);
    }
};

struct ControlSpec {
    std::array<double, 3> axis{0.0, 1.0, 0.0};
    std::vector<ComplexMatrix> generators; // explicit per-outcome (override)
    bool optimize = true;
    std::vector<double> thetas; // fixed angles when not optimizing

    FeedbackControl build(const HilbertSpace& space, const Region& b, std::size_t n_outcomes) const {
        FeedbackControl fc;
        if (!generators.empty()) {
            fc.generators = generators;
            if (fc.generators.size() == 1 && n_outcomes > 1)
                fc.generators.assign(n_outcomes, generators[0]);
            if (fc.generators.size() != n_outcomes)
                throw ConfigError("control.generators: need one generator per outcome (" +
                                  std::to_string(n_outcomes) + ")");
        } else {
            fc = FeedbackControl::bloch_generator(space, b, axis, n_outcomes);
        }
        if (!optimize) {
            fc.thetas = thetas;
            if (fc.thetas.size() == 1 && n_outcomes > 1) fc.thetas.assign(n_outcomes, thetas[0]);
            if (fc.thetas.size() != n_outcomes)
                throw ConfigError("control.theta: need one angle per outcome (" +
                                  std::to_string(n_outcomes) + ")");
        } else {
            fc.thetas.assign(n_outcomes, 0.0);
        }
        return fc;
    }
};

struct SweepSpec {
    std::vector<std::size_t> n_sites;
    std::vector<double> b;
    std::vector<double> g;
    std::vector<long> distance;
    std::vector<double> axis_angle; // measurement axis (cos a, 0, sin a)

    bool empty() const {
        return n_sites.empty() && b.empty() && g.empty() && distance.empty() && axis_angle.empty();
    }
};

struct VerifySpec {
    std::size_t samples = 10000;
    std::size_t min_dim = 2;
    std::size_t max_dim = 8;
};

struct ExperimentConfig {
    int schema_version = kRecordSchemaVersion;
    std::uint64_t seed = 0;
    ModelSpec model;
    RegionSpec regions;
    MeasurementSpec measurement;
    ControlSpec control;
    SweepSpec sweep;
    VerifySpec verify;
    int workers = 1;
    double tolerance = 1e-9;

    static ExperimentConfig from_json(const json& j);
    static ExperimentConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
        }
        return from_json(j);
    }
};

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
    using namespace cfg_detail;
    ExperimentConfig cfg;
    if (!j.is_object()) fail("", "top level must be an object");

    if (j.contains("schema_version"))
        cfg.schema_version = static_cast<int>(as_int(j["schema_version"], "schema_version"));
    if (j.contains("seed")) cfg.seed = as_u64(j["seed"], "seed");
    if (j.contains("workers")) cfg.workers = static_cast<int>(as_int(j["workers"], "workers"));
    if (cfg.workers < 1) fail("workers", "must be >= 1");
    if (j.contains("tolerance")) {
        cfg.tolerance = as_double(j["tolerance"], "tolerance");
        if (!(cfg.tolerance == cfg.tolerance)) fail("tolerance", "must be a number");
    }

    // model
    {
        const json& m = require(j, "model", "");
        if (m.contains("preset")) {
            if (!m["preset"].is_string()) fail("model.preset", "expected a string");
            cfg.model.preset = m["preset"].get<std::string>();
            cfg.model.n_sites = static_cast<std::size_t>(as_int(require(m, "n_sites", "model"), "model.n_sites"));
            cfg.model.b = as_double(require(m, "b", "model"), "model.b");
            cfg.model.g = as_double(require(m, "g", "model"), "model.g");
        } else {
            const json& dims = require(m, "site_dims", "model");
            if (!dims.is_array() || dims.empty()) fail("model.site_dims", "expected a non-empty array");
            for (std::size_t i = 0; i < dims.size(); ++i)
                cfg.model.site_dims.push_back(
                    static_cast<std::size_t>(as_int(dims[i], "model.site_dims[" + std::to_string(i) + "]")));
            const json& xs = require(m, "x_ops", "model");
            if (!xs.is_array() || xs.size() != dims.size())
                fail("model.x_ops", "expected one matrix per site");
            for (std::size_t i = 0; i < xs.size(); ++i)
                cfg.model.x_ops.push_back(as_matrix(xs[i], "model.x_ops[" + std::to_string(i) + "]"));
            if (m.contains("channels")) {
                const json& chs = m["channels"];
                if (!chs.is_array()) fail("model.channels", "expected an array");
                for (std::size_t c = 0; c < chs.size(); ++c) {
                    const std::string cpath = "model.channels[" + std::to_string(c) + "]";
                    ModelSpec::ChannelSpec ch;
                    const json& ys = require(chs[c], "y_ops", cpath);
                    if (!ys.is_array() || ys.size() != dims.size())
                        fail(cpath + ".y_ops", "expected one matrix per site");
                    for (std::size_t i = 0; i < ys.size(); ++i)
                        ch.y_ops.push_back(as_matrix(ys[i], cpath + ".y_ops[" + std::to_string(i) + "]"));
                    const json& gs = require(chs[c], "bond_g", cpath);
                    if (!gs.is_array() || gs.size() + 1 != dims.size())
                        fail(cpath + ".bond_g", "expected one coupling per bond (N-1 values)");
                    for (std::size_t i = 0; i < gs.size(); ++i)
                        ch.bond_g.push_back(as_double(gs[i], cpath + ".bond_g[" + std::to_string(i) + "]"));
                    cfg.model.channels.push_back(std::move(ch));
                }
            }
        }
    }

    // regions
    {
        const json& r = require(j, "regions", "");
        cfg.regions.n_a = as_int(require(r, "n_a", "regions"), "regions.n_a");
        cfg.regions.n_b = as_int(require(r, "n_b", "regions"), "regions.n_b");
        if (r.contains("l_a")) cfg.regions.l_a = as_int(r["l_a"], "regions.l_a");
        if (r.contains("l_b")) cfg.regions.l_b = as_int(r["l_b"], "regions.l_b");
    }

    // measurement
    if (j.contains("measurement")) {
        const json& m = j["measurement"];
        if (m.contains("kraus")) {
            const json& ks = m["kraus"];
            if (!ks.is_array() || ks.empty()) fail("measurement.kraus", "expected a non-empty array");
            for (std::size_t i = 0; i < ks.size(); ++i)
                cfg.measurement.kraus.push_back(as_matrix(ks[i], "measurement.kraus[" + std::to_string(i) + "]"));
            if (m.contains("labels")) {
                for (const auto& l : m["labels"]) cfg.measurement.labels.push_back(l.get<std::string>());
            }
        } else if (m.contains("axes")) {
            const json& ax = m["axes"];
            if (!ax.is_array() || ax.empty()) fail("measurement.axes", "expected a non-empty array");
            for (std::size_t i = 0; i < ax.size(); ++i)
                cfg.measurement.axes.push_back(as_axis(ax[i], "measurement.axes[" + std::to_string(i) + "]"));
        } else if (m.contains("axis")) {
            cfg.measurement.axes.push_back(as_axis(m["axis"], "measurement.axis"));
        } else {
            fail("measurement", "expected 'axis', 'axes', or 'kraus'");
        }
    } else {
        cfg.measurement.axes.push_back({1.0, 0.0, 0.0});
    }

    // control
    if (j.contains("control")) {
        const json& c = j["control"];
        if (c.contains("generators")) {
            const json& gs = c["generators"];
            if (!gs.is_array() || gs.empty()) fail("control.generators", "expected a non-empty array");
            for (std::size_t i = 0; i < gs.size(); ++i)
                cfg.control.generators.push_back(as_matrix(gs[i], "control.generators[" + std::to_string(i) + "]"));
        } else if (c.contains("axis")) {
            cfg.control.axis = as_axis(c["axis"], "control.axis");
        }
        if (c.contains("theta")) {
            const json& t = c["theta"];
            if (t.is_string()) {
                if (t.get<std::string>() != "optimize") fail("control.theta", "expected 'optimize' or angle(s)");
                cfg.control.optimize = true;
            } else if (t.is_number()) {
                cfg.control.optimize = false;
                cfg.control.thetas = {as_double(t, "control.theta")};
            } else if (t.is_array()) {
                cfg.control.optimize = false;
                for (std::size_t i = 0; i < t.size(); ++i)
                    cfg.control.thetas.push_back(as_double(t[i], "control.theta[" + std::to_string(i) + "]"));
            } else {
                fail("control.theta", "expected 'optimize' or angle(s)");
            }
        }
    }

    // sweep
    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        if (!s.is_object()) fail("sweep", "expected an object of axis lists");
        if (s.contains("n_sites"))
            for (std::size_t i = 0; i < s["n_sites"].size(); ++i)
                cfg.sweep.n_sites.push_back(static_cast<std::size_t>(
                    as_int(s["n_sites"][i], "sweep.n_sites[" + std::to_string(i) + "]")));
        if (s.contains("b"))
            for (std::size_t i = 0; i < s["b"].size(); ++i)
                cfg.sweep.b.push_back(as_double(s["b"][i], "sweep.b[" + std::to_string(i) + "]"));
        if (s.contains("g"))
            for (std::size_t i = 0; i < s["g"].size(); ++i)
                cfg.sweep.g.push_back(as_double(s["g"][i], "sweep.g[" + std::to_string(i) + "]"));
        if (s.contains("distance"))
            for (std::size_t i = 0; i < s["distance"].size(); ++i)
                cfg.sweep.distance.push_back(as_int(s["distance"][i], "sweep.distance[" + std::to_string(i) + "]"));
        if (s.contains("axis_angle"))
            for (std::size_t i = 0; i < s["axis_angle"].size(); ++i)
                cfg.sweep.axis_angle.push_back(
                    as_double(s["axis_angle"][i], "sweep.axis_angle[" + std::to_string(i) + "]"));
    }

    // verify
    if (j.contains("verify")) {
        const json& v = j["verify"];
        if (v.contains("samples"))
            cfg.verify.samples = static_cast<std::size_t>(as_int(v["samples"], "verify.samples"));
        if (v.contains("min_dim"))
            cfg.verify.min_dim = static_cast<std::size_t>(as_int(v["min_dim"], "verify.min_dim"));
        if (v.contains("max_dim"))
            cfg.verify.max_dim = static_cast<std::size_t>(as_int(v["max_dim"], "verify.max_dim"));
        if (cfg.verify.min_dim < 1 || cfg.verify.max_dim < cfg.verify.min_dim)
            fail("verify", "need 1 <= min_dim <= max_dim");
    }

    return cfg;
}

} // namespace qetlab
