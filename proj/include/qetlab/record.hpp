#pragma once

#include "qetlab/config.hpp"
#include "qetlab/infotheory.hpp"
#include "qetlab/version.hpp"

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace qetlab {

/// Scalars are serialized with 17 significant digits, enough to round-trip a
/// double exactly; identical inputs therefore produce byte-identical payloads.
inline std::string format_scalar(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

/// Minimal ordered JSON emitter. nlohmann is used for all parsing; writing
/// goes through this so the scalar format stays pinned.
class JsonEmitter {
public:
    JsonEmitter& begin_object() {
        sep();
        os_ << '{';
        fresh_ = true;
        return *this;
    }
    JsonEmitter& end_object() {
        os_ << '}';
        fresh_ = false;
        return *this;
    }
    JsonEmitter& begin_array() {
        sep();
        os_ << '[';
        fresh_ = true;
        return *this;
    }
    JsonEmitter& end_array() {
        os_ << ']';
        fresh_ = false;
        return *this;
    }
    JsonEmitter& key(const std::string& k) {
        sep();
        write_string(k);
        os_ << ':';
        fresh_ = true;
        return *this;
    }
    JsonEmitter& value(double x) {
        sep();
        os_ << format_scalar(x);
        return *this;
    }
    JsonEmitter& value(long long x) {
        sep();
        os_ << x;
        return *this;
    }
    JsonEmitter& value(std::uint64_t x) {
        sep();
        os_ << x;
        return *this;
    }
    JsonEmitter& value(int x) { return value(static_cast<long long>(x)); }
    JsonEmitter& value(bool b) {
        sep();
        os_ << (b ? "true" : "false");
        return *this;
    }
    JsonEmitter& value(const std::string& s) {
        sep();
        write_string(s);
        return *this;
    }
    JsonEmitter& value(const char* s) { return value(std::string(s)); }

    template <typename T>
    JsonEmitter& kv(const std::string& k, const T& v) {
        key(k);
        return value(v);
    }
    JsonEmitter& kv(const std::string& k, const std::vector<double>& v) {
        key(k).begin_array();
        for (double x : v) value(x);
        return end_array();
    }
    JsonEmitter& kv(const std::string& k, const std::vector<std::string>& v) {
        key(k).begin_array();
        for (const auto& s : v) value(s);
        return end_array();
    }

    std::string str() const { return os_.str(); }

private:
    void sep() {
        if (!fresh_) os_ << ',';
        fresh_ = false;
    }
    void write_string(const std::string& s) {
        os_ << '"';
        for (char c : s) {
            switch (c) {
            case '"': os_ << "\\\""; break;
            case '\\': os_ << "\\\\"; break;
            case '\n': os_ << "\\n"; break;
            case '\t': os_ << "\\t"; break;
            default: os_ << c;
            }
        }
        os_ << '"';
    }

    std::ostringstream os_;
    bool fresh_ = true;
};

/// Everything a single protocol execution produced, ready for serialization.
struct RunRecord {
    int schema_version = kRecordSchemaVersion;
    std::uint64_t seed = 0;
    std::string boundary = "open"; // chain-end convention, echoed in every record

    // normalized config echo
    std::string model_desc;
    std::size_t n_sites = 0;
    double b = 0.0, g = 0.0;
    RegionSpec regions;
    std::string theta_source; // "optimized" or "fixed"

    // outcome data
    std::vector<std::string> labels;
    std::vector<double> probabilities;
    std::vector<double> thetas;
    std::vector<double> localized_energy_post;
    std::vector<std::string> pruned;

    // scalar results
    double e_a = 0.0;
    double e_b_direct = 0.0;
    double e_b_correlator = 0.0;
    double e_b_perturbative = 0.0;
    double mean_h = 0.0;
    double h_b_norm = 0.0;
    double tr_hb_rho1 = 0.0;
    double tr_hb_rho2 = 0.0;
    double prob_sum = 0.0;
    double conservation_residual = 0.0;
    double far_site_residual = 0.0;
    double commutator_residual = 0.0;
    double route_residual = 0.0;
    double eq17_residual = 0.0;
    double max_imag_correlator = 0.0;
    double ground_energy = 0.0;
    double gap = 0.0;

    BoundChainReport chain;
    bool pass = false;

    // metadata (excluded from the deterministic payload)
    double wall_time_ms = 0.0;
    std::string library_version = kLibraryVersion;

    /// Deterministic part: config echo + results, no timing metadata.
    void emit_payload(JsonEmitter& e) const {
        e.kv("schema_version", schema_version);
        e.kv("seed", seed);
        e.key("config").begin_object();
        e.kv("model", model_desc);
        e.kv("n_sites", static_cast<long long>(n_sites));
        e.kv("b", b);
        e.kv("g", g);
        e.kv("boundary", boundary);
        e.key("regions").begin_object();
        e.kv("n_a", static_cast<long long>(regions.n_a));
        e.kv("l_a", static_cast<long long>(regions.l_a));
        e.kv("n_b", static_cast<long long>(regions.n_b));
        e.kv("l_b", static_cast<long long>(regions.l_b));
        e.end_object();
        e.kv("theta_source", theta_source);
        e.end_object();
        e.key("results").begin_object();
        e.kv("labels", labels);
        e.kv("probabilities", probabilities);
        e.kv("thetas", thetas);
        e.kv("localized_energy_post", localized_energy_post);
        e.kv("pruned_outcomes", pruned);
        e.kv("ground_energy", ground_energy);
        e.kv("gap", gap);
        e.kv("e_a", e_a);
        e.kv("e_b_direct", e_b_direct);
        e.kv("e_b_correlator", e_b_correlator);
        e.kv("e_b_perturbative", e_b_perturbative);
        e.kv("mean_h", mean_h);
        e.kv("h_b_norm", h_b_norm);
        e.kv("tr_hb_rho1", tr_hb_rho1);
        e.kv("tr_hb_rho2", tr_hb_rho2);
        e.kv("prob_sum", prob_sum);
        e.kv("conservation_residual", conservation_residual);
        e.kv("far_site_residual", far_site_residual);
        e.kv("commutator_residual", commutator_residual);
        e.kv("route_residual", route_residual);
        e.kv("eq17_residual", eq17_residual);
        e.kv("max_imag_correlator", max_imag_correlator);
        e.kv("s_ent", chain.s_ent);
        e.kv("i_ab", chain.i_ab);
        e.kv("i_apb", chain.i_apb);
        e.kv("half_trace_sq", chain.half_trace_sq);
        e.kv("witness_term", chain.witness_term);
        e.kv("rhs_22", chain.rhs_22);
        e.kv("rhs_70", chain.rhs_70);
        e.kv("slack_ent_iab", chain.slack_ent_iab);
        e.kv("slack_iab_iapb", chain.slack_iab_iapb);
        e.kv("slack_iapb_trace", chain.slack_iapb_trace);
        e.kv("slack_trace_witness", chain.slack_trace_witness);
        e.kv("slack_witness_eb", chain.slack_witness_eb);
        e.kv("eq70_checked", chain.eq70_checked);
        e.kv("purity_residual", chain.purity_residual);
        e.kv("sent_half_iaa_residual", chain.sent_half_iaa_residual);
        e.kv("iapb_form_residual", chain.iapb_form_residual);
        e.kv("marginal_defect", chain.marginal_defect);
        e.kv("witness_norm_residual", chain.witness_norm_residual);
        e.kv("witness_eb_residual", chain.witness_eb_residual);
        e.kv("witness_meanh_residual", chain.witness_meanh_residual);
        e.kv("pass", pass);
        e.end_object();
    }

    std::string payload_json() const {
        JsonEmitter e;
        e.begin_object();
        emit_payload(e);
        e.end_object();
        return e.str();
    }

    std::string to_json() const {
        JsonEmitter e;
        e.begin_object();
        emit_payload(e);
        e.key("meta").begin_object();
        e.kv("library_version", library_version);
        e.kv("wall_time_ms", wall_time_ms);
        e.end_object();
        e.end_object();
        return e.str();
    }
};

/// Re-serialize the deterministic payload of a record file (drops "meta").
inline std::string payload_bytes_of_record_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open record file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("record file '" + path + "' is not valid JSON: " + e.what());
    }
    j.erase("meta");
    // nlohmann serializes doubles with shortest-round-trip digits; parsing a
    // %.17g payload and re-dumping is therefore stable across identical runs
    return j.dump();
}

struct GoldenMismatch {
    std::string field;
    double expected = 0.0;
    double actual = 0.0;
    double tolerance = 0.0;
};

struct GoldenComparison {
    bool ok = true;
    std::vector<GoldenMismatch> mismatches;
    std::vector<std::string> missing;
};

/// Compare the scalar fields present in the golden record against a produced
/// record's results, using per-field tolerances (absolute).
inline GoldenComparison compare_against_golden(const std::string& record_path,
                                               const std::string& golden_dir) {
    std::ifstream rin(record_path);
    if (!rin) throw ConfigError("cannot open record file '" + record_path + "'");
    json rec;
    rin >> rec;
    if (!rec.contains("results")) throw ConfigError("record has no results section");
    const json& results = rec["results"];

    std::ifstream gin(golden_dir + "/record.json");
    if (!gin) throw ConfigError("cannot open golden record '" + golden_dir + "/record.json'");
    json golden;
    gin >> golden;

    double default_tol = 1e-9;
    json overrides = json::object();
    {
        std::ifstream tin(golden_dir + "/tolerances.json");
        if (tin) {
            json tols;
            tin >> tols;
            if (tols.contains("default")) default_tol = tols["default"].get<double>();
            if (tols.contains("overrides")) overrides = tols["overrides"];
        }
    }
    auto tol_for = [&](const std::string& field) {
        return overrides.contains(field) ? overrides[field].get<double>() : default_tol;
    };

    GoldenComparison cmp;
    auto check_scalar = [&](const std::string& field, double expect, double tol) {
        if (!results.contains(field)) {
            cmp.ok = false;
            cmp.missing.push_back(field);
            return;
        }
        const double actual = results[field].get<double>();
        if (std::abs(actual - expect) > tol) {
            cmp.ok = false;
            cmp.mismatches.push_back({field, expect, actual, tol});
        }
    };
    for (auto it = golden.begin(); it != golden.end(); ++it) {
        const double tol = tol_for(it.key());
        if (it->is_number()) {
            check_scalar(it.key(), it->get<double>(), tol);
        } else if (it->is_array()) {
            if (!results.contains(it.key())) {
                cmp.ok = false;
                cmp.missing.push_back(it.key());
                continue;
            }
            const json& actual = results[it.key()];
            if (!actual.is_array() || actual.size() != it->size()) {
                cmp.ok = false;
                cmp.mismatches.push_back({it.key() + ".size", static_cast<double>(it->size()),
                                          static_cast<double>(actual.size()), 0.0});
                continue;
            }
            for (std::size_t i = 0; i < it->size(); ++i) {
                const double e = (*it)[i].get<double>();
                const double a = actual[i].get<double>();
                if (std::abs(a - e) > tol) {
                    cmp.ok = false;
                    cmp.mismatches.push_back({it.key() + "[" + std::to_string(i) + "]", e, a, tol});
                }
            }
        }
    }
    return cmp;
}

/// Column order of the sweep CSV; report re-uses the same layout.
inline const std::vector<std::string>& sweep_csv_columns() {
    static const std::vector<std::string> cols = {
        "n_sites",        "b",
        "g",              "distance",
        "axis_angle",     "status",
        "e_a",            "e_b",
        "e_b_correlator", "mean_h",
        "h_b_norm",       "s_ent",
        "i_ab",           "i_apb",
        "half_trace_sq",  "rhs_22",
        "rhs_70",         "slack_ent_iab",
        "slack_iab_iapb", "slack_iapb_trace",
        "slack_trace_witness", "slack_witness_eb",
        "pass"};
    return cols;
}

} // namespace qetlab
