#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "svmma/averaging.hpp"
#include "svmma/candidates.hpp"
#include "svmma/simulation.hpp"
#include "svmma/version.hpp"

namespace svmma {

using json = nlohmann::json;

inline std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline json candidate_set_to_json(const CandidateSet& cs) {
    json models = json::array();
    for (const auto& cm : cs.models) {
        json entry;
        entry["columns"] = cm.column_indices;  // zero-based dataset columns
        entry["kernel"] = kernel_name(cm.kernel);
        entry["q"] = cm.q;
        if (cm.bandwidth) entry["bandwidth"] = *cm.bandwidth;
        models.push_back(std::move(entry));
    }
    json out;
    out["models"] = std::move(models);
    if (cs.quasi_correct) out["quasi_correct"] = *cs.quasi_correct;
    return out;
}

// Rows of a weight table: model index, columns, weight, hat trace, bandwidth.
inline json weight_table_to_json(const CandidateSet& cs, const WeightVector& w,
                                 const Eigen::VectorXd& traces, double criterion,
                                 double weight_threshold = -1.0) {
    json rows = json::array();
    for (Eigen::Index m = 0; m < w.size(); ++m) {
        if (weight_threshold >= 0.0 && !(w[m] > weight_threshold)) continue;
        json row;
        row["model"] = m;
        row["columns"] = cs.models[static_cast<std::size_t>(m)].column_indices;
        if (cs.models[static_cast<std::size_t>(m)].bandwidth)
            row["bandwidth"] = *cs.models[static_cast<std::size_t>(m)].bandwidth;
        row["trace"] = traces[m];
        row["weight"] = w[m];
        rows.push_back(std::move(row));
    }
    json out;
    out["rows"] = std::move(rows);
    out["criterion"] = criterion;
    return out;
}

inline json design_config_to_json(const DesignConfig& c) {
    json out;
    out["design"] = c.design;
    out["n"] = c.n;
    out["alpha"] = c.alpha;
    out["r2"] = c.r2;
    out["error_case"] = error_case_name(c.error_case);
    out["seed"] = c.seed;
    out["replications"] = c.replications;
    out["kernel"] = kernel_name(c.kernel);
    out["q"] = c.q;
    out["grid_points"] = c.grid_points;
    out["grid_lo"] = c.grid_lo;
    out["grid_hi"] = c.grid_hi;
    return out;
}

inline DesignConfig design_config_from_json(const json& j) {
    DesignConfig c;
    c.design = j.at("design").get<int>();
    c.n = j.at("n").get<Eigen::Index>();
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    c.r2 = j.at("r2").get<double>();
    if (j.contains("error_case")) c.error_case = error_case_from_name(j.at("error_case").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.replications = j.at("replications").get<int>();
    if (j.contains("kernel")) c.kernel = kernel_from_name(j.at("kernel").get<std::string>());
    if (j.contains("q")) c.q = j.at("q").get<double>();
    if (j.contains("grid_points")) c.grid_points = j.at("grid_points").get<int>();
    if (j.contains("grid_lo")) c.grid_lo = j.at("grid_lo").get<double>();
    if (j.contains("grid_hi")) c.grid_hi = j.at("grid_hi").get<double>();
    c.validate();
    return c;
}

inline json risk_report_to_json(const RiskReport& report) {
    json out;
    out["schema_version"] = 1;
    out["software_version"] = version_string;
    out["config"] = design_config_to_json(report.config);
    out["excluded_replications"] = report.excluded_replications;
    out["exclusion_reasons"] = report.exclusion_reasons;
    out["elapsed_seconds"] = report.elapsed_seconds;
    json methods = json::array();
    const bool have_svcm_oracle = report.has(Method::oracle_svcma);
    const bool have_linear_oracle = report.has(Method::oracle_linear);
    for (const auto& res : report.results) {
        json entry;
        entry["method"] = method_name(res.method);
        entry["losses"] = res.losses;
        entry["mean_loss"] = res.mean_loss();
        entry["mse"] = mse_from_losses(res.losses, report.config.n);
        bool have_tau = false;
        for (const double t : res.taus)
            if (!std::isnan(t)) have_tau = true;
        if (have_tau) {
            entry["taus"] = res.taus;
            entry["mean_tau"] = res.mean_tau();
        }
        const bool linear = is_linear_method(res.method);
        if (!linear && have_svcm_oracle)
            entry["relative_risk"] = relative_risk(res.losses, report.result(Method::oracle_svcma).losses);
        if (linear && have_linear_oracle)
            entry["relative_risk"] = relative_risk(res.losses, report.result(Method::oracle_linear).losses);
        // Mean weights across valid replications (weight methods only).
        if (is_weight_method(res.method)) {
            Eigen::VectorXd acc;
            std::size_t count = 0;
            for (const auto& w : res.weights) {
                if (w.size() == 0) continue;
                if (acc.size() == 0) acc = Eigen::VectorXd::Zero(w.size());
                acc += w;
                ++count;
            }
            if (count > 0) {
                acc /= static_cast<double>(count);
                entry["mean_weights"] = std::vector<double>(acc.data(), acc.data() + acc.size());
            }
        }
        methods.push_back(std::move(entry));
    }
    out["methods"] = std::move(methods);
    return out;
}

// Long-format CSV: one row per (method, replication).
inline void write_risk_report_csv(const RiskReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw CsvError("cannot open for writing: " + path);
    out << "design,n,alpha,r2,case,method,replication,loss,tau\n";
    const auto& c = report.config;
    for (const auto& res : report.results) {
        for (std::size_t j = 0; j < res.losses.size(); ++j) {
            out << c.design << ',' << c.n << ',' << format_double(c.alpha) << ',' << format_double(c.r2)
                << ',' << error_case_name(c.error_case) << ',' << method_name(res.method) << ',' << j << ','
                << format_double(res.losses[j]) << ',' << format_double(res.taus[j]) << '\n';
        }
    }
}

inline void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw CsvError("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open: " + path);
    json j;
    in >> j;
    return j;
}

}
