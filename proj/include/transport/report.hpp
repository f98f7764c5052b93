#ifndef TRANSPORT_REPORT_HPP
#define TRANSPORT_REPORT_HPP

#include <fstream>
#include <string>

#include <json.hpp>

#include "transport/errors.hpp"
#include "transport/estimators.hpp"

namespace transport {

inline constexpr const char* kToolVersion = "0.1.0";

inline nlohmann::ordered_json report_to_json(const EstimateReport& rep) {
    nlohmann::ordered_json j;
    j["tool_version"] = kToolVersion;
    j["estimator"] = rep.estimator_kind;
    j["pi_hat"] = rep.pi_hat;
    j["nuisance_digest"] = rep.nuisance_digest;

    nlohmann::ordered_json arms = nlohmann::ordered_json::array();
    for (const auto& [a, v] : rep.psi) {
        nlohmann::ordered_json e;
        e["treatment"] = a;
        e["psi"] = v;
        if (auto it = rep.variance.find(a); it != rep.variance.end()) e["if_variance"] = it->second;
        if (auto it = rep.psi_ci.find(a); it != rep.psi_ci.end()) {
            e["ci_lower"] = it->second.lower;
            e["ci_upper"] = it->second.upper;
        }
        arms.push_back(e);
    }
    j["arms"] = arms;

    nlohmann::ordered_json deltas = nlohmann::ordered_json::array();
    for (const auto& [pair, v] : rep.delta) {
        nlohmann::ordered_json e;
        e["a"] = pair.first;
        e["a_prime"] = pair.second;
        e["delta"] = v;
        if (auto it = rep.delta_ci.find(pair); it != rep.delta_ci.end()) {
            e["ci_lower"] = it->second.lower;
            e["ci_upper"] = it->second.upper;
        }
        deltas.push_back(e);
    }
    j["contrasts"] = deltas;

    if (rep.bootstrap_replicates > 0) {
        nlohmann::ordered_json b;
        b["method"] = "nonparametric percentile";
        b["replicates"] = rep.bootstrap_replicates;
        b["failures"] = rep.bootstrap_failures;
        b["scheme"] = rep.bootstrap_scheme;
        b["seed"] = rep.seed;
        j["bootstrap"] = b;
    }
    return j;
}

inline void write_report(const EstimateReport& rep, const std::string& path,
                         const nlohmann::ordered_json& provenance = {}) {
    nlohmann::ordered_json j = report_to_json(rep);
    if (!provenance.empty()) j["invocation"] = provenance;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failure on '" + path + "'");
}

}  // namespace transport

#endif  // TRANSPORT_REPORT_HPP
