#ifndef TRANSPORT_CONFIG_HPP
#define TRANSPORT_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "transport/errors.hpp"
#include "transport/simulation.hpp"

namespace transport {

// Flat key/value scenario-grid file.  Lines are `key value[,value...]`;
// blank lines and `#` comments are skipped; unknown keys are hard errors.
//
//   replications 1000
//   seed 20240801
//   n 10000
//   n_trial_total 1000,5000
//   balanced yes,no
//   txam_varies yes,no
//
// List-valued keys expand to the Cartesian product of scenarios.
struct GridConfig {
    std::vector<ScenarioConfig> scenarios;
    std::size_t replications = 1000;
    std::uint64_t master_seed = 20240801;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "yes" || s == "true" || s == "1") return true;
    if (s == "no" || s == "false" || s == "0") return false;
    throw ConfigError("key '" + key + "': cannot parse boolean '" + s + "'");
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse integer '" + s + "'");
    }
}

}  // namespace detail

inline GridConfig parse_grid_config(std::istream& in) {
    GridConfig cfg;
    std::vector<std::size_t> ns = {10000};
    std::vector<std::size_t> trial_totals = {1000};
    std::vector<bool> balanced = {true};
    std::vector<bool> varies = {false};

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto sp = t.find_first_of(" \t");
        if (sp == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key value'");
        const std::string key = t.substr(0, sp);
        const std::string value = detail::trim(t.substr(sp + 1));
        if (key == "replications") {
            cfg.replications = detail::parse_u64(value, key);
        } else if (key == "seed") {
            cfg.master_seed = detail::parse_u64(value, key);
        } else if (key == "n") {
            ns.clear();
            for (const auto& v : detail::split_list(value)) ns.push_back(detail::parse_u64(v, key));
        } else if (key == "n_trial_total") {
            trial_totals.clear();
            for (const auto& v : detail::split_list(value))
                trial_totals.push_back(detail::parse_u64(v, key));
        } else if (key == "balanced") {
            balanced.clear();
            for (const auto& v : detail::split_list(value))
                balanced.push_back(detail::parse_bool(v, key));
        } else if (key == "txam_varies") {
            varies.clear();
            for (const auto& v : detail::split_list(value))
                varies.push_back(detail::parse_bool(v, key));
        } else {
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }

    for (std::size_t n : ns)
        for (std::size_t nt : trial_totals)
            for (bool bal : balanced)
                for (bool vary : varies) {
                    ScenarioConfig c;
                    c.n = n;
                    c.n_trial_total = nt;
                    c.balanced = bal;
                    c.txam_varies = vary;
                    c.validate();
                    cfg.scenarios.push_back(c);
                }
    return cfg;
}

inline GridConfig load_grid_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return parse_grid_config(in);
}

}  // namespace transport

#endif  // TRANSPORT_CONFIG_HPP
