#ifndef TRANSPORT_DATA_HPP
#define TRANSPORT_DATA_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "transport/errors.hpp"

namespace transport {

// One pooled row: a trial participant (trial_id >= 1) or a member of the
// target sample (trial_id == 0).  Target rows may carry treatment/outcome
// values; the transport estimators ignore them.
struct Observation {
    int trial_id = 0;
    std::optional<int> treatment;
    std::optional<double> outcome;
    std::vector<double> covariates;

    bool participation() const { return trial_id >= 1; }
};

class ObservationTable {
public:
    static ObservationTable from_rows(std::vector<Observation> rows) {
        ObservationTable t;
        t.rows_ = std::move(rows);
        t.validate_and_index();
        return t;
    }

    const std::vector<Observation>& rows() const { return rows_; }
    std::size_t n() const { return rows_.size(); }
    std::size_t n_target() const { return n_target_; }
    std::size_t n_trials() const { return n_trials_; }
    std::size_t covariate_dim() const { return p_; }
    const std::vector<int>& treatment_levels() const { return treatment_levels_; }

    // n_0 / n, the empirical proportion of target rows.
    double target_fraction() const {
        return static_cast<double>(n_target_) / static_cast<double>(rows_.size());
    }

    std::vector<int> trial_ids() const {
        std::set<int> ids;
        for (const auto& r : rows_)
            if (r.participation()) ids.insert(r.trial_id);
        return {ids.begin(), ids.end()};
    }

private:
    void validate_and_index() {
        if (rows_.empty()) throw ValidationError("table has no rows");
        p_ = rows_.front().covariates.size();
        std::set<int> trial_ids;
        std::set<int> levels;
        n_target_ = 0;
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const Observation& r = rows_[i];
            if (r.trial_id < 0)
                throw ValidationError("row " + std::to_string(i) + ": negative trial id");
            if (r.covariates.size() != p_)
                throw ValidationError("row " + std::to_string(i) +
                                      ": covariate length " + std::to_string(r.covariates.size()) +
                                      " != " + std::to_string(p_));
            for (double x : r.covariates)
                if (!std::isfinite(x))
                    throw ValidationError("row " + std::to_string(i) + ": non-finite covariate");
            if (r.participation()) {
                if (!r.treatment.has_value())
                    throw ValidationError("row " + std::to_string(i) +
                                          ": trial row missing treatment");
                if (!r.outcome.has_value())
                    throw ValidationError("row " + std::to_string(i) +
                                          ": trial row missing outcome");
                if (*r.treatment < 0)
                    throw ValidationError("row " + std::to_string(i) + ": negative treatment code");
                if (!std::isfinite(*r.outcome))
                    throw ValidationError("row " + std::to_string(i) + ": non-finite outcome");
                trial_ids.insert(r.trial_id);
                levels.insert(*r.treatment);
            } else {
                ++n_target_;
                if (r.outcome.has_value() && !std::isfinite(*r.outcome))
                    throw ValidationError("row " + std::to_string(i) + ": non-finite outcome");
            }
        }
        if (n_target_ == 0) throw ValidationError("no target rows (trial = 0)");
        if (trial_ids.empty()) throw ValidationError("no trial rows (trial >= 1)");
        n_trials_ = trial_ids.size();
        treatment_levels_.assign(levels.begin(), levels.end());
    }

    std::vector<Observation> rows_;
    std::vector<int> treatment_levels_;
    std::size_t n_target_ = 0;
    std::size_t n_trials_ = 0;
    std::size_t p_ = 0;
};

// Column-name mapping for CSV ingestion.  Every column not mapped to
// trial/treatment/outcome is a covariate, in header order.
struct CsvSchema {
    std::string trial_column = "trial";
    std::string treatment_column = "treatment";
    std::string outcome_column = "outcome";
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& s, const std::string& what, std::size_t row) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("row " + std::to_string(row) + ": cannot parse " + what +
                              " value '" + s + "'");
    }
}

inline int parse_int(const std::string& s, const std::string& what, std::size_t row) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("row " + std::to_string(row) + ": cannot parse " + what +
                              " value '" + s + "'");
    }
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace detail

inline ObservationTable load_csv(const std::string& path, const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty file '" + path + "'");
    auto header = detail::split_csv_line(line);
    for (auto& h : header) h = detail::trim(h);

    int trial_idx = -1, treat_idx = -1, outcome_idx = -1;
    std::vector<std::size_t> cov_idx;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == schema.trial_column) trial_idx = static_cast<int>(j);
        else if (header[j] == schema.treatment_column) treat_idx = static_cast<int>(j);
        else if (header[j] == schema.outcome_column) outcome_idx = static_cast<int>(j);
        else cov_idx.push_back(j);
    }
    if (trial_idx < 0) throw SchemaError("missing column '" + schema.trial_column + "'");
    if (treat_idx < 0) throw SchemaError("missing column '" + schema.treatment_column + "'");
    if (outcome_idx < 0) throw SchemaError("missing column '" + schema.outcome_column + "'");

    std::vector<Observation> rows;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw ValidationError("row " + std::to_string(row_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
        for (auto& f : fields) f = detail::trim(f);
        Observation obs;
        obs.trial_id = detail::parse_int(fields[trial_idx], "trial", row_no);
        if (obs.trial_id < 0)
            throw ValidationError("row " + std::to_string(row_no) + ": negative trial id");
        if (!fields[treat_idx].empty())
            obs.treatment = detail::parse_int(fields[treat_idx], "treatment", row_no);
        if (!fields[outcome_idx].empty())
            obs.outcome = detail::parse_double(fields[outcome_idx], "outcome", row_no);
        obs.covariates.reserve(cov_idx.size());
        for (std::size_t j : cov_idx)
            obs.covariates.push_back(detail::parse_double(fields[j], header[j], row_no));
        rows.push_back(std::move(obs));
        ++row_no;
    }
    return ObservationTable::from_rows(std::move(rows));
}

// Canonical layout: header trial,treatment,outcome,x1..xp; empty cell for
// absent optional fields; rows in input order.
inline void write_csv(const ObservationTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "trial,treatment,outcome";
    for (std::size_t j = 0; j < table.covariate_dim(); ++j) out << ",x" << (j + 1);
    out << "\n";
    for (const auto& r : table.rows()) {
        out << r.trial_id << ",";
        if (r.treatment) out << *r.treatment;
        out << ",";
        if (r.outcome) out << detail::format_double(*r.outcome);
        for (double x : r.covariates) out << "," << detail::format_double(x);
        out << "\n";
    }
    if (!out) throw IoError("write failure on '" + path + "'");
}

}  // namespace transport

#endif  // TRANSPORT_DATA_HPP
