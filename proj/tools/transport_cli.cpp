// Command-line front end: estimate / simulate / diagnose.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "transport/transport.hpp"

namespace {

using transport::EstimateReport;
using transport::EstimatorKind;
using transport::ObservationTable;

void print_error(const char* error_class, const std::string& message) {
    nlohmann::ordered_json j;
    j["error_class"] = error_class;
    j["message"] = message;
    std::cerr << j.dump() << "\n";
}

int classify_and_report(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const transport::PositivityError& ex) {
        print_error("positivity", ex.what());
        return 3;
    } catch (const transport::InferenceError& ex) {
        print_error("inference", ex.what());
        return 3;
    } catch (const transport::SolverError& ex) {
        print_error("solver", ex.what());
        return 3;
    } catch (const transport::NotApplicableError& ex) {
        print_error("not_applicable", ex.what());
        return 3;
    } catch (const transport::ModelError& ex) {
        print_error("model", ex.what());
        return 2;
    } catch (const transport::Error& ex) {
        print_error("input", ex.what());
        return 1;
    } catch (const std::exception& ex) {
        print_error("internal", ex.what());
        return 2;
    }
}

std::vector<std::pair<int, int>> parse_contrasts(const std::vector<std::string>& raw) {
    std::vector<std::pair<int, int>> out;
    for (const auto& s : raw) {
        const auto comma = s.find(',');
        if (comma == std::string::npos)
            throw transport::ConfigError("contrast '" + s + "' must be 'a,a_prime'");
        out.emplace_back(std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1)));
    }
    return out;
}

struct CommonFlags {
    std::string trial_col = "trial";
    std::string treatment_col = "treatment";
    std::string outcome_col = "outcome";

    transport::CsvSchema schema() const { return {trial_col, treatment_col, outcome_col}; }

    void add_to(CLI::App* cmd) {
        cmd->add_option("--trial-col", trial_col, "CSV column holding the trial id");
        cmd->add_option("--treatment-col", treatment_col, "CSV column holding the treatment code");
        cmd->add_option("--outcome-col", outcome_col, "CSV column holding the outcome");
    }
};

nlohmann::ordered_json flag_echo(const CLI::App* cmd) {
    nlohmann::ordered_json j;
    for (const auto* opt : cmd->get_options()) {
        if (opt->get_name() == "--workers") continue;  // no effect on results
        if (opt->count() == 0 && opt->get_default_str().empty()) continue;
        j[opt->get_name()] = opt->count() ? opt->results().front() : opt->get_default_str();
    }
    return j;
}

int run_estimate(const CLI::App* cmd, const CommonFlags& common, const std::string& input,
                 const std::string& output, const std::string& estimator,
                 std::vector<int> arms, const std::vector<std::string>& contrasts_raw,
                 std::size_t bootstrap_reps, double level, const std::string& scheme,
                 std::uint64_t seed, unsigned workers) {
    ObservationTable table = transport::load_csv(input, common.schema());
    const EstimatorKind kind = transport::estimator_kind_from_string(estimator);
    if (arms.empty()) arms = table.treatment_levels();
    auto contrasts = parse_contrasts(contrasts_raw);
    if (contrasts.empty() && arms.size() == 2) contrasts.emplace_back(arms[1], arms[0]);

    const transport::NuisanceFitter fitter = transport::default_fitter();
    EstimateReport report;
    if (bootstrap_reps > 0) {
        transport::BootstrapConfig bc;
        bc.replicates = bootstrap_reps;
        bc.level = level;
        bc.master_seed = seed;
        bc.workers = workers;
        bc.scheme = (scheme == "stratified") ? transport::ResamplingScheme::StratifiedByR
                                             : transport::ResamplingScheme::Pooled;
        report = transport::bootstrap_ci(table, kind, arms, contrasts, bc, fitter);
    } else {
        report = transport::estimate(table, fitter(table), kind, arms, contrasts);
        report.seed = seed;
    }
    if (kind == EstimatorKind::Augmented) {
        transport::NuisanceBundle bundle = fitter(table);
        for (int a : arms) report.variance[a] = transport::if_variance(table, bundle, a);
    }
    transport::write_report(report, output, flag_echo(cmd));
    return 0;
}

int run_simulate(const std::string& config_path, const std::string& preset,
                 std::size_t replications_override, std::uint64_t seed, bool seed_set,
                 const std::string& out_dir, unsigned workers) {
    transport::GridConfig grid;
    if (!config_path.empty()) {
        grid = transport::load_grid_config(config_path);
    } else if (preset == "desk") {
        grid.scenarios = transport::desk_scenarios();
    } else if (preset == "full") {
        grid.scenarios = transport::full_scenarios();
        grid.replications = 10000;
    } else {
        throw transport::ConfigError("unknown preset '" + preset + "'");
    }
    if (replications_override > 0) grid.replications = replications_override;
    if (seed_set) grid.master_seed = seed;

    transport::GridSettings settings;
    settings.replications = grid.replications;
    settings.master_seed = grid.master_seed;
    settings.workers = workers;

    const auto specs = transport::default_estimator_specs();
    transport::SimulationSummary summary = transport::run_grid(grid.scenarios, specs, settings);

    std::filesystem::create_directories(out_dir);
    std::vector<std::string> names;
    for (const auto& s : specs) names.push_back(s.name);
    transport::write_summary_csv(summary, names, "bias", out_dir + "/bias.csv");
    transport::write_summary_csv(summary, names, "variance", out_dir + "/variance.csv");

    // solved intercepts and oracle truths, for auditability
    std::ofstream cal(out_dir + "/calibration.csv");
    if (!cal) throw transport::IoError("cannot write '" + out_dir + "/calibration.csv'");
    cal.precision(10);
    cal << "scenario,beta0,gamma0,zeta0,truth_psi0,truth_psi0_se,truth_psi1,truth_psi1_se,"
           "replications,failures,seed\n";
    for (const auto& sc : summary.scenarios) {
        cal << sc.config.key() << "," << sc.calibration.beta0 << "," << sc.calibration.gamma0
            << "," << sc.calibration.zeta0 << "," << sc.truth.at(0).value << ","
            << sc.truth.at(0).std_error << "," << sc.truth.at(1).value << ","
            << sc.truth.at(1).std_error << "," << summary.replications << "," << sc.failures
            << "," << summary.master_seed << "\n";
    }
    return 0;
}

int run_diagnose(const CommonFlags& common, const std::string& input, std::vector<int> arms,
                 const std::vector<std::size_t>& design, const std::string& output) {
    ObservationTable table = transport::load_csv(input, common.schema());
    if (arms.empty()) arms = table.treatment_levels();
    std::ostringstream report;
    report << "tool_version " << transport::kToolVersion << "\n";
    for (int a : arms) report << transport::test_mean_homogeneity(table, a, design).to_text();
    if (output.empty()) {
        std::cout << report.str();
    } else {
        std::ofstream out(output);
        if (!out) throw transport::IoError("cannot write '" + output + "'");
        out << report.str();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transport causal inferences from a collection of randomized trials to a "
                 "target population"};
    app.require_subcommand(1);

    // estimate
    auto* est = app.add_subcommand("estimate", "Estimate potential outcome means and contrasts");
    CommonFlags est_common;
    std::string est_input, est_output = "report.json", est_kind = "augmented";
    std::string est_scheme = "pooled";
    std::vector<int> est_arms;
    std::vector<std::string> est_contrasts;
    std::size_t est_boot = 0;
    double est_level = 0.95;
    std::uint64_t est_seed = 0;
    unsigned est_workers = 1;
    est->add_option("--input", est_input, "Input CSV")->required();
    est->add_option("--output", est_output, "Report file (JSON)");
    est->add_option("--estimator", est_kind, "gformula | weighting | augmented");
    est->add_option("--arm", est_arms, "Treatment arm to estimate (repeatable)");
    est->add_option("--contrast", est_contrasts, "Contrast 'a,a_prime' (repeatable)");
    est->add_option("--bootstrap", est_boot, "Bootstrap replicates (0 disables CIs)");
    est->add_option("--level", est_level, "Confidence level");
    est->add_option("--scheme", est_scheme, "pooled | stratified");
    est->add_option("--seed", est_seed, "Master seed");
    est->add_option("--workers", est_workers, "Worker threads");
    est_common.add_to(est);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run the scenario grid and write summary tables");
    std::string sim_config, sim_preset = "desk", sim_out = "sim_out";
    std::size_t sim_reps = 0;
    std::uint64_t sim_seed = 0;
    unsigned sim_workers = 1;
    sim->add_option("--config", sim_config, "Scenario grid config file");
    sim->add_option("--preset", sim_preset, "desk | full (ignored when --config is given)");
    sim->add_option("--replications", sim_reps, "Override replication count");
    auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "Master seed");
    sim->add_option("--out-dir", sim_out, "Output directory");
    sim->add_option("--workers", sim_workers, "Worker threads");

    // diagnose
    auto* dia = app.add_subcommand("diagnose", "Test outcome-mean homogeneity across trials");
    CommonFlags dia_common;
    std::string dia_input, dia_output;
    std::vector<int> dia_arms;
    std::vector<std::size_t> dia_design;
    dia->add_option("--input", dia_input, "Input CSV")->required();
    dia->add_option("--output", dia_output, "Report file (default: stdout)");
    dia->add_option("--arm", dia_arms, "Treatment arm (repeatable; default: all)");
    dia->add_option("--design", dia_design, "Covariate indices for the design (default: all)");
    dia_common.add_to(dia);

    CLI11_PARSE(app, argc, argv);

    try {
        if (est->parsed())
            return run_estimate(est, est_common, est_input, est_output, est_kind, est_arms,
                                est_contrasts, est_boot, est_level, est_scheme, est_seed,
                                est_workers);
        if (sim->parsed())
            return run_simulate(sim_config, sim_preset, sim_reps, sim_seed,
                                sim_seed_opt->count() > 0, sim_out, sim_workers);
        if (dia->parsed())
            return run_diagnose(dia_common, dia_input, dia_arms, dia_design, dia_output);
    } catch (...) {
        return classify_and_report(std::current_exception());
    }
    return 1;
}
