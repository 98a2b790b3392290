// Command-line front end: data checks, weight diagnostics, calibration,
// noninferiority tests, simulation and replication studies. CSV in, JSON
// out; exit codes are 0 (success), 1 (validation error), 2 (numerical
// failure).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "recalib/recalib.hpp"

namespace {

using nlohmann::json;

void write_output(const json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw recalib::ValidationError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

std::map<double, double> parse_shares_flag(const std::string& text) {
    // "1=0.22,0=0.78"
    std::map<double, double> shares;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw recalib::ValidationError("share list must look like '1=0.22,0=0.78', got '" +
                                           item + "'");
        }
        shares[std::stod(item.substr(0, eq))] = std::stod(item.substr(eq + 1));
    }
    if (shares.empty()) throw recalib::ValidationError("empty share list");
    return shares;
}

recalib::SimConfig sim_config_from_json(const json& j) {
    recalib::SimConfig cfg;
    if (j.contains("n_historical")) cfg.n_historical = j["n_historical"].get<int>();
    if (j.contains("n_current")) cfg.n_current = j["n_current"].get<int>();
    if (j.contains("bpd_prevalence_historical")) {
        cfg.bpd_prevalence_historical = j["bpd_prevalence_historical"].get<double>();
    }
    if (j.contains("bpd_prevalence_current")) {
        cfg.bpd_prevalence_current = j["bpd_prevalence_current"].get<double>();
    }
    if (j.contains("covariate_rates_historical")) {
        const auto v = j["covariate_rates_historical"].get<std::vector<double>>();
        if (v.size() != 3) throw recalib::ValidationError("covariate_rates_historical needs 3 rates");
        std::copy(v.begin(), v.end(), cfg.covariate_rates_historical.begin());
    }
    if (j.contains("covariate_rates_current")) {
        const auto v = j["covariate_rates_current"].get<std::vector<double>>();
        if (v.size() != 3) throw recalib::ValidationError("covariate_rates_current needs 3 rates");
        std::copy(v.begin(), v.end(), cfg.covariate_rates_current.begin());
    }
    if (j.contains("arm1_fraction_historical")) {
        cfg.arm1_fraction_historical = j["arm1_fraction_historical"].get<double>();
    }
    if (j.contains("arm1_fraction_current")) {
        cfg.arm1_fraction_current = j["arm1_fraction_current"].get<double>();
    }
    auto read_rates = [&](const char* key, std::array<recalib::StratumRates, 2>& rates) {
        if (!j.contains(key)) return;
        const auto& r = j[key];  // [[arm0_bpd, arm0_nonbpd], [arm1_bpd, arm1_nonbpd]]
        for (int arm = 0; arm < 2; ++arm) {
            rates[static_cast<std::size_t>(arm)].bpd = r.at(arm).at(0).get<double>();
            rates[static_cast<std::size_t>(arm)].non_bpd = r.at(arm).at(1).get<double>();
        }
    };
    read_rates("event_rates_historical", cfg.event_rates_historical);
    read_rates("event_rates_current", cfg.event_rates_current);
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    return cfg;
}

json sim_config_to_json(const recalib::SimConfig& cfg) {
    return json{
        {"n_historical", cfg.n_historical},
        {"n_current", cfg.n_current},
        {"bpd_prevalence_historical", cfg.bpd_prevalence_historical},
        {"bpd_prevalence_current", cfg.bpd_prevalence_current},
        {"covariate_rates_historical", cfg.covariate_rates_historical},
        {"covariate_rates_current", cfg.covariate_rates_current},
        {"arm1_fraction_historical", cfg.arm1_fraction_historical},
        {"arm1_fraction_current", cfg.arm1_fraction_current},
        {"event_rates_historical",
         {{cfg.event_rates_historical[0].bpd, cfg.event_rates_historical[0].non_bpd},
          {cfg.event_rates_historical[1].bpd, cfg.event_rates_historical[1].non_bpd}}},
        {"event_rates_current",
         {{cfg.event_rates_current[0].bpd, cfg.event_rates_current[0].non_bpd},
          {cfg.event_rates_current[1].bpd, cfg.event_rates_current[1].non_bpd}}},
        {"seed", cfg.seed}};
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw recalib::ValidationError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw recalib::ValidationError("config '" + path + "': " + e.what());
    }
    return j;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Calibrates historical treatment-effect estimates to a target trial "
                 "population by likelihood reweighting and evaluates noninferiority."};
    app.require_subcommand(1);

    // --- ingest-check ----------------------------------------------------
    auto* check = app.add_subcommand("ingest-check", "Validate a subject CSV and echo tallies");
    std::string check_input;
    bool check_binary = false;
    check->add_option("--input", check_input, "Subject CSV")->required();
    check->add_flag("--binary-outcome", check_binary, "Require outcomes to be 0/1");

    // --- propensity ------------------------------------------------------
    auto* prop = app.add_subcommand("propensity",
                                    "Fit the trial-membership model and report weight diagnostics");
    std::string prop_input, prop_output, prop_covariates;
    bool prop_interactions = false;
    int prop_strata = 0;
    std::vector<double> prop_trim;
    prop->add_option("--input", prop_input, "Subject CSV with both trials")->required();
    prop->add_option("--covariates", prop_covariates, "Comma-separated covariate names")->required();
    prop->add_flag("--interactions", prop_interactions, "Add pairwise interaction terms");
    prop->add_option("--strata", prop_strata, "Also report quantile strata of the ratio");
    prop->add_option("--trim", prop_trim, "Trim bounds: lower upper")->expected(2);
    prop->add_option("--output", prop_output, "Report path (default stdout)");

    // --- calibrate -------------------------------------------------------
    auto* cal = app.add_subcommand("calibrate", "Calibrate the historical effect and report");
    std::string cal_config, cal_input, cal_metric, cal_mode, cal_estimator;
    std::string cal_share_cov, cal_target, cal_source, cal_covariates, cal_output;
    int cal_strata = 0, cal_boot = -1, cal_threads = 0;
    std::uint64_t cal_seed = 0;
    bool cal_seed_set = false, cal_interactions = false;
    double cal_level = 0.0, cal_alpha = 0.0;
    std::vector<double> cal_trim;
    std::optional<double> cal_mu_tc, cal_se_tc;
    cal->add_option("--config", cal_config, "Declarative JSON config; flags override it");
    cal->add_option("--input", cal_input, "Subject CSV");
    cal->add_option("--metric", cal_metric, "log_odds_ratio | risk_difference");
    cal->add_option("--weight-mode", cal_mode, "analytic | propensity | stratified");
    cal->add_option("--estimator", cal_estimator, "parametric | nonparametric");
    cal->add_option("--share-covariate", cal_share_cov, "Category column for analytic weights");
    cal->add_option("--target-shares", cal_target, "Target shares, e.g. '1=0.22,0=0.78'");
    cal->add_option("--source-shares", cal_source,
                    "Source shares (default: arm-wise empirical)");
    cal->add_option("--covariates", cal_covariates, "Propensity covariates, comma-separated");
    cal->add_flag("--interactions", cal_interactions, "Pairwise interactions in the propensity model");
    cal->add_option("--strata", cal_strata, "Stratum count for the stratified mode");
    cal->add_option("--trim", cal_trim, "Trim bounds: lower upper")->expected(2);
    cal->add_option("--bootstrap", cal_boot, "Bootstrap replicates (0 disables)");
    auto* seed_opt = cal->add_option("--seed", cal_seed, "Bootstrap seed");
    cal->add_option("--level", cal_level, "Bootstrap interval level");
    cal->add_option("--threads", cal_threads, "Bootstrap threads");
    cal->add_option("--mu-tc", cal_mu_tc, "Current-trial effect estimate");
    cal->add_option("--se-tc", cal_se_tc, "Current-trial effect SE");
    cal->add_option("--alpha", cal_alpha, "One-sided significance level");
    cal->add_option("--output", cal_output, "Report path (default stdout)");

    // --- test ------------------------------------------------------------
    auto* ni = app.add_subcommand("test", "Noninferiority statistics from effect estimates");
    std::optional<double> ni_mu_tc, ni_se_tc, ni_mu_cp, ni_se_cp;
    double ni_alpha = 0.025;
    std::string ni_report, ni_output;
    ni->add_option("--mu-tc", ni_mu_tc, "Current-trial effect (control vs experimental)");
    ni->add_option("--se-tc", ni_se_tc, "Its standard error");
    ni->add_option("--mu-cp", ni_mu_cp, "Historical effect (possibly calibrated)");
    ni->add_option("--se-cp", ni_se_cp, "Its standard error");
    ni->add_option("--alpha", ni_alpha, "One-sided significance level");
    ni->add_option("--from-report", ni_report,
                   "Take mu-cp/se-cp from a prior calibration report");
    ni->add_option("--output", ni_output, "Report path (default stdout)");

    // --- simulate --------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "Generate one synthetic two-trial pool");
    std::string sim_config_path, sim_csv, sim_json_path;
    std::uint64_t sim_seed = 0;
    bool sim_seed_set = false;
    auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_option("--config", sim_config_path, "Simulation config JSON");
    sim->add_option("--output-csv", sim_csv, "Write the pool as subject CSV");
    sim->add_option("--output-json", sim_json_path, "Write tallies as JSON (default stdout)");

    // --- replicate -------------------------------------------------------
    auto* rep = app.add_subcommand("replicate", "Monte Carlo study of the calibration pipeline");
    std::string rep_config_path, rep_output, rep_covariates;
    int rep_r = 500, rep_threads = 1;
    std::uint64_t rep_seed = 0;
    bool rep_seed_set = false;
    auto* rep_seed_opt = rep->add_option("--seed", rep_seed, "RNG seed");
    rep->add_option("--config", rep_config_path, "Simulation config JSON");
    rep->add_option("--replications", rep_r, "Number of replications");
    rep->add_option("--threads", rep_threads, "Worker threads");
    rep->add_option("--covariates", rep_covariates,
                    "Propensity covariates (default bpd,x1,x2,x3)");
    rep->add_option("--output", rep_output, "Summary path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    cal_seed_set = seed_opt->count() > 0;
    sim_seed_set = sim_seed_opt->count() > 0;
    rep_seed_set = rep_seed_opt->count() > 0;

    auto split_names = [](const std::string& text) {
        std::vector<std::string> out;
        std::istringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) out.push_back(item);
        }
        return out;
    };

    if (check->parsed()) {
        const auto data = recalib::read_csv(
            check_input, check_binary ? recalib::OutcomeKind::binary
                                      : recalib::OutcomeKind::auto_detect);
        const auto s = recalib::summarize(data);
        json j{{"rows", s.rows},
               {"covariates", s.covariate_names},
               {"binary_outcome", s.binary_outcome}};
        for (const auto& [key, n] : s.counts) {
            j["counts"][key] = n;
            j["events"][key] = s.outcome_sums.at(key);
        }
        std::cout << j.dump(2) << '\n';
        return 0;
    }

    if (prop->parsed()) {
        const auto data = recalib::read_csv(prop_input);
        const auto model =
            recalib::fit_propensity(data, split_names(prop_covariates), prop_interactions);
        auto weights = recalib::propensity_weights(model, data);
        if (!prop_trim.empty()) weights = recalib::trim_weights(weights, prop_trim[0], prop_trim[1]);
        json j;
        const auto& fit = model.fit();
        for (std::size_t k = 0; k < model.design_labels().size(); ++k) {
            const auto idx = static_cast<Eigen::Index>(k);
            j["coefficients"][model.design_labels()[k]] = fit.coefficients[idx];
            j["coefficient_se"][model.design_labels()[k]] =
                std::sqrt(fit.naive_covariance(idx, idx));
        }
        j["converged"] = fit.converged;
        j["iterations"] = fit.iterations;
        j["warnings"] = model.warnings();
        j["weights"] = {{"provenance", to_string(weights.provenance())},
                        {"count", weights.size()},
                        {"min", weights.min()},
                        {"max", weights.max()},
                        {"mean", weights.mean()},
                        {"effective_sample_size", weights.effective_sample_size()}};
        if (prop_strata > 0) {
            const auto strata = recalib::stratify(model, data, prop_strata);
            json sj = json::array();
            for (int l = 0; l < strata.n_strata; ++l) {
                const auto lu = static_cast<std::size_t>(l);
                sj.push_back({{"stratum", l + 1},
                              {"n_historical", strata.count_historical[lu]},
                              {"n_current", strata.count_current[lu]},
                              {"share_historical", strata.share_historical[lu]},
                              {"share_current", strata.share_current[lu]}});
            }
            j["strata"] = sj;
        }
        write_output(j, prop_output);
        return 0;
    }

    if (cal->parsed()) {
        recalib::AnalysisConfig cfg;
        if (!cal_config.empty()) cfg = recalib::AnalysisConfig::from_json(load_json_file(cal_config));
        if (!cal_input.empty()) cfg.input_path = cal_input;
        if (!cal_metric.empty()) {
            if (cal_metric == "log_odds_ratio") {
                cfg.metric = recalib::Contrast::log_odds_ratio;
            } else if (cal_metric == "risk_difference") {
                cfg.metric = recalib::Contrast::difference;
            } else {
                throw recalib::ValidationError("unknown metric '" + cal_metric + "'");
            }
        }
        if (!cal_mode.empty()) {
            if (cal_mode == "analytic") {
                cfg.weight_mode = recalib::WeightMode::analytic;
            } else if (cal_mode == "propensity") {
                cfg.weight_mode = recalib::WeightMode::propensity;
            } else if (cal_mode == "stratified") {
                cfg.weight_mode = recalib::WeightMode::stratified;
            } else {
                throw recalib::ValidationError("unknown weight mode '" + cal_mode + "'");
            }
        }
        if (!cal_estimator.empty()) {
            if (cal_estimator == "parametric") {
                cfg.estimator = recalib::CalibrationMethod::parametric;
            } else if (cal_estimator == "nonparametric") {
                cfg.estimator = recalib::CalibrationMethod::nonparametric;
            } else {
                throw recalib::ValidationError("unknown estimator '" + cal_estimator + "'");
            }
        }
        if (!cal_share_cov.empty()) cfg.share_covariate = cal_share_cov;
        if (!cal_target.empty()) cfg.target_shares = parse_shares_flag(cal_target);
        if (!cal_source.empty()) cfg.source_shares = parse_shares_flag(cal_source);
        if (!cal_covariates.empty()) cfg.covariates = split_names(cal_covariates);
        if (cal_interactions) cfg.propensity_interactions = true;
        if (cal_strata > 0) cfg.n_strata = cal_strata;
        if (!cal_trim.empty()) cfg.trim_bounds = std::make_pair(cal_trim[0], cal_trim[1]);
        if (cal_boot >= 0) cfg.bootstrap.replicates = cal_boot;
        if (cal_seed_set) cfg.bootstrap.seed = cal_seed;
        if (cal_level > 0.0) cfg.bootstrap.level = cal_level;
        if (cal_threads > 0) cfg.bootstrap.threads = cal_threads;
        if (cal_mu_tc) cfg.current.mu_tc = cal_mu_tc;
        if (cal_se_tc) cfg.current.se_tc = cal_se_tc;
        if (cal_alpha > 0.0) cfg.current.alpha = cal_alpha;
        if (cfg.input_path.empty()) {
            throw recalib::ValidationError("calibrate: no input CSV (use --input or the config)");
        }
        write_output(recalib::run_pipeline(cfg), cal_output);
        return 0;
    }

    if (ni->parsed()) {
        if (!ni_report.empty()) {
            const json report = load_json_file(ni_report);
            if (!report.contains("effect") || !report["effect"].contains("calibrated")) {
                throw recalib::ValidationError("report '" + ni_report +
                                               "' holds no calibrated effect");
            }
            if (!ni_mu_cp) ni_mu_cp = report["effect"]["calibrated"]["estimate"].get<double>();
            if (!ni_se_cp) ni_se_cp = report["effect"]["calibrated"]["se"].get<double>();
        }
        if (!ni_mu_tc || !ni_se_tc || !ni_mu_cp || !ni_se_cp) {
            throw recalib::ValidationError(
                "test: need --mu-tc, --se-tc and either --mu-cp/--se-cp or --from-report");
        }
        const recalib::NiInputs in{*ni_mu_tc, *ni_se_tc, *ni_mu_cp, *ni_se_cp, ni_alpha};
        const auto synthesis = recalib::synthesis_test(in);
        const auto fixed = recalib::fixed_margin_test(in);
        auto to_json = [](const recalib::NiTestResult& r) {
            return json{{"statistic", r.statistic}, {"p_value", r.p_value},
                        {"method", to_string(r.method)}, {"reject", r.reject},
                        {"alpha", r.alpha},           {"z_alpha", r.z_alpha}};
        };
        write_output(json{{"inputs",
                           {{"mu_tc", in.mu_tc},
                            {"se_tc", in.se_tc},
                            {"mu_cp", in.mu_cp},
                            {"se_cp", in.se_cp},
                            {"alpha", in.alpha}}},
                          {"synthesis", to_json(synthesis)},
                          {"fixed_margin", to_json(fixed)}},
                     ni_output);
        return 0;
    }

    if (sim->parsed()) {
        recalib::SimConfig cfg;
        if (!sim_config_path.empty()) cfg = sim_config_from_json(load_json_file(sim_config_path));
        if (sim_seed_set) cfg.seed = sim_seed;
        const auto pool = recalib::generate_pool(cfg);
        if (!sim_csv.empty()) recalib::write_csv(pool, sim_csv);
        const auto s = recalib::summarize(pool);
        json j{{"config", sim_config_to_json(cfg)}, {"rows", s.rows}, {"rng", recalib::Rng::algorithm}};
        for (const auto& [key, n] : s.counts) {
            j["counts"][key] = n;
            j["events"][key] = s.outcome_sums.at(key);
        }
        if (!sim_csv.empty()) j["csv"] = sim_csv;
        write_output(j, sim_json_path);
        return 0;
    }

    if (rep->parsed()) {
        recalib::SimConfig cfg;
        if (!rep_config_path.empty()) cfg = sim_config_from_json(load_json_file(rep_config_path));
        if (rep_seed_set) cfg.seed = rep_seed;
        recalib::ReplicationSpec spec;
        spec.threads = rep_threads;
        if (!rep_covariates.empty()) spec.covariates = split_names(rep_covariates);
        const auto s = recalib::run_replication_study(cfg, rep_r, spec);
        const json j{{"config", sim_config_to_json(cfg)},
                     {"replications", s.replications},
                     {"failures", s.failures},
                     {"calibrated",
                      {{"mean", s.mean_calibrated},
                       {"empirical_se", s.sd_calibrated},
                       {"mean_model_se", s.mean_calibrated_se},
                       {"truth", s.true_calibrated}}},
                     {"uncalibrated",
                      {{"mean", s.mean_uncalibrated},
                       {"empirical_se", s.sd_uncalibrated},
                       {"mean_model_se", s.mean_uncalibrated_se},
                       {"truth", s.true_uncalibrated}}},
                     {"coverage",
                      {{"arm0", s.coverage_arm0},
                       {"arm1", s.coverage_arm1},
                       {"true_arm0", s.true_arm0},
                       {"true_arm1", s.true_arm1}}},
                     {"rng", s.rng_algorithm}};
        write_output(j, rep_output);
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const recalib::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const recalib::NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
