#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "recalib/bootstrap.hpp"
#include "recalib/calibration.hpp"
#include "recalib/data.hpp"
#include "recalib/error.hpp"
#include "recalib/io.hpp"
#include "recalib/ni_test.hpp"
#include "recalib/propensity.hpp"
#include "recalib/sim.hpp"
#include "recalib/stats.hpp"
#include "recalib/version.hpp"

namespace recalib {

struct BootstrapSettings {
    int replicates = 0;  // 0 disables the bootstrap
    std::uint64_t seed = 0;
    double level = 0.95;
    int threads = 1;
};

struct CurrentTrialInputs {
    std::optional<double> mu_tc;
    std::optional<double> se_tc;
    double alpha = 0.025;
};

/// Everything one analysis run needs. Read from a declarative JSON file,
/// overridable flag by flag in the CLI.
struct AnalysisConfig {
    std::string input_path;
    Contrast metric = Contrast::log_odds_ratio;
    CalibrationMethod estimator = CalibrationMethod::parametric;
    WeightMode weight_mode = WeightMode::analytic;

    // analytic mode
    std::string share_covariate = "bpd";
    std::map<double, double> target_shares;
    std::optional<std::map<double, double>> source_shares;  // default: arm-wise empirical

    // propensity / stratified modes
    std::vector<std::string> covariates;
    bool propensity_interactions = false;
    int n_strata = 5;

    std::optional<std::pair<double, double>> trim_bounds;
    BootstrapSettings bootstrap;
    CurrentTrialInputs current;

    void validate() const {
        if (estimator == CalibrationMethod::stratified) {
            throw ValidationError("AnalysisConfig: choose the stratified analysis via "
                                  "weight mode, not the estimator field");
        }
        if (weight_mode == WeightMode::analytic && target_shares.empty()) {
            throw ValidationError("AnalysisConfig: analytic weights need target shares");
        }
        if ((weight_mode == WeightMode::propensity || weight_mode == WeightMode::stratified) &&
            covariates.empty()) {
            throw ValidationError("AnalysisConfig: propensity weights need a covariate list");
        }
        if (weight_mode == WeightMode::stratified && n_strata < 1) {
            throw ValidationError("AnalysisConfig: need at least one stratum");
        }
        if (trim_bounds && !(trim_bounds->first > 0.0 && trim_bounds->second > trim_bounds->first)) {
            throw ValidationError("AnalysisConfig: trim bounds must satisfy 0 < lower < upper");
        }
        if (current.mu_tc.has_value() != current.se_tc.has_value()) {
            throw ValidationError("AnalysisConfig: mu_tc and se_tc must be given together");
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json weights{{"mode", to_string(weight_mode)},
                               {"covariate", share_covariate},
                               {"interactions", propensity_interactions},
                               {"strata", n_strata}};
        auto shares_to_json = [](const std::map<double, double>& m) {
            nlohmann::json j = nlohmann::json::object();
            for (const auto& [k, v] : m) {
                std::ostringstream key;
                key << k;
                j[key.str()] = v;
            }
            return j;
        };
        weights["target_shares"] = shares_to_json(target_shares);
        weights["source_shares"] =
            source_shares ? shares_to_json(*source_shares) : nlohmann::json();
        weights["covariates"] = covariates;
        weights["trim"] = trim_bounds
                              ? nlohmann::json::array({trim_bounds->first, trim_bounds->second})
                              : nlohmann::json();
        nlohmann::json current_json{{"alpha", current.alpha}};
        current_json["mu_tc"] = current.mu_tc ? nlohmann::json(*current.mu_tc) : nlohmann::json();
        current_json["se_tc"] = current.se_tc ? nlohmann::json(*current.se_tc) : nlohmann::json();
        return nlohmann::json{{"input", input_path},
                              {"metric", to_string(metric)},
                              {"estimator", to_string(estimator)},
                              {"weights", weights},
                              {"bootstrap",
                               {{"replicates", bootstrap.replicates},
                                {"seed", bootstrap.seed},
                                {"level", bootstrap.level},
                                {"threads", bootstrap.threads}}},
                              {"current_trial", current_json}};
    }

    static AnalysisConfig from_json(const nlohmann::json& j) {
        AnalysisConfig cfg;
        auto parse_shares = [](const nlohmann::json& obj) {
            std::map<double, double> m;
            for (const auto& [k, v] : obj.items()) m[std::stod(k)] = v.get<double>();
            return m;
        };
        if (j.contains("input")) cfg.input_path = j["input"].get<std::string>();
        if (j.contains("metric")) {
            const auto m = j["metric"].get<std::string>();
            if (m == "log_odds_ratio") {
                cfg.metric = Contrast::log_odds_ratio;
            } else if (m == "risk_difference") {
                cfg.metric = Contrast::difference;
            } else {
                throw ValidationError("config: unknown metric '" + m + "'");
            }
        }
        if (j.contains("estimator")) {
            const auto e = j["estimator"].get<std::string>();
            if (e == "parametric") {
                cfg.estimator = CalibrationMethod::parametric;
            } else if (e == "nonparametric") {
                cfg.estimator = CalibrationMethod::nonparametric;
            } else {
                throw ValidationError("config: unknown estimator '" + e + "'");
            }
        }
        if (j.contains("weights")) {
            const auto& w = j["weights"];
            if (w.contains("mode")) {
                const auto m = w["mode"].get<std::string>();
                if (m == "analytic") {
                    cfg.weight_mode = WeightMode::analytic;
                } else if (m == "propensity") {
                    cfg.weight_mode = WeightMode::propensity;
                } else if (m == "stratified") {
                    cfg.weight_mode = WeightMode::stratified;
                } else {
                    throw ValidationError("config: unknown weight mode '" + m + "'");
                }
            }
            if (w.contains("covariate")) cfg.share_covariate = w["covariate"].get<std::string>();
            if (w.contains("target_shares") && !w["target_shares"].is_null()) {
                cfg.target_shares = parse_shares(w["target_shares"]);
            }
            if (w.contains("source_shares") && !w["source_shares"].is_null()) {
                cfg.source_shares = parse_shares(w["source_shares"]);
            }
            if (w.contains("covariates") && !w["covariates"].is_null()) {
                cfg.covariates = w["covariates"].get<std::vector<std::string>>();
            }
            if (w.contains("interactions") && !w["interactions"].is_null()) {
                cfg.propensity_interactions = w["interactions"].get<bool>();
            }
            if (w.contains("strata") && !w["strata"].is_null()) {
                cfg.n_strata = w["strata"].get<int>();
            }
            if (w.contains("trim") && !w["trim"].is_null()) {
                const auto t = w["trim"].get<std::vector<double>>();
                if (t.size() != 2) throw ValidationError("config: trim must be [lower, upper]");
                cfg.trim_bounds = std::make_pair(t[0], t[1]);
            }
        }
        if (j.contains("bootstrap")) {
            const auto& b = j["bootstrap"];
            if (b.contains("replicates")) cfg.bootstrap.replicates = b["replicates"].get<int>();
            if (b.contains("seed")) cfg.bootstrap.seed = b["seed"].get<std::uint64_t>();
            if (b.contains("level")) cfg.bootstrap.level = b["level"].get<double>();
            if (b.contains("threads")) cfg.bootstrap.threads = b["threads"].get<int>();
        }
        if (j.contains("current_trial")) {
            const auto& c = j["current_trial"];
            if (c.contains("mu_tc") && !c["mu_tc"].is_null()) cfg.current.mu_tc = c["mu_tc"].get<double>();
            if (c.contains("se_tc") && !c["se_tc"].is_null()) cfg.current.se_tc = c["se_tc"].get<double>();
            if (c.contains("alpha")) cfg.current.alpha = c["alpha"].get<double>();
        }
        return cfg;
    }
};

namespace detail {

inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    std::ostringstream oss;
    oss << std::hex << h;
    return oss.str();
}

template <typename F>
auto with_stage(const std::string& stage, F&& f) {
    try {
        return f();
    } catch (const ValidationError& e) {
        throw ValidationError(stage + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(stage + ": " + e.what());
    }
}

inline std::map<double, double> empirical_shares(const std::vector<double>& values) {
    std::map<double, double> shares;
    for (const double v : values) shares[v] += 1.0;
    for (auto& [k, v] : shares) v /= static_cast<double>(values.size());
    return shares;
}

/// Historical-ordered analytic weights; each arm's source shares default to
/// that arm's own empirical category shares.
inline WeightSet analytic_weight_vector(const PooledDataset& pool, const AnalysisConfig& cfg,
                                        std::map<int, std::map<double, double>>* sources_out) {
    const auto hist = pool.indices(Trial::historical);
    Eigen::VectorXd w(static_cast<Eigen::Index>(hist.size()));
    for (const int arm : {0, 1}) {
        const auto idx = pool.indices(Trial::historical, arm);
        if (idx.empty()) continue;
        const auto cats = pool.covariate_values(idx, cfg.share_covariate);
        const auto source = cfg.source_shares ? *cfg.source_shares : empirical_shares(cats);
        if (sources_out) (*sources_out)[arm] = source;
        const WeightSet arm_w = analytic_weights(cats, cfg.target_shares, source);
        std::size_t cursor = 0;
        for (std::size_t k = 0; k < hist.size(); ++k) {
            if (pool.record(hist[k]).arm == arm) {
                w[static_cast<Eigen::Index>(k)] = arm_w[static_cast<Eigen::Index>(cursor++)];
            }
        }
    }
    return WeightSet(std::move(w), WeightProvenance::analytic_ratio);
}

inline nlohmann::json to_json(const CalibrationResult& r) {
    return nlohmann::json{{"estimate", r.estimate},
                          {"se", r.std_error},
                          {"method", to_string(r.method)},
                          {"variance_source", to_string(r.variance_source)},
                          {"metric",
                           {{"transform", to_string(r.metric.transform)},
                            {"contrast", to_string(r.metric.contrast)}}},
                          {"n_effective", r.n_effective}};
}

inline nlohmann::json to_json(const NiTestResult& r) {
    nlohmann::json j{{"statistic", r.statistic}, {"p_value", r.p_value},
                     {"method", to_string(r.method)}, {"reject", r.reject},
                     {"alpha", r.alpha},           {"z_alpha", r.z_alpha}};
    if (r.variance_scaled_statistic) {
        j["variance_scaled_statistic"] = *r.variance_scaled_statistic;
    }
    return j;
}

inline nlohmann::json weight_summary(const WeightSet& w) {
    nlohmann::json j{{"provenance", to_string(w.provenance())},
                     {"count", w.size()},
                     {"min", w.min()},
                     {"max", w.max()},
                     {"mean", w.mean()},
                     {"effective_sample_size", w.effective_sample_size()}};
    if (w.trim_bounds()) {
        j["trim_bounds"] = nlohmann::json::array({w.trim_bounds()->first, w.trim_bounds()->second});
    }
    return j;
}

struct ArmPair {
    CalibrationResult arm0, arm1, effect;
};

inline ArmPair compute_effect(const PooledDataset& pool, Trial trial, glm::Family family,
                              const WeightSet& weights_over_trial, Contrast metric,
                              CalibrationMethod estimator) {
    ArmPair out;
    for (const int arm : {0, 1}) {
        const auto idx = pool.indices(trial, arm);
        if (idx.empty()) {
            throw ValidationError(std::string(to_string(trial)) + " trial has no arm-" +
                                  std::to_string(arm) + " subjects");
        }
        const Eigen::VectorXd y = pool.outcomes(idx);
        WeightSet w_arm = [&] {
            if (trial == Trial::historical) return slice_historical_weights(weights_over_trial, pool, arm);
            return WeightSet::unit(y.size());
        }();
        CalibrationResult r =
            estimator == CalibrationMethod::nonparametric
                ? calibrate_arm_nonparametric(y, w_arm, ArmTransform::identity)
                : calibrate_arm_parametric(y, family, w_arm, ArmTransform::identity);
        (arm == 0 ? out.arm0 : out.arm1) = r;
    }
    out.effect = calibrated_effect(out.arm0, out.arm1, metric);
    return out;
}

/// Effect (arm 0 vs arm 1) within one stratum of one trial, unweighted.
inline std::pair<double, double> stratum_effect(const PooledDataset& pool, Trial trial,
                                                const std::vector<int>& stratum, int l,
                                                glm::Family family, Contrast metric) {
    std::array<CalibrationResult, 2> arms;
    for (const int arm : {0, 1}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (pool.record(i).trial == trial && pool.record(i).arm == arm && stratum[i] == l) {
                idx.push_back(i);
            }
        }
        if (idx.empty()) {
            throw DegenerateStratificationError(
                "stratum " + std::to_string(l + 1) + " of the " + to_string(trial) +
                " trial has no arm-" + std::to_string(arm) + " subjects");
        }
        const Eigen::VectorXd y = pool.outcomes(idx);
        arms[static_cast<std::size_t>(arm)] = calibrate_arm_parametric(
            y, family, WeightSet::unit(y.size()), ArmTransform::identity);
    }
    const auto eff = calibrated_effect(arms[0], arms[1], metric);
    return {eff.estimate, eff.std_error * eff.std_error};
}

}  // namespace detail

/// Runs the whole analysis on an already-loaded dataset and returns the JSON
/// report. Throws on any failure; a report is only produced when every stage
/// succeeded. Identical data, config and seed give byte-identical output.
inline nlohmann::json run_pipeline(const AnalysisConfig& cfg, const PooledDataset& data) {
    cfg.validate();

    const IngestSummary summary = summarize(data);
    const glm::Family family =
        summary.binary_outcome ? glm::Family::bernoulli : glm::Family::gaussian;
    if (cfg.metric == Contrast::log_odds_ratio && family != glm::Family::bernoulli) {
        throw ValidationError("pipeline: log-odds-ratio metric requires 0/1 outcomes");
    }
    if (data.count(Trial::historical) == 0) {
        throw ValidationError("pipeline: no historical subjects in the input");
    }

    nlohmann::json report;
    report["schema_version"] = report_schema_version;

    nlohmann::json data_json{{"rows", summary.rows}, {"covariates", summary.covariate_names}};
    for (const auto& [key, n] : summary.counts) {
        data_json["counts"][key] = n;
        data_json["events"][key] = summary.outcome_sums.at(key);
    }
    report["data"] = data_json;

    // --- weights ---------------------------------------------------------
    std::optional<PropensityModel> model;
    std::map<int, std::map<double, double>> analytic_sources;
    WeightSet weights = detail::with_stage("weights", [&]() -> WeightSet {
        switch (cfg.weight_mode) {
            case WeightMode::analytic:
                return detail::analytic_weight_vector(data, cfg, &analytic_sources);
            case WeightMode::propensity:
            case WeightMode::stratified: {
                model = fit_propensity(data, cfg.covariates, cfg.propensity_interactions);
                return propensity_weights(*model, data);
            }
        }
        throw ValidationError("unknown weight mode");
    });
    if (cfg.trim_bounds) {
        weights = detail::with_stage("weights", [&] {
            return trim_weights(weights, cfg.trim_bounds->first, cfg.trim_bounds->second);
        });
    }
    report["weights"] = detail::weight_summary(weights);

    if (model) {
        nlohmann::json pj;
        const auto& fit = model->fit();
        for (std::size_t j = 0; j < model->design_labels().size(); ++j) {
            const auto idx = static_cast<Eigen::Index>(j);
            pj["coefficients"][model->design_labels()[j]] = fit.coefficients[idx];
            pj["coefficient_se"][model->design_labels()[j]] =
                std::sqrt(fit.naive_covariance(idx, idx));
        }
        pj["converged"] = fit.converged;
        pj["iterations"] = fit.iterations;
        pj["warnings"] = model->warnings();
        report["propensity"] = pj;
    }
    if (cfg.weight_mode == WeightMode::analytic) {
        nlohmann::json sources = nlohmann::json::object();
        for (const auto& [arm, shares] : analytic_sources) {
            for (const auto& [cat, share] : shares) {
                std::ostringstream key;
                key << cat;
                sources["arm" + std::to_string(arm)][key.str()] = share;
            }
        }
        report["weights"]["source_shares"] = sources;
    }

    // --- calibration -----------------------------------------------------
    const auto uncalibrated = detail::with_stage("calibrate", [&] {
        return detail::compute_effect(data, Trial::historical, family,
                                      WeightSet::unit(static_cast<Eigen::Index>(
                                          data.count(Trial::historical))),
                                      cfg.metric, cfg.estimator);
    });

    nlohmann::json arms_json;
    nlohmann::json effect_json;
    CalibrationResult calibrated_for_ni;
    std::optional<StrataAssignment> strata;

    if (cfg.weight_mode == WeightMode::stratified) {
        detail::with_stage("calibrate", [&] {
            strata = stratify(*model, data, cfg.n_strata);
            std::vector<double> effects, variances;
            for (int l = 0; l < strata->n_strata; ++l) {
                const auto [est, var] = detail::stratum_effect(data, Trial::historical,
                                                               strata->stratum, l, family,
                                                               cfg.metric);
                effects.push_back(est);
                variances.push_back(var);
            }
            const auto combined =
                combine_strata(effects, variances, strata->share_current);
            calibrated_for_ni.estimate = combined.combined_estimate;
            calibrated_for_ni.std_error = std::sqrt(combined.combined_variance);
            calibrated_for_ni.method = CalibrationMethod::stratified;
            calibrated_for_ni.variance_source = VarianceSource::closed_form;
            calibrated_for_ni.metric = EffectMetric{ArmTransform::identity, cfg.metric};
            calibrated_for_ni.n_effective =
                static_cast<double>(data.count(Trial::historical));

            nlohmann::json strata_json = nlohmann::json::array();
            for (int l = 0; l < strata->n_strata; ++l) {
                const auto lu = static_cast<std::size_t>(l);
                strata_json.push_back({{"stratum", l + 1},
                                       {"effect", combined.effects[lu]},
                                       {"variance", combined.variances[lu]},
                                       {"share_historical", strata->share_historical[lu]},
                                       {"share_current", strata->share_current[lu]},
                                       {"n_historical", strata->count_historical[lu]},
                                       {"n_current", strata->count_current[lu]}});
            }
            effect_json["strata"] = strata_json;
            return 0;
        });
    } else {
        const auto calibrated = detail::with_stage("calibrate", [&] {
            return detail::compute_effect(data, Trial::historical, family, weights, cfg.metric,
                                          cfg.estimator);
        });
        arms_json["calibrated"] = {{"arm0", detail::to_json(calibrated.arm0)},
                                   {"arm1", detail::to_json(calibrated.arm1)}};
        calibrated_for_ni = calibrated.effect;
    }
    arms_json["uncalibrated"] = {{"arm0", detail::to_json(uncalibrated.arm0)},
                                 {"arm1", detail::to_json(uncalibrated.arm1)}};
    report["arms"] = arms_json;

    // --- bootstrap -------------------------------------------------------
    std::optional<BootstrapResult> boot;
    if (cfg.bootstrap.replicates > 0) {
        detail::with_stage("bootstrap", [&] {
            const auto estimator = [&](const PooledDataset& sample) {
                WeightSet w = [&]() -> WeightSet {
                    switch (cfg.weight_mode) {
                        case WeightMode::analytic: {
                            // shares stay fixed at their original values, so
                            // each subject keeps the weight of its category
                            const auto hist = sample.indices(Trial::historical);
                            Eigen::VectorXd w_all(static_cast<Eigen::Index>(hist.size()));
                            for (const int arm : {0, 1}) {
                                const auto idx = sample.indices(Trial::historical, arm);
                                if (idx.empty()) continue;
                                const auto cats =
                                    sample.covariate_values(idx, cfg.share_covariate);
                                const auto& source = cfg.source_shares
                                                         ? *cfg.source_shares
                                                         : analytic_sources.at(arm);
                                const WeightSet arm_w =
                                    analytic_weights(cats, cfg.target_shares, source);
                                std::size_t cursor = 0;
                                for (std::size_t k = 0; k < hist.size(); ++k) {
                                    if (sample.record(hist[k]).arm == arm) {
                                        w_all[static_cast<Eigen::Index>(k)] =
                                            arm_w[static_cast<Eigen::Index>(cursor++)];
                                    }
                                }
                            }
                            return WeightSet(std::move(w_all), WeightProvenance::analytic_ratio);
                        }
                        case WeightMode::propensity:
                        case WeightMode::stratified: {
                            // refit inside the replicate: weight variability
                            // propagates into the bootstrap SE
                            const auto m = fit_propensity(sample, cfg.covariates,
                                                          cfg.propensity_interactions);
                            return propensity_weights(m, sample);
                        }
                    }
                    throw ValidationError("unknown weight mode");
                }();
                if (cfg.trim_bounds) {
                    w = trim_weights(w, cfg.trim_bounds->first, cfg.trim_bounds->second);
                }
                if (cfg.weight_mode == WeightMode::stratified) {
                    const auto m =
                        fit_propensity(sample, cfg.covariates, cfg.propensity_interactions);
                    const auto s = stratify(m, sample, cfg.n_strata);
                    std::vector<double> effects, variances;
                    for (int l = 0; l < s.n_strata; ++l) {
                        const auto [est, var] = detail::stratum_effect(
                            sample, Trial::historical, s.stratum, l, family, cfg.metric);
                        effects.push_back(est);
                        variances.push_back(var);
                    }
                    return combine_strata(effects, variances, s.share_current).combined_estimate;
                }
                return detail::compute_effect(sample, Trial::historical, family, w, cfg.metric,
                                              cfg.estimator)
                    .effect.estimate;
            };
            BootstrapOptions opts;
            opts.replicates = cfg.bootstrap.replicates;
            opts.seed = cfg.bootstrap.seed;
            opts.level = cfg.bootstrap.level;
            opts.threads = cfg.bootstrap.threads;
            boot = bootstrap_ci(data, estimator, opts);
            return 0;
        });
    }

    effect_json["uncalibrated"] = detail::to_json(uncalibrated.effect);
    nlohmann::json cal_json = detail::to_json(calibrated_for_ni);
    if (boot) {
        cal_json["model_se"] = calibrated_for_ni.std_error;
        cal_json["se"] = boot->std_error;
        cal_json["variance_source"] = "bootstrap";
        cal_json["B"] = boot->replicates;
        cal_json["seed"] = boot->seed;
        cal_json["bootstrap"] = {{"se", boot->std_error},
                                 {"lower", boot->lower},
                                 {"upper", boot->upper},
                                 {"replicates", boot->replicates},
                                 {"failures", boot->failures},
                                 {"seed", boot->seed},
                                 {"level", cfg.bootstrap.level}};
    }
    effect_json["calibrated"] = cal_json;
    report["effect"] = effect_json;

    // --- noninferiority --------------------------------------------------
    std::optional<double> mu_tc = cfg.current.mu_tc;
    std::optional<double> se_tc = cfg.current.se_tc;
    const bool current_two_arms = data.count(Trial::current) > 0 &&
                                  !data.indices(Trial::current, 0).empty() &&
                                  !data.indices(Trial::current, 1).empty();
    if (!mu_tc && current_two_arms) {
        detail::with_stage("ni-test", [&] {
            const auto tc = detail::compute_effect(
                data, Trial::current, family,
                WeightSet::unit(static_cast<Eigen::Index>(data.count(Trial::current))),
                cfg.metric, cfg.estimator);
            mu_tc = tc.effect.estimate;
            se_tc = tc.effect.std_error;
            report["current_trial_effect"] = detail::to_json(tc.effect);
            return 0;
        });
    }
    if (mu_tc && se_tc) {
        detail::with_stage("ni-test", [&] {
            const double se_cp = boot ? boot->std_error : calibrated_for_ni.std_error;
            NiInputs adjusted{*mu_tc, *se_tc, calibrated_for_ni.estimate, se_cp,
                              cfg.current.alpha};
            NiInputs unadjusted{*mu_tc, *se_tc, uncalibrated.effect.estimate,
                                uncalibrated.effect.std_error, cfg.current.alpha};
            report["ni_tests"]["calibrated"] = {
                {"synthesis", detail::to_json(synthesis_test(adjusted))},
                {"fixed_margin", detail::to_json(fixed_margin_test(adjusted))}};
            report["ni_tests"]["uncalibrated"] = {
                {"synthesis", detail::to_json(synthesis_test(unadjusted))},
                {"fixed_margin", detail::to_json(fixed_margin_test(unadjusted))}};
            if (strata && current_two_arms) {
                std::vector<StratumComparison> comparisons;
                for (int l = 0; l < strata->n_strata; ++l) {
                    const auto [gamma, var_gamma] = detail::stratum_effect(
                        data, Trial::current, strata->stratum, l, family, cfg.metric);
                    const auto [beta, var_beta] = detail::stratum_effect(
                        data, Trial::historical, strata->stratum, l, family, cfg.metric);
                    comparisons.push_back({gamma, var_gamma, beta, var_beta,
                                           strata->share_current[static_cast<std::size_t>(l)]});
                }
                report["ni_tests"]["stratified"] = detail::to_json(
                    stratified_test(comparisons, cfg.current.alpha));
            }
            return 0;
        });
    }

    // --- provenance ------------------------------------------------------
    const nlohmann::json config_echo = cfg.to_json();
    report["provenance"] = {{"version", version},
                            {"config", config_echo},
                            {"config_hash", detail::fnv1a_hex(config_echo.dump())},
                            {"seed", cfg.bootstrap.seed},
                            {"rng", Rng::algorithm}};
    return report;
}

/// Convenience overload: loads the CSV named by the config first.
inline nlohmann::json run_pipeline(const AnalysisConfig& cfg) {
    cfg.validate();
    const auto data = detail::with_stage("ingest", [&] {
        return read_csv(cfg.input_path, cfg.metric == Contrast::log_odds_ratio
                                            ? OutcomeKind::binary
                                            : OutcomeKind::auto_detect);
    });
    return run_pipeline(cfg, data);
}

}  // namespace recalib
