#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "recalib/calibration.hpp"
#include "recalib/data.hpp"
#include "recalib/error.hpp"
#include "recalib/parallel.hpp"
#include "recalib/propensity.hpp"
#include "recalib/rng.hpp"
#include "recalib/stats.hpp"

namespace recalib {

/// Event probabilities of one arm, split by BPD stratum.
struct StratumRates {
    double bpd = 0.0;
    double non_bpd = 0.0;
};

/// Two-trial synthetic pool: a historical trial (control arm 0 vs active
/// arm 1) and a current trial (active control arm 0 vs experimental arm 1).
/// Covariates are BPD plus three independent Bernoulli noise covariates
/// whose rates differ between trials; outcomes depend on arm and BPD only,
/// so target-population truths are available in closed form.
struct SimConfig {
    int n_historical = 1502;
    int n_current = 6635;

    double bpd_prevalence_historical = 266.0 / 500.0;
    double bpd_prevalence_current = 0.22;

    std::array<double, 3> covariate_rates_historical{0.4, 0.6, 0.5};
    std::array<double, 3> covariate_rates_current{0.6, 0.5, 0.4};

    // Share of each trial assigned to arm 1 (the active arm of the
    // historical trial, the experimental arm of the current trial).
    double arm1_fraction_historical = 1002.0 / 1502.0;
    double arm1_fraction_current = 3305.0 / 6635.0;

    // event_rates_*[arm] gives that arm's event probabilities by stratum
    std::array<StratumRates, 2> event_rates_historical{{{34.0 / 266.0, 19.0 / 234.0},
                                                        {39.0 / 496.0, 9.0 / 506.0}}};
    std::array<StratumRates, 2> event_rates_current{{{28.0 / 723.0, 34.0 / 2607.0},
                                                     {22.0 / 722.0, 24.0 / 2583.0}}};

    std::uint64_t seed = 0;

    void validate() const {
        if (n_historical < 1 || n_current < 1) {
            throw ValidationError("SimConfig: trial sizes must be at least 1");
        }
        auto check_prob = [](double p, const char* what) {
            if (!(p >= 0.0 && p <= 1.0)) {
                throw ValidationError(std::string("SimConfig: ") + what +
                                      " must lie in [0, 1], got " + std::to_string(p));
            }
        };
        check_prob(bpd_prevalence_historical, "historical BPD prevalence");
        check_prob(bpd_prevalence_current, "current BPD prevalence");
        check_prob(arm1_fraction_historical, "historical arm-1 fraction");
        check_prob(arm1_fraction_current, "current arm-1 fraction");
        for (const double r : covariate_rates_historical) check_prob(r, "covariate rate");
        for (const double r : covariate_rates_current) check_prob(r, "covariate rate");
        for (const auto& rates : {event_rates_historical, event_rates_current}) {
            for (const auto& s : rates) {
                check_prob(s.bpd, "event rate");
                check_prob(s.non_bpd, "event rate");
            }
        }
    }
};

namespace detail {

inline PooledDataset generate_pool_with(const SimConfig& cfg, Rng& rng) {
    std::vector<SubjectRecord> records;
    records.reserve(static_cast<std::size_t>(cfg.n_historical + cfg.n_current));

    auto emit_trial = [&](Trial trial, int n, double bpd_prev,
                          const std::array<double, 3>& cov_rates, double arm1_fraction,
                          const std::array<StratumRates, 2>& rates, const char* prefix) {
        const int n_arm1 = static_cast<int>(std::lround(arm1_fraction * n));
        for (int i = 0; i < n; ++i) {
            SubjectRecord r;
            r.id = std::string(prefix) + std::to_string(i + 1);
            r.trial = trial;
            r.arm = i < n - n_arm1 ? 0 : 1;
            const bool bpd = rng.bernoulli(bpd_prev);
            r.covariates = {bpd ? 1.0 : 0.0, rng.bernoulli(cov_rates[0]) ? 1.0 : 0.0,
                            rng.bernoulli(cov_rates[1]) ? 1.0 : 0.0,
                            rng.bernoulli(cov_rates[2]) ? 1.0 : 0.0};
            const auto& arm_rates = rates[static_cast<std::size_t>(r.arm)];
            r.outcome = rng.bernoulli(bpd ? arm_rates.bpd : arm_rates.non_bpd) ? 1.0 : 0.0;
            records.push_back(std::move(r));
        }
    };

    emit_trial(Trial::historical, cfg.n_historical, cfg.bpd_prevalence_historical,
               cfg.covariate_rates_historical, cfg.arm1_fraction_historical,
               cfg.event_rates_historical, "H");
    emit_trial(Trial::current, cfg.n_current, cfg.bpd_prevalence_current,
               cfg.covariate_rates_current, cfg.arm1_fraction_current, cfg.event_rates_current,
               "C");
    return PooledDataset(std::move(records), {"bpd", "x1", "x2", "x3"});
}

}  // namespace detail

/// Deterministic given (config, seed): the same configuration always yields
/// bitwise-identical data.
inline PooledDataset generate_pool(const SimConfig& cfg) {
    cfg.validate();
    Rng rng = Rng::substream(cfg.seed, 0);
    return detail::generate_pool_with(cfg, rng);
}

/// Mean event rate of a historical arm under the given BPD mix.
inline double mixture_arm_mean(const SimConfig& cfg, int arm, double bpd_share) {
    const auto& r = cfg.event_rates_historical[static_cast<std::size_t>(arm)];
    return bpd_share * r.bpd + (1.0 - bpd_share) * r.non_bpd;
}

/// Closed-form log-odds ratio (arm 0 vs arm 1) of the historical treatment
/// contrast in a population with the given BPD share.
inline double mixture_log_odds_ratio(const SimConfig& cfg, double bpd_share) {
    return stats::logit(mixture_arm_mean(cfg, 0, bpd_share)) -
           stats::logit(mixture_arm_mean(cfg, 1, bpd_share));
}

enum class WeightMode { analytic, propensity, stratified };

inline const char* to_string(WeightMode m) {
    switch (m) {
        case WeightMode::analytic: return "analytic";
        case WeightMode::propensity: return "propensity";
        case WeightMode::stratified: return "stratified";
    }
    return "unknown";
}

struct ReplicationSpec {
    std::vector<std::string> covariates{"bpd", "x1", "x2", "x3"};
    bool interactions = false;
    int threads = 1;
    double level = 0.95;  // coverage level for the arm-mean intervals
};

struct ReplicationSummary {
    int replications = 0;
    int failures = 0;
    double mean_calibrated = 0.0;
    double sd_calibrated = 0.0;
    double mean_calibrated_se = 0.0;
    double mean_uncalibrated = 0.0;
    double sd_uncalibrated = 0.0;
    double mean_uncalibrated_se = 0.0;
    // Empirical coverage of sandwich-based intervals for the calibrated arm
    // means (identity scale) against the closed-form mixture truths.
    double coverage_arm0 = 0.0;
    double coverage_arm1 = 0.0;
    double true_calibrated = 0.0;
    double true_uncalibrated = 0.0;
    double true_arm0 = 0.0;
    double true_arm1 = 0.0;
    std::string rng_algorithm = Rng::algorithm;
};

/// Repeatedly generates pools, runs the propensity-weighted calibration of
/// the historical log-odds ratio next to its unweighted counterpart, and
/// summarizes both against the closed-form truths. Replicate i draws its
/// pool from substream (seed, i); execution order and thread count do not
/// change the result. Per-replicate estimation failures are counted and
/// excluded rather than aborting the study.
inline ReplicationSummary run_replication_study(const SimConfig& cfg, int replications,
                                                const ReplicationSpec& spec = {}) {
    cfg.validate();
    if (replications < 1) throw ValidationError("run_replication_study: need at least 1 replication");

    struct Row {
        double calibrated = 0.0, calibrated_se = 0.0;
        double uncalibrated = 0.0, uncalibrated_se = 0.0;
        bool cover0 = false, cover1 = false;
        bool ok = false;
    };
    std::vector<Row> rows(static_cast<std::size_t>(replications));

    const double true_arm0 = mixture_arm_mean(cfg, 0, cfg.bpd_prevalence_current);
    const double true_arm1 = mixture_arm_mean(cfg, 1, cfg.bpd_prevalence_current);
    const double z = stats::normal_quantile(0.5 + spec.level / 2.0);

    parallel_for(replications, spec.threads, [&](int i) {
        Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(i));
        const PooledDataset pool = detail::generate_pool_with(cfg, rng);
        Row& row = rows[static_cast<std::size_t>(i)];
        try {
            const auto model = fit_propensity(pool, spec.covariates, spec.interactions);
            const auto weights = propensity_weights(model, pool);

            std::array<CalibrationResult, 2> cal, uncal;
            for (const int arm : {0, 1}) {
                const auto idx = pool.indices(Trial::historical, arm);
                const Eigen::VectorXd y = pool.outcomes(idx);
                const auto w_arm = slice_historical_weights(weights, pool, arm);
                cal[static_cast<std::size_t>(arm)] = calibrate_arm_parametric(
                    y, glm::Family::bernoulli, w_arm, ArmTransform::identity);
                uncal[static_cast<std::size_t>(arm)] = calibrate_arm_parametric(
                    y, glm::Family::bernoulli, WeightSet::unit(y.size()), ArmTransform::identity);
            }
            const auto eff = calibrated_effect(cal[0], cal[1], Contrast::log_odds_ratio);
            const auto eff_u = calibrated_effect(uncal[0], uncal[1], Contrast::log_odds_ratio);
            row.calibrated = eff.estimate;
            row.calibrated_se = eff.std_error;
            row.uncalibrated = eff_u.estimate;
            row.uncalibrated_se = eff_u.std_error;
            row.cover0 = std::abs(cal[0].estimate - true_arm0) <= z * cal[0].std_error;
            row.cover1 = std::abs(cal[1].estimate - true_arm1) <= z * cal[1].std_error;
            row.ok = true;
        } catch (const Error&) {
            row.ok = false;
        }
    });

    std::vector<double> cal, cal_se, uncal, uncal_se;
    int covered0 = 0, covered1 = 0, ok_count = 0;
    for (const auto& row : rows) {
        if (!row.ok) continue;
        ++ok_count;
        cal.push_back(row.calibrated);
        cal_se.push_back(row.calibrated_se);
        uncal.push_back(row.uncalibrated);
        uncal_se.push_back(row.uncalibrated_se);
        covered0 += row.cover0 ? 1 : 0;
        covered1 += row.cover1 ? 1 : 0;
    }
    if (ok_count == 0) {
        throw NumericalError("run_replication_study: every replication failed");
    }

    ReplicationSummary out;
    out.replications = replications;
    out.failures = replications - ok_count;
    out.mean_calibrated = stats::mean(cal);
    out.sd_calibrated = stats::sample_sd(cal);
    out.mean_calibrated_se = stats::mean(cal_se);
    out.mean_uncalibrated = stats::mean(uncal);
    out.sd_uncalibrated = stats::sample_sd(uncal);
    out.mean_uncalibrated_se = stats::mean(uncal_se);
    out.coverage_arm0 = static_cast<double>(covered0) / ok_count;
    out.coverage_arm1 = static_cast<double>(covered1) / ok_count;
    out.true_calibrated = mixture_log_odds_ratio(cfg, cfg.bpd_prevalence_current);
    out.true_uncalibrated = mixture_log_odds_ratio(cfg, cfg.bpd_prevalence_historical);
    out.true_arm0 = true_arm0;
    out.true_arm1 = true_arm1;
    return out;
}

}  // namespace recalib
