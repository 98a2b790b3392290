#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "recalib/error.hpp"
#include "recalib/glm.hpp"
#include "recalib/stats.hpp"
#include "recalib/weights.hpp"

namespace recalib {

/// Arm-level transform nu applied to the mean response.
enum class ArmTransform { identity, logit };

/// Contrast pi combining two transformed arm means into an effect size.
enum class Contrast { difference, log_odds_ratio };

inline const char* to_string(ArmTransform t) {
    return t == ArmTransform::identity ? "identity" : "logit";
}

inline const char* to_string(Contrast c) {
    return c == Contrast::difference ? "difference" : "log_odds_ratio";
}

struct EffectMetric {
    ArmTransform transform = ArmTransform::identity;
    Contrast contrast = Contrast::difference;
};

enum class CalibrationMethod { parametric, nonparametric, stratified };
enum class VarianceSource { sandwich, bootstrap, closed_form };

inline const char* to_string(CalibrationMethod m) {
    switch (m) {
        case CalibrationMethod::parametric: return "parametric";
        case CalibrationMethod::nonparametric: return "nonparametric";
        case CalibrationMethod::stratified: return "stratified";
    }
    return "unknown";
}

inline const char* to_string(VarianceSource v) {
    switch (v) {
        case VarianceSource::sandwich: return "sandwich";
        case VarianceSource::bootstrap: return "bootstrap";
        case VarianceSource::closed_form: return "closed_form";
    }
    return "unknown";
}

/// A calibrated point estimate with its uncertainty. Used for both arm-level
/// means and arm contrasts; `metric.contrast` is meaningful for the latter.
struct CalibrationResult {
    double estimate = 0.0;
    double std_error = 0.0;
    CalibrationMethod method = CalibrationMethod::parametric;
    VarianceSource variance_source = VarianceSource::sandwich;
    EffectMetric metric;
    double n_effective = 0.0;

    void validate() const {
        if (!std::isfinite(estimate)) throw NumericalError("CalibrationResult: estimate not finite");
        // zero only in degenerate-but-legitimate cases such as constant outcomes
        if (!(std_error >= 0.0) || !std::isfinite(std_error)) {
            throw NumericalError("CalibrationResult: standard error must be finite and nonnegative");
        }
    }
};

/// Calibrated arm mean from an intercept-only weighted GLM fit, with
/// robust (sandwich) uncertainty. For bernoulli outcomes the model lives on
/// the logit scale; the delta method maps the variance to the probability
/// scale when nu = identity.
inline CalibrationResult calibrate_arm_parametric(const Eigen::VectorXd& y, glm::Family family,
                                                  const WeightSet& w, ArmTransform nu,
                                                  const glm::SolverOptions& opts = {}) {
    if (y.size() == 0) throw ValidationError("calibrate_arm_parametric: empty arm");
    if (!(w.sum() > 0.0)) throw ValidationError("calibrate_arm_parametric: weights sum to zero");
    if (nu == ArmTransform::logit && family != glm::Family::bernoulli) {
        throw ValidationError("calibrate_arm_parametric: logit transform requires bernoulli outcomes");
    }
    const glm::GlmSpec spec(family, family == glm::Family::bernoulli ? glm::Link::logit
                                                                     : glm::Link::identity);
    const auto design = glm::DesignMatrix::intercept_only(y.size());
    const auto fit = glm::fit_weighted_mle(spec, y, design, w, opts);
    if (!fit.converged) {
        throw ConvergenceError("calibrate_arm_parametric: fit did not converge after " +
                               std::to_string(fit.iterations) + " iterations");
    }
    const double alpha = fit.coefficients[0];
    const double var_alpha = fit.model_covariance(0, 0);

    CalibrationResult out;
    out.method = CalibrationMethod::parametric;
    out.variance_source = VarianceSource::sandwich;
    out.metric.transform = nu;
    out.n_effective = w.effective_sample_size();
    if (family == glm::Family::bernoulli) {
        const double p = stats::inverse_logit(alpha);
        if (nu == ArmTransform::identity) {
            out.estimate = p;
            out.std_error = std::sqrt(var_alpha) * p * (1.0 - p);
        } else {
            out.estimate = alpha;
            out.std_error = std::sqrt(var_alpha);
        }
    } else {
        out.estimate = alpha;
        out.std_error = std::sqrt(var_alpha);
    }
    out.validate();
    return out;
}

/// Calibrated arm mean as the weighted average sum(w y) / sum(w), with the
/// transform applied on top. The closed-form linearization SE reported here
/// coincides with the parametric sandwich on the mean scale; bootstrap_ci is
/// the reference when weights themselves are estimated.
inline CalibrationResult calibrate_arm_nonparametric(const Eigen::VectorXd& y, const WeightSet& w,
                                                     ArmTransform nu) {
    if (y.size() != w.size()) {
        throw DimensionError("calibrate_arm_nonparametric: outcome/weight length mismatch");
    }
    const double w_sum = w.sum();
    if (!(w_sum > 0.0)) throw ValidationError("calibrate_arm_nonparametric: weights sum to zero");
    const double delta = (w.values().array() * y.array()).sum() / w_sum;
    double var_delta = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double d = w[i] * (y[i] - delta);
        var_delta += d * d;
    }
    var_delta /= w_sum * w_sum;

    CalibrationResult out;
    out.method = CalibrationMethod::nonparametric;
    out.variance_source = VarianceSource::closed_form;
    out.metric.transform = nu;
    out.n_effective = w.effective_sample_size();
    if (nu == ArmTransform::logit) {
        if (delta <= 0.0 || delta >= 1.0) {
            throw BoundaryError("calibrate_arm_nonparametric: weighted mean " +
                                std::to_string(delta) + " is on the boundary of the logit domain");
        }
        out.estimate = stats::logit(delta);
        out.std_error = std::sqrt(var_delta) / (delta * (1.0 - delta));
    } else {
        out.estimate = delta;
        out.std_error = std::sqrt(var_delta);
    }
    out.validate();
    return out;
}

/// Combines two arm-level results into an effect size under the requested
/// contrast. Arms must be on matching transforms; the log-odds-ratio
/// contrast accepts identity-scale proportions (delta-method variance) or
/// logit-scale results (plain difference).
inline CalibrationResult calibrated_effect(const CalibrationResult& arm1,
                                           const CalibrationResult& arm2, Contrast pi) {
    if (arm1.metric.transform != arm2.metric.transform) {
        throw ValidationError("calibrated_effect: arms use different transforms");
    }
    CalibrationResult out;
    out.method = arm1.method == arm2.method ? arm1.method : CalibrationMethod::parametric;
    out.variance_source = arm1.variance_source == arm2.variance_source
                              ? arm1.variance_source
                              : VarianceSource::closed_form;
    out.metric.transform = arm1.metric.transform;
    out.metric.contrast = pi;
    out.n_effective = std::min(arm1.n_effective, arm2.n_effective);

    const double v1 = arm1.std_error * arm1.std_error;
    const double v2 = arm2.std_error * arm2.std_error;
    if (pi == Contrast::difference) {
        out.estimate = arm1.estimate - arm2.estimate;
        out.std_error = std::sqrt(v1 + v2);
    } else {
        if (arm1.metric.transform == ArmTransform::logit) {
            out.estimate = arm1.estimate - arm2.estimate;
            out.std_error = std::sqrt(v1 + v2);
        } else {
            const double p1 = arm1.estimate;
            const double p2 = arm2.estimate;
            if (p1 <= 0.0 || p1 >= 1.0 || p2 <= 0.0 || p2 >= 1.0) {
                throw BoundaryError("calibrated_effect: log-odds-ratio contrast needs "
                                    "proportions strictly inside (0, 1)");
            }
            out.estimate = stats::logit(p1) - stats::logit(p2);
            const double d1 = p1 * (1.0 - p1);
            const double d2 = p2 * (1.0 - p2);
            out.std_error = std::sqrt(v1 / (d1 * d1) + v2 / (d2 * d2));
        }
    }
    out.validate();
    return out;
}

/// Per-stratum treatment effects combined into a target-population effect:
/// estimate = sum beta_l * share_l, variance = sum s_l^2 * share_l^2.
struct StratifiedEstimate {
    std::vector<double> effects;        // beta_l
    std::vector<double> variances;      // s_l^2
    std::vector<double> target_shares;  // current-trial stratum shares
    double combined_estimate = 0.0;
    double combined_variance = 0.0;
};

inline StratifiedEstimate combine_strata(std::vector<double> effects,
                                         std::vector<double> variances,
                                         std::vector<double> target_shares) {
    const std::size_t n = effects.size();
    if (n == 0 || variances.size() != n || target_shares.size() != n) {
        throw DimensionError("combine_strata: effects, variances and shares must have equal, "
                             "nonzero length");
    }
    double share_sum = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        if (!(variances[l] > 0.0)) {
            throw ValidationError("combine_strata: variance of stratum " + std::to_string(l + 1) +
                                  " must be positive");
        }
        if (target_shares[l] < 0.0) {
            throw ValidationError("combine_strata: negative share for stratum " +
                                  std::to_string(l + 1));
        }
        share_sum += target_shares[l];
    }
    if (std::abs(share_sum - 1.0) > 1e-9) {
        throw ValidationError("combine_strata: shares sum to " + std::to_string(share_sum) +
                              ", expected 1");
    }
    StratifiedEstimate out;
    out.effects = std::move(effects);
    out.variances = std::move(variances);
    out.target_shares = std::move(target_shares);
    for (std::size_t l = 0; l < n; ++l) {
        out.combined_estimate += out.effects[l] * out.target_shares[l];
        out.combined_variance += out.variances[l] * out.target_shares[l] * out.target_shares[l];
    }
    return out;
}

}  // namespace recalib
