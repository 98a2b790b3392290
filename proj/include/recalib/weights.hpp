#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "recalib/error.hpp"

namespace recalib {

enum class WeightProvenance {
    analytic_ratio,    // target share / source share per category
    propensity_odds,   // odds of fitted trial probability, rescaled by n_h/n_c
    trimmed,           // clamped copy of another set
    stratum_constant,  // per-stratum share ratio
    unit,              // all ones
    custom,            // caller supplied
};

inline const char* to_string(WeightProvenance p) {
    switch (p) {
        case WeightProvenance::analytic_ratio: return "analytic_ratio";
        case WeightProvenance::propensity_odds: return "propensity_odds";
        case WeightProvenance::trimmed: return "trimmed";
        case WeightProvenance::stratum_constant: return "stratum_constant";
        case WeightProvenance::unit: return "unit";
        case WeightProvenance::custom: return "custom";
    }
    return "unknown";
}

/// Nonnegative per-subject calibration weights r(x_i), tagged with how they
/// were produced. Immutable after construction.
class WeightSet {
  public:
    WeightSet(Eigen::VectorXd values, WeightProvenance provenance,
              std::optional<std::pair<double, double>> trim_bounds = std::nullopt)
        : values_(std::move(values)), provenance_(provenance), trim_bounds_(trim_bounds) {
        for (Eigen::Index i = 0; i < values_.size(); ++i) {
            const double w = values_[i];
            if (!std::isfinite(w)) {
                throw ValidationError("WeightSet: weight " + std::to_string(i) + " is not finite");
            }
            if (w < 0.0) {
                throw ValidationError("WeightSet: weight " + std::to_string(i) + " is negative");
            }
            if (trim_bounds_ && provenance_ == WeightProvenance::trimmed &&
                (w < trim_bounds_->first || w > trim_bounds_->second)) {
                throw ValidationError("WeightSet: trimmed weight outside its bounds");
            }
        }
    }

    static WeightSet unit(Eigen::Index n) {
        return WeightSet(Eigen::VectorXd::Ones(n), WeightProvenance::unit);
    }

    static WeightSet custom(Eigen::VectorXd values) {
        return WeightSet(std::move(values), WeightProvenance::custom);
    }

    Eigen::Index size() const { return values_.size(); }
    double operator[](Eigen::Index i) const { return values_[i]; }
    const Eigen::VectorXd& values() const { return values_; }
    WeightProvenance provenance() const { return provenance_; }
    const std::optional<std::pair<double, double>>& trim_bounds() const { return trim_bounds_; }

    double sum() const { return values_.sum(); }
    double min() const { return values_.minCoeff(); }
    double max() const { return values_.maxCoeff(); }
    double mean() const { return values_.mean(); }

    /// (sum w)^2 / sum w^2 — a weight-concentration diagnostic.
    double effective_sample_size() const {
        const double s = values_.sum();
        const double ss = values_.squaredNorm();
        return ss > 0.0 ? s * s / ss : 0.0;
    }

  private:
    Eigen::VectorXd values_;
    WeightProvenance provenance_;
    std::optional<std::pair<double, double>> trim_bounds_;
};

/// Weight per subject as target share / source share of the subject's
/// category. Categories with zero target share get weight 0 (those subjects
/// carry no information about the target population); a category with
/// positive target share but zero source share has no representatives to
/// reweight, so the ratio is undefined and we refuse.
inline WeightSet analytic_weights(const std::vector<double>& categories,
                                  const std::map<double, double>& target_shares,
                                  const std::map<double, double>& source_shares) {
    auto check_shares = [](const std::map<double, double>& shares, const char* name) {
        double total = 0.0;
        for (const auto& [cat, share] : shares) {
            if (!(share >= 0.0) || !std::isfinite(share)) {
                throw ValidationError(std::string("analytic_weights: ") + name +
                                      " share for category " + std::to_string(cat) +
                                      " is not a finite nonnegative number");
            }
            total += share;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            std::ostringstream oss;
            oss << "analytic_weights: " << name << " shares sum to " << total << ", expected 1";
            throw ValidationError(oss.str());
        }
    };
    check_shares(target_shares, "target");
    check_shares(source_shares, "source");

    for (const auto& [cat, t] : target_shares) {
        if (t <= 0.0) continue;
        const auto it = source_shares.find(cat);
        if (it == source_shares.end() || it->second <= 0.0) {
            throw UnsupportedPopulationError(
                "analytic_weights: category " + std::to_string(cat) +
                " has positive target share but zero source share; "
                "the density ratio is undefined for it");
        }
    }

    Eigen::VectorXd w(static_cast<Eigen::Index>(categories.size()));
    for (std::size_t i = 0; i < categories.size(); ++i) {
        const double cat = categories[i];
        const auto t = target_shares.find(cat);
        const auto s = source_shares.find(cat);
        if (t == target_shares.end() || s == source_shares.end()) {
            throw ValidationError("analytic_weights: subject " + std::to_string(i) +
                                  " has category " + std::to_string(cat) +
                                  " absent from the share maps");
        }
        if (t->second == 0.0) {
            w[static_cast<Eigen::Index>(i)] = 0.0;
        } else {
            w[static_cast<Eigen::Index>(i)] = t->second / s->second;
        }
    }
    return WeightSet(std::move(w), WeightProvenance::analytic_ratio);
}

/// Clamped copy: values outside [lower, upper] are moved to the nearer
/// bound. The input is untouched.
inline WeightSet trim_weights(const WeightSet& w, double lower, double upper) {
    if (!(lower > 0.0) || !(upper > lower)) {
        throw ValidationError("trim_weights: bounds must satisfy 0 < lower < upper");
    }
    Eigen::VectorXd clamped = w.values().cwiseMax(lower).cwiseMin(upper);
    return WeightSet(std::move(clamped), WeightProvenance::trimmed,
                     std::make_pair(lower, upper));
}

}  // namespace recalib
