#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "recalib/data.hpp"
#include "recalib/error.hpp"
#include "recalib/glm.hpp"
#include "recalib/weights.hpp"

namespace recalib {

/// Logistic regression of trial membership (current = 1) on covariates,
/// fitted on the pooled sample.
class PropensityModel {
  public:
    PropensityModel(glm::FitResult fit, glm::DesignMatrix design_template,
                    std::vector<std::string> covariates, bool interactions,
                    std::vector<std::string> warnings)
        : fit_(std::move(fit)),
          labels_(design_template.labels()),
          covariates_(std::move(covariates)),
          interactions_(interactions),
          warnings_(std::move(warnings)) {}

    const glm::FitResult& fit() const { return fit_; }
    const std::vector<std::string>& covariates() const { return covariates_; }
    bool interactions() const { return interactions_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    const std::vector<std::string>& design_labels() const { return labels_; }

    /// Fitted probability of belonging to the current trial, one per record.
    Eigen::VectorXd predict(const PooledDataset& pool) const;

  private:
    glm::FitResult fit_;
    std::vector<std::string> labels_;
    std::vector<std::string> covariates_;
    bool interactions_;
    std::vector<std::string> warnings_;
};

namespace detail {

/// Intercept + main effects, optionally all pairwise products.
inline glm::DesignMatrix propensity_design(const PooledDataset& pool,
                                           const std::vector<std::string>& covariates,
                                           bool interactions) {
    const auto n = static_cast<Eigen::Index>(pool.size());
    std::vector<std::size_t> cols;
    cols.reserve(covariates.size());
    for (const auto& name : covariates) cols.push_back(pool.covariate_index(name));

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (interactions) {
        for (std::size_t a = 0; a < cols.size(); ++a) {
            for (std::size_t b = a + 1; b < cols.size(); ++b) pairs.emplace_back(a, b);
        }
    }

    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cols.size() + pairs.size()));
    std::vector<std::string> labels;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            x(i, static_cast<Eigen::Index>(j)) = pool.record(static_cast<std::size_t>(i)).covariates[cols[j]];
        }
        labels.push_back(covariates[j]);
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [a, b] = pairs[k];
        const auto j = static_cast<Eigen::Index>(cols.size() + k);
        x.col(j) = x.col(static_cast<Eigen::Index>(a)).cwiseProduct(x.col(static_cast<Eigen::Index>(b)));
        labels.push_back(covariates[a] + ":" + covariates[b]);
    }
    return glm::DesignMatrix::with_intercept(x, std::move(labels));
}

}  // namespace detail

inline Eigen::VectorXd PropensityModel::predict(const PooledDataset& pool) const {
    const auto design = detail::propensity_design(pool, covariates_, interactions_);
    const Eigen::VectorXd eta = design.values() * fit_.coefficients;
    Eigen::VectorXd p(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) p[i] = stats::inverse_logit(eta[i]);
    return p;
}

/// Fits the trial-membership model on the pooled sample with unit weights.
/// Covariate choice is the caller's: membership models work best restricted
/// to effect modifiers, so a large covariate list only earns a warning.
inline PropensityModel fit_propensity(const PooledDataset& pool,
                                      const std::vector<std::string>& covariates,
                                      bool interactions = false,
                                      const glm::SolverOptions& opts = {}) {
    if (pool.count(Trial::historical) == 0 || pool.count(Trial::current) == 0) {
        throw ValidationError("fit_propensity: both trials must be present in the pool");
    }
    if (covariates.empty()) {
        throw ValidationError("fit_propensity: no covariates selected");
    }
    for (const auto& name : covariates) {
        const std::size_t j = pool.covariate_index(name);
        const double first = pool.record(0).covariates[j];
        bool varies = false;
        for (std::size_t i = 1; i < pool.size(); ++i) {
            if (pool.record(i).covariates[j] != first) {
                varies = true;
                break;
            }
        }
        if (!varies) {
            throw ValidationError("fit_propensity: covariate '" + name +
                                  "' is constant across the pool");
        }
    }
    std::vector<std::string> warnings;
    if (covariates.size() > 10) {
        warnings.push_back(
            "propensity model uses " + std::to_string(covariates.size()) +
            " covariates; restricting to effect modifiers reduces the risk of extreme weights");
    }

    const auto design = detail::propensity_design(pool, covariates, interactions);
    Eigen::VectorXd label(static_cast<Eigen::Index>(pool.size()));
    for (std::size_t i = 0; i < pool.size(); ++i) {
        label[static_cast<Eigen::Index>(i)] = pool.record(i).trial == Trial::current ? 1.0 : 0.0;
    }
    auto fit = glm::fit_weighted_mle(glm::GlmSpec::bernoulli(), label, design,
                                     WeightSet::unit(design.rows()), opts);
    if (!fit.converged) {
        throw ConvergenceError("fit_propensity: logistic fit did not converge");
    }
    return PropensityModel(std::move(fit), design, covariates, interactions, std::move(warnings));
}

/// The density ratio r(x) = odds of the fitted current-trial probability,
/// rescaled by n_historical / n_current, for every record in the pool.
inline std::vector<double> propensity_ratio_all(const PropensityModel& model,
                                                const PooledDataset& pool) {
    const double n_h = static_cast<double>(pool.count(Trial::historical));
    const double n_c = static_cast<double>(pool.count(Trial::current));
    if (n_h == 0.0 || n_c == 0.0) {
        throw ValidationError("propensity_ratio_all: both trials must be present");
    }
    const Eigen::VectorXd p = model.predict(pool);
    std::vector<double> r(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double pi = p[static_cast<Eigen::Index>(i)];
        if (pi <= 0.0 || pi >= 1.0) {
            throw DegeneratePropensityError("propensity prediction for record " +
                                            std::to_string(i) + " is " + std::to_string(pi) +
                                            "; odds are undefined");
        }
        r[i] = pi / (1.0 - pi) * (n_h / n_c);
    }
    return r;
}

/// Calibration weights for the historical subjects, in pool order of the
/// historical records. Current-trial subjects receive no weight.
inline WeightSet propensity_weights(const PropensityModel& model, const PooledDataset& pool) {
    const auto r = propensity_ratio_all(model, pool);
    const auto hist = pool.indices(Trial::historical);
    Eigen::VectorXd w(static_cast<Eigen::Index>(hist.size()));
    for (std::size_t k = 0; k < hist.size(); ++k) {
        w[static_cast<Eigen::Index>(k)] = r[hist[k]];
    }
    return WeightSet(std::move(w), WeightProvenance::propensity_odds);
}

/// Quantile strata of the density ratio over the pooled sample, with
/// per-trial occupancy shares.
struct StrataAssignment {
    std::vector<int> stratum;  // 0-based bin per pooled record
    int n_strata = 0;
    std::vector<std::size_t> count_historical;
    std::vector<std::size_t> count_current;
    std::vector<double> share_historical;  // within-trial share per stratum
    std::vector<double> share_current;
};

/// Groups r(x) over the whole pool into `n_strata` quantile bins:
/// records are stably sorted by ratio (ties keep input order) and split
/// into contiguous, left-closed chunks whose sizes differ by at most one.
inline StrataAssignment stratify(const std::vector<double>& ratio_all,
                                 const PooledDataset& pool, int n_strata) {
    if (n_strata < 1) throw ValidationError("stratify: need at least one stratum");
    if (ratio_all.size() != pool.size()) {
        throw DimensionError("stratify: ratio count does not match pool size");
    }
    const std::set<double> distinct(ratio_all.begin(), ratio_all.end());
    if (static_cast<int>(distinct.size()) < n_strata) {
        throw ValidationError("stratify: only " + std::to_string(distinct.size()) +
                              " distinct ratio values for " + std::to_string(n_strata) +
                              " strata");
    }

    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ratio_all[a] < ratio_all[b]; });

    StrataAssignment out;
    out.n_strata = n_strata;
    out.stratum.assign(pool.size(), 0);
    const std::size_t n = pool.size();
    const std::size_t base = n / static_cast<std::size_t>(n_strata);
    const std::size_t extra = n % static_cast<std::size_t>(n_strata);
    std::size_t pos = 0;
    for (int l = 0; l < n_strata; ++l) {
        const std::size_t len = base + (static_cast<std::size_t>(l) < extra ? 1 : 0);
        for (std::size_t k = 0; k < len; ++k) out.stratum[order[pos + k]] = l;
        pos += len;
    }

    out.count_historical.assign(static_cast<std::size_t>(n_strata), 0);
    out.count_current.assign(static_cast<std::size_t>(n_strata), 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto l = static_cast<std::size_t>(out.stratum[i]);
        if (pool.record(i).trial == Trial::historical) {
            ++out.count_historical[l];
        } else {
            ++out.count_current[l];
        }
    }
    const double n_h = static_cast<double>(pool.count(Trial::historical));
    const double n_c = static_cast<double>(pool.count(Trial::current));
    out.share_historical.resize(static_cast<std::size_t>(n_strata));
    out.share_current.resize(static_cast<std::size_t>(n_strata));
    for (int l = 0; l < n_strata; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        if (out.count_historical[lu] == 0) {
            throw DegenerateStratificationError(
                "stratify: stratum " + std::to_string(l + 1) +
                " holds no historical subjects; no within-stratum effect can be estimated");
        }
        out.share_historical[lu] = static_cast<double>(out.count_historical[lu]) / n_h;
        out.share_current[lu] = n_c > 0.0 ? static_cast<double>(out.count_current[lu]) / n_c : 0.0;
    }
    return out;
}

inline StrataAssignment stratify(const PropensityModel& model, const PooledDataset& pool,
                                 int n_strata) {
    return stratify(propensity_ratio_all(model, pool), pool, n_strata);
}

/// Historical weights that are constant within each stratum: the ratio of
/// the stratum's current-trial share to its historical share. The weighted
/// stratum tally then reproduces the current-trial shares exactly.
inline WeightSet stratum_constant_weights(const StrataAssignment& strata,
                                          const PooledDataset& pool) {
    const auto hist = pool.indices(Trial::historical);
    Eigen::VectorXd w(static_cast<Eigen::Index>(hist.size()));
    for (std::size_t k = 0; k < hist.size(); ++k) {
        const auto l = static_cast<std::size_t>(strata.stratum[hist[k]]);
        w[static_cast<Eigen::Index>(k)] = strata.share_current[l] / strata.share_historical[l];
    }
    return WeightSet(std::move(w), WeightProvenance::stratum_constant);
}

}  // namespace recalib
