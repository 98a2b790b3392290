#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "recalib/error.hpp"
#include "recalib/stats.hpp"
#include "recalib/weights.hpp"

namespace recalib::glm {

enum class Family { bernoulli, gaussian };
enum class Link { logit, identity };

inline const char* to_string(Family f) {
    return f == Family::bernoulli ? "bernoulli" : "gaussian";
}

/// Exponential-family spec with canonical link. The cumulant function and
/// its derivatives drive the likelihood, score, and information below:
/// bernoulli has b(theta) = log(1 + e^theta), gaussian has b(theta) =
/// theta^2 / 2. Dispersion is 1 for bernoulli and profiled out of gaussian
/// point estimation.
class GlmSpec {
  public:
    GlmSpec(Family family, Link link) : family_(family), link_(link) {
        const bool canonical = (family == Family::bernoulli && link == Link::logit) ||
                               (family == Family::gaussian && link == Link::identity);
        if (!canonical) {
            throw ValidationError("GlmSpec: non-canonical family/link pair");
        }
    }

    static GlmSpec bernoulli() { return GlmSpec(Family::bernoulli, Link::logit); }
    static GlmSpec gaussian() { return GlmSpec(Family::gaussian, Link::identity); }

    Family family() const { return family_; }
    Link link() const { return link_; }

    /// b(theta)
    double cumulant(double theta) const {
        if (family_ == Family::bernoulli) {
            // log(1 + e^theta) without overflow for large |theta|
            return theta > 0.0 ? theta + std::log1p(std::exp(-theta))
                               : std::log1p(std::exp(theta));
        }
        return 0.5 * theta * theta;
    }

    /// b'(theta) = mean under the canonical parameterization
    double mean(double theta) const {
        if (family_ == Family::bernoulli) return stats::inverse_logit(theta);
        return theta;
    }

    /// b''(theta) = variance function
    double variance(double theta) const {
        if (family_ == Family::bernoulli) {
            const double p = stats::inverse_logit(theta);
            return p * (1.0 - p);
        }
        return 1.0;
    }

    double link_of(double mu) const {
        if (family_ == Family::bernoulli) return stats::logit(mu);
        return mu;
    }

    void validate_response(const Eigen::VectorXd& y) const {
        if (family_ != Family::bernoulli) return;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            if (y[i] != 0.0 && y[i] != 1.0) {
                throw ValidationError("bernoulli response at row " + std::to_string(i) +
                                      " is " + std::to_string(y[i]) + ", expected 0 or 1");
            }
        }
    }

  private:
    Family family_;
    Link link_;
};

/// Dense regressor matrix with named columns. Factories that add an
/// intercept put it in column 0 under the label "(Intercept)".
class DesignMatrix {
  public:
    DesignMatrix(Eigen::MatrixXd values, std::vector<std::string> labels,
                 bool has_intercept = false)
        : values_(std::move(values)), labels_(std::move(labels)), has_intercept_(has_intercept) {
        if (static_cast<Eigen::Index>(labels_.size()) != values_.cols()) {
            throw DimensionError("DesignMatrix: label count does not match column count");
        }
        std::set<std::string> seen;
        for (const auto& l : labels_) {
            if (!seen.insert(l).second) {
                throw ValidationError("DesignMatrix: duplicate column label '" + l + "'");
            }
        }
    }

    static DesignMatrix intercept_only(Eigen::Index n) {
        return DesignMatrix(Eigen::MatrixXd::Ones(n, 1), {"(Intercept)"}, true);
    }

    static DesignMatrix with_intercept(const Eigen::MatrixXd& covariates,
                                       std::vector<std::string> labels) {
        Eigen::MatrixXd m(covariates.rows(), covariates.cols() + 1);
        m.col(0).setOnes();
        m.rightCols(covariates.cols()) = covariates;
        labels.insert(labels.begin(), "(Intercept)");
        return DesignMatrix(std::move(m), std::move(labels), true);
    }

    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index cols() const { return values_.cols(); }
    const Eigen::MatrixXd& values() const { return values_; }
    const std::vector<std::string>& labels() const { return labels_; }
    bool has_intercept() const { return has_intercept_; }

  private:
    Eigen::MatrixXd values_;
    std::vector<std::string> labels_;
    bool has_intercept_;
};

struct SolverOptions {
    double tolerance = 1e-10;      // max-norm of the weighted score
    int max_iterations = 100;
    double separation_bound = 30.0;  // |coefficient| beyond any plausible log-odds
};

struct FitResult {
    Eigen::VectorXd coefficients;
    Eigen::MatrixXd model_covariance;  // robust A^{-1} B A^{-1}
    Eigen::MatrixXd naive_covariance;  // inverse expected information
    double log_likelihood = 0.0;
    bool converged = false;
    int iterations = 0;
};

namespace detail {

inline void check_dimensions(const Eigen::VectorXd& y, const DesignMatrix& X,
                             const WeightSet& w) {
    if (y.size() != X.rows() || y.size() != w.size()) {
        throw DimensionError("glm: response (" + std::to_string(y.size()) + "), design (" +
                             std::to_string(X.rows()) + ") and weights (" +
                             std::to_string(w.size()) + ") disagree on row count");
    }
}

inline void check_coef(const DesignMatrix& X, const Eigen::VectorXd& coef) {
    if (coef.size() != X.cols()) {
        throw DimensionError("glm: coefficient length " + std::to_string(coef.size()) +
                             " does not match design column count " + std::to_string(X.cols()));
    }
}

}  // namespace detail

/// Weighted log-likelihood sum_i w_i * log l(y_i, theta_i) with
/// theta = X coef. With unit weights this is the ordinary log-likelihood.
/// Gaussian terms are evaluated at unit dispersion, which leaves the
/// maximizer unchanged. Zero-weight rows contribute nothing.
inline double weighted_log_likelihood(const GlmSpec& spec, const Eigen::VectorXd& y,
                                      const DesignMatrix& X, const Eigen::VectorXd& coef,
                                      const WeightSet& w) {
    detail::check_dimensions(y, X, w);
    detail::check_coef(X, coef);
    spec.validate_response(y);
    const Eigen::VectorXd eta = X.values() * coef;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (w[i] == 0.0) continue;
        double term;
        if (spec.family() == Family::bernoulli) {
            term = y[i] * eta[i] - spec.cumulant(eta[i]);
        } else {
            const double r = y[i] - eta[i];
            term = -0.5 * r * r - 0.5 * std::log(2.0 * M_PI);
        }
        ll += w[i] * term;
    }
    return ll;
}

/// Analytic score sum_i w_i (y_i - mu_i) x_i of the weighted log-likelihood.
inline Eigen::VectorXd score(const GlmSpec& spec, const Eigen::VectorXd& y,
                             const DesignMatrix& X, const Eigen::VectorXd& coef,
                             const WeightSet& w) {
    detail::check_dimensions(y, X, w);
    detail::check_coef(X, coef);
    const Eigen::VectorXd eta = X.values() * coef;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(X.cols());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (w[i] == 0.0) continue;
        g += w[i] * (y[i] - spec.mean(eta[i])) * X.values().row(i).transpose();
    }
    return g;
}

/// A = sum_i w_i b''(theta_i) x_i x_i', the (negated) weighted observed
/// information; for canonical links this equals the expected information.
inline Eigen::MatrixXd information(const GlmSpec& spec, const Eigen::VectorXd& y,
                                   const DesignMatrix& X, const Eigen::VectorXd& coef,
                                   const WeightSet& w) {
    detail::check_dimensions(y, X, w);
    detail::check_coef(X, coef);
    const Eigen::VectorXd eta = X.values() * coef;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (w[i] == 0.0) continue;
        const auto xi = X.values().row(i);
        a.noalias() += w[i] * spec.variance(eta[i]) * (xi.transpose() * xi);
    }
    return a;
}

/// B = sum_i w_i^2 (y_i - mu_i)^2 x_i x_i', the squared-weight outer product
/// of per-observation scores.
inline Eigen::MatrixXd score_outer(const GlmSpec& spec, const Eigen::VectorXd& y,
                                   const DesignMatrix& X, const Eigen::VectorXd& coef,
                                   const WeightSet& w) {
    detail::check_dimensions(y, X, w);
    detail::check_coef(X, coef);
    const Eigen::VectorXd eta = X.values() * coef;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (w[i] == 0.0) continue;
        const double s = y[i] - spec.mean(eta[i]);
        const auto xi = X.values().row(i);
        b.noalias() += w[i] * w[i] * s * s * (xi.transpose() * xi);
    }
    return b;
}

namespace detail {

inline Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& rhs,
                                 const char* context) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < a.cols()) {
        throw SingularDesignError(std::string(context) + ": information matrix is singular");
    }
    return qr.solve(rhs);
}

}  // namespace detail

/// Robust covariance A^{-1} B A^{-1} of the weighted MLE, evaluated
/// empirically at `coef`. Callers are expected to pass a stationary point of
/// the weighted log-likelihood. Invariant under rescaling all weights by a
/// positive constant (A picks up c, B picks up c^2).
inline Eigen::MatrixXd sandwich_covariance(const GlmSpec& spec, const Eigen::VectorXd& y,
                                           const DesignMatrix& X, const Eigen::VectorXd& coef,
                                           const WeightSet& w) {
    const Eigen::MatrixXd a = information(spec, y, X, coef, w);
    const Eigen::MatrixXd b = score_outer(spec, y, X, coef, w);
    const Eigen::MatrixXd a_inv =
        detail::solve_spd(a, Eigen::MatrixXd::Identity(a.rows(), a.cols()), "sandwich_covariance");
    Eigen::MatrixXd cov = a_inv * b * a_inv;
    return 0.5 * (cov + cov.transpose());
}

/// Maximizes the weighted log-likelihood by Fisher scoring (IRLS).
///
/// Starting point: intercept at link(clamped weighted mean), zeros
/// elsewhere. Convergence is declared when the score max-norm drops to
/// opts.tolerance; hitting max_iterations is reported through
/// FitResult::converged rather than by throwing, so callers can decide.
/// Separation (bernoulli coefficients drifting past the separation bound)
/// and rank-deficient designs throw.
inline FitResult fit_weighted_mle(const GlmSpec& spec, const Eigen::VectorXd& y,
                                  const DesignMatrix& X, const WeightSet& w,
                                  const SolverOptions& opts = {}) {
    detail::check_dimensions(y, X, w);
    spec.validate_response(y);
    const double w_total = w.sum();
    if (w_total <= 0.0) {
        throw ValidationError("fit_weighted_mle: weights sum to zero");
    }

    // Full column rank on the support of positive weights.
    {
        std::vector<Eigen::Index> active;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            if (w[i] > 0.0) active.push_back(i);
        }
        Eigen::MatrixXd xa(static_cast<Eigen::Index>(active.size()), X.cols());
        for (std::size_t k = 0; k < active.size(); ++k) {
            xa.row(static_cast<Eigen::Index>(k)) = X.values().row(active[k]);
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xa);
        if (qr.rank() < X.cols()) {
            throw SingularDesignError(
                "fit_weighted_mle: design is rank deficient on positively weighted rows");
        }
    }

    Eigen::VectorXd coef = Eigen::VectorXd::Zero(X.cols());
    if (X.has_intercept()) {
        const double ybar = (w.values().array() * y.array()).sum() / w_total;
        if (spec.family() == Family::bernoulli) {
            coef[0] = stats::logit(std::clamp(ybar, 1e-6, 1.0 - 1e-6));
        } else {
            coef[0] = ybar;
        }
    }

    FitResult out;
    out.converged = false;
    out.iterations = 0;
    for (int it = 0; it <= opts.max_iterations; ++it) {
        const Eigen::VectorXd g = score(spec, y, X, coef, w);
        if (g.lpNorm<Eigen::Infinity>() <= opts.tolerance) {
            out.converged = true;
            break;
        }
        if (it == opts.max_iterations) break;
        const Eigen::MatrixXd a = information(spec, y, X, coef, w);
        const Eigen::VectorXd step = detail::solve_spd(a, g, "fit_weighted_mle");
        coef += step;
        ++out.iterations;
        if (spec.family() == Family::bernoulli &&
            coef.lpNorm<Eigen::Infinity>() > opts.separation_bound) {
            throw SeparationError(
                "fit_weighted_mle: coefficients diverged past " +
                std::to_string(opts.separation_bound) +
                "; the data separate the response (fitted probabilities pinned at 0/1)");
        }
    }

    out.coefficients = coef;
    out.log_likelihood = weighted_log_likelihood(spec, y, X, coef, w);
    out.model_covariance = sandwich_covariance(spec, y, X, coef, w);

    const Eigen::MatrixXd a = information(spec, y, X, coef, w);
    Eigen::MatrixXd naive =
        detail::solve_spd(a, Eigen::MatrixXd::Identity(a.rows(), a.cols()), "fit_weighted_mle");
    if (spec.family() == Family::gaussian) {
        // dispersion = weighted residual sum of squares / sum of weights
        const Eigen::VectorXd resid = y - X.values() * coef;
        const double wrss = (w.values().array() * resid.array().square()).sum();
        naive *= wrss / w_total;
    }
    out.naive_covariance = 0.5 * (naive + naive.transpose());
    return out;
}

}  // namespace recalib::glm
