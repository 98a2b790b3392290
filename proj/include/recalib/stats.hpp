#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "recalib/error.hpp"

namespace recalib::stats {

/// Upper tail of the standard normal, 1 - Phi(z), via erfc. Accurate far
/// into the tail (erfc does not cancel the way 1 - Phi does).
inline double normal_upper_tail(double z) {
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

namespace detail {

// Rational approximation for the inverse normal CDF (Acklam's method),
// polished below with one Halley step against erfc.
inline double inverse_normal_seed(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double q, r;
    if (p < p_low) {
        q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p <= 1.0 - p_low) {
        q = p - 0.5;
        r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

}  // namespace detail

/// Inverse standard normal CDF. Acklam seed plus one Halley refinement,
/// good to full double precision over (0, 1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw ValidationError("normal_quantile: probability must lie in (0, 1)");
    }
    double x = detail::inverse_normal_seed(p);
    // Halley: e = Phi(x) - p, u = e / phi(x), x -= u / (1 + x u / 2)
    const double e = normal_cdf(x) - p;
    const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    const double u = e / phi;
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

inline double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw BoundaryError("logit: argument must lie strictly in (0, 1)");
    }
    return std::log(p / (1.0 - p));
}

inline double inverse_logit(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw ValidationError("mean: empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Unbiased sample standard deviation; 0 for samples of size < 2.
inline double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Quantile of a sample by linear interpolation of order statistics
/// (the same convention as numpy's default). `prob` in [0, 1].
inline double quantile(std::vector<double> v, double prob) {
    if (v.empty()) throw ValidationError("quantile: empty sample");
    if (!(prob >= 0.0 && prob <= 1.0)) {
        throw ValidationError("quantile: probability must lie in [0, 1]");
    }
    std::sort(v.begin(), v.end());
    const double h = prob * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = static_cast<std::size_t>(std::ceil(h));
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace recalib::stats
