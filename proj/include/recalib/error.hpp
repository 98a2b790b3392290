#pragma once

#include <stdexcept>
#include <string>

namespace recalib {

/// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad inputs: schema violations, dimension mismatches, invalid options.
/// The CLI maps these to exit code 1.
struct ValidationError : Error {
    using Error::Error;
};

/// Estimation failures: separation, singular designs, degenerate weights.
/// The CLI maps these to exit code 2.
struct NumericalError : Error {
    using Error::Error;
};

struct DimensionError : ValidationError {
    using ValidationError::ValidationError;
};

/// CSV schema or cell-level problem; messages carry the offending row number.
struct IngestError : ValidationError {
    using ValidationError::ValidationError;
};

/// A category with positive target share has zero source share, so the
/// density ratio is undefined for subjects in that category.
struct UnsupportedPopulationError : ValidationError {
    using ValidationError::ValidationError;
};

/// Bernoulli fit with fitted probabilities pinned at 0/1 and diverging
/// coefficients.
struct SeparationError : NumericalError {
    using NumericalError::NumericalError;
};

struct SingularDesignError : NumericalError {
    using NumericalError::NumericalError;
};

struct ConvergenceError : NumericalError {
    using NumericalError::NumericalError;
};

/// Propensity prediction of exactly 0 or 1 for a historical subject.
struct DegeneratePropensityError : NumericalError {
    using NumericalError::NumericalError;
};

/// A stratum with no historical subjects; no within-stratum effect exists.
struct DegenerateStratificationError : NumericalError {
    using NumericalError::NumericalError;
};

/// Estimate on the boundary of the transform's domain (e.g. logit of 0 or 1).
struct BoundaryError : NumericalError {
    using NumericalError::NumericalError;
};

/// Too many bootstrap replicates failed for the resampling SE to be trusted.
struct UnstableBootstrapError : NumericalError {
    double failure_fraction;
    UnstableBootstrapError(const std::string& msg, double fraction)
        : NumericalError(msg), failure_fraction(fraction) {}
};

}  // namespace recalib
