#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "recalib/data.hpp"
#include "recalib/error.hpp"
#include "recalib/parallel.hpp"
#include "recalib/rng.hpp"
#include "recalib/stats.hpp"

namespace recalib {

struct BootstrapOptions {
    int replicates = 2000;
    std::uint64_t seed = 0;
    double level = 0.95;  // percentile interval coverage
    int threads = 1;
    double max_failure_fraction = 0.05;
};

struct BootstrapResult {
    double std_error = 0.0;
    double lower = 0.0;  // percentile interval
    double upper = 0.0;
    int replicates = 0;
    int failures = 0;
    std::uint64_t seed = 0;
};

/// Nonparametric bootstrap of an arbitrary dataset-level estimator.
///
/// Subjects are resampled with replacement within trial-by-arm strata, so
/// arm sizes and trial sizes are preserved. The estimator sees a full
/// resampled dataset and is free to refit anything inside (propensity
/// weights are refit this way; analytic weights keyed on fixed shares are
/// not). Replicate b draws from the RNG substream (seed, b), making the
/// result identical for any thread count or execution order. Estimator
/// exceptions are counted as failures; past max_failure_fraction the whole
/// bootstrap is rejected.
inline BootstrapResult bootstrap_ci(const PooledDataset& data,
                                    const std::function<double(const PooledDataset&)>& estimator,
                                    const BootstrapOptions& opts = {}) {
    if (opts.replicates < 100) {
        throw ValidationError("bootstrap_ci: need at least 100 replicates");
    }
    if (!(opts.level > 0.0 && opts.level < 1.0)) {
        throw ValidationError("bootstrap_ci: level must lie in (0, 1)");
    }
    std::vector<std::vector<std::size_t>> strata;
    for (const Trial t : {Trial::historical, Trial::current}) {
        for (const int arm : {0, 1}) {
            auto idx = data.indices(t, arm);
            if (!idx.empty()) strata.push_back(std::move(idx));
        }
    }
    if (strata.empty()) throw ValidationError("bootstrap_ci: empty dataset");

    std::vector<double> estimates(static_cast<std::size_t>(opts.replicates),
                                  std::numeric_limits<double>::quiet_NaN());
    std::atomic<int> failures{0};

    parallel_for(opts.replicates, opts.threads, [&](int b) {
        Rng rng = Rng::substream(opts.seed, static_cast<std::uint64_t>(b));
        std::vector<SubjectRecord> resampled;
        resampled.reserve(data.size());
        for (const auto& stratum : strata) {
            for (std::size_t k = 0; k < stratum.size(); ++k) {
                resampled.push_back(data.record(stratum[rng.uniform_index(stratum.size())]));
            }
        }
        const PooledDataset sample(std::move(resampled), data.covariate_names());
        try {
            estimates[static_cast<std::size_t>(b)] = estimator(sample);
        } catch (const Error&) {
            failures.fetch_add(1, std::memory_order_relaxed);
        }
    });

    BootstrapResult out;
    out.replicates = opts.replicates;
    out.failures = failures.load();
    out.seed = opts.seed;
    const double fraction = static_cast<double>(out.failures) / opts.replicates;
    if (fraction > opts.max_failure_fraction) {
        throw UnstableBootstrapError(
            "bootstrap_ci: estimator failed in " + std::to_string(out.failures) + " of " +
                std::to_string(opts.replicates) + " replicates (fraction " +
                std::to_string(fraction) + ")",
            fraction);
    }
    std::vector<double> ok;
    ok.reserve(estimates.size());
    for (const double e : estimates) {
        if (!std::isnan(e)) ok.push_back(e);
    }
    out.std_error = stats::sample_sd(ok);
    const double tail = 0.5 * (1.0 - opts.level);
    out.lower = stats::quantile(ok, tail);
    out.upper = stats::quantile(ok, 1.0 - tail);
    return out;
}

}  // namespace recalib
