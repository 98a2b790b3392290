#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "recalib/error.hpp"
#include "recalib/weights.hpp"

namespace recalib {

enum class Trial { historical, current };

inline const char* to_string(Trial t) {
    return t == Trial::historical ? "historical" : "current";
}

/// One subject: outcome, treatment arm (0 = comparator/control,
/// 1 = treated/experimental), covariate vector, and which trial it came from.
struct SubjectRecord {
    std::string id;
    Trial trial = Trial::historical;
    int arm = 0;
    double outcome = 0.0;
    std::vector<double> covariates;
};

/// Subjects from one or two trials sharing a covariate schema. Immutable
/// after construction; all accessors are safe for concurrent reads.
class PooledDataset {
  public:
    PooledDataset(std::vector<SubjectRecord> records, std::vector<std::string> covariate_names)
        : records_(std::move(records)), covariate_names_(std::move(covariate_names)) {
        for (std::size_t i = 0; i < records_.size(); ++i) {
            const auto& r = records_[i];
            if (r.covariates.size() != covariate_names_.size()) {
                throw ValidationError("PooledDataset: record " + std::to_string(i) +
                                      " has " + std::to_string(r.covariates.size()) +
                                      " covariates, schema has " +
                                      std::to_string(covariate_names_.size()));
            }
            if (r.arm != 0 && r.arm != 1) {
                throw ValidationError("PooledDataset: record " + std::to_string(i) +
                                      " has arm " + std::to_string(r.arm) + ", expected 0 or 1");
            }
        }
    }

    std::size_t size() const { return records_.size(); }
    const std::vector<SubjectRecord>& records() const { return records_; }
    const SubjectRecord& record(std::size_t i) const { return records_[i]; }
    const std::vector<std::string>& covariate_names() const { return covariate_names_; }

    std::size_t count(Trial t) const {
        return static_cast<std::size_t>(
            std::count_if(records_.begin(), records_.end(),
                          [t](const SubjectRecord& r) { return r.trial == t; }));
    }

    std::size_t covariate_index(const std::string& name) const {
        const auto it = std::find(covariate_names_.begin(), covariate_names_.end(), name);
        if (it == covariate_names_.end()) {
            throw ValidationError("dataset has no covariate column named '" + name + "'");
        }
        return static_cast<std::size_t>(it - covariate_names_.begin());
    }

    std::vector<std::size_t> indices(Trial t) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < records_.size(); ++i) {
            if (records_[i].trial == t) out.push_back(i);
        }
        return out;
    }

    std::vector<std::size_t> indices(Trial t, int arm) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < records_.size(); ++i) {
            if (records_[i].trial == t && records_[i].arm == arm) out.push_back(i);
        }
        return out;
    }

    Eigen::VectorXd outcomes(const std::vector<std::size_t>& idx) const {
        Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            y[static_cast<Eigen::Index>(k)] = records_[idx[k]].outcome;
        }
        return y;
    }

    std::vector<double> covariate_values(const std::vector<std::size_t>& idx,
                                         const std::string& name) const {
        const std::size_t j = covariate_index(name);
        std::vector<double> out;
        out.reserve(idx.size());
        for (const std::size_t i : idx) out.push_back(records_[i].covariates[j]);
        return out;
    }

  private:
    std::vector<SubjectRecord> records_;
    std::vector<std::string> covariate_names_;
};

/// Restricts a weight set indexed over pool.indices(historical) to one
/// historical arm, keeping provenance and trim bounds.
inline WeightSet slice_historical_weights(const WeightSet& w, const PooledDataset& pool,
                                          int arm) {
    const auto hist = pool.indices(Trial::historical);
    if (w.size() != static_cast<Eigen::Index>(hist.size())) {
        throw DimensionError("slice_historical_weights: weight count " +
                             std::to_string(w.size()) + " does not match historical count " +
                             std::to_string(hist.size()));
    }
    std::vector<double> kept;
    for (std::size_t k = 0; k < hist.size(); ++k) {
        if (pool.record(hist[k]).arm == arm) kept.push_back(w[static_cast<Eigen::Index>(k)]);
    }
    Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
    return WeightSet(std::move(v), w.provenance(), w.trim_bounds());
}

}  // namespace recalib
