#pragma once

// Shared fixtures: the two-trial hospitalization dataset used across the
// test suite, rebuilt cell by cell from its published count table.
//
// Historical trial (H): control arm 0 = 266 BPD subjects (34 events) +
// 234 non-BPD (19 events); active arm 1 = 496 BPD (39) + 506 non-BPD (9).
// Current trial (C): active-control arm 0 = 723 BPD (28) + 2607 non-BPD
// (34); experimental arm 1 = 722 BPD (22) + 2583 non-BPD (24).

#include <cmath>
#include <string>
#include <vector>

#include "recalib/data.hpp"

namespace fixtures {

struct Cell {
    recalib::Trial trial;
    int arm;
    double bpd;
    int n;
    int events;
};

inline const std::vector<Cell>& historical_cells() {
    static const std::vector<Cell> cells = {
        {recalib::Trial::historical, 0, 1.0, 266, 34},
        {recalib::Trial::historical, 0, 0.0, 234, 19},
        {recalib::Trial::historical, 1, 1.0, 496, 39},
        {recalib::Trial::historical, 1, 0.0, 506, 9},
    };
    return cells;
}

inline const std::vector<Cell>& current_cells() {
    static const std::vector<Cell> cells = {
        {recalib::Trial::current, 0, 1.0, 723, 28},
        {recalib::Trial::current, 0, 0.0, 2607, 34},
        {recalib::Trial::current, 1, 1.0, 722, 22},
        {recalib::Trial::current, 1, 0.0, 2583, 24},
    };
    return cells;
}

inline std::vector<recalib::SubjectRecord> expand(const std::vector<Cell>& cells,
                                                  const std::string& prefix) {
    std::vector<recalib::SubjectRecord> records;
    int serial = 0;
    for (const auto& cell : cells) {
        for (int i = 0; i < cell.n; ++i) {
            recalib::SubjectRecord r;
            r.id = prefix + std::to_string(++serial);
            r.trial = cell.trial;
            r.arm = cell.arm;
            r.outcome = i < cell.events ? 1.0 : 0.0;
            r.covariates = {cell.bpd};
            records.push_back(std::move(r));
        }
    }
    return records;
}

/// Historical trial only (1502 subjects, covariate "bpd").
inline recalib::PooledDataset impact_historical() {
    return recalib::PooledDataset(expand(historical_cells(), "H"), {"bpd"});
}

/// Both trials pooled (8137 subjects, covariate "bpd").
inline recalib::PooledDataset impact_pool() {
    auto records = expand(historical_cells(), "H");
    auto current = expand(current_cells(), "C");
    records.insert(records.end(), current.begin(), current.end());
    return recalib::PooledDataset(std::move(records), {"bpd"});
}

/// Outcomes of one historical arm, BPD rows first (events lead each block).
inline Eigen::VectorXd arm_outcomes(int arm) {
    std::vector<double> y;
    for (const auto& cell : historical_cells()) {
        if (cell.arm != arm) continue;
        for (int i = 0; i < cell.n; ++i) y.push_back(i < cell.events ? 1.0 : 0.0);
    }
    return Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
}

/// BPD indicator aligned with arm_outcomes(arm).
inline std::vector<double> arm_bpd(int arm) {
    std::vector<double> x;
    for (const auto& cell : historical_cells()) {
        if (cell.arm != arm) continue;
        for (int i = 0; i < cell.n; ++i) x.push_back(cell.bpd);
    }
    return x;
}

/// Target-over-source share weights for one historical arm (BPD target
/// share 0.22, source shares empirical within the arm).
inline Eigen::VectorXd arm_share_weights(int arm, double target_bpd = 0.22) {
    const auto bpd = arm_bpd(arm);
    const double n = static_cast<double>(bpd.size());
    double n_bpd = 0.0;
    for (const double b : bpd) n_bpd += b;
    const double source_bpd = n_bpd / n;
    Eigen::VectorXd w(static_cast<Eigen::Index>(bpd.size()));
    for (std::size_t i = 0; i < bpd.size(); ++i) {
        w[static_cast<Eigen::Index>(i)] = bpd[i] == 1.0
                                              ? target_bpd / source_bpd
                                              : (1.0 - target_bpd) / (1.0 - source_bpd);
    }
    return w;
}

inline double round_to(double x, int digits) {
    const double scale = std::pow(10.0, digits);
    return std::round(x * scale) / scale;
}

}  // namespace fixtures
