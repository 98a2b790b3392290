#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "recalib/data.hpp"
#include "recalib/error.hpp"

namespace recalib {

enum class OutcomeKind { auto_detect, binary, real_valued };

struct IngestSummary {
    std::size_t rows = 0;
    std::map<std::string, std::size_t> counts;  // "H/0", "H/1", "C/0", "C/1"
    std::map<std::string, double> outcome_sums;
    std::vector<std::string> covariate_names;
    bool binary_outcome = true;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_number(const std::string& token, std::size_t row, const std::string& column) {
    const char* begin = token.data();
    const char* end = begin + token.size();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw IngestError("row " + std::to_string(row) + ": column '" + column +
                          "' holds '" + token + "', expected a number");
    }
    return value;
}

}  // namespace detail

/// Reads the subject CSV: header `subject_id,trial,arm,outcome,<covariates...>`
/// with trial coded H|C and arm coded 0|1. Every diagnostic names the
/// offending row (1-based, counting the header as row 1).
inline PooledDataset read_csv(const std::string& path,
                              OutcomeKind expected = OutcomeKind::auto_detect) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) {
        throw IngestError("'" + path + "': empty file, missing header");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = detail::split_csv_line(line);
    const std::vector<std::string> required = {"subject_id", "trial", "arm", "outcome"};
    for (std::size_t j = 0; j < required.size(); ++j) {
        if (header.size() <= j || header[j] != required[j]) {
            throw IngestError("'" + path + "': header must start with "
                              "subject_id,trial,arm,outcome; missing column '" + required[j] + "'");
        }
    }
    std::vector<std::string> covariates(header.begin() + 4, header.end());
    for (const auto& c : covariates) {
        if (c.empty()) throw IngestError("'" + path + "': empty covariate name in header");
    }
    {
        std::set<std::string> seen(header.begin(), header.end());
        if (seen.size() != header.size()) {
            throw IngestError("'" + path + "': duplicate column names in header");
        }
    }

    std::vector<SubjectRecord> records;
    std::set<std::string> ids;
    bool all_binary = true;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) {
            throw IngestError("row " + std::to_string(row) + ": has " +
                              std::to_string(fields.size()) + " cells, header has " +
                              std::to_string(header.size()));
        }
        for (std::size_t j = 0; j < fields.size(); ++j) {
            if (fields[j].empty()) {
                throw IngestError("row " + std::to_string(row) + ": missing value in column '" +
                                  header[j] + "'");
            }
        }
        SubjectRecord r;
        r.id = fields[0];
        if (!ids.insert(r.id).second) {
            throw IngestError("row " + std::to_string(row) + ": duplicate subject_id '" +
                              r.id + "'");
        }
        if (fields[1] == "H") {
            r.trial = Trial::historical;
        } else if (fields[1] == "C") {
            r.trial = Trial::current;
        } else {
            throw IngestError("row " + std::to_string(row) + ": unknown trial code '" +
                              fields[1] + "', expected H or C");
        }
        if (fields[2] == "0") {
            r.arm = 0;
        } else if (fields[2] == "1") {
            r.arm = 1;
        } else {
            throw IngestError("row " + std::to_string(row) + ": unknown arm code '" + fields[2] +
                              "', expected 0 or 1");
        }
        r.outcome = detail::parse_number(fields[3], row, "outcome");
        if (r.outcome != 0.0 && r.outcome != 1.0) {
            if (expected == OutcomeKind::binary) {
                throw IngestError("row " + std::to_string(row) + ": outcome " + fields[3] +
                                  " is not binary (0/1)");
            }
            all_binary = false;
        }
        r.covariates.reserve(covariates.size());
        for (std::size_t j = 4; j < fields.size(); ++j) {
            r.covariates.push_back(detail::parse_number(fields[j], row, header[j]));
        }
        records.push_back(std::move(r));
    }
    if (records.empty()) {
        throw IngestError("'" + path + "': no data rows");
    }
    (void)all_binary;
    return PooledDataset(std::move(records), std::move(covariates));
}

inline IngestSummary summarize(const PooledDataset& data) {
    IngestSummary out;
    out.rows = data.size();
    out.covariate_names = data.covariate_names();
    for (const auto& r : data.records()) {
        const std::string key = std::string(r.trial == Trial::historical ? "H" : "C") + "/" +
                                std::to_string(r.arm);
        ++out.counts[key];
        out.outcome_sums[key] += r.outcome;
        if (r.outcome != 0.0 && r.outcome != 1.0) out.binary_outcome = false;
    }
    return out;
}

inline void write_csv(const PooledDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IngestError("cannot write '" + path + "'");
    out << "subject_id,trial,arm,outcome";
    for (const auto& c : data.covariate_names()) out << ',' << c;
    out << '\n';
    out.precision(17);
    for (const auto& r : data.records()) {
        out << r.id << ',' << (r.trial == Trial::historical ? 'H' : 'C') << ',' << r.arm << ','
            << r.outcome;
        for (const double v : r.covariates) out << ',' << v;
        out << '\n';
    }
    if (!out) throw IngestError("failed while writing '" + path + "'");
}

}  // namespace recalib
