#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pplqa/comparison.hpp"
#include "pplqa/datasets.hpp"
#include "pplqa/ranking.hpp"
#include "pplqa/records.hpp"

namespace pplqa {

/// Provenance written at the top of every report file.
struct ReportHeader {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> notes;
};

std::string csv_field(std::string_view text);

std::string scores_csv(const ReportHeader& header, std::span<const ScoreRecord> records);

/// One row per (group, scorer) with counts and metrics.
std::string metrics_csv(const ReportHeader& header, std::span<const MetricsReport> reports);
/// Domain | Metric | one column per scorer; F1, precision and recall cells
/// hold "label 0, label 1".
std::string metrics_markdown(const ReportHeader& header, std::span<const MetricsReport> reports);

struct TauGroup {
    std::string group;
    std::vector<ConsistencyCell> cells;
};

std::string tau_csv(const ReportHeader& header, std::span<const TauGroup> groups);
/// One column per evaluator pair and two rows per group: tau, then p-value.
std::string tau_markdown(const ReportHeader& header, std::span<const TauGroup> groups);

/// Rows are models, columns are "all" followed by the domains.
std::string lengthcorr_csv(const ReportHeader& header, std::span<const LengthCorrelation> rows);
std::string lengthcorr_markdown(const ReportHeader& header, std::span<const LengthCorrelation> rows);

/// Writes through a temporary file and a rename so readers never see a
/// partial report.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace pplqa
