#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "reasonbench/metrics.hpp"
#include "reasonbench/scoring.hpp"

namespace reasonbench {

/// Region of a Venn diagram: the tasks a program is in, joined with "+" in
/// name order, or "none".
std::string region_signature(const std::set<std::string>& members);

struct OverlapPartition {
  std::vector<std::string> task_set;  // sorted
  std::map<std::string, std::size_t> region_counts;  // every signature, zeros included
  std::size_t universe = 0;

  std::size_t count(const std::set<std::string>& members) const;
  /// Programs in every task.
  std::size_t all() const;
};

/// Throws OutOfUniverse when a set holds an id outside `universe`, and
/// ConstraintViolation for task names that would collide with signatures.
OverlapPartition overlap_sets(const std::map<std::string, std::set<std::string>>& outcomes,
                              const std::set<std::string>& universe);

/// Program ids a task counts as correct: IER and BR need a score of 1, SR
/// the with-test synthesis passing, DSR a positive refactoring score.
std::set<std::string> correct_ids(const std::vector<ScoreRecord>& records, std::string_view task);

struct ExternalOutcomes {
  std::string source;  // file stem, used as the column label
  std::map<std::string, bool> outcomes;
  std::vector<std::string> orphans;  // ids not in the known id set
};

/// Lowercases the benchmark prefix and trims whitespace, so "HumanEval/12 "
/// matches "humaneval/12".
std::string normalize_program_id(std::string_view id);

/// Reads (program id, correct?) pairs from a CSV file with a header naming
/// program_id and correct columns, or from JSONL records with those keys.
/// `known_ids` empty means no orphan check. Throws MalformedRow or IoError.
ExternalOutcomes import_external_outcomes(const std::filesystem::path& path, std::string_view format,
                                          const std::set<std::string>& known_ids = {});

struct RateRow {
  std::string model;
  BenchmarkRates rates;
};

struct RhoRow {
  std::string model;
  std::string task;
  std::string benchmark;
  std::string metric;
  Correlation rho;
};

struct OverlapRow {
  std::string model;
  std::string label;  // "tasks" or the external source name
  OverlapPartition partition;
};

struct ExternalRow {
  std::string model;
  std::string source;
  std::size_t common = 0;
  std::size_t ours = 0;    // correct among common programs
  std::size_t theirs = 0;
};

struct Orphan {
  std::string source;
  std::string program_id;
  std::string reason;
};

struct Report {
  std::vector<RateRow> rates;
  std::vector<RhoRow> correlations;
  std::vector<OverlapRow> overlaps;
  std::vector<ExternalRow> external;
  std::vector<Orphan> orphans;
};

struct ReportInputs {
  std::vector<ScoreRecord> scores;
  // Empty: correlation rows are emitted as unavailable.
  std::map<std::string, ComplexityProfile> profiles;
  // Program id -> benchmark; ids missing here are grouped by their prefix.
  std::map<std::string, std::string> benchmark_of;
  std::vector<ExternalOutcomes> external;
};

/// Builds every table. Deterministic in its inputs; orphan ids are listed,
/// never dropped.
Report summary_tables(const ReportInputs& inputs);

/// value * 100 rounded half-even to 2 decimals, e.g. 0.92965 -> "92.96".
std::string format_percent(double value);
/// Rounded half-even to 2 decimals, e.g. -0.675 -> "-0.68".
std::string format_fixed2(double value);

enum class ReportFormat { csv, json, markdown };
ReportFormat parse_report_format(std::string_view s);  // accepts "md"; throws Error

/// Writes the report files into `dir` and returns their paths. csv writes
/// one file per table; json writes report.json; markdown writes report.md.
/// Throws IoError.
std::vector<std::filesystem::path> emit_report(const Report& report, ReportFormat format,
                                               const std::filesystem::path& dir);

std::string report_to_json(const Report& report);
std::string report_to_markdown(const Report& report);
std::map<std::string, std::string> report_to_csv(const Report& report);  // file name -> contents

}  // namespace reasonbench
