#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reasonbench/corpus.hpp"
#include "reasonbench/sandbox.hpp"

namespace reasonbench {

struct ScoreRecord {
  std::string program_id;
  std::string task;  // "ier" | "sr" | "dsr" | "br"
  double s_value = 0.0;
  // Raw inputs of the score, e.g. pass_no_test, pass_with_test, loc_c,
  // loc_cplus, loc_cprime, suite_pass. Booleans are stored as 0/1.
  std::map<std::string, double> components;
  std::string model;
  std::string flag;  // why a response scored 0 without being judged, if so
};

struct BenchmarkRates {
  std::string benchmark;
  std::size_t m = 0;
  std::optional<double> r_ier;
  std::optional<double> r_sr;
  std::optional<double> pass_no_test;
  std::optional<double> pass_with_test;
  std::optional<double> pass_cprime;
  std::optional<double> r_dsr;
  std::optional<double> br_rate;
};

/// The value a model must predict for an execution: the canonical return
/// value, the normalized stdout of a stdio run, or the exception name.
/// Empty for timeouts and harness failures.
std::optional<std::string> expected_answer(const ExecutionOutcome& ground_truth);

/// 1 when the predicted output matches the ground-truth execution.
int score_ier(std::string_view predicted_repr, const ExecutionOutcome& ground_truth);

/// Mean of s_value. Throws EmptyInput.
double rate_ier(const std::vector<ScoreRecord>& records);

int score_sr(bool pass_no_test, bool pass_with_test);

/// pass_b * exp(sr_success_count / m). Throws ConstraintViolation when the
/// count exceeds the initial failures or an argument is out of range.
double rate_sr(double pass_b, long long sr_success_count, long long m);

/// Refactoring score, clamped to [0, 1]; 0 when the suite fails.
double score_dsr(int loc_c, int loc_cplus, int loc_cprime, bool suite_pass);

double rate_dsr(const std::vector<ScoreRecord>& records);

/// Fraction of true verdicts. Throws EmptyInput.
double pass_at_1(const std::vector<bool>& verdicts);

std::size_t edit_distance(std::string_view a, std::string_view b);

/// 1 - distance / max length over Unicode code points; 1 for two empty
/// strings.
double levenshtein_similarity(std::string_view a, std::string_view b);

/// Tests that pass on `correct` and do not pass on `buggy`, in suite order.
std::vector<TestCase> identify_error_revealing_tests(const Program& program, const std::string& correct,
                                                     const std::string& buggy, const std::vector<TestCase>& tests,
                                                     Sandbox& sandbox);

/// 1 when the patch parses and passes every test.
int score_br(const std::string& patch, const Program& program, const std::vector<TestCase>& tests,
             Sandbox& sandbox);

/// Rates per benchmark (keyed by benchmark name) plus a "total" entry.
/// Records are reduced in program id order. SR rates follow the full-suite
/// reading: pass_b is the no-test pass@1.
std::map<std::string, BenchmarkRates> compute_rates(const std::vector<ScoreRecord>& records,
                                                    const std::map<std::string, std::string>& benchmark_of);

std::string score_to_json(const ScoreRecord& r);
std::vector<ScoreRecord> scores_from_jsonl(std::string_view text);
std::string scores_to_jsonl(const std::vector<ScoreRecord>& records);

}  // namespace reasonbench
