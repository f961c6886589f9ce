#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reasonbench/corpus.hpp"

namespace reasonbench {

class Sandbox;

struct ComplexityProfile {
  int cc = 1;
  int loc = 0;
  int dep = 0;
  int nc = 0;
  int nc_depth = 0;  // deepest loop/conditional nesting, 0 when none
  long long ll = 0;
  bool ll_partial = false;   // some traced run timed out; ll is a lower bound
  bool ll_measured = false;  // false when only static metrics were computed
};

/// 1 + loop headers + if/elif branches + except handlers + conditional
/// expressions + comprehension filters + boolean connectives inside those
/// conditions, over the whole module. Throws py::ParseError.
int cyclomatic_complexity(std::string_view source);

/// Lines holding code. Blank and comment-only lines are skipped; a string
/// literal standing alone as a statement (docstring) counts only its first
/// line.
int count_loc(std::string_view source);

/// Distinct caller -> callee edges between methods of the same class,
/// through self/cls/ClassName dispatch. Throws py::ParseError.
int intra_class_dep(std::string_view source);

/// Loop/conditional statements whose body contains another loop/conditional
/// statement (without crossing a def, class or lambda). An elif is a branch
/// of its chain, not nested inside it. Throws py::ParseError.
int nested_constructs(std::string_view source);

/// Deepest nesting of loop/conditional statements.
int nesting_depth(std::string_view source);

struct LoopLength {
  long long ll = 0;
  bool partial = false;
};

/// Maximum over loop sites of iterations summed across the whole suite.
LoopLength loop_length(const Program& program, Sandbox& sandbox);

/// Static metrics, plus LL when a sandbox is given.
ComplexityProfile profile_program(const Program& program, Sandbox* sandbox);

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> fractional_ranks(const std::vector<double>& xs);

/// Spearman's rank correlation: Pearson correlation of fractional ranks.
/// Throws DegenerateInput for mismatched/short inputs or a constant side.
double spearman_roc(const std::vector<double>& x, const std::vector<double>& y);

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> kNames = {"cc", "loc", "dep", "nc", "ll"};
  return kNames;
}

double metric_value(const ComplexityProfile& p, std::string_view metric);

struct Correlation {
  std::optional<double> rho;
  std::size_t n = 0;
  std::string unavailable;  // reason when rho is absent
};

/// One rho per metric, correlating the metric against per-program success
/// over the ids present in both maps. Degenerate metrics are reported, not
/// thrown. LL is skipped when no profile has it measured.
std::map<std::string, Correlation> correlation_table(const std::map<std::string, ComplexityProfile>& profiles,
                                                     const std::map<std::string, double>& outcomes);

std::string profile_to_json(const std::string& program_id, const ComplexityProfile& p);
std::map<std::string, ComplexityProfile> profiles_from_jsonl(std::string_view text);

}  // namespace reasonbench
