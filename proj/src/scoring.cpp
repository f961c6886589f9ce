#include "reasonbench/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <set>
#include <tuple>

#include "reasonbench/error.hpp"
#include "reasonbench/py/literal.hpp"
#include "reasonbench/py/parser.hpp"
#include "reasonbench/util/files.hpp"

namespace reasonbench {

namespace {

double mean_of(const std::vector<ScoreRecord>& records) {
  if (records.empty()) throw EmptyInput("no score records");
  std::vector<const ScoreRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ScoreRecord* a, const ScoreRecord* b) { return a->program_id < b->program_id; });
  double sum = 0;
  for (const auto* r : sorted) sum += r->s_value;
  return sum / static_cast<double>(records.size());
}

double component(const ScoreRecord& r, const std::string& key) {
  auto it = r.components.find(key);
  return it == r.components.end() ? 0.0 : it->second;
}

}  // namespace

std::optional<std::string> expected_answer(const ExecutionOutcome& gt) {
  switch (gt.status) {
    case ExecStatus::value:
      if (gt.value_repr) return py::canonicalize(*gt.value_repr);
      return normalize_stdout(gt.stdout_text);
    case ExecStatus::exception:
      return gt.exception_type.value_or("Exception");
    default:
      return std::nullopt;
  }
}

int score_ier(std::string_view predicted_repr, const ExecutionOutcome& gt) {
  auto expected = expected_answer(gt);
  if (!expected) return 0;
  if (gt.status == ExecStatus::value && !gt.value_repr)
    return normalize_stdout(predicted_repr) == *expected ? 1 : 0;
  return py::canonicalize(predicted_repr) == *expected ? 1 : 0;
}

double rate_ier(const std::vector<ScoreRecord>& records) { return mean_of(records); }

int score_sr(bool pass_no_test, bool pass_with_test) { return !pass_no_test && pass_with_test ? 1 : 0; }

double rate_sr(double pass_b, long long count, long long m) {
  if (m <= 0) throw ConstraintViolation("m must be positive");
  if (!(pass_b >= 0.0 && pass_b <= 1.0)) throw ConstraintViolation("pass rate outside [0, 1]");
  double md = static_cast<double>(m);
  if (count < 0 || static_cast<double>(count) > md * (1.0 - pass_b) + 1e-9)
    throw ConstraintViolation("SR successes (" + std::to_string(count) + ") exceed initial failures");
  return pass_b * std::exp(static_cast<double>(count) / md);
}

double score_dsr(int loc_c, int loc_cplus, int loc_cprime, bool suite_pass) {
  if (!suite_pass) return 0.0;
  if (loc_cplus <= 0) return 0.0;
  int longer = std::max(loc_cprime, loc_c);
  if (longer <= 0) return 0.0;
  double raw = loc_c * (1.0 - std::floor(static_cast<double>(loc_cprime) / loc_cplus)) / longer;
  return std::clamp(raw, 0.0, 1.0);
}

double rate_dsr(const std::vector<ScoreRecord>& records) { return mean_of(records); }

double pass_at_1(const std::vector<bool>& verdicts) {
  if (verdicts.empty()) throw EmptyInput("no verdicts");
  return static_cast<double>(std::count(verdicts.begin(), verdicts.end(), true)) /
         static_cast<double>(verdicts.size());
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  auto x = py::code_points(a);
  auto y = py::code_points(b);
  std::vector<std::size_t> row(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (x[i - 1] == y[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[y.size()];
}

double levenshtein_similarity(std::string_view a, std::string_view b) {
  auto longest = std::max(py::code_points(a).size(), py::code_points(b).size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

std::vector<TestCase> identify_error_revealing_tests(const Program& program, const std::string& correct,
                                                     const std::string& buggy, const std::vector<TestCase>& tests,
                                                     Sandbox& sandbox) {
  auto good = sandbox.run_tests(correct, program, tests, sandbox.limits());
  auto bad = sandbox.run_tests(buggy, program, tests, sandbox.limits());
  std::vector<TestCase> out;
  for (std::size_t i = 0; i < tests.size(); ++i)
    if (good.per_test[i].verdict == Verdict::pass && bad.per_test[i].verdict != Verdict::pass)
      out.push_back(tests[i]);
  return out;
}

int score_br(const std::string& patch, const Program& program, const std::vector<TestCase>& tests,
             Sandbox& sandbox) {
  if (!py::parses(patch)) return 0;
  return sandbox.run_tests(patch, program, tests, sandbox.limits()).all_pass ? 1 : 0;
}

std::map<std::string, BenchmarkRates> compute_rates(const std::vector<ScoreRecord>& records,
                                                    const std::map<std::string, std::string>& benchmark_of) {
  std::map<std::string, std::vector<const ScoreRecord*>> groups;
  for (const auto& r : records) {
    auto it = benchmark_of.find(r.program_id);
    std::string bench = it == benchmark_of.end() ? "unknown" : it->second;
    groups[bench].push_back(&r);
    groups["total"].push_back(&r);
  }
  std::map<std::string, BenchmarkRates> out;
  for (auto& [bench, rs] : groups) {
    std::stable_sort(rs.begin(), rs.end(), [](const ScoreRecord* a, const ScoreRecord* b) {
      return std::tie(a->program_id, a->task) < std::tie(b->program_id, b->task);
    });
    BenchmarkRates rates;
    rates.benchmark = bench;
    std::map<std::string, std::vector<ScoreRecord>> by_task;
    std::set<std::string> ids;
    for (const auto* r : rs) {
      by_task[r->task].push_back(*r);
      ids.insert(r->program_id);
    }
    rates.m = ids.size();
    if (by_task.count("ier")) rates.r_ier = rate_ier(by_task["ier"]);
    if (by_task.count("sr")) {
      const auto& sr = by_task["sr"];
      std::vector<bool> no_test, with_test;
      long long successes = 0;
      for (const auto& r : sr) {
        no_test.push_back(component(r, "pass_no_test") != 0.0);
        with_test.push_back(component(r, "pass_with_test") != 0.0);
        if (r.s_value != 0.0) ++successes;
      }
      rates.pass_no_test = pass_at_1(no_test);
      rates.pass_with_test = pass_at_1(with_test);
      rates.r_sr = rate_sr(*rates.pass_no_test, successes, static_cast<long long>(sr.size()));
    }
    if (by_task.count("dsr")) {
      const auto& dsr = by_task["dsr"];
      std::vector<bool> suite;
      for (const auto& r : dsr) suite.push_back(component(r, "suite_pass") != 0.0);
      rates.pass_cprime = pass_at_1(suite);
      rates.r_dsr = rate_dsr(dsr);
    }
    if (by_task.count("br")) rates.br_rate = mean_of(by_task["br"]);
    out[bench] = std::move(rates);
  }
  return out;
}

std::string score_to_json(const ScoreRecord& r) {
  nlohmann::ordered_json j;
  j["program_id"] = r.program_id;
  j["task"] = r.task;
  j["model"] = r.model;
  j["s_value"] = r.s_value;
  nlohmann::ordered_json c = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.components) c[k] = v;
  j["components"] = c;
  j["flag"] = r.flag;
  return j.dump();
}

std::string scores_to_jsonl(const std::vector<ScoreRecord>& records) {
  std::string out;
  for (const auto& r : records) out += score_to_json(r) + "\n";
  return out;
}

std::vector<ScoreRecord> scores_from_jsonl(std::string_view text) {
  std::vector<ScoreRecord> out;
  int line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ScoreRecord r;
      r.program_id = j.at("program_id").get<std::string>();
      r.task = j.at("task").get<std::string>();
      r.model = j.value("model", "");
      r.s_value = j.at("s_value").get<double>();
      auto components = j.value("components", nlohmann::json::object());
      for (const auto& [k, v] : components.items()) r.components[k] = v.get<double>();
      r.flag = j.value("flag", "");
      if (r.s_value < 0.0 || r.s_value > 1.0) throw MalformedRecord(line_no, "s_value outside [0, 1]");
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(line_no, std::string("score: ") + e.what());
    }
  }
  return out;
}

}  // namespace reasonbench
