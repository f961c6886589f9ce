#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <map>
#include <random>
#include <set>

#include "reasonbench/error.hpp"
#include "reasonbench/report.hpp"
#include "reasonbench/scoring.hpp"
#include "reasonbench/util/files.hpp"
#include "test_support.hpp"

using namespace reasonbench;

namespace {

ScoreRecord rec(const std::string& model, const std::string& id, const std::string& task, double s,
                std::map<std::string, double> components = {}) {
  ScoreRecord r;
  r.model = model;
  r.program_id = id;
  r.task = task;
  r.s_value = s;
  r.components = std::move(components);
  return r;
}

ScoreRecord sr(const std::string& model, const std::string& id, bool no_test, bool with_test) {
  return rec(model, id, "sr", score_sr(no_test, with_test),
             {{"pass_no_test", no_test ? 1.0 : 0.0}, {"pass_with_test", with_test ? 1.0 : 0.0}});
}

ScoreRecord dsr(const std::string& model, const std::string& id, int c, int cplus, int cprime, bool pass) {
  return rec(model, id, "dsr", score_dsr(c, cplus, cprime, pass),
             {{"loc_c", double(c)}, {"loc_cplus", double(cplus)}, {"loc_cprime", double(cprime)},
              {"suite_pass", pass ? 1.0 : 0.0}});
}

ComplexityProfile profile(int cc, int loc, int dep, int nc, long long ll) {
  ComplexityProfile p;
  p.cc = cc;
  p.loc = loc;
  p.dep = dep;
  p.nc = nc;
  p.ll = ll;
  p.ll_measured = true;
  return p;
}

const std::vector<std::string> kIds = {"humaneval/1", "humaneval/2", "humaneval/3",
                                       "humaneval/4", "classeval/A.f", "classeval/B.g"};

// Two models over six programs and all four tasks, plus one external file.
ReportInputs hand_built() {
  ReportInputs in;
  for (const auto& id : kIds) in.benchmark_of[id] = id.substr(0, id.find('/'));
  in.profiles["humaneval/1"] = profile(1, 3, 0, 0, 4);
  in.profiles["humaneval/2"] = profile(2, 5, 1, 1, 20);
  in.profiles["humaneval/3"] = profile(4, 9, 3, 2, 150);
  in.profiles["humaneval/4"] = profile(3, 7, 2, 1, 60);
  in.profiles["classeval/A.f"] = profile(2, 8, 4, 1, 30);
  in.profiles["classeval/B.g"] = profile(5, 12, 6, 2, 400);

  const double ier_alpha[] = {1, 1, 0, 1, 1, 0};
  const double ier_beta[] = {1, 0, 0, 1, 0, 0};
  for (std::size_t i = 0; i < kIds.size(); ++i) {
    in.scores.push_back(rec("alpha", kIds[i], "ier", ier_alpha[i]));
    in.scores.push_back(rec("beta", kIds[i], "ier", ier_beta[i]));
  }
  in.scores.push_back(sr("alpha", "humaneval/1", true, true));
  in.scores.push_back(sr("alpha", "humaneval/2", false, true));
  in.scores.push_back(sr("alpha", "humaneval/3", false, false));
  in.scores.push_back(sr("alpha", "humaneval/4", true, true));
  in.scores.push_back(sr("beta", "humaneval/1", true, true));
  in.scores.push_back(sr("beta", "humaneval/2", false, false));
  in.scores.push_back(sr("beta", "humaneval/3", false, true));
  in.scores.push_back(sr("beta", "humaneval/4", false, false));
  in.scores.push_back(dsr("alpha", "humaneval/1", 3, 11, 4, true));
  in.scores.push_back(dsr("alpha", "humaneval/3", 9, 30, 30, true));
  in.scores.push_back(dsr("alpha", "classeval/A.f", 8, 20, 9, false));
  in.scores.push_back(dsr("beta", "humaneval/1", 3, 11, 7, true));
  in.scores.push_back(dsr("beta", "humaneval/3", 9, 30, 12, true));
  in.scores.push_back(dsr("beta", "classeval/A.f", 8, 20, 8, true));
  for (const auto& id : {"humaneval/1", "humaneval/2", "classeval/B.g"}) {
    in.scores.push_back(rec("alpha", id, "br", std::string(id) != "humaneval/2", {{"suite_pass", 1}}));
    in.scores.push_back(rec("beta", id, "br", 0, {{"suite_pass", 0}}));
  }

  ExternalOutcomes ext;
  ext.source = "other_study";
  ext.outcomes = {{"humaneval/1", true}, {"humaneval/2", true}, {"humaneval/3", false}, {"classeval/A.f", false}};
  ext.orphans = {"humaneval/99"};
  in.external.push_back(ext);
  return in;
}

std::filesystem::path golden_dir() { return RB_GOLDEN_DIR; }

// RB_UPDATE_GOLDEN=1 rewrites the golden files instead of comparing.
void check_golden(const std::string& name, const std::string& actual) {
  auto path = golden_dir() / name;
  if (std::getenv("RB_UPDATE_GOLDEN")) {
    write_file_atomic(path, actual);
    return;
  }
  ASSERT_TRUE(std::filesystem::exists(path)) << path;
  EXPECT_EQ(read_file(path), actual) << name;
}

std::map<std::string, std::size_t> brute_partition(const std::map<std::string, std::set<std::string>>& sets,
                                                   const std::set<std::string>& universe) {
  std::map<std::string, std::size_t> out;
  for (const auto& id : universe) {
    std::set<std::string> in;
    for (const auto& [task, ids] : sets)
      if (ids.count(id)) in.insert(task);
    ++out[region_signature(in)];
  }
  return out;
}

}  // namespace

TEST(Overlap, TwoTaskExample) {
  auto part = overlap_sets({{"A", {"1", "2"}}, {"B", {"2", "3"}}}, {"1", "2", "3", "4"});
  EXPECT_EQ(part.count({"A"}), 1u);
  EXPECT_EQ(part.count({"B"}), 1u);
  EXPECT_EQ(part.count({"A", "B"}), 1u);
  EXPECT_EQ(part.count({}), 1u);
  EXPECT_EQ(part.all(), 1u);
  EXPECT_EQ(part.universe, 4u);
  EXPECT_EQ(part.region_counts.size(), 4u);
}

TEST(Overlap, DisjointSetsShareNothing) {
  auto part = overlap_sets({{"A", {"1"}}, {"B", {"2"}}, {"C", {"3"}}}, {"1", "2", "3"});
  EXPECT_EQ(part.all(), 0u);
  EXPECT_EQ(part.count({}), 0u);
  EXPECT_EQ(part.count({"A", "B"}), 0u);
}

TEST(Overlap, RejectsIdsOutsideTheUniverse) {
  EXPECT_THROW(overlap_sets({{"A", {"1", "9"}}}, {"1", "2"}), OutOfUniverse);
  EXPECT_THROW(overlap_sets({{"none", {"1"}}}, {"1"}), ConstraintViolation);
  EXPECT_THROW(overlap_sets({{"A+B", {"1"}}}, {"1"}), ConstraintViolation);
}

TEST(Overlap, SignaturesAreSortedNames) {
  EXPECT_EQ(region_signature({}), "none");
  EXPECT_EQ(region_signature({"SR", "BR", "IER"}), "BR+IER+SR");
}

TEST(OverlapProperty, PartitionMatchesBruteForce) {
  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 300; ++trial) {
    int n_tasks = 1 + static_cast<int>(rng() % 4);
    int n_ids = static_cast<int>(rng() % 25);
    std::set<std::string> universe;
    for (int i = 0; i < n_ids; ++i) universe.insert("p" + std::to_string(i));
    std::map<std::string, std::set<std::string>> sets;
    for (int t = 0; t < n_tasks; ++t) {
      auto& s = sets["T" + std::to_string(t)];
      for (const auto& id : universe)
        if (rng() % 2) s.insert(id);
    }
    auto part = overlap_sets(sets, universe);
    EXPECT_EQ(part.region_counts.size(), std::size_t{1} << n_tasks);
    std::size_t total = 0;
    for (const auto& [sig, n] : part.region_counts) total += n;
    EXPECT_EQ(total, universe.size());
    for (const auto& [sig, n] : brute_partition(sets, universe)) EXPECT_EQ(part.region_counts.at(sig), n) << sig;

    // Renaming the tasks moves counts between signatures but keeps them.
    std::map<std::string, std::set<std::string>> renamed;
    std::map<std::string, std::string> name_of;
    for (const auto& [task, ids] : sets) {
      name_of[task] = "X" + std::to_string(n_tasks - (task.back() - '0'));
      renamed[name_of[task]] = ids;
    }
    auto again = overlap_sets(renamed, universe);
    for (const auto& [sig, n] : part.region_counts) {
      std::set<std::string> members, mapped;
      if (sig != "none") {
        std::size_t start = 0;
        while (start <= sig.size()) {
          auto end = sig.find('+', start);
          if (end == std::string::npos) end = sig.size();
          members.insert(sig.substr(start, end - start));
          start = end + 1;
        }
      }
      for (const auto& m : members) mapped.insert(name_of.at(m));
      EXPECT_EQ(again.count(mapped), n);
    }
  }
}

TEST(CorrectIds, TaskSpecificDefinitions) {
  std::vector<ScoreRecord> rs = {rec("m", "a", "ier", 1), rec("m", "b", "ier", 0), sr("m", "c", false, true),
                                 sr("m", "d", true, true), sr("m", "e", true, false),
                                 dsr("m", "f", 3, 11, 4, true), dsr("m", "g", 3, 11, 11, true)};
  EXPECT_EQ(correct_ids(rs, "ier"), (std::set<std::string>{"a"}));
  EXPECT_EQ(correct_ids(rs, "sr"), (std::set<std::string>{"c", "d"}));
  EXPECT_EQ(correct_ids(rs, "dsr"), (std::set<std::string>{"f"}));
}

TEST(ExternalImport, CsvRows) {
  auto path = test_support::write_temp("theirs.csv", "program_id,correct\nhumaneval/1,1\n HumanEval/2 ,false\n");
  auto ext = import_external_outcomes(path, "csv");
  EXPECT_EQ(ext.source, "theirs");
  ASSERT_EQ(ext.outcomes.size(), 2u);
  EXPECT_TRUE(ext.outcomes.at("humaneval/1"));
  EXPECT_FALSE(ext.outcomes.at("humaneval/2"));
  EXPECT_TRUE(ext.orphans.empty());
}

TEST(ExternalImport, JsonlRowsAndOrphans) {
  auto path = test_support::write_temp("jl.jsonl",
                                       "{\"program_id\": \"humaneval/1\", \"correct\": true}\n"
                                       "{\"program_id\": \"mbpp/7\", \"correct\": false}\n");
  auto ext = import_external_outcomes(path, "jsonl", {"humaneval/1", "humaneval/2"});
  EXPECT_EQ(ext.outcomes.size(), 2u);
  EXPECT_EQ(ext.orphans, (std::vector<std::string>{"mbpp/7"}));
}

TEST(ExternalImport, MalformedRowsNameTheRow) {
  auto bad = test_support::write_temp("bad.csv", "program_id,correct\nhumaneval/1,1\nhumaneval/2,maybe\n");
  try {
    import_external_outcomes(bad, "csv");
    FAIL() << "expected MalformedRow";
  } catch (const MalformedRow& e) {
    EXPECT_EQ(e.row(), 3);
  }
  auto dup = test_support::write_temp("dup.csv", "program_id,correct\nhumaneval/1,1\nhumaneval/1,0\n");
  EXPECT_THROW(import_external_outcomes(dup, "csv"), MalformedRow);
  auto no_header = test_support::write_temp("nohdr.csv", "humaneval/1,1\n");
  EXPECT_THROW(import_external_outcomes(no_header, "csv"), MalformedRow);
  EXPECT_THROW(import_external_outcomes(bad, "xlsx"), UnknownFormat);
  EXPECT_THROW(import_external_outcomes(test_support::temp_dir() / "absent.csv", "csv"), IoError);
}

TEST(ExternalImport, NormalizesIds) {
  EXPECT_EQ(normalize_program_id("  HumanEval/12 "), "humaneval/12");
  EXPECT_EQ(normalize_program_id("ClassEval/Calc.add"), "classeval/Calc.add");
}

TEST(Formatting, HalfEvenAtTwoDecimals) {
  EXPECT_EQ(format_percent(rate_sr(147.0 / 164.0, 6, 164)), "92.97");
  EXPECT_EQ(format_percent(0.00125), "0.12");
  EXPECT_EQ(format_percent(0.00135), "0.14");
  EXPECT_EQ(format_percent(0.92965), "92.96");
  EXPECT_EQ(format_percent(1.0), "100.00");
  EXPECT_EQ(format_percent(0.0), "0.00");
  EXPECT_EQ(format_fixed2(-0.675), "-0.68");
  EXPECT_EQ(format_fixed2(0.125), "0.12");
  EXPECT_EQ(format_fixed2(-0.004), "0.00");
  EXPECT_EQ(format_fixed2(0.5), "0.50");
}

TEST(Formatting, ReportFormats) {
  EXPECT_EQ(parse_report_format("md"), ReportFormat::markdown);
  EXPECT_EQ(parse_report_format("markdown"), ReportFormat::markdown);
  EXPECT_EQ(parse_report_format("json"), ReportFormat::json);
  EXPECT_EQ(parse_report_format("csv"), ReportFormat::csv);
  EXPECT_THROW(parse_report_format("html"), Error);
}

TEST(Report, RatesMatchARecomputation) {
  auto in = hand_built();
  auto j = nlohmann::json::parse(report_to_json(summary_tables(in)));
  int checked = 0;
  for (const auto& row : j["rates"]) {
    auto model = row["model"].get<std::string>();
    auto bench = row["benchmark"].get<std::string>();
    std::map<std::string, std::vector<const ScoreRecord*>> by_task;
    for (const auto& r : in.scores)
      if (r.model == model && (bench == "total" || in.benchmark_of.at(r.program_id) == bench))
        by_task[r.task].push_back(&r);
    auto pct = [](double v) { return std::round(v * 10000.0) / 100.0; };
    auto mean = [](const std::vector<const ScoreRecord*>& rs) {
      double s = 0;
      for (const auto* r : rs) s += r->s_value;
      return s / double(rs.size());
    };
    if (by_task.count("ier")) {
      EXPECT_NEAR(row["r_ier"].get<double>(), pct(mean(by_task["ier"])), 1e-9);
    }
    if (by_task.count("sr")) {
      const auto& rs = by_task["sr"];
      double pass_b = 0, success = 0;
      for (const auto* r : rs) {
        pass_b += r->components.at("pass_no_test");
        success += !r->components.at("pass_no_test") && r->components.at("pass_with_test");
      }
      double m = double(rs.size());
      EXPECT_NEAR(row["r_sr"].get<double>(), pct(pass_b / m * std::exp(success / m)), 1e-9);
    } else {
      EXPECT_TRUE(row["r_sr"].is_null());
    }
    if (by_task.count("dsr")) {
      EXPECT_NEAR(row["r_dsr"].get<double>(), pct(mean(by_task["dsr"])), 1e-9);
    }
    if (by_task.count("br")) {
      EXPECT_NEAR(row["br"].get<double>(), pct(mean(by_task["br"])), 1e-9);
    }
    ++checked;
  }
  EXPECT_EQ(checked, 6);  // two models by classeval, humaneval and total
}

TEST(Report, OverlapUsesProgramsScoredOnEveryTask) {
  auto rep = summary_tables(hand_built());
  const OverlapRow* tasks = nullptr;
  for (const auto& o : rep.overlaps)
    if (o.model == "alpha" && o.label == "tasks") tasks = &o;
  ASSERT_NE(tasks, nullptr);
  // Only humaneval/1 has all four tasks scored.
  EXPECT_EQ(tasks->partition.universe, 1u);
  EXPECT_EQ(tasks->partition.task_set, (std::vector<std::string>{"BR", "DSR", "IER", "SR"}));
  EXPECT_EQ(tasks->partition.all(), 1u);
}

TEST(Report, ExternalComparisonAndOrphans) {
  auto rep = summary_tables(hand_built());
  ASSERT_EQ(rep.external.size(), 2u);
  const auto& alpha = rep.external[0];
  EXPECT_EQ(alpha.model, "alpha");
  EXPECT_EQ(alpha.common, 4u);
  EXPECT_EQ(alpha.ours, 3u);  // 1, 2 and A.f
  EXPECT_EQ(alpha.theirs, 2u);
  bool orphan = false;
  for (const auto& o : rep.orphans) orphan |= o.program_id == "humaneval/99" && o.source == "other_study";
  EXPECT_TRUE(orphan);
}

TEST(Report, MissingProfilesLeaveCorrelationsUnavailable) {
  auto in = hand_built();
  in.profiles.clear();
  auto rep = summary_tables(in);
  ASSERT_FALSE(rep.correlations.empty());
  for (const auto& row : rep.correlations) {
    EXPECT_FALSE(row.rho.rho);
    EXPECT_FALSE(row.rho.unavailable.empty());
  }
  auto md = report_to_markdown(rep);
  EXPECT_NE(md.find("no complexity profiles"), std::string::npos);
  EXPECT_NE(md.find("n/a"), std::string::npos);
}

TEST(Report, MarkdownMarksCorrelationRows) {
  auto md = report_to_markdown(summary_tables(hand_built()));
  EXPECT_NE(md.find("| *ρ_CC* |"), std::string::npos);
  EXPECT_NE(md.find("| *ρ_LL* |"), std::string::npos);
  EXPECT_NE(md.find("## IER"), std::string::npos);
}

TEST(Report, ProfilelessIdsAreOrphans) {
  auto in = hand_built();
  in.profiles.erase("classeval/B.g");
  auto rep = summary_tables(in);
  bool found = false;
  for (const auto& o : rep.orphans) found |= o.program_id == "classeval/B.g";
  EXPECT_TRUE(found);
}

TEST(Report, EmptyReportHasHeadersOnly) {
  auto rep = summary_tables({});
  EXPECT_TRUE(rep.rates.empty());
  auto dir = test_support::temp_dir() / "empty_report";
  std::filesystem::create_directories(dir);
  auto files = emit_report(rep, ReportFormat::csv, dir);
  EXPECT_EQ(files.size(), 5u);
  for (const auto& f : files) {
    auto lines = split_lines(read_file(f));
    EXPECT_EQ(lines.size(), 1u) << f;
  }
  auto json = nlohmann::json::parse(report_to_json(rep));
  EXPECT_TRUE(json["rates"].empty());
}

TEST(Report, Deterministic) {
  auto in = hand_built();
  auto shuffled = in;
  std::reverse(shuffled.scores.begin(), shuffled.scores.end());
  EXPECT_EQ(report_to_json(summary_tables(in)), report_to_json(summary_tables(shuffled)));
}

TEST(ReportGolden, Markdown) { check_golden("report.md", report_to_markdown(summary_tables(hand_built()))); }

TEST(ReportGolden, Json) { check_golden("report.json", report_to_json(summary_tables(hand_built()))); }

TEST(ReportGolden, Csv) {
  for (const auto& [name, body] : report_to_csv(summary_tables(hand_built()))) check_golden(name, body);
}

TEST(ReportGolden, EmitWritesTheSameBytes) {
  auto rep = summary_tables(hand_built());
  auto dir = test_support::temp_dir() / "emitted";
  std::filesystem::create_directories(dir);
  auto files = emit_report(rep, ReportFormat::markdown, dir);
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(read_file(files[0]), report_to_markdown(rep));
}
