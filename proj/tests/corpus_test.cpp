#include <gtest/gtest.h>

#include <spdlog/sinks/ringbuffer_sink.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <map>

#include <json.hpp>

#include "fixtures.hpp"
#include "reasonbench/corpus.hpp"
#include "reasonbench/error.hpp"
#include "reasonbench/util/files.hpp"
#include "test_support.hpp"

using namespace reasonbench;

namespace {

std::string record(const std::string& id, const std::string& entry_json) {
  return R"j({"schema_version":1,"id":")j" + id +
         R"j(","benchmark":"other","invocation_mode":"function_call","entry_point":)j" + entry_json +
         R"j(,"source":"def f(x):\n    return x\n","nl_spec":null,"class_context":null,"tests":[{"id":"t0","kind":"io_pair","input_repr":"(1)","expected_repr":"1"}],"reference_solution":null,"buggy_source":null})j";
}

}  // namespace

TEST(Corpus, CanonicalRoundTripIsByteIdentical) {
  auto p = fixtures::sum_program();
  p.nl_spec = "Sum the integers between 1 and N whose digit sum lies in [A, B].\n\"quoted\" \u00e9";
  p.buggy_source = std::string(fixtures::kSumOfInteger) + "# bug\n";
  Program q;
  q.id = "avatar/echo";
  q.benchmark = Benchmark::avatar;
  q.invocation_mode = InvocationMode::stdio;
  q.source = "print(input()[::-1])\n";
  q.tests = {{"t0", TestKind::io_pair, "abc\n", "cba\n"}};
  auto text = serialize_corpus({p, q});
  auto loaded = parse_corpus(text, CorpusFormat::canonical_jsonl);
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(serialize_corpus(loaded), text);
  EXPECT_EQ(loaded[0].nl_spec, p.nl_spec);
  EXPECT_EQ(loaded[1].invocation_mode, InvocationMode::stdio);
  EXPECT_FALSE(loaded[1].entry_point.has_value());

  auto path = test_support::temp_dir() / "corpus.jsonl";
  save_corpus(path, loaded);
  EXPECT_EQ(read_file(path), text);
  EXPECT_EQ(serialize_corpus(load_corpus(path, CorpusFormat::canonical_jsonl)), text);
}

TEST(Corpus, EmptyFileGivesEmptyCorpusAndWarns) {
  auto sink = std::make_shared<spdlog::sinks::ringbuffer_sink_mt>(16);
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(std::make_shared<spdlog::logger>("capture", sink));
  auto path = test_support::temp_dir() / "empty.jsonl";
  write_file_atomic(path, "");
  auto programs = load_corpus(path, CorpusFormat::canonical_jsonl);
  spdlog::set_default_logger(previous);
  EXPECT_TRUE(programs.empty());
  auto logged = sink->last_formatted();
  ASSERT_EQ(logged.size(), 1u);
  EXPECT_NE(logged[0].find("empty"), std::string::npos);
}

TEST(Corpus, MissingEntryPointIsMalformedAtItsLine) {
  auto text = record("a", "\"f\"") + "\n" + record("b", "\"f\"") + "\n" + record("c", "null") + "\n";
  try {
    parse_corpus(text, CorpusFormat::canonical_jsonl);
    FAIL() << "expected MalformedRecord";
  } catch (const MalformedRecord& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(Corpus, SchemaViolations) {
  EXPECT_THROW(parse_corpus(record("a", "\"f\"") + "\n" + record("a", "\"f\"") + "\n", CorpusFormat::canonical_jsonl),
               DuplicateId);
  EXPECT_THROW(parse_corpus("{not json}\n", CorpusFormat::canonical_jsonl), MalformedRecord);
  auto no_version = record("a", "\"f\"");
  no_version.replace(no_version.find("\"schema_version\":1,"), 19, "");
  EXPECT_THROW(parse_corpus(no_version, CorpusFormat::canonical_jsonl), MalformedRecord);
  auto empty_expected = record("a", "\"f\"");
  empty_expected.replace(empty_expected.find("\"expected_repr\":\"1\""), 19, "\"expected_repr\":\"\"");
  EXPECT_THROW(parse_corpus(empty_expected, CorpusFormat::canonical_jsonl), MalformedRecord);
  EXPECT_THROW(parse_format("xml"), UnknownFormat);
  EXPECT_EQ(parse_format("humaneval_like"), CorpusFormat::humaneval_like);
}

TEST(Corpus, HumanEvalAdapterSplitsLiteralAsserts) {
  nlohmann::json rec = {
      {"task_id", "HumanEval/13"},
      {"prompt", "def greatest_common_divisor(a: int, b: int) -> int:\n    \"\"\"Return the gcd of a and b.\"\"\"\n"},
      {"canonical_solution", "    while b:\n        a, b = b, a % b\n    return a\n"},
      {"test",
       "METADATA = {}\n\ndef check(candidate):\n    assert candidate(3, 7) == 1\n    assert candidate(10, 15) == 5\n"
       "    assert abs(candidate(49, 14) - 7) < 1\n"},
      {"entry_point", "greatest_common_divisor"}};
  auto programs = parse_corpus(rec.dump() + "\n", CorpusFormat::humaneval_like);
  ASSERT_EQ(programs.size(), 1u);
  const auto& p = programs[0];
  EXPECT_EQ(p.id, "humaneval/13");
  EXPECT_EQ(p.benchmark, Benchmark::humaneval);
  ASSERT_EQ(p.tests.size(), 3u);
  EXPECT_EQ(p.tests[0].input_repr, "(3, 7)");
  EXPECT_EQ(p.tests[1].expected_repr, "5");
  EXPECT_EQ(p.tests[2].kind, TestKind::assertion_code);
  EXPECT_NE(p.tests[2].input_repr.find("check(greatest_common_divisor)"), std::string::npos);
  EXPECT_TRUE(p.nl_spec.has_value());
}

TEST(Corpus, CruxEvalAdapter) {
  nlohmann::json rec = {{"id", "sample_0"}, {"code", "def f(nums):\n    return nums[::-1]"},
                        {"input", "[1, 2, 3]"}, {"output", "[3,2,1]"}};
  auto programs = parse_corpus(rec.dump() + "\n", CorpusFormat::cruxeval_like);
  ASSERT_EQ(programs.size(), 1u);
  EXPECT_EQ(programs[0].id, "cruxeval/sample_0");
  EXPECT_EQ(programs[0].entry_point, "f");
  EXPECT_EQ(programs[0].tests[0].input_repr, "([1, 2, 3])");
  EXPECT_EQ(programs[0].tests[0].expected_repr, "[3, 2, 1]");
}

TEST(Corpus, CallArguments) {
  EXPECT_EQ(call_arguments("(20, 2, 5)"), "20, 2, 5");
  EXPECT_EQ(call_arguments(" (7) "), "7");
  EXPECT_EQ(call_arguments("((1, 2),)"), "(1, 2),");
  EXPECT_EQ(call_arguments("(1), (2)"), "(1), (2)");
  EXPECT_EQ(call_arguments("'(', ')'"), "'(', ')'");
  EXPECT_EQ(call_arguments("('a)', x=1)"), "'a)', x=1");
  EXPECT_EQ(call_arguments("[1, 2]"), "[1, 2]");
}

TEST(Corpus, SrTestSelectionIsDeterministic) {
  auto p = fixtures::sum_program();
  EXPECT_EQ(select_sr_test(p, 42).id, select_sr_test(p, 42).id);
  Program one = p;
  one.tests.resize(1);
  EXPECT_EQ(select_sr_test(one, 1234).id, "t0");
  Program none = p;
  none.tests = {{"check", TestKind::assertion_code, "assert True\n", ""}};
  EXPECT_THROW(select_sr_test(none, 1), NoIoPairTests);
}

TEST(Corpus, SrTestSelectionIsUniformOverSeeds) {
  Program p;
  p.id = "x/five";
  for (int i = 0; i < 5; ++i) p.tests.push_back({"t" + std::to_string(i), TestKind::io_pair, "(1)", "1"});
  std::map<std::string, int> counts;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) ++counts[select_sr_test(p, seed).id];
  double chi2 = 0;
  for (int i = 0; i < 5; ++i) {
    int c = counts["t" + std::to_string(i)];
    EXPECT_NEAR(c, 2000, 150);
    chi2 += (c - 2000.0) * (c - 2000.0) / 2000.0;
  }
  // 4 degrees of freedom, p = 0.001.
  EXPECT_LT(chi2, 18.47);
}

TEST(Corpus, ValidationFlagsInvalidAndNondeterministic) {
  auto good = fixtures::sum_program();
  auto wrong = good;
  wrong.id = "desk/wrong";
  wrong.tests[0].expected_repr = "85";
  Program clock;
  clock.id = "desk/clock";
  clock.source = "import time\ndef now():\n    return time.perf_counter_ns()\n";
  clock.entry_point = "now";
  clock.tests = {{"t0", TestKind::io_pair, "()", "0"}};
  auto report = validate_corpus({good, wrong, clock}, fixtures::shared_sandbox());
  ASSERT_EQ(report.programs.size(), 3u);
  EXPECT_EQ(report.find("desk/sum_of_integer")->status, ValidationStatus::valid);
  const auto* w = report.find("desk/wrong");
  EXPECT_EQ(w->status, ValidationStatus::invalid);
  EXPECT_EQ(w->failing_tests, std::vector<std::string>{"t0"});
  EXPECT_EQ(report.find("desk/clock")->status, ValidationStatus::nondeterministic);
  EXPECT_EQ(report.count(ValidationStatus::valid), 1u);
}

TEST(Corpus, ValidationIsIdempotent) {
  auto good = fixtures::sum_program();
  auto a = validate_corpus({good}, fixtures::shared_sandbox());
  auto b = validate_corpus({good}, fixtures::shared_sandbox());
  EXPECT_EQ(a.programs[0].status, b.programs[0].status);
  EXPECT_EQ(a.programs[0].failing_tests, b.programs[0].failing_tests);
}
