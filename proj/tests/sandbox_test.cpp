#include <gtest/gtest.h>

#include <numeric>

#include <json.hpp>

#include "fixtures.hpp"
#include "reasonbench/error.hpp"
#include "reasonbench/sandbox.hpp"
#include "test_support.hpp"

using namespace reasonbench;

namespace {

Sandbox& sb() { return fixtures::shared_sandbox(); }

Program function_program(std::string id, std::string source, std::string entry) {
  Program p;
  p.id = std::move(id);
  p.source = std::move(source);
  p.entry_point = std::move(entry);
  return p;
}

long long digit_length_total(int n) {
  long long total = 0;
  for (int i = 1; i <= n; ++i) total += static_cast<long long>(std::to_string(i).size());
  return total;
}

}  // namespace

TEST(Sandbox, ExecutesTheInContextExample) {
  auto out = sb().execute_call(fixtures::kSumOfInteger, "sum_of_integer", "(20, 2, 5)");
  ASSERT_EQ(out.status, ExecStatus::value) << out.detail;
  EXPECT_EQ(out.value_repr, "84");
}

TEST(Sandbox, GcdMatchesReferenceImplementation) {
  auto out = sb().execute_call(fixtures::kGcd, "greatest_common_divisor", "(144, 60)");
  ASSERT_EQ(out.status, ExecStatus::value);
  EXPECT_EQ(out.value_repr, std::to_string(std::gcd(144, 60)));
}

TEST(Sandbox, CanonicalValueRendering) {
  auto src = "def f():\n    return {'b': [1.5, (2,)], 'a': {3, 1}}, 'x'\n";
  auto out = sb().execute_call(src, "f", "()");
  ASSERT_EQ(out.status, ExecStatus::value);
  EXPECT_EQ(out.value_repr, "({'a': {1, 3}, 'b': [1.5, (2,)]}, 'x')");
}

TEST(Sandbox, ForcedTimeout) {
  ResourceLimits limits;
  limits.timeout_ms = 2000;
  auto out = sb().execute_call("def spin():\n    while True:\n        pass\n", "spin", "()", limits);
  EXPECT_EQ(out.status, ExecStatus::timeout);
  EXPECT_GE(out.wall_time_ms, 2000.0);
  EXPECT_LT(out.wall_time_ms, 3000.0 + 1000.0);
  // The pool keeps working after a timeout.
  EXPECT_EQ(sb().execute_call(fixtures::kGcd, "greatest_common_divisor", "(9, 6)").value_repr, "3");
}

TEST(Sandbox, TimeoutSurvivesSwallowedSoftLimit) {
  ResourceLimits limits;
  limits.timeout_ms = 500;
  auto src = "def stubborn():\n    while True:\n        try:\n            while True:\n                pass\n"
             "        except BaseException:\n            pass\n";
  auto out = sb().execute_call(src, "stubborn", "()", limits);
  EXPECT_EQ(out.status, ExecStatus::timeout);
  EXPECT_LT(out.wall_time_ms, 500.0 + 2000.0);
}

TEST(Sandbox, ExceptionsAreStatusesNotErrors) {
  auto out = sb().execute_call("def f(x):\n    return 1 // x\n", "f", "(0)");
  EXPECT_EQ(out.status, ExecStatus::exception);
  EXPECT_EQ(out.exception_type, "ZeroDivisionError");
  EXPECT_FALSE(out.value_repr.has_value());
}

TEST(Sandbox, MemoryHogIsResourceKilled) {
  ResourceLimits limits;
  limits.memory_mb = 64;
  auto out = sb().execute_call("def f():\n    return len(bytearray(1 << 30))\n", "f", "()", limits);
  EXPECT_EQ(out.status, ExecStatus::resource_kill);
}

TEST(Sandbox, NetworkIsDisabled) {
  auto src = "import socket\ndef f():\n    try:\n        socket.create_connection(('127.0.0.1', 9), timeout=1)\n"
             "        return 'connected'\n    except OSError:\n        return 'refused'\n";
  EXPECT_EQ(sb().execute_call(src, "f", "()").value_repr, "'refused'");
}

TEST(Sandbox, MethodEntryPointsInstantiateTheClass) {
  auto src = "class Calc:\n    def __init__(self):\n        self.base = 10\n    def add(self, x):\n"
             "        return self.base + x\n";
  EXPECT_EQ(sb().execute_call(src, "Calc.add", "(5)").value_repr, "15");
}

TEST(Sandbox, StdinPrograms) {
  Program p;
  p.id = "avatar/sum";
  p.invocation_mode = InvocationMode::stdio;
  p.source = "import sys\nn = int(input())\nxs = list(map(int, sys.stdin.readline().split()))\nprint(sum(xs[:n]), '  ')\n";
  p.tests = {{"t0", TestKind::io_pair, "2\n3 4 5\n", "7\n"}, {"t1", TestKind::io_pair, "3\n1 1 1\n", "3"},
             {"t2", TestKind::io_pair, "1\n5\n", "6\n"}};
  auto r = sb().run_tests(p.source, p);
  ASSERT_EQ(r.per_test.size(), 3u);
  EXPECT_EQ(r.per_test[0].verdict, Verdict::pass);
  EXPECT_EQ(r.per_test[1].verdict, Verdict::pass);
  EXPECT_EQ(r.per_test[2].verdict, Verdict::fail);
  EXPECT_FALSE(r.all_pass);

  auto out = sb().execute(p, p.source, "2\n3 4 5\n");
  EXPECT_EQ(out.status, ExecStatus::value);
  EXPECT_FALSE(out.value_repr);
  EXPECT_EQ(normalize_stdout(out.stdout_text), "7");
}

TEST(Sandbox, NormalizeStdout) {
  EXPECT_EQ(normalize_stdout("a  \nb\t\n\n"), "a\nb");
  EXPECT_EQ(normalize_stdout("a\r\n"), "a");
  EXPECT_EQ(normalize_stdout(""), "");
}

TEST(Sandbox, ReferenceSuitePasses) {
  auto p = fixtures::sum_program();
  auto r = sb().run_tests(p.source, p);
  EXPECT_TRUE(r.all_pass);
  for (const auto& t : r.per_test) EXPECT_EQ(t.verdict, Verdict::pass) << t.test_id << " " << t.detail;
}

TEST(Sandbox, BuggyVariantFailsExactlyTheRevealingTest) {
  auto p = fixtures::sum_program();
  // Excluding the upper bound only matters when some digit sum equals B.
  std::string buggy = p.source;
  buggy.replace(buggy.find("A <= sum_order <= B"), 19, "A <= sum_order < B");
  std::vector<TestCase> tests = {{"t0", TestKind::io_pair, "(20, 2, 5)", "84"},
                                 {"t1", TestKind::io_pair, "(9, 1, 20)", "45"}};
  auto r = sb().run_tests(buggy, p, tests, sb().limits());
  EXPECT_FALSE(r.all_pass);
  EXPECT_EQ(r.find("t0")->verdict, Verdict::fail);
  EXPECT_EQ(r.find("t1")->verdict, Verdict::pass);
}

TEST(Sandbox, SyntaxErrorMarksEveryTestError) {
  auto p = fixtures::sum_program();
  auto r = sb().run_tests("def sum_of_integer(N, A, B)\n    return 0\n", p);
  ASSERT_EQ(r.per_test.size(), p.tests.size());
  for (const auto& t : r.per_test) EXPECT_EQ(t.verdict, Verdict::error);
}

TEST(Sandbox, AssertionTests) {
  auto p = function_program("x/gcd", fixtures::kGcd, "greatest_common_divisor");
  std::vector<TestCase> tests = {
      {"ok", TestKind::assertion_code, "assert greatest_common_divisor(12, 18) == 6\n", ""},
      {"bad", TestKind::assertion_code, "assert greatest_common_divisor(12, 18) == 5\n", ""},
      {"err", TestKind::assertion_code, "undefined_name()\n", ""}};
  auto r = sb().run_tests(p.source, p, tests, sb().limits());
  EXPECT_EQ(r.find("ok")->verdict, Verdict::pass);
  EXPECT_EQ(r.find("bad")->verdict, Verdict::fail);
  EXPECT_EQ(r.find("err")->verdict, Verdict::error);
}

TEST(Sandbox, TestsAreIsolated) {
  auto src = "STATE = []\ndef push(x):\n    STATE.append(x)\n    return len(STATE)\n";
  auto p = function_program("x/state", src, "push");
  p.tests = {{"a", TestKind::io_pair, "(1)", "1"}, {"b", TestKind::io_pair, "(2)", "1"}};
  EXPECT_TRUE(sb().run_tests(p.source, p).all_pass);
}

TEST(Sandbox, FloatToleranceIsOptIn) {
  auto p = function_program("x/third", "def f():\n    return 0.1 + 0.2\n", "f");
  p.tests = {{"t", TestKind::io_pair, "()", "0.3"}};
  EXPECT_FALSE(sb().run_tests(p.source, p).all_pass);
  auto limits = sb().limits();
  limits.float_rel_tol = 1e-6;
  EXPECT_TRUE(sb().run_tests(p.source, p, p.tests, limits).all_pass);
}

TEST(Sandbox, TraceCountsTheInContextExample) {
  auto p = fixtures::sum_program();
  std::vector<TestCase> only = {p.tests[0]};
  auto trace = sb().trace_loops(p.source, p, only, sb().limits());
  ASSERT_EQ(trace.sites.size(), 2u);
  EXPECT_EQ(trace.sites[0].kind, "for");
  EXPECT_EQ(trace.sites[0].line, 3);
  EXPECT_EQ(trace.sites[0].iterations, 20);
  EXPECT_EQ(trace.sites[1].iterations, digit_length_total(20));
  EXPECT_EQ(trace.sites[1].iterations, 31);
  EXPECT_FALSE(trace.partial);
  ASSERT_EQ(trace.observed.size(), 1u);
  EXPECT_EQ(trace.observed[0], "84");
}

TEST(Sandbox, TraceSumsAcrossTestsAndHandlesShapes) {
  auto nested = function_program("x/nested",
                                 "def f(a, b):\n    t = 0\n    for i in range(a):\n        for j in range(b):\n"
                                 "            t += 1\n    return t\n",
                                 "f");
  std::vector<TestCase> one = {{"t", TestKind::io_pair, "(3, 4)", "12"}};
  auto trace = sb().trace_loops(nested.source, nested, one, sb().limits());
  ASSERT_EQ(trace.sites.size(), 2u);
  EXPECT_EQ(trace.sites[0].iterations, 3);
  EXPECT_EQ(trace.sites[1].iterations, 12);
  std::vector<TestCase> two = {one[0], {"u", TestKind::io_pair, "(2, 2)", "4"}};
  trace = sb().trace_loops(nested.source, nested, two, sb().limits());
  EXPECT_EQ(trace.sites[0].iterations, 5);
  EXPECT_EQ(trace.sites[1].iterations, 16);

  auto flat = function_program("x/flat", "def f(x):\n    return x * 2\n", "f");
  EXPECT_TRUE(sb().trace_loops(flat.source, flat, one, sb().limits()).sites.empty());

  auto brk = function_program("x/brk",
                              "def f(n):\n    k = 0\n    while True:\n        k += 1\n        if k == 2:\n"
                              "            break\n    for i in range(n):\n        if i == 1:\n            break\n"
                              "    return k\n",
                              "f");
  trace = sb().trace_loops(brk.source, brk, {{"t", TestKind::io_pair, "(5)", "2"}}, sb().limits());
  ASSERT_EQ(trace.sites.size(), 2u);
  EXPECT_EQ(trace.sites[0].kind, "while");
  EXPECT_EQ(trace.sites[0].iterations, 2);
  EXPECT_EQ(trace.sites[1].iterations, 2);
}

TEST(Sandbox, TracingIsTransparent) {
  auto p = fixtures::sum_program();
  auto trace = sb().trace_loops(p.source, p, p.tests, sb().limits());
  ASSERT_EQ(trace.observed.size(), p.tests.size());
  for (std::size_t i = 0; i < p.tests.size(); ++i) EXPECT_EQ(trace.observed[i], p.tests[i].expected_repr);
}

TEST(Sandbox, TraceTimeoutKeepsPartialCounts) {
  auto p = function_program("x/long", "def f():\n    i = 0\n    while True:\n        i += 1\n", "f");
  ResourceLimits limits;
  limits.timeout_ms = 300;
  auto trace = sb().trace_loops(p.source, p, {{"t", TestKind::io_pair, "()", "0"}}, limits);
  EXPECT_TRUE(trace.partial);
  ASSERT_EQ(trace.sites.size(), 1u);
  EXPECT_GT(trace.sites[0].iterations, 0);
}

TEST(Sandbox, DeterministicAcrossRunsAndParallelism) {
  auto p = fixtures::sum_program();
  auto four = fixtures::sandbox(4);
  std::vector<TestCase> many;
  for (int n = 1; n <= 24; ++n) many.push_back({"n" + std::to_string(n), TestKind::io_pair,
                                                "(" + std::to_string(n * 7) + ", 3, 9)", "0"});
  auto a = four->run_tests(p.source, p, many, four->limits());
  auto b = sb().run_tests(p.source, p, many, sb().limits());
  ASSERT_EQ(a.per_test.size(), b.per_test.size());
  for (std::size_t i = 0; i < a.per_test.size(); ++i) {
    EXPECT_EQ(a.per_test[i].test_id, many[i].id);
    EXPECT_EQ(a.per_test[i].observed, b.per_test[i].observed);
  }
}

TEST(Sandbox, MissingShimIsUnavailable) {
  Sandbox::Options o;
  o.shim = "/nonexistent/shim.py";
  EXPECT_THROW(Sandbox{o}, SandboxUnavailable);
  o.shim = RB_FAKE_SHIM;
  o.python = "no-such-python-binary";
  EXPECT_THROW(Sandbox{o}, SandboxUnavailable);
}

TEST(Sandbox, JobEncodingRoundTrip) {
  ShimJob job;
  job.kind = JobKind::trace;
  job.traced = JobKind::stdin_run;
  job.source = "print('a\\nb')\n";
  job.payload = "line1\nline2\n";
  auto line = encode_job(job, "j7");
  EXPECT_EQ(line.find('\n'), std::string::npos);
  auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["kind"], "trace");
  EXPECT_EQ(j["traced"], "stdin_run");
  EXPECT_EQ(j["payload"], job.payload);
  EXPECT_TRUE(j["entry_point"].is_null());
  EXPECT_EQ(j["limits"]["timeout_ms"], 10000);

  auto r = decode_result(R"({"id":"j7","status":"value","value_repr":"3","stdout":"","sites":[{"id":"L1","line":2,"kind":"for"}],"loop_counts":{"L1":4}})");
  EXPECT_EQ(r.status, "value");
  ASSERT_EQ(r.sites.size(), 1u);
  EXPECT_EQ(r.sites[0].iterations, 4);
  EXPECT_THROW(decode_result("garbage"), HarnessError);
}

TEST(Sandbox, ShimSurvivesMalformedJobs) {
  ShimJob job;
  job.kind = JobKind::call;
  job.source = fixtures::kGcd;
  job.entry_point = "greatest_common_divisor";
  job.payload = "4, 6";
  std::string payload = encode_job(job, "framed");
  std::string input = "not-a-record\n{\"kind\":\"call\",\"source\":\"x=1\"}\n@" + std::to_string(payload.size()) +
                      "\n" + payload + "\n";
  auto path = test_support::write_temp("malformed_jobs.txt", input);
  auto lines = test_support::run_python_lines("import subprocess, sys\n"
                                              "out = subprocess.run([sys.executable, '" RB_FAKE_SHIM "'], stdin=open('" +
                                              path + "'), capture_output=True, text=True).stdout\nprint(out, end='')\n");
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_NE(lines[0].find("reasonbench-shim"), std::string::npos);
  EXPECT_EQ(decode_result(lines[1]).status, "protocol_error");
  EXPECT_EQ(decode_result(lines[2]).status, "protocol_error");
  auto last = decode_result(lines[3]);
  EXPECT_EQ(last.status, "value");
  EXPECT_EQ(last.value_repr, "2");
}
