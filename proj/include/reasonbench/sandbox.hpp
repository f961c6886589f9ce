#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reasonbench/corpus.hpp"

namespace reasonbench {

struct ResourceLimits {
  int timeout_ms = 10000;
  int memory_mb = 512;
  bool network = false;
  // Relative tolerance for floats in io_pair comparisons; 0 means exact
  // canonical-string match.
  double float_rel_tol = 0.0;
};

enum class ExecStatus { value, exception, timeout, resource_kill, harness_error };
std::string_view to_string(ExecStatus s);

struct ExecutionOutcome {
  ExecStatus status = ExecStatus::harness_error;
  std::optional<std::string> value_repr;
  std::string stdout_text;
  std::string stderr_text;
  std::optional<std::string> exception_type;
  double wall_time_ms = 0.0;
  std::string detail;
};

enum class Verdict { pass, fail, error, timeout };
std::string_view to_string(Verdict v);

struct TestVerdict {
  std::string test_id;
  Verdict verdict = Verdict::error;
  std::string observed;  // canonical value, stdout, or exception name
  std::string detail;
};

struct TestSuiteResult {
  std::vector<TestVerdict> per_test;  // in suite order
  bool all_pass = false;
  double duration_ms = 0.0;

  const TestVerdict* find(std::string_view test_id) const;
};

struct LoopSite {
  std::string id;
  int line = 0;
  std::string kind;  // "for" | "while"
  long long iterations = 0;
};

struct LoopTrace {
  std::vector<LoopSite> sites;  // in source order
  bool partial = false;         // some traced run timed out
  // Value/stdout of each traced run, for checking that tracing is transparent.
  std::vector<std::string> observed;
};

// Wire-level job and result (see docs/shim-protocol.md).
enum class JobKind { call, stdin_run, test, trace };

struct ShimJob {
  JobKind kind = JobKind::call;
  std::string source;
  std::optional<std::string> entry_point;
  std::string payload;
  // For trace jobs: what to run under instrumentation.
  JobKind traced = JobKind::call;
  ResourceLimits limits;
};

struct ShimResult {
  std::string status;  // ExecStatus names plus "protocol_error"
  std::optional<std::string> value_repr;
  std::string stdout_text;
  std::string stderr_text;
  std::optional<std::string> exception_type;
  double wall_time_ms = 0.0;
  std::vector<LoopSite> sites;
  std::string detail;
  std::string phase;  // "load" when the module itself failed, else "run"
};

std::string encode_job(const ShimJob& job, std::string_view id);
ShimResult decode_result(std::string_view line);

/// Compares stdout the way stdio tests do: trailing whitespace on each line
/// and trailing blank lines are ignored.
std::string normalize_stdout(std::string_view text);

class ShimProcess;

/// Dispatches jobs to a pool of long-lived runner shim processes. Every
/// job runs in a fresh child the shim forks, so tests cannot observe each
/// other's state. Thread-safe.
class Sandbox {
 public:
  struct Options {
    std::string python = "python3";
    std::filesystem::path shim;  // empty: $REASONBENCH_SHIM
    int parallel = 1;
    ResourceLimits limits;
    int grace_ms = 1000;
    // Modules the shim imports once before forking jobs.
    std::vector<std::string> preload;
  };

  /// Throws SandboxUnavailable when the shim or interpreter is missing.
  explicit Sandbox(Options options);
  ~Sandbox();
  Sandbox(const Sandbox&) = delete;
  Sandbox& operator=(const Sandbox&) = delete;

  const ResourceLimits& limits() const { return options_.limits; }
  int parallel() const { return options_.parallel; }

  ExecutionOutcome execute_call(const std::string& source, const std::string& entry_point,
                                const std::string& input_repr, const ResourceLimits& limits);
  ExecutionOutcome execute_call(const std::string& source, const std::string& entry_point,
                                const std::string& input_repr) {
    return execute_call(source, entry_point, input_repr, options_.limits);
  }
  ExecutionOutcome execute_stdin(const std::string& source, const std::string& stdin_text,
                                 const ResourceLimits& limits);

  /// Runs one io_pair input of `program` against `source` (call or stdin
  /// depending on the program's invocation mode).
  ExecutionOutcome execute(const Program& program, const std::string& source, const std::string& input_repr);

  TestSuiteResult run_tests(const std::string& source, const Program& program,
                            const std::vector<TestCase>& tests, const ResourceLimits& limits);
  TestSuiteResult run_tests(const std::string& source, const Program& program) {
    return run_tests(source, program, program.tests, options_.limits);
  }

  LoopTrace trace_loops(const std::string& source, const Program& program, const std::vector<TestCase>& tests,
                        const ResourceLimits& limits);

  ShimResult run_job(const ShimJob& job);
  std::vector<ShimResult> run_jobs(const std::vector<ShimJob>& jobs);

  /// Calls fn(i) for i in [0, n) on up to `parallel` threads.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

 private:
  std::unique_ptr<ShimProcess> checkout();
  void checkin(std::unique_ptr<ShimProcess> p);
  TestVerdict judge(const TestCase& test, const Program& program, const ShimResult& r,
                    const ResourceLimits& limits) const;
  ShimJob test_job(const std::string& source, const Program& program, const TestCase& test,
                   const ResourceLimits& limits) const;

  Options options_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<ShimProcess>> idle_;
  int live_ = 0;
  std::uint64_t next_id_ = 0;
};

/// Default modules preloaded by the shim: the third-party APIs that
/// transformations may inject.
std::vector<std::string> default_preload();

/// Path of the shim from $REASONBENCH_SHIM, or empty.
std::filesystem::path shim_from_environment();

}  // namespace reasonbench
