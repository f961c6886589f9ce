#include "reasonbench/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <json.hpp>
#include <thread>

#include "reasonbench/error.hpp"
#include "reasonbench/py/literal.hpp"

extern char** environ;

namespace reasonbench {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string_view to_string(ExecStatus s) {
  switch (s) {
    case ExecStatus::value: return "value";
    case ExecStatus::exception: return "exception";
    case ExecStatus::timeout: return "timeout";
    case ExecStatus::resource_kill: return "resource_kill";
    case ExecStatus::harness_error: return "harness_error";
  }
  return "harness_error";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::error: return "error";
    case Verdict::timeout: return "timeout";
  }
  return "error";
}

const TestVerdict* TestSuiteResult::find(std::string_view test_id) const {
  for (const auto& t : per_test)
    if (t.test_id == test_id) return &t;
  return nullptr;
}

namespace {

std::string_view job_kind_name(JobKind k) {
  switch (k) {
    case JobKind::call: return "call";
    case JobKind::stdin_run: return "stdin_run";
    case JobKind::test: return "test";
    case JobKind::trace: return "trace";
  }
  return "call";
}

ExecStatus status_from(const std::string& s) {
  if (s == "value") return ExecStatus::value;
  if (s == "exception") return ExecStatus::exception;
  if (s == "timeout") return ExecStatus::timeout;
  if (s == "resource_kill") return ExecStatus::resource_kill;
  return ExecStatus::harness_error;
}

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string resolve_executable(const std::string& name) {
  if (name.find('/') != std::string::npos) return ::access(name.c_str(), X_OK) == 0 ? name : std::string();
  const char* path = std::getenv("PATH");
  std::string dirs = path ? path : "/usr/bin:/bin";
  std::size_t start = 0;
  while (start <= dirs.size()) {
    auto colon = dirs.find(':', start);
    auto dir = dirs.substr(start, colon == std::string::npos ? std::string::npos : colon - start);
    auto candidate = (dir.empty() ? std::string(".") : dir) + "/" + name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  return {};
}

}  // namespace

std::string encode_job(const ShimJob& job, std::string_view id) {
  json j;
  j["id"] = id;
  j["kind"] = job_kind_name(job.kind);
  j["source"] = job.source;
  j["entry_point"] = job.entry_point ? json(*job.entry_point) : json(nullptr);
  j["payload"] = job.payload;
  if (job.kind == JobKind::trace) j["traced"] = job_kind_name(job.traced);
  j["limits"] = {{"timeout_ms", job.limits.timeout_ms},
                 {"memory_mb", job.limits.memory_mb},
                 {"network", job.limits.network}};
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

ShimResult decode_result(std::string_view line) {
  ShimResult r;
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error&) {
    throw HarnessError("shim sent a non-JSON result");
  }
  if (!j.is_object() || !j.contains("status") || !j["status"].is_string())
    throw HarnessError("shim result lacks a status");
  auto str = [&](const char* k) -> std::string {
    auto it = j.find(k);
    return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
  };
  r.status = j["status"].get<std::string>();
  if (j.contains("value_repr") && j["value_repr"].is_string()) r.value_repr = j["value_repr"].get<std::string>();
  r.stdout_text = str("stdout");
  r.stderr_text = str("stderr");
  if (j.contains("exception_type") && j["exception_type"].is_string())
    r.exception_type = j["exception_type"].get<std::string>();
  if (j.contains("wall_time_ms") && j["wall_time_ms"].is_number()) r.wall_time_ms = j["wall_time_ms"].get<double>();
  r.detail = str("detail");
  r.phase = str("phase");
  if (j.contains("sites") && j["sites"].is_array()) {
    for (const auto& s : j["sites"]) {
      LoopSite site;
      site.id = s.value("id", "");
      site.line = s.value("line", 0);
      site.kind = s.value("kind", "");
      r.sites.push_back(std::move(site));
    }
  }
  if (j.contains("loop_counts") && j["loop_counts"].is_object()) {
    for (auto& site : r.sites) {
      auto it = j["loop_counts"].find(site.id);
      if (it != j["loop_counts"].end() && it->is_number_integer()) site.iterations = it->get<long long>();
    }
  }
  return r;
}

std::string normalize_stdout(std::string_view text) {
  std::string out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    auto end = line.find_last_not_of(" \t\r");
    out.append(line.substr(0, end == std::string_view::npos ? 0 : end + 1));
    out += '\n';
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

// One running shim interpreter, driven over its stdin/stdout.
class ShimProcess {
 public:
  ShimProcess(const std::string& python, const std::filesystem::path& shim, const std::vector<std::string>& preload) {
    int in_pipe[2], out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0)
      throw SandboxUnavailable(std::string("pipe: ") + std::strerror(errno));

    std::vector<std::string> env_store;
    for (char** e = environ; *e; ++e) {
      std::string_view kv(*e);
      if (kv.rfind("PYTHONHASHSEED=", 0) == 0 || kv.rfind("REASONBENCH_SHIM_PRELOAD=", 0) == 0) continue;
      env_store.emplace_back(kv);
    }
    std::string pre;
    for (const auto& m : preload) pre += (pre.empty() ? "" : ",") + m;
    for (std::string kv : {"PYTHONHASHSEED=0", "PYTHONDONTWRITEBYTECODE=1", "PYTHONIOENCODING=utf-8",
                           "OPENBLAS_NUM_THREADS=1", "OMP_NUM_THREADS=1", "MKL_NUM_THREADS=1"})
      env_store.push_back(kv);
    env_store.push_back("REASONBENCH_SHIM_PRELOAD=" + pre);
    std::vector<char*> envp;
    for (auto& s : env_store) envp.push_back(s.data());
    envp.push_back(nullptr);
    std::string arg0 = python, arg1 = "-u", arg2 = shim.string();
    std::vector<char*> argv = {arg0.data(), arg1.data(), arg2.data(), nullptr};

    pid_t pid = ::fork();
    if (pid < 0) throw SandboxUnavailable(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
      ::setpgid(0, 0);
      ::dup2(in_pipe[0], 0);
      ::dup2(out_pipe[1], 1);
      int devnull = ::open("/dev/null", O_WRONLY);
      if (devnull >= 0) ::dup2(devnull, 2);
      ::execve(python.c_str(), argv.data(), envp.data());
      ::_exit(127);
    }
    ::setpgid(pid, pid);
    pid_ = pid;
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];

    auto hello = read_message(Clock::now() + std::chrono::seconds(120));
    if (!hello) {
      terminate();
      throw SandboxUnavailable("shim did not complete its handshake: " + shim.string());
    }
    try {
      auto j = json::parse(*hello);
      if (j.value("protocol", "") != "reasonbench-shim" || j.value("version", 0) != 1)
        throw SandboxUnavailable("unsupported shim handshake: " + *hello);
    } catch (const json::parse_error&) {
      terminate();
      throw SandboxUnavailable("unreadable shim handshake: " + *hello);
    }
  }

  ~ShimProcess() { terminate(); }

  bool alive() const { return pid_ > 0; }

  // Sends one job line and waits for its result until `deadline`. On
  // timeout or a dead shim the process is killed and nullopt returned.
  std::optional<std::string> request(const std::string& line, Clock::time_point deadline, std::string& why) {
    std::string msg = line + "\n";
    std::size_t off = 0;
    while (off < msg.size()) {
      ssize_t n = ::write(to_child_, msg.data() + off, msg.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        why = "shim stdin closed";
        terminate();
        return std::nullopt;
      }
      off += static_cast<std::size_t>(n);
    }
    auto reply = read_message(deadline);
    if (!reply) {
      why = eof_ ? "shim exited" : "deadline";
      terminate();
    }
    return reply;
  }

  void terminate() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
      ::kill(-pid_, SIGKILL);
      ::kill(pid_, SIGKILL);
      int st;
      ::waitpid(pid_, &st, 0);
      pid_ = -1;
    }
  }

 private:
  // Reads "<json>\n" or a length-prefixed frame "@<n>\n<n bytes>".
  std::optional<std::string> read_message(Clock::time_point deadline) {
    for (;;) {
      auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        if (!buf_.empty() && buf_[0] == '@') {
          std::size_t len = std::strtoull(buf_.c_str() + 1, nullptr, 10);
          if (buf_.size() >= nl + 1 + len) {
            auto msg = buf_.substr(nl + 1, len);
            buf_.erase(0, nl + 1 + len);
            if (!buf_.empty() && buf_[0] == '\n') buf_.erase(0, 1);
            return msg;
          }
        } else {
          auto msg = buf_.substr(0, nl);
          buf_.erase(0, nl + 1);
          if (msg.empty()) continue;
          return msg;
        }
      }
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
      if (left <= 0) return std::nullopt;
      pollfd pfd{from_child_, POLLIN, 0};
      int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left, 1 << 30)));
      if (rc < 0 && errno == EINTR) continue;
      if (rc <= 0) return std::nullopt;
      char chunk[65536];
      ssize_t n = ::read(from_child_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        eof_ = true;
        return std::nullopt;
      }
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  bool eof_ = false;
  std::string buf_;
};

std::vector<std::string> default_preload() {
  return {"numpy", "scipy.stats", "sklearn.utils", "dateutil.parser", "cryptography.fernet",
          "base64", "datetime", "http.client", "time", "threading", "queue"};
}

std::filesystem::path shim_from_environment() {
  const char* p = std::getenv("REASONBENCH_SHIM");
  return p && *p ? std::filesystem::path(p) : std::filesystem::path();
}

Sandbox::Sandbox(Options options) : options_(std::move(options)) {
  static std::once_flag sigpipe_once;
  std::call_once(sigpipe_once, [] { ::signal(SIGPIPE, SIG_IGN); });
  if (options_.shim.empty()) options_.shim = shim_from_environment();
  if (options_.shim.empty()) throw SandboxUnavailable("no runner shim configured (set REASONBENCH_SHIM or --shim)");
  if (!std::filesystem::exists(options_.shim))
    throw SandboxUnavailable("runner shim not found: " + options_.shim.string());
  auto python = resolve_executable(options_.python);
  if (python.empty()) throw SandboxUnavailable("interpreter not found: " + options_.python);
  options_.python = python;
  if (options_.parallel < 1) options_.parallel = 1;
  if (options_.limits.timeout_ms <= 0) throw SandboxUnavailable("timeout must be positive");
  idle_.push_back(std::make_unique<ShimProcess>(options_.python, options_.shim, options_.preload));
  live_ = 1;
}

Sandbox::~Sandbox() = default;

std::unique_ptr<ShimProcess> Sandbox::checkout() {
  std::unique_lock lock(mu_);
  for (;;) {
    if (!idle_.empty()) {
      auto p = std::move(idle_.back());
      idle_.pop_back();
      return p;
    }
    if (live_ < options_.parallel) {
      ++live_;
      lock.unlock();
      try {
        return std::make_unique<ShimProcess>(options_.python, options_.shim, options_.preload);
      } catch (...) {
        lock.lock();
        --live_;
        cv_.notify_one();
        throw;
      }
    }
    cv_.wait(lock);
  }
}

void Sandbox::checkin(std::unique_ptr<ShimProcess> p) {
  std::lock_guard lock(mu_);
  if (p && p->alive())
    idle_.push_back(std::move(p));
  else
    --live_;
  cv_.notify_one();
}

ShimResult Sandbox::run_job(const ShimJob& job) {
  std::string id;
  {
    std::lock_guard lock(mu_);
    id = "j" + std::to_string(next_id_++);
  }
  auto line = encode_job(job, id);
  // Starting a worker (and its preloads) does not count against the job.
  auto proc = checkout();
  auto t0 = Clock::now();
  auto deadline = t0 + std::chrono::milliseconds(job.limits.timeout_ms + options_.grace_ms);
  std::string why;
  auto reply = proc->request(line, deadline, why);
  checkin(std::move(proc));
  ShimResult r;
  if (!reply) {
    r.wall_time_ms = ms_since(t0);
    if (why == "deadline") {
      r.status = "timeout";
      r.detail = "hard kill after limit + grace";
    } else {
      r.status = "harness_error";
      r.detail = why;
    }
    return r;
  }
  r = decode_result(*reply);
  if (r.status == "protocol_error") throw HarnessError("shim rejected job: " + r.detail);
  return r;
}

void Sandbox::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(options_.parallel));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex fail_mu;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(fail_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<ShimResult> Sandbox::run_jobs(const std::vector<ShimJob>& jobs) {
  std::vector<ShimResult> out(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) { out[i] = run_job(jobs[i]); });
  return out;
}

namespace {

ExecutionOutcome outcome_from(const ShimResult& r) {
  ExecutionOutcome o;
  o.status = status_from(r.status);
  if (r.value_repr) o.value_repr = py::canonicalize(*r.value_repr);
  o.stdout_text = r.stdout_text;
  o.stderr_text = r.stderr_text;
  o.exception_type = r.exception_type;
  o.wall_time_ms = r.wall_time_ms;
  o.detail = r.detail;
  if (o.status == ExecStatus::value && !o.value_repr) o.value_repr = "None";
  return o;
}

}  // namespace

ExecutionOutcome Sandbox::execute_call(const std::string& source, const std::string& entry_point,
                                       const std::string& input_repr, const ResourceLimits& limits) {
  ShimJob job;
  job.kind = JobKind::call;
  job.source = source;
  job.entry_point = entry_point;
  job.payload = call_arguments(input_repr);
  job.limits = limits;
  return outcome_from(run_job(job));
}

ExecutionOutcome Sandbox::execute_stdin(const std::string& source, const std::string& stdin_text,
                                        const ResourceLimits& limits) {
  ShimJob job;
  job.kind = JobKind::stdin_run;
  job.source = source;
  job.payload = stdin_text;
  job.limits = limits;
  auto out = outcome_from(run_job(job));
  out.value_repr.reset();
  return out;
}

ExecutionOutcome Sandbox::execute(const Program& program, const std::string& source, const std::string& input_repr) {
  if (program.invocation_mode == InvocationMode::stdio) return execute_stdin(source, input_repr, options_.limits);
  return execute_call(source, program.entry_point.value_or(""), input_repr, options_.limits);
}

ShimJob Sandbox::test_job(const std::string& source, const Program& program, const TestCase& test,
                          const ResourceLimits& limits) const {
  ShimJob job;
  job.source = source;
  job.limits = limits;
  job.entry_point = program.entry_point;
  if (test.kind == TestKind::assertion_code) {
    job.kind = JobKind::test;
    job.payload = test.input_repr;
  } else if (program.invocation_mode == InvocationMode::stdio) {
    job.kind = JobKind::stdin_run;
    job.payload = test.input_repr;
  } else {
    job.kind = JobKind::call;
    job.payload = call_arguments(test.input_repr);
  }
  return job;
}

TestVerdict Sandbox::judge(const TestCase& test, const Program& program, const ShimResult& r,
                           const ResourceLimits& limits) const {
  TestVerdict v;
  v.test_id = test.id;
  auto status = status_from(r.status);
  if (status == ExecStatus::timeout) {
    v.verdict = Verdict::timeout;
    v.detail = "timed out";
    return v;
  }
  if (status == ExecStatus::resource_kill || status == ExecStatus::harness_error) {
    v.verdict = Verdict::error;
    v.detail = std::string(to_string(status)) + (r.detail.empty() ? "" : ": " + r.detail);
    return v;
  }
  if (status == ExecStatus::exception && r.phase == "load") {
    v.verdict = Verdict::error;
    v.observed = r.exception_type.value_or("Exception");
    v.detail = "program failed to load: " + v.observed;
    return v;
  }
  if (test.kind == TestKind::assertion_code) {
    if (status == ExecStatus::value) {
      v.verdict = Verdict::pass;
    } else {
      v.observed = r.exception_type.value_or("Exception");
      v.verdict = v.observed == "AssertionError" ? Verdict::fail : Verdict::error;
      v.detail = v.observed + (r.detail.empty() ? "" : ": " + r.detail);
    }
    return v;
  }
  if (program.invocation_mode == InvocationMode::stdio) {
    v.observed = normalize_stdout(r.stdout_text);
    if (status == ExecStatus::exception) {
      v.verdict = Verdict::error;
      v.detail = "raised " + r.exception_type.value_or("Exception");
      return v;
    }
    v.verdict = v.observed == normalize_stdout(test.expected_repr) ? Verdict::pass : Verdict::fail;
    if (v.verdict == Verdict::fail) v.detail = "stdout differs";
    return v;
  }
  auto expected = py::canonicalize(test.expected_repr);
  if (status == ExecStatus::exception) {
    v.observed = r.exception_type.value_or("Exception");
    v.verdict = v.observed == expected ? Verdict::pass : Verdict::fail;
    if (v.verdict == Verdict::fail) v.detail = "raised " + v.observed;
    return v;
  }
  v.observed = py::canonicalize(r.value_repr.value_or("None"));
  v.verdict = py::values_equal(v.observed, expected, limits.float_rel_tol) ? Verdict::pass : Verdict::fail;
  if (v.verdict == Verdict::fail) v.detail = "expected " + expected + ", got " + v.observed;
  return v;
}

TestSuiteResult Sandbox::run_tests(const std::string& source, const Program& program,
                                   const std::vector<TestCase>& tests, const ResourceLimits& limits) {
  auto t0 = Clock::now();
  std::vector<ShimJob> jobs;
  jobs.reserve(tests.size());
  for (const auto& t : tests) jobs.push_back(test_job(source, program, t, limits));
  auto results = run_jobs(jobs);
  TestSuiteResult out;
  out.all_pass = true;
  for (std::size_t i = 0; i < tests.size(); ++i) {
    out.per_test.push_back(judge(tests[i], program, results[i], limits));
    if (out.per_test.back().verdict != Verdict::pass) out.all_pass = false;
  }
  out.duration_ms = ms_since(t0);
  return out;
}

LoopTrace Sandbox::trace_loops(const std::string& source, const Program& program, const std::vector<TestCase>& tests,
                               const ResourceLimits& limits) {
  std::vector<ShimJob> jobs;
  for (const auto& t : tests) {
    auto job = test_job(source, program, t, limits);
    job.traced = job.kind;
    job.kind = JobKind::trace;
    jobs.push_back(std::move(job));
  }
  auto results = run_jobs(jobs);
  LoopTrace trace;
  for (const auto& r : results) {
    if (r.status == "timeout") trace.partial = true;
    if (r.status == "harness_error") throw HarnessError("traced run failed: " + r.detail);
    if (trace.sites.empty() && !r.sites.empty()) {
      trace.sites = r.sites;
      for (auto& s : trace.sites) s.iterations = 0;
    }
    for (const auto& s : r.sites)
      for (auto& acc : trace.sites)
        if (acc.id == s.id) acc.iterations += s.iterations;
    if (program.invocation_mode == InvocationMode::stdio)
      trace.observed.push_back(normalize_stdout(r.stdout_text));
    else if (r.status == "value")
      trace.observed.push_back(py::canonicalize(r.value_repr.value_or("None")));
    else
      trace.observed.push_back(r.status + ":" + r.exception_type.value_or(""));
  }
  return trace;
}

}  // namespace reasonbench
