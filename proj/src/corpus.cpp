#include "reasonbench/corpus.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <json.hpp>
#include <set>

#include "reasonbench/error.hpp"
#include "reasonbench/py/lexer.hpp"
#include "reasonbench/py/literal.hpp"
#include "reasonbench/py/parser.hpp"
#include "reasonbench/py/unparse.hpp"
#include "reasonbench/sandbox.hpp"
#include "reasonbench/util/files.hpp"
#include "reasonbench/util/hash.hpp"
#include "reasonbench/util/rng.hpp"

namespace reasonbench {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Benchmark b) {
  switch (b) {
    case Benchmark::humaneval: return "humaneval";
    case Benchmark::classeval: return "classeval";
    case Benchmark::cruxeval: return "cruxeval";
    case Benchmark::avatar: return "avatar";
    case Benchmark::other: return "other";
  }
  return "other";
}

std::string_view to_string(InvocationMode m) { return m == InvocationMode::stdio ? "stdio" : "function_call"; }

std::string_view to_string(TestKind k) { return k == TestKind::assertion_code ? "assertion_code" : "io_pair"; }

std::string_view to_string(ValidationStatus s) {
  switch (s) {
    case ValidationStatus::valid: return "VALID";
    case ValidationStatus::invalid: return "INVALID";
    case ValidationStatus::nondeterministic: return "NONDETERMINISTIC";
  }
  return "INVALID";
}

std::optional<Benchmark> parse_benchmark(std::string_view s) {
  for (auto b : {Benchmark::humaneval, Benchmark::classeval, Benchmark::cruxeval, Benchmark::avatar, Benchmark::other})
    if (to_string(b) == s) return b;
  return std::nullopt;
}

CorpusFormat parse_format(std::string_view s) {
  if (s == "canonical_jsonl" || s == "canonical") return CorpusFormat::canonical_jsonl;
  if (s == "humaneval_like") return CorpusFormat::humaneval_like;
  if (s == "cruxeval_like") return CorpusFormat::cruxeval_like;
  throw UnknownFormat("unknown corpus format '" + std::string(s) + "'");
}

namespace {

std::optional<std::string> opt_string(const ojson& j, const char* key, int line) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw MalformedRecord(line, std::string("field '") + key + "' must be a string or null");
  return it->get<std::string>();
}

std::string req_string(const ojson& j, const char* key, int line) {
  auto v = opt_string(j, key, line);
  if (!v) throw MalformedRecord(line, std::string("missing field '") + key + "'");
  return *v;
}

ojson opt_json(const std::optional<std::string>& s) { return s ? ojson(*s) : ojson(nullptr); }

Program program_from_canonical(const ojson& j, int line) {
  if (!j.is_object()) throw MalformedRecord(line, "record is not an object");
  auto ver = j.find("schema_version");
  if (ver == j.end()) throw MalformedRecord(line, "missing field 'schema_version'");
  if (!ver->is_number_integer() || ver->get<int>() != kCorpusSchemaVersion)
    throw MalformedRecord(line, "unsupported schema_version");
  Program p;
  p.id = req_string(j, "id", line);
  auto bench = parse_benchmark(req_string(j, "benchmark", line));
  if (!bench) throw MalformedRecord(line, "unknown benchmark");
  p.benchmark = *bench;
  auto mode = req_string(j, "invocation_mode", line);
  if (mode == "function_call")
    p.invocation_mode = InvocationMode::function_call;
  else if (mode == "stdio")
    p.invocation_mode = InvocationMode::stdio;
  else
    throw MalformedRecord(line, "unknown invocation_mode '" + mode + "'");
  p.entry_point = opt_string(j, "entry_point", line);
  p.source = req_string(j, "source", line);
  p.nl_spec = opt_string(j, "nl_spec", line);
  p.class_context = opt_string(j, "class_context", line);
  auto tests = j.find("tests");
  if (tests == j.end() || !tests->is_array()) throw MalformedRecord(line, "missing array 'tests'");
  for (const auto& t : *tests) {
    if (!t.is_object()) throw MalformedRecord(line, "test is not an object");
    TestCase tc;
    tc.id = req_string(t, "id", line);
    auto kind = req_string(t, "kind", line);
    if (kind == "io_pair")
      tc.kind = TestKind::io_pair;
    else if (kind == "assertion_code")
      tc.kind = TestKind::assertion_code;
    else
      throw MalformedRecord(line, "unknown test kind '" + kind + "'");
    tc.input_repr = req_string(t, "input_repr", line);
    tc.expected_repr = opt_string(t, "expected_repr", line).value_or("");
    p.tests.push_back(std::move(tc));
  }
  p.reference_solution = opt_string(j, "reference_solution", line);
  p.buggy_source = opt_string(j, "buggy_source", line);
  return p;
}

std::string benchmark_prefix(std::optional<Benchmark> b, Benchmark fallback) {
  return std::string(to_string(b.value_or(fallback)));
}

std::string id_suffix(const std::string& raw) {
  auto slash = raw.rfind('/');
  return slash == std::string::npos ? raw : raw.substr(slash + 1);
}

// Splits `def check(candidate): assert candidate(args) == literal` suites into
// io_pair tests. Anything else in the suite is kept as one assertion test.
std::vector<TestCase> tests_from_check(const std::string& test_code, const std::string& entry) {
  std::vector<TestCase> out;
  bool leftover = true;
  try {
    auto pm = py::parse_module(test_code);
    const py::Node* check = nullptr;
    for (const auto& s : pm.module->children)
      if (s->kind == py::Kind::FunctionDef && s->value == "check") check = s.get();
    if (check) {
      leftover = false;
      std::string param;
      const py::Node* args = check->child(1);
      if (args && !args->children.empty()) param = args->children[0]->value;
      for (const auto& s : check->child(3)->children) {
        if (s->kind == py::Kind::ExprStmt && s->child(0)->kind == py::Kind::String) continue;
        if (s->kind == py::Kind::Pass) continue;
        bool converted = false;
        if (s->kind == py::Kind::Assert) {
          const py::Node* test = s->child(0);
          if (test->kind == py::Kind::Compare && test->ops.size() == 1 && test->ops[0] == "==") {
            const py::Node* lhs = test->child(0);
            const py::Node* rhs = test->child(1);
            if (lhs->kind == py::Kind::Call && lhs->child(0)->kind == py::Kind::Name && lhs->child(0)->value == param) {
              auto expected = py::unparse_expr(*rhs);
              if (py::parse_literal(expected)) {
                std::string arglist;
                for (const auto& a : lhs->child(1)->children) {
                  if (!arglist.empty()) arglist += ", ";
                  arglist += py::unparse_expr(*a);
                }
                TestCase tc;
                tc.id = "t" + std::to_string(out.size());
                tc.kind = TestKind::io_pair;
                tc.input_repr = "(" + arglist + ")";
                tc.expected_repr = py::canonicalize(expected);
                out.push_back(std::move(tc));
                converted = true;
              }
            }
          }
        }
        if (!converted) leftover = true;
      }
    }
  } catch (const py::ParseError&) {
    leftover = true;
  }
  if (leftover) {
    TestCase tc;
    tc.id = "check";
    tc.kind = TestKind::assertion_code;
    tc.input_repr = test_code + (test_code.empty() || test_code.back() == '\n' ? "" : "\n") + "check(" + entry + ")\n";
    out.push_back(std::move(tc));
  }
  return out;
}

Program program_from_humaneval(const ojson& j, int line, std::optional<Benchmark> bench) {
  if (!j.is_object()) throw MalformedRecord(line, "record is not an object");
  Program p;
  p.benchmark = bench.value_or(Benchmark::humaneval);
  p.id = benchmark_prefix(bench, Benchmark::humaneval) + "/" + id_suffix(req_string(j, "task_id", line));
  auto prompt = req_string(j, "prompt", line);
  p.source = prompt + req_string(j, "canonical_solution", line);
  p.entry_point = req_string(j, "entry_point", line);
  p.invocation_mode = InvocationMode::function_call;
  p.nl_spec = prompt;
  p.tests = tests_from_check(req_string(j, "test", line), *p.entry_point);
  return p;
}

Program program_from_cruxeval(const ojson& j, int line, std::optional<Benchmark> bench) {
  if (!j.is_object()) throw MalformedRecord(line, "record is not an object");
  Program p;
  p.benchmark = bench.value_or(Benchmark::cruxeval);
  p.id = benchmark_prefix(bench, Benchmark::cruxeval) + "/" + id_suffix(req_string(j, "id", line));
  p.source = req_string(j, "code", line);
  if (!p.source.empty() && p.source.back() != '\n') p.source += '\n';
  p.entry_point = opt_string(j, "entry_point", line).value_or("f");
  p.invocation_mode = InvocationMode::function_call;
  TestCase tc;
  tc.id = "t0";
  tc.input_repr = "(" + req_string(j, "input", line) + ")";
  tc.expected_repr = py::canonicalize(req_string(j, "output", line));
  p.tests.push_back(std::move(tc));
  return p;
}

std::vector<Program> parse_text(std::string_view text, CorpusFormat format, std::optional<Benchmark> bench,
                                std::set<std::string>& seen, const std::string& origin) {
  std::vector<Program> out;
  int line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw MalformedRecord(line_no, origin + "not valid JSON");
    }
    Program p;
    switch (format) {
      case CorpusFormat::canonical_jsonl: p = program_from_canonical(j, line_no); break;
      case CorpusFormat::humaneval_like: p = program_from_humaneval(j, line_no, bench); break;
      case CorpusFormat::cruxeval_like: p = program_from_cruxeval(j, line_no, bench); break;
    }
    if (auto why = check_program(p)) throw MalformedRecord(line_no, origin + *why);
    if (!seen.insert(p.id).second) throw DuplicateId("duplicate program id '" + p.id + "' at line " + std::to_string(line_no));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

std::optional<std::string> check_program(const Program& p) {
  if (p.id.empty()) return "empty id";
  if (p.invocation_mode == InvocationMode::function_call && (!p.entry_point || p.entry_point->empty()))
    return "function_call program '" + p.id + "' has no entry_point";
  std::set<std::string> test_ids;
  for (const auto& t : p.tests) {
    if (t.id.empty()) return "test with empty id in '" + p.id + "'";
    if (!test_ids.insert(t.id).second) return "duplicate test id '" + t.id + "' in '" + p.id + "'";
    if (t.kind == TestKind::io_pair && (t.input_repr.empty() || t.expected_repr.empty()))
      return "io_pair test '" + t.id + "' in '" + p.id + "' needs input_repr and expected_repr";
    if (t.kind == TestKind::assertion_code) {
      if (p.invocation_mode == InvocationMode::stdio)
        return "stdio program '" + p.id + "' can only carry stdin/stdout tests";
      if (t.input_repr.empty()) return "assertion test '" + t.id + "' in '" + p.id + "' is empty";
    }
  }
  return std::nullopt;
}

std::vector<Program> parse_corpus(std::string_view text, CorpusFormat format, std::optional<Benchmark> benchmark) {
  std::set<std::string> seen;
  auto out = parse_text(text, format, benchmark, seen, "");
  if (out.empty()) spdlog::warn("corpus is empty");
  return out;
}

std::vector<Program> load_corpus(const std::filesystem::path& path, CorpusFormat format,
                                 std::optional<Benchmark> benchmark) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& e : std::filesystem::directory_iterator(path)) {
      auto ext = e.path().extension();
      if (e.is_regular_file() && (ext == ".jsonl" || ext == ".json")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    if (!std::filesystem::exists(path)) throw IoError("no such corpus: " + path.string());
    files.push_back(path);
  }
  std::set<std::string> seen;
  std::vector<Program> out;
  for (const auto& f : files) {
    auto origin = files.size() > 1 ? f.filename().string() + ": " : std::string();
    auto part = parse_text(read_file(f), format, benchmark, seen, origin);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  if (out.empty()) spdlog::warn("corpus {} is empty", path.string());
  return out;
}

std::string serialize_program(const Program& p) {
  ojson j;
  j["schema_version"] = kCorpusSchemaVersion;
  j["id"] = p.id;
  j["benchmark"] = to_string(p.benchmark);
  j["invocation_mode"] = to_string(p.invocation_mode);
  j["entry_point"] = opt_json(p.entry_point);
  j["source"] = p.source;
  j["nl_spec"] = opt_json(p.nl_spec);
  j["class_context"] = opt_json(p.class_context);
  j["tests"] = ojson::array();
  for (const auto& t : p.tests) {
    ojson tj;
    tj["id"] = t.id;
    tj["kind"] = to_string(t.kind);
    tj["input_repr"] = t.input_repr;
    tj["expected_repr"] = t.expected_repr;
    j["tests"].push_back(std::move(tj));
  }
  j["reference_solution"] = opt_json(p.reference_solution);
  j["buggy_source"] = opt_json(p.buggy_source);
  return j.dump();
}

std::string serialize_corpus(const std::vector<Program>& programs) {
  std::string out;
  for (const auto& p : programs) {
    out += serialize_program(p);
    out += '\n';
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const std::vector<Program>& programs) {
  write_file_atomic(path, serialize_corpus(programs));
}

std::string call_arguments(std::string_view input_repr) {
  auto first = input_repr.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  auto last = input_repr.find_last_not_of(" \t\r\n");
  auto text = input_repr.substr(first, last - first + 1);
  std::vector<py::Token> toks;
  try {
    toks = py::tokenize(text);
  } catch (const py::ParseError&) {
    return std::string(text);
  }
  std::vector<const py::Token*> sig;
  for (const auto& t : toks)
    if (t.kind == py::TokenKind::Name || t.kind == py::TokenKind::Number || t.kind == py::TokenKind::String ||
        t.kind == py::TokenKind::Op)
      sig.push_back(&t);
  if (sig.size() < 2 || !sig.front()->is_op("(") || !sig.back()->is_op(")")) return std::string(text);
  int depth = 0;
  for (std::size_t i = 0; i < sig.size(); ++i) {
    const auto& t = *sig[i];
    if (t.is_op("(") || t.is_op("[") || t.is_op("{")) ++depth;
    if (t.is_op(")") || t.is_op("]") || t.is_op("}")) --depth;
    if (depth == 0 && i + 1 < sig.size()) return std::string(text);
  }
  return std::string(text.substr(1, text.size() - 2));
}

const TestCase& select_sr_test(const Program& program, std::uint64_t seed) {
  std::vector<const TestCase*> pairs;
  for (const auto& t : program.tests)
    if (t.kind == TestKind::io_pair) pairs.push_back(&t);
  if (pairs.empty()) throw NoIoPairTests("program '" + program.id + "' has no io_pair tests");
  Rng rng(derive_seed(seed, "sr-test:" + program.id));
  return *pairs[rng.below(pairs.size())];
}

std::size_t ValidationReport::count(ValidationStatus s) const {
  return static_cast<std::size_t>(
      std::count_if(programs.begin(), programs.end(), [&](const ProgramValidation& p) { return p.status == s; }));
}

const ProgramValidation* ValidationReport::find(std::string_view id) const {
  for (const auto& p : programs)
    if (p.program_id == id) return &p;
  return nullptr;
}

ValidationReport validate_corpus(const std::vector<Program>& programs, Sandbox& sandbox) {
  ValidationReport report;
  report.programs.resize(programs.size());
  sandbox.parallel_for(programs.size(), [&](std::size_t i) {
    const Program& p = programs[i];
    auto first = sandbox.run_tests(p.ground_truth_source(), p);
    auto second = sandbox.run_tests(p.ground_truth_source(), p);
    ProgramValidation v;
    v.program_id = p.id;
    for (std::size_t k = 0; k < first.per_test.size(); ++k) {
      const auto& a = first.per_test[k];
      const auto& b = second.per_test[k];
      TestCheck c{a.test_id, a.verdict == Verdict::pass, a.detail};
      if (a.verdict != b.verdict || a.observed != b.observed) v.unstable_tests.push_back(a.test_id);
      if (a.verdict != Verdict::pass || b.verdict != Verdict::pass) {
        c.passed = false;
        v.failing_tests.push_back(a.test_id);
      }
      v.tests.push_back(std::move(c));
    }
    if (!v.unstable_tests.empty())
      v.status = ValidationStatus::nondeterministic;
    else if (!v.failing_tests.empty())
      v.status = ValidationStatus::invalid;
    report.programs[i] = std::move(v);
  });
  return report;
}

}  // namespace reasonbench
