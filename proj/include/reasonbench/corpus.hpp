#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reasonbench {

class Sandbox;

enum class Benchmark { humaneval, classeval, cruxeval, avatar, other };
enum class InvocationMode { function_call, stdio };
enum class TestKind { io_pair, assertion_code };
enum class CorpusFormat { canonical_jsonl, humaneval_like, cruxeval_like };

inline constexpr int kCorpusSchemaVersion = 1;

struct TestCase {
  std::string id;
  TestKind kind = TestKind::io_pair;
  // io_pair: literal call arguments, written as they appear between the call
  // parentheses and optionally wrapped in one pair of parentheses
  // ("(20, 2, 5)"), or the stdin text for stdio programs.
  // assertion_code: a snippet executed after the program; the test passes
  // when it raises nothing.
  std::string input_repr;
  // io_pair: literal return value, or expected stdout for stdio programs.
  std::string expected_repr;
};

struct Program {
  std::string id;
  Benchmark benchmark = Benchmark::other;
  std::string source;
  std::optional<std::string> entry_point;  // "name" or "Class.method"
  InvocationMode invocation_mode = InvocationMode::function_call;
  std::optional<std::string> nl_spec;
  std::optional<std::string> class_context;
  std::vector<TestCase> tests;
  std::optional<std::string> reference_solution;
  std::optional<std::string> buggy_source;

  // Code whose behavior defines ground truth: the reference solution when
  // present, otherwise the subject source.
  const std::string& ground_truth_source() const { return reference_solution ? *reference_solution : source; }
};

std::string_view to_string(Benchmark b);
std::string_view to_string(InvocationMode m);
std::string_view to_string(TestKind k);
std::optional<Benchmark> parse_benchmark(std::string_view s);
/// Throws UnknownFormat.
CorpusFormat parse_format(std::string_view s);

/// Loads programs in file order. `path` may be a file or a directory, in
/// which case every *.jsonl/*.json file inside is read in name order.
/// Throws MalformedRecord, UnknownFormat, DuplicateId.
std::vector<Program> load_corpus(const std::filesystem::path& path, CorpusFormat format,
                                 std::optional<Benchmark> benchmark = std::nullopt);

std::vector<Program> parse_corpus(std::string_view text, CorpusFormat format,
                                  std::optional<Benchmark> benchmark = std::nullopt);

/// One canonical record per line, fixed key order, trailing newline.
std::string serialize_corpus(const std::vector<Program>& programs);
std::string serialize_program(const Program& program);
void save_corpus(const std::filesystem::path& path, const std::vector<Program>& programs);

/// Schema checks shared by every loader. Returns the first violation.
std::optional<std::string> check_program(const Program& program);

/// Argument text to place between call parentheses for an io_pair input.
std::string call_arguments(std::string_view input_repr);

/// Deterministic choice of the test embedded in the With-Test prompt.
/// Throws NoIoPairTests.
const TestCase& select_sr_test(const Program& program, std::uint64_t seed);

enum class ValidationStatus { valid, invalid, nondeterministic };
std::string_view to_string(ValidationStatus s);

struct TestCheck {
  std::string test_id;
  bool passed = false;
  std::string detail;
};

struct ProgramValidation {
  std::string program_id;
  ValidationStatus status = ValidationStatus::valid;
  std::vector<TestCheck> tests;
  std::vector<std::string> failing_tests;
  std::vector<std::string> unstable_tests;  // differing results across the two runs
};

struct ValidationReport {
  std::vector<ProgramValidation> programs;

  std::size_t count(ValidationStatus s) const;
  const ProgramValidation* find(std::string_view id) const;
};

/// Runs every test of every program twice against its ground-truth source.
/// Throws SandboxUnavailable.
ValidationReport validate_corpus(const std::vector<Program>& programs, Sandbox& sandbox);

}  // namespace reasonbench
