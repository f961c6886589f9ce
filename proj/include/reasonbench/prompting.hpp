#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reasonbench/corpus.hpp"

namespace reasonbench {

inline constexpr const char* kTemplateVersion = "prompts-v1";

enum class PromptTask { ier, sr_no_test, sr_with_test, dsr, br };
std::string_view to_string(PromptTask t);
PromptTask parse_prompt_task(std::string_view s);  // throws Error

struct PromptExtras {
  std::optional<TestCase> ier_test;  // default: first io_pair test
  std::optional<TestCase> sr_test;
  std::optional<std::string> c_plus;
  std::optional<std::string> buggy;
  std::optional<std::vector<TestCase>> error_revealing_tests;
};

struct ModelProfile {
  std::string name;
  std::optional<std::string> persona;
  // Replaces the bundled in-context example of a task.
  std::map<PromptTask, std::string> icl_overrides;
};

/// Profile with the documented persona line for model families that were
/// trained with one.
ModelProfile default_profile(std::string_view model_name);

struct PromptBundle {
  PromptTask task = PromptTask::ier;
  std::vector<std::pair<std::string, std::string>> sections;  // label, text
  std::optional<std::string> persona;
  std::string rendered;
  // Not rendered: what is being asked, for graders and the oracle model.
  // Keys: program_id, template_version, code, entry_point,
  // invocation_mode, input_repr, test_id.
  std::map<std::string, std::string> meta;

  const std::string* section(std::string_view label) const;
};

/// Throws MissingExtras when the extras needed by the task are absent and
/// NoIoPairTests when an output-prediction prompt has no input to ask about.
PromptBundle build_prompt(PromptTask task, const Program& program, const PromptExtras& extras,
                          const ModelProfile& profile);

/// How a test is shown to the model: an assert line for calls and
/// assertion code, an input/output pair for stdio programs.
std::string render_test(const Program& program, const TestCase& test);

/// The call expression asked about, e.g. "f(1, 2)" or "Calc().add(1, 2)".
std::string call_expression(std::string_view entry_point, std::string_view input_repr);

enum class ResponseKind { output_prediction, code, patch };

struct ParsedResponse {
  ResponseKind kind = ResponseKind::output_prediction;
  std::optional<std::string> predicted_output_repr;
  std::optional<std::string> raw_output;  // the block as written, trimmed
  std::optional<std::string> code_text;
  std::string cot_text;
};

/// Takes the last [Output] block. The value is canonicalized when it is a
/// literal and trimmed otherwise. Throws NoOutputSection.
ParsedResponse parse_output_prediction(std::string_view response);

/// Takes the last fenced code block, or without fences the longest suffix
/// of whole lines that parses and holds a statement other than a bare
/// expression. Throws NoParseableCode.
ParsedResponse parse_code(std::string_view response, ResponseKind kind = ResponseKind::code);

/// Well-formed answer text in the format the IER example teaches.
std::string render_output_answer(std::string_view reasoning, std::string_view value);

/// The bundled in-context example for a task, empty when it has none.
const std::string& bundled_icl_example(PromptTask task);

}  // namespace reasonbench
