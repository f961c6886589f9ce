#include "reasonbench/prompting.hpp"

#include <algorithm>
#include <cctype>

#include "reasonbench/error.hpp"
#include "reasonbench/py/literal.hpp"
#include "reasonbench/py/parser.hpp"
#include "reasonbench/util/files.hpp"

namespace reasonbench {

namespace {

const char* kPersonaDeepSeek =
    "You are an AI programming assistant, utilizing the DeepSeek Coder model, developed by DeepSeek Company";

// Indentation and spacing follow the hand-written example, not PEP 8.
const std::string kIerExample = R"(Consider the following code:
def sum_of_integer(N, A, B):
   sum_1 = 0
   for i in range(1,N+1):
       sum_order = 0
       i_str = str(i)
       n = len(i_str)
       for j in range(0,n):
           sum_order += int(i_str[j])
       if A <= sum_order <= B:
           sum_1 += i
   return sum_1
[Question]
What is the return value of `sum_of_integer(20, 2, 5)`?
[Answer]
The variable N, variable A and variable B are initialized to 20, 2, and 5, respectively. Variable sum_1 is
initialized to 0, which will be used to accumulate the sum of numbers meeting the condition. The code then
enters a loop that iterates from 1 to N (inclusive), meaning it will consider numbers from 1 to 20. For each
number i in this range, it calculates the sum of its digits and stores it in sum_order. The code checks if
sum_order is within the range [A, B], which is [2, 5] in this case. If it is, it adds the current number i to
sum_1. The condition is met when i is 2, 3, 4, 5, 11, 12, 13, 14 and 20. After the loop finishes, the code
returns the final value of sum_1, which is 84.
[Output]
84)";

const std::string kDsrExample = R"(Consider the following code:
import base64

def first_zero(values):
    try:
        encoded_1 = base64.b64encode(str(values).encode())
        base64.b64decode(encoded_1)
        position_7 = 0

        def walk(idx, stop, acc):
            if idx >= stop:
                return acc
            if values[idx] == 0:
                if acc == 0:
                    acc = idx + 1
            return walk(idx + 1, stop, acc)
        position_7 = walk(0, len(values), position_7)
        return position_7
    except ZeroDivisionError:
        raise
[Question]
Refactor the code into the shortest program that behaves the same on every input.
[Answer]
The base64 round trip encodes the input and decodes it again without using the result, so it has no effect.
The try block only re-raises, so it can go as well. The nested function walk is a loop written as recursion:
it visits every index from 0 to len(values) - 1 and records idx + 1 for the first zero it sees, keeping that
value afterwards. position_7 is only a renamed accumulator. The function therefore returns the 1-based
position of the first zero, or 0 when there is none.
```python
def first_zero(values):
    for i, v in enumerate(values):
        if v == 0:
            return i + 1
    return 0
```)";

std::string ensure_newline(std::string s) {
  if (s.empty() || s.back() != '\n') s += '\n';
  return s;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

const TestCase& first_io_pair(const Program& program) {
  for (const auto& t : program.tests)
    if (t.kind == TestKind::io_pair) return t;
  throw NoIoPairTests("program '" + program.id + "' has no input/output tests");
}

std::string entry_name(const Program& program) { return program.entry_point.value_or("the program"); }

std::string ier_question(const Program& program, const TestCase& test) {
  std::string q = "Consider the following code:\n" + ensure_newline(program.source) + "[Question]\n";
  if (program.invocation_mode == InvocationMode::stdio) {
    q += "What does the program print to standard output when it runs with the standard input below?\n";
    q += "[Input]\n" + ensure_newline(test.input_repr);
  } else {
    q += "What is the return value of `" + call_expression(*program.entry_point, test.input_repr) + "`?\n";
  }
  return q + "[Answer]";
}

std::string sr_question(const Program& program, const TestCase* test) {
  if (!program.nl_spec) throw MissingExtras("program '" + program.id + "' has no specification");
  std::string q = "[Specification]\n" + ensure_newline(*program.nl_spec);
  if (test) q += "[Test]\n" + ensure_newline(render_test(program, *test));
  q += "[Question]\n";
  if (program.invocation_mode == InvocationMode::stdio) {
    q += "Write a Python program that reads standard input and satisfies the specification.\n";
  } else {
    auto entry = entry_name(program);
    auto dot = entry.find('.');
    if (dot != std::string::npos)
      q += "Write the complete Python class `" + entry.substr(0, dot) + "` so that it satisfies the specification.\n";
    else
      q += "Write a Python function `" + entry + "` that satisfies the specification.\n";
  }
  return q + "[Answer]";
}

std::string dsr_question(const Program& program, const std::string& c_plus) {
  std::string q = "Consider the following code:\n" + ensure_newline(c_plus) + "[Question]\n";
  q += "Refactor the code into the shortest program that behaves the same on every input.";
  if (program.entry_point) q += " Keep `" + *program.entry_point + "` and its signature.";
  return q + "\n[Answer]";
}

std::string br_question(const Program& program, const std::string& buggy, const std::vector<TestCase>& tests) {
  std::string q = "The following code is buggy:\n" + ensure_newline(buggy);
  if (program.nl_spec) q += "[Specification]\n" + ensure_newline(*program.nl_spec);
  q += "[Failing Tests]\n";
  for (const auto& t : tests) q += ensure_newline(render_test(program, t));
  q += "[Question]\nFix the bug so that the code satisfies the specification and passes the tests.\n";
  return q + "[Answer]";
}

std::string instruction_for(PromptTask task, const Program& program) {
  switch (task) {
    case PromptTask::ier:
      return std::string("Reason about the execution of the code step by step in natural language, as in the example "
                         "above. End your answer with an [Output] section that holds only ") +
             (program.invocation_mode == InvocationMode::stdio ? "the printed output." : "the return value.");
    case PromptTask::sr_no_test:
    case PromptTask::sr_with_test:
      return "Think step by step in natural language about what the code must do, then give the complete "
             "implementation in a single ```python code block.";
    case PromptTask::dsr:
      return "Reason step by step in natural language about what the code computes, as in the example above, then "
             "give the refactored program in a single ```python code block.";
    case PromptTask::br:
      return "Reason step by step in natural language about how the code executes on the failing tests, then give "
             "the complete fixed code in a single ```python code block.";
  }
  return "";
}

bool has_statement(const py::Node& module) {
  for (const auto& s : module.children)
    if (s && s->kind != py::Kind::ExprStmt) return true;
  return false;
}

struct Fence {
  std::size_t start = 0;  // offset of the opening fence line
  std::string body;
};

std::vector<Fence> fenced_blocks(std::string_view text) {
  std::vector<Fence> out;
  auto lines = split_lines(text);
  std::size_t offset = 0;
  std::optional<Fence> open;
  for (const auto& raw : lines) {
    auto line = trim(raw);
    bool fence = line.rfind("```", 0) == 0;
    if (fence && !open && line.size() > 6 && line.compare(line.size() - 3, 3, "```") == 0) {
      // Whole block on one line.
      auto inner = line.substr(3, line.size() - 6);
      auto sp = inner.find(' ');
      bool tagged = sp != std::string::npos && std::all_of(inner.begin(), inner.begin() + static_cast<long>(sp),
                                                           [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
      out.push_back({offset, ensure_newline(trim(tagged ? inner.substr(sp + 1) : inner))});
    } else if (fence && !open) {
      open = Fence{offset, ""};
    } else if (fence && open) {
      out.push_back(*open);
      open.reset();
    } else if (open) {
      open->body += raw + "\n";
    }
    offset += raw.size() + 1;
  }
  if (open && !trim(open->body).empty()) out.push_back(*open);
  return out;
}

}  // namespace

std::string_view to_string(PromptTask t) {
  switch (t) {
    case PromptTask::ier: return "ier";
    case PromptTask::sr_no_test: return "sr_no_test";
    case PromptTask::sr_with_test: return "sr_with_test";
    case PromptTask::dsr: return "dsr";
    case PromptTask::br: return "br";
  }
  return "?";
}

PromptTask parse_prompt_task(std::string_view s) {
  for (auto t : {PromptTask::ier, PromptTask::sr_no_test, PromptTask::sr_with_test, PromptTask::dsr, PromptTask::br})
    if (to_string(t) == s) return t;
  throw Error("unknown prompt task '" + std::string(s) + "'");
}

ModelProfile default_profile(std::string_view model_name) {
  ModelProfile p;
  p.name = std::string(model_name);
  if (lower(model_name).find("deepseek") != std::string::npos) p.persona = kPersonaDeepSeek;
  return p;
}

const std::string* PromptBundle::section(std::string_view label) const {
  for (const auto& [l, text] : sections)
    if (l == label) return &text;
  return nullptr;
}

const std::string& bundled_icl_example(PromptTask task) {
  static const std::string kNone;
  if (task == PromptTask::ier) return kIerExample;
  if (task == PromptTask::dsr) return kDsrExample;
  return kNone;
}

std::string call_expression(std::string_view entry_point, std::string_view input_repr) {
  auto args = call_arguments(input_repr);
  auto dot = entry_point.find('.');
  if (dot == std::string_view::npos) return std::string(entry_point) + "(" + args + ")";
  return std::string(entry_point.substr(0, dot)) + "()." + std::string(entry_point.substr(dot + 1)) + "(" + args +
         ")";
}

std::string render_test(const Program& program, const TestCase& test) {
  if (test.kind == TestKind::assertion_code) return trim(test.input_repr);
  if (program.invocation_mode == InvocationMode::stdio)
    return "Input:\n" + ensure_newline(test.input_repr) + "Expected output:\n" + trim(test.expected_repr);
  return "assert " + call_expression(program.entry_point.value_or("f"), test.input_repr) +
         " == " + test.expected_repr;
}

PromptBundle build_prompt(PromptTask task, const Program& program, const PromptExtras& extras,
                          const ModelProfile& profile) {
  PromptBundle b;
  b.task = task;
  b.persona = profile.persona;
  b.meta["program_id"] = program.id;
  b.meta["template_version"] = kTemplateVersion;
  b.meta["invocation_mode"] = std::string(to_string(program.invocation_mode));
  if (program.entry_point) b.meta["entry_point"] = *program.entry_point;

  auto icl = profile.icl_overrides.count(task) ? profile.icl_overrides.at(task) : bundled_icl_example(task);
  if (!icl.empty()) b.sections.emplace_back("icl_example", icl);
  b.sections.emplace_back("instruction", instruction_for(task, program));
  if (program.class_context && program.class_context->find(program.source) == std::string::npos)
    b.sections.emplace_back("context", "The code belongs to the following class:\n" + *program.class_context);

  std::string question;
  switch (task) {
    case PromptTask::ier: {
      const TestCase& test = extras.ier_test ? *extras.ier_test : first_io_pair(program);
      if (test.kind != TestKind::io_pair) throw NoIoPairTests("IER needs an input/output test");
      question = ier_question(program, test);
      b.meta["code"] = program.source;
      b.meta["input_repr"] = test.input_repr;
      b.meta["test_id"] = test.id;
      break;
    }
    case PromptTask::sr_no_test:
      question = sr_question(program, nullptr);
      break;
    case PromptTask::sr_with_test:
      if (!extras.sr_test) throw MissingExtras("sr_with_test needs the embedded test");
      question = sr_question(program, &*extras.sr_test);
      b.meta["test_id"] = extras.sr_test->id;
      break;
    case PromptTask::dsr:
      if (!extras.c_plus) throw MissingExtras("dsr needs the complexified program");
      question = dsr_question(program, *extras.c_plus);
      b.meta["code"] = *extras.c_plus;
      break;
    case PromptTask::br:
      if (!extras.buggy || !extras.error_revealing_tests)
        throw MissingExtras("br needs the buggy source and its error-revealing tests");
      question = br_question(program, *extras.buggy, *extras.error_revealing_tests);
      b.meta["code"] = *extras.buggy;
      break;
  }
  b.sections.emplace_back("question", question);

  std::string text;
  if (b.persona) text += *b.persona + "\n\n";
  for (std::size_t i = 0; i < b.sections.size(); ++i) {
    if (i) text += "\n\n";
    text += b.sections[i].second;
  }
  b.rendered = text + "\n";
  return b;
}

std::string render_output_answer(std::string_view reasoning, std::string_view value) {
  std::string out = trim(reasoning);
  if (!out.empty()) out += "\n";
  return out + "[Output]\n" + std::string(value);
}

ParsedResponse parse_output_prediction(std::string_view response) {
  auto low = lower(response);
  auto at = low.rfind("[output]");
  if (at == std::string::npos) throw NoOutputSection("response has no [Output] section");
  ParsedResponse r;
  r.kind = ResponseKind::output_prediction;
  r.cot_text = trim(response.substr(0, at));
  std::string rest(response.substr(at + 8));
  auto first = rest.find_first_not_of(" \t");
  if (first != std::string::npos && rest[first] == ':') rest = rest.substr(first + 1);
  // Stop at a following section header such as "[Explanation]".
  for (std::size_t pos = rest.find("\n["); pos != std::string::npos; pos = rest.find("\n[", pos + 1)) {
    auto close = rest.find("]\n", pos);
    auto eol = rest.find('\n', pos + 1);
    if (close != std::string::npos && (eol == std::string::npos || close < eol) && close > pos + 2 &&
        std::all_of(rest.begin() + static_cast<long>(pos) + 2, rest.begin() + static_cast<long>(close),
                    [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == ' '; })) {
      rest = rest.substr(0, pos);
      break;
    }
  }
  auto body = trim(rest);
  auto blocks = fenced_blocks(body);
  if (!blocks.empty() && blocks.front().start == 0) body = trim(blocks.front().body);
  if (body.size() >= 2 && body.front() == '`' && body.back() == '`' && body.find('\n') == std::string::npos)
    body = trim(std::string_view(body).substr(1, body.size() - 2));
  r.raw_output = body;
  r.predicted_output_repr = py::canonicalize(body);
  return r;
}

ParsedResponse parse_code(std::string_view response, ResponseKind kind) {
  ParsedResponse r;
  r.kind = kind;
  auto blocks = fenced_blocks(response);
  if (!blocks.empty()) {
    const auto& last = blocks.back();
    if (!py::parses(last.body)) throw NoParseableCode("last code block does not parse");
    r.code_text = ensure_newline(last.body);
    r.cot_text = trim(response.substr(0, last.start));
    return r;
  }
  auto lines = split_lines(response);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string suffix;
    for (std::size_t j = i; j < lines.size(); ++j) suffix += lines[j] + "\n";
    if (trim(suffix).empty()) break;
    try {
      auto pm = py::parse_module(suffix);
      if (!has_statement(*pm.module)) continue;
      r.code_text = suffix;
      std::string before;
      for (std::size_t j = 0; j < i; ++j) before += lines[j] + "\n";
      r.cot_text = trim(before);
      return r;
    } catch (const py::ParseError&) {
    }
  }
  throw NoParseableCode("response holds no parseable code");
}

}  // namespace reasonbench
