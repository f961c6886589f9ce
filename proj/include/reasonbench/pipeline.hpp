#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "reasonbench/corpus.hpp"
#include "reasonbench/gateway.hpp"
#include "reasonbench/prompting.hpp"
#include "reasonbench/scoring.hpp"
#include "reasonbench/transform.hpp"

namespace reasonbench {

class Sandbox;

enum class EvalTask { ier, sr, dsr, br };
std::string_view to_string(EvalTask t);
EvalTask parse_eval_task(std::string_view s);  // throws Error

struct ItemError {
  std::string program_id;
  std::string message;
};

struct PlannedPrompt {
  std::string program_id;
  PromptBundle bundle;
  std::string hash;
};

struct EvalPlan {
  EvalTask task = EvalTask::ier;
  std::vector<PlannedPrompt> prompts;  // corpus order; SR has two per program
  std::vector<ItemError> skipped;      // programs the task does not apply to
};

struct PlanInputs {
  ModelProfile profile;
  std::uint64_t seed = 17;
  // C+ per program id, for DSR.
  std::map<std::string, ComplexifyResult> transforms;
};

/// Prompts for `task` over `programs`. SR uses programs with a
/// natural-language spec and embeds one io_pair test drawn with the
/// program's derived seed; DSR uses programs with a transform; BR uses
/// programs with a buggy variant that some test exposes (needs `sandbox`).
EvalPlan plan_eval(EvalTask task, const std::vector<Program>& programs, const PlanInputs& inputs,
                   Sandbox* sandbox);

struct EvalRun {
  std::vector<Transcript> transcripts;  // plan order
  std::vector<ItemError> errors;
};

/// Sends every planned prompt through `gateway` on up to `parallel`
/// threads. A failed prompt is reported and the rest continue.
EvalRun run_eval(const EvalPlan& plan, ModelGateway& gateway, int parallel);

struct ScoreRun {
  std::vector<ScoreRecord> records;  // per model, in plan order
  std::vector<ItemError> errors;
};

/// Re-plans the prompts for each model found in `transcripts`, matches
/// responses by prompt hash and judges them against the sandbox.
ScoreRun score_transcripts(EvalTask task, const std::vector<Program>& programs,
                           const std::vector<Transcript>& transcripts, const PlanInputs& inputs, Sandbox& sandbox);

std::string transcripts_to_jsonl(const std::vector<Transcript>& transcripts);

}  // namespace reasonbench
