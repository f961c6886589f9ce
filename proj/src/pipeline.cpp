#include "reasonbench/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <optional>
#include <thread>

#include "reasonbench/error.hpp"
#include "reasonbench/metrics.hpp"
#include "reasonbench/py/parser.hpp"
#include "reasonbench/sandbox.hpp"
#include "reasonbench/util/hash.hpp"

namespace reasonbench {

namespace {

void parallel_indices(std::size_t n, int parallel, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
  };
  std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, parallel)));
  if (threads <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

PlannedPrompt planned(const Program& p, PromptTask task, const PromptExtras& extras, const ModelProfile& profile) {
  PlannedPrompt pp;
  pp.program_id = p.id;
  pp.bundle = build_prompt(task, p, extras, profile);
  pp.hash = sha256_hex(pp.bundle.rendered);
  return pp;
}

struct Judged {
  std::optional<ScoreRecord> record;
  std::optional<ItemError> error;
};

ParsedResponse code_or_flag(const std::string& text, ResponseKind kind, std::string& flag) {
  try {
    return parse_code(text, kind);
  } catch (const NoParseableCode&) {
    flag = "no_parseable_code";
  }
  return {};
}

bool suite_passes(const std::optional<std::string>& code, const Program& p, Sandbox& sb) {
  return code && py::parses(*code) && sb.run_tests(*code, p).all_pass;
}

}  // namespace

std::string_view to_string(EvalTask t) {
  switch (t) {
    case EvalTask::ier: return "ier";
    case EvalTask::sr: return "sr";
    case EvalTask::dsr: return "dsr";
    case EvalTask::br: return "br";
  }
  return "?";
}

EvalTask parse_eval_task(std::string_view s) {
  for (auto t : {EvalTask::ier, EvalTask::sr, EvalTask::dsr, EvalTask::br})
    if (to_string(t) == s) return t;
  throw Error("unknown task '" + std::string(s) + "' (expected ier, sr, dsr or br)");
}

EvalPlan plan_eval(EvalTask task, const std::vector<Program>& programs, const PlanInputs& in, Sandbox* sandbox) {
  EvalPlan plan;
  plan.task = task;
  for (const auto& p : programs) {
    try {
      switch (task) {
        case EvalTask::ier:
          plan.prompts.push_back(planned(p, PromptTask::ier, {}, in.profile));
          break;
        case EvalTask::sr: {
          if (!p.nl_spec) {
            plan.skipped.push_back({p.id, "no natural-language specification"});
            break;
          }
          PromptExtras extras;
          extras.sr_test = select_sr_test(p, in.seed);
          auto no_test = planned(p, PromptTask::sr_no_test, {}, in.profile);
          auto with_test = planned(p, PromptTask::sr_with_test, extras, in.profile);
          plan.prompts.push_back(std::move(no_test));
          plan.prompts.push_back(std::move(with_test));
          break;
        }
        case EvalTask::dsr: {
          auto it = in.transforms.find(p.id);
          if (it == in.transforms.end()) {
            plan.skipped.push_back({p.id, "no complexified program"});
            break;
          }
          PromptExtras extras;
          extras.c_plus = it->second.c_plus;
          plan.prompts.push_back(planned(p, PromptTask::dsr, extras, in.profile));
          break;
        }
        case EvalTask::br: {
          if (!p.buggy_source) {
            plan.skipped.push_back({p.id, "no buggy variant"});
            break;
          }
          if (!sandbox) throw SandboxUnavailable("bug repair needs a sandbox to find error-revealing tests");
          auto revealing =
              identify_error_revealing_tests(p, p.ground_truth_source(), *p.buggy_source, p.tests, *sandbox);
          if (revealing.empty()) {
            plan.skipped.push_back({p.id, "no error-revealing test"});
            break;
          }
          PromptExtras extras;
          extras.buggy = *p.buggy_source;
          extras.error_revealing_tests = revealing;
          plan.prompts.push_back(planned(p, PromptTask::br, extras, in.profile));
          break;
        }
      }
    } catch (const SandboxUnavailable&) {
      throw;
    } catch (const Error& e) {
      plan.skipped.push_back({p.id, e.what()});
    }
  }
  return plan;
}

EvalRun run_eval(const EvalPlan& plan, ModelGateway& gateway, int parallel) {
  std::vector<std::optional<Transcript>> done(plan.prompts.size());
  std::vector<std::optional<ItemError>> failed(plan.prompts.size());
  parallel_indices(plan.prompts.size(), parallel, [&](std::size_t i) {
    const auto& pp = plan.prompts[i];
    try {
      done[i] = gateway.complete(pp.bundle).transcript;
    } catch (const Error& e) {
      failed[i] = ItemError{pp.program_id, std::string(to_string(pp.bundle.task)) + ": " + e.what()};
    }
  });
  EvalRun run;
  for (std::size_t i = 0; i < done.size(); ++i) {
    if (done[i]) run.transcripts.push_back(std::move(*done[i]));
    if (failed[i]) run.errors.push_back(std::move(*failed[i]));
  }
  return run;
}

ScoreRun score_transcripts(EvalTask task, const std::vector<Program>& programs,
                           const std::vector<Transcript>& transcripts, const PlanInputs& inputs, Sandbox& sandbox) {
  ScoreRun run;
  std::map<std::string, const Program*> by_id;
  for (const auto& p : programs) by_id[p.id] = &p;

  std::vector<std::string> models;
  for (const auto& t : transcripts)
    if (std::find(models.begin(), models.end(), t.model) == models.end()) models.push_back(t.model);
  std::sort(models.begin(), models.end());

  for (const auto& model : models) {
    std::map<std::string, const Transcript*> by_hash;
    for (const auto& t : transcripts)
      if (t.model == model) by_hash.emplace(t.prompt_hash, &t);

    PlanInputs in = inputs;
    in.profile = default_profile(model);
    auto plan = plan_eval(task, programs, in, &sandbox);

    // One unit of work per program: SR pairs its two prompts.
    std::vector<std::vector<const PlannedPrompt*>> units;
    for (const auto& pp : plan.prompts) {
      if (!units.empty() && units.back().front()->program_id == pp.program_id)
        units.back().push_back(&pp);
      else
        units.push_back({&pp});
    }

    std::set<std::string> used;
    std::vector<Judged> judged(units.size());
    for (std::size_t u = 0; u < units.size(); ++u)
      for (const auto* pp : units[u]) used.insert(pp->hash);

    sandbox.parallel_for(units.size(), [&](std::size_t u) {
      const auto& unit = units[u];
      const Program& p = *by_id.at(unit.front()->program_id);
      std::vector<const Transcript*> ts;
      for (const auto* pp : unit) {
        auto it = by_hash.find(pp->hash);
        if (it == by_hash.end()) {
          judged[u].error = ItemError{p.id, std::string(to_string(pp->bundle.task)) + ": no transcript for prompt " +
                                                pp->hash.substr(0, 12)};
          return;
        }
        ts.push_back(it->second);
      }
      ScoreRecord r;
      r.program_id = p.id;
      r.task = std::string(to_string(task));
      r.model = model;
      switch (task) {
        case EvalTask::ier: {
          auto gt = sandbox.execute(p, p.source, unit[0]->bundle.meta.at("input_repr"));
          if (!expected_answer(gt)) r.flag = "ground_truth_" + std::string(to_string(gt.status));
          try {
            auto parsed = parse_output_prediction(ts[0]->raw_response);
            bool stdio = p.invocation_mode == InvocationMode::stdio;
            auto predicted = stdio ? parsed.raw_output : parsed.predicted_output_repr;
            r.s_value = score_ier(predicted.value_or(""), gt);
          } catch (const NoOutputSection&) {
            r.flag = "no_output_section";
          }
          r.components["correct"] = r.s_value;
          break;
        }
        case EvalTask::sr: {
          std::string flag_no, flag_with;
          auto no_test = code_or_flag(ts[0]->raw_response, ResponseKind::code, flag_no);
          auto with_test = code_or_flag(ts[1]->raw_response, ResponseKind::code, flag_with);
          bool pass_no = suite_passes(no_test.code_text, p, sandbox);
          bool pass_with = suite_passes(with_test.code_text, p, sandbox);
          r.components["pass_no_test"] = pass_no ? 1.0 : 0.0;
          r.components["pass_with_test"] = pass_with ? 1.0 : 0.0;
          r.s_value = score_sr(pass_no, pass_with);
          if (!flag_no.empty()) r.flag = "no_test:" + flag_no;
          if (!flag_with.empty()) r.flag += (r.flag.empty() ? "" : ",") + std::string("with_test:") + flag_with;
          break;
        }
        case EvalTask::dsr: {
          const auto& tr = inputs.transforms.at(p.id);
          auto parsed = code_or_flag(ts[0]->raw_response, ResponseKind::code, r.flag);
          int loc_c = count_loc(p.source);
          int loc_cprime = parsed.code_text ? count_loc(*parsed.code_text) : 0;
          bool pass = suite_passes(parsed.code_text, p, sandbox);
          r.components["loc_c"] = loc_c;
          r.components["loc_cplus"] = tr.record.loc_after;
          r.components["loc_cprime"] = loc_cprime;
          r.components["suite_pass"] = pass ? 1.0 : 0.0;
          r.s_value = score_dsr(loc_c, tr.record.loc_after, loc_cprime, pass);
          break;
        }
        case EvalTask::br: {
          auto parsed = code_or_flag(ts[0]->raw_response, ResponseKind::patch, r.flag);
          int ok = parsed.code_text ? score_br(*parsed.code_text, p, p.tests, sandbox) : 0;
          r.components["suite_pass"] = ok;
          r.s_value = ok;
          break;
        }
      }
      judged[u].record = std::move(r);
    });

    for (auto& j : judged) {
      if (j.record) run.records.push_back(std::move(*j.record));
      if (j.error) run.errors.push_back(std::move(*j.error));
    }
    for (const auto& [hash, t] : by_hash)
      if (!used.count(hash))
        run.errors.push_back({t->program_id, t->task + ": transcript matches no prompt of the current corpus and templates"});
  }
  return run;
}

std::string transcripts_to_jsonl(const std::vector<Transcript>& transcripts) {
  std::string out;
  for (const auto& t : transcripts) out += transcript_to_json(t) + "\n";
  return out;
}

}  // namespace reasonbench
