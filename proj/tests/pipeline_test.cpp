#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "fakes/desk_model.hpp"
#include "fixtures.hpp"
#include "reasonbench/error.hpp"
#include "reasonbench/gateway.hpp"
#include "reasonbench/metrics.hpp"
#include "reasonbench/pipeline.hpp"
#include "reasonbench/scoring.hpp"
#include "reasonbench/transform.hpp"
#include "reasonbench/util/files.hpp"
#include "reasonbench/util/hash.hpp"
#include "test_support.hpp"

using namespace reasonbench;

namespace {

const std::vector<Program>& desk() {
  static const auto programs = fixtures::desk_corpus();
  return programs;
}

const std::map<std::string, ComplexifyResult>& desk_transforms() {
  static const auto transforms = [] {
    std::map<std::string, ComplexifyResult> out;
    for (const auto& p : desk()) {
      try {
        out[p.id] = complexify(p, {}, fixtures::preloaded_sandbox());
      } catch (const ExhaustedRules&) {
      }
    }
    return out;
  }();
  return transforms;
}

fakes::DeskModel& desk_model() {
  static fakes::DeskModel model("desk-model", desk(), desk_transforms(), fixtures::shared_sandbox());
  return model;
}

ModelConfig config(const std::string& name) {
  ModelConfig c;
  c.name = name;
  c.endpoint = "http://127.0.0.1:1/unused";
  c.rate_per_minute = 0;
  return c;
}

PlanInputs inputs(const std::string& model) {
  PlanInputs in;
  in.profile = default_profile(model);
  in.transforms = desk_transforms();
  return in;
}

ScoreRun eval_and_score(EvalTask task, ModelGateway& gateway, int parallel = 2) {
  auto in = inputs(gateway.config().name);
  auto plan = plan_eval(task, desk(), in, &fixtures::shared_sandbox());
  auto run = run_eval(plan, gateway, parallel);
  EXPECT_TRUE(run.errors.empty());
  auto& sb = task == EvalTask::dsr ? fixtures::preloaded_sandbox() : fixtures::shared_sandbox();
  return score_transcripts(task, desk(), run.transcripts, in, sb);
}

std::uint64_t h(const std::string& id) { return stable_hash(id, 5); }

std::filesystem::path fresh_store(const std::string& name) {
  auto p = test_support::temp_dir() / name;
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST(EvalPlan, TasksApplyToTheRightPrograms) {
  auto& sb = fixtures::shared_sandbox();
  auto in = inputs("m");
  auto ier = plan_eval(EvalTask::ier, desk(), in, nullptr);
  EXPECT_EQ(ier.prompts.size(), desk().size());
  EXPECT_TRUE(ier.skipped.empty());

  std::size_t with_spec = 0;
  for (const auto& p : desk()) with_spec += p.nl_spec ? 1 : 0;
  auto sr = plan_eval(EvalTask::sr, desk(), in, nullptr);
  EXPECT_EQ(sr.prompts.size(), 2 * with_spec);
  EXPECT_EQ(sr.skipped.size(), desk().size() - with_spec);
  for (std::size_t i = 0; i < sr.prompts.size(); i += 2) {
    EXPECT_EQ(sr.prompts[i].bundle.task, PromptTask::sr_no_test);
    EXPECT_EQ(sr.prompts[i + 1].bundle.task, PromptTask::sr_with_test);
    EXPECT_EQ(sr.prompts[i].program_id, sr.prompts[i + 1].program_id);
  }

  auto dsr = plan_eval(EvalTask::dsr, desk(), in, nullptr);
  EXPECT_EQ(dsr.prompts.size(), desk_transforms().size());

  EXPECT_THROW(plan_eval(EvalTask::br, desk(), in, nullptr), SandboxUnavailable);
  auto br = plan_eval(EvalTask::br, desk(), in, &sb);
  std::set<std::string> buggy;
  for (const auto& p : desk())
    if (p.buggy_source) buggy.insert(p.id);
  EXPECT_EQ(br.prompts.size(), buggy.size());
  for (const auto& pp : br.prompts) EXPECT_TRUE(buggy.count(pp.program_id));
}

TEST(EvalPlan, WithTestPromptIsSeeded) {
  auto in = inputs("m");
  auto a = plan_eval(EvalTask::sr, desk(), in, nullptr);
  auto b = plan_eval(EvalTask::sr, desk(), in, nullptr);
  ASSERT_EQ(a.prompts.size(), b.prompts.size());
  for (std::size_t i = 0; i < a.prompts.size(); ++i) EXPECT_EQ(a.prompts[i].hash, b.prompts[i].hash);
  for (const auto& pp : a.prompts) EXPECT_EQ(pp.hash, sha256_hex(pp.bundle.rendered));
}

TEST(Pipeline, OracleScoresPerfectlyOnOutputPrediction) {
  ModelGateway gateway(config("oracle"), {}, nullptr, &fixtures::shared_sandbox());
  auto scored = eval_and_score(EvalTask::ier, gateway);
  EXPECT_TRUE(scored.errors.empty());
  ASSERT_EQ(scored.records.size(), desk().size());
  for (const auto& r : scored.records) EXPECT_EQ(r.s_value, 1.0) << r.program_id << " " << r.flag;
  EXPECT_DOUBLE_EQ(rate_ier(scored.records), 1.0);
}

TEST(Pipeline, OutputPredictionMatchesTheScriptedMistakes) {
  auto model = std::shared_ptr<ChatBackend>(&desk_model(), [](ChatBackend*) {});
  ModelGateway gateway(config("desk-model"), {}, model);
  auto scored = eval_and_score(EvalTask::ier, gateway);
  ASSERT_EQ(scored.records.size(), desk().size());
  int wrong = 0;
  for (const auto& r : scored.records) {
    EXPECT_EQ(r.s_value, h(r.program_id) % 4 == 0 ? 0.0 : 1.0) << r.program_id;
    EXPECT_EQ(r.model, "desk-model");
    wrong += r.s_value == 0.0;
  }
  EXPECT_GT(wrong, 0);
}

TEST(Pipeline, SpecificationReasoningComponents) {
  auto model = std::shared_ptr<ChatBackend>(&desk_model(), [](ChatBackend*) {});
  ModelGateway gateway(config("desk-model"), {}, model);
  auto scored = eval_and_score(EvalTask::sr, gateway);
  ASSERT_FALSE(scored.records.empty());
  long long successes = 0;
  for (const auto& r : scored.records) {
    auto k = h(r.program_id) % 3;
    EXPECT_EQ(r.components.at("pass_no_test"), k == 1 ? 1.0 : 0.0) << r.program_id;
    EXPECT_EQ(r.components.at("pass_with_test"), k != 0 ? 1.0 : 0.0) << r.program_id;
    EXPECT_EQ(r.s_value, k == 2 ? 1.0 : 0.0) << r.program_id;
    successes += r.s_value == 1.0;
  }
  auto rates = compute_rates(scored.records, {});
  auto m = static_cast<long long>(scored.records.size());
  double pass_b = 0;
  for (const auto& r : scored.records) pass_b += r.components.at("pass_no_test");
  pass_b /= static_cast<double>(m);
  EXPECT_DOUBLE_EQ(*rates.at("total").r_sr, pass_b * std::exp(static_cast<double>(successes) / m));
}

TEST(Pipeline, RefactoringScores) {
  auto model = std::shared_ptr<ChatBackend>(&desk_model(), [](ChatBackend*) {});
  ModelGateway gateway(config("desk-model"), {}, model);
  auto scored = eval_and_score(EvalTask::dsr, gateway);
  ASSERT_EQ(scored.records.size(), desk_transforms().size());
  for (const auto& r : scored.records) {
    const auto& tr = desk_transforms().at(r.program_id);
    EXPECT_EQ(r.components.at("loc_cplus"), tr.record.loc_after);
    EXPECT_EQ(r.components.at("suite_pass"), 1.0) << r.program_id;
    // Answering with the original scores 1; echoing C+ back scores 0.
    EXPECT_EQ(r.s_value, h(r.program_id) % 2 == 0 ? 1.0 : 0.0) << r.program_id;
  }
}

TEST(Pipeline, BugRepairScores) {
  auto model = std::shared_ptr<ChatBackend>(&desk_model(), [](ChatBackend*) {});
  ModelGateway gateway(config("desk-model"), {}, model);
  auto scored = eval_and_score(EvalTask::br, gateway);
  ASSERT_FALSE(scored.records.empty());
  for (const auto& r : scored.records) EXPECT_EQ(r.s_value, h(r.program_id) % 2 == 0 ? 1.0 : 0.0) << r.program_id;
}

TEST(Pipeline, UnanswerableResponsesScoreZeroWithAFlag) {
  class Mute : public ChatBackend {
    std::string send(const ModelConfig&, const std::string&, const std::string&) override {
      return fakes::DeskModel::completion("I think it returns something.");
    }
  };
  ModelGateway gateway(config("mute"), {}, std::make_shared<Mute>());
  auto scored = eval_and_score(EvalTask::ier, gateway);
  ASSERT_EQ(scored.records.size(), desk().size());
  for (const auto& r : scored.records) {
    EXPECT_EQ(r.s_value, 0.0);
    EXPECT_EQ(r.flag, "no_output_section");
  }
  auto sr = eval_and_score(EvalTask::sr, gateway);
  for (const auto& r : sr.records) EXPECT_NE(r.flag.find("no_parseable_code"), std::string::npos);
}

TEST(Pipeline, MissingAndStrayTranscriptsAreReported) {
  ModelGateway gateway(config("oracle"), {}, nullptr, &fixtures::shared_sandbox());
  auto in = inputs("oracle");
  auto plan = plan_eval(EvalTask::ier, desk(), in, nullptr);
  auto run = run_eval(plan, gateway, 1);
  ASSERT_EQ(run.transcripts.size(), desk().size());
  auto dropped = run.transcripts.front().program_id;
  run.transcripts.erase(run.transcripts.begin());
  run.transcripts.back().prompt_hash = std::string(64, '0');
  auto stray = run.transcripts.back().program_id;
  auto scored = score_transcripts(EvalTask::ier, desk(), run.transcripts, in, fixtures::shared_sandbox());
  EXPECT_EQ(scored.records.size(), desk().size() - 2);
  std::set<std::string> flagged;
  for (const auto& e : scored.errors) flagged.insert(e.program_id);
  EXPECT_EQ(flagged, (std::set<std::string>{dropped, stray}));
}

TEST(Pipeline, ReplayIsByteIdenticalAcrossParallelism) {
  auto model = std::shared_ptr<ChatBackend>(&desk_model(), [](ChatBackend*) {});
  auto store = fresh_store("pipeline_store.jsonl");
  ModelGateway::Options rec;
  rec.mode = ModelGateway::Mode::record;
  rec.store = store;
  ModelGateway recorder(config("desk-model"), rec, model);
  // DSR is covered by RefactoringScores; it is the slow one to judge.
  const auto tasks = {EvalTask::ier, EvalTask::sr, EvalTask::br};
  for (auto task : tasks) eval_and_score(task, recorder, 4);

  int calls_before = desk_model().calls;
  std::vector<std::string> outputs;
  for (int parallel : {1, 8}) {
    ModelGateway::Options rep;
    rep.mode = ModelGateway::Mode::replay;
    rep.store = store;
    ModelGateway replayer(config("desk-model"), rep, model);
    std::string all;
    for (auto task : tasks)
      all += scores_to_jsonl(eval_and_score(task, replayer, parallel).records);
    outputs.push_back(all);
  }
  EXPECT_EQ(desk_model().calls, calls_before);
  EXPECT_EQ(outputs[0], outputs[1]);
}

TEST(Pipeline, ReplayMissIsAnItemError) {
  auto store = fresh_store("empty_store.jsonl");
  write_file_atomic(store, "");
  ModelGateway::Options rep;
  rep.mode = ModelGateway::Mode::replay;
  rep.store = store;
  ModelGateway replayer(config("desk-model"), rep, nullptr);
  auto plan = plan_eval(EvalTask::ier, desk(), inputs("desk-model"), nullptr);
  auto run = run_eval(plan, replayer, 2);
  EXPECT_TRUE(run.transcripts.empty());
  EXPECT_EQ(run.errors.size(), desk().size());
}

TEST(Pipeline, TaskNames) {
  for (auto t : {EvalTask::ier, EvalTask::sr, EvalTask::dsr, EvalTask::br}) EXPECT_EQ(parse_eval_task(to_string(t)), t);
  EXPECT_THROW(parse_eval_task("csr"), Error);
}
