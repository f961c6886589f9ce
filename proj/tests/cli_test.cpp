#include <gtest/gtest.h>
#include <sys/wait.h>

#include <fstream>
#include <json.hpp>

#include "fakes/desk_model.hpp"
#include "fixtures.hpp"
#include "reasonbench/util/files.hpp"
#include "test_support.hpp"

using namespace reasonbench;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run cli(const std::string& args) {
  Run r;
  int raw = 0;
  r.out = test_support::capture(std::string(RB_CLI) + " --shim " + RB_FAKE_SHIM + " " + args + " 2>&1", &raw);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string desk_path() { return std::string(RB_DATA_DIR) + "/desk.jsonl"; }

std::string tmp(const std::string& name) {
  auto p = test_support::temp_dir() / name;
  std::filesystem::remove_all(p);
  return p.string();
}

// The first `n` programs of the desk corpus.
std::string small_corpus(std::size_t n) {
  auto lines = split_lines(read_file(desk_path()));
  std::string body;
  for (std::size_t i = 0; i < n && i < lines.size(); ++i) body += lines[i] + "\n";
  return test_support::write_temp("small_" + std::to_string(n) + ".jsonl", body);
}

std::string model_config(const std::string& endpoint) {
  nlohmann::json j = {{"models", {{{"name", "desk-model"}, {"endpoint", endpoint}, {"rate_per_minute", 0}}}}};
  return test_support::write_temp("models.json", j.dump());
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli("frobnicate").status, 2);
  EXPECT_EQ(cli("").status, 2);
  EXPECT_EQ(cli("eval --corpus x.jsonl").status, 2);
  EXPECT_EQ(cli("--parallel 0 exec --source x").status, 2);
  EXPECT_EQ(cli("--help").status, 0);
}

TEST(Cli, MissingCorpusExitsOne) {
  auto r = cli("score --corpus /nonexistent/c.jsonl --task ier --transcripts /nonexistent/t.jsonl --out " +
               tmp("never.jsonl"));
  EXPECT_EQ(r.status, 1) << r.out;
}

TEST(Cli, OracleEndToEnd) {
  auto transcripts = tmp("oracle_ier.jsonl");
  auto scores = tmp("oracle_scores.jsonl");
  auto report = tmp("oracle_report");
  auto e = cli("eval --corpus " + desk_path() + " --task ier --model oracle --out " + transcripts);
  ASSERT_EQ(e.status, 0) << e.out;
  EXPECT_TRUE(std::filesystem::exists(transcripts + ".meta.json"));
  auto s = cli("score --corpus " + desk_path() + " --task ier --transcripts " + transcripts + " --out " + scores);
  ASSERT_EQ(s.status, 0) << s.out;
  auto r = cli("report --scores " + scores + " --corpus " + desk_path() + " --format md --out " + report);
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("oracle R_IER 100.00%"), std::string::npos) << r.out;
  EXPECT_TRUE(std::filesystem::exists(report + "/report.md"));

  auto meta = nlohmann::json::parse(read_file(scores + ".meta.json"));
  EXPECT_EQ(meta["stage"], "score");
  EXPECT_EQ(meta["output_sha256"], sha256_hex(read_file(scores)));
}

TEST(Cli, TransformIsReproducible) {
  auto corpus = small_corpus(4);
  auto a = tmp("tr_a.jsonl");
  auto b = tmp("tr_b.jsonl");
  ASSERT_EQ(cli("--seed 7 --parallel 1 transform --corpus " + corpus + " --out " + a).status, 0);
  ASSERT_EQ(cli("--seed 7 --parallel 2 transform --corpus " + corpus + " --out " + b).status, 0);
  EXPECT_EQ(read_file(a), read_file(b));
  EXPECT_EQ(split_lines(read_file(a)).size(), 4u);
}

TEST(Cli, ReplayMissExitsOne) {
  auto store = test_support::write_temp("empty_cli_store.jsonl", "");
  auto cfg = model_config("http://127.0.0.1:1/v1/chat/completions");
  auto r = cli("--config " + cfg + " --replay " + store + " eval --corpus " + small_corpus(2) +
               " --task ier --model desk-model --out " + tmp("miss.jsonl"));
  EXPECT_EQ(r.status, 1) << r.out;
}

TEST(Cli, RecordThenReplayIsByteIdentical) {
  auto programs = fixtures::desk_corpus();
  fakes::DeskModel model("desk-model", programs, {}, fixtures::shared_sandbox());
  fakes::DeskModelServer server(model);
  auto cfg = model_config(server.endpoint());
  auto store = tmp("cli_store.jsonl");
  for (const std::string task : {"ier", "sr"}) {
    auto r = cli("--config " + cfg + " --record " + store + " --parallel 4 eval --corpus " + desk_path() +
                 " --task " + task + " --model desk-model --out " + tmp("rec_" + task + ".jsonl"));
    ASSERT_EQ(r.status, 0) << r.out;
  }
  int calls = model.calls;
  ASSERT_GT(calls, 0);

  std::vector<std::string> outputs;
  for (int parallel : {1, 8}) {
    std::string all;
    std::string score_args;
    for (const std::string task : {"ier", "sr"}) {
      auto tag = task + std::to_string(parallel);
      auto transcripts = tmp("rep_" + tag + ".jsonl");
      auto scores = tmp("scores_" + tag + ".jsonl");
      auto g = "--config " + cfg + " --replay " + store + " --parallel " + std::to_string(parallel);
      ASSERT_EQ(cli(g + " eval --corpus " + desk_path() + " --task " + task + " --model desk-model --out " +
                    transcripts).status, 0);
      auto s = cli("--parallel " + std::to_string(parallel) + " score --corpus " + desk_path() + " --task " + task +
                   " --transcripts " + transcripts + " --out " + scores);
      ASSERT_EQ(s.status, 0) << s.out;
      all += read_file(scores);
      score_args += " " + scores;
    }
    auto dir = tmp("report_" + std::to_string(parallel));
    ASSERT_EQ(cli("report --scores" + score_args + " --corpus " + desk_path() + " --format json --out " + dir).status,
              0);
    all += read_file(dir + "/report.json");
    outputs.push_back(all);
  }
  EXPECT_EQ(model.calls, calls);
  EXPECT_EQ(outputs[0], outputs[1]);
}
