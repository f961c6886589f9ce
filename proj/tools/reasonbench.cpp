#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <json.hpp>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "reasonbench/corpus.hpp"
#include "reasonbench/error.hpp"
#include "reasonbench/gateway.hpp"
#include "reasonbench/metrics.hpp"
#include "reasonbench/pipeline.hpp"
#include "reasonbench/prompting.hpp"
#include "reasonbench/py/lexer.hpp"
#include "reasonbench/report.hpp"
#include "reasonbench/sandbox.hpp"
#include "reasonbench/scoring.hpp"
#include "reasonbench/transform.hpp"
#include "reasonbench/util/files.hpp"
#include "reasonbench/util/hash.hpp"

namespace fs = std::filesystem;
using namespace reasonbench;
using ojson = nlohmann::ordered_json;

namespace {

struct Globals {
  std::uint64_t seed = 17;
  int parallel = 1;
  std::string config;
  std::string record;
  std::string replay;
  std::string shim;
  std::string python = "python3";
  int timeout_ms = 10000;
  int memory_mb = 512;
  std::string log_level = "warn";
};

// Per-item failures are reported as they happen and turn the exit code to 1
// once the stage has finished.
int g_item_errors = 0;

void item_error(const std::string& id, const std::string& message) {
  ++g_item_errors;
  std::cerr << "error: " << id << ": " << message << "\n";
}

void skipped(const std::string& id, const std::string& reason) { std::cerr << "skip: " << id << ": " << reason << "\n"; }

ojson config_json(const Globals& g) {
  if (g.config.empty()) return ojson::object();
  try {
    return ojson::parse(read_file(g.config));
  } catch (const nlohmann::json::exception& e) {
    throw MalformedRecord(0, g.config + ": " + e.what());
  }
}

std::unique_ptr<Sandbox> make_sandbox(const Globals& g, bool preload = false) {
  Sandbox::Options o;
  o.python = g.python;
  o.shim = g.shim.empty() ? shim_from_environment() : fs::path(g.shim);
  o.parallel = std::max(1, g.parallel);
  o.limits.timeout_ms = g.timeout_ms;
  o.limits.memory_mb = g.memory_mb;
  auto cfg = config_json(g);
  if (cfg.contains("sandbox")) {
    const auto& s = cfg["sandbox"];
    o.python = s.value("python", o.python);
    if (g.shim.empty() && s.contains("shim")) o.shim = s["shim"].get<std::string>();
    o.limits.timeout_ms = s.value("timeout_ms", o.limits.timeout_ms);
    o.limits.memory_mb = s.value("memory_mb", o.limits.memory_mb);
    o.limits.float_rel_tol = s.value("float_rel_tol", 0.0);
  }
  if (preload) o.preload = default_preload();
  return std::make_unique<Sandbox>(o);
}

std::vector<Program> load_programs(const std::string& path, const std::string& format = "canonical") {
  return load_corpus(path, parse_format(format));
}

std::map<std::string, std::string> benchmarks_of(const std::vector<Program>& programs) {
  std::map<std::string, std::string> out;
  for (const auto& p : programs) out[p.id] = std::string(to_string(p.benchmark));
  return out;
}

std::map<std::string, ComplexifyResult> load_transforms(const std::string& path) {
  std::map<std::string, ComplexifyResult> out;
  if (path.empty()) return out;
  for (const auto& line : split_lines(read_file(path))) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto r = transform_from_json(line);
    out[r.record.program_id] = std::move(r);
  }
  return out;
}

// Sidecar recording what a stage output was computed from, so a stage can be
// re-run from persisted files and checked against the same inputs.
void write_output(const std::string& path, const std::string& content, const std::string& stage,
                  const std::vector<std::string>& inputs, const Globals& g) {
  write_file_atomic(path, content);
  ojson meta;
  meta["stage"] = stage;
  meta["seed"] = g.seed;
  meta["template_version"] = kTemplateVersion;
  ojson in = ojson::object();
  for (const auto& f : inputs)
    if (!f.empty()) in[f] = sha256_hex(read_file(f));
  meta["inputs"] = in;
  meta["output_sha256"] = sha256_hex(content);
  write_file_atomic(path + ".meta.json", meta.dump(2) + "\n");
}

ModelConfig model_config(const Globals& g, const std::string& name) {
  if (name == "oracle") {
    ModelConfig c;
    c.name = "oracle";
    c.version = "sandbox";
    c.rate_per_minute = 0;
    return c;
  }
  if (g.config.empty()) throw Error("model '" + name + "' needs --config with a models section");
  auto models = load_model_configs(g.config);
  auto it = models.find(name);
  if (it == models.end()) throw Error("model '" + name + "' is not in " + g.config);
  return it->second;
}

std::unique_ptr<ModelGateway> make_gateway(const Globals& g, const ModelConfig& cfg, Sandbox* sandbox) {
  if (!g.record.empty() && !g.replay.empty()) throw Error("--record and --replay are exclusive");
  ModelGateway::Options o;
  if (!g.record.empty()) {
    o.mode = ModelGateway::Mode::record;
    o.store = g.record;
  } else if (!g.replay.empty()) {
    o.mode = ModelGateway::Mode::replay;
    o.store = g.replay;
  }
  o.max_in_flight = std::max(1, g.parallel);
  return std::make_unique<ModelGateway>(cfg, o, nullptr, sandbox);
}

int cmd_ingest(const Globals& g, const std::string& input, const std::string& format, const std::string& benchmark,
               const std::string& out) {
  std::optional<Benchmark> b;
  if (!benchmark.empty()) {
    b = parse_benchmark(benchmark);
    if (!b) throw Error("unknown benchmark '" + benchmark + "'");
  }
  auto programs = load_corpus(input, parse_format(format), b);
  write_output(out, serialize_corpus(programs), "ingest", {fs::is_regular_file(input) ? input : ""}, g);
  std::cout << programs.size() << " programs written to " << out << "\n";
  return 0;
}

int cmd_validate(const Globals& g, const std::string& corpus, const std::string& out) {
  auto programs = load_programs(corpus);
  auto sb = make_sandbox(g);
  auto report = validate_corpus(programs, *sb);
  std::string jsonl;
  for (const auto& pv : report.programs) {
    ojson j;
    j["program_id"] = pv.program_id;
    j["status"] = std::string(to_string(pv.status));
    j["failing_tests"] = pv.failing_tests;
    j["unstable_tests"] = pv.unstable_tests;
    jsonl += j.dump() + "\n";
    if (pv.status != ValidationStatus::valid)
      item_error(pv.program_id, std::string(to_string(pv.status)));
  }
  if (!out.empty()) write_output(out, jsonl, "validate", {corpus}, g);
  std::cout << report.count(ValidationStatus::valid) << "/" << report.programs.size() << " programs valid\n";
  return 0;
}

int cmd_analyze(const Globals& g, const std::string& corpus, const std::string& out, bool no_ll) {
  auto programs = load_programs(corpus);
  std::unique_ptr<Sandbox> sb;
  if (!no_ll) sb = make_sandbox(g);
  std::vector<std::optional<std::string>> lines(programs.size());
  std::vector<std::string> errors(programs.size());
  auto one = [&](std::size_t i) {
    try {
      lines[i] = profile_to_json(programs[i].id, profile_program(programs[i], sb.get()));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  if (sb)
    sb->parallel_for(programs.size(), one);
  else
    for (std::size_t i = 0; i < programs.size(); ++i) one(i);
  std::string jsonl;
  for (std::size_t i = 0; i < programs.size(); ++i) {
    if (lines[i]) jsonl += *lines[i] + "\n";
    if (!errors[i].empty()) item_error(programs[i].id, errors[i]);
  }
  write_output(out, jsonl, "analyze", {corpus}, g);
  std::cout << programs.size() << " programs profiled\n";
  return 0;
}

int cmd_transform(const Globals& g, const std::string& corpus, const std::string& out, int min_rules,
                  int max_rules) {
  auto programs = load_programs(corpus);
  auto sb = make_sandbox(g, true);
  ComplexifyConfig cfg;
  cfg.seed = g.seed;
  cfg.min_rules = min_rules;
  cfg.max_rules = max_rules;
  std::vector<std::optional<std::string>> lines(programs.size());
  std::vector<std::string> reasons(programs.size());
  sb->parallel_for(programs.size(), [&](std::size_t i) {
    try {
      lines[i] = transform_to_json(complexify(programs[i], cfg, *sb));
    } catch (const ExhaustedRules& e) {
      reasons[i] = e.what();
    } catch (const py::ParseError& e) {
      reasons[i] = std::string("does not parse: ") + e.what();
    }
  });
  std::string jsonl;
  std::size_t emitted = 0;
  for (std::size_t i = 0; i < programs.size(); ++i) {
    if (lines[i]) {
      jsonl += *lines[i] + "\n";
      ++emitted;
    } else {
      skipped(programs[i].id, reasons[i]);
    }
  }
  write_output(out, jsonl, "transform", {corpus}, g);
  std::cout << emitted << "/" << programs.size() << " programs complexified\n";
  return 0;
}

int cmd_prompt(const Globals& g, const std::string& corpus, const std::string& task, const std::string& program,
               const std::string& model, const std::string& transforms, const std::string& out) {
  auto programs = load_programs(corpus);
  if (!program.empty()) {
    std::erase_if(programs, [&](const Program& p) { return p.id != program; });
    if (programs.empty()) throw Error("no program '" + program + "' in " + corpus);
  }
  PlanInputs in;
  in.profile = default_profile(model);
  in.seed = g.seed;
  in.transforms = load_transforms(transforms);
  auto t = parse_eval_task(task);
  std::unique_ptr<Sandbox> sb;
  if (t == EvalTask::br) sb = make_sandbox(g);
  auto plan = plan_eval(t, programs, in, sb.get());
  for (const auto& s : plan.skipped) skipped(s.program_id, s.message);
  std::string jsonl;
  for (const auto& pp : plan.prompts) {
    ojson j;
    j["program_id"] = pp.program_id;
    j["task"] = std::string(to_string(pp.bundle.task));
    j["prompt_hash"] = pp.hash;
    j["rendered_prompt"] = pp.bundle.rendered;
    jsonl += j.dump() + "\n";
  }
  if (out.empty()) {
    for (const auto& pp : plan.prompts)
      std::cout << "### " << pp.program_id << " (" << to_string(pp.bundle.task) << ")\n" << pp.bundle.rendered << "\n";
  } else {
    write_output(out, jsonl, "prompt", {corpus, transforms}, g);
  }
  return 0;
}

int cmd_eval(const Globals& g, const std::string& corpus, const std::string& task, const std::string& model,
             const std::string& transforms, const std::string& out) {
  auto programs = load_programs(corpus);
  auto t = parse_eval_task(task);
  auto cfg = model_config(g, model);
  std::unique_ptr<Sandbox> sb;
  bool replaying = !g.replay.empty();
  if ((model == "oracle" && !replaying) || t == EvalTask::br) sb = make_sandbox(g);
  PlanInputs in;
  in.profile = default_profile(model);
  in.seed = g.seed;
  in.transforms = load_transforms(transforms);
  auto plan = plan_eval(t, programs, in, sb.get());
  for (const auto& s : plan.skipped) skipped(s.program_id, s.message);
  auto gateway = make_gateway(g, cfg, sb.get());
  auto run = run_eval(plan, *gateway, g.parallel);
  for (const auto& e : run.errors) item_error(e.program_id, e.message);
  write_output(out, transcripts_to_jsonl(run.transcripts), "eval", {corpus, transforms, g.replay}, g);
  std::cout << run.transcripts.size() << "/" << plan.prompts.size() << " prompts answered\n";
  return 0;
}

int cmd_score(const Globals& g, const std::string& corpus, const std::string& task,
              const std::string& transcripts_path, const std::string& transforms, const std::string& out) {
  auto programs = load_programs(corpus);
  auto transcripts = transcripts_from_jsonl(read_file(transcripts_path));
  auto t = parse_eval_task(task);
  // C+ pulls in the injected APIs; the refactored answer often keeps them.
  auto sb = make_sandbox(g, t == EvalTask::dsr);
  PlanInputs in;
  in.seed = g.seed;
  in.transforms = load_transforms(transforms);
  auto run = score_transcripts(t, programs, transcripts, in, *sb);
  for (const auto& e : run.errors) item_error(e.program_id, e.message);
  write_output(out, scores_to_jsonl(run.records), "score", {corpus, transcripts_path, transforms}, g);
  if (!run.records.empty()) {
    auto rates = compute_rates(run.records, benchmarks_of(programs));
    const auto& total = rates.at("total");
    for (auto [name, v] : {std::pair{"R_IER", total.r_ier}, std::pair{"R_SR", total.r_sr},
                           std::pair{"R_DSR", total.r_dsr}, std::pair{"BR", total.br_rate}})
      if (v) std::cout << name << " " << format_percent(*v) << "%\n";
  }
  std::cout << run.records.size() << " records scored\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& scores, const std::string& profiles,
               const std::vector<std::string>& external, const std::string& external_format,
               const std::string& corpus, const std::string& format, const std::string& out) {
  ReportInputs in;
  for (const auto& f : scores) {
    auto rs = scores_from_jsonl(read_file(f));
    in.scores.insert(in.scores.end(), rs.begin(), rs.end());
  }
  if (!profiles.empty()) in.profiles = profiles_from_jsonl(read_file(profiles));
  std::set<std::string> known;
  if (!corpus.empty()) {
    auto programs = load_programs(corpus);
    in.benchmark_of = benchmarks_of(programs);
    for (const auto& p : programs) known.insert(p.id);
  }
  for (const auto& f : external) in.external.push_back(import_external_outcomes(f, external_format, known));
  auto report = summary_tables(in);
  for (const auto& o : report.orphans) std::cerr << "warning: orphan id " << o.program_id << " (" << o.source << "): " << o.reason << "\n";
  auto files = emit_report(report, parse_report_format(format), out);
  for (const auto& row : report.rates)
    if (row.rates.benchmark == "total" && row.rates.r_ier)
      std::cout << row.model << " R_IER " << format_percent(*row.rates.r_ier) << "%\n";
  for (const auto& f : files) std::cout << f.string() << "\n";
  return 0;
}

int cmd_exec(const Globals& g, const std::string& corpus, const std::string& program, const std::string& source_path,
             const std::string& entry, bool stdio, const std::string& input) {
  Program p;
  if (!corpus.empty()) {
    auto programs = load_programs(corpus);
    auto it = std::find_if(programs.begin(), programs.end(), [&](const Program& x) { return x.id == program; });
    if (it == programs.end()) throw Error("no program '" + program + "' in " + corpus);
    p = *it;
  } else {
    if (source_path.empty()) throw Error("exec needs --corpus and --program, or --source");
    p.id = source_path;
    p.source = read_file(source_path);
    if (stdio)
      p.invocation_mode = InvocationMode::stdio;
    else
      p.entry_point = entry.empty() ? "f" : entry;
  }
  auto sb = make_sandbox(g);
  ojson j;
  j["program_id"] = p.id;
  if (input.empty()) {
    auto r = sb->run_tests(p.source, p);
    j["all_pass"] = r.all_pass;
    j["tests"] = ojson::array();
    for (const auto& v : r.per_test)
      j["tests"].push_back({{"test_id", v.test_id}, {"verdict", std::string(to_string(v.verdict))}, {"observed", v.observed}, {"detail", v.detail}});
    if (!r.all_pass) ++g_item_errors;
  } else {
    auto out = sb->execute(p, p.source, input);
    j["status"] = std::string(to_string(out.status));
    j["value"] = out.value_repr ? ojson(*out.value_repr) : ojson(nullptr);
    j["stdout"] = out.stdout_text;
    j["exception"] = out.exception_type ? ojson(*out.exception_type) : ojson(nullptr);
    j["detail"] = out.detail;
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reasonbench: code reasoning evaluation harness"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Global seed")->capture_default_str();
  app.add_option("--parallel", g.parallel, "Worker count")->capture_default_str()->check(CLI::Range(1, 256));
  app.add_option("--config", g.config, "Config file (models, sandbox)");
  app.add_option("--record", g.record, "Record model responses into this transcript store");
  app.add_option("--replay", g.replay, "Answer prompts from this transcript store");
  app.add_option("--shim", g.shim, "Runner shim script (default: $REASONBENCH_SHIM)");
  app.add_option("--python", g.python, "Interpreter for the shim")->capture_default_str();
  app.add_option("--timeout-ms", g.timeout_ms, "Per-job time limit")->capture_default_str();
  app.add_option("--memory-mb", g.memory_mb, "Per-job memory limit")->capture_default_str();
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  std::function<int()> action;

  std::string in_path, in_format = "canonical", in_bench, out;
  auto* ingest = app.add_subcommand("ingest", "Normalize a benchmark dump into the canonical corpus");
  ingest->add_option("--input", in_path)->required();
  ingest->add_option("--format", in_format, "canonical|humaneval|cruxeval")->capture_default_str();
  ingest->add_option("--benchmark", in_bench);
  ingest->add_option("--out", out)->required();
  ingest->callback([&] { action = [&] { return cmd_ingest(g, in_path, in_format, in_bench, out); }; });

  std::string corpus;
  auto* validate = app.add_subcommand("validate", "Run every test twice against the ground truth");
  validate->add_option("--corpus", corpus)->required();
  validate->add_option("--out", out);
  validate->callback([&] { action = [&] { return cmd_validate(g, corpus, out); }; });

  bool no_ll = false;
  auto* analyze = app.add_subcommand("analyze", "Complexity profile of every program");
  analyze->add_option("--corpus", corpus)->required();
  analyze->add_option("--out", out)->required();
  analyze->add_flag("--no-ll", no_ll, "Skip loop-length tracing");
  analyze->callback([&] { action = [&] { return cmd_analyze(g, corpus, out, no_ll); }; });

  int min_rules = 3, max_rules = 8;
  auto* transform = app.add_subcommand("transform", "Complexify programs for refactoring prompts");
  transform->add_option("--corpus", corpus)->required();
  transform->add_option("--out", out)->required();
  transform->add_option("--min-rules", min_rules)->capture_default_str();
  transform->add_option("--max-rules", max_rules)->capture_default_str();
  transform->callback([&] { action = [&] { return cmd_transform(g, corpus, out, min_rules, max_rules); }; });

  std::string task, program, model = "oracle", transforms;
  auto* prompt = app.add_subcommand("prompt", "Render prompts without sending them");
  prompt->add_option("--corpus", corpus)->required();
  prompt->add_option("--task", task, "ier|sr|dsr|br")->required();
  prompt->add_option("--program", program);
  prompt->add_option("--model", model)->capture_default_str();
  prompt->add_option("--transforms", transforms);
  prompt->add_option("--out", out);
  prompt->callback([&] { action = [&] { return cmd_prompt(g, corpus, task, program, model, transforms, out); }; });

  auto* eval = app.add_subcommand("eval", "Query a model and store transcripts");
  eval->add_option("--corpus", corpus)->required();
  eval->add_option("--task", task, "ier|sr|dsr|br")->required();
  eval->add_option("--model", model)->required();
  eval->add_option("--transforms", transforms);
  eval->add_option("--out", out)->required();
  eval->callback([&] { action = [&] { return cmd_eval(g, corpus, task, model, transforms, out); }; });

  std::string transcripts;
  auto* score = app.add_subcommand("score", "Judge transcripts against the sandbox");
  score->add_option("--corpus", corpus)->required();
  score->add_option("--task", task, "ier|sr|dsr|br")->required();
  score->add_option("--transcripts", transcripts)->required();
  score->add_option("--transforms", transforms);
  score->add_option("--out", out)->required();
  score->callback([&] { action = [&] { return cmd_score(g, corpus, task, transcripts, transforms, out); }; });

  std::vector<std::string> score_files, external;
  std::string profiles, external_format = "csv", format = "md";
  auto* report = app.add_subcommand("report", "Tables, correlations and overlaps");
  report->add_option("--scores", score_files)->required();
  report->add_option("--profiles", profiles);
  report->add_option("--external", external);
  report->add_option("--external-format", external_format, "csv|jsonl")->capture_default_str();
  report->add_option("--corpus", corpus, "Groups programs by benchmark and flags orphan ids");
  report->add_option("--format", format, "md|csv|json")->capture_default_str();
  report->add_option("--out", out)->required();
  report->callback([&] {
    action = [&] { return cmd_report(score_files, profiles, external, external_format, corpus, format, out); };
  });

  std::string source, entry, input;
  bool stdio = false;
  auto* exec = app.add_subcommand("exec", "Run one program in the sandbox");
  exec->add_option("--corpus", corpus);
  exec->add_option("--program", program);
  exec->add_option("--source", source);
  exec->add_option("--entry", entry);
  exec->add_flag("--stdio", stdio);
  exec->add_option("--input", input, "Call arguments or stdin text; omit to run the test suite");
  exec->callback([&] { action = [&] { return cmd_exec(g, corpus, program, source, entry, stdio, input); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  spdlog::set_level(spdlog::level::from_str(g.log_level));
  try {
    int rc = action();
    return rc != 0 ? rc : (g_item_errors ? 1 : 0);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const py::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
