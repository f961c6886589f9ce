#include "reasonbench/gateway.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <ctime>
#include <json.hpp>
#include <thread>

#include "reasonbench/error.hpp"
#include "reasonbench/sandbox.hpp"
#include "reasonbench/util/files.hpp"
#include "reasonbench/util/hash.hpp"

namespace reasonbench {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

class HttpBackend : public ChatBackend {
 public:
  std::string send(const ModelConfig& cfg, const std::string& api_key, const std::string& body) override {
    auto scheme = cfg.endpoint.find("://");
    if (scheme == std::string::npos) throw Error("endpoint '" + cfg.endpoint + "' is not a URL");
    auto path_at = cfg.endpoint.find('/', scheme + 3);
    std::string origin = cfg.endpoint.substr(0, path_at);
    std::string path = path_at == std::string::npos ? "/" : cfg.endpoint.substr(path_at);
    httplib::Client client(origin);
    client.set_connection_timeout(cfg.request_timeout_s, 0);
    client.set_read_timeout(cfg.request_timeout_s, 0);
    client.set_write_timeout(cfg.request_timeout_s, 0);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) throw TransientFailure("request failed: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403)
      throw AuthFailure("endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
    if (res->status == 429) throw RateLimited("HTTP 429 from " + origin);
    if (res->status >= 500) throw TransientFailure("HTTP " + std::to_string(res->status));
    if (res->status != 200) throw Exhausted("request rejected with HTTP " + std::to_string(res->status));
    return res->body;
  }
};

std::string answer_for(const ExecutionOutcome& out, bool stdio) {
  switch (out.status) {
    case ExecStatus::value:
      return stdio ? normalize_stdout(out.stdout_text) : out.value_repr.value_or("None");
    case ExecStatus::exception:
      return out.exception_type.value_or("Exception");
    case ExecStatus::timeout:
      return "TimeoutError";
    case ExecStatus::resource_kill:
      return "MemoryError";
    case ExecStatus::harness_error:
      break;
  }
  return "HarnessError";
}

}  // namespace

std::map<std::string, ModelConfig> load_model_configs(const std::filesystem::path& path) {
  std::map<std::string, ModelConfig> out;
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw MalformedRecord(1, std::string("model config: ") + e.what());
  }
  int index = 0;
  for (const auto& m : j.value("models", json::array())) {
    ++index;
    try {
      ModelConfig c;
      c.name = m.at("name").get<std::string>();
      c.version = m.value("version", "");
      c.endpoint = m.value("endpoint", "");
      c.auth_env = m.value("auth_env", "");
      c.temperature = m.value("temperature", 0.0);
      c.allow_nonzero_temperature = m.value("allow_nonzero_temperature", false);
      c.max_tokens = m.value("max_tokens", 1024);
      if (m.contains("persona") && m["persona"].is_string()) c.persona = m["persona"].get<std::string>();
      c.request_timeout_s = m.value("request_timeout_s", 120);
      c.rate_per_minute = m.value("rate_per_minute", 60.0);
      out[c.name] = c;
    } catch (const json::exception& e) {
      throw MalformedRecord(index, std::string("model config: ") + e.what());
    }
  }
  return out;
}

std::string transcript_to_json(const Transcript& t) {
  ordered_json j;
  j["program_id"] = t.program_id;
  j["task"] = t.task;
  j["prompt_hash"] = t.prompt_hash;
  j["model"] = t.model;
  j["model_version"] = t.model_version;
  j["timestamp"] = t.timestamp;
  j["latency_ms"] = t.latency_ms;
  j["attempts"] = t.attempts;
  j["rendered_prompt"] = t.rendered_prompt;
  j["raw_response"] = t.raw_response;
  return j.dump();
}

Transcript transcript_from_json(std::string_view line) {
  auto j = json::parse(line);
  Transcript t;
  t.program_id = j.at("program_id").get<std::string>();
  t.task = j.at("task").get<std::string>();
  t.prompt_hash = j.at("prompt_hash").get<std::string>();
  t.model = j.value("model", "");
  t.model_version = j.value("model_version", "");
  t.timestamp = j.value("timestamp", "");
  t.latency_ms = j.value("latency_ms", 0.0);
  t.attempts = j.value("attempts", 0);
  t.rendered_prompt = j.at("rendered_prompt").get<std::string>();
  t.raw_response = j.at("raw_response").get<std::string>();
  return t;
}

std::vector<Transcript> transcripts_from_jsonl(std::string_view text) {
  std::vector<Transcript> out;
  int line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(transcript_from_json(line));
    } catch (const json::exception& e) {
      throw MalformedRecord(line_no, std::string("transcript: ") + e.what());
    }
  }
  return out;
}

void TranscriptStore::append(const Transcript& t) {
  std::lock_guard lock(mu_);
  std::FILE* f = std::fopen(path_.c_str(), "a");
  if (!f) throw IoError("cannot append to " + path_.string());
  auto line = transcript_to_json(t) + "\n";
  bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size();
  ok = std::fflush(f) == 0 && ok;
  std::fclose(f);
  if (!ok) throw IoError("short write to " + path_.string());
}

std::map<std::string, Transcript> TranscriptStore::load() const {
  std::map<std::string, Transcript> out;
  if (!std::filesystem::exists(path_)) return out;
  for (auto& t : transcripts_from_jsonl(read_file(path_))) out.emplace(t.prompt_hash, std::move(t));
  return out;
}

std::shared_ptr<ChatBackend> http_backend() { return std::make_shared<HttpBackend>(); }

std::string request_body(const ModelConfig& cfg, const std::string& prompt) {
  ordered_json j;
  j["model"] = cfg.version.empty() ? cfg.name : cfg.version;
  j["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
  j["temperature"] = cfg.temperature;
  j["max_tokens"] = cfg.max_tokens;
  return j.dump();
}

std::string response_text(const std::string& body) {
  try {
    auto j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ChatBackend::TransientFailure(std::string("unexpected response: ") + e.what());
  }
}

std::string oracle_model(const PromptBundle& bundle, Sandbox& sandbox) {
  if (bundle.task != PromptTask::ier) throw Error("the oracle model answers only output prediction prompts");
  auto get = [&](const char* key) -> std::string {
    auto it = bundle.meta.find(key);
    if (it == bundle.meta.end()) throw MissingExtras(std::string("prompt lacks '") + key + "'");
    return it->second;
  };
  Program p;
  p.id = get("program_id");
  p.source = get("code");
  bool stdio = get("invocation_mode") == "stdio";
  p.invocation_mode = stdio ? InvocationMode::stdio : InvocationMode::function_call;
  if (!stdio) p.entry_point = get("entry_point");
  auto input = get("input_repr");
  auto out = sandbox.execute(p, p.source, input);
  std::string what = stdio ? "the program with that input" : "`" + call_expression(*p.entry_point, input) + "`";
  return render_output_answer("Executing " + what + " gives the following result.", answer_for(out, stdio));
}

TokenBucket::TokenBucket(double per_minute, double burst)
    : rate_per_ms_(per_minute / 60000.0),
      capacity_(std::max(1.0, burst)),
      tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
  if (rate_per_ms_ <= 0) return;
  std::unique_lock lock(mu_);
  for (;;) {
    auto now = std::chrono::steady_clock::now();
    tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double, std::milli>(now - last_).count() * rate_per_ms_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    auto wait = std::chrono::duration<double, std::milli>((1.0 - tokens_) / rate_per_ms_);
    lock.unlock();
    std::this_thread::sleep_for(wait);
    lock.lock();
  }
}

ModelGateway::Mode parse_gateway_mode(std::string_view s) {
  if (s == "live") return ModelGateway::Mode::live;
  if (s == "record") return ModelGateway::Mode::record;
  if (s == "replay") return ModelGateway::Mode::replay;
  throw Error("unknown gateway mode '" + std::string(s) + "'");
}

ModelGateway::ModelGateway(ModelConfig cfg, Options options, std::shared_ptr<ChatBackend> backend, Sandbox* sandbox)
    : cfg_(std::move(cfg)),
      options_(std::move(options)),
      backend_(std::move(backend)),
      sandbox_(sandbox),
      bucket_(cfg_.rate_per_minute, std::max(1.0, cfg_.rate_per_minute / 60.0)) {
  if (cfg_.temperature != 0.0 && !cfg_.allow_nonzero_temperature)
    throw ConstraintViolation("temperature must be 0 unless explicitly overridden");
  if (!options_.sleep_ms)
    options_.sleep_ms = [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
  if (options_.mode != Mode::live || !options_.store.empty()) {
    if (options_.store.empty()) throw Error("record and replay need a transcript store");
    store_ = std::make_unique<TranscriptStore>(options_.store);
  }
  if (options_.mode == Mode::replay) replay_ = store_->load();
  if (!backend_ && cfg_.name != "oracle") backend_ = http_backend();
}

std::string ModelGateway::call_remote(const std::string& prompt, int& attempts) {
  std::string key;
  if (!cfg_.auth_env.empty()) {
    const char* v = std::getenv(cfg_.auth_env.c_str());
    if (!v || !*v) throw AuthFailure("environment variable " + cfg_.auth_env + " is not set");
    key = v;
  }
  auto body = request_body(cfg_, prompt);
  if (json::parse(body).at("temperature").get<double>() != cfg_.temperature)
    throw ConstraintViolation("request temperature differs from the configured value");

  {
    std::unique_lock lock(flight_mu_);
    flight_cv_.wait(lock, [&] { return in_flight_ < std::max(1, options_.max_in_flight); });
    ++in_flight_;
  }
  struct Release {
    ModelGateway* g;
    ~Release() {
      std::lock_guard lock(g->flight_mu_);
      --g->in_flight_;
      g->flight_cv_.notify_one();
    }
  } release{this};

  bool rate_limited = false;
  std::string last_error;
  int delay = options_.backoff_ms;
  for (attempts = 1; attempts <= options_.max_attempts; ++attempts) {
    bucket_.acquire();
    ++requests_;
    try {
      return response_text(backend_->send(cfg_, key, body));
    } catch (const RateLimited& e) {
      rate_limited = true;
      last_error = e.what();
    } catch (const ChatBackend::TransientFailure& e) {
      rate_limited = false;
      last_error = e.what();
    }
    spdlog::warn("{}: attempt {} failed: {}", cfg_.name, attempts, last_error);
    if (attempts < options_.max_attempts) {
      options_.sleep_ms(delay);
      delay *= 2;
    }
  }
  attempts = options_.max_attempts;
  if (rate_limited) throw RateLimited(cfg_.name + ": still rate limited after " + std::to_string(attempts) + " attempts");
  throw Exhausted(cfg_.name + ": gave up after " + std::to_string(attempts) + " attempts: " + last_error);
}

Completion ModelGateway::complete(const PromptBundle& bundle) {
  Completion c;
  auto hash = sha256_hex(bundle.rendered);
  if (options_.mode == Mode::replay) {
    auto it = replay_.find(hash);
    if (it == replay_.end()) {
      auto id = bundle.meta.count("program_id") ? bundle.meta.at("program_id") : std::string("?");
      throw ReplayMiss("no recorded response for prompt " + hash.substr(0, 12) + " of " + id);
    }
    c.transcript = it->second;
    c.text = it->second.raw_response;
    return c;
  }
  auto start = std::chrono::steady_clock::now();
  Transcript& t = c.transcript;
  t.program_id = bundle.meta.count("program_id") ? bundle.meta.at("program_id") : "";
  t.task = std::string(to_string(bundle.task));
  t.prompt_hash = hash;
  t.rendered_prompt = bundle.rendered;
  t.model = cfg_.name;
  t.model_version = cfg_.version;
  t.timestamp = utc_now();
  if (cfg_.name == "oracle") {
    if (!sandbox_) throw SandboxUnavailable("the oracle model needs a sandbox");
    c.text = oracle_model(bundle, *sandbox_);
    t.attempts = 1;
  } else {
    c.text = call_remote(bundle.rendered, t.attempts);
  }
  t.raw_response = c.text;
  t.latency_ms = ms_since(start);
  if (store_) store_->append(t);
  return c;
}

}  // namespace reasonbench
