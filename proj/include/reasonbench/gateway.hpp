#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "reasonbench/prompting.hpp"

namespace reasonbench {

class Sandbox;

struct ModelConfig {
  std::string name;
  std::string version;
  std::string endpoint;  // full URL of an OpenAI-style chat completions route
  std::string auth_env;  // environment variable holding the API key; empty for none
  double temperature = 0.0;
  bool allow_nonzero_temperature = false;
  int max_tokens = 1024;
  std::optional<std::string> persona;
  int request_timeout_s = 120;
  double rate_per_minute = 60.0;
};

/// Reads {"models": [...]} with the ModelConfig field names. Throws
/// MalformedRecord or IoError.
std::map<std::string, ModelConfig> load_model_configs(const std::filesystem::path& path);

struct Transcript {
  std::string program_id;
  std::string task;
  std::string prompt_hash;
  std::string rendered_prompt;
  std::string raw_response;
  std::string model;
  std::string model_version;
  std::string timestamp;  // UTC, ISO 8601
  double latency_ms = 0.0;
  int attempts = 0;
};

std::string transcript_to_json(const Transcript& t);
Transcript transcript_from_json(std::string_view line);
std::vector<Transcript> transcripts_from_jsonl(std::string_view text);

/// Append-only line-delimited transcript file, safe to share between
/// threads.
class TranscriptStore {
 public:
  explicit TranscriptStore(std::filesystem::path path) : path_(std::move(path)) {}
  void append(const Transcript& t);
  /// Every transcript in the file keyed by prompt hash; the first one wins.
  std::map<std::string, Transcript> load() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

/// Sends one request. Implementations throw RateLimited or AuthFailure, and
/// TransientFailure for anything worth retrying.
class ChatBackend {
 public:
  struct TransientFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
  };
  virtual ~ChatBackend() = default;
  virtual std::string send(const ModelConfig& cfg, const std::string& api_key, const std::string& body_json) = 0;
};

/// HTTP(S) client for chat completion endpoints.
std::shared_ptr<ChatBackend> http_backend();

/// JSON body of a chat completion request. The prompt goes out as one user
/// message; temperature is always explicit.
std::string request_body(const ModelConfig& cfg, const std::string& prompt);

/// Text of the first choice in a chat completion response. Throws
/// ChatBackend::TransientFailure on an unexpected shape.
std::string response_text(const std::string& body);

/// Answers IER prompts by running the program in the sandbox. The answer
/// ends in "[Output]\n<value>"; failed runs answer with the exception name
/// (TimeoutError for timeouts).
std::string oracle_model(const PromptBundle& bundle, Sandbox& sandbox);

/// Steady request pacing: holds at most `burst` tokens refilled at
/// `per_minute`.
class TokenBucket {
 public:
  TokenBucket(double per_minute, double burst);
  void acquire();

 private:
  std::mutex mu_;
  double rate_per_ms_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

struct Completion {
  std::string text;
  Transcript transcript;
};

class ModelGateway {
 public:
  enum class Mode { live, record, replay };
  struct Options {
    Mode mode = Mode::live;
    std::filesystem::path store;  // transcript file for record/replay
    int max_attempts = 5;
    int backoff_ms = 500;  // doubled after every failed attempt
    int max_in_flight = 4;
    std::function<void(int)> sleep_ms;  // for tests; defaults to sleeping
  };

  /// The model named "oracle" answers through `sandbox` and never touches
  /// the network.
  ModelGateway(ModelConfig cfg, Options options, std::shared_ptr<ChatBackend> backend = nullptr,
               Sandbox* sandbox = nullptr);

  /// Throws RateLimited, AuthFailure, ReplayMiss, Exhausted, and
  /// ConstraintViolation when the temperature guard trips.
  Completion complete(const PromptBundle& bundle);

  const ModelConfig& config() const { return cfg_; }
  std::size_t requests_sent() const { return requests_; }

 private:
  std::string call_remote(const std::string& prompt, int& attempts);

  ModelConfig cfg_;
  Options options_;
  std::shared_ptr<ChatBackend> backend_;
  Sandbox* sandbox_;
  std::unique_ptr<TranscriptStore> store_;
  std::map<std::string, Transcript> replay_;
  TokenBucket bucket_;
  std::mutex flight_mu_;
  std::condition_variable flight_cv_;
  int in_flight_ = 0;
  std::atomic<std::size_t> requests_{0};
};

ModelGateway::Mode parse_gateway_mode(std::string_view s);

}  // namespace reasonbench
