#pragma once

// A stand-in chat model for the desk corpus. It knows the answer to every
// prompt planned for the corpus and gets a fixed, hash-chosen subset wrong,
// so scores are neither all-zero nor all-one and are stable across runs.

#include <httplib.h>

#include <atomic>
#include <json.hpp>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "reasonbench/gateway.hpp"
#include "reasonbench/pipeline.hpp"
#include "reasonbench/sandbox.hpp"
#include "reasonbench/util/hash.hpp"

namespace fakes {

class DeskModel : public reasonbench::ChatBackend {
 public:
  DeskModel(std::string name, const std::vector<reasonbench::Program>& programs,
            const std::map<std::string, reasonbench::ComplexifyResult>& transforms, reasonbench::Sandbox& sandbox,
            std::uint64_t seed = 17)
      : name_(std::move(name)) {
    using namespace reasonbench;
    PlanInputs in;
    in.profile = default_profile(name_);
    in.seed = seed;
    in.transforms = transforms;
    std::map<std::string, const Program*> by_id;
    for (const auto& p : programs) by_id[p.id] = &p;
    for (auto task : {EvalTask::ier, EvalTask::sr, EvalTask::dsr, EvalTask::br}) {
      for (const auto& pp : plan_eval(task, programs, in, &sandbox).prompts) {
        const Program& p = *by_id.at(pp.program_id);
        auto h = stable_hash(p.id, 5);
        std::string answer;
        switch (pp.bundle.task) {
          case PromptTask::ier:
            answer = h % 4 == 0 ? render_output_answer("A guess.", "'not the answer'") : oracle_model(pp.bundle, sandbox);
            break;
          case PromptTask::sr_no_test:
            answer = fenced(h % 3 == 1 ? p.ground_truth_source() : broken(p));
            break;
          case PromptTask::sr_with_test:
            answer = fenced(h % 3 != 0 ? p.ground_truth_source() : broken(p));
            break;
          case PromptTask::dsr:
            answer = fenced(h % 2 == 0 ? p.source : transforms.at(p.id).c_plus);
            break;
          case PromptTask::br:
            answer = fenced(h % 2 == 0 ? p.ground_truth_source() : *p.buggy_source);
            break;
        }
        answers_[pp.bundle.rendered] = answer;
      }
    }
  }

  std::string answer(const std::string& prompt) const {
    auto it = answers_.find(prompt);
    return it == answers_.end() ? std::string("I cannot help with that.") : it->second;
  }

  std::string send(const reasonbench::ModelConfig&, const std::string&, const std::string& body) override {
    ++calls;
    auto prompt = nlohmann::json::parse(body)["messages"][0]["content"].get<std::string>();
    return completion(answer(prompt));
  }

  static std::string completion(const std::string& text) {
    nlohmann::json r = {{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}};
    return r.dump();
  }

  std::atomic<int> calls{0};

 private:
  static std::string fenced(const std::string& code) { return "Here is the code.\n```python\n" + code + "```\n"; }
  static std::string broken(const reasonbench::Program& p) {
    // Defines the entry point but computes nothing useful.
    auto entry = p.entry_point.value_or("main");
    auto dot = entry.find('.');
    if (dot != std::string::npos)
      return "class " + entry.substr(0, dot) + ":\n    def " + entry.substr(dot + 1) +
             "(self, *args):\n        return None\n";
    if (p.invocation_mode == reasonbench::InvocationMode::stdio) return "print('?')\n";
    return "def " + entry + "(*args):\n    return None\n";
  }

  std::string name_;
  std::map<std::string, std::string> answers_;
};

// Serves a DeskModel as an OpenAI-style chat completion endpoint on
// 127.0.0.1.
class DeskModelServer {
 public:
  explicit DeskModelServer(DeskModel& model) : model_(model) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      res.set_content(model_.send({}, "", req.body), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~DeskModelServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

 private:
  DeskModel& model_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace fakes
