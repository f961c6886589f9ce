#pragma once

#include <memory>
#include <string>
#include <vector>

#include "reasonbench/corpus.hpp"
#include "reasonbench/sandbox.hpp"

namespace fixtures {

inline const char* kSumOfInteger = R"(def sum_of_integer(N, A, B):
    sum_1 = 0
    for i in range(1, N + 1):
        sum_order = 0
        i_str = str(i)
        n = len(i_str)
        for j in range(0, n):
            sum_order += int(i_str[j])
        if A <= sum_order <= B:
            sum_1 += i
    return sum_1
)";

inline const char* kGcd = R"(def greatest_common_divisor(a, b):
    while b:
        a, b = b, a % b
    return a
)";

inline reasonbench::Program sum_program() {
  reasonbench::Program p;
  p.id = "desk/sum_of_integer";
  p.source = kSumOfInteger;
  p.entry_point = "sum_of_integer";
  p.tests = {{"t0", reasonbench::TestKind::io_pair, "(20, 2, 5)", "84"},
             {"t1", reasonbench::TestKind::io_pair, "(10, 1, 2)", "13"},
             {"t2", reasonbench::TestKind::io_pair, "(100, 4, 16)", "4554"}};
  return p;
}

inline std::unique_ptr<reasonbench::Sandbox> sandbox(int parallel = 1, int timeout_ms = 10000, bool preload = false) {
  reasonbench::Sandbox::Options o;
  o.shim = RB_FAKE_SHIM;
  o.parallel = parallel;
  o.limits.timeout_ms = timeout_ms;
  if (preload) o.preload = reasonbench::default_preload();
  return std::make_unique<reasonbench::Sandbox>(o);
}

// One sandbox per test binary; starting the interpreter dominates small tests.
inline reasonbench::Sandbox& shared_sandbox() {
  static auto sb = sandbox(2);
  return *sb;
}

// With the injectable third-party modules imported once up front.
inline reasonbench::Sandbox& preloaded_sandbox() {
  static auto sb = sandbox(2, 10000, true);
  return *sb;
}

inline std::vector<reasonbench::Program> desk_corpus() {
  return reasonbench::load_corpus(std::string(RB_DATA_DIR) + "/desk.jsonl", reasonbench::CorpusFormat::canonical_jsonl,
                                  std::nullopt);
}

}  // namespace fixtures
