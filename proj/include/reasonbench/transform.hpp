#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "reasonbench/corpus.hpp"
#include "reasonbench/util/rng.hpp"

namespace reasonbench {

class Sandbox;

enum class RuleGroup { code_structure, api_calls, procedural_deps, renaming };
std::string_view to_string(RuleGroup g);

struct TransformRule {
  std::string id;
  RuleGroup group = RuleGroup::code_structure;
  std::string description;
};

/// The registry, in table order. Ids are stable across releases.
const std::vector<TransformRule>& list_rules();
/// Throws Error for an unknown id.
const TransformRule& find_rule(std::string_view id);

/// A place a rule can rewrite. `index` is the position in the rule's site
/// list for the source it was found in; `fingerprint` detects that the
/// source changed underneath it.
struct Site {
  std::size_t index = 0;
  int line = 0;
  std::string label;
  std::string fingerprint;
};

/// Names a rewrite must leave alone: the entry point and anything the tests
/// refer to.
struct TransformContext {
  std::set<std::string> reserved;
};

TransformContext context_for(const Program& program);

/// Throws py::ParseError when the source does not parse.
std::vector<Site> find_sites(const TransformRule& rule, std::string_view source,
                             const TransformContext& ctx = {});

/// Rewrites at `site`. Throws SiteStale when the site no longer matches the
/// source.
std::string apply_rule(const TransformRule& rule, std::string_view source, const Site& site, Rng& rng,
                       const TransformContext& ctx = {});

struct AppliedRule {
  std::string rule_id;
  std::string site;
};

struct TransformRecord {
  std::string program_id;
  std::vector<AppliedRule> rules_applied;
  int loc_before = 0;
  int loc_after = 0;
  bool verified = false;
  std::uint64_t seed = 0;
};

struct ComplexifyConfig {
  int min_rules = 3;
  int max_rules = 8;
  std::uint64_t seed = 17;
  // Suite runs allowed per program, counting rolled-back attempts.
  int max_attempts = 40;
};

struct ComplexifyResult {
  TransformRecord record;
  std::string c_plus;
};

/// Applies k rules, k drawn uniformly from [min_rules, max_rules], running
/// the program's tests after every application and rolling back the ones
/// that fail. Throws ExhaustedRules when fewer than min_rules stick or the
/// result is not longer than the original.
ComplexifyResult complexify(const Program& program, const ComplexifyConfig& config, Sandbox& sandbox);

std::string transform_to_json(const ComplexifyResult& result);
ComplexifyResult transform_from_json(std::string_view line);

}  // namespace reasonbench
