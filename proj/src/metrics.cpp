#include "reasonbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <set>

#include "reasonbench/error.hpp"
#include "reasonbench/py/parser.hpp"
#include "reasonbench/sandbox.hpp"
#include "reasonbench/util/files.hpp"

namespace reasonbench {

using py::Kind;
using py::Node;

namespace {

int connectives(const Node* cond) {
  if (!cond) return 0;
  int n = 0;
  py::walk(*cond, [&](const Node& e) {
    if (e.kind == Kind::Lambda) return false;
    if (e.kind == Kind::BoolOp) n += static_cast<int>(e.children.size()) - 1;
    return true;
  });
  return n;
}

bool is_construct(const Node& n) { return n.kind == Kind::For || n.kind == Kind::While || n.kind == Kind::If; }

bool is_scope(const Node& n) {
  return n.kind == Kind::FunctionDef || n.kind == Kind::ClassDef || n.kind == Kind::Lambda;
}

// The elif child of an If, if its else-block is exactly one chained If.
const Node* elif_of(const Node& n) {
  if (n.kind != Kind::If) return nullptr;
  const Node* orelse = n.child(2);
  if (orelse && orelse->children.size() == 1 && orelse->children[0]->kind == Kind::If && orelse->children[0]->flag)
    return orelse->children[0].get();
  return nullptr;
}

bool contains_construct(const Node& root, const Node* skip) {
  bool found = false;
  for (const Node* block : py::blocks_of(root)) {
    py::walk(*block, [&](const Node& e) {
      if (found || &e == skip || is_scope(e)) return false;
      if (&e != block && is_construct(e)) {
        found = true;
        return false;
      }
      return true;
    });
  }
  return found;
}

int depth_of(const Node& n, int depth) {
  int best = depth;
  for (const auto& c : n.children) {
    if (!c) continue;
    if (is_scope(*c)) {
      best = std::max(best, depth_of(*c, 0));
      continue;
    }
    bool chained = n.kind == Kind::Block && c->kind == Kind::If && c->flag;
    int d = is_construct(*c) && !chained ? depth + 1 : depth;
    best = std::max(best, depth_of(*c, d));
  }
  return best;
}

}  // namespace

int cyclomatic_complexity(std::string_view source) {
  auto pm = py::parse_module(source);
  int cc = 1;
  py::walk(*pm.module, [&](const Node& n) {
    switch (n.kind) {
      case Kind::For:
        ++cc;
        break;
      case Kind::While:
      case Kind::If:
        cc += 1 + connectives(n.child(0));
        break;
      case Kind::ExceptHandler:
        ++cc;
        break;
      case Kind::IfExp:
        cc += 1 + connectives(n.child(1));
        break;
      case Kind::Comprehension:
        for (std::size_t i = 2; i < n.children.size(); ++i) cc += 1 + connectives(n.children[i].get());
        break;
      default:
        break;
    }
    return true;
  });
  return cc;
}

int count_loc(std::string_view source) {
  std::vector<py::Token> tokens;
  std::set<int> docstring_tokens;
  try {
    auto pm = py::parse_module(source);
    tokens = std::move(pm.tokens);
    py::walk(*pm.module, [&](const Node& n) {
      if (n.kind == Kind::ExprStmt && n.child(0) && n.child(0)->kind == Kind::String)
        for (int t = n.first_token; t >= 0 && t <= n.last_token; ++t) docstring_tokens.insert(t);
      return !py::is_statement(n.kind) || py::is_compound_statement(n.kind) || n.kind == Kind::Module;
    });
  } catch (const py::ParseError&) {
    try {
      tokens = py::tokenize(source);
    } catch (const py::ParseError&) {
      int n = 0;
      for (const auto& line : split_lines(source)) {
        auto first = line.find_first_not_of(" \t\r\f");
        if (first != std::string::npos && line[first] != '#') ++n;
      }
      return n;
    }
  }
  std::set<int> lines;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t.kind != py::TokenKind::Name && t.kind != py::TokenKind::Number && t.kind != py::TokenKind::String &&
        t.kind != py::TokenKind::Op)
      continue;
    if (t.kind == py::TokenKind::String && !docstring_tokens.count(static_cast<int>(i))) {
      for (int l = t.line; l <= t.end_line; ++l) lines.insert(l);
    } else {
      lines.insert(t.line);
    }
  }
  return static_cast<int>(lines.size());
}

int intra_class_dep(std::string_view source) {
  auto pm = py::parse_module(source);
  int edges = 0;
  py::walk(*pm.module, [&](const Node& cls) {
    if (cls.kind != Kind::ClassDef) return true;
    std::set<std::string> methods;
    for (const auto& s : cls.child(2)->children)
      if (s->kind == Kind::FunctionDef) methods.insert(s->value);
    std::set<std::pair<std::string, std::string>> found;
    for (const auto& s : cls.child(2)->children) {
      if (s->kind != Kind::FunctionDef) continue;
      std::set<std::string> receivers = {"self", "cls", cls.value};
      const Node* args = s->child(1);
      if (args && !args->children.empty() && args->children[0]->extra.empty())
        receivers.insert(args->children[0]->value);
      py::walk(*s->child(3), [&](const Node& e) {
        if (e.kind == Kind::ClassDef) return false;
        if (e.kind == Kind::Call) {
          const Node* f = e.child(0);
          if (f->kind == Kind::Attribute && f->child(0)->kind == Kind::Name && receivers.count(f->child(0)->value) &&
              methods.count(f->value))
            found.emplace(s->value, f->value);
        }
        return true;
      });
    }
    edges += static_cast<int>(found.size());
    return true;
  });
  return edges;
}

int nested_constructs(std::string_view source) {
  auto pm = py::parse_module(source);
  int nc = 0;
  py::walk(*pm.module, [&](const Node& n) {
    if (is_construct(n) && contains_construct(n, elif_of(n))) ++nc;
    return true;
  });
  return nc;
}

int nesting_depth(std::string_view source) {
  auto pm = py::parse_module(source);
  return depth_of(*pm.module, 0);
}

LoopLength loop_length(const Program& program, Sandbox& sandbox) {
  auto trace = sandbox.trace_loops(program.source, program, program.tests, sandbox.limits());
  LoopLength out;
  out.partial = trace.partial;
  for (const auto& s : trace.sites) out.ll = std::max(out.ll, s.iterations);
  return out;
}

ComplexityProfile profile_program(const Program& program, Sandbox* sandbox) {
  ComplexityProfile p;
  p.cc = cyclomatic_complexity(program.source);
  p.loc = count_loc(program.source);
  p.dep = intra_class_dep(program.source);
  p.nc = nested_constructs(program.source);
  p.nc_depth = nesting_depth(program.source);
  if (sandbox) {
    auto ll = loop_length(program, *sandbox);
    p.ll = ll.ll;
    p.ll_partial = ll.partial;
    p.ll_measured = true;
  }
  return p;
}

std::vector<double> fractional_ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman_roc(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DegenerateInput("inputs differ in length");
  if (x.size() < 2) throw DegenerateInput("need at least two observations");
  auto rx = fractional_ranks(x);
  auto ry = fractional_ranks(y);
  double n = static_cast<double>(x.size());
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0) throw DegenerateInput("first input is constant");
  if (syy == 0.0) throw DegenerateInput("second input is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double metric_value(const ComplexityProfile& p, std::string_view metric) {
  if (metric == "cc") return p.cc;
  if (metric == "loc") return p.loc;
  if (metric == "dep") return p.dep;
  if (metric == "nc") return p.nc;
  if (metric == "ll") return static_cast<double>(p.ll);
  throw Error("unknown metric '" + std::string(metric) + "'");
}

std::map<std::string, Correlation> correlation_table(const std::map<std::string, ComplexityProfile>& profiles,
                                                     const std::map<std::string, double>& outcomes) {
  std::map<std::string, Correlation> table;
  for (const auto& metric : metric_names()) {
    Correlation c;
    std::vector<double> xs, ys;
    bool any_ll = false;
    for (const auto& [id, score] : outcomes) {
      auto it = profiles.find(id);
      if (it == profiles.end()) continue;
      if (metric == "ll") {
        if (!it->second.ll_measured) continue;
        any_ll = true;
      }
      xs.push_back(metric_value(it->second, metric));
      ys.push_back(score);
    }
    c.n = xs.size();
    if (metric == "ll" && !any_ll) {
      c.unavailable = "loop lengths not measured";
    } else {
      try {
        c.rho = spearman_roc(xs, ys);
      } catch (const DegenerateInput& e) {
        c.unavailable = e.what();
      }
    }
    table[metric] = std::move(c);
  }
  return table;
}

std::string profile_to_json(const std::string& program_id, const ComplexityProfile& p) {
  nlohmann::ordered_json j;
  j["program_id"] = program_id;
  j["cc"] = p.cc;
  j["loc"] = p.loc;
  j["dep"] = p.dep;
  j["nc"] = p.nc;
  j["nc_depth"] = p.nc_depth;
  j["ll"] = p.ll_measured ? nlohmann::ordered_json(p.ll) : nlohmann::ordered_json(nullptr);
  j["ll_partial"] = p.ll_partial;
  return j.dump();
}

std::map<std::string, ComplexityProfile> profiles_from_jsonl(std::string_view text) {
  std::map<std::string, ComplexityProfile> out;
  int line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ComplexityProfile p;
      p.cc = j.at("cc").get<int>();
      p.loc = j.at("loc").get<int>();
      p.dep = j.at("dep").get<int>();
      p.nc = j.at("nc").get<int>();
      p.nc_depth = j.value("nc_depth", 0);
      if (j.contains("ll") && !j["ll"].is_null()) {
        p.ll = j["ll"].get<long long>();
        p.ll_measured = true;
      }
      p.ll_partial = j.value("ll_partial", false);
      out[j.at("program_id").get<std::string>()] = p;
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(line_no, std::string("profile: ") + e.what());
    }
  }
  return out;
}

}  // namespace reasonbench
