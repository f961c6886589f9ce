#include "reasonbench/transform.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <functional>
#include <iterator>
#include <map>
#include <optional>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "reasonbench/error.hpp"
#include "reasonbench/metrics.hpp"
#include "reasonbench/py/lexer.hpp"
#include "reasonbench/py/parser.hpp"
#include "reasonbench/py/unparse.hpp"
#include "reasonbench/sandbox.hpp"
#include "reasonbench/util/hash.hpp"

namespace reasonbench {

std::string_view to_string(RuleGroup g) {
  switch (g) {
    case RuleGroup::code_structure: return "code_structure";
    case RuleGroup::api_calls: return "api_calls";
    case RuleGroup::procedural_deps: return "procedural_deps";
    case RuleGroup::renaming: return "renaming";
  }
  return "?";
}

namespace {

using py::Kind;
using py::Node;
using py::NodePtr;
using Names = std::vector<std::string>;

void add_name(Names& out, const std::string& n) {
  if (!n.empty() && std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
}

bool contains(const Names& names, const std::string& n) {
  return std::find(names.begin(), names.end(), n) != names.end();
}

struct StmtRef {
  Node* block = nullptr;
  std::size_t index = 0;
  Node* stmt = nullptr;
  std::vector<Node*> funcs;  // enclosing functions, innermost last
  bool class_scope = false;
  std::size_t top = 0;       // index of the top-level ancestor in the module
};

void index_block(Node& block, const std::vector<Node*>& funcs, bool class_scope, std::optional<std::size_t> top,
                 std::vector<StmtRef>& out) {
  for (std::size_t i = 0; i < block.children.size(); ++i) {
    Node* s = block.children[i].get();
    std::size_t t = top ? *top : i;
    out.push_back({&block, i, s, funcs, class_scope, t});
    auto inner = funcs;
    bool inner_class = class_scope;
    if (s->kind == Kind::FunctionDef) {
      inner.push_back(s);
      inner_class = false;
    } else if (s->kind == Kind::ClassDef) {
      inner_class = true;
    }
    for (Node* b : py::blocks_of(*s)) index_block(*b, inner, inner_class, t, out);
  }
}

struct Ctx {
  py::ParsedModule pm;
  const TransformContext& tc;
  std::vector<StmtRef> stmts;
  std::set<std::string> idents;

  Ctx(std::string_view source, const TransformContext& c) : pm(py::parse_module(source)), tc(c) {
    index_block(*pm.module, {}, false, std::nullopt, stmts);
    for (const auto& t : pm.tokens)
      if (t.kind == py::TokenKind::Name) idents.insert(t.text);
    idents.insert(c.reserved.begin(), c.reserved.end());
  }
  Node& module() { return *pm.module; }
};

struct Cand {
  std::size_t ref = 0;
  Node* node = nullptr;
  int line = 0;
  std::string label;
  std::string key;
  std::string name;
  Node* scope = nullptr;  // rename: the function, or null for module scope
};

class Fresh {
 public:
  Fresh(std::set<std::string>& used, Rng& rng) : used_(used), rng_(rng) {}

  std::string operator()(std::string_view stem) {
    for (int attempt = 0;; ++attempt) {
      long long hi = attempt < 20 ? 99 : 9999;
      std::string n = std::string(stem) + "_" + std::to_string(rng_.uniform(1, hi));
      if (!used_.count(n) && !py::is_keyword(n)) {
        used_.insert(n);
        return n;
      }
    }
  }

  Rng& rng() { return rng_; }

 private:
  std::set<std::string>& used_;
  Rng& rng_;
};

std::string subst(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        auto it = vars.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

using Slots = std::map<std::string, std::vector<NodePtr>>;

void fill_slots(std::vector<NodePtr>& stmts, Slots& slots) {
  for (std::size_t i = 0; i < stmts.size();) {
    Node* s = stmts[i].get();
    if (s->kind == Kind::ExprStmt && s->child(0)->kind == Kind::Name && slots.count(s->child(0)->value)) {
      auto& v = slots[s->child(0)->value];
      std::size_t n = v.size();
      stmts.erase(stmts.begin() + static_cast<long>(i));
      stmts.insert(stmts.begin() + static_cast<long>(i), std::make_move_iterator(v.begin()),
                   std::make_move_iterator(v.end()));
      v.clear();
      i += n;
      continue;
    }
    for (Node* b : py::blocks_of(*s)) fill_slots(b->children, slots);
    ++i;
  }
}

std::vector<NodePtr> build(std::string_view tmpl, const std::map<std::string, std::string>& vars, Slots slots = {}) {
  auto pm = py::parse_module(subst(tmpl, vars));
  auto stmts = std::move(pm.module->children);
  fill_slots(stmts, slots);
  return stmts;
}

void replace_stmt(Node& block, std::size_t index, std::vector<NodePtr> with) {
  auto& ch = block.children;
  ch.erase(ch.begin() + static_cast<long>(index));
  ch.insert(ch.begin() + static_cast<long>(index), std::make_move_iterator(with.begin()),
            std::make_move_iterator(with.end()));
}

void insert_stmts(Node& block, std::size_t index, std::vector<NodePtr> stmts) {
  block.children.insert(block.children.begin() + static_cast<long>(index), std::make_move_iterator(stmts.begin()),
                        std::make_move_iterator(stmts.end()));
}

std::string expr(const Node& n) { return py::unparse_expr(n); }

bool is_docstring(const Node& s) {
  return s.kind == Kind::ExprStmt && s.child(0) && s.child(0)->kind == Kind::String;
}

// Statements that must stay at the top of a function body.
std::size_t body_prologue(const Node& block) {
  std::size_t i = 0;
  if (i < block.children.size() && is_docstring(*block.children[i])) ++i;
  while (i < block.children.size() &&
         (block.children[i]->kind == Kind::Global || block.children[i]->kind == Kind::Nonlocal))
    ++i;
  return i;
}

std::size_t module_prologue(const Node& module) {
  std::size_t i = 0;
  const auto& ch = module.children;
  if (i < ch.size() && is_docstring(*ch[i])) ++i;
  while (i < ch.size() && (ch[i]->kind == Kind::Import || ch[i]->kind == Kind::ImportFrom)) ++i;
  return i;
}

Node& func_body(const Node& f) { return *f.children.back(); }

Names params(const Node& f) {
  Names out;
  const Node* args = f.kind == Kind::Lambda ? f.child(0) : f.child(1);
  if (!args) return out;
  for (const auto& a : args->children)
    if (a->extra != "/") add_name(out, a->value);
  return out;
}

void target_names(const Node& t, Names& out) {
  switch (t.kind) {
    case Kind::Name:
      add_name(out, t.value);
      break;
    case Kind::Tuple:
    case Kind::List:
      for (const auto& c : t.children) target_names(*c, out);
      break;
    case Kind::Starred:
      target_names(*t.child(0), out);
      break;
    default:
      break;
  }
}

// Names a statement or expression binds in the scope it appears in.
void bound_names(const Node& n, Names& out, const Node* skip = nullptr, bool defs = true) {
  if (&n == skip) return;
  switch (n.kind) {
    case Kind::FunctionDef:
    case Kind::ClassDef:
      if (defs) add_name(out, n.value);
      return;
    case Kind::Lambda:
      return;
    case Kind::Import:
      if (defs)
        for (const auto& a : n.children) add_name(out, a->extra.empty() ? a->value.substr(0, a->value.find('.')) : a->extra);
      return;
    case Kind::ImportFrom:
      if (defs)
        for (const auto& a : n.children)
          if (a->value != "*") add_name(out, a->extra.empty() ? a->value : a->extra);
      return;
    case Kind::Assign:
      for (std::size_t i = 0; i + 1 < n.children.size(); ++i) target_names(*n.children[i], out);
      break;
    case Kind::AugAssign:
    case Kind::AnnAssign:
    case Kind::For:
    case Kind::NamedExpr:
      if (n.child(0)->kind == Kind::Name) add_name(out, n.child(0)->value);
      if (n.kind == Kind::For) target_names(*n.child(0), out);
      break;
    case Kind::WithItem:
      if (n.child(1)) target_names(*n.child(1), out);
      break;
    case Kind::ExceptHandler:
      add_name(out, n.value);
      break;
    case Kind::Delete:
      for (const auto& c : n.children) target_names(*c, out);
      break;
    default:
      break;
  }
  for (const auto& c : n.children)
    if (c) bound_names(*c, out, skip, defs);
}

Names declared(const Node& body, Kind kind) {
  Names out;
  py::walk(body, [&](const Node& n) {
    if (n.kind == kind)
      for (const auto& name : n.names) add_name(out, name);
    return n.kind != Kind::FunctionDef && n.kind != Kind::ClassDef && n.kind != Kind::Lambda;
  });
  return out;
}

Names locals_of(const Node& f) {
  Names out = params(f);
  bound_names(func_body(f), out);
  auto g = declared(func_body(f), Kind::Global);
  auto nl = declared(func_body(f), Kind::Nonlocal);
  Names kept;
  for (const auto& n : out)
    if (!contains(g, n) && !contains(nl, n)) kept.push_back(n);
  return kept;
}

// Every name bound anywhere, in any scope.
std::set<std::string> every_binding(const Node& root) {
  Names all;
  bound_names(root, all);
  py::walk(root, [&](const Node& n) {
    if (n.kind == Kind::FunctionDef || n.kind == Kind::Lambda)
      for (const auto& p : params(n)) add_name(all, p);
    if (n.kind == Kind::FunctionDef || n.kind == Kind::ClassDef) bound_names(func_body(n), all);
    if (n.kind == Kind::Comprehension) target_names(*n.child(0), all);
    if (n.kind == Kind::Global || n.kind == Kind::Nonlocal)
      for (const auto& name : n.names) add_name(all, name);
    return true;
  });
  return {all.begin(), all.end()};
}

// Whether `n` is bound by a def, class or import directly in this scope.
bool defined_in_scope(const Node& body, const std::string& n) {
  bool hit = false;
  py::walk(body, [&](const Node& x) {
    if (hit) return false;
    if ((x.kind == Kind::FunctionDef || x.kind == Kind::ClassDef) && &x != &body) {
      if (x.value == n) hit = true;
      return false;
    }
    if (x.kind == Kind::Lambda) return false;
    if (x.kind == Kind::Import || x.kind == Kind::ImportFrom) {
      Names b;
      bound_names(x, b);
      if (contains(b, n)) hit = true;
    }
    return true;
  });
  return hit;
}

bool is_fstring_piece(const std::string& piece) {
  for (char c : piece) {
    if (c == '\'' || c == '"') return false;
    if (c == 'f' || c == 'F') return true;
  }
  return false;
}

bool word_in(std::string_view text, std::string_view w) {
  auto ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  for (auto pos = text.find(w); pos != std::string_view::npos; pos = text.find(w, pos + 1)) {
    bool left = pos == 0 || !ident(text[pos - 1]);
    bool right = pos + w.size() >= text.size() || !ident(text[pos + w.size()]);
    if (left && right) return true;
  }
  return false;
}

bool strings_mention(const Node& root, const std::string& name, bool fstrings_only) {
  bool hit = false;
  py::walk(root, [&](const Node& n) {
    if (hit) return false;
    if (n.kind == Kind::String)
      for (const auto& piece : n.names)
        if ((!fstrings_only || is_fstring_piece(piece)) && word_in(piece, name)) hit = true;
    return true;
  });
  return hit;
}

bool has_fstring(const Node& root) {
  bool hit = false;
  py::walk(root, [&](const Node& n) {
    if (n.kind == Kind::String)
      for (const auto& piece : n.names)
        if (is_fstring_piece(piece)) hit = true;
    return !hit;
  });
  return hit;
}

bool mentions_any(const Node& root, std::initializer_list<std::string_view> names) {
  bool hit = false;
  py::walk(root, [&](const Node& n) {
    if (n.kind == Kind::Name)
      for (auto name : names)
        if (n.value == name) hit = true;
    return !hit;
  });
  return hit;
}

bool has_kind(const Node& root, std::initializer_list<Kind> kinds, bool into_lambdas = true) {
  bool hit = false;
  py::walk(root, [&](const Node& n) {
    if (hit) return false;
    if (std::find(kinds.begin(), kinds.end(), n.kind) != kinds.end()) hit = true;
    return into_lambdas || n.kind != Kind::Lambda;
  });
  return hit;
}

enum Escape { kBreak = 1, kContinue = 2, kReturn = 4 };

// Whether control can leave `body` other than by falling off its end or
// raising. Break/continue inside nested loops belong to those loops.
bool escapes(const Node& body, int mask) {
  bool found = false;
  std::function<void(const Node&, bool)> go = [&](const Node& n, bool in_loop) {
    if (found) return;
    switch (n.kind) {
      case Kind::FunctionDef:
      case Kind::ClassDef:
      case Kind::Lambda:
        return;
      case Kind::Break:
        if ((mask & kBreak) && !in_loop) found = true;
        return;
      case Kind::Continue:
        if ((mask & kContinue) && !in_loop) found = true;
        return;
      case Kind::Return:
      case Kind::Yield:
      case Kind::YieldFrom:
      case Kind::Await:
        if (mask & kReturn) found = true;
        break;
      case Kind::For:
        for (std::size_t i = 0; i < n.children.size(); ++i)
          if (n.children[i]) go(*n.children[i], i == 2 ? true : in_loop);
        return;
      case Kind::While:
        for (std::size_t i = 0; i < n.children.size(); ++i)
          if (n.children[i]) go(*n.children[i], i == 1 ? true : in_loop);
        return;
      default:
        break;
    }
    for (const auto& c : n.children)
      if (c) go(*c, in_loop);
  };
  go(body, false);
  return found;
}

bool import_ok(Ctx& ctx, const std::string& bound, const std::string& import_text) {
  if (!ctx.idents.count(bound)) return true;
  for (const auto& s : ctx.module().children)
    if ((s->kind == Kind::Import || s->kind == Kind::ImportFrom) && py::unparse_stmt(*s) == import_text + "\n")
      return true;
  return false;
}

void ensure_import(Ctx& ctx, const std::string& import_text) {
  for (const auto& s : ctx.module().children)
    if ((s->kind == Kind::Import || s->kind == Kind::ImportFrom) && py::unparse_stmt(*s) == import_text + "\n")
      return;
  insert_stmts(ctx.module(), module_prologue(ctx.module()), build(import_text + "\n", {}));
}

std::string render(Ctx& ctx) { return py::unparse_body(ctx.module()); }

Cand stmt_cand(const Ctx& ctx, std::size_t r, std::string what) {
  const auto& ref = ctx.stmts[r];
  Cand c;
  c.ref = r;
  c.node = ref.stmt;
  c.line = ref.stmt->line;
  c.label = "L" + std::to_string(c.line) + " " + what;
  c.key = py::unparse_stmt(*ref.stmt);
  return c;
}

using FindFn = std::function<std::vector<Cand>(Ctx&)>;
using ApplyFn = std::function<std::string(Ctx&, const Cand&, Fresh&)>;

struct RuleImpl {
  TransformRule rule;
  FindFn find;
  ApplyFn apply;
};

// --- code structure --------------------------------------------------------

std::vector<Cand> find_loops(Ctx& ctx, Kind kind) {
  std::vector<Cand> out;
  for (std::size_t r = 0; r < ctx.stmts.size(); ++r) {
    const auto& ref = ctx.stmts[r];
    if (ref.stmt->kind != kind || ref.class_scope) continue;
    const Node* body = kind == Kind::For ? ref.stmt->child(2) : ref.stmt->child(1);
    if (escapes(*body, kBreak)) continue;
    out.push_back(stmt_cand(ctx, r, kind == Kind::For ? "for" : "while"));
  }
  return out;
}

std::string apply_nested_for(Ctx& ctx, const Cand& c, Fresh& fresh) {
  Node* body = c.node->child(2);
  static const std::vector<std::string> stems = {"k", "rep", "step", "inner"};
  Slots slots;
  slots["__body__"] = std::move(body->children);
  body->children = build("for {v} in range(1):\n    __body__\n", {{"v", fresh(fresh.rng().pick(stems))}},
                         std::move(slots));
  return render(ctx);
}

std::string apply_nested_while(Ctx& ctx, const Cand& c, Fresh& fresh) {
  Node* body = c.node->child(1);
  Slots slots;
  slots["__body__"] = std::move(body->children);
  body->children = build("{c} = 1\nwhile {c} > 0:\n    {c} -= 1\n    __body__\n", {{"c", fresh("once")}},
                         std::move(slots));
  return render(ctx);
}

std::vector<Cand> find_ifs(Ctx& ctx) {
  std::vector<Cand> out;
  for (std::size_t r = 0; r < ctx.stmts.size(); ++r)
    if (ctx.stmts[r].stmt->kind == Kind::If && !ctx.stmts[r].class_scope) out.push_back(stmt_cand(ctx, r, "if"));
  return out;
}

std::string apply_nested_if(Ctx& ctx, const Cand& c, Fresh& fresh) {
  Node* body = c.node->child(1);
  auto& rng = fresh.rng();
  long long x = 0, y = 0;
  while ((x & y) == 0) {
    x = rng.uniform(100, 999);
    y = rng.uniform(100, 999);
  }
  Slots slots;
  slots["__body__"] = std::move(body->children);
  body->children = build("{a} = {x}\n{b} = {y}\nif {a} & {b}:\n    __body__\n",
                         {{"a", fresh("condition")}, {"b", fresh("condition")}, {"x", std::to_string(x)},
                          {"y", std::to_string(y)}},
                         std::move(slots));
  return render(ctx);
}

// The call a statement makes, for statements of the shape `t = f(...)`,
// `f(...)` or `return f(...)`.
Node* stmt_call(const Node& s) {
  Node* v = nullptr;
  if (s.kind == Kind::Assign) v = s.children.back().get();
  if (s.kind == Kind::ExprStmt || s.kind == Kind::Return) v = s.child(0);
  return v && v->kind == Kind::Call ? v : nullptr;
}

bool movable_expr(const Node& e) {
  return !has_kind(e, {Kind::Yield, Kind::YieldFrom, Kind::Await, Kind::NamedExpr}) &&
         !mentions_any(e, {"super", "locals", "vars", "globals", "eval", "exec", "dir"});
}

std::vector<Cand> find_thread_calls(Ctx& ctx) {
  std::vector<Cand> out;
  if (!import_ok(ctx, "threading", "import threading") || !import_ok(ctx, "queue", "import queue")) return out;
  for (std::size_t r = 0; r < ctx.stmts.size(); ++r) {
    const auto& ref = ctx.stmts[r];
    if (ref.class_scope || (!ref.funcs.empty() && ref.funcs.back()->flag)) continue;
    Node* call = stmt_call(*ref.stmt);
    if (!call || !movable_expr(*call)) continue;
    out.push_back(stmt_cand(ctx, r, "call " + expr(*call->child(0))));
  }
  return out;
}

std::string apply_thread_call(Ctx& ctx, const Cand& c, Fresh& fresh) {
  const auto& ref = ctx.stmts[c.ref];
  Node* call = stmt_call(*c.node);
  std::map<std::string, std::string> v = {
      {"q", fresh("result_queue")}, {"w", fresh("worker")}, {"qp", fresh("out")},   {"e", fresh("exc")},
      {"t", fresh("thread")},       {"r", fresh("result")}, {"err", fresh("error")}, {"call", expr(*call)}};
  auto stmts = build(
      "{q} = queue.Queue()\n"
      "def {w}({qp}):\n"
      "    try:\n"
      "        {qp}.put(({call}, None))\n"
      "    except BaseException as {e}:\n"
      "        {qp}.put((None, {e}))\n"
      "{t} = threading.Thread(target={w}, args=({q},))\n"
      "{t}.start()\n"
      "{t}.join()\n"
      "{r}, {err} = {q}.get()\n"
      "if {err} is not None:\n"
      "    raise {err}\n",
      v);
  if (c.node->kind != Kind::ExprStmt) {
    NodePtr stmt = std::move(ref.block->children[ref.index]);
    if (stmt->kind == Kind::Assign)
      stmt->children.back() = py::make_name(v["r"]);
    else
      stmt->children[0] = py::make_name(v["r"]);
    stmts.push_back(std::move(stmt));
  }
  replace_stmt(*ref.block, ref.index, std::move(stmts));
  ensure_import(ctx, "import queue");
  ensure_import(ctx, "import threading");
  return render(ctx);
}

std::vector<Cand> find_functions(Ctx& ctx) {
  std::vector<Cand> out;
  for (std::size_t r = 0; r < ctx.stmts.size(); ++r)
    if (ctx.stmts[r].stmt->kind == Kind::FunctionDef)
      out.push_back(stmt_cand(ctx, r, "def " + ctx.stmts[r].stmt->value));
  return out;
}

std::string apply_try_except(Ctx& ctx, const Cand& c, Fresh&) {
  Node& body = func_body(*c.node);
  std::size_t keep = body_prologue(body);
  Slots slots;
  for (std::size_t i = keep; i < body.children.size(); ++i) slots["__body__"].push_back(std::move(body.children[i]));
  body.children.resize(keep);
  for (auto& s : build("try:\n    __body__\nexcept Exception:\n    raise\n", {}, std::move(slots)))
    body.children.push_back(std::move(s));
  return render(ctx);
}

std::vector<Cand> find_try_sites(Ctx& ctx) {
  std::vector<Cand> out;
  for (auto& c : find_functions(ctx)) {
    const Node& body = func_body(*c.node);
    if (body_prologue(body) < body.children.size()) out.push_back(std::move(c));
  }
  return out;
}

std::vector<Cand> find_numpy_calls(Ctx& ctx) {
  std::vector<Cand> out;
  if (!import_ok(ctx, "np", "import numpy as np")) return out;
  auto bound = every_binding(ctx.module());
  py::walk(ctx.module(), [&](const Node& n) {
    if (n.kind != Kind::Call || n.child(0)->kind != Kind::Name) return true;
    const std::string& fn = n.child(0)->value;
    if (fn != "abs" && fn != "max" && fn != "min" && fn != "sum") return true;
    if (bound.count(fn)) return true;
    const auto& args = n.child(1)->children;
    for (const auto& a : args)
      if (a->kind == Kind::Starred || a->kind == Kind::Keyword || a->kind == Kind::DoubleStarred) return true;
    std::size_t max_args = fn == "max" || fn == "min" ? 2 : 1;
    if (args.empty() || args.size() > max_args) return true;
    Cand c;
    c.node = const_cast<Node*>(&n);
    c.line = n.line;
    c.label = "L" + std::to_string(n.line) + " " + fn + "()";
    c.key = expr(n);
    out.push_back(std::move(c));
    return true;
  });
  return out;
}

std::string apply_numpy_call(Ctx& ctx, const Cand& c, Fresh&) {
  const std::string fn = c.node->child(0)->value;
  const auto& args = c.node->child(1)->children;
  std::string text = args.size() == 1 ? "np." + fn + "(" + expr(*args[0]) + ").item()"
                                      : "np." + fn + "([" + expr(*args[0]) + ", " + expr(*args[1]) + "]).item()";
  *c.node = std::move(*py::parse_expression(text));
  ensure_import(ctx, "import numpy as np");
  return render(ctx);
}

bool simple_subscript_index(const Node& n) {
  return n.kind == Kind::Name || n.kind == Kind::Number || n.kind == Kind::String || n.kind == Kind::Constant;
}

std::vector<Cand> find_augassign(Ctx& ctx) {
  std::vector<Cand> out;
  for (std::size_t r = 0; r < ctx.stmts.size(); ++r) {
    const Node& s = *ctx.stmts[r].stmt;
    if (s.kind != Kind::AugAssign) continue;
    const Node& t = *s.child(0);
    bool ok = t.kind == Kind::Name || (t.kind == Kind::Attribute && t.child(0)->kind == Kind::Name) ||
              (t.kind == Kind::Subscript && t.child(0)->kind == Kind::Name && simple_subscript_index(*t.child(1)));
    if (ok) out.push_back(stmt_cand(ctx, r, expr(t) + " " + s.value));
  }
  return out;
}

std::string apply_augassign(Ctx& ctx, const Cand& c, Fresh&) {
  const auto& ref = ctx.stmts[c.ref];
  std::string op = c.node->value.substr(0, c.node->value.size() - 1);
  std::string target = expr(*c.node->child(0));
  replace_stmt(*ref.block, ref.index,
               build(target + " = " + target + " " + op + " (" + expr(*c.node->child(1)) + ")\n", {}));
  return render(ctx);
}

bool names_only_target(const Node& t) {
  if (t.kind == Kind::Name) return true;
  if (t.kind == Kind::Tuple || t.kind == Kind::List) {
    for (const auto& c : t.children)
      if (!names_only_target(*c)) return false;
    return !t.children.empty();
  }
  return false;
}

std::vector<Cand> find_recursion_loops(Ctx& ctx) {
  std::vector<Cand> out;
  for (std::size_t r = 0; r < ctx.stmts.size(); ++r) {
    const auto& ref = ctx.stmts[r];
    const Node& s = *ref.stmt;
    if (s.kind != Kind::For || s.flag || ref.class_scope || !names_only_target(*s.child(0))) continue;
    const Node& body = *s.child(2);
    if (escapes(body, kBreak | kContinue | kReturn)) continue;
    if (has_kind(body, {Kind::Global, Kind::Nonlocal}, false) || !movable_expr(body) || !movable_expr(*s.child(1)))
      continue;
    out.push_back(stmt_cand(ctx, r, "for " + expr(*s.child(0))));
  }
  return out;
}

// Replaces a for loop with a recursive helper that halves the index range
// of the materialized iterable, so recursion depth stays logarithmic in
// the iteration count.
std::string apply_loop_to_recursion(Ctx& ctx, const Cand& c, Fresh& fresh) {
  const auto& ref = ctx.stmts[c.ref];
  Node& loop = *c.node;
  Names bound;
  target_names(*loop.child(0), bound);
  bound_names(*loop.child(2), bound);

  Names as_global, as_nonlocal, prebind;
  if (ref.funcs.empty()) {
    as_global = bound;
  } else {
    const Node& g = *ref.funcs.back();
    auto globals = declared(func_body(g), Kind::Global);
    auto nonlocals = declared(func_body(g), Kind::Nonlocal);
    Names elsewhere = params(g);
    bound_names(func_body(g), elsewhere, &loop);
    for (const auto& n : bound) {
      if (contains(globals, n)) {
        as_global.push_back(n);
      } else {
        as_nonlocal.push_back(n);
        if (!contains(elsewhere, n) && !contains(nonlocals, n)) prebind.push_back(n);
      }
    }
  }
  auto join = [](const Names& ns, std::string_view sep) {
    std::string s;
    for (std::size_t i = 0; i < ns.size(); ++i) s += (i ? std::string(sep) : "") + ns[i];
    return s;
  };
  std::map<std::string, std::string> v = {{"seq", fresh("items")}, {"rec", fresh("loop")}, {"lo", fresh("lo")},
                                          {"hi", fresh("hi")},     {"mid", fresh("mid")},
                                          {"target", expr(*loop.child(0))}, {"iter", expr(*loop.child(1))}};
  std::string text;
  if (!prebind.empty()) text += "if False:\n    " + join(prebind, " = ") + " = None\n";
  text += "{seq} = list({iter})\n\ndef {rec}({lo}, {hi}):\n";
  if (!as_global.empty()) text += "    global " + join(as_global, ", ") + "\n";
  if (!as_nonlocal.empty()) text += "    nonlocal " + join(as_nonlocal, ", ") + "\n";
  text +=
      "    if {hi} - {lo} <= 0:\n"
      "        return\n"
      "    if {hi} - {lo} == 1:\n"
      "        {target} = {seq}[{lo}]\n"
      "        __body__\n"
      "        return\n"
      "    {mid} = ({lo} + {hi}) // 2\n"
      "    {rec}({lo}, {mid})\n"
      "    {rec}({mid}, {hi})\n"
      "{rec}(0, len({seq}))\n";
  Slots slots;
  slots["__body__"] = std::move(loop.child(2)->children);
  if (loop.child(3)) {
    text += "__orelse__\n";
    slots["__orelse__"] = std::move(loop.child(3)->children);
  }
  replace_stmt(*ref.block, ref.index, build(text, v, std::move(slots)));
  return render(ctx);
}

// --- API calls -------------------------------------------------------------

struct ApiSpec {
  std::string bound;        // name the import binds
  std::string import_text;  // how the module would be imported at top level
  std::string body;         // statements run under the guard, after the import
};

std::vector<Cand> find_api_sites(Ctx& ctx, const ApiSpec& api) {
  std::vector<Cand> out;
  if (!import_ok(ctx, api.bound, api.import_text)) return out;
  bool script = false;
  for (const auto& s : ctx.module().children)
    if (s->kind != Kind::FunctionDef && s->kind != Kind::ClassDef && s->kind != Kind::Import &&
        s->kind != Kind::ImportFrom && !is_docstring(*s))
      script = true;
  if (script) {
    Cand c;
    c.label = "module";
    c.key = "module";
    out.push_back(std::move(c));
  }
  for (auto& c : find_functions(ctx)) out.push_back(std::move(c));
  return out;
}

std::string apply_api(Ctx& ctx, const Cand& c, Fresh& fresh, const ApiSpec& api) {
  auto& rng = fresh.rng();
  static const char* kHex = "0123456789abcdef";
  std::string payload = "b'";
  for (int i = 0; i < 8; ++i) payload += kHex[rng.below(16)];
  payload += "'";
  auto two = [&](long long lo, long long hi) {
    auto s = std::to_string(rng.uniform(lo, hi));
    return s.size() < 2 ? "0" + s : s;
  };
  std::map<std::string, std::string> v = {
      {"a", fresh("encoded")},  {"b", fresh("decoded")}, {"key", fresh("key")},     {"cipher", fresh("cipher")},
      {"tok", fresh("token")},  {"d", fresh("date")},    {"conn", fresh("conn")},   {"resp", fresh("response")},
      {"s", fresh("stat")},     {"t", fresh("started")}, {"payload", payload},      {"m", two(1, 12)},
      {"day", two(1, 28)},      {"month", std::to_string(rng.uniform(1, 12))},
      {"mday", std::to_string(rng.uniform(1, 28))},      {"n", std::to_string(rng.uniform(1, 365))},
      {"x1", std::to_string(rng.uniform(1, 99))},  {"x2", std::to_string(rng.uniform(1, 99))},
      {"x3", std::to_string(rng.uniform(1, 99))},  {"y1", std::to_string(rng.uniform(1, 99))},
      {"y2", std::to_string(rng.uniform(1, 99))},  {"y3", std::to_string(rng.uniform(1, 99))},
      {"seed", std::to_string(rng.uniform(0, 99))}};
  std::string text = "try:\n    " + api.import_text + "\n" + api.body + "except Exception:\n    pass\n";
  auto stmts = build(text, v);
  if (!c.node) {
    insert_stmts(ctx.module(), module_prologue(ctx.module()), std::move(stmts));
  } else {
    Node& body = func_body(*c.node);
    insert_stmts(body, body_prologue(body), std::move(stmts));
  }
  return render(ctx);
}

const std::vector<ApiSpec>& api_specs() {
  static const std::vector<ApiSpec> specs = {
      {"base64", "import base64",
       "    {a} = base64.b64encode({payload})\n"
       "    {b} = base64.b64decode({a})\n"},
      {"Fernet", "from cryptography.fernet import Fernet",
       "    {key} = Fernet.generate_key()\n"
       "    {cipher} = Fernet({key})\n"
       "    {tok} = {cipher}.encrypt({payload})\n"
       "    {cipher}.decrypt({tok})\n"},
      {"datetime", "import datetime",
       "    {d} = datetime.datetime(2024, {month}, {mday}) + datetime.timedelta(days={n})\n"},
      {"dateutil", "import dateutil.parser",
       "    {d} = dateutil.parser.parse('2024-{m}-{day}')\n"},
      {"http", "import http.client",
       "    {conn} = http.client.HTTPConnection('example.com', 80, timeout=1)\n"
       "    {conn}.request('GET', '/')\n"
       "    {resp} = {conn}.getresponse()\n"
       "    {conn}.close()\n"},
      {"scipy", "import scipy.stats",
       "    {s} = scipy.stats.ttest_ind([{x1}, {x2}, {x3}], [{y1}, {y2}, {y3}])\n"},
      {"sklearn", "import sklearn.utils",
       "    {s} = sklearn.utils.shuffle([{x1}, {x2}, {x3}], random_state={seed})\n"},
      {"time", "import time",
       "    {t} = time.perf_counter()\n"
       "    time.sleep(0)\n"},
  };
  return specs;
}

// --- procedural dependencies ----------------------------------------------

Names loaded_names(const Node& e) {
  Names out;
  py::walk(e, [&](const Node& n) {
    if (n.kind == Kind::Name) add_name(out, n.value);
    return true;
  });
  return out;
}

Names inner_bound(const Node& e) {
  Names out;
  py::walk(e, [&](const Node& n) {
    if (n.kind == Kind::Lambda)
      for (const auto& p : params(n)) add_name(out, p);
    if (n.kind == Kind::Comprehension) target_names(*n.child(0), out);
    return true;
  });
  return out;
}

bool trivial_value(const Node& e) {
  return e.kind == Kind::Name || e.kind == Kind::Number || e.kind == Kind::String || e.kind == Kind::Constant;
}

bool private_attribute(const Node& e) {
  bool hit = false;
  py::walk(e, [&](const Node& n) {
    if (n.kind == Kind::Attribute && n.value.rfind("__", 0) == 0 &&
        !(n.value.size() > 4 && n.value.compare(n.value.size() - 2, 2, "__") == 0))
      hit = true;
    return !hit;
  });
  return hit;
}

// Value expression of a statement that can be moved into a function.
Node* extractable(const Node& s) {
  Node* v = nullptr;
  if (s.kind == Kind::Assign) v = s.children.back().get();
  if (s.kind == Kind::Return) v = s.child(0);
  if (s.kind == Kind::ExprStmt && s.child(0)->kind == Kind::Call) v = s.child(0);
  if (!v || trivial_value(*v) || !movable_expr(*v) || has_fstring(*v) || private_attribute(*v)) return nullptr;
  return v;
}

Names extract_params(const StmtRef& ref, const Node& value) {
  Names scope;
  for (const Node* f : ref.funcs)
    for (const auto& n : locals_of(*f)) add_name(scope, n);
  if (!ref.funcs.empty()) {
    auto g = declared(func_body(*ref.funcs.back()), Kind::Global);
    Names kept;
    for (const auto& n : scope)
      if (!contains(g, n)) kept.push_back(n);
    scope = kept;
  }
  Names out;
  for (const auto& n : loaded_names(value))
    if (contains(scope, n)) out.push_back(n);
  return out;
}

std::vector<Cand> find_extract(Ctx& ctx) {
  std::vector<Cand> out;
  for (std::size_t r = 0; r < ctx.stmts.size(); ++r) {
    const auto& ref = ctx.stmts[r];
    if (ref.class_scope) continue;
    Node* v = extractable(*ref.stmt);
    if (!v) continue;
    auto ps = extract_params(ref, *v);
    auto inner = inner_bound(*v);
    if (std::any_of(ps.begin(), ps.end(), [&](const std::string& p) { return contains(inner, p); })) continue;
    out.push_back(stmt_cand(ctx, r, std::string(py::kind_name(ref.stmt->kind))));
  }
  return out;
}

std::string apply_extract(Ctx& ctx, const Cand& c, Fresh& fresh) {
  const auto& ref = ctx.stmts[c.ref];
  Node* v = extractable(*c.node);
  auto ps = extract_params(ref, *v);
  std::string args;
  for (std::size_t i = 0; i < ps.size(); ++i) args += (i ? ", " : "") + ps[i];
  static const std::vector<std::string> stems = {"compute", "calc", "evaluate", "helper", "get_value"};
  std::string helper = fresh(fresh.rng().pick(stems));
  auto def = build("def {h}({args}):\n    return {value}\n", {{"h", helper}, {"args", args}, {"value", expr(*v)}});
  auto call = py::parse_expression(helper + "(" + args + ")");
  if (c.node->kind == Kind::Assign)
    c.node->children.back() = std::move(call);
  else
    c.node->children[0] = std::move(call);
  insert_stmts(ctx.module(), ref.top, std::move(def));
  return render(ctx);
}

std::string apply_decorator(Ctx& ctx, const Cand& c, Fresh& fresh) {
  std::map<std::string, std::string> v = {{"dec", fresh("my_decorator")}, {"w", fresh("dec_result")},
                                          {"res", fresh("res")}};
  c.node->child(0)->children.push_back(py::make_name(v["dec"]));
  auto def = build(
      "def {dec}(func):\n"
      "\n"
      "    def {w}(*args, **kwargs):\n"
      "        {res} = func(*args, **kwargs)\n"
      "        return {res}\n"
      "    return {w}\n",
      v);
  insert_stmts(ctx.module(), module_prologue(ctx.module()), std::move(def));
  return render(ctx);
}

// --- renaming ---------------------------------------------------------------

bool renamable(const Ctx& ctx, const std::string& n) {
  return !ctx.tc.reserved.count(n) && n != "self" && n != "cls" && n.rfind("__", 0) != 0;
}

// Whether a scope nested anywhere inside `body` binds `n` for itself.
bool nested_binds(const Node& body, const std::string& n) {
  bool hit = false;
  py::walk(body, [&](const Node& x) {
    if (hit) return false;
    switch (x.kind) {
      case Kind::FunctionDef:
        if (contains(locals_of(x), n) || contains(declared(func_body(x), Kind::Global), n)) hit = true;
        break;
      case Kind::Lambda:
        if (contains(params(x), n)) hit = true;
        break;
      case Kind::Comprehension: {
        Names t;
        target_names(*x.child(0), t);
        if (contains(t, n)) hit = true;
        break;
      }
      case Kind::ClassDef: {
        Names b;
        bound_names(func_body(x), b);
        if (contains(b, n)) hit = true;
        break;
      }
      default:
        break;
    }
    return true;
  });
  return hit;
}

bool keyword_named(const Node& root, const std::string& n) {
  bool hit = false;
  py::walk(root, [&](const Node& x) {
    if (x.kind == Kind::Keyword && x.value == n) hit = true;
    return !hit;
  });
  return hit;
}

std::vector<Cand> find_variable_renames(Ctx& ctx) {
  std::vector<Cand> out;
  for (std::size_t r = 0; r < ctx.stmts.size(); ++r) {
    const Node& f = *ctx.stmts[r].stmt;
    if (f.kind != Kind::FunctionDef) continue;
    const Node& body = func_body(f);
    auto ps = params(f);
    for (const auto& n : locals_of(f)) {
      if (!renamable(ctx, n)) continue;
      if (defined_in_scope(body, n) || nested_binds(body, n) || strings_mention(body, n, true)) continue;
      if (contains(ps, n) && keyword_named(ctx.module(), n)) continue;
      Cand c;
      c.ref = r;
      c.scope = const_cast<Node*>(&f);
      c.name = n;
      c.line = f.line;
      c.label = "L" + std::to_string(f.line) + " " + f.value + ":" + n;
      c.key = c.label;
      out.push_back(std::move(c));
    }
  }
  // Module-level variables no function shadows or declares global.
  Names module_vars;
  for (const auto& s : ctx.module().children) bound_names(*s, module_vars, nullptr, false);
  std::set<std::string> shadowed;
  py::walk(ctx.module(), [&](const Node& x) {
    if (x.kind == Kind::Global || x.kind == Kind::Nonlocal) shadowed.insert(x.names.begin(), x.names.end());
    return true;
  });
  for (const auto& n : module_vars) {
    if (!renamable(ctx, n) || shadowed.count(n) || strings_mention(ctx.module(), n, true)) continue;
    bool inner = defined_in_scope(ctx.module(), n);
    for (const auto& s : ctx.module().children)
      if (!inner && nested_binds(*s, n)) inner = true;
    if (inner) continue;
    Cand c;
    c.name = n;
    c.label = "module:" + n;
    c.key = c.label;
    out.push_back(std::move(c));
  }
  return out;
}

std::size_t name_token_from(const Ctx& ctx, int first, const std::string& n) {
  for (std::size_t i = static_cast<std::size_t>(first); i < ctx.pm.tokens.size(); ++i) {
    const auto& t = ctx.pm.tokens[i];
    if (t.kind == py::TokenKind::Name && t.text == n) return i;
  }
  throw Error("no token for name " + n);
}

void collect_name_tokens(const Ctx& ctx, const Node& root, const std::string& n, std::set<std::size_t>& out) {
  py::walk(root, [&](const Node& x) {
    if (x.kind == Kind::Name && x.value == n) out.insert(name_token_from(ctx, x.first_token, n));
    if ((x.kind == Kind::Nonlocal || x.kind == Kind::Global) && contains(x.names, n)) {
      for (std::size_t i = static_cast<std::size_t>(x.first_token);
           i < ctx.pm.tokens.size() && ctx.pm.tokens[i].kind != py::TokenKind::Newline; ++i)
        if (ctx.pm.tokens[i].is_name(n)) out.insert(i);
    }
    return true;
  });
}

std::string splice_tokens(const Ctx& ctx, const std::set<std::size_t>& tokens, const std::string& to) {
  std::string out = ctx.pm.source;
  for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
    const auto& t = ctx.pm.tokens[*it];
    out.replace(t.begin, t.end - t.begin, to);
  }
  return out;
}

std::string apply_variable_rename(Ctx& ctx, const Cand& c, Fresh& fresh) {
  static const std::vector<std::string> stems = {"value", "item",  "temp",   "data",   "elem", "acc",
                                                 "entry", "token", "record", "number", "var"};
  std::string to = fresh(fresh.rng().pick(stems));
  std::set<std::size_t> tokens;
  if (c.scope) {
    collect_name_tokens(ctx, func_body(*c.scope), c.name, tokens);
    for (const auto& a : c.scope->child(1)->children)
      if (a->value == c.name) tokens.insert(name_token_from(ctx, a->first_token, c.name));
  } else {
    collect_name_tokens(ctx, ctx.module(), c.name, tokens);
  }
  return splice_tokens(ctx, tokens, to);
}

std::vector<Cand> find_function_renames(Ctx& ctx) {
  std::vector<Cand> out;
  auto& mod = ctx.module();
  for (std::size_t i = 0; i < mod.children.size(); ++i) {
    const Node& f = *mod.children[i];
    if (f.kind != Kind::FunctionDef || !renamable(ctx, f.value)) continue;
    const std::string& n = f.value;
    int defs = 0;
    for (const auto& s : mod.children)
      if ((s->kind == Kind::FunctionDef || s->kind == Kind::ClassDef) && s->value == n) ++defs;
    Names module_vars;
    for (const auto& s : mod.children) bound_names(*s, module_vars, nullptr, false);
    bool shadowed = defs != 1 || contains(module_vars, n) || strings_mention(mod, n, false);
    for (const auto& s : mod.children)
      if (!shadowed && nested_binds(*s, n)) shadowed = true;
    py::walk(mod, [&](const Node& x) {
      if ((x.kind == Kind::Global || x.kind == Kind::Nonlocal) && contains(x.names, n)) shadowed = true;
      if (x.kind == Kind::Import || x.kind == Kind::ImportFrom) {
        Names b;
        bound_names(x, b);
        if (contains(b, n)) shadowed = true;
      }
      return !shadowed;
    });
    if (shadowed) continue;
    Cand c;
    c.node = const_cast<Node*>(&f);
    c.name = n;
    c.line = f.line;
    c.label = "L" + std::to_string(f.line) + " def " + n;
    c.key = c.label;
    out.push_back(std::move(c));
  }
  return out;
}

std::string apply_function_rename(Ctx& ctx, const Cand& c, Fresh& fresh) {
  static const std::vector<std::string> stems = {"process", "handle", "compute", "run", "apply", "do"};
  std::string to = fresh(fresh.rng().pick(stems) + "_" + c.name.substr(0, std::min<std::size_t>(c.name.size(), 12)));
  std::set<std::size_t> tokens;
  collect_name_tokens(ctx, ctx.module(), c.name, tokens);
  for (std::size_t i = static_cast<std::size_t>(c.node->first_token); i + 1 < ctx.pm.tokens.size(); ++i) {
    if (ctx.pm.tokens[i].is_name("def")) {
      tokens.insert(i + 1);
      break;
    }
  }
  return splice_tokens(ctx, tokens, to);
}

const std::vector<RuleImpl>& registry() {
  static const std::vector<RuleImpl> rules = [] {
    std::vector<RuleImpl> r;
    auto cs = RuleGroup::code_structure;
    r.push_back({{"nested_for", cs, "Add another nested for to existing for loop"},
                 [](Ctx& c) { return find_loops(c, Kind::For); }, apply_nested_for});
    r.push_back({{"nested_if", cs, "Add another nested if to existing if statement"}, find_ifs, apply_nested_if});
    r.push_back({{"nested_while", cs, "Add another nested while to existing while loop"},
                 [](Ctx& c) { return find_loops(c, Kind::While); }, apply_nested_while});
    r.push_back({{"thread_call", cs, "Introduce a thread to existing function call"}, find_thread_calls,
                 apply_thread_call});
    r.push_back({{"try_except", cs, "Add a try-except handler inside existing functions"}, find_try_sites,
                 apply_try_except});
    r.push_back({{"numpy_builtin", cs, "Replace applicable built-in calculations with Numpy"}, find_numpy_calls,
                 apply_numpy_call});
    r.push_back({{"expand_augassign", cs, "Transform augment assignment"}, find_augassign, apply_augassign});
    r.push_back({{"loop_to_recursion", cs, "Transform existing for loop into recursive functions"},
                 find_recursion_loops, apply_loop_to_recursion});

    const auto& specs = api_specs();
    const std::vector<std::pair<std::string, std::string>> api_rows = {
        {"api_base64", "Introduce API calls from base64 library"},
        {"api_cryptography", "Introduce API calls from cryptography library"},
        {"api_datetime", "Introduce API calls from datetime library"},
        {"api_dateutil", "Introduce API calls from dateutil library"},
        {"api_http", "Introduce http connections"},
        {"api_scipy", "Introduce API calls from scipy library"},
        {"api_sklearn", "Introduce API calls from sklearn library"},
        {"api_time", "Introduce API calls from time library"}};
    for (std::size_t i = 0; i < api_rows.size(); ++i) {
      const ApiSpec* spec = &specs[i];
      r.push_back({{api_rows[i].first, RuleGroup::api_calls, api_rows[i].second},
                   [spec](Ctx& c) { return find_api_sites(c, *spec); },
                   [spec](Ctx& c, const Cand& cand, Fresh& f) { return apply_api(c, cand, f, *spec); }});
    }

    auto pd = RuleGroup::procedural_deps;
    r.push_back({{"extract_function", pd, "Transform existing statements into new functions"}, find_extract,
                 apply_extract});
    r.push_back({{"add_decorator", pd, "Introduce a decorator"}, find_functions, apply_decorator});
    r.push_back({{"rename_variable", RuleGroup::renaming, "Rename existing variables"}, find_variable_renames,
                 apply_variable_rename});
    r.push_back({{"rename_function", RuleGroup::renaming, "Rename existing functions"}, find_function_renames,
                 apply_function_rename});
    return r;
  }();
  return rules;
}

const RuleImpl& impl_for(const TransformRule& rule) {
  for (const auto& r : registry())
    if (r.rule.id == rule.id) return r;
  throw Error("unknown transformation rule: " + rule.id);
}

std::vector<Site> sites_of(const std::vector<Cand>& cands) {
  std::vector<Site> out;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(stable_hash(cands[i].key)));
    out.push_back({i, cands[i].line, cands[i].label, cands[i].label + "#" + hex});
  }
  return out;
}

}  // namespace

const std::vector<TransformRule>& list_rules() {
  static const std::vector<TransformRule> rules = [] {
    std::vector<TransformRule> out;
    for (const auto& r : registry()) out.push_back(r.rule);
    return out;
  }();
  return rules;
}

const TransformRule& find_rule(std::string_view id) {
  for (const auto& r : list_rules())
    if (r.id == id) return r;
  throw Error("unknown transformation rule: " + std::string(id));
}

TransformContext context_for(const Program& program) {
  TransformContext ctx;
  if (program.entry_point) {
    const auto& ep = *program.entry_point;
    auto dot = ep.find('.');
    ctx.reserved.insert(ep.substr(0, dot));
    if (dot != std::string::npos) ctx.reserved.insert(ep.substr(dot + 1));
  }
  for (const auto& t : program.tests) {
    if (t.kind != TestKind::assertion_code) continue;
    try {
      for (const auto& tok : py::tokenize(t.input_repr))
        if (tok.kind == py::TokenKind::Name) ctx.reserved.insert(tok.text);
    } catch (const py::ParseError&) {
    }
  }
  return ctx;
}

std::vector<Site> find_sites(const TransformRule& rule, std::string_view source, const TransformContext& ctx) {
  Ctx c(source, ctx);
  return sites_of(impl_for(rule).find(c));
}

std::string apply_rule(const TransformRule& rule, std::string_view source, const Site& site, Rng& rng,
                       const TransformContext& ctx) {
  const auto& impl = impl_for(rule);
  Ctx c(source, ctx);
  auto cands = impl.find(c);
  auto sites = sites_of(cands);
  if (site.index >= sites.size() || sites[site.index].fingerprint != site.fingerprint)
    throw SiteStale(rule.id + ": site '" + site.label + "' no longer matches the source");
  Fresh fresh(c.idents, rng);
  std::string out = impl.apply(c, cands[site.index], fresh);
  if (!py::parses(out)) throw Error(rule.id + " produced source that does not parse");
  return out;
}

ComplexifyResult complexify(const Program& program, const ComplexifyConfig& config, Sandbox& sandbox) {
  if (config.min_rules < 1 || config.max_rules < config.min_rules)
    throw ConstraintViolation("rule range must satisfy 1 <= min_rules <= max_rules");
  Rng rng(derive_seed(config.seed, program.id));
  auto ctx = context_for(program);

  ComplexifyResult res;
  auto& rec = res.record;
  rec.program_id = program.id;
  rec.seed = config.seed;
  rec.loc_before = count_loc(program.source);
  std::string current = program.source;

  if (!sandbox.run_tests(current, program).all_pass)
    throw ExhaustedRules(program.id + ": the ground-truth suite fails on the original source");

  const int k = static_cast<int>(rng.uniform(config.min_rules, config.max_rules));
  std::set<std::pair<std::string, std::string>> rejected;
  int attempts = 0;
  auto want_more = [&] {
    return static_cast<int>(rec.rules_applied.size()) < k || count_loc(current) <= rec.loc_before;
  };
  while (want_more() && attempts < config.max_attempts) {
    std::vector<std::pair<const TransformRule*, std::vector<Site>>> options;
    for (const auto& rule : list_rules()) {
      std::vector<Site> open;
      for (auto& s : find_sites(rule, current, ctx))
        if (!rejected.count({rule.id, s.fingerprint})) open.push_back(std::move(s));
      if (!open.empty()) options.emplace_back(&rule, std::move(open));
    }
    if (options.empty()) break;
    const auto& [rule, sites] = options[rng.below(options.size())];
    const Site site = sites[rng.below(sites.size())];
    ++attempts;
    std::string next;
    try {
      next = apply_rule(*rule, current, site, rng, ctx);
    } catch (const std::exception& e) {
      spdlog::debug("{}: {} at {} failed: {}", program.id, rule->id, site.label, e.what());
      rejected.insert({rule->id, site.fingerprint});
      continue;
    }
    if (!sandbox.run_tests(next, program).all_pass) {
      spdlog::debug("{}: {} at {} rolled back", program.id, rule->id, site.label);
      rejected.insert({rule->id, site.fingerprint});
      continue;
    }
    current = std::move(next);
    rec.rules_applied.push_back({rule->id, site.label});
  }

  rec.loc_after = count_loc(current);
  if (static_cast<int>(rec.rules_applied.size()) < config.min_rules)
    throw ExhaustedRules(program.id + ": only " + std::to_string(rec.rules_applied.size()) +
                         " transformation(s) applied, " + std::to_string(config.min_rules) + " required");
  if (rec.loc_after <= rec.loc_before)
    throw ExhaustedRules(program.id + ": transformations did not lengthen the program");
  rec.verified = true;
  res.c_plus = std::move(current);
  return res;
}

std::string transform_to_json(const ComplexifyResult& result) {
  nlohmann::ordered_json j;
  const auto& r = result.record;
  j["program_id"] = r.program_id;
  j["seed"] = r.seed;
  j["rules_applied"] = nlohmann::ordered_json::array();
  for (const auto& a : r.rules_applied) j["rules_applied"].push_back({{"rule", a.rule_id}, {"site", a.site}});
  j["loc_before"] = r.loc_before;
  j["loc_after"] = r.loc_after;
  j["verified"] = r.verified;
  j["c_plus"] = result.c_plus;
  return j.dump();
}

ComplexifyResult transform_from_json(std::string_view line) {
  ComplexifyResult res;
  try {
    auto j = nlohmann::json::parse(line);
    auto& r = res.record;
    r.program_id = j.at("program_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& a : j.at("rules_applied"))
      r.rules_applied.push_back({a.at("rule").get<std::string>(), a.at("site").get<std::string>()});
    r.loc_before = j.at("loc_before").get<int>();
    r.loc_after = j.at("loc_after").get<int>();
    r.verified = j.at("verified").get<bool>();
    res.c_plus = j.at("c_plus").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedRecord(1, e.what());
  }
  return res;
}

}  // namespace reasonbench
