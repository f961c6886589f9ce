#include "reasonbench/py/parser.hpp"

#include <utility>

namespace reasonbench::py {

namespace {

bool is_augassign(std::string_view op) {
  return op == "+=" || op == "-=" || op == "*=" || op == "/=" || op == "//=" || op == "%=" ||
         op == "**=" || op == "@=" || op == "&=" || op == "|=" || op == "^=" || op == ">>=" ||
         op == "<<=";
}

class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : tokens_(tokens) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      auto k = tokens[i].kind;
      if (k != TokenKind::Comment && k != TokenKind::NL) sig_.push_back(static_cast<int>(i));
    }
  }

  NodePtr module() {
    auto mod = make(Kind::Module);
    while (!at(TokenKind::EndMarker)) {
      if (at(TokenKind::Newline)) {
        advance();
        continue;
      }
      statement_into(mod->children);
    }
    return mod;
  }

  NodePtr single_expression() {
    while (at(TokenKind::Newline) || at(TokenKind::Indent)) advance();
    auto e = testlist_star_expr();
    while (at(TokenKind::Newline) || at(TokenKind::Dedent)) advance();
    if (!at(TokenKind::EndMarker)) fail("unexpected trailing input");
    return e;
  }

 private:
  // ---- token helpers -----------------------------------------------------
  const Token& tok(std::size_t ahead = 0) const {
    std::size_t i = std::min(pos_ + ahead, sig_.size() - 1);
    return tokens_[sig_[i]];
  }
  int tok_index() const { return sig_[std::min(pos_, sig_.size() - 1)]; }
  int prev_index() const { return pos_ == 0 ? sig_[0] : sig_[pos_ - 1]; }
  bool at(TokenKind k) const { return tok().kind == k; }
  bool at_op(std::string_view op, std::size_t ahead = 0) const { return tok(ahead).is_op(op); }
  bool at_kw(std::string_view kw, std::size_t ahead = 0) const { return tok(ahead).is_name(kw); }
  void advance() {
    if (pos_ < sig_.size() - 1) ++pos_;
  }
  bool accept_op(std::string_view op) {
    if (at_op(op)) {
      advance();
      return true;
    }
    return false;
  }
  bool accept_kw(std::string_view kw) {
    if (at_kw(kw)) {
      advance();
      return true;
    }
    return false;
  }
  void expect_op(std::string_view op) {
    if (!accept_op(op)) fail("expected '" + std::string(op) + "'");
  }
  void expect_kw(std::string_view kw) {
    if (!accept_kw(kw)) fail("expected '" + std::string(kw) + "'");
  }
  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = tok();
    std::string near = t.kind == TokenKind::Newline ? "newline"
                       : t.kind == TokenKind::EndMarker ? "end of input"
                       : t.kind == TokenKind::Indent ? "indent"
                       : t.kind == TokenKind::Dedent ? "dedent"
                                                     : "'" + t.text + "'";
    throw ParseError(t.line, t.col, msg + " near " + near);
  }
  std::string expect_name() {
    const Token& t = tok();
    if (t.kind != TokenKind::Name || is_keyword(t.text)) fail("expected identifier");
    std::string s = t.text;
    advance();
    return s;
  }
  bool at_plain_name() const { return at(TokenKind::Name) && !is_keyword(tok().text); }

  NodePtr start(Kind k, std::string value = {}) {
    auto n = make(k, std::move(value));
    const Token& t = tok();
    n->line = t.line;
    n->col = t.col;
    n->first_token = tok_index();
    return n;
  }
  NodePtr start_at(Kind k, const Node& from) {
    auto n = make(k);
    n->line = from.line;
    n->col = from.col;
    n->first_token = from.first_token;
    return n;
  }
  Node* finish(Node* n) {
    const Token& t = tokens_[prev_index()];
    n->end_line = t.end_line;
    n->end_col = t.end_col;
    n->last_token = prev_index();
    return n;
  }
  NodePtr finish(NodePtr n) {
    finish(n.get());
    return n;
  }

  // ---- statements --------------------------------------------------------
  bool at_compound() const {
    if (at_op("@")) return true;
    if (tok().kind != TokenKind::Name) return false;
    const std::string& w = tok().text;
    if (w == "if" || w == "while" || w == "for" || w == "try" || w == "with" || w == "def" ||
        w == "class")
      return true;
    if (w == "async") return at_kw("def", 1) || at_kw("for", 1) || at_kw("with", 1);
    return false;
  }

  void statement_into(std::vector<NodePtr>& out) {
    if (at(TokenKind::Indent)) fail("unexpected indent");
    if (at_compound()) {
      out.push_back(compound());
    } else {
      simple_statements(out);
    }
  }

  void simple_statements(std::vector<NodePtr>& out) {
    for (;;) {
      out.push_back(small_statement());
      if (accept_op(";")) {
        if (at(TokenKind::Newline)) break;
        continue;
      }
      break;
    }
    if (!at(TokenKind::Newline)) fail("invalid syntax");
    advance();
  }

  NodePtr block() {
    auto b = start(Kind::Block);
    expect_op(":");
    b->line = tok().line;
    b->first_token = tok_index();
    if (at(TokenKind::Newline)) {
      advance();
      if (!at(TokenKind::Indent)) fail("expected an indented block");
      advance();
      b->line = tok().line;
      b->col = tok().col;
      b->first_token = tok_index();
      while (!at(TokenKind::Dedent) && !at(TokenKind::EndMarker)) {
        if (at(TokenKind::Newline)) {
          advance();
          continue;
        }
        statement_into(b->children);
      }
      if (at(TokenKind::Dedent)) advance();
      // the block ends at the last statement, not at the dedent
      Node* last = b->children.back().get();
      b->end_line = last->end_line;
      b->end_col = last->end_col;
      b->last_token = last->last_token;
    } else {
      simple_statements(b->children);
      Node* last = b->children.back().get();
      b->end_line = last->end_line;
      b->end_col = last->end_col;
      b->last_token = last->last_token;
    }
    return b;
  }

  static void close_with(Node& n, const Node& last) {
    n.end_line = last.end_line;
    n.end_col = last.end_col;
    n.last_token = last.last_token;
  }

  NodePtr compound() {
    if (at_op("@")) return decorated();
    if (at_kw("if")) return if_statement(false);
    if (at_kw("while")) return while_statement();
    if (at_kw("for")) return for_statement(false);
    if (at_kw("try")) return try_statement();
    if (at_kw("with")) return with_statement(false);
    if (at_kw("def")) return funcdef(nullptr, false);
    if (at_kw("class")) return classdef(nullptr);
    if (at_kw("async")) {
      auto first = tok_index();
      auto line = tok().line;
      auto col = tok().col;
      advance();
      NodePtr n;
      if (at_kw("def")) {
        n = funcdef(nullptr, true);
      } else if (at_kw("for")) {
        n = for_statement(true);
      } else {
        n = with_statement(true);
      }
      n->first_token = first;
      n->line = line;
      n->col = col;
      return n;
    }
    fail("expected compound statement");
  }

  NodePtr decorated() {
    auto decos = start(Kind::Decorators);
    int first = tok_index();
    int line = tok().line;
    int col = tok().col;
    while (accept_op("@")) {
      decos->children.push_back(namedexpr_test());
      if (!at(TokenKind::Newline)) fail("expected newline after decorator");
      advance();
    }
    finish(decos.get());
    NodePtr n;
    if (at_kw("def")) {
      n = funcdef(std::move(decos), false);
    } else if (at_kw("async") && at_kw("def", 1)) {
      advance();
      n = funcdef(std::move(decos), true);
    } else if (at_kw("class")) {
      n = classdef(std::move(decos));
    } else {
      fail("expected def or class after decorator");
    }
    n->first_token = first;
    n->line = line;
    n->col = col;
    return n;
  }

  NodePtr funcdef(NodePtr decorators, bool is_async) {
    auto n = start(Kind::FunctionDef);
    n->flag = is_async;
    expect_kw("def");
    n->value = expect_name();
    expect_op("(");
    auto args = arguments(")", true);
    expect_op(")");
    NodePtr returns;
    if (accept_op("->")) returns = test();
    auto body = block();
    n->children.push_back(decorators ? std::move(decorators) : make(Kind::Decorators));
    n->children.push_back(std::move(args));
    n->children.push_back(std::move(returns));
    close_with(*n, *body);
    n->children.push_back(std::move(body));
    return n;
  }

  NodePtr classdef(NodePtr decorators) {
    auto n = start(Kind::ClassDef);
    expect_kw("class");
    n->value = expect_name();
    NodePtr bases = make(Kind::CallArgs);
    if (accept_op("(")) {
      bases = arglist();
      expect_op(")");
    }
    auto body = block();
    n->children.push_back(decorators ? std::move(decorators) : make(Kind::Decorators));
    n->children.push_back(std::move(bases));
    close_with(*n, *body);
    n->children.push_back(std::move(body));
    return n;
  }

  // Parameter list for def (annotations allowed) or lambda.
  NodePtr arguments(std::string_view closer, bool annotations) {
    auto args = start(Kind::Arguments);
    while (!at_op(closer)) {
      auto a = start(Kind::Arg);
      if (accept_op("/")) {
        a->extra = "/";
      } else if (accept_op("**")) {
        a->extra = "**";
        a->value = expect_name();
      } else if (accept_op("*")) {
        a->extra = "*";
        if (at_plain_name()) a->value = expect_name();
      } else {
        a->value = expect_name();
      }
      NodePtr annotation;
      NodePtr def;
      if (!a->value.empty() && annotations && accept_op(":")) annotation = test();
      if (a->extra.empty() && accept_op("=")) def = test();
      a->children.push_back(std::move(annotation));
      a->children.push_back(std::move(def));
      args->children.push_back(finish(std::move(a)));
      if (!accept_op(",")) break;
    }
    return finish(std::move(args));
  }

  NodePtr if_statement(bool is_elif) {
    auto n = start(Kind::If);
    n->flag = is_elif;
    advance();  // 'if' or 'elif'
    n->children.push_back(namedexpr_test());
    auto body = block();
    Node* last = body.get();
    n->children.push_back(std::move(body));
    NodePtr orelse;
    if (at_kw("elif")) {
      auto inner = if_statement(true);
      orelse = make(Kind::Block);
      orelse->line = inner->line;
      orelse->col = inner->col;
      orelse->first_token = inner->first_token;
      close_with(*orelse, *inner);
      orelse->children.push_back(std::move(inner));
      last = orelse.get();
    } else if (accept_kw("else")) {
      orelse = block();
      last = orelse.get();
    }
    close_with(*n, *last);
    n->children.push_back(std::move(orelse));
    return n;
  }

  NodePtr while_statement() {
    auto n = start(Kind::While);
    expect_kw("while");
    n->children.push_back(namedexpr_test());
    auto body = block();
    Node* last = body.get();
    n->children.push_back(std::move(body));
    NodePtr orelse;
    if (accept_kw("else")) {
      orelse = block();
      last = orelse.get();
    }
    close_with(*n, *last);
    n->children.push_back(std::move(orelse));
    return n;
  }

  NodePtr for_statement(bool is_async) {
    auto n = start(Kind::For);
    n->flag = is_async;
    expect_kw("for");
    n->children.push_back(exprlist());
    expect_kw("in");
    n->children.push_back(testlist_star_expr());
    auto body = block();
    Node* last = body.get();
    n->children.push_back(std::move(body));
    NodePtr orelse;
    if (accept_kw("else")) {
      orelse = block();
      last = orelse.get();
    }
    close_with(*n, *last);
    n->children.push_back(std::move(orelse));
    return n;
  }

  NodePtr try_statement() {
    auto n = start(Kind::Try);
    expect_kw("try");
    auto body = block();
    Node* last = body.get();
    auto handlers = make(Kind::Handlers);
    while (at_kw("except")) {
      auto h = start(Kind::ExceptHandler);
      advance();
      NodePtr type;
      if (!at_op(":")) {
        type = test();
        if (accept_op(",")) {
          // Python 2 style "except A, e" is not valid Python 3
          fail("multiple exception types must be parenthesized");
        }
        if (accept_kw("as")) h->value = expect_name();
      }
      h->children.push_back(std::move(type));
      auto hb = block();
      close_with(*h, *hb);
      h->children.push_back(std::move(hb));
      last = h.get();
      handlers->children.push_back(std::move(h));
    }
    NodePtr orelse;
    NodePtr final_block;
    if (!handlers->children.empty() && accept_kw("else")) {
      orelse = block();
      last = orelse.get();
    }
    if (accept_kw("finally")) {
      final_block = block();
      last = final_block.get();
    }
    if (handlers->children.empty() && !final_block) fail("expected 'except' or 'finally' block");
    close_with(*n, *last);
    n->children.push_back(std::move(body));
    n->children.push_back(std::move(handlers));
    n->children.push_back(std::move(orelse));
    n->children.push_back(std::move(final_block));
    return n;
  }

  NodePtr with_item() {
    auto item = start(Kind::WithItem);
    item->children.push_back(test());
    NodePtr vars;
    if (accept_kw("as")) vars = expr_or_star_target();
    item->children.push_back(std::move(vars));
    return finish(std::move(item));
  }

  NodePtr with_statement(bool is_async) {
    auto n = start(Kind::With);
    n->flag = is_async;
    expect_kw("with");
    bool parsed = false;
    if (at_op("(")) {
      // Parenthesized context managers; fall back to an expression if the
      // parenthesized form does not pan out.
      std::size_t save = pos_;
      try {
        advance();
        std::vector<NodePtr> items;
        while (!at_op(")")) {
          items.push_back(with_item());
          if (!accept_op(",")) break;
        }
        expect_op(")");
        if (!at_op(":")) throw ParseError(0, 0, "not a parenthesized with");
        for (auto& i : items) n->children.push_back(std::move(i));
        parsed = true;
      } catch (const ParseError&) {
        pos_ = save;
        n->children.clear();
      }
    }
    if (!parsed) {
      do {
        n->children.push_back(with_item());
      } while (accept_op(","));
    }
    auto body = block();
    close_with(*n, *body);
    n->children.push_back(std::move(body));
    return n;
  }

  NodePtr small_statement() {
    const Token& t = tok();
    NodePtr n;
    if (t.kind == TokenKind::Name) {
      const std::string& w = t.text;
      if (w == "pass" || w == "break" || w == "continue") {
        n = start(w == "pass" ? Kind::Pass : w == "break" ? Kind::Break : Kind::Continue);
        advance();
        return finish(std::move(n));
      }
      if (w == "return") {
        n = start(Kind::Return);
        advance();
        n->children.push_back(at_statement_end() ? nullptr : testlist_star_expr());
        return finish(std::move(n));
      }
      if (w == "raise") {
        n = start(Kind::Raise);
        advance();
        NodePtr exc;
        NodePtr cause;
        if (!at_statement_end()) {
          exc = test();
          if (accept_kw("from")) cause = test();
        }
        n->children.push_back(std::move(exc));
        n->children.push_back(std::move(cause));
        return finish(std::move(n));
      }
      if (w == "global" || w == "nonlocal") {
        n = start(w == "global" ? Kind::Global : Kind::Nonlocal);
        advance();
        do {
          n->names.push_back(expect_name());
        } while (accept_op(","));
        return finish(std::move(n));
      }
      if (w == "del") {
        n = start(Kind::Delete);
        advance();
        auto targets = exprlist();
        if (targets->kind == Kind::Tuple && !targets->flag) {
          for (auto& c : targets->children) n->children.push_back(std::move(c));
        } else {
          n->children.push_back(std::move(targets));
        }
        return finish(std::move(n));
      }
      if (w == "assert") {
        n = start(Kind::Assert);
        advance();
        n->children.push_back(test());
        n->children.push_back(accept_op(",") ? test() : nullptr);
        return finish(std::move(n));
      }
      if (w == "import") return import_name();
      if (w == "from") return import_from();
    }
    return expression_statement();
  }

  bool at_statement_end() const { return at(TokenKind::Newline) || at_op(";"); }

  std::string dotted_name() {
    std::string s = expect_name();
    while (accept_op(".")) s += "." + expect_name();
    return s;
  }

  NodePtr import_name() {
    auto n = start(Kind::Import);
    expect_kw("import");
    do {
      auto a = start(Kind::Alias);
      a->value = dotted_name();
      if (accept_kw("as")) a->extra = expect_name();
      n->children.push_back(finish(std::move(a)));
    } while (accept_op(","));
    return finish(std::move(n));
  }

  NodePtr import_from() {
    auto n = start(Kind::ImportFrom);
    expect_kw("from");
    std::string module;
    for (;;) {
      if (accept_op(".")) {
        module += ".";
      } else if (accept_op("...")) {
        module += "...";
      } else {
        break;
      }
    }
    if (!at_kw("import")) module += dotted_name();
    n->value = module;
    expect_kw("import");
    if (accept_op("*")) {
      auto a = make(Kind::Alias, "*");
      n->children.push_back(std::move(a));
      return finish(std::move(n));
    }
    bool paren = accept_op("(");
    do {
      if (paren && at_op(")")) break;
      auto a = start(Kind::Alias);
      a->value = expect_name();
      if (accept_kw("as")) a->extra = expect_name();
      n->children.push_back(finish(std::move(a)));
    } while (accept_op(","));
    if (paren) expect_op(")");
    return finish(std::move(n));
  }

  NodePtr expression_statement() {
    auto first_tok = tok_index();
    int line = tok().line;
    int col = tok().col;
    auto position = [&](Node& n) {
      n.first_token = first_tok;
      n.line = line;
      n.col = col;
      finish(&n);
    };
    NodePtr lhs = at_kw("yield") ? yield_expr() : testlist_star_expr();
    if (at_op("=")) {
      auto n = make(Kind::Assign);
      n->children.push_back(std::move(lhs));
      while (accept_op("=")) {
        n->children.push_back(at_kw("yield") ? yield_expr() : testlist_star_expr());
      }
      position(*n);
      return n;
    }
    if (tok().kind == TokenKind::Op && is_augassign(tok().text)) {
      auto n = make(Kind::AugAssign, tok().text);
      advance();
      n->children.push_back(std::move(lhs));
      n->children.push_back(at_kw("yield") ? yield_expr() : testlist_star_expr());
      position(*n);
      return n;
    }
    if (accept_op(":")) {
      auto n = make(Kind::AnnAssign);
      n->children.push_back(std::move(lhs));
      n->children.push_back(test());
      NodePtr value;
      if (accept_op("=")) value = at_kw("yield") ? yield_expr() : testlist_star_expr();
      n->children.push_back(std::move(value));
      position(*n);
      return n;
    }
    auto n = make(Kind::ExprStmt);
    n->children.push_back(std::move(lhs));
    position(*n);
    return n;
  }

  // ---- expressions -------------------------------------------------------
  NodePtr yield_expr() {
    auto n = start(Kind::Yield);
    expect_kw("yield");
    if (accept_kw("from")) {
      n->kind = Kind::YieldFrom;
      n->children.push_back(test());
      return finish(std::move(n));
    }
    bool ends = at(TokenKind::Newline) || at_op(")") || at_op("]") || at_op("}") || at_op(";") ||
                at_op("=");
    n->children.push_back(ends ? nullptr : testlist_star_expr());
    return finish(std::move(n));
  }

  bool at_expr_end() const {
    const Token& t = tok();
    if (t.kind == TokenKind::Newline || t.kind == TokenKind::EndMarker) return true;
    if (t.kind == TokenKind::Op) {
      const std::string& s = t.text;
      return s == ")" || s == "]" || s == "}" || s == "=" || s == ";" || s == ":" ||
             is_augassign(s);
    }
    return t.kind == TokenKind::Name && (t.text == "in" || t.text == "for");
  }

  // test or star_expr, optionally followed by commas forming a bare tuple
  NodePtr testlist_star_expr() {
    auto first = star_or_namedexpr();
    if (!at_op(",")) return first;
    auto tuple = start_at(Kind::Tuple, *first);
    tuple->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_expr_end()) break;
      tuple->children.push_back(star_or_namedexpr());
    }
    return finish(std::move(tuple));
  }

  NodePtr star_or_namedexpr() {
    if (at_op("*")) return star_expr();
    return namedexpr_test();
  }

  NodePtr star_expr() {
    auto n = start(Kind::Starred);
    expect_op("*");
    n->children.push_back(bitor_expr());
    return finish(std::move(n));
  }

  NodePtr expr_or_star_target() {
    if (at_op("*")) return star_expr();
    return bitor_expr_with_atom_targets();
  }

  NodePtr bitor_expr_with_atom_targets() { return bitor_expr(); }

  // for-loop and comprehension targets
  NodePtr exprlist() {
    auto first = expr_or_star_target();
    if (!at_op(",")) return first;
    auto tuple = start_at(Kind::Tuple, *first);
    tuple->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_kw("in") || at_op("=") || at(TokenKind::Newline) || at_op(";")) break;
      tuple->children.push_back(expr_or_star_target());
    }
    return finish(std::move(tuple));
  }

  NodePtr namedexpr_test() {
    auto e = test();
    if (at_op(":=")) {
      if (e->kind != Kind::Name) fail("cannot use assignment expression with this target");
      auto n = start_at(Kind::NamedExpr, *e);
      advance();
      n->children.push_back(std::move(e));
      n->children.push_back(test());
      return finish(std::move(n));
    }
    return e;
  }

  NodePtr test() {
    if (at_kw("lambda")) return lambdef();
    auto body = or_test();
    if (at_kw("if")) {
      auto n = start_at(Kind::IfExp, *body);
      advance();
      auto cond = or_test();
      expect_kw("else");
      auto orelse = test();
      n->children.push_back(std::move(body));
      n->children.push_back(std::move(cond));
      n->children.push_back(std::move(orelse));
      return finish(std::move(n));
    }
    return body;
  }

  NodePtr lambdef() {
    auto n = start(Kind::Lambda);
    expect_kw("lambda");
    auto args = arguments(":", false);
    expect_op(":");
    n->children.push_back(std::move(args));
    n->children.push_back(test());
    return finish(std::move(n));
  }

  NodePtr or_test() {
    auto first = and_test();
    if (!at_kw("or")) return first;
    auto n = start_at(Kind::BoolOp, *first);
    n->value = "or";
    n->children.push_back(std::move(first));
    while (accept_kw("or")) n->children.push_back(and_test());
    return finish(std::move(n));
  }

  NodePtr and_test() {
    auto first = not_test();
    if (!at_kw("and")) return first;
    auto n = start_at(Kind::BoolOp, *first);
    n->value = "and";
    n->children.push_back(std::move(first));
    while (accept_kw("and")) n->children.push_back(not_test());
    return finish(std::move(n));
  }

  NodePtr not_test() {
    if (at_kw("not")) {
      auto n = start(Kind::UnaryOp, "not");
      advance();
      n->children.push_back(not_test());
      return finish(std::move(n));
    }
    return comparison();
  }

  bool comparison_op(std::string& op) {
    const Token& t = tok();
    if (t.kind == TokenKind::Op) {
      const std::string& s = t.text;
      if (s == "<" || s == ">" || s == "==" || s == ">=" || s == "<=" || s == "!=") {
        op = s;
        advance();
        return true;
      }
      return false;
    }
    if (t.is_name("in")) {
      op = "in";
      advance();
      return true;
    }
    if (t.is_name("not") && at_kw("in", 1)) {
      op = "not in";
      advance();
      advance();
      return true;
    }
    if (t.is_name("is")) {
      advance();
      if (accept_kw("not")) {
        op = "is not";
      } else {
        op = "is";
      }
      return true;
    }
    return false;
  }

  NodePtr comparison() {
    auto first = bitor_expr();
    std::string op;
    if (!comparison_op(op)) return first;
    auto n = start_at(Kind::Compare, *first);
    n->children.push_back(std::move(first));
    do {
      n->ops.push_back(op);
      n->children.push_back(bitor_expr());
    } while (comparison_op(op));
    return finish(std::move(n));
  }

  template <typename Next>
  NodePtr binary_level(std::initializer_list<std::string_view> ops, Next next) {
    auto left = (this->*next)();
    for (;;) {
      const Token& t = tok();
      if (t.kind != TokenKind::Op) return left;
      bool match = false;
      for (auto o : ops) match = match || t.text == o;
      if (!match) return left;
      auto n = start_at(Kind::BinOp, *left);
      n->value = t.text;
      advance();
      n->children.push_back(std::move(left));
      n->children.push_back((this->*next)());
      left = finish(std::move(n));
    }
  }

  NodePtr bitor_expr() { return binary_level({"|"}, &Parser::xor_expr); }
  NodePtr xor_expr() { return binary_level({"^"}, &Parser::and_expr); }
  NodePtr and_expr() { return binary_level({"&"}, &Parser::shift_expr); }
  NodePtr shift_expr() { return binary_level({"<<", ">>"}, &Parser::arith_expr); }
  NodePtr arith_expr() { return binary_level({"+", "-"}, &Parser::term); }
  NodePtr term() { return binary_level({"*", "/", "//", "%", "@"}, &Parser::factor); }

  NodePtr factor() {
    if (at_op("+") || at_op("-") || at_op("~")) {
      auto n = start(Kind::UnaryOp, tok().text);
      advance();
      n->children.push_back(factor());
      return finish(std::move(n));
    }
    return power();
  }

  NodePtr power() {
    auto base = await_primary();
    if (at_op("**")) {
      auto n = start_at(Kind::BinOp, *base);
      n->value = "**";
      advance();
      n->children.push_back(std::move(base));
      n->children.push_back(factor());
      return finish(std::move(n));
    }
    return base;
  }

  NodePtr await_primary() {
    if (at_kw("await")) {
      auto n = start(Kind::Await);
      advance();
      n->children.push_back(atom_expr());
      return finish(std::move(n));
    }
    return atom_expr();
  }

  NodePtr atom_expr() {
    auto e = atom();
    for (;;) {
      if (at_op("(")) {
        auto n = start_at(Kind::Call, *e);
        advance();
        auto args = arglist();
        expect_op(")");
        n->children.push_back(std::move(e));
        n->children.push_back(std::move(args));
        e = finish(std::move(n));
      } else if (at_op("[")) {
        auto n = start_at(Kind::Subscript, *e);
        advance();
        auto index = subscriptlist();
        expect_op("]");
        n->children.push_back(std::move(e));
        n->children.push_back(std::move(index));
        e = finish(std::move(n));
      } else if (at_op(".")) {
        auto n = start_at(Kind::Attribute, *e);
        advance();
        n->value = expect_name();
        n->children.push_back(std::move(e));
        e = finish(std::move(n));
      } else {
        return e;
      }
    }
  }

  NodePtr arglist() {
    auto args = start(Kind::CallArgs);
    while (!at_op(")")) {
      if (at_op("*")) {
        args->children.push_back(star_expr_test());
      } else if (at_op("**")) {
        auto n = start(Kind::DoubleStarred);
        advance();
        n->children.push_back(test());
        args->children.push_back(finish(std::move(n)));
      } else if (at_plain_name() && at_op("=", 1)) {
        auto n = start(Kind::Keyword, tok().text);
        advance();
        advance();
        n->children.push_back(test());
        args->children.push_back(finish(std::move(n)));
      } else {
        auto e = namedexpr_test();
        if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
          auto gen = start_at(Kind::GeneratorExp, *e);
          gen->children.push_back(std::move(e));
          comprehension_clauses(*gen);
          e = finish(std::move(gen));
        }
        args->children.push_back(std::move(e));
      }
      if (!accept_op(",")) break;
    }
    return finish(std::move(args));
  }

  NodePtr star_expr_test() {
    auto n = start(Kind::Starred);
    expect_op("*");
    n->children.push_back(test());
    return finish(std::move(n));
  }

  NodePtr subscriptlist() {
    auto first = subscript();
    if (!at_op(",")) return first;
    auto tuple = start_at(Kind::Tuple, *first);
    tuple->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("]")) break;
      tuple->children.push_back(subscript());
    }
    return finish(std::move(tuple));
  }

  NodePtr subscript() {
    NodePtr lower;
    auto n = start(Kind::Slice);
    if (!at_op(":")) {
      if (at_op("*")) return star_expr();
      lower = namedexpr_test();
      if (!at_op(":")) return lower;
    }
    expect_op(":");
    NodePtr upper;
    NodePtr step;
    if (!at_op(":") && !at_op(",") && !at_op("]")) upper = test();
    if (accept_op(":")) {
      if (!at_op(",") && !at_op("]")) step = test();
    }
    n->children.push_back(std::move(lower));
    n->children.push_back(std::move(upper));
    n->children.push_back(std::move(step));
    return finish(std::move(n));
  }

  void comprehension_clauses(Node& owner) {
    while (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
      auto c = start(Kind::Comprehension);
      if (accept_kw("async")) c->flag = true;
      expect_kw("for");
      c->children.push_back(exprlist());
      expect_kw("in");
      c->children.push_back(or_test());
      while (at_kw("if")) {
        advance();
        c->children.push_back(test_nocond());
      }
      owner.children.push_back(finish(std::move(c)));
    }
  }

  NodePtr test_nocond() {
    if (at_kw("lambda")) return lambdef();
    return or_test();
  }

  NodePtr atom() {
    const Token& t = tok();
    switch (t.kind) {
      case TokenKind::Name: {
        if (t.text == "None" || t.text == "True" || t.text == "False") {
          auto n = start(Kind::Constant, t.text);
          advance();
          return finish(std::move(n));
        }
        if (is_keyword(t.text)) fail("invalid syntax");
        auto n = start(Kind::Name, t.text);
        advance();
        return finish(std::move(n));
      }
      case TokenKind::Number: {
        auto n = start(Kind::Number, t.text);
        advance();
        return finish(std::move(n));
      }
      case TokenKind::String: {
        auto n = start(Kind::String);
        while (at(TokenKind::String)) {
          n->names.push_back(tok().text);
          advance();
        }
        return finish(std::move(n));
      }
      case TokenKind::Op:
        break;
      default:
        fail("invalid syntax");
    }
    if (t.text == "...") {
      auto n = start(Kind::Constant, "...");
      advance();
      return finish(std::move(n));
    }
    if (t.text == "(") return paren_atom();
    if (t.text == "[") return list_atom();
    if (t.text == "{") return brace_atom();
    fail("invalid syntax");
  }

  NodePtr paren_atom() {
    int first = tok_index();
    int line = tok().line;
    int col = tok().col;
    expect_op("(");
    auto mark = [&](NodePtr n) {
      n->first_token = first;
      n->line = line;
      n->col = col;
      return finish(std::move(n));
    };
    if (accept_op(")")) {
      auto n = make(Kind::Tuple);
      n->flag = true;
      return mark(std::move(n));
    }
    if (at_kw("yield")) {
      auto y = yield_expr();
      expect_op(")");
      return y;
    }
    auto first_elt = star_or_namedexpr();
    if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
      auto gen = make(Kind::GeneratorExp);
      gen->children.push_back(std::move(first_elt));
      comprehension_clauses(*gen);
      expect_op(")");
      return mark(std::move(gen));
    }
    if (at_op(",")) {
      auto tuple = make(Kind::Tuple);
      tuple->flag = true;
      tuple->children.push_back(std::move(first_elt));
      while (accept_op(",")) {
        if (at_op(")")) break;
        tuple->children.push_back(star_or_namedexpr());
      }
      expect_op(")");
      return mark(std::move(tuple));
    }
    expect_op(")");
    if (first_elt->kind == Kind::Tuple) first_elt->flag = true;
    return first_elt;
  }

  NodePtr list_atom() {
    auto n = start(Kind::List);
    expect_op("[");
    if (accept_op("]")) return finish(std::move(n));
    auto first = star_or_namedexpr();
    if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
      n->kind = Kind::ListComp;
      n->children.push_back(std::move(first));
      comprehension_clauses(*n);
      expect_op("]");
      return finish(std::move(n));
    }
    n->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("]")) break;
      n->children.push_back(star_or_namedexpr());
    }
    expect_op("]");
    return finish(std::move(n));
  }

  NodePtr brace_atom() {
    auto n = start(Kind::Dict);
    expect_op("{");
    if (accept_op("}")) return finish(std::move(n));
    if (at_op("**")) {
      dict_entries(*n);
      return finish(std::move(n));
    }
    auto first = star_or_namedexpr();
    if (accept_op(":")) {
      auto value = test();
      if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
        n->kind = Kind::DictComp;
        n->children.push_back(std::move(first));
        n->children.push_back(std::move(value));
        comprehension_clauses(*n);
        expect_op("}");
        return finish(std::move(n));
      }
      auto kv = start_at(Kind::KeyValue, *first);
      kv->children.push_back(std::move(first));
      kv->children.push_back(std::move(value));
      n->children.push_back(finish(std::move(kv)));
      if (accept_op(",")) {
        dict_entries(*n);
      } else {
        expect_op("}");
      }
      return finish(std::move(n));
    }
    n->kind = Kind::Set;
    if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
      n->kind = Kind::SetComp;
      n->children.push_back(std::move(first));
      comprehension_clauses(*n);
      expect_op("}");
      return finish(std::move(n));
    }
    n->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("}")) break;
      n->children.push_back(star_or_namedexpr());
    }
    expect_op("}");
    return finish(std::move(n));
  }

  // remaining entries after '{' or after the first entry's ','; consumes '}'
  void dict_entries(Node& dict) {
    while (!at_op("}")) {
      if (at_op("**")) {
        auto d = start(Kind::DoubleStarred);
        advance();
        d->children.push_back(bitor_expr());
        dict.children.push_back(finish(std::move(d)));
      } else {
        auto key = test();
        expect_op(":");
        auto kv = start_at(Kind::KeyValue, *key);
        kv->children.push_back(std::move(key));
        kv->children.push_back(test());
        dict.children.push_back(finish(std::move(kv)));
      }
      if (!accept_op(",")) break;
    }
    expect_op("}");
  }

  const std::vector<Token>& tokens_;
  std::vector<int> sig_;
  std::size_t pos_ = 0;
};

}  // namespace

ParsedModule parse_module(std::string_view source) {
  ParsedModule out;
  out.source = std::string(source);
  out.tokens = tokenize(out.source);
  Parser p(out.tokens);
  out.module = p.module();
  return out;
}

NodePtr parse_expression(std::string_view source) {
  auto tokens = tokenize(source);
  Parser p(tokens);
  return p.single_expression();
}

bool parses(std::string_view source) {
  try {
    parse_module(source);
    return true;
  } catch (const ParseError&) {
    return false;
  }
}

}  // namespace reasonbench::py
