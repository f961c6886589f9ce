#include "reasonbench/py/unparse.hpp"

#include <stdexcept>

namespace reasonbench::py {

namespace {

// Binding strength, loosest first.
enum Prec : int {
  kTuple = 0,
  kYield,
  kNamed,
  kTest,  // lambda, conditional expression
  kOr,
  kAnd,
  kNot,
  kCmp,
  kBor,
  kBxor,
  kBand,
  kShift,
  kArith,
  kTerm,
  kFactor,
  kPower,
  kAwait,
  kAtom,
};

int binop_prec(std::string_view op) {
  if (op == "|") return kBor;
  if (op == "^") return kBxor;
  if (op == "&") return kBand;
  if (op == "<<" || op == ">>") return kShift;
  if (op == "+" || op == "-") return kArith;
  if (op == "**") return kPower;
  return kTerm;
}

int precedence(const Node& e) {
  switch (e.kind) {
    case Kind::Tuple:
      return e.children.empty() ? kAtom : kTuple;
    case Kind::Yield:
    case Kind::YieldFrom:
      return kYield;
    case Kind::NamedExpr:
      return kNamed;
    case Kind::Lambda:
    case Kind::IfExp:
      return kTest;
    case Kind::BoolOp:
      return e.value == "or" ? kOr : kAnd;
    case Kind::UnaryOp:
      return e.value == "not" ? kNot : kFactor;
    case Kind::Compare:
      return kCmp;
    case Kind::BinOp:
      return binop_prec(e.value);
    case Kind::Await:
      return kAwait;
    case Kind::Starred:
      return kBor;
    default:
      return kAtom;
  }
}

class ExprWriter {
 public:
  std::string out;

  void expr(const Node& e, int min_prec) {
    bool paren = precedence(e) < min_prec;
    if (paren) out += '(';
    raw(e);
    if (paren) out += ')';
  }

  void comma_list(const std::vector<NodePtr>& items, int prec = kTest) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i) out += ", ";
      expr(*items[i], prec);
    }
  }

  void raw(const Node& e) {
    switch (e.kind) {
      case Kind::Name:
      case Kind::Number:
      case Kind::Constant:
        out += e.value;
        break;
      case Kind::String:
        for (std::size_t i = 0; i < e.names.size(); ++i) {
          if (i) out += ' ';
          out += e.names[i];
        }
        break;
      case Kind::Tuple:
        if (e.children.empty()) {
          out += "()";
        } else {
          comma_list(e.children, kNamed);
          if (e.children.size() == 1) out += ',';
        }
        break;
      case Kind::List:
        out += '[';
        comma_list(e.children, kNamed);
        out += ']';
        break;
      case Kind::Set:
        out += '{';
        comma_list(e.children, kNamed);
        out += '}';
        break;
      case Kind::Dict:
        out += '{';
        for (std::size_t i = 0; i < e.children.size(); ++i) {
          if (i) out += ", ";
          const Node& item = *e.children[i];
          if (item.kind == Kind::DoubleStarred) {
            out += "**";
            expr(*item.child(0), kBor);
          } else {
            expr(*item.child(0), kTest);
            out += ": ";
            expr(*item.child(1), kTest);
          }
        }
        out += '}';
        break;
      case Kind::ListComp:
      case Kind::SetComp:
      case Kind::GeneratorExp: {
        const char* open = e.kind == Kind::ListComp ? "[" : e.kind == Kind::SetComp ? "{" : "(";
        const char* close = e.kind == Kind::ListComp ? "]" : e.kind == Kind::SetComp ? "}" : ")";
        out += open;
        expr(*e.child(0), kNamed);
        for (std::size_t i = 1; i < e.children.size(); ++i) comprehension(*e.children[i]);
        out += close;
        break;
      }
      case Kind::DictComp:
        out += '{';
        expr(*e.child(0), kTest);
        out += ": ";
        expr(*e.child(1), kTest);
        for (std::size_t i = 2; i < e.children.size(); ++i) comprehension(*e.children[i]);
        out += '}';
        break;
      case Kind::BoolOp: {
        int p = precedence(e);
        for (std::size_t i = 0; i < e.children.size(); ++i) {
          if (i) out += " " + e.value + " ";
          expr(*e.children[i], p + 1);
        }
        break;
      }
      case Kind::NamedExpr:
        expr(*e.child(0), kAtom);
        out += " := ";
        expr(*e.child(1), kTest);
        break;
      case Kind::BinOp: {
        int p = precedence(e);
        bool right_assoc = e.value == "**";
        expr(*e.child(0), right_assoc ? p + 1 : p);
        out += " " + e.value + " ";
        expr(*e.child(1), right_assoc ? kFactor : p + 1);
        break;
      }
      case Kind::UnaryOp:
        if (e.value == "not") {
          out += "not ";
          expr(*e.child(0), kNot);
        } else {
          out += e.value;
          expr(*e.child(0), kFactor);
        }
        break;
      case Kind::Lambda:
        out += "lambda";
        if (!e.child(0)->children.empty()) {
          out += ' ';
          arguments(*e.child(0));
        }
        out += ": ";
        expr(*e.child(1), kTest);
        break;
      case Kind::IfExp:
        expr(*e.child(0), kOr);
        out += " if ";
        expr(*e.child(1), kOr);
        out += " else ";
        expr(*e.child(2), kTest);
        break;
      case Kind::Await:
        out += "await ";
        expr(*e.child(0), kAtom);
        break;
      case Kind::Yield:
        out += "yield";
        if (e.child(0)) {
          out += ' ';
          expr(*e.child(0), kTuple);
        }
        break;
      case Kind::YieldFrom:
        out += "yield from ";
        expr(*e.child(0), kTest);
        break;
      case Kind::Compare:
        expr(*e.child(0), kCmp + 1);
        for (std::size_t i = 0; i < e.ops.size(); ++i) {
          out += " " + e.ops[i] + " ";
          expr(*e.children[i + 1], kCmp + 1);
        }
        break;
      case Kind::Call:
        expr(*e.child(0), kAtom);
        out += '(';
        call_args(*e.child(1));
        out += ')';
        break;
      case Kind::Attribute:
        if (e.child(0)->kind == Kind::Number) {
          out += '(';
          raw(*e.child(0));
          out += ')';
        } else {
          expr(*e.child(0), kAtom);
        }
        out += '.';
        out += e.value;
        break;
      case Kind::Subscript:
        expr(*e.child(0), kAtom);
        out += '[';
        index(*e.child(1));
        out += ']';
        break;
      case Kind::Slice:
        slice(e);
        break;
      case Kind::Starred:
        out += '*';
        expr(*e.child(0), kBor);
        break;
      case Kind::DoubleStarred:
        out += "**";
        expr(*e.child(0), kBor);
        break;
      case Kind::Keyword:
        out += e.value + "=";
        expr(*e.child(0), kTest);
        break;
      default:
        throw std::logic_error("unparse: not an expression: " + std::string(kind_name(e.kind)));
    }
  }

  void index(const Node& e) {
    if (e.kind == Kind::Tuple && !e.children.empty()) {
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) out += ", ";
        const Node& c = *e.children[i];
        if (c.kind == Kind::Slice) {
          slice(c);
        } else {
          expr(c, kNamed);
        }
      }
      if (e.children.size() == 1) out += ',';
      return;
    }
    if (e.kind == Kind::Slice) {
      slice(e);
    } else {
      expr(e, kNamed);
    }
  }

  void slice(const Node& s) {
    if (s.child(0)) expr(*s.child(0), kTest);
    out += ':';
    if (s.child(1)) expr(*s.child(1), kTest);
    if (s.child(2)) {
      out += ':';
      expr(*s.child(2), kTest);
    }
  }

  void call_args(const Node& args) {
    bool single_gen = args.children.size() == 1 && args.child(0)->kind == Kind::GeneratorExp;
    for (std::size_t i = 0; i < args.children.size(); ++i) {
      if (i) out += ", ";
      const Node& a = *args.children[i];
      if (single_gen) {
        raw(a);
      } else if (a.kind == Kind::Starred) {
        out += '*';
        expr(*a.child(0), kTest);
      } else if (a.kind == Kind::DoubleStarred) {
        out += "**";
        expr(*a.child(0), kTest);
      } else if (a.kind == Kind::Keyword) {
        raw(a);
      } else {
        expr(a, kNamed);
      }
    }
  }

  void comprehension(const Node& c) {
    out += c.flag ? " async for " : " for ";
    target(*c.child(0));
    out += " in ";
    expr(*c.child(1), kOr);
    for (std::size_t i = 2; i < c.children.size(); ++i) {
      out += " if ";
      expr(*c.children[i], kOr);
    }
  }

  // assignment / loop targets: bare tuples allowed
  void target(const Node& t) {
    if (t.kind == Kind::Tuple && !t.children.empty()) {
      comma_list(t.children, kBor);
      if (t.children.size() == 1) out += ',';
    } else {
      expr(t, kBor);
    }
  }

  void arguments(const Node& args) {
    for (std::size_t i = 0; i < args.children.size(); ++i) {
      if (i) out += ", ";
      const Node& a = *args.children[i];
      if (a.extra == "/") {
        out += '/';
        continue;
      }
      out += a.extra;
      out += a.value;
      if (a.child(0)) {
        out += ": ";
        expr(*a.child(0), kTest);
      }
      if (a.child(1)) {
        out += a.child(0) ? " = " : "=";
        expr(*a.child(1), kTest);
      }
    }
  }
};

std::string expr_text(const Node& e, int min_prec) {
  ExprWriter w;
  w.expr(e, min_prec);
  return std::move(w.out);
}

// Right-hand sides, return values and expression statements accept bare
// tuples and yield expressions.
std::string rhs_text(const Node& e) { return expr_text(e, kTuple); }

std::string target_text(const Node& t) {
  ExprWriter w;
  w.target(t);
  return std::move(w.out);
}

class StmtWriter {
 public:
  std::string out;

  void body(const Node& block, const std::string& indent) {
    for (const auto& s : block.children) stmt(*s, indent);
  }

  void line(const std::string& indent, const std::string& text) {
    out += indent;
    out += text;
    out += '\n';
  }

  void suite(const Node* block, const std::string& indent) {
    std::string inner = indent + "    ";
    if (!block || block->children.empty()) {
      line(inner, "pass");
      return;
    }
    body(*block, inner);
  }

  void stmt(const Node& s, const std::string& indent) {
    switch (s.kind) {
      case Kind::FunctionDef: {
        for (const auto& d : s.child(0)->children) line(indent, "@" + expr_text(*d, kNamed));
        ExprWriter w;
        w.arguments(*s.child(1));
        std::string head = std::string(s.flag ? "async " : "") + "def " + s.value + "(" + w.out + ")";
        if (s.child(2)) head += " -> " + expr_text(*s.child(2), kTest);
        line(indent, head + ":");
        suite(s.child(3), indent);
        break;
      }
      case Kind::ClassDef: {
        for (const auto& d : s.child(0)->children) line(indent, "@" + expr_text(*d, kNamed));
        std::string head = "class " + s.value;
        if (!s.child(1)->children.empty()) {
          ExprWriter w;
          w.call_args(*s.child(1));
          head += "(" + w.out + ")";
        }
        line(indent, head + ":");
        suite(s.child(2), indent);
        break;
      }
      case Kind::Return:
        line(indent, s.child(0) ? "return " + rhs_text(*s.child(0)) : "return");
        break;
      case Kind::Delete: {
        std::string text = "del ";
        for (std::size_t i = 0; i < s.children.size(); ++i) {
          if (i) text += ", ";
          text += target_text(*s.children[i]);
        }
        line(indent, text);
        break;
      }
      case Kind::Assign: {
        std::string text;
        for (std::size_t i = 0; i + 1 < s.children.size(); ++i) text += target_text(*s.children[i]) + " = ";
        text += rhs_text(*s.children.back());
        line(indent, text);
        break;
      }
      case Kind::AugAssign:
        line(indent, target_text(*s.child(0)) + " " + s.value + " " + rhs_text(*s.child(1)));
        break;
      case Kind::AnnAssign: {
        std::string text = expr_text(*s.child(0), kAtom) + ": " + expr_text(*s.child(1), kTest);
        if (s.child(2)) text += " = " + rhs_text(*s.child(2));
        line(indent, text);
        break;
      }
      case Kind::For:
        line(indent, std::string(s.flag ? "async " : "") + "for " + target_text(*s.child(0)) + " in " +
                         rhs_text(*s.child(1)) + ":");
        suite(s.child(2), indent);
        if (s.child(3)) {
          line(indent, "else:");
          suite(s.child(3), indent);
        }
        break;
      case Kind::While:
        line(indent, "while " + expr_text(*s.child(0), kNamed) + ":");
        suite(s.child(1), indent);
        if (s.child(2)) {
          line(indent, "else:");
          suite(s.child(2), indent);
        }
        break;
      case Kind::If:
        if_chain(s, indent, "if ");
        break;
      case Kind::With: {
        std::string text = std::string(s.flag ? "async " : "") + "with ";
        for (std::size_t i = 0; i + 1 < s.children.size(); ++i) {
          if (i) text += ", ";
          const Node& item = *s.children[i];
          text += expr_text(*item.child(0), kTest);
          if (item.child(1)) text += " as " + expr_text(*item.child(1), kBor);
        }
        line(indent, text + ":");
        suite(s.children.back().get(), indent);
        break;
      }
      case Kind::Try:
        line(indent, "try:");
        suite(s.child(0), indent);
        for (const auto& h : s.child(1)->children) {
          std::string text = "except";
          if (h->child(0)) text += " " + expr_text(*h->child(0), kTest);
          if (!h->value.empty()) text += " as " + h->value;
          line(indent, text + ":");
          suite(h->child(1), indent);
        }
        if (s.child(2)) {
          line(indent, "else:");
          suite(s.child(2), indent);
        }
        if (s.child(3)) {
          line(indent, "finally:");
          suite(s.child(3), indent);
        }
        break;
      case Kind::Raise: {
        std::string text = "raise";
        if (s.child(0)) text += " " + expr_text(*s.child(0), kTest);
        if (s.child(1)) text += " from " + expr_text(*s.child(1), kTest);
        line(indent, text);
        break;
      }
      case Kind::Assert: {
        std::string text = "assert " + expr_text(*s.child(0), kTest);
        if (s.child(1)) text += ", " + expr_text(*s.child(1), kTest);
        line(indent, text);
        break;
      }
      case Kind::Import: {
        std::string text = "import ";
        for (std::size_t i = 0; i < s.children.size(); ++i) {
          if (i) text += ", ";
          text += alias(*s.children[i]);
        }
        line(indent, text);
        break;
      }
      case Kind::ImportFrom: {
        std::string text = "from " + s.value + " import ";
        for (std::size_t i = 0; i < s.children.size(); ++i) {
          if (i) text += ", ";
          text += alias(*s.children[i]);
        }
        line(indent, text);
        break;
      }
      case Kind::Global:
      case Kind::Nonlocal: {
        std::string text = s.kind == Kind::Global ? "global " : "nonlocal ";
        for (std::size_t i = 0; i < s.names.size(); ++i) {
          if (i) text += ", ";
          text += s.names[i];
        }
        line(indent, text);
        break;
      }
      case Kind::ExprStmt:
        line(indent, rhs_text(*s.child(0)));
        break;
      case Kind::Pass:
        line(indent, "pass");
        break;
      case Kind::Break:
        line(indent, "break");
        break;
      case Kind::Continue:
        line(indent, "continue");
        break;
      default:
        throw std::logic_error("unparse: not a statement: " + std::string(kind_name(s.kind)));
    }
  }

  void if_chain(const Node& s, const std::string& indent, const std::string& keyword) {
    line(indent, keyword + expr_text(*s.child(0), kNamed) + ":");
    suite(s.child(1), indent);
    const Node* orelse = s.child(2);
    if (!orelse) return;
    if (orelse->children.size() == 1 && orelse->child(0)->kind == Kind::If && orelse->child(0)->flag) {
      if_chain(*orelse->child(0), indent, "elif ");
      return;
    }
    line(indent, "else:");
    suite(orelse, indent);
  }

  static std::string alias(const Node& a) {
    return a.extra.empty() ? a.value : a.value + " as " + a.extra;
  }
};

}  // namespace

std::string unparse_expr(const Node& expr) { return expr_text(expr, kTuple); }

std::string unparse_stmt(const Node& stmt, std::string_view indent) {
  StmtWriter w;
  w.stmt(stmt, std::string(indent));
  return std::move(w.out);
}

std::string unparse_body(const Node& body, std::string_view indent) {
  StmtWriter w;
  w.body(body, std::string(indent));
  return std::move(w.out);
}

}  // namespace reasonbench::py
