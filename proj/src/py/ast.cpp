#include "reasonbench/py/ast.hpp"

namespace reasonbench::py {

NodePtr Node::clone() const {
  auto n = std::make_unique<Node>(kind, value);
  n->extra = extra;
  n->names = names;
  n->ops = ops;
  n->flag = flag;
  n->line = line;
  n->col = col;
  n->end_line = end_line;
  n->end_col = end_col;
  n->first_token = first_token;
  n->last_token = last_token;
  n->children.reserve(children.size());
  for (const auto& c : children) n->children.push_back(c ? c->clone() : nullptr);
  return n;
}

bool is_statement(Kind k) {
  switch (k) {
    case Kind::FunctionDef:
    case Kind::ClassDef:
    case Kind::Return:
    case Kind::Delete:
    case Kind::Assign:
    case Kind::AugAssign:
    case Kind::AnnAssign:
    case Kind::For:
    case Kind::While:
    case Kind::If:
    case Kind::With:
    case Kind::Try:
    case Kind::Raise:
    case Kind::Assert:
    case Kind::Import:
    case Kind::ImportFrom:
    case Kind::Global:
    case Kind::Nonlocal:
    case Kind::ExprStmt:
    case Kind::Pass:
    case Kind::Break:
    case Kind::Continue:
      return true;
    default:
      return false;
  }
}

bool is_compound_statement(Kind k) {
  switch (k) {
    case Kind::FunctionDef:
    case Kind::ClassDef:
    case Kind::For:
    case Kind::While:
    case Kind::If:
    case Kind::With:
    case Kind::Try:
      return true;
    default:
      return false;
  }
}

std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::Module: return "Module";
    case Kind::Block: return "Block";
    case Kind::FunctionDef: return "FunctionDef";
    case Kind::ClassDef: return "ClassDef";
    case Kind::Decorators: return "Decorators";
    case Kind::Return: return "Return";
    case Kind::Delete: return "Delete";
    case Kind::Assign: return "Assign";
    case Kind::AugAssign: return "AugAssign";
    case Kind::AnnAssign: return "AnnAssign";
    case Kind::For: return "For";
    case Kind::While: return "While";
    case Kind::If: return "If";
    case Kind::With: return "With";
    case Kind::WithItem: return "WithItem";
    case Kind::Try: return "Try";
    case Kind::Handlers: return "Handlers";
    case Kind::ExceptHandler: return "ExceptHandler";
    case Kind::Raise: return "Raise";
    case Kind::Assert: return "Assert";
    case Kind::Import: return "Import";
    case Kind::ImportFrom: return "ImportFrom";
    case Kind::Alias: return "Alias";
    case Kind::Global: return "Global";
    case Kind::Nonlocal: return "Nonlocal";
    case Kind::ExprStmt: return "ExprStmt";
    case Kind::Pass: return "Pass";
    case Kind::Break: return "Break";
    case Kind::Continue: return "Continue";
    case Kind::BoolOp: return "BoolOp";
    case Kind::NamedExpr: return "NamedExpr";
    case Kind::BinOp: return "BinOp";
    case Kind::UnaryOp: return "UnaryOp";
    case Kind::Lambda: return "Lambda";
    case Kind::IfExp: return "IfExp";
    case Kind::Dict: return "Dict";
    case Kind::KeyValue: return "KeyValue";
    case Kind::Set: return "Set";
    case Kind::ListComp: return "ListComp";
    case Kind::SetComp: return "SetComp";
    case Kind::GeneratorExp: return "GeneratorExp";
    case Kind::DictComp: return "DictComp";
    case Kind::Comprehension: return "Comprehension";
    case Kind::Await: return "Await";
    case Kind::Yield: return "Yield";
    case Kind::YieldFrom: return "YieldFrom";
    case Kind::Compare: return "Compare";
    case Kind::Call: return "Call";
    case Kind::CallArgs: return "CallArgs";
    case Kind::Keyword: return "Keyword";
    case Kind::Number: return "Number";
    case Kind::String: return "String";
    case Kind::Constant: return "Constant";
    case Kind::Attribute: return "Attribute";
    case Kind::Subscript: return "Subscript";
    case Kind::Slice: return "Slice";
    case Kind::Starred: return "Starred";
    case Kind::DoubleStarred: return "DoubleStarred";
    case Kind::Name: return "Name";
    case Kind::List: return "List";
    case Kind::Tuple: return "Tuple";
    case Kind::Arguments: return "Arguments";
    case Kind::Arg: return "Arg";
  }
  return "?";
}

NodePtr make(Kind k, std::string value) { return std::make_unique<Node>(k, std::move(value)); }

NodePtr make_name(std::string id) { return make(Kind::Name, std::move(id)); }

NodePtr make_number(std::string text) { return make(Kind::Number, std::move(text)); }

NodePtr make_string(std::string literal_source) {
  auto n = make(Kind::String);
  n->names.push_back(std::move(literal_source));
  return n;
}

NodePtr make_call(NodePtr func, std::vector<NodePtr> args) {
  auto call = make(Kind::Call);
  auto call_args = make(Kind::CallArgs);
  call_args->children = std::move(args);
  call->children.push_back(std::move(func));
  call->children.push_back(std::move(call_args));
  return call;
}

NodePtr make_attr(NodePtr object, std::string attr) {
  auto n = make(Kind::Attribute, std::move(attr));
  n->children.push_back(std::move(object));
  return n;
}

NodePtr make_assign(NodePtr target, NodePtr value) {
  auto n = make(Kind::Assign);
  n->children.push_back(std::move(target));
  n->children.push_back(std::move(value));
  return n;
}

NodePtr make_expr_stmt(NodePtr value) {
  auto n = make(Kind::ExprStmt);
  n->children.push_back(std::move(value));
  return n;
}

NodePtr make_block(std::vector<NodePtr> statements) {
  auto n = make(Kind::Block);
  n->children = std::move(statements);
  return n;
}

void walk(const Node& root, const std::function<bool(const Node&)>& fn) {
  if (!fn(root)) return;
  for (const auto& c : root.children) {
    if (c) walk(*c, fn);
  }
}

void walk_mut(Node& root, const std::function<bool(Node&)>& fn) {
  if (!fn(root)) return;
  for (auto& c : root.children) {
    if (c) walk_mut(*c, fn);
  }
}

std::vector<Node*> blocks_of(const Node& stmt) {
  std::vector<Node*> out;
  switch (stmt.kind) {
    case Kind::Module:
    case Kind::Block:
      break;
    case Kind::Try:
      if (stmt.child(0)) out.push_back(stmt.child(0));
      for (const auto& h : stmt.child(1)->children) out.push_back(h->child(1));
      if (stmt.child(2)) out.push_back(stmt.child(2));
      if (stmt.child(3)) out.push_back(stmt.child(3));
      break;
    default:
      for (const auto& c : stmt.children) {
        if (c && c->kind == Kind::Block) out.push_back(c.get());
      }
  }
  return out;
}

}  // namespace reasonbench::py
