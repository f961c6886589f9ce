#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace reasonbench::py {

// Node kinds. Child slot layouts are fixed per kind; absent optional
// children are stored as null pointers so positions never shift.
enum class Kind {
  // containers
  Module,  // children: statements
  Block,   // children: statements

  // statements
  FunctionDef,    // value=name, flag=async; [Decorators, Arguments, returns?, Block]
  ClassDef,       // value=name; [Decorators, CallArgs(bases/keywords), Block]
  Decorators,     // children: expressions
  Return,         // [value?]
  Delete,         // children: targets
  Assign,         // children: targets..., value (last)
  AugAssign,      // value=op e.g. "+="; [target, value]
  AnnAssign,      // [target, annotation, value?]
  For,            // flag=async; [target, iter, Block, orelse Block?]
  While,          // [test, Block, orelse Block?]
  If,             // flag=elif; [test, Block, orelse Block?]
  With,           // flag=async; children: WithItem..., Block (last)
  WithItem,       // [context, vars?]
  Try,            // [Block, Handlers, orelse Block?, finally Block?]
  Handlers,       // children: ExceptHandler
  ExceptHandler,  // value=bound name or ""; [type?, Block]
  Raise,          // [exc?, cause?]
  Assert,         // [test, msg?]
  Import,         // children: Alias
  ImportFrom,     // value=module incl. leading dots; children: Alias
  Alias,          // value=name, extra=asname
  Global,         // names
  Nonlocal,       // names
  ExprStmt,       // [value]
  Pass,
  Break,
  Continue,

  // expressions
  BoolOp,         // value="and"/"or"; children: operands (>=2)
  NamedExpr,      // [target Name, value]
  BinOp,          // value=op; [left, right]
  UnaryOp,        // value="not"/"-"/"+"/"~"; [operand]
  Lambda,         // [Arguments, body]
  IfExp,          // [body, test, orelse]
  Dict,           // children: KeyValue | DoubleStarred
  KeyValue,       // [key, value]
  Set,            // children: elements
  ListComp,       // [elt, Comprehension...]
  SetComp,        // [elt, Comprehension...]
  GeneratorExp,   // [elt, Comprehension...]
  DictComp,       // [key, value, Comprehension...]
  Comprehension,  // flag=async; [target, iter, ifs...]
  Await,          // [value]
  Yield,          // [value?]
  YieldFrom,      // [value]
  Compare,        // ops; children: operands (ops.size()+1)
  Call,           // [func, CallArgs]
  CallArgs,       // children: expr | Starred | Keyword | DoubleStarred
  Keyword,        // value=arg name; [value]
  Number,         // value=source text
  String,         // names=source text of each concatenated literal
  Constant,       // value="True"/"False"/"None"/"..."
  Attribute,      // value=attr; [object]
  Subscript,      // [object, index]
  Slice,          // [lower?, upper?, step?]
  Starred,        // [value]
  DoubleStarred,  // [value]
  Name,           // value=identifier
  List,           // children: elements
  Tuple,          // flag=parenthesized in source; children: elements
  Arguments,      // children: Arg
  Arg,            // value=name, extra=""|"*"|"**"|"/"; [annotation?, default?]
};

struct Node;
using NodePtr = std::unique_ptr<Node>;

struct Node {
  Kind kind;
  std::string value;
  std::string extra;
  std::vector<std::string> names;  // String pieces, Global/Nonlocal names
  std::vector<std::string> ops;    // Compare operators
  bool flag = false;
  std::vector<NodePtr> children;

  // Source extent, 1-based lines / 0-based byte columns; zero for
  // synthesized nodes.
  int line = 0;
  int col = 0;
  int end_line = 0;
  int end_col = 0;
  // Token index range [first_token, last_token] for parsed statements.
  int first_token = -1;
  int last_token = -1;

  explicit Node(Kind k) : kind(k) {}
  Node(Kind k, std::string v) : kind(k), value(std::move(v)) {}

  Node* child(std::size_t i) const {
    return i < children.size() ? children[i].get() : nullptr;
  }
  NodePtr clone() const;
};

bool is_statement(Kind k);
bool is_compound_statement(Kind k);
std::string_view kind_name(Kind k);

// Builders for synthesized trees.
NodePtr make(Kind k, std::string value = {});
NodePtr make_name(std::string id);
NodePtr make_number(std::string text);
NodePtr make_string(std::string literal_source);
NodePtr make_call(NodePtr func, std::vector<NodePtr> args);
NodePtr make_attr(NodePtr object, std::string attr);
NodePtr make_assign(NodePtr target, NodePtr value);
NodePtr make_expr_stmt(NodePtr value);
NodePtr make_block(std::vector<NodePtr> statements);

/// Visits every node in pre-order. Returning false from the callback
/// skips the node's children.
void walk(const Node& root, const std::function<bool(const Node&)>& fn);
void walk_mut(Node& root, const std::function<bool(Node&)>& fn);

/// Statement bodies (Blocks) directly owned by a statement, in source order.
std::vector<Node*> blocks_of(const Node& stmt);

}  // namespace reasonbench::py
