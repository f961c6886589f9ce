#pragma once

#include <string>
#include <string_view>

#include "reasonbench/py/ast.hpp"

namespace reasonbench::py {

/// Renders an expression as valid Python source, inserting parentheses only
/// where precedence requires them.
std::string unparse_expr(const Node& expr);

/// Renders a statement (including nested blocks). Every emitted line starts
/// with `indent`; nested blocks add four spaces. Output ends with a newline.
std::string unparse_stmt(const Node& stmt, std::string_view indent = "");

/// Renders all statements of a Module or Block.
std::string unparse_body(const Node& body, std::string_view indent = "");

}  // namespace reasonbench::py
