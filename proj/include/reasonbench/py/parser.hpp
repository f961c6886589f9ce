#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "reasonbench/py/ast.hpp"
#include "reasonbench/py/lexer.hpp"

namespace reasonbench::py {

/// A parsed module together with the token stream it came from. Statement
/// nodes carry token indices into `tokens`, which is what lets rewrites
/// splice text back into the original source.
struct ParsedModule {
  std::string source;
  std::vector<Token> tokens;
  NodePtr module;
};

/// Parses a complete Python 3 module. Throws ParseError.
ParsedModule parse_module(std::string_view source);

/// Parses a single expression (surrounding whitespace allowed).
NodePtr parse_expression(std::string_view source);

/// True when `source` is a syntactically valid module.
bool parses(std::string_view source);

}  // namespace reasonbench::py
