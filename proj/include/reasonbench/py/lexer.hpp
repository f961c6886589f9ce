#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace reasonbench::py {

/// Raised for any lexical or syntactic error in subject source.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int col, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ":" +
                           std::to_string(col) + ": " + message),
        line_(line),
        col_(col) {}

  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

enum class TokenKind {
  Name,
  Number,
  String,
  Op,
  Newline,  // end of a logical line
  NL,       // non-logical newline (blank line, inside brackets)
  Comment,
  Indent,
  Dedent,
  EndMarker,
};

struct Token {
  TokenKind kind;
  std::string text;
  int line = 0;  // 1-based
  int col = 0;   // 0-based byte column
  int end_line = 0;
  int end_col = 0;
  std::size_t begin = 0;  // byte offsets into the source
  std::size_t end = 0;

  bool is_op(std::string_view op) const {
    return kind == TokenKind::Op && text == op;
  }
  bool is_name(std::string_view name) const {
    return kind == TokenKind::Name && text == name;
  }
};

/// Tokenizes Python 3 source. Comments and NL tokens are kept so callers
/// can reason about physical lines; the parser skips them.
std::vector<Token> tokenize(std::string_view source);

bool is_keyword(std::string_view word);

}  // namespace reasonbench::py
