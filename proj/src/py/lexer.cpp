#include "reasonbench/py/lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace reasonbench::py {

namespace {

constexpr std::array<std::string_view, 35> kKeywords = {
    "False",  "None",   "True",    "and",      "as",       "assert", "async",
    "await",  "break",  "class",   "continue", "def",      "del",    "elif",
    "else",   "except", "finally", "for",      "from",     "global", "if",
    "import", "in",     "is",      "lambda",   "nonlocal", "not",    "or",
    "pass",   "raise",  "return",  "try",      "while",    "with",   "yield"};

constexpr std::array<std::string_view, 5> kOps3 = {"**=", "//=", "...", ">>=", "<<="};
constexpr std::array<std::string_view, 19> kOps2 = {
    "**", "//", "<<", ">>", "<=", ">=", "==", "!=", "->", ":=",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@="};
constexpr std::string_view kOps1 = "+-*/%@&|^~<>()[]{},:.;=";

bool ident_start(unsigned char c) {
  return std::isalpha(c) || c == '_' || c >= 0x80;
}
bool ident_char(unsigned char c) {
  return std::isalnum(c) || c == '_' || c >= 0x80;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    indents_.push_back(0);
    bool at_line_start = true;
    while (pos_ < src_.size()) {
      if (at_line_start) {
        at_line_start = false;
        if (depth_ == 0 && handle_indentation()) continue;
      }
      char c = src_[pos_];
      if (c == '\n' || c == '\r') {
        std::size_t start = pos_;
        int col = col_;
        consume_newline();
        if (depth_ == 0 && !line_is_blank_) {
          push(TokenKind::Newline, start, line_ - 1, col, "\n");
        } else {
          push(TokenKind::NL, start, line_ - 1, col, "\n");
        }
        line_is_blank_ = true;
        at_line_start = true;
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\f') {
        advance();
        continue;
      }
      if (c == '\\') {
        // explicit line joining
        std::size_t next = pos_ + 1;
        if (next < src_.size() && (src_[next] == '\n' || src_[next] == '\r')) {
          advance();
          consume_newline();
          continue;
        }
        throw ParseError(line_, col_, "unexpected character after line continuation");
      }
      if (c == '#') {
        lex_comment();
        continue;
      }
      line_is_blank_ = false;
      if (starts_string()) {
        lex_string();
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && pos_ + 1 < src_.size() &&
                  std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        lex_number();
      } else if (ident_start(static_cast<unsigned char>(c))) {
        lex_name();
      } else {
        lex_op();
      }
    }
    if (!line_is_blank_) {
      push(TokenKind::Newline, pos_, line_, col_, "");
    }
    if (depth_ > 0) throw ParseError(line_, col_, "unexpected EOF in multi-line statement");
    while (indents_.size() > 1) {
      indents_.pop_back();
      push(TokenKind::Dedent, pos_, line_, col_, "");
    }
    push(TokenKind::EndMarker, pos_, line_, col_, "");
    return std::move(tokens_);
  }

 private:
  void advance() {
    ++pos_;
    ++col_;
  }

  void consume_newline() {
    if (src_[pos_] == '\r' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') ++pos_;
    ++pos_;
    ++line_;
    col_ = 0;
  }

  void push(TokenKind kind, std::size_t begin, int line, int col, std::string text) {
    Token t;
    t.kind = kind;
    t.line = line;
    t.col = col;
    t.begin = begin;
    t.end = begin + (kind == TokenKind::Newline || kind == TokenKind::NL
                         ? (text.empty() ? 0 : 1)
                         : text.size());
    t.end_line = line;
    t.end_col = col + static_cast<int>(text.size());
    t.text = std::move(text);
    tokens_.push_back(std::move(t));
  }

  void push_span(TokenKind kind, std::size_t begin, int line, int col) {
    Token t;
    t.kind = kind;
    t.line = line;
    t.col = col;
    t.begin = begin;
    t.end = pos_;
    t.end_line = line_;
    t.end_col = col_;
    t.text = std::string(src_.substr(begin, pos_ - begin));
    tokens_.push_back(std::move(t));
  }

  // Returns true when the whole line was consumed (blank or comment-only).
  bool handle_indentation() {
    int width = 0;
    std::size_t p = pos_;
    while (p < src_.size()) {
      char c = src_[p];
      if (c == ' ') {
        ++width;
      } else if (c == '\t') {
        width = (width / 8 + 1) * 8;
      } else if (c == '\f') {
        width = 0;
      } else {
        break;
      }
      ++p;
    }
    if (p >= src_.size()) {
      col_ += static_cast<int>(p - pos_);
      pos_ = p;
      return true;
    }
    char c = src_[p];
    if (c == '\n' || c == '\r' || c == '#') {
      col_ += static_cast<int>(p - pos_);
      pos_ = p;
      line_is_blank_ = true;
      return false;  // newline or comment is lexed by the main loop as NL
    }
    col_ += static_cast<int>(p - pos_);
    pos_ = p;
    line_is_blank_ = false;
    if (width > indents_.back()) {
      indents_.push_back(width);
      push(TokenKind::Indent, pos_, line_, 0, "");
      tokens_.back().end = pos_;
    } else {
      while (width < indents_.back()) {
        indents_.pop_back();
        push(TokenKind::Dedent, pos_, line_, col_, "");
      }
      if (width != indents_.back()) {
        throw ParseError(line_, col_, "unindent does not match any outer indentation level");
      }
    }
    return false;
  }

  void lex_comment() {
    std::size_t begin = pos_;
    int col = col_;
    while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r') advance();
    push_span(TokenKind::Comment, begin, line_, col);
  }

  std::size_t prefix_length() const {
    std::size_t n = 0;
    while (n < 2 && pos_ + n < src_.size()) {
      char c = static_cast<char>(std::tolower(static_cast<unsigned char>(src_[pos_ + n])));
      if (c == 'r' || c == 'b' || c == 'u' || c == 'f') {
        ++n;
      } else {
        break;
      }
    }
    return n;
  }

  bool starts_string() const {
    std::size_t n = prefix_length();
    for (std::size_t k = 0; k <= n; ++k) {
      std::size_t q = pos_ + k;
      if (q < src_.size() && (src_[q] == '\'' || src_[q] == '"')) {
        // all chars before the quote must be prefix letters
        return true;
      }
    }
    return false;
  }

  void lex_string() {
    std::size_t begin = pos_;
    int line = line_;
    int col = col_;
    while (src_[pos_] != '\'' && src_[pos_] != '"') advance();
    char quote = src_[pos_];
    bool triple = pos_ + 2 < src_.size() && src_[pos_ + 1] == quote && src_[pos_ + 2] == quote;
    if (triple) {
      advance();
      advance();
      advance();
      for (;;) {
        if (pos_ >= src_.size()) throw ParseError(line, col, "unterminated triple-quoted string");
        char c = src_[pos_];
        if (c == '\\') {
          advance();
          if (pos_ < src_.size()) {
            if (src_[pos_] == '\n' || src_[pos_] == '\r') {
              consume_newline();
            } else {
              advance();
            }
          }
          continue;
        }
        if (c == '\n' || c == '\r') {
          consume_newline();
          continue;
        }
        if (c == quote && pos_ + 2 < src_.size() && src_[pos_ + 1] == quote &&
            src_[pos_ + 2] == quote) {
          advance();
          advance();
          advance();
          break;
        }
        advance();
      }
    } else {
      advance();
      for (;;) {
        if (pos_ >= src_.size()) throw ParseError(line, col, "unterminated string literal");
        char c = src_[pos_];
        if (c == '\\') {
          advance();
          if (pos_ < src_.size()) {
            if (src_[pos_] == '\n' || src_[pos_] == '\r') {
              consume_newline();
            } else {
              advance();
            }
          }
          continue;
        }
        if (c == '\n' || c == '\r') throw ParseError(line, col, "unterminated string literal");
        advance();
        if (c == quote) break;
      }
    }
    Token t;
    t.kind = TokenKind::String;
    t.line = line;
    t.col = col;
    t.begin = begin;
    t.end = pos_;
    t.end_line = line_;
    t.end_col = col_;
    t.text = std::string(src_.substr(begin, pos_ - begin));
    tokens_.push_back(std::move(t));
  }

  void lex_number() {
    std::size_t begin = pos_;
    int col = col_;
    auto digit_run = [&](auto pred) {
      while (pos_ < src_.size() && (pred(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        advance();
      }
    };
    auto is_dec = [](unsigned char c) { return std::isdigit(c) != 0; };
    if (src_[pos_] == '0' && pos_ + 1 < src_.size() &&
        std::string_view("xXoObB").find(src_[pos_ + 1]) != std::string_view::npos) {
      advance();
      advance();
      digit_run([](unsigned char c) { return std::isxdigit(c) != 0; });
    } else {
      digit_run(is_dec);
      if (pos_ < src_.size() && src_[pos_] == '.') {
        advance();
        digit_run(is_dec);
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        std::size_t save = pos_;
        int save_col = col_;
        advance();
        if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
        if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
          digit_run(is_dec);
        } else {
          pos_ = save;
          col_ = save_col;
        }
      }
      if (pos_ < src_.size() && (src_[pos_] == 'j' || src_[pos_] == 'J')) advance();
      auto text = src_.substr(begin, pos_ - begin);
      if (text.size() > 1 && text[0] == '0' && text.find_first_not_of("0_") != std::string_view::npos &&
          text.find_first_of(".eEjJ") == std::string_view::npos)
        throw ParseError(line_, col, "leading zeros in decimal integer literals are not permitted");
    }
    push_span(TokenKind::Number, begin, line_, col);
  }

  void lex_name() {
    std::size_t begin = pos_;
    int col = col_;
    while (pos_ < src_.size() && ident_char(static_cast<unsigned char>(src_[pos_]))) advance();
    push_span(TokenKind::Name, begin, line_, col);
  }

  void lex_op() {
    std::size_t begin = pos_;
    int col = col_;
    std::string_view rest = src_.substr(pos_);
    auto try_ops = [&](auto& ops, std::size_t len) {
      for (std::string_view op : ops) {
        if (op.size() == len && rest.substr(0, len) == op) return true;
      }
      return false;
    };
    std::size_t len = 0;
    if (rest.size() >= 3 && try_ops(kOps3, 3)) {
      len = 3;
    } else if (rest.size() >= 2 && try_ops(kOps2, 2)) {
      len = 2;
    } else if (kOps1.find(rest[0]) != std::string_view::npos) {
      len = 1;
    } else if (rest[0] == '!') {
      throw ParseError(line_, col_, "invalid syntax '!'");
    } else {
      throw ParseError(line_, col_, std::string("invalid character '") + rest[0] + "'");
    }
    char c = rest[0];
    if (len == 1) {
      if (c == '(' || c == '[' || c == '{') ++depth_;
      if (c == ')' || c == ']' || c == '}') {
        if (depth_ == 0) throw ParseError(line_, col_, std::string("unmatched '") + c + "'");
        --depth_;
      }
    }
    for (std::size_t i = 0; i < len; ++i) advance();
    push_span(TokenKind::Op, begin, line_, col);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 0;
  int depth_ = 0;
  bool line_is_blank_ = true;
  std::vector<int> indents_;
  std::vector<Token> tokens_;
};

}  // namespace

bool is_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

std::vector<Token> tokenize(std::string_view source) { return Lexer(source).run(); }

}  // namespace reasonbench::py
