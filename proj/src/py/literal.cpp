#include "reasonbench/py/literal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>

#include "reasonbench/py/parser.hpp"

namespace reasonbench::py {

namespace {

// ---- integers -------------------------------------------------------------

// Converts digits in `base` to a decimal string using base-1e9 limbs.
std::string to_decimal(std::string_view digits, int base) {
  std::vector<std::uint32_t> limbs{0};  // little-endian, base 1e9
  for (char ch : digits) {
    int d;
    if (ch >= '0' && ch <= '9') {
      d = ch - '0';
    } else if (ch >= 'a' && ch <= 'f') {
      d = ch - 'a' + 10;
    } else if (ch >= 'A' && ch <= 'F') {
      d = ch - 'A' + 10;
    } else {
      continue;
    }
    std::uint64_t carry = static_cast<std::uint64_t>(d);
    for (auto& limb : limbs) {
      std::uint64_t v = static_cast<std::uint64_t>(limb) * static_cast<std::uint64_t>(base) + carry;
      limb = static_cast<std::uint32_t>(v % 1000000000ULL);
      carry = v / 1000000000ULL;
    }
    while (carry) {
      limbs.push_back(static_cast<std::uint32_t>(carry % 1000000000ULL));
      carry /= 1000000000ULL;
    }
  }
  std::string out = std::to_string(limbs.back());
  for (std::size_t i = limbs.size() - 1; i-- > 0;) {
    std::string part = std::to_string(limbs[i]);
    out += std::string(9 - part.size(), '0') + part;
  }
  return out;
}

std::string strip_underscores(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c != '_') out += c;
  }
  return out;
}

// ---- floats ---------------------------------------------------------------

// Shortest round-trip digits and decimal point position:
// |x| = 0.DIGITS * 10^decpt
void shortest_digits(double x, std::string& digits, int& decpt) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, std::fabs(x), std::chars_format::scientific);
  std::string_view s(buf, static_cast<std::size_t>(res.ptr - buf));
  auto e = s.find('e');
  digits.clear();
  for (char c : s.substr(0, e)) {
    if (c != '.') digits += c;
  }
  int exponent = std::atoi(std::string(s.substr(e + 1)).c_str());
  decpt = exponent + 1;
  while (digits.size() > 1 && digits.back() == '0') digits.pop_back();
}

std::string float_repr_impl(double x, bool add_dot_zero) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x < 0 ? "-inf" : "inf";
  std::string digits;
  int decpt;
  shortest_digits(x, digits, decpt);
  std::string out = std::signbit(x) ? "-" : "";
  int n = static_cast<int>(digits.size());
  if (decpt > -4 && decpt <= 16) {
    if (decpt <= 0) {
      out += "0." + std::string(static_cast<std::size_t>(-decpt), '0') + digits;
    } else if (decpt < n) {
      out += digits.substr(0, static_cast<std::size_t>(decpt)) + "." + digits.substr(static_cast<std::size_t>(decpt));
    } else {
      out += digits + std::string(static_cast<std::size_t>(decpt - n), '0');
      if (add_dot_zero) out += ".0";
    }
    return out;
  }
  out += digits.substr(0, 1);
  if (n > 1) out += "." + digits.substr(1);
  int exp = decpt - 1;
  out += exp < 0 ? "e-" : "e+";
  std::string e = std::to_string(std::abs(exp));
  if (e.size() < 2) e = "0" + e;
  return out + e;
}

// ---- strings --------------------------------------------------------------

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::vector<std::uint32_t> decode_utf8(std::string_view s) {
  std::vector<std::uint32_t> cps;
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    std::uint32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
    for (int k = 1; k < len && i + static_cast<std::size_t>(k) < s.size(); ++k) {
      cp = (cp << 6) | (static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]) & 0x3F);
    }
    cps.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return cps;
}

std::string hex_escape(std::uint32_t v, int width, char tag) {
  static const char* kHex = "0123456789abcdef";
  std::string out = "\\";
  out += tag;
  for (int shift = (width - 1) * 4; shift >= 0; shift -= 4) out += kHex[(v >> shift) & 0xF];
  return out;
}

bool is_printable(std::uint32_t cp) {
  if (cp < 0x20 || cp == 0x7F) return false;
  if (cp >= 0x80 && cp < 0xA0) return false;
  if (cp == 0xAD) return false;
  if (cp >= 0xD800 && cp < 0xE000) return false;
  if (cp == 0x2028 || cp == 0x2029) return false;
  return true;
}

char choose_quote(bool has_single, bool has_double) {
  return (has_single && !has_double) ? '"' : '\'';
}

std::string bytes_repr(std::string_view bytes) {
  bool single = bytes.find('\'') != std::string_view::npos;
  bool dbl = bytes.find('"') != std::string_view::npos;
  char q = choose_quote(single, dbl);
  std::string out = "b";
  out += q;
  for (char ch : bytes) {
    auto c = static_cast<unsigned char>(ch);
    if (c == '\\') {
      out += "\\\\";
    } else if (c == static_cast<unsigned char>(q)) {
      out += '\\';
      out += q;
    } else if (c == '\t') {
      out += "\\t";
    } else if (c == '\n') {
      out += "\\n";
    } else if (c == '\r') {
      out += "\\r";
    } else if (c < 0x20 || c >= 0x7F) {
      out += hex_escape(c, 2, 'x');
    } else {
      out += static_cast<char>(c);
    }
  }
  out += q;
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// Decodes one string literal token. Returns false for f-strings or bad escapes.
bool decode_string_token(std::string_view tok, std::string& out, bool& is_bytes) {
  std::size_t p = 0;
  bool raw = false;
  is_bytes = false;
  while (p < tok.size() && tok[p] != '\'' && tok[p] != '"') {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(tok[p])));
    if (c == 'r') raw = true;
    if (c == 'b') is_bytes = true;
    if (c == 'f') return false;
    ++p;
  }
  char q = tok[p];
  std::size_t qlen = (tok.size() - p >= 6 && tok[p + 1] == q && tok[p + 2] == q) ? 3 : 1;
  std::string_view body = tok.substr(p + qlen, tok.size() - p - 2 * qlen);
  out.clear();
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (c != '\\' || raw) {
      if (c == '\\' && raw && i + 1 < body.size()) {
        out += c;
        out += body[++i];
        continue;
      }
      out += c;
      continue;
    }
    if (++i >= body.size()) return false;
    char e = body[i];
    switch (e) {
      case '\n': break;
      case '\\': out += '\\'; break;
      case '\'': out += '\''; break;
      case '"': out += '"'; break;
      case 'a': out += '\a'; break;
      case 'b': out += '\b'; break;
      case 'f': out += '\f'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case 't': out += '\t'; break;
      case 'v': out += '\v'; break;
      case 'x': {
        int h1 = i + 1 < body.size() ? hex_value(body[i + 1]) : -1;
        int h2 = i + 2 < body.size() ? hex_value(body[i + 2]) : -1;
        if (h1 < 0 || h2 < 0) return false;
        auto v = static_cast<std::uint32_t>(h1 * 16 + h2);
        if (is_bytes) {
          out += static_cast<char>(v);
        } else {
          append_utf8(out, v);
        }
        i += 2;
        break;
      }
      case 'u':
      case 'U': {
        if (is_bytes) {
          out += '\\';
          out += e;
          break;
        }
        int width = e == 'u' ? 4 : 8;
        std::uint32_t v = 0;
        for (int k = 1; k <= width; ++k) {
          if (i + static_cast<std::size_t>(k) >= body.size()) return false;
          int h = hex_value(body[i + static_cast<std::size_t>(k)]);
          if (h < 0) return false;
          v = v * 16 + static_cast<std::uint32_t>(h);
        }
        append_utf8(out, v);
        i += static_cast<std::size_t>(width);
        break;
      }
      default:
        if (e >= '0' && e <= '7') {
          std::uint32_t v = 0;
          int k = 0;
          while (k < 3 && i < body.size() && body[i] >= '0' && body[i] <= '7') {
            v = v * 8 + static_cast<std::uint32_t>(body[i] - '0');
            ++i;
            ++k;
          }
          --i;
          if (is_bytes) {
            out += static_cast<char>(v & 0xFF);
          } else {
            append_utf8(out, v);
          }
        } else if (e == 'N') {
          return false;  // named unicode escapes are not supported
        } else {
          out += '\\';
          out += e;
        }
    }
  }
  return true;
}

// ---- AST to Value ---------------------------------------------------------

std::optional<Value> number_value(const std::string& text) {
  std::string t = strip_underscores(text);
  Value v;
  if (!t.empty() && (t.back() == 'j' || t.back() == 'J')) {
    v.type = Value::Type::Complex;
    double imag = std::strtod(t.substr(0, t.size() - 1).c_str(), nullptr);
    v.number = imag;
    v.repr = float_repr_impl(imag, false) + "j";
    return v;
  }
  if (t.size() > 1 && t[0] == '0' &&
      (t[1] == 'x' || t[1] == 'X' || t[1] == 'o' || t[1] == 'O' || t[1] == 'b' || t[1] == 'B')) {
    int base = (t[1] == 'x' || t[1] == 'X') ? 16 : (t[1] == 'o' || t[1] == 'O') ? 8 : 2;
    v.type = Value::Type::Int;
    v.repr = to_decimal(t.substr(2), base);
    v.number = std::strtod(v.repr.c_str(), nullptr);
    return v;
  }
  if (t.find_first_of(".eE") != std::string::npos) {
    v.type = Value::Type::Float;
    v.number = std::strtod(t.c_str(), nullptr);
    v.repr = float_repr_impl(v.number, true);
    return v;
  }
  v.type = Value::Type::Int;
  v.repr = to_decimal(t, 10);
  v.number = std::strtod(v.repr.c_str(), nullptr);
  return v;
}

std::optional<Value> negate(Value v) {
  switch (v.type) {
    case Value::Type::Int:
      if (v.repr != "0") v.repr = v.repr[0] == '-' ? v.repr.substr(1) : "-" + v.repr;
      v.number = -v.number;
      return v;
    case Value::Type::Float:
      v.number = -v.number;
      v.repr = float_repr_impl(v.number, true);
      return v;
    case Value::Type::Bool:
      v.type = Value::Type::Int;
      v.number = -v.number;
      v.repr = v.number == 0 ? "0" : "-1";
      return v;
    default:
      return std::nullopt;
  }
}

std::optional<Value> from_ast(const Node& n) {
  Value v;
  switch (n.kind) {
    case Kind::Number:
      return number_value(n.value);
    case Kind::String: {
      std::string all;
      bool first = true;
      bool bytes_mode = false;
      for (const auto& piece : n.names) {
        std::string decoded;
        bool is_bytes;
        if (!decode_string_token(piece, decoded, is_bytes)) return std::nullopt;
        if (!first && is_bytes != bytes_mode) return std::nullopt;
        bytes_mode = is_bytes;
        first = false;
        all += decoded;
      }
      v.type = bytes_mode ? Value::Type::Bytes : Value::Type::Str;
      v.repr = bytes_mode ? bytes_repr(all) : str_repr(all);
      return v;
    }
    case Kind::Constant:
      if (n.value == "None") {
        v.type = Value::Type::None;
        v.repr = "None";
      } else if (n.value == "True" || n.value == "False") {
        v.type = Value::Type::Bool;
        v.repr = n.value;
        v.number = n.value == "True" ? 1 : 0;
      } else {
        v.type = Value::Type::Ellipsis;
        v.repr = "Ellipsis";
      }
      return v;
    case Kind::Name:
      if (n.value == "inf" || n.value == "nan") {
        v.type = Value::Type::Float;
        v.number = n.value == "inf" ? HUGE_VAL : std::nan("");
        v.repr = n.value;
        return v;
      }
      if (n.value == "Ellipsis") {
        v.type = Value::Type::Ellipsis;
        v.repr = "Ellipsis";
        return v;
      }
      return std::nullopt;
    case Kind::UnaryOp: {
      auto inner = from_ast(*n.child(0));
      if (!inner) return std::nullopt;
      if (n.value == "-") return negate(*inner);
      if (n.value == "+" && (inner->type == Value::Type::Int || inner->type == Value::Type::Float)) {
        return inner;
      }
      return std::nullopt;
    }
    case Kind::BinOp: {
      if (n.value != "+" && n.value != "-") return std::nullopt;
      auto left = from_ast(*n.child(0));
      auto right = from_ast(*n.child(1));
      if (!left || !right || right->type != Value::Type::Complex) return std::nullopt;
      if (left->type != Value::Type::Int && left->type != Value::Type::Float) return std::nullopt;
      double imag = n.value == "-" ? -right->number : right->number;
      v.type = Value::Type::Complex;
      v.number = imag;
      std::string re = float_repr_impl(left->number, false);
      std::string im = float_repr_impl(imag, false);
      if (im[0] != '-') im = "+" + im;
      v.repr = "(" + re + im + "j)";
      return v;
    }
    case Kind::List:
    case Kind::Tuple:
    case Kind::Set:
      v.type = n.kind == Kind::List ? Value::Type::List : n.kind == Kind::Tuple ? Value::Type::Tuple : Value::Type::Set;
      for (const auto& c : n.children) {
        auto item = from_ast(*c);
        if (!item) return std::nullopt;
        v.items.push_back(std::move(*item));
      }
      return v;
    case Kind::Dict:
      v.type = Value::Type::Dict;
      for (const auto& c : n.children) {
        if (c->kind != Kind::KeyValue) return std::nullopt;
        auto key = from_ast(*c->child(0));
        auto val = from_ast(*c->child(1));
        if (!key || !val) return std::nullopt;
        v.items.push_back(std::move(*key));
        v.items.push_back(std::move(*val));
      }
      return v;
    case Kind::Call: {
      const Node* f = n.child(0);
      if (f->kind == Kind::Name && f->value == "set" && n.child(1)->children.empty()) {
        v.type = Value::Type::Set;
        return v;
      }
      return std::nullopt;
    }
    default:
      return std::nullopt;
  }
}

bool floats_close(double a, double b, double tol) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  if (a == b) return true;
  return std::fabs(a - b) <= tol * std::max(std::fabs(a), std::fabs(b));
}

std::vector<std::pair<std::string, const Value*>> sorted_items(const Value& v) {
  std::vector<std::pair<std::string, const Value*>> out;
  for (const auto& item : v.items) out.emplace_back(render(item), &item);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

bool close_equal(const Value& a, const Value& b, double tol) {
  if (a.type != b.type) return false;
  switch (a.type) {
    case Value::Type::Float:
      return floats_close(a.number, b.number, tol);
    case Value::Type::List:
    case Value::Type::Tuple:
      if (a.items.size() != b.items.size()) return false;
      for (std::size_t i = 0; i < a.items.size(); ++i) {
        if (!close_equal(a.items[i], b.items[i], tol)) return false;
      }
      return true;
    case Value::Type::Set: {
      auto sa = sorted_items(a);
      auto sb = sorted_items(b);
      if (sa.size() != sb.size()) return false;
      for (std::size_t i = 0; i < sa.size(); ++i) {
        if (!close_equal(*sa[i].second, *sb[i].second, tol)) return false;
      }
      return true;
    }
    case Value::Type::Dict:
      return render(a) == render(b) || [&] {
        if (a.items.size() != b.items.size()) return false;
        for (std::size_t i = 0; i < a.items.size(); i += 2) {
          bool found = false;
          for (std::size_t j = 0; j < b.items.size(); j += 2) {
            if (render(a.items[i]) == render(b.items[j])) {
              found = close_equal(a.items[i + 1], b.items[j + 1], tol);
              break;
            }
          }
          if (!found) return false;
        }
        return true;
      }();
    default:
      return a.repr == b.repr;
  }
}

}  // namespace

std::string float_repr(double x) { return float_repr_impl(x, true); }

std::string str_repr(std::string_view utf8) {
  auto cps = decode_utf8(utf8);
  bool single = false;
  bool dbl = false;
  for (auto cp : cps) {
    single = single || cp == '\'';
    dbl = dbl || cp == '"';
  }
  char q = choose_quote(single, dbl);
  std::string out(1, q);
  for (auto cp : cps) {
    if (cp == '\\') {
      out += "\\\\";
    } else if (cp == static_cast<std::uint32_t>(q)) {
      out += '\\';
      out += q;
    } else if (cp == '\t') {
      out += "\\t";
    } else if (cp == '\n') {
      out += "\\n";
    } else if (cp == '\r') {
      out += "\\r";
    } else if (is_printable(cp)) {
      append_utf8(out, cp);
    } else if (cp < 0x100) {
      out += hex_escape(cp, 2, 'x');
    } else if (cp < 0x10000) {
      out += hex_escape(cp, 4, 'u');
    } else {
      out += hex_escape(cp, 8, 'U');
    }
  }
  out += q;
  return out;
}

std::optional<Value> parse_literal(std::string_view text) {
  try {
    auto node = parse_expression(text);
    return from_ast(*node);
  } catch (const ParseError&) {
    return std::nullopt;
  }
}

std::string render(const Value& v) {
  switch (v.type) {
    case Value::Type::List:
    case Value::Type::Tuple: {
      std::string out = v.type == Value::Type::List ? "[" : "(";
      for (std::size_t i = 0; i < v.items.size(); ++i) {
        if (i) out += ", ";
        out += render(v.items[i]);
      }
      if (v.type == Value::Type::Tuple && v.items.size() == 1) out += ',';
      out += v.type == Value::Type::List ? "]" : ")";
      return out;
    }
    case Value::Type::Set: {
      if (v.items.empty()) return "set()";
      std::vector<std::string> parts;
      for (const auto& item : v.items) parts.push_back(render(item));
      std::sort(parts.begin(), parts.end());
      parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
      std::string out = "{";
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ", ";
        out += parts[i];
      }
      return out + "}";
    }
    case Value::Type::Dict: {
      // later duplicates win, as in a dict display
      std::vector<std::pair<std::string, std::string>> entries;
      for (std::size_t i = 0; i + 1 < v.items.size(); i += 2) {
        std::string key = render(v.items[i]);
        std::string val = render(v.items[i + 1]);
        auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.first == key; });
        if (it != entries.end()) {
          it->second = val;
        } else {
          entries.emplace_back(std::move(key), std::move(val));
        }
      }
      std::sort(entries.begin(), entries.end());
      std::string out = "{";
      for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i) out += ", ";
        out += entries[i].first + ": " + entries[i].second;
      }
      return out + "}";
    }
    default:
      return v.repr;
  }
}

std::string canonicalize(std::string_view text) {
  if (auto v = parse_literal(text)) return render(*v);
  std::size_t b = text.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  std::size_t e = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(b, e - b + 1));
}

bool values_equal(std::string_view a, std::string_view b, double float_rel_tol) {
  auto va = parse_literal(a);
  auto vb = parse_literal(b);
  if (!va || !vb) return canonicalize(a) == canonicalize(b);
  if (float_rel_tol <= 0.0) return render(*va) == render(*vb);
  return close_equal(*va, *vb, float_rel_tol);
}

std::vector<std::uint32_t> code_points(std::string_view utf8) { return decode_utf8(utf8); }

}  // namespace reasonbench::py
