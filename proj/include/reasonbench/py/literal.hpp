#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reasonbench::py {

/// A Python value that can be written as a literal.
struct Value {
  enum class Type { None, Bool, Int, Float, Complex, Str, Bytes, Ellipsis, List, Tuple, Set, Dict };

  Type type = Type::None;
  std::string repr;  // canonical rendering of scalars
  double number = 0.0;
  std::vector<Value> items;  // Dict entries are stored as key, value, key, value...
};

/// Parses a Python literal expression (numbers, strings, bytes, booleans,
/// None, and list/tuple/set/dict displays nesting them). Returns nullopt
/// for anything else, including f-strings and names.
std::optional<Value> parse_literal(std::string_view text);

/// The repr() Python would print for `value`, except that set elements and
/// dict entries are ordered by their own rendering.
std::string render(const Value& value);

/// Canonical form used for every output comparison: the rendered literal
/// when `text` parses as one, otherwise the text with surrounding
/// whitespace removed.
std::string canonicalize(std::string_view text);

/// Structural equality with relative tolerance on floats. With
/// float_rel_tol == 0 this is equality of canonical renderings.
bool values_equal(std::string_view a, std::string_view b, double float_rel_tol = 0.0);

/// repr() of a Python float.
std::string float_repr(double x);

/// repr() of a Python str.
std::string str_repr(std::string_view utf8);

/// Code points of a UTF-8 string; invalid bytes decode as themselves.
std::vector<std::uint32_t> code_points(std::string_view utf8);

}  // namespace reasonbench::py
