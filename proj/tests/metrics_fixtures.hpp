#pragma once

#include <vector>

// Small programs with hand-counted metric values.
struct MetricFixture {
  const char* name;
  const char* source;
  int cc;
  int loc;
  int dep;
  int nc;
};

inline const std::vector<MetricFixture>& metric_fixtures() {
  static const std::vector<MetricFixture> kFixtures = {
      {"straight_line", "def f(x):\n    y = x + 1\n    return y * 2\n", 1, 3, 0, 0},
      {"sum_of_integer",
       "def sum_of_integer(N, A, B):\n    sum_1 = 0\n    for i in range(1, N + 1):\n        sum_order = 0\n"
       "        i_str = str(i)\n        n = len(i_str)\n        for j in range(0, n):\n"
       "            sum_order += int(i_str[j])\n        if A <= sum_order <= B:\n            sum_1 += i\n"
       "    return sum_1\n",
       4, 11, 0, 1},
      {"if_and", "def g(a, b):\n    if a and b:\n        return 1\n    return 0\n", 3, 4, 0, 0},
      {"for_if", "def h(xs):\n    total = 0\n    for x in xs:\n        if x > 0:\n            total += x\n    return total\n",
       3, 6, 0, 1},
      {"for_for_if",
       "def k(m):\n    c = 0\n    for i in range(m):\n        for j in range(i):\n"
       "            if (i + j) % 2 == 0 or i == j:\n                c += 1\n    return c\n",
       5, 7, 0, 2},
      {"flat_ifs", "def two(a):\n    if a > 1:\n        a -= 1\n    if a < -1:\n        a += 1\n    return a\n", 3, 6, 0, 0},
      {"call_chain",
       "class Chain:\n    def a(self):\n        return self.b() + 1\n\n    def b(self):\n        return self.c() * 2\n\n"
       "    def c(self):\n        return 3\n",
       1, 7, 2, 0},
      {"repeated_call",
       "class Twice:\n    def a(self, x):\n        if x:\n            return self.b(x) + self.b(x - 1)\n"
       "        return self.b(0)\n\n    def b(self, x):\n        return x\n",
       2, 7, 1, 0},
      {"docstring_and_comments",
       "def doc(x):\n    \"\"\"Multi-line\n    docstring that spans\n    three lines.\"\"\"\n    # a comment\n\n"
       "    return x  # trailing\n",
       1, 3, 0, 0},
      {"twelve_lines",
       "import math\n# helper for areas\n\ndef area(r):\n    return math.pi * r * r\n\ndef perimeter(r):\n"
       "    return 2 * math.pi * r\nPI2 = math.pi * 2\nx = area(1)\ny = perimeter(1)\nz = x + y\n",
       1, 9, 0, 0},
      {"handlers_ternary_filter",
       "def parse(items):\n    out = [int(s) for s in items if s and s.isdigit()]\n    try:\n        first = out[0]\n"
       "    except IndexError:\n        first = None\n    except (TypeError, ValueError):\n        first = -1\n"
       "    return first if first is not None else 0\n",
       6, 9, 0, 0},
      {"while_elif",
       "def collatz(n):\n    steps = 0\n    while n != 1:\n        if n % 2 == 0:\n            n //= 2\n"
       "        elif n % 3 == 0:\n            n = n // 3 * 2 + 1 if n > 3 else n - 1\n        else:\n"
       "            n = 3 * n + 1\n        steps += 1\n    return steps\n",
       5, 11, 0, 1},
      {"scope_boundary",
       "def outer(xs):\n    for x in xs:\n        def inner(y):\n            if y:\n                return y\n"
       "            return 0\n        inner(x)\n    return len(xs)\n",
       3, 8, 0, 0},
      {"grid_class",
       "class Grid:\n    def __init__(self, n):\n        self.n = n\n        self.cells = self.build(n)\n\n"
       "    def build(self, n):\n        return [[0] * n for _ in range(n)]\n\n    def count(self):\n"
       "        total = 0\n        for row in self.cells:\n            for v in row:\n                if v:\n"
       "                    total += 1\n                else:\n                    if Grid.check(v):\n"
       "                        total -= 1\n        return total\n\n    @staticmethod\n    def check(v):\n"
       "        return v is None\n",
       5, 19, 2, 3},
      {"stdio_while",
       "n = int(input())\ni = 0\nwhile True:\n    if i * i > n:\n        break\n    i += 1\nprint(i - 1)\n", 3, 7, 0, 1},
  };
  return kFixtures;
}
