#pragma once

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace test_support {

inline std::filesystem::path temp_dir() {
  static std::filesystem::path dir = [] {
    std::random_device rd;
    auto p = std::filesystem::temp_directory_path() / ("rbtest_" + std::to_string(rd()));
    std::filesystem::create_directories(p);
    return p;
  }();
  return dir;
}

inline std::string write_temp(const std::string& name, const std::string& content) {
  auto p = temp_dir() / name;
  std::ofstream(p, std::ios::binary) << content;
  return p.string();
}

inline std::string capture(const std::string& cmd, int* status = nullptr) {
  std::string out;
  FILE* f = popen(cmd.c_str(), "r");
  if (!f) return out;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), f)) > 0) out.append(buf.data(), n);
  int st = pclose(f);
  if (status) *status = st;
  return out;
}

inline bool python_available() {
  static bool ok = std::system("python3 -c 'pass' >/dev/null 2>&1") == 0;
  return ok;
}

inline std::vector<std::string> run_python_lines(const std::string& script) {
  static int counter = 0;
  auto path = write_temp("script_" + std::to_string(counter++) + ".py", script);
  std::istringstream in(capture("python3 " + path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

inline std::string python_ast_dump(const std::string& source) {
  static int counter = 0;
  auto path = write_temp("ast_src_" + std::to_string(counter++) + ".py", source);
  return capture("python3 -c 'import ast,sys; print(ast.dump(ast.parse(open(sys.argv[1]).read())))' " + path +
                 " 2>&1");
}

inline bool same_python_ast(const std::string& a, const std::string& b) {
  auto da = python_ast_dump(a);
  return !da.empty() && da.rfind("Traceback", 0) != 0 && da == python_ast_dump(b);
}

inline bool python_parses(const std::string& source) {
  static int counter = 0;
  auto path = write_temp("parse_" + std::to_string(counter++) + ".py", source);
  int status = 0;
  capture("python3 -c 'import ast,sys; ast.parse(open(sys.argv[1]).read())' " + path + " 2>/dev/null", &status);
  return status == 0;
}

inline std::string hex_float(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

}  // namespace test_support
