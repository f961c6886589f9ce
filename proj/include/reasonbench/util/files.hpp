#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace reasonbench {

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a half-written stage output.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Splits on '\n'; a trailing newline does not produce an empty last line.
std::vector<std::string> split_lines(std::string_view text);

}  // namespace reasonbench
