#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>

namespace hrv::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over `path`, so readers never
// observe a partially written output.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Calls `fn(line, line_number)` for each line (1-based), stripping a trailing
// '\r'. Blank lines are skipped.
void for_each_line(std::istream& in,
                   const std::function<void(std::string_view, std::size_t)>& fn);

}  // namespace hrv::io
