#pragma once

// Small string helpers shared by the line-oriented file readers.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dialact::text {

std::string_view trim(std::string_view s) noexcept;

/// Splits on runs of ASCII whitespace.
std::vector<std::string_view> split_ws(std::string_view s);

/// Splits on a single delimiter character and trims each field.
std::vector<std::string_view> split_trimmed(std::string_view s, char delimiter);

/// Calls `fn(line_number, line)` for every line; strips a trailing '\r'.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (end == std::string_view::npos) {
      if (!line.empty()) fn(line_no, line);
      break;
    }
    fn(line_no, line);
    pos = end + 1;
  }
}

/// Whole-file read; throws ParseError (line 0) when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Shortest decimal form that round-trips (17 significant digits).
std::string format_double(double value);

/// Parse the whole field or return false.
bool parse_double(std::string_view field, double& out);
bool parse_uint(std::string_view field, unsigned long long& out);

}  // namespace dialact::text
