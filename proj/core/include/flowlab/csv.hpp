#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flowlab::csv {

/// A parsed comma-separated file with a mandatory header row. Fields may be
/// double-quoted; embedded quotes are written as "".
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based source line of each row (header is line 1).
  std::vector<std::size_t> line_numbers;

  [[nodiscard]] std::optional<std::size_t> column(std::string_view name) const;
};

/// Throws flowlab::Error("csv", "ReadFailed") if the file cannot be opened or
/// has no header.
[[nodiscard]] Table read(const std::filesystem::path& path);
[[nodiscard]] Table parse(std::string_view text);

[[nodiscard]] std::vector<std::string> split_line(std::string_view line);

/// Shortest decimal form that round-trips to the same double.
[[nodiscard]] std::string format_double(double v);

/// Strict numeric parse of a whole field.
[[nodiscard]] std::optional<double> parse_double(std::string_view field);

/// Writes `text` to `path`, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view text);

}  // namespace flowlab::csv
