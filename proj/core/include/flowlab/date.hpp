#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace flowlab {

/// Calendar date at day resolution.
using Date = std::chrono::sys_days;

/// Parses a strict ISO-8601 calendar date (YYYY-MM-DD). Returns nullopt on
/// malformed input or an impossible date such as 2021-02-30.
[[nodiscard]] std::optional<Date> parse_date(std::string_view text);

[[nodiscard]] std::string format_date(Date d);

[[nodiscard]] int calendar_year(Date d);

[[nodiscard]] bool is_weekday(Date d);

/// First weekday on or after `d`.
[[nodiscard]] Date next_weekday(Date d);

}  // namespace flowlab
