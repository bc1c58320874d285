#include "flowlab/flows.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "flowlab/csv.hpp"
#include "flowlab/error.hpp"

namespace flowlab::panel {

std::string_view normalizer_name(FlowNormalizer n) {
  switch (n) {
    case FlowNormalizer::Raw:
      return "raw";
    case FlowNormalizer::MatchedFilter:
      return "matched";
    case FlowNormalizer::ZScore:
      return "zscore";
  }
  return "unknown";
}

std::optional<FlowNormalizer> parse_normalizer(std::string_view name) {
  if (name == "raw") return FlowNormalizer::Raw;
  if (name == "matched" || name == "matched_filter") return FlowNormalizer::MatchedFilter;
  if (name == "zscore") return FlowNormalizer::ZScore;
  return std::nullopt;
}

namespace {

// Normalized series for one (ticker, group); nullopt where undefined.
std::vector<std::optional<double>> normalize_series(std::span<const PanelRecord> history,
                                                    InvestorGroup g, const NormalizerSpec& spec) {
  std::vector<double> raw(history.size());
  for (std::size_t t = 0; t < history.size(); ++t) raw[t] = history[t].net_buy(g);

  std::vector<std::optional<double>> out(history.size());
  switch (spec.method) {
    case FlowNormalizer::Raw:
      for (std::size_t t = 0; t < raw.size(); ++t) out[t] = raw[t];
      break;
    case FlowNormalizer::MatchedFilter:
      for (std::size_t t = 0; t < raw.size(); ++t) {
        out[t] = filters::matched_filter(raw[t], history[t].market_cap);
      }
      break;
    case FlowNormalizer::ZScore:
      out = filters::zscore_normalize(raw, spec.zscore_window);
      break;
  }

  if (spec.winsorize_sigma > 0.0) {
    std::vector<double> defined;
    for (const auto& v : out) {
      if (v) defined.push_back(*v);
    }
    const auto m = filters::moments(defined);
    // Constant or single-point series have nothing to clamp.
    if (defined.size() >= 2 && m.sd > 0.0) {
      const auto clamped = filters::winsorize(defined, spec.winsorize_sigma, m);
      std::size_t k = 0;
      for (auto& v : out) {
        if (v) v = clamped[k++];
      }
    }
  }
  return out;
}

}  // namespace

NormalizedFlows normalize_panel(const Panel& panel, const NormalizerSpec& spec) {
  NormalizedFlows result;
  result.method = spec.method;
  result.rows.reserve(panel.size());
  for (std::size_t i = 0; i < panel.universe().size(); ++i) {
    const auto history = panel.history(i);
    std::array<std::vector<std::optional<double>>, 3> per_group;
    for (auto g : kInvestorGroups) {
      per_group[static_cast<int>(g)] = normalize_series(history, g, spec);
    }
    for (std::size_t t = 0; t < history.size(); ++t) {
      if (!per_group[0][t] || !per_group[1][t] || !per_group[2][t]) continue;
      result.rows.push_back(
          {history[t].ticker, history[t].date,
           {*per_group[0][t], *per_group[1][t], *per_group[2][t]}});
    }
  }
  return result;
}

FlowMatrix aggregate(const NormalizedFlows& flows) {
  // Rows arrive sorted by ticker, so each date accumulates in ticker order.
  std::map<Date, std::pair<std::array<double, 3>, std::size_t>> sums;
  for (const auto& row : flows.rows) {
    auto& [acc, count] = sums[row.date];
    for (int g = 0; g < 3; ++g) acc[g] += row.values[g];
    ++count;
  }
  FlowMatrix out;
  out.dates.reserve(sums.size());
  out.values.resize(static_cast<Eigen::Index>(sums.size()), 3);
  Eigen::Index r = 0;
  for (const auto& [date, entry] : sums) {
    out.dates.push_back(date);
    for (int g = 0; g < 3; ++g) out.values(r, g) = entry.first[g] / static_cast<double>(entry.second);
    ++r;
  }
  return out;
}

FlowMatrix aggregate_market_flows(const Panel& panel, const NormalizerSpec& spec) {
  return aggregate(normalize_panel(panel, spec));
}

void write_flow_matrix(const FlowMatrix& flows, const std::filesystem::path& path) {
  std::string out = "date,foreign,inst,indiv\n";
  for (std::size_t t = 0; t < flows.rows(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    out += fmt::format("{},{},{},{}\n", format_date(flows.dates[t]),
                       csv::format_double(flows.values(r, 0)), csv::format_double(flows.values(r, 1)),
                       csv::format_double(flows.values(r, 2)));
  }
  csv::write_file(path, out);
}

namespace {

std::size_t require_column(const csv::Table& table, std::string_view name, std::string_view file) {
  const auto idx = table.column(name);
  if (!idx) throw Error("panel", "MissingColumn", fmt::format("{} in {}", name, file));
  return *idx;
}

double require_number(const std::string& field, std::size_t line) {
  const auto v = csv::parse_double(field);
  if (!v) throw Error("panel", "UnparseableRow", fmt::format("line {}: '{}'", line, field));
  return *v;
}

Date require_date(const std::string& field, std::size_t line) {
  const auto d = parse_date(field);
  if (!d) throw Error("panel", "UnparseableRow", fmt::format("line {}: bad date '{}'", line, field));
  return *d;
}

}  // namespace

FlowMatrix read_flow_matrix(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto file = path.string();
  const std::size_t cols[] = {require_column(table, "foreign", file),
                              require_column(table, "inst", file),
                              require_column(table, "indiv", file)};
  const auto date_col = require_column(table, "date", file);
  FlowMatrix out;
  out.values.resize(static_cast<Eigen::Index>(table.rows.size()), 3);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto line = table.line_numbers[i];
    if (row.size() != table.header.size()) {
      throw Error("panel", "UnparseableRow", fmt::format("line {}: field count", line));
    }
    out.dates.push_back(require_date(row[date_col], line));
    for (int g = 0; g < 3; ++g) {
      out.values(static_cast<Eigen::Index>(i), g) = require_number(row[cols[g]], line);
    }
  }
  return out;
}

void write_normalized(const NormalizedFlows& flows, const std::filesystem::path& path) {
  std::string out = "ticker,date,foreign,inst,indiv,signal\n";
  for (const auto& r : flows.rows) {
    out += fmt::format("{},{},{},{},{},{}\n", r.ticker, format_date(r.date),
                       csv::format_double(r.values[0]), csv::format_double(r.values[1]),
                       csv::format_double(r.values[2]), csv::format_double(r.signal()));
  }
  csv::write_file(path, out);
}

NormalizedFlows read_normalized(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto file = path.string();
  const auto ticker_col = require_column(table, "ticker", file);
  const auto date_col = require_column(table, "date", file);
  const std::size_t cols[] = {require_column(table, "foreign", file),
                              require_column(table, "inst", file),
                              require_column(table, "indiv", file)};
  NormalizedFlows out;
  out.rows.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto line = table.line_numbers[i];
    if (row.size() != table.header.size()) {
      throw Error("panel", "UnparseableRow", fmt::format("line {}: field count", line));
    }
    StockFlow f{row[ticker_col], require_date(row[date_col], line), {}};
    for (int g = 0; g < 3; ++g) f.values[g] = require_number(row[cols[g]], line);
    out.rows.push_back(std::move(f));
  }
  std::sort(out.rows.begin(), out.rows.end(), [](const StockFlow& a, const StockFlow& b) {
    return a.ticker != b.ticker ? a.ticker < b.ticker : a.date < b.date;
  });
  return out;
}

}  // namespace flowlab::panel
