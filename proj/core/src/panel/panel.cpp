#include "flowlab/panel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "flowlab/csv.hpp"
#include "flowlab/error.hpp"

namespace flowlab {

std::string_view group_name(InvestorGroup g) {
  switch (g) {
    case InvestorGroup::Foreign:
      return "foreign";
    case InvestorGroup::Institutional:
      return "inst";
    case InvestorGroup::Individual:
      return "indiv";
  }
  return "unknown";
}

std::optional<InvestorGroup> parse_group(std::string_view name) {
  for (auto g : kInvestorGroups) {
    if (group_name(g) == name) return g;
  }
  if (name == "institutional") return InvestorGroup::Institutional;
  if (name == "individual") return InvestorGroup::Individual;
  return std::nullopt;
}

}  // namespace flowlab

namespace flowlab::panel {

double PanelRecord::net_buy(InvestorGroup g) const {
  switch (g) {
    case InvestorGroup::Foreign:
      return net_buy_foreign;
    case InvestorGroup::Institutional:
      return net_buy_institutional;
    case InvestorGroup::Individual:
      return net_buy_individual;
  }
  return 0.0;
}

bool PanelRecord::is_trading_day() const {
  return volume != 0 || net_buy_foreign != 0.0 || net_buy_institutional != 0.0 ||
         net_buy_individual != 0.0;
}

std::optional<std::string> record_violation(const PanelRecord& r) {
  const double fields[] = {r.open, r.high, r.low, r.close, r.net_buy_foreign,
                           r.net_buy_institutional, r.net_buy_individual, r.market_cap};
  for (double v : fields) {
    if (!std::isfinite(v)) return "non-finite value";
  }
  if (r.ticker.empty()) return "empty ticker";
  if (r.open <= 0 || r.high <= 0 || r.low <= 0 || r.close <= 0) return "non-positive price";
  if (r.low > std::min(r.open, r.close)) return "low above min(open, close)";
  if (r.high < std::max(r.open, r.close)) return "high below max(open, close)";
  if (r.volume < 0) return "negative volume";
  if (r.market_cap <= 0) return "non-positive market cap";
  return std::nullopt;
}

Panel Panel::from_records(std::vector<PanelRecord> records) {
  std::sort(records.begin(), records.end(), [](const PanelRecord& a, const PanelRecord& b) {
    return a.ticker != b.ticker ? a.ticker < b.ticker : a.date < b.date;
  });
  Panel p;
  std::set<Date> dates;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i > 0 && records[i - 1].ticker == r.ticker && records[i - 1].date == r.date) {
      throw Error("panel", "DuplicateKey", fmt::format("({}, {})", r.ticker, format_date(r.date)));
    }
    if (i == 0 || records[i - 1].ticker != r.ticker) {
      p.universe_.push_back(r.ticker);
      p.offsets_.push_back(i);
    }
    dates.insert(r.date);
  }
  p.offsets_.push_back(records.size());
  p.calendar_.assign(dates.begin(), dates.end());
  p.records_ = std::move(records);
  return p;
}

std::span<const PanelRecord> Panel::history(std::size_t ticker_index) const {
  if (ticker_index >= universe_.size()) return {};
  const auto begin = offsets_[ticker_index];
  const auto end = offsets_[ticker_index + 1];
  return std::span<const PanelRecord>(records_).subspan(begin, end - begin);
}

std::span<const PanelRecord> Panel::history(std::string_view ticker) const {
  const auto it = std::lower_bound(universe_.begin(), universe_.end(), ticker);
  if (it == universe_.end() || *it != ticker) return {};
  return history(static_cast<std::size_t>(it - universe_.begin()));
}

namespace {

struct ResolvedColumns {
  std::size_t ticker, date, open, high, low, close, volume, foreign, inst, indiv, cap;
};

ResolvedColumns resolve(const csv::Table& table, const ColumnMapping& m) {
  auto need = [&](const std::string& name) {
    const auto idx = table.column(name);
    if (!idx) throw Error("panel", "MissingColumn", name);
    return *idx;
  };
  return {need(m.ticker), need(m.date),   need(m.open),
          need(m.high),   need(m.low),    need(m.close),
          need(m.volume), need(m.net_buy_foreign), need(m.net_buy_institutional),
          need(m.net_buy_individual), need(m.market_cap)};
}

[[noreturn]] void unparseable(std::size_t line, const std::string& reason) {
  throw Error("panel", "UnparseableRow", fmt::format("line {}: {}", line, reason));
}

IngestResult ingest_table(const csv::Table& table, const ColumnMapping& schema) {
  const auto cols = resolve(table, schema);
  IngestResult result;
  std::vector<PanelRecord> accepted;
  accepted.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto line = table.line_numbers[i];
    if (row.size() != table.header.size()) {
      unparseable(line, fmt::format("expected {} fields, found {}", table.header.size(), row.size()));
    }
    auto number = [&](std::size_t col) {
      const auto v = csv::parse_double(row[col]);
      if (!v) unparseable(line, fmt::format("column '{}' is not numeric", table.header[col]));
      return *v;
    };
    PanelRecord r;
    r.ticker = row[cols.ticker];
    const auto date = parse_date(row[cols.date]);
    if (!date) unparseable(line, "invalid ISO-8601 date '" + row[cols.date] + "'");
    r.date = *date;
    r.open = number(cols.open);
    r.high = number(cols.high);
    r.low = number(cols.low);
    r.close = number(cols.close);
    const double volume = number(cols.volume);
    if (volume != std::floor(volume) || std::abs(volume) > 9.0e18) {
      unparseable(line, "volume is not an integer");
    }
    r.volume = static_cast<std::int64_t>(volume);
    r.net_buy_foreign = number(cols.foreign);
    r.net_buy_institutional = number(cols.inst);
    r.net_buy_individual = number(cols.indiv);
    r.market_cap = number(cols.cap);
    if (auto why = record_violation(r)) {
      ++result.rejected;
      result.rejections.emplace_back(line, *why);
      continue;
    }
    accepted.push_back(std::move(r));
  }
  result.panel = Panel::from_records(std::move(accepted));
  return result;
}

}  // namespace

IngestResult ingest_csv(const std::filesystem::path& path, const ColumnMapping& schema) {
  if (!std::filesystem::exists(path)) {
    throw Error("panel", "FileNotFound", path.string());
  }
  return ingest_table(csv::read(path), schema);
}

IngestResult ingest_csv_text(std::string_view text, const ColumnMapping& schema) {
  return ingest_table(csv::parse(text), schema);
}

std::string to_csv(const Panel& panel) {
  std::string out =
      "ticker,date,open,high,low,close,volume,net_buy_foreign,net_buy_inst,net_buy_indiv,"
      "market_cap\n";
  for (const auto& r : panel.records()) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.ticker, format_date(r.date),
                       csv::format_double(r.open), csv::format_double(r.high),
                       csv::format_double(r.low), csv::format_double(r.close), r.volume,
                       csv::format_double(r.net_buy_foreign),
                       csv::format_double(r.net_buy_institutional),
                       csv::format_double(r.net_buy_individual),
                       csv::format_double(r.market_cap));
  }
  return out;
}

void write_csv(const Panel& panel, const std::filesystem::path& path) {
  csv::write_file(path, to_csv(panel));
}

}  // namespace flowlab::panel
