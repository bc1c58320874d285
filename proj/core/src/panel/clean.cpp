#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "flowlab/error.hpp"
#include "flowlab/panel.hpp"

namespace flowlab::panel {

void CleaningConfig::validate() const {
  if (min_days_per_year <= 0 || !(winsorize_sigma > 0.0) || !(min_market_cap > 0.0)) {
    throw PreconditionError("panel", "cleaning config fields must be positive");
  }
}

namespace {

bool has_sparse_year(std::span<const PanelRecord> history, int min_days) {
  std::map<int, int> per_year;
  for (const auto& r : history) {
    if (r.is_trading_day()) ++per_year[calendar_year(r.date)];
  }
  return std::any_of(per_year.begin(), per_year.end(),
                     [&](const auto& kv) { return kv.second < min_days; });
}

double median_market_cap(std::span<const PanelRecord> history) {
  std::vector<double> caps;
  for (const auto& r : history) {
    if (r.is_trading_day()) caps.push_back(r.market_cap);
  }
  if (caps.empty()) {
    for (const auto& r : history) caps.push_back(r.market_cap);
  }
  std::sort(caps.begin(), caps.end());
  const auto n = caps.size();
  return n % 2 == 1 ? caps[n / 2] : 0.5 * (caps[n / 2 - 1] + caps[n / 2]);
}

}  // namespace

Panel clean(const Panel& panel, const CleaningConfig& cfg, CleaningLog* log) {
  cfg.validate();
  if (panel.empty()) throw PreconditionError("panel", "clean requires a non-empty panel");

  CleaningLog local;
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < panel.universe().size(); ++i) {
    const auto history = panel.history(i);
    if (has_sparse_year(history, cfg.min_days_per_year)) {
      local.removed_sparse_years.push_back(panel.universe()[i]);
    } else if (median_market_cap(history) < cfg.min_market_cap) {
      local.removed_small_cap.push_back(panel.universe()[i]);
    } else {
      survivors.push_back(i);
    }
  }
  if (survivors.empty()) {
    throw Error("panel", "EmptyAfterCleaning",
                fmt::format("all {} tickers excluded", panel.universe().size()));
  }

  std::set<Date> calendar_set;
  for (auto i : survivors) {
    for (const auto& r : panel.history(i)) calendar_set.insert(r.date);
  }
  const std::vector<Date> calendar(calendar_set.begin(), calendar_set.end());

  std::vector<PanelRecord> out;
  out.reserve(panel.size());
  for (auto i : survivors) {
    const auto history = panel.history(i);
    if (!cfg.forward_fill) {
      out.insert(out.end(), history.begin(), history.end());
      continue;
    }
    auto cal = std::lower_bound(calendar.begin(), calendar.end(), history.front().date);
    for (std::size_t k = 0; k < history.size(); ++k) {
      const auto& r = history[k];
      for (; cal != calendar.end() && *cal < r.date; ++cal) {
        PanelRecord fill = out.back();
        fill.date = *cal;
        fill.volume = 0;
        fill.net_buy_foreign = 0.0;
        fill.net_buy_institutional = 0.0;
        fill.net_buy_individual = 0.0;
        out.push_back(std::move(fill));
        ++local.filled_records;
      }
      out.push_back(r);
      if (cal != calendar.end() && *cal == r.date) ++cal;
    }
  }
  if (log) *log = std::move(local);
  return Panel::from_records(std::move(out));
}

}  // namespace flowlab::panel
