#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "flowlab/csv.hpp"
#include "flowlab/error.hpp"
#include "flowlab/ica.hpp"
#include "flowlab/stats.hpp"

namespace flowlab::ica {

std::vector<FactorSeries> read_factors(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto date_col = table.column("date");
  if (!date_col) throw Error("ica", "MissingColumn", "date in " + path.string());
  std::vector<FactorSeries> out;
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == *date_col) continue;
    out.push_back({table.header[c], {}, {}});
    cols.push_back(c);
  }
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row.size() != table.header.size()) {
      throw Error("ica", "UnparseableRow", fmt::format("line {}: field count", table.line_numbers[i]));
    }
    const auto date = parse_date(row[*date_col]);
    if (!date) throw Error("ica", "UnparseableRow", fmt::format("line {}: bad date", table.line_numbers[i]));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto& cell = row[cols[k]];
      if (cell.empty()) continue;
      const auto v = csv::parse_double(cell);
      if (!v) throw Error("ica", "UnparseableRow", fmt::format("line {}: '{}'", table.line_numbers[i], cell));
      out[k].dates.push_back(*date);
      out[k].values.push_back(*v);
    }
  }
  return out;
}

FactorCorrelationTable interpret(const std::vector<Date>& dates, const Eigen::MatrixXd& components,
                                 const std::vector<FactorSeries>& factors) {
  if (components.cols() != 3 || static_cast<std::size_t>(components.rows()) != dates.size()) {
    throw PreconditionError("ica", "components must be T x 3 and match the date index");
  }
  if (factors.empty()) throw PreconditionError("ica", "interpret needs at least one factor");

  std::map<Date, Eigen::Index> row_of;
  for (std::size_t t = 0; t < dates.size(); ++t) row_of.emplace(dates[t], static_cast<Eigen::Index>(t));

  FactorCorrelationTable table;
  for (const auto& f : factors) {
    std::vector<Eigen::Index> rows;
    std::vector<double> fv;
    for (std::size_t k = 0; k < f.dates.size(); ++k) {
      const auto it = row_of.find(f.dates[k]);
      if (it == row_of.end()) continue;
      rows.push_back(it->second);
      fv.push_back(f.values[k]);
    }
    if (rows.size() < kMinOverlap) {
      throw Error("ica", "InsufficientOverlap",
                  fmt::format("factor '{}' shares {} dates with the components (need {})", f.name,
                              rows.size(), kMinOverlap));
    }
    for (int c = 0; c < 3; ++c) {
      std::vector<double> cv(rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k) cv[k] = components(rows[k], c);
      CorrelationRow row;
      row.component = c;
      row.factor = f.name;
      row.n = rows.size();
      row.r = stats::pearson(cv, fv).value_or(0.0);
      row.p_value = stats::correlation_p_value(row.r, row.n);
      table.rows.push_back(std::move(row));
    }
  }
  for (int c = 0; c < 3; ++c) {
    double best = -1.0;
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
      const auto& row = table.rows[k];
      if (row.component == c && std::abs(row.r) > best) {
        best = std::abs(row.r);
        table.top[static_cast<std::size_t>(c)] = k;
      }
    }
  }
  return table;
}

}  // namespace flowlab::ica
