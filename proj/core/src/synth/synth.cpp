#include "flowlab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/LU>
#include <fmt/format.h>

#include "flowlab/csv.hpp"
#include "flowlab/error.hpp"
#include "flowlab/rng.hpp"

namespace flowlab::synth {

std::string_view source_kind_name(SourceKind k) {
  switch (k) {
    case SourceKind::Laplacian:
      return "laplacian";
    case SourceKind::Uniform:
      return "uniform";
    case SourceKind::Sinusoid:
      return "sinusoid";
  }
  return "unknown";
}

std::optional<SourceKind> parse_source_kind(std::string_view name) {
  for (auto k : {SourceKind::Laplacian, SourceKind::Uniform, SourceKind::Sinusoid}) {
    if (source_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

Eigen::Matrix3d SynthConfig::default_mixing() {
  Eigen::Matrix3d a;
  a << 1.0, 0.4, 0.2,  //
      0.3, 1.0, -0.5,  //
      -0.7, -0.6, 1.0;
  return a;
}

namespace {

void check_mixing(const Eigen::Matrix3d& m, std::string_view which) {
  if (!m.allFinite()) throw Error("synth", "SingularMixing", fmt::format("{} has non-finite entries", which));
  Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
  lu.setThreshold(1e-12);
  if (lu.rank() < 3) throw Error("synth", "SingularMixing", fmt::format("{} is not invertible", which));
}

}  // namespace

void SynthConfig::validate() const {
  if (n_stocks < 1) throw PreconditionError("synth", "n_stocks must be >= 1");
  if (n_days < 2) throw PreconditionError("synth", "n_days must be >= 2");
  if (!(return_noise_sigma > 0.0)) throw PreconditionError("synth", "return_noise_sigma must be > 0");
  if (!(market_noise_share >= 0.0 && market_noise_share <= 1.0)) {
    throw PreconditionError("synth", "market_noise_share must lie in [0, 1]");
  }
  if (!(flow_intensity > 0.0)) throw PreconditionError("synth", "flow_intensity must be > 0");
  if (!(idio_flow_sigma >= 0.0)) throw PreconditionError("synth", "idio_flow_sigma must be >= 0");
  if (!(idio_flow_persistence >= 0.0 && idio_flow_persistence < 1.0)) {
    throw PreconditionError("synth", "idio_flow_persistence must lie in [0, 1)");
  }
  if (!(median_market_cap > 0.0)) throw PreconditionError("synth", "median_market_cap must be > 0");
  for (double p : sinusoid_period) {
    if (!(p >= 2.0)) throw PreconditionError("synth", "sinusoid periods must be >= 2 days");
  }
  check_mixing(mixing, "mixing_matrix");
  if (regime_break_day) {
    if (*regime_break_day < 1 || *regime_break_day >= n_days) {
      throw PreconditionError("synth", "regime_break_day must lie inside the sample");
    }
    check_mixing(mixing_after_break, "mixing_after_break");
  }
}

namespace {

Eigen::MatrixXd draw_sources(const SynthConfig& cfg) {
  const auto T = static_cast<Eigen::Index>(cfg.n_days);
  Eigen::MatrixXd s(T, 3);
  for (int k = 0; k < 3; ++k) {
    Rng rng(derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(k)));
    switch (cfg.source_kind[k]) {
      case SourceKind::Laplacian:
        for (Eigen::Index t = 0; t < T; ++t) s(t, k) = rng.laplace(1.0 / std::numbers::sqrt2);
        break;
      case SourceKind::Uniform:
        for (Eigen::Index t = 0; t < T; ++t) {
          s(t, k) = rng.uniform(-std::numbers::sqrt3, std::numbers::sqrt3);
        }
        break;
      case SourceKind::Sinusoid: {
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double omega = 2.0 * std::numbers::pi / cfg.sinusoid_period[k];
        for (Eigen::Index t = 0; t < T; ++t) {
          s(t, k) = std::numbers::sqrt2 * std::sin(omega * static_cast<double>(t) + phase);
        }
        break;
      }
    }
  }
  return s;
}

struct Stock {
  std::string ticker;
  double shares = 0.0;
  double close = 0.0;
  double multiplier = 1.0;
  std::array<double, 3> idio_state{};
};

}  // namespace

SynthPanel generate(const SynthConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_stocks;
  const int T = cfg.n_days;

  SynthPanel out;
  out.true_mixing = cfg.mixing;
  out.true_sources = draw_sources(cfg);

  Date d = next_weekday(cfg.start_date);
  out.dates.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    out.dates.push_back(d);
    d = next_weekday(d + std::chrono::days{1});
  }

  Rng setup(derive_seed(cfg.seed, 1));
  std::vector<Stock> stocks(static_cast<std::size_t>(n));
  double multiplier_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    auto& s = stocks[static_cast<std::size_t>(i)];
    s.ticker = fmt::format("S{:05d}", i + 1);
    s.close = 10000.0 * std::exp(0.5 * setup.normal());
    const double cap = cfg.median_market_cap * std::exp(cfg.market_cap_dispersion * setup.normal());
    s.shares = std::max(cap, 1.2 * 50e9) / s.close;
    s.multiplier = std::exp(cfg.multiplier_dispersion * setup.normal());
    multiplier_sum += s.multiplier;
  }
  for (auto& s : stocks) s.multiplier *= static_cast<double>(n) / multiplier_sum;

  std::vector<Rng> stock_rng;
  stock_rng.reserve(stocks.size());
  for (int i = 0; i < n; ++i) stock_rng.emplace_back(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(i)));
  Rng market_rng(derive_seed(cfg.seed, 2));

  const double phi = cfg.idio_flow_persistence;
  const double innovation_sd = cfg.idio_flow_sigma * std::sqrt(1.0 - phi * phi);
  const double market_sd = cfg.return_noise_sigma * std::sqrt(cfg.market_noise_share);
  const double idio_sd = cfg.return_noise_sigma * std::sqrt(1.0 - cfg.market_noise_share);

  std::vector<panel::PanelRecord> records;
  records.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(T));
  std::vector<double> prev_signal(stocks.size(), 0.0);
  std::vector<std::array<double, 3>> idio(stocks.size());

  for (int t = 0; t < T; ++t) {
    const Eigen::Matrix3d& a =
        (cfg.regime_break_day && t >= *cfg.regime_break_day) ? cfg.mixing_after_break : cfg.mixing;
    const Eigen::Vector3d x = a * out.true_sources.row(t).transpose();
    const double market_shock = market_sd * market_rng.normal();

    // Idiosyncratic flows, demeaned so that sum_i m_i u_i = 0 for each group.
    std::array<double, 3> weighted{};
    for (std::size_t i = 0; i < stocks.size(); ++i) {
      for (int g = 0; g < 3; ++g) {
        auto& state = stocks[i].idio_state[g];
        state = phi * state + innovation_sd * stock_rng[i].normal();
        idio[i][g] = state;
        weighted[g] += stocks[i].multiplier * state;
      }
    }
    for (auto& u : idio) {
      for (int g = 0; g < 3; ++g) u[g] -= weighted[g] / static_cast<double>(n);
    }

    for (std::size_t i = 0; i < stocks.size(); ++i) {
      auto& s = stocks[i];
      auto& rng = stock_rng[i];
      const double prev_close = s.close;
      if (t > 0) {
        double r = cfg.return_mean + cfg.flow_to_return_coeff * prev_signal[i] + market_shock +
                   idio_sd * rng.normal();
        r = std::max(r, -0.9);
        s.close = prev_close * (1.0 + r);
      }
      panel::PanelRecord rec;
      rec.ticker = s.ticker;
      rec.date = out.dates[static_cast<std::size_t>(t)];
      rec.open = prev_close;
      rec.close = s.close;
      rec.high = std::max(rec.open, rec.close) * (1.0 + 0.005 * std::abs(rng.normal()));
      rec.low = std::min(rec.open, rec.close) * (1.0 - 0.005 * std::abs(rng.normal()));
      rec.market_cap = s.shares * s.close;
      const double turnover = 0.002 * std::exp(0.5 * rng.normal());
      rec.volume = std::max<std::int64_t>(1, std::llround(turnover * s.shares));

      std::array<double, 3> intensity{};
      double signal = 0.0;
      for (int g = 0; g < 3; ++g) {
        const double level = s.multiplier * (x(g) + idio[i][g]);
        intensity[g] = cfg.flow_intensity * level;
        signal += level / 3.0;
      }
      rec.net_buy_foreign = intensity[0] * rec.market_cap;
      rec.net_buy_institutional = intensity[1] * rec.market_cap;
      rec.net_buy_individual = intensity[2] * rec.market_cap;
      prev_signal[i] = signal;
      records.push_back(std::move(rec));
    }
  }
  out.panel = panel::Panel::from_records(std::move(records));
  return out;
}

void write_truth(const SynthPanel& synth, const std::filesystem::path& path) {
  std::string out = "date,s1,s2,s3\n";
  for (std::size_t t = 0; t < synth.dates.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    out += fmt::format("{},{},{},{}\n", format_date(synth.dates[t]),
                       csv::format_double(synth.true_sources(r, 0)),
                       csv::format_double(synth.true_sources(r, 1)),
                       csv::format_double(synth.true_sources(r, 2)));
  }
  csv::write_file(path, out);
}

}  // namespace flowlab::synth
