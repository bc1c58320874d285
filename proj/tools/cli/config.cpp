#include "config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "flowlab/csv.hpp"
#include "flowlab/error.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/wavelet.hpp"

namespace flowlab::cli {

namespace {

[[noreturn]] void invalid(const std::string& key, const std::string& value, std::string_view expected) {
  throw Error("config", "InvalidValue", fmt::format("{} = '{}' (expected {})", key, value, expected));
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double as_double(const std::string& key, const std::string& v) {
  const auto d = csv::parse_double(v);
  if (!d) invalid(key, v, "a number");
  return *d;
}

template <typename Int>
Int as_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) invalid(key, v, "an integer");
  return out;
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  invalid(key, v, "true or false");
}

std::vector<std::string> as_list(const std::string& v) {
  std::vector<std::string> out;
  std::string_view rest = v;
  while (true) {
    const auto comma = rest.find(',');
    auto item = trim(rest.substr(0, comma));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

Eigen::Matrix3d as_matrix(const std::string& key, const std::string& v) {
  const auto items = as_list(v);
  if (items.size() != 9) invalid(key, v, "9 comma-separated numbers, row-major");
  Eigen::Matrix3d m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = as_double(key, items[static_cast<std::size_t>(i)]);
  return m;
}

struct Context {
  RunConfig& cfg;
  std::filesystem::path base;

  [[nodiscard]] std::filesystem::path resolve(const std::string& v) const {
    std::filesystem::path p(v);
    return p.is_relative() && !base.empty() ? base / p : p;
  }
};

using Setter = std::function<void(Context&, const std::string& key, const std::string& value)>;
using SectionTable = std::map<std::string, Setter, std::less<>>;

#define FLOWLAB_NUM(field) [](Context& c, const std::string& k, const std::string& v) { c.cfg.field = as_double(k, v); }
#define FLOWLAB_INT(field) \
  [](Context& c, const std::string& k, const std::string& v) { c.cfg.field = as_int<int>(k, v); }
#define FLOWLAB_SIZE(field) \
  [](Context& c, const std::string& k, const std::string& v) { c.cfg.field = as_int<std::size_t>(k, v); }
#define FLOWLAB_BOOL(field) [](Context& c, const std::string& k, const std::string& v) { c.cfg.field = as_bool(k, v); }
#define FLOWLAB_STR(field) [](Context& c, const std::string&, const std::string& v) { c.cfg.field = v; }

const std::map<std::string, SectionTable, std::less<>>& schema() {
  static const std::map<std::string, SectionTable, std::less<>> table{
      {"run",
       {
           {"seed", [](Context& c, const std::string& k,
                       const std::string& v) { c.cfg.seed = as_int<std::uint64_t>(k, v); }},
           {"source",
            [](Context& c, const std::string& k, const std::string& v) {
              if (v != "synth" && v != "csv") invalid(k, v, "synth or csv");
              c.cfg.source = v;
            }},
           {"input", [](Context& c, const std::string&, const std::string& v) { c.cfg.input = c.resolve(v); }},
           {"output", [](Context& c, const std::string&, const std::string& v) { c.cfg.output = c.resolve(v); }},
           {"factors", [](Context& c, const std::string&, const std::string& v) { c.cfg.factors = c.resolve(v); }},
       }},
      {"columns",
       {
           {"ticker", FLOWLAB_STR(columns.ticker)},
           {"date", FLOWLAB_STR(columns.date)},
           {"open", FLOWLAB_STR(columns.open)},
           {"high", FLOWLAB_STR(columns.high)},
           {"low", FLOWLAB_STR(columns.low)},
           {"close", FLOWLAB_STR(columns.close)},
           {"volume", FLOWLAB_STR(columns.volume)},
           {"net_buy_foreign", FLOWLAB_STR(columns.net_buy_foreign)},
           {"net_buy_inst", FLOWLAB_STR(columns.net_buy_institutional)},
           {"net_buy_indiv", FLOWLAB_STR(columns.net_buy_individual)},
           {"market_cap", FLOWLAB_STR(columns.market_cap)},
       }},
      {"cleaning",
       {
           {"min_days_per_year", FLOWLAB_INT(cleaning.min_days_per_year)},
           {"winsorize_sigma", FLOWLAB_NUM(cleaning.winsorize_sigma)},
           {"min_market_cap", FLOWLAB_NUM(cleaning.min_market_cap)},
           {"forward_fill", FLOWLAB_BOOL(cleaning.forward_fill)},
       }},
      {"synth",
       {
           {"n_stocks", FLOWLAB_INT(synth.n_stocks)},
           {"n_days", FLOWLAB_INT(synth.n_days)},
           {"mixing", [](Context& c, const std::string& k,
                         const std::string& v) { c.cfg.synth.mixing = as_matrix(k, v); }},
           {"mixing_after_break", [](Context& c, const std::string& k,
                                     const std::string& v) { c.cfg.synth.mixing_after_break = as_matrix(k, v); }},
           {"regime_break_day", [](Context& c, const std::string& k,
                                   const std::string& v) { c.cfg.synth.regime_break_day = as_int<int>(k, v); }},
           {"sources",
            [](Context& c, const std::string& k, const std::string& v) {
              const auto items = as_list(v);
              if (items.size() != 3) invalid(k, v, "3 source kinds");
              for (std::size_t i = 0; i < 3; ++i) {
                const auto kind = synth::parse_source_kind(items[i]);
                if (!kind) invalid(k, v, "laplacian, uniform or sinusoid");
                c.cfg.synth.source_kind[i] = *kind;
              }
            }},
           {"sinusoid_periods",
            [](Context& c, const std::string& k, const std::string& v) {
              const auto items = as_list(v);
              if (items.size() != 3) invalid(k, v, "3 periods");
              for (std::size_t i = 0; i < 3; ++i) c.cfg.synth.sinusoid_period[i] = as_double(k, items[i]);
            }},
           {"flow_to_return_coeff", FLOWLAB_NUM(synth.flow_to_return_coeff)},
           {"return_noise_sigma", FLOWLAB_NUM(synth.return_noise_sigma)},
           {"return_mean", FLOWLAB_NUM(synth.return_mean)},
           {"market_noise_share", FLOWLAB_NUM(synth.market_noise_share)},
           {"flow_intensity", FLOWLAB_NUM(synth.flow_intensity)},
           {"idio_flow_sigma", FLOWLAB_NUM(synth.idio_flow_sigma)},
           {"idio_flow_persistence", FLOWLAB_NUM(synth.idio_flow_persistence)},
           {"median_market_cap", FLOWLAB_NUM(synth.median_market_cap)},
           {"market_cap_dispersion", FLOWLAB_NUM(synth.market_cap_dispersion)},
           {"multiplier_dispersion", FLOWLAB_NUM(synth.multiplier_dispersion)},
           {"start_date",
            [](Context& c, const std::string& k, const std::string& v) {
              const auto d = parse_date(v);
              if (!d) invalid(k, v, "YYYY-MM-DD");
              c.cfg.synth.start_date = *d;
            }},
       }},
      {"normalize",
       {
           {"method",
            [](Context& c, const std::string& k, const std::string& v) {
              const auto m = panel::parse_normalizer(v);
              if (!m) invalid(k, v, "raw, matched or zscore");
              c.cfg.normalize.method = *m;
            }},
           {"zscore_window", FLOWLAB_INT(normalize.zscore_window)},
           {"winsorize_sigma", FLOWLAB_NUM(normalize.winsorize_sigma)},
       }},
      {"ica",
       {
           {"max_iter", FLOWLAB_INT(ica.fastica.max_iter)},
           {"tol", FLOWLAB_NUM(ica.fastica.tol)},
           {"rolling", FLOWLAB_BOOL(ica.rolling)},
           {"window", FLOWLAB_INT(ica.window)},
           {"step", FLOWLAB_INT(ica.step)},
       }},
      {"coherence",
       {
           {"smoothing", FLOWLAB_INT(coherence.smoothing)},
           {"pairs",
            [](Context& c, const std::string& k, const std::string& v) {
              c.cfg.coherence.pairs.clear();
              for (const auto& item : as_list(v)) {
                const auto p = parse_pair(item);
                if (!p) invalid(k, v, "pairs such as foreign:inst");
                c.cfg.coherence.pairs.push_back(*p);
              }
            }},
       }},
      {"train",
       {
           {"model",
            [](Context& c, const std::string& k, const std::string& v) {
              if (v != "lstm" && v != "ridge" && v != "lasso") invalid(k, v, "lstm, ridge or lasso");
              c.cfg.train.model = v;
            }},
           {"lookback", FLOWLAB_INT(train.arch.lookback)},
           {"hidden1", FLOWLAB_INT(train.arch.hidden1)},
           {"hidden2", FLOWLAB_INT(train.arch.hidden2)},
           {"heads", FLOWLAB_INT(train.arch.heads)},
           {"key_dim", FLOWLAB_INT(train.arch.key_dim)},
           {"dropout", FLOWLAB_NUM(train.arch.dropout)},
           {"learning_rate", FLOWLAB_NUM(train.train.learning_rate)},
           {"beta1", FLOWLAB_NUM(train.train.beta1)},
           {"beta2", FLOWLAB_NUM(train.train.beta2)},
           {"epsilon", FLOWLAB_NUM(train.train.epsilon)},
           {"patience", FLOWLAB_INT(train.train.patience)},
           {"max_epochs", FLOWLAB_INT(train.train.max_epochs)},
           {"batch_size", FLOWLAB_INT(train.train.batch_size)},
           {"train_fraction", FLOWLAB_NUM(train.train.train_fraction)},
           {"validation_fraction", FLOWLAB_NUM(train.train.validation_fraction)},
           {"test_fraction", FLOWLAB_NUM(train.train.test_fraction)},
           {"lambdas",
            [](Context& c, const std::string& k, const std::string& v) {
              c.cfg.train.lambdas.clear();
              for (const auto& item : as_list(v)) c.cfg.train.lambdas.push_back(as_double(k, item));
            }},
       }},
      {"backtest",
       {
           {"decile", FLOWLAB_NUM(backtest.strategy.decile)},
           {"cost_bp", [](Context& c, const std::string& k,
                          const std::string& v) { c.cfg.backtest.strategy.cost_roundtrip = as_double(k, v) * 1e-4; }},
           {"signal_lag", FLOWLAB_INT(backtest.strategy.signal_lag)},
           {"block_length", FLOWLAB_SIZE(backtest.bootstrap.block_length)},
           {"replications", FLOWLAB_SIZE(backtest.bootstrap.replications)},
           {"level", FLOWLAB_NUM(backtest.bootstrap.level)},
       }},
  };
  return table;
}

#undef FLOWLAB_NUM
#undef FLOWLAB_INT
#undef FLOWLAB_SIZE
#undef FLOWLAB_BOOL
#undef FLOWLAB_STR

void check(bool ok, const std::string& what) {
  if (!ok) throw Error("config", "InvalidValue", what);
}

// Runs a module validator and rethrows its complaint as a config error.
template <typename F>
void module_check(std::string_view section, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    throw Error("config", "InvalidValue", fmt::format("[{}] {}", section, e.what()));
  }
}

}  // namespace

std::optional<GroupPair> parse_pair(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  const auto a = parse_group(trim(text.substr(0, colon)));
  const auto b = parse_group(trim(text.substr(colon + 1)));
  if (!a || !b || *a == *b) return std::nullopt;
  return GroupPair{*a, *b};
}

void RunConfig::set_seed(std::uint64_t master) {
  seed = master;
  synth.seed = derive_seed(master, 1);
  ica.fastica.seed = derive_seed(master, 2);
  train.train.seed = derive_seed(master, 3);
  backtest.bootstrap.seed = derive_seed(master, 4);
}

void RunConfig::validate() const {
  if (source == "csv") {
    if (input.empty()) throw Error("config", "MissingPath", "[run] input is required when source = csv");
    if (!std::filesystem::is_regular_file(input)) {
      throw Error("config", "MissingPath", fmt::format("[run] input '{}' does not exist", input.string()));
    }
  }
  if (!factors.empty() && !std::filesystem::is_regular_file(factors)) {
    throw Error("config", "MissingPath", fmt::format("[run] factors '{}' does not exist", factors.string()));
  }
  module_check("cleaning", [&] { cleaning.validate(); });
  if (source == "synth") module_check("synth", [&] { synth.validate(); });
  check(normalize.zscore_window >= 2, "[normalize] zscore_window must be >= 2");
  check(normalize.winsorize_sigma >= 0.0, "[normalize] winsorize_sigma must be >= 0");
  check(ica.fastica.max_iter >= 1 && ica.fastica.tol > 0.0, "[ica] max_iter >= 1 and tol > 0 required");
  check(ica.window >= ica::kMinObservations && ica.step >= 1,
        fmt::format("[ica] window must be >= {} and step >= 1", ica::kMinObservations));
  check(coherence.smoothing >= 3 && coherence.smoothing % 2 == 1, "[coherence] smoothing must be odd and >= 3");
  check(!coherence.pairs.empty(), "[coherence] at least one pair required");
  module_check("train", [&] { train.arch.validate(); });
  module_check("train", [&] { train.train.validate(); });
  check(!train.lambdas.empty(), "[train] lambdas must not be empty");
  for (double l : train.lambdas) check(l >= 0.0, "[train] lambdas must be >= 0");
  module_check("backtest", [&] { backtest.strategy.validate(); });
  check(backtest.bootstrap.block_length >= 1 && backtest.bootstrap.replications >= 1,
        "[backtest] block_length and replications must be >= 1");
  check(backtest.bootstrap.level > 0.0 && backtest.bootstrap.level < 1.0, "[backtest] level must lie in (0, 1)");

  if (source == "synth") {
    // Series lengths the later stages will see.
    const int warmup = normalize.method == panel::FlowNormalizer::ZScore ? normalize.zscore_window : 0;
    const int t = synth.n_days - warmup;
    check(t >= ica::kMinObservations, fmt::format("[synth] n_days leaves {} flow rows, ICA needs {}", t, ica::kMinObservations));
    check(t >= static_cast<int>(wavelet::kMinLength), fmt::format("[synth] n_days leaves {} flow rows, coherence needs {}",
                                                                    t, wavelet::kMinLength));
    if (ica.rolling) {
      check(t >= ica.window + ica.step,
            fmt::format("[ica] rolling needs window + step = {} rows, synth gives {}", ica.window + ica.step, t));
    }
    const auto min_stocks = static_cast<int>(std::ceil(1.0 / backtest.strategy.decile - 1e-9));
    check(synth.n_stocks >= min_stocks,
          fmt::format("[synth] n_stocks = {} is below the {} stocks a decile of {} needs", synth.n_stocks, min_stocks,
                      backtest.strategy.decile));
  }
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error("config", "InvalidValue", fmt::format("line {}: {}", e.line(), e.message()));
  }
  RunConfig cfg;
  cfg.set_seed(cfg.seed);
  Context ctx{cfg, base_dir};
  const auto& sections = schema();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw Error("config", "UnknownKey", fmt::format("'{}' outside any section", section));
    }
    const auto table = sections.find(section);
    if (table == sections.end()) throw Error("config", "UnknownKey", fmt::format("section [{}]", section));
    for (const auto& [key, value] : body) {
      const auto setter = table->second.find(key);
      if (setter == table->second.end()) throw Error("config", "UnknownKey", fmt::format("{}.{}", section, key));
      setter->second(ctx, section + "." + key, trim(value.data()));
    }
  }
  cfg.set_seed(cfg.seed);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("config", "UnreadableFile", path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

std::optional<std::uint64_t> seed_override(std::optional<std::uint64_t> flag) {
  if (flag) return flag;
  const char* env = std::getenv("FLOWLAB_SEED");
  if (env == nullptr || *env == '\0') return std::nullopt;
  return as_int<std::uint64_t>("FLOWLAB_SEED", env);
}

}  // namespace flowlab::cli
