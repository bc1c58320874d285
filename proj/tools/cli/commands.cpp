#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "flowlab/csv.hpp"
#include "flowlab/error.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/stats.hpp"
#include "flowlab/wavelet.hpp"

namespace flowlab::cli {

using nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

std::string cell(double v) { return std::isfinite(v) ? csv::format_double(v) : std::string(); }

void write_json(const fs::path& path, const json& doc) { csv::write_file(path, doc.dump(2) + "\n"); }

json read_json(const fs::path& path, std::string_view artifact) {
  std::ifstream in(path);
  if (!in) throw Error("report", "MissingArtifact", fmt::format("{} ({})", artifact, path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("report", "UnreadableArtifact", fmt::format("{}: {}", path.string(), e.what()));
  }
}

// Human tables use four significant figures.
std::string sig4(const json& v) {
  if (v.is_null()) return "n/a";
  if (v.is_boolean()) return v.get<bool>() ? "yes" : "no";
  if (v.is_number_integer() || v.is_number_unsigned()) return std::to_string(v.get<long long>());
  return fmt::format("{:.4g}", v.get<double>());
}

std::string pair_label(const GroupPair& p) {
  return fmt::format("{}:{}", group_name(p.first), group_name(p.second));
}

RunConfig config_for(const fs::path& path, std::optional<std::uint64_t> seed_flag) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
  if (const auto seed = seed_override(seed_flag)) cfg.set_seed(*seed);
  return cfg;
}

panel::Panel read_panel(const fs::path& path) {
  // Panel files are canonical CSV; any row the ingester rejects is corruption.
  auto result = panel::ingest_csv(path);
  if (result.rejected > 0) {
    const auto& [line, reason] = result.rejections.front();
    throw Error("panel", "UnparseableRow", fmt::format("{} line {}: {}", path.string(), line, reason));
  }
  return std::move(result.panel);
}

std::vector<double> column_of(const Eigen::MatrixXd& m, Eigen::Index c) {
  return {m.col(c).data(), m.col(c).data() + m.rows()};
}

// ---------------------------------------------------------------- ica

json correlation_json(const ica::CorrelationRow& r) {
  return {{"component", r.component + 1}, {"factor", r.factor}, {"r", number(r.r)},
          {"p_value", number(r.p_value)}, {"n", r.n}};
}

ica::IcaResult stage_ica(const panel::FlowMatrix& flows, const std::vector<ica::FactorSeries>& factors,
                         const IcaSettings& settings, const fs::path& dir) {
  const auto whitened = ica::whiten(flows.values);
  const auto result = ica::fastica(whitened, settings.fastica);

  std::string mixing = "group,ic1,ic2,ic3\n";
  for (int g = 0; g < 3; ++g) {
    mixing += fmt::format("{},{},{},{}\n", group_name(kInvestorGroups[static_cast<std::size_t>(g)]),
                          cell(result.mixing(g, 0)), cell(result.mixing(g, 1)), cell(result.mixing(g, 2)));
  }
  csv::write_file(dir / "mixing.csv", mixing);

  std::string components = "date,ic1,ic2,ic3\n";
  for (std::size_t t = 0; t < flows.rows(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    components += fmt::format("{},{},{},{}\n", format_date(flows.dates[t]), cell(result.components(r, 0)),
                              cell(result.components(r, 1)), cell(result.components(r, 2)));
  }
  csv::write_file(dir / "components.csv", components);

  json summary;
  summary["observations"] = flows.rows();
  summary["converged"] = result.converged;
  summary["iterations"] = result.iterations;
  summary["whitening_eigenvalues"] = {whitened.transform.eigenvalues(0), whitened.transform.eigenvalues(1),
                                      whitened.transform.eigenvalues(2)};
  summary["mixing"] = json::array();
  summary["unmixing"] = json::array();
  for (int g = 0; g < 3; ++g) {
    summary["mixing"].push_back({result.mixing(g, 0), result.mixing(g, 1), result.mixing(g, 2)});
    summary["unmixing"].push_back({result.unmixing(g, 0), result.unmixing(g, 1), result.unmixing(g, 2)});
  }

  summary["top_factors"] = json::array();
  if (!factors.empty()) {
    const auto table = ica::interpret(flows.dates, result.components, factors);
    std::string rows = "component,factor,r,p_value,n\n";
    for (const auto& r : table.rows) {
      rows += fmt::format("{},{},{},{},{}\n", r.component + 1, r.factor, cell(r.r), cell(r.p_value), r.n);
    }
    csv::write_file(dir / "correlations.csv", rows);
    for (int k = 0; k < 3; ++k) summary["top_factors"].push_back(correlation_json(table.top_row(k)));
  }

  if (settings.rolling) {
    ica::StabilityOptions opts{settings.window, settings.step, settings.fastica};
    const auto trace = ica::rolling_stability(flows, opts, factors);
    std::string rows = "start,end,converged,iterations,drift,top_factor,top_r,a11,a12,a13,a21,a22,a23,a31,a32,a33\n";
    for (const auto& w : trace.windows) {
      rows += fmt::format("{},{},{},{},{},{},{}", format_date(w.start), format_date(w.end), w.converged ? 1 : 0,
                          w.iterations, w.drift ? cell(*w.drift) : "", w.top_factor_ic1 ? w.top_factor_ic1->factor : "",
                          w.top_factor_ic1 ? cell(w.top_factor_ic1->r) : "");
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) rows += "," + cell(w.mixing(i, j));
      }
      rows += "\n";
    }
    csv::write_file(dir / "stability.csv", rows);
    const auto drifts = trace.drifts();
    json stab{{"windows", trace.windows.size()}, {"window", settings.window}, {"step", settings.step}};
    if (!drifts.empty()) {
      const auto worst = std::max_element(drifts.begin(), drifts.end());
      stab["median_drift"] = stats::quantile(drifts, 0.5);
      stab["max_drift"] = *worst;
      stab["max_drift_window_start"] = format_date(trace.windows[static_cast<std::size_t>(worst - drifts.begin()) + 1].start);
    }
    summary["stability"] = stab;
  }
  write_json(dir / "summary.json", summary);
  return result;
}

// ---------------------------------------------------------- coherence

void stage_coherence(const panel::FlowMatrix& flows, const CoherenceSettings& settings, const fs::path& output) {
  std::string field = "pair,scale,date,coherence,in_cone\n";
  std::string bands = "pair";
  for (const char* label : wavelet::kBandLabels) bands += fmt::format(",{}", label);
  bands += "\n";
  for (const auto& pair : settings.pairs) {
    const auto a = column_of(flows.values, static_cast<Eigen::Index>(pair.first));
    const auto b = column_of(flows.values, static_cast<Eigen::Index>(pair.second));
    const auto c = wavelet::coherence(a, b, settings.smoothing);
    const auto label = pair_label(pair);
    for (Eigen::Index j = 0; j < c.coherence.rows(); ++j) {
      for (Eigen::Index t = 0; t < c.coherence.cols(); ++t) {
        field += fmt::format("{},{},{},{},{}\n", label, cell(c.scales[static_cast<std::size_t>(j)]),
                             format_date(flows.dates[static_cast<std::size_t>(t)]), cell(c.coherence(j, t)),
                             c.in_cone(j, t) ? 1 : 0);
      }
    }
    bands += label;
    for (double m : c.band_means) bands += "," + cell(m);
    bands += "\n";
  }
  csv::write_file(output, field);
  csv::write_file(output.parent_path() / "bands.csv", bands);
}

// -------------------------------------------------------------- train

json report_json(const predict::PredictionReport& r) {
  return {{"n", r.n},
          {"rmse", number(r.rmse)},
          {"pearson_correlation", number(r.pearson_correlation)},
          {"hit_rate", number(r.hit_rate)},
          {"information_ratio", number(r.information_ratio)},
          {"prediction_std", number(r.prediction_std)},
          {"target_std", number(r.target_std)},
          {"collapsed", r.collapsed},
          {"attention_weight_profile", r.attention_weight_profile}};
}

json linear_json(const predict::LinearModel& m, const predict::DataSplit& split) {
  return {{"model", m.kind}, {"lambda", m.lambda}, {"sweeps", m.sweeps},
          {"nonzero", (m.coefficients.array() != 0.0).count()},
          {"test", report_json(predict::evaluate(m, split.test))}};
}

void stage_train(const panel::Panel& market, const RunConfig& cfg, const std::string& model, const fs::path& model_path,
                 const fs::path& report_path) {
  const auto flows = panel::normalize_panel(market, cfg.normalize);
  const auto samples = predict::build_sequences(market, flows, cfg.train.arch.lookback);
  const auto split = predict::chronological_split(samples, cfg.train.train.train_fraction,
                                                  cfg.train.train.validation_fraction);
  if (split.train.empty() || split.validation.empty() || split.test.empty()) {
    throw Error("predict", "EmptyDataset",
                fmt::format("split of {} samples gives {}/{}/{}", samples.size(), split.train.size(),
                            split.validation.size(), split.test.size()));
  }
  json report{{"model", model},
               {"normalizer", panel::normalizer_name(cfg.normalize.method)},
               {"lookback", cfg.train.arch.lookback},
               {"samples", {{"train", split.train.size()}, {"validation", split.validation.size()},
                            {"test", split.test.size()}}}};
  if (model == "lstm") {
    auto init = predict::LstmModel::initialize(cfg.train.arch, derive_seed(cfg.train.train.seed, 1));
    const auto fit = predict::train(std::move(init), split, cfg.train.train);
    predict::save_model(fit.model, cfg.train.train, model_path);
    json epochs = json::array();
    for (const auto& e : fit.log.epochs) {
      epochs.push_back(json{{"epoch", e.epoch}, {"train_loss", number(e.train_loss)},
                        {"validation_loss", number(e.validation_loss)}});
    }
    report["parameter_count"] = fit.log.parameter_count;
    report["training"] = json{{"epochs", epochs},
                          {"best_epoch", fit.log.best_epoch},
                          {"best_validation_loss", number(fit.log.best_validation_loss)},
                          {"early_stopped", fit.log.early_stopped}};
    report["test"] = report_json(predict::evaluate(fit.model, split.test));
    json baselines;
    for (const std::string kind : {"ridge", "lasso"}) {
      baselines[kind] = linear_json(predict::select_lambda(kind, cfg.train.lambdas, split.train, split.validation),
                                    split);
    }
    report["baselines"] = baselines;
  } else {
    const auto fit = predict::select_lambda(model, cfg.train.lambdas, split.train, split.validation);
    predict::save_model(fit, model_path);
    const auto lin = linear_json(fit, split);
    report["lambda"] = lin["lambda"];
    report["sweeps"] = lin["sweeps"];
    report["nonzero"] = lin["nonzero"];
    report["test"] = lin["test"];
  }
  write_json(report_path, report);
}

// ----------------------------------------------------------- backtest

json metrics_json(const backtest::Metrics& m) {
  return {{"n", m.n},
          {"mean", number(m.mean)},
          {"sd", number(m.sd)},
          {"sharpe", number(m.sharpe)},
          {"cumulative_return", number(m.cumulative_return)},
          {"annualized_return", number(m.annualized_return)},
          {"max_drawdown", number(m.max_drawdown)},
          {"calmar", number(m.calmar)},
          {"hit_rate", number(m.hit_rate)}};
}

json ci_json(const backtest::BootstrapCI& ci, double level) {
  return {{"statistic", ci.statistic}, {"point", number(ci.point)},   {"lower", number(ci.lower)},
          {"upper", number(ci.upper)}, {"level", level},              {"block_length", ci.block_length},
          {"replications", ci.replications}, {"seed", ci.seed}};
}

void write_backtest(const backtest::BacktestReport& rep, const std::string& label,
                    const backtest::BootstrapOptions& boot, const fs::path& output) {
  const auto net = rep.net_returns();
  json doc{{"label", label},
           {"strategy", rep.strategy},
           {"config", {{"decile", rep.config.decile}, {"cost_roundtrip", rep.config.cost_roundtrip},
                       {"cost_bp", rep.config.cost_roundtrip * 1e4}, {"signal_lag", rep.config.signal_lag}}},
           {"days", rep.days.size()},
           {"first_date", format_date(rep.days.front().date)},
           {"last_date", format_date(rep.days.back().date)},
           {"metrics", metrics_json(rep.net)},
           {"gross_metrics", metrics_json(backtest::metrics(rep.gross_returns()))},
           {"hit_rate", number(rep.hit_rate)},
           {"mean_turnover", number(rep.mean_turnover)}};

  json cis = json::array();
  if (net.size() >= 2 * boot.block_length) {
    cis.push_back(ci_json(backtest::bootstrap_mean(net, boot), boot.level));
    if (rep.net.sharpe) cis.push_back(ci_json(backtest::bootstrap_sharpe(net, boot), boot.level));
  }
  doc["bootstrap"] = cis;

  json skipped = json::array();
  for (const auto& s : rep.skipped) {
    skipped.push_back({{"date", format_date(s.date)}, {"available", s.available}, {"reason", s.reason}});
  }
  doc["skipped"] = skipped;

  const auto sidecar = output.stem().string() + ".daily.csv";
  doc["daily_returns"] = sidecar;
  std::string daily = "signal_date,date,gross,turnover,net,position\n";
  for (const auto& d : rep.days) {
    daily += fmt::format("{},{},{},{},{},{}\n", format_date(d.signal_date), format_date(d.date), cell(d.gross),
                         cell(d.turnover), cell(d.net), cell(d.position));
  }
  csv::write_file(output.parent_path() / sidecar, daily);
  write_json(output, doc);
}

struct IcSeries {
  std::vector<Date> dates;
  std::vector<double> values;
};

IcSeries read_ic1(const fs::path& path) {
  const auto table = csv::read(path);
  const auto date_col = table.column("date");
  const auto ic_col = table.column("ic1");
  if (!date_col || !ic_col) {
    throw Error("backtest", "MissingColumn", fmt::format("{} needs date and ic1 columns", path.string()));
  }
  IcSeries out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto d = parse_date(row.at(*date_col));
    const auto v = csv::parse_double(row.at(*ic_col));
    if (!d || !v) throw Error("backtest", "UnparseableRow", fmt::format("{} line {}", path.string(), table.line_numbers[i]));
    out.dates.push_back(*d);
    out.values.push_back(*v);
  }
  return out;
}

// ------------------------------------------------------------- report

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

std::string table_text(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  auto line = [&](const std::vector<std::string>& r) {
    std::string s;
    for (std::size_t c = 0; c < r.size(); ++c) s += "  " + pad(r[c], width[c]);
    while (!s.empty() && s.back() == ' ') s.pop_back();
    out += s + "\n";
  };
  line(header);
  std::vector<std::string> rule;
  for (auto w : width) rule.emplace_back(w, '-');
  line(rule);
  for (const auto& r : rows) line(r);
  return out;
}

json find_ci(const json& bt, std::string_view statistic) {
  for (const auto& ci : bt["bootstrap"]) {
    if (ci["statistic"] == statistic) return ci;
  }
  return nullptr;
}

}  // namespace

panel::FlowMatrix load_flow_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("panel", "FileNotFound", path.string());
  std::string header;
  std::getline(in, header);
  const auto fields = csv::split_line(header);
  if (std::find(fields.begin(), fields.end(), "ticker") != fields.end()) {
    return panel::aggregate(panel::read_normalized(path));
  }
  return panel::read_flow_matrix(path);
}

void run_ingest(const IngestArgs& args) {
  const auto cfg = config_for(args.config, std::nullopt);
  cfg.cleaning.validate();
  const auto result = panel::ingest_csv(args.input, cfg.columns);
  panel::CleaningLog log;
  const auto cleaned = panel::clean(result.panel, cfg.cleaning, &log);
  panel::write_csv(cleaned, args.output);
  if (!result.rejections.empty()) {
    std::string rows = "line,reason\n";
    for (const auto& [line, reason] : result.rejections) rows += fmt::format("{},\"{}\"\n", line, reason);
    csv::write_file(args.output.parent_path() / (args.output.stem().string() + ".rejected.csv"), rows);
  }
  fmt::print("ingest: {} records kept, {} rejected, {} tickers dropped as sparse, {} as small-cap, {} forward-filled\n",
             cleaned.size(), result.rejected, log.removed_sparse_years.size(), log.removed_small_cap.size(),
             log.filled_records);
}

void run_synth(const SynthArgs& args) {
  auto cfg = config_for(args.config, args.seed);
  cfg.synth.validate();
  const auto sp = synth::generate(cfg.synth);
  panel::write_csv(sp.panel, args.output);
  if (!args.truth.empty()) synth::write_truth(sp, args.truth);
  fmt::print("synth: {} stocks x {} days\n", sp.panel.universe().size(), sp.dates.size());
}

void run_normalize(const NormalizeArgs& args) {
  const auto method = panel::parse_normalizer(args.method);
  if (!method) throw PreconditionError("panel", fmt::format("unknown normalizer '{}'", args.method));
  const auto market = read_panel(args.panel);
  const panel::NormalizerSpec spec{*method, args.window, args.winsorize_sigma};
  const auto flows = panel::normalize_panel(market, spec);
  panel::write_normalized(flows, args.output);
  if (!args.market.empty()) panel::write_flow_matrix(panel::aggregate(flows), args.market);
}

void run_ica(const IcaArgs& args) {
  IcaSettings settings;
  settings.rolling = args.rolling;
  settings.window = args.window;
  settings.step = args.step;
  settings.fastica.seed = seed_override(args.seed).value_or(0);
  const auto flows = load_flow_matrix(args.flows);
  const auto factors = args.factors.empty() ? std::vector<ica::FactorSeries>{} : ica::read_factors(args.factors);
  fs::create_directories(args.output);
  (void)stage_ica(flows, factors, settings, args.output);
}

void run_coherence(const CoherenceArgs& args) {
  CoherenceSettings settings;
  settings.smoothing = args.smoothing;
  if (!args.pairs.empty()) {
    settings.pairs.clear();
    for (const auto& p : args.pairs) {
      const auto pair = parse_pair(p);
      if (!pair) throw PreconditionError("wavelet", fmt::format("bad pair '{}' (expected e.g. foreign:inst)", p));
      settings.pairs.push_back(*pair);
    }
  }
  stage_coherence(load_flow_matrix(args.flows), settings, args.output);
}

void run_train(const TrainArgs& args) {
  auto cfg = config_for(args.config, args.seed);
  cfg.validate();
  if (args.model != "lstm" && args.model != "ridge" && args.model != "lasso") {
    throw PreconditionError("predict", fmt::format("unknown model '{}'", args.model));
  }
  const auto report = args.report.empty() ? args.out.parent_path() / (args.out.stem().string() + ".report.json")
                                          : args.report;
  stage_train(read_panel(args.panel), cfg, args.model, args.out, report);
}

void run_backtest(const BacktestArgs& args) {
  const auto kind = backtest::parse_strategy(args.strategy);
  if (!kind) throw PreconditionError("backtest", fmt::format("unknown strategy '{}'", args.strategy));
  backtest::StrategyConfig cfg;
  cfg.decile = args.decile;
  cfg.cost_roundtrip = args.cost_bp * 1e-4;
  cfg.signal_lag = args.signal_lag;
  backtest::BootstrapOptions boot;
  boot.block_length = args.block_length;
  boot.replications = args.replications;
  boot.seed = seed_override(args.seed).value_or(0);
  const auto market = read_panel(args.panel);
  backtest::BacktestReport rep;
  if (*kind == backtest::StrategyKind::SimpleMomentum) {
    rep = backtest::run_momentum(market, panel::read_normalized(args.signal), cfg);
  } else {
    const auto ic = read_ic1(args.signal);
    rep = backtest::run_timing(market, ic.dates, ic.values, cfg);
  }
  write_backtest(rep, args.label.empty() ? rep.strategy : args.label, boot, args.output);
}

std::string run_report(const ReportArgs& args) {
  const auto& run = args.run;
  if (!fs::is_directory(run)) throw Error("report", "MissingArtifact", fmt::format("run directory {}", run.string()));
  const auto ica_doc = read_json(run / "ica" / "summary.json", "ica");
  const auto bands_path = run / "coherence" / "bands.csv";
  if (!fs::is_regular_file(bands_path)) {
    throw Error("report", "MissingArtifact", fmt::format("coherence ({})", bands_path.string()));
  }
  const auto bands = csv::read(bands_path);
  const auto train_doc = read_json(run / "train" / "report.json", "prediction");
  std::vector<fs::path> backtests;
  if (fs::is_directory(run / "backtest")) {
    for (const auto& e : fs::directory_iterator(run / "backtest")) {
      if (e.path().extension() == ".json") backtests.push_back(e.path());
    }
  }
  if (backtests.empty()) throw Error("report", "MissingArtifact", fmt::format("backtest ({})", (run / "backtest").string()));
  std::sort(backtests.begin(), backtests.end());

  json summary;
  std::string text;

  // ICA factors.
  json ica_sec{{"converged", ica_doc["converged"]}, {"iterations", ica_doc["iterations"]},
               {"mixing", ica_doc["mixing"]}, {"top_factors", ica_doc["top_factors"]}};
  if (ica_doc.contains("stability")) ica_sec["stability"] = ica_doc["stability"];
  summary["ica"] = ica_sec;
  text += "ICA factors\n";
  {
    std::vector<std::vector<std::string>> rows;
    for (int k = 0; k < 3; ++k) {
      std::vector<std::string> row{fmt::format("IC{}", k + 1)};
      for (int g = 0; g < 3; ++g) row.push_back(sig4(ica_doc["mixing"][g][k]));
      const auto& tops = ica_doc["top_factors"];
      if (tops.size() == 3) {
        row.push_back(tops[k]["factor"].get<std::string>());
        row.push_back(sig4(tops[k]["r"]));
        row.push_back(sig4(tops[k]["p_value"]));
      } else {
        row.insert(row.end(), {"n/a", "n/a", "n/a"});
      }
      rows.push_back(row);
    }
    text += table_text({"component", "a_foreign", "a_inst", "a_indiv", "top_factor", "r", "p"}, rows);
    if (ica_doc.contains("stability") && ica_doc["stability"].contains("median_drift")) {
      const auto& s = ica_doc["stability"];
      text += fmt::format("  rolling drift: median {}, max {} (window starting {})\n", sig4(s["median_drift"]),
                          sig4(s["max_drift"]), s["max_drift_window_start"].get<std::string>());
    }
  }

  // Coherence bands.
  json coh = json::array();
  text += "\nCoherence by scale band\n";
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : bands.rows) {
      json entry{{"pair", r.at(0)}};
      std::vector<std::string> row{r.at(0)};
      for (std::size_t b = 1; b < bands.header.size(); ++b) {
        const auto v = csv::parse_double(r.at(b));
        entry[bands.header[b]] = v ? json(*v) : json(nullptr);
        row.push_back(v ? sig4(*v) : "n/a");
      }
      coh.push_back(entry);
      rows.push_back(row);
    }
    text += table_text(bands.header, rows);
  }
  summary["coherence"] = coh;

  // Prediction.
  json pred{{"model", train_doc["model"]}, {"test", train_doc["test"]}};
  if (train_doc.contains("baselines")) pred["baselines"] = train_doc["baselines"];
  summary["prediction"] = pred;
  text += "\nPrediction (test split)\n";
  {
    std::vector<std::vector<std::string>> rows;
    auto add = [&](const std::string& name, const json& t) {
      rows.push_back({name, sig4(t["n"]), sig4(t["rmse"]), sig4(t["pearson_correlation"]), sig4(t["hit_rate"]),
                      sig4(t["information_ratio"]), sig4(t["prediction_std"]), sig4(t["target_std"]),
                      sig4(t["collapsed"])});
    };
    add(train_doc["model"].get<std::string>(), train_doc["test"]);
    if (train_doc.contains("baselines")) {
      for (const auto& [name, b] : train_doc["baselines"].items()) add(name, b["test"]);
    }
    text += table_text({"model", "n", "rmse", "corr", "hit", "IR", "pred_sd", "target_sd", "collapsed"}, rows);
  }

  // Strategy comparison.
  json strategies = json::array();
  text += "\nStrategy comparison (net of costs)\n";
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& path : backtests) {
      const auto bt = read_json(path, "backtest");
      const auto& m = bt["metrics"];
      const auto ci = find_ci(bt, "sharpe");
      strategies.push_back({{"label", bt["label"]}, {"strategy", bt["strategy"]}, {"metrics", m},
                            {"mean_turnover", bt["mean_turnover"]}, {"sharpe_ci", ci}});
      rows.push_back({bt["label"].get<std::string>(), sig4(m["sharpe"]),
                      ci.is_null() ? "n/a" : fmt::format("[{}, {}]", sig4(ci["lower"]), sig4(ci["upper"])),
                      sig4(m["cumulative_return"]), sig4(m["annualized_return"]), sig4(m["max_drawdown"]),
                      sig4(m["calmar"]), sig4(m["hit_rate"]), sig4(bt["mean_turnover"])});
    }
    text += table_text({"strategy", "sharpe", "sharpe_ci", "cumulative", "annualized", "max_dd", "calmar", "hit",
                        "turnover"},
                       rows);
  }
  summary["strategies"] = strategies;
  summary["sections"] = {"ica", "coherence", "prediction", "strategies"};

  const auto out = args.output.empty() ? run : args.output;
  write_json(out / "summary.json", summary);
  csv::write_file(out / "summary.txt", text);
  return text;
}

void run_pipeline(const PipelineArgs& args) {
  auto cfg = config_for(args.config, args.seed);
  cfg.validate();
  const auto out = args.output.empty() ? cfg.output : args.output;
  fs::create_directories(out);

  panel::Panel market;
  std::vector<ica::FactorSeries> factors;
  if (cfg.source == "synth") {
    const auto sp = synth::generate(cfg.synth);
    market = sp.panel;
    synth::write_truth(sp, out / "truth.csv");
    // Without exogenous factors the planted sources serve as the reference.
    factors = ica::read_factors(cfg.factors.empty() ? out / "truth.csv" : cfg.factors);
  } else {
    const auto ingested = panel::ingest_csv(cfg.input, cfg.columns);
    market = panel::clean(ingested.panel, cfg.cleaning);
    if (!cfg.factors.empty()) factors = ica::read_factors(cfg.factors);
  }
  panel::write_csv(market, out / "panel.csv");
  fmt::print("pipeline: panel {} stocks x {} dates\n", market.universe().size(), market.calendar().size());

  const auto flows = panel::normalize_panel(market, cfg.normalize);
  auto raw_spec = cfg.normalize;
  raw_spec.method = panel::FlowNormalizer::Raw;
  const auto raw = panel::normalize_panel(market, raw_spec);
  const auto method = std::string(panel::normalizer_name(cfg.normalize.method));
  panel::write_normalized(flows, out / "flows" / (method + ".csv"));
  panel::write_normalized(raw, out / "flows" / "raw.csv");
  const auto matrix = panel::aggregate(flows);
  panel::write_flow_matrix(matrix, out / "flows" / "market.csv");

  fs::create_directories(out / "ica");
  const auto ica_result = stage_ica(matrix, factors, cfg.ica, out / "ica");
  fmt::print("pipeline: ica {} in {} iterations\n", ica_result.converged ? "converged" : "did not converge",
             ica_result.iterations);

  stage_coherence(matrix, cfg.coherence, out / "coherence" / "coherence.csv");
  fmt::print("pipeline: coherence written\n");

  fs::create_directories(out / "train");
  stage_train(market, cfg, cfg.train.model, out / "train" / "model.json", out / "train" / "report.json");
  fmt::print("pipeline: {} model trained\n", cfg.train.model);

  const auto& strat = cfg.backtest.strategy;
  const auto& boot = cfg.backtest.bootstrap;
  write_backtest(backtest::run_momentum(market, flows, strat), "momentum_" + method, boot,
                 out / "backtest" / "momentum.json");
  write_backtest(backtest::run_momentum(market, raw, strat), "momentum_raw", boot, out / "backtest" / "momentum_raw.json");
  write_backtest(backtest::run_ica_factor(matrix, market, ica_result, strat), "ica_timing", boot,
                 out / "backtest" / "ica.json");

  std::cout << run_report({out, out});
}

}  // namespace flowlab::cli
