#include "app.hpp"

#include <functional>

#include "CLI11.hpp"

#include "commands.hpp"
#include "flowlab/error.hpp"

namespace flowlab::cli {

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Investor-flow research toolkit: ingest, normalize, decompose, predict and backtest.", "flowlab"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::function<void()> action;

  IngestArgs ingest;
  auto* c = app.add_subcommand("ingest", "Read a stock-day CSV, clean it and write a panel file");
  c->add_option("--input", ingest.input, "Source CSV")->required()->check(CLI::ExistingFile);
  c->add_option("--config", ingest.config, "Run config ([columns] and [cleaning] are used)")->check(CLI::ExistingFile);
  c->add_option("--output", ingest.output, "Panel file to write")->required();
  c->callback([&] { action = [&] { run_ingest(ingest); }; });

  SynthArgs synth;
  c = app.add_subcommand("synth", "Generate a synthetic panel with planted flow sources");
  c->add_option("--config", synth.config, "Run config ([synth] is used)")->check(CLI::ExistingFile);
  c->add_option("--output", synth.output, "Panel file to write")->required();
  c->add_option("--truth", synth.truth, "CSV of the latent sources (date,s1,s2,s3)");
  c->add_option("--seed", synth.seed, "Master seed (overrides FLOWLAB_SEED and the config)");
  c->callback([&] { action = [&] { run_synth(synth); }; });

  NormalizeArgs norm;
  c = app.add_subcommand("normalize", "Normalize per-stock investor flows");
  c->add_option("--method", norm.method, "raw, matched or zscore")
      ->check(CLI::IsMember({"raw", "matched", "matched_filter", "zscore"}));
  c->add_option("--panel", norm.panel, "Panel file")->required()->check(CLI::ExistingFile);
  c->add_option("--output", norm.output, "Per-stock flows (ticker,date,foreign,inst,indiv,signal)")->required();
  c->add_option("--market", norm.market, "Also write the market-aggregated flow matrix here");
  c->add_option("--window", norm.window, "Trailing z-score window")->capture_default_str();
  c->add_option("--winsorize", norm.winsorize_sigma, "Winsorization bound in sd (0 disables)")->capture_default_str();
  c->callback([&] { action = [&] { run_normalize(norm); }; });

  IcaArgs ica;
  c = app.add_subcommand("ica", "FastICA decomposition of market flows");
  c->add_option("--flows", ica.flows, "Flow matrix or per-stock flows")->required()->check(CLI::ExistingFile);
  c->add_option("--factors", ica.factors, "CSV of exogenous factors (date plus one column per factor)")
      ->check(CLI::ExistingFile);
  c->add_flag("--rolling", ica.rolling, "Also run the rolling-window stability diagnostic");
  c->add_option("--window", ica.window, "Rolling window length")->capture_default_str();
  c->add_option("--step", ica.step, "Rolling window step")->capture_default_str();
  c->add_option("--seed", ica.seed, "FastICA seed (overrides FLOWLAB_SEED)");
  c->add_option("--output", ica.output, "Report directory")->required();
  c->callback([&] { action = [&] { run_ica(ica); }; });

  CoherenceArgs coh;
  c = app.add_subcommand("coherence", "Wavelet coherence between investor-group flows");
  c->add_option("--flows", coh.flows, "Flow matrix or per-stock flows")->required()->check(CLI::ExistingFile);
  c->add_option("--pair", coh.pairs, "Group pair such as foreign:inst (repeatable; default all three)");
  c->add_option("--smoothing", coh.smoothing, "Odd time-smoothing window")->capture_default_str();
  c->add_option("--output", coh.output, "Coherence field CSV; bands.csv is written beside it")->required();
  c->callback([&] { action = [&] { run_coherence(coh); }; });

  TrainArgs train;
  c = app.add_subcommand("train", "Train a return predictor on normalized flows");
  c->add_option("--model", train.model, "lstm, ridge or lasso")->check(CLI::IsMember({"lstm", "ridge", "lasso"}));
  c->add_option("--panel", train.panel, "Panel file")->required()->check(CLI::ExistingFile);
  c->add_option("--config", train.config, "Run config ([normalize] and [train] are used)")->check(CLI::ExistingFile);
  c->add_option("--out", train.out, "Model file")->required();
  c->add_option("--report", train.report, "Report JSON (default: <model stem>.report.json)");
  c->add_option("--seed", train.seed, "Master seed (overrides FLOWLAB_SEED and the config)");
  c->callback([&] { action = [&] { run_train(train); }; });

  BacktestArgs bt;
  c = app.add_subcommand("backtest", "Backtest a flow strategy with costs and bootstrap intervals");
  c->add_option("--strategy", bt.strategy, "momentum or ica")->check(CLI::IsMember({"momentum", "ica"}));
  c->add_option("--panel", bt.panel, "Panel file")->required()->check(CLI::ExistingFile);
  c->add_option("--signal", bt.signal, "Per-stock flows (momentum) or ICA components.csv (ica)")
      ->required()
      ->check(CLI::ExistingFile);
  c->add_option("--cost-bp", bt.cost_bp, "Round-trip cost in basis points")->capture_default_str();
  c->add_option("--decile", bt.decile, "Fraction of names per leg")->capture_default_str();
  c->add_option("--signal-lag", bt.signal_lag, "Days between signal and entry")->capture_default_str();
  c->add_option("--block-length", bt.block_length, "Bootstrap block length")->capture_default_str();
  c->add_option("--replications", bt.replications, "Bootstrap replications")->capture_default_str();
  c->add_option("--seed", bt.seed, "Bootstrap seed (overrides FLOWLAB_SEED)");
  c->add_option("--label", bt.label, "Name used in reports");
  c->add_option("--output", bt.output, "Report JSON; daily returns go to <stem>.daily.csv")->required();
  c->callback([&] { action = [&] { run_backtest(bt); }; });

  ReportArgs rep;
  c = app.add_subcommand("report", "Consolidate a run directory into summary.json and summary.txt");
  c->add_option("--run", rep.run, "Run directory")->required();
  c->add_option("--output", rep.output, "Directory for the summary (default: the run directory)");
  c->callback([&] { action = [&] { out << run_report(rep); }; });

  PipelineArgs pipe;
  c = app.add_subcommand("pipeline", "Run every stage end to end from one config");
  c->add_option("--config", pipe.config, "Run config")->required()->check(CLI::ExistingFile);
  c->add_option("--output", pipe.output, "Run directory (default: [run] output)");
  c->add_option("--seed", pipe.seed, "Master seed (overrides FLOWLAB_SEED and the config)");
  c->callback([&] { action = [&] { run_pipeline(pipe); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    action();
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitDomainError;
  } catch (const std::exception& e) {
    err << "flowlab: " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitOk;
}

}  // namespace flowlab::cli
