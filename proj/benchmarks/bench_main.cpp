#include <vector>

#include <Eigen/Core>
#include <benchmark/benchmark.h>

#include "flowlab/backtest.hpp"
#include "flowlab/ica.hpp"
#include "flowlab/lstm.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/synth.hpp"
#include "flowlab/wavelet.hpp"

using namespace flowlab;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

Eigen::MatrixXd laplace_mix(Eigen::Index rows, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd s(rows, 3);
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = rng.laplace(1.0);
  Eigen::Matrix3d a;
  a << 1.0, 0.4, -0.3, 0.2, 1.0, 0.5, -0.6, 0.1, 1.0;
  return s * a.transpose();
}

predict::Batch random_batch(const predict::Architecture& arch, Eigen::Index size, std::uint64_t seed) {
  Rng rng(seed);
  predict::Batch b;
  for (int t = 0; t < arch.lookback; ++t) {
    Eigen::MatrixXd step(arch.input_dim, size);
    for (Eigen::Index i = 0; i < step.size(); ++i) step(i) = rng.normal();
    b.steps.push_back(std::move(step));
  }
  b.targets.resize(size);
  for (Eigen::Index i = 0; i < size; ++i) b.targets(i) = rng.normal();
  return b;
}

void BM_FastIca(benchmark::State& state) {
  const auto x = laplace_mix(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(ica::run_ica(x, {.seed = 7}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FastIca)->Arg(2520)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_Cwt(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(wavelet::cwt(x));
}
BENCHMARK(BM_Cwt)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_Coherence(benchmark::State& state) {
  const auto a = noise(static_cast<std::size_t>(state.range(0)), 3);
  const auto b = noise(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(wavelet::coherence(a, b, 15));
}
BENCHMARK(BM_Coherence)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_LstmForward(benchmark::State& state) {
  const predict::Architecture arch;
  const auto model = predict::LstmModel::initialize(arch, 5);
  const auto batch = random_batch(arch, state.range(0), 6);
  for (auto _ : state) benchmark::DoNotOptimize(predict::forward_batch(model, batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LstmForward)->Arg(1)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_LstmGradient(benchmark::State& state) {
  const predict::Architecture arch;
  const auto model = predict::LstmModel::initialize(arch, 5);
  const auto batch = random_batch(arch, state.range(0), 6);
  auto grad = predict::LstmModel::zeros(arch).params;
  for (auto _ : state) benchmark::DoNotOptimize(predict::loss_and_gradient(model, batch, &grad));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LstmGradient)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_BootstrapSharpe(benchmark::State& state) {
  auto x = noise(static_cast<std::size_t>(state.range(0)), 8);
  for (auto& v : x) v = 0.0005 + 0.01 * v;
  backtest::BootstrapOptions opts;
  opts.seed = 9;
  for (auto _ : state) benchmark::DoNotOptimize(backtest::bootstrap_sharpe(x, opts));
}
BENCHMARK(BM_BootstrapSharpe)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Synth(benchmark::State& state) {
  synth::SynthConfig cfg;
  cfg.n_stocks = static_cast<int>(state.range(0));
  cfg.n_days = 600;
  for (auto _ : state) benchmark::DoNotOptimize(synth::generate(cfg));
}
BENCHMARK(BM_Synth)->Arg(60)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
