// Microbenchmarks for the hot paths of the simulator: channel realization,
// the rate chain, action squashing, advantage estimation, network
// forward/backward, and a full environment step.

#include <benchmark/benchmark.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "crs/channel.hpp"
#include "crs/constants.hpp"
#include "crs/environment.hpp"
#include "crs/greedy.hpp"
#include "crs/neural.hpp"
#include "crs/ppo.hpp"
#include "crs/rate_engine.hpp"
#include "crs/rng.hpp"

namespace {

using namespace crs;

AntennaGains bench_gains() {
  AntennaGains gains;
  gains.g_sat = db_to_linear(22.6);
  gains.g_relay = db_to_linear(5.0);
  gains.g_ud = db_to_linear(2.15);
  gains.tx_power_sat = 1.0;
  gains.tx_power_relay = 0.1;
  gains.noise_power = dbm_to_watt(-117.0);
  gains.num_antennas = 6;
  return gains;
}

EnvOptions bench_env_options(std::size_t ud_count) {
  EnvOptions opts;
  opts.strategy = Strategy::Crs;
  opts.ud_count = ud_count;
  opts.gains = bench_gains();
  return opts;
}

}  // namespace

static void BM_RealizeLinks(benchmark::State& state) {
  const auto ud_count = static_cast<std::size_t>(state.range(0));
  const SoilProfile soil;
  const AntennaGains gains = bench_gains();
  Rng rng(1);
  const Geometry geom =
      make_geometry(ud_count, 1000.0, 550e3, 5.0, soil.burial_depth, rng);
  for (auto _ : state) {
    LinkRealization links = realize_links(soil, geom, gains, rng);
    benchmark::DoNotOptimize(links);
  }
}
BENCHMARK(BM_RealizeLinks)->Arg(3)->Arg(5);

static void BM_EvaluateCrs(benchmark::State& state) {
  const auto ud_count = static_cast<std::size_t>(state.range(0));
  const SoilProfile soil;
  const AntennaGains gains = bench_gains();
  Rng rng(2);
  const Geometry geom =
      make_geometry(ud_count, 1000.0, 550e3, 5.0, soil.burial_depth, rng);
  const LinkRealization links = realize_links(soil, geom, gains, rng);
  const ResourceAction action =
      sample_uniform_action(Strategy::Crs, ud_count, gains.tx_power_sat, rng);
  const RateParams params{gains.noise_power, gains.tx_power_relay};
  for (auto _ : state) {
    RateReport report = evaluate_crs(links, action, params);
    benchmark::DoNotOptimize(report);
  }
}
BENCHMARK(BM_EvaluateCrs)->Arg(3)->Arg(5);

static void BM_SquashAction(benchmark::State& state) {
  const ActionLayout layout = ActionLayout::for_strategy(Strategy::Crs, 3);
  Rng rng(3);
  std::vector<double> raw(layout.raw_dim());
  for (double& x : raw) x = rng.uniform(-4.0, 4.0);
  for (auto _ : state) {
    ResourceAction action = squash_action(raw, layout, 1.0);
    benchmark::DoNotOptimize(action);
  }
}
BENCHMARK(BM_SquashAction);

static void BM_ComputeGae(benchmark::State& state) {
  PpoHyper hyper;
  Rng rng(4);
  TrajectoryBatch batch;
  batch.steps.resize(256);
  for (Transition& tr : batch.steps) {
    tr.reward = rng.uniform();
    tr.value = rng.uniform(-1.0, 1.0);
  }
  batch.bootstrap_value = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    compute_gae(batch, hyper);
    benchmark::DoNotOptimize(batch.advantages);
  }
}
BENCHMARK(BM_ComputeGae);

static void BM_NeuralForward(benchmark::State& state) {
  Rng rng(5);
  neural::MlpParams net;
  net.push_back(neural::make_layer(512, 13, true, neural::Activation::Gelu,
                                   std::sqrt(2.0), rng));
  net.push_back(neural::make_layer(256, 512, true, neural::Activation::Gelu,
                                   std::sqrt(2.0), rng));
  net.push_back(
      neural::make_layer(8, 256, false, neural::Activation::None, 0.01, rng));
  neural::Tensor2 input(256, 13);
  for (double& x : input.data) x = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    neural::Tensor2 out = neural::forward(net, input, nullptr);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_NeuralForward);

static void BM_NeuralForwardBackward(benchmark::State& state) {
  Rng rng(6);
  neural::MlpParams net;
  net.push_back(neural::make_layer(512, 13, true, neural::Activation::Gelu,
                                   std::sqrt(2.0), rng));
  net.push_back(neural::make_layer(256, 512, true, neural::Activation::Gelu,
                                   std::sqrt(2.0), rng));
  net.push_back(
      neural::make_layer(8, 256, false, neural::Activation::None, 0.01, rng));
  neural::Tensor2 input(256, 13);
  for (double& x : input.data) x = rng.uniform(-1.0, 1.0);
  neural::Tensor2 out_grad(256, 8, 1.0);
  neural::MlpGrads grads = neural::make_zero_grads(net);
  for (auto _ : state) {
    neural::ForwardCache cache;
    neural::Tensor2 out = neural::forward(net, input, &cache);
    benchmark::DoNotOptimize(out);
    neural::zero(grads);
    neural::Tensor2 in_grad = neural::backward(net, cache, out_grad, grads);
    benchmark::DoNotOptimize(in_grad);
  }
}
BENCHMARK(BM_NeuralForwardBackward);

static void BM_EnvStep(benchmark::State& state) {
  const auto ud_count = static_cast<std::size_t>(state.range(0));
  const EnvOptions opts = bench_env_options(ud_count);
  Environment env(opts, 7);
  env.reset();
  const ActionLayout layout =
      ActionLayout::for_strategy(opts.strategy, ud_count);
  const ResourceAction action =
      squash_action(std::vector<double>(layout.raw_dim(), 0.0), layout,
                    opts.gains.tx_power_sat);
  for (auto _ : state) {
    StepOutcome outcome = env.step(action);
    benchmark::DoNotOptimize(outcome);
  }
}
BENCHMARK(BM_EnvStep)->Arg(3)->Arg(5);
