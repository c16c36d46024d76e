#include "crs/environment.hpp"

#include <cmath>

#include "crs/greedy.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace crs;
using testutil::env_options;

TEST_CASE("state dimensions follow the per-strategy layout") {
  CHECK(state_dim_for(Strategy::Crs, 5) == 19);
  CHECK(state_dim_for(Strategy::Crs, 3) == 13);
  CHECK(state_dim_for(Strategy::Rsma, 5) == 16);
  CHECK(state_dim_for(Strategy::Sdma, 5) == 10);

  Environment env(env_options(Strategy::Crs, 5), 1);
  CHECK(env.state_dim() == 19);
  CHECK(env.reset().size() == 19);
}

TEST_CASE("degenerate configurations are rejected") {
  EnvOptions opts = env_options(Strategy::Crs, 3);
  opts.ud_count = 0;
  CHECK_THROWS_AS(Environment(opts, 1), std::invalid_argument);

  opts = env_options(Strategy::Crs, 3);
  CHECK_THROWS_AS(Environment(opts, 1, 0), std::invalid_argument);

  opts.gains.noise_power = 0.0;
  CHECK_THROWS_AS(Environment(opts, 1), std::domain_error);
}

TEST_CASE("resets rebuild the identical deployment") {
  Environment env(env_options(Strategy::Crs, 4), 7);
  env.reset();
  const auto positions = env.geometry().ud_positions;
  env.reset();
  CHECK(env.geometry().ud_positions == positions);

  Environment twin(env_options(Strategy::Crs, 4), 7);
  twin.reset();
  CHECK(twin.geometry().ud_positions == positions);
}

TEST_CASE("same seed and action reproduce the step outcome") {
  const EnvOptions opts = env_options(Strategy::Crs, 2);
  Rng arng(99);
  const ResourceAction action =
      sample_uniform_action(Strategy::Crs, 2, opts.gains.tx_power_sat, arng);

  Environment a(opts, 13), b(opts, 13);
  a.reset();
  b.reset();
  const StepOutcome oa = a.step(action);
  const StepOutcome ob = b.step(action);
  CHECK(oa.reward == ob.reward);
  CHECK(oa.next_state == ob.next_state);
  CHECK(oa.report.rate_common == ob.report.rate_common);
}

TEST_CASE("zero transmit power earns zero reward") {
  const EnvOptions opts = env_options(Strategy::Crs, 2);
  Environment env(opts, 3);
  env.reset();
  ResourceAction idle;
  idle.power.assign(4, 0.0);
  idle.common_split.assign(3, 0.0);
  idle.theta = 0.5;
  const StepOutcome out = env.step(idle);
  CHECK(out.reward == 0.0);
}

TEST_CASE("reward is the minimum UD total rate") {
  const EnvOptions opts = env_options(Strategy::Crs, 3);
  Environment env(opts, 17);
  env.reset();
  Rng arng(5);
  const ResourceAction action =
      sample_uniform_action(Strategy::Crs, 3, opts.gains.tx_power_sat, arng);
  const StepOutcome out = env.step(action);
  double want = out.report.rate_total[1];
  for (std::size_t i = 2; i < out.report.rate_total.size(); ++i)
    want = std::min(want, out.report.rate_total[i]);
  CHECK(out.reward == want);
  CHECK(out.reward == out.report.min_rate);
}

TEST_CASE("fading override passes straight through the rate chain") {
  const EnvOptions opts = env_options(Strategy::Crs, 2);
  Environment env(opts, 23);
  env.reset();

  Rng fade(77);
  const LinkRealization links =
      realize_links(opts.soil, env.geometry(), opts.gains, fade);
  Rng arng(11);
  const ResourceAction action =
      sample_uniform_action(Strategy::Crs, 2, opts.gains.tx_power_sat, arng);

  env.set_fading_override(links);
  const StepOutcome out = env.step(action);
  const RateReport want = evaluate_crs(links, action, env.rate_params());
  CHECK(out.reward == want.min_rate);
  CHECK(out.report.rate_common == want.rate_common);
  CHECK(out.links.h_ar == links.h_ar);

  // The override is one-shot; the next step draws fresh fading.
  const StepOutcome next = env.step(action);
  CHECK(next.links.h_ar != links.h_ar);
}

TEST_CASE("state packs the report in layout order") {
  EnvOptions opts = env_options(Strategy::Crs, 2);
  opts.log_sinr = true;
  Environment env(opts, 29);
  env.reset();
  Rng arng(31);
  const ResourceAction action =
      sample_uniform_action(Strategy::Crs, 2, opts.gains.tx_power_sat, arng);
  const StepOutcome out = env.step(action);
  const RateReport& r = out.report;
  const EnvState& s = out.next_state;
  REQUIRE(s.size() == 10);
  CHECK(s[0] == r.rate_common);
  CHECK(s[1] == r.rate_total[0]);
  CHECK(s[2] == r.rate_total[1]);
  CHECK(s[3] == r.rate_total[2]);
  CHECK(s[4] == std::log1p(r.sinr_common_relay));
  CHECK(s[5] == std::log1p(r.sinr_priv_relay));
  CHECK(s[6] == std::log1p(r.sinr_common_ud[0]));
  CHECK(s[7] == std::log1p(r.sinr_common_ud[1]));
  CHECK(s[8] == std::log1p(r.sinr_priv_ud[0]));
  CHECK(s[9] == std::log1p(r.sinr_priv_ud[1]));

  EnvOptions raw_opts = opts;
  raw_opts.log_sinr = false;
  Environment raw_env(raw_opts, 29);
  raw_env.reset();
  const StepOutcome raw_out = raw_env.step(action);
  CHECK(raw_out.next_state[4] == raw_out.report.sinr_common_relay);
}

TEST_CASE("fade streams share geometry but not fading") {
  const EnvOptions opts = env_options(Strategy::Crs, 2);
  Environment train_env(opts, 41, 1);
  Environment eval_env(opts, 41, 4);
  train_env.reset();
  eval_env.reset();
  CHECK(train_env.geometry().ud_positions == eval_env.geometry().ud_positions);

  Rng arng(43);
  const ResourceAction action =
      sample_uniform_action(Strategy::Crs, 2, opts.gains.tx_power_sat, arng);
  const StepOutcome to = train_env.step(action);
  const StepOutcome eo = eval_env.step(action);
  CHECK(to.reward != eo.reward);
}

TEST_CASE("uniform action sampling is feasible for every strategy") {
  Rng rng(47);
  for (Strategy s : {Strategy::Crs, Strategy::Rsma, Strategy::Sdma}) {
    for (int i = 0; i < 200; ++i) {
      const ResourceAction a = sample_uniform_action(s, 3, 2.0, rng);
      CHECK_NOTHROW(validate_action(a, s, 3, 2.0));
      double sum = 0.0;
      for (double p : a.power) sum += p;
      CHECK(std::abs(sum - 2.0) < 1e-12);
      if (s != Strategy::Crs) CHECK(a.theta == 1.0);
      if (s == Strategy::Sdma) CHECK(a.common_split.empty());
    }
  }
}

TEST_CASE("greedy search archives its best step") {
  const EnvOptions opts = env_options(Strategy::Crs, 2);
  Environment env(opts, 51);
  Rng rng(53);
  const GreedyResult result = run_greedy(env, 64, 1.0, rng);
  REQUIRE(result.rewards.size() == 64);
  double best = result.rewards[0];
  for (double r : result.rewards) best = std::max(best, r);
  CHECK(result.best_reward == best);
  CHECK(result.best_reward >= result.rewards[0]);
  CHECK_NOTHROW(validate_action(result.best_action, Strategy::Crs, 2,
                                opts.gains.tx_power_sat));
}

TEST_CASE("greedy replay without exploration repeats the first action") {
  const EnvOptions opts = env_options(Strategy::Rsma, 2);
  Environment env(opts, 61);
  Rng long_rng(63);
  const GreedyResult long_run = run_greedy(env, 32, 0.0, long_rng);

  Environment env_short(opts, 61);
  Rng short_rng(63);
  const GreedyResult first = run_greedy(env_short, 1, 0.0, short_rng);

  CHECK(long_run.best_action.power == first.best_action.power);
  CHECK(long_run.best_action.common_split == first.best_action.common_split);
  CHECK(long_run.best_action.theta == first.best_action.theta);
}

TEST_CASE("greedy rejects an out-of-range exploration rate") {
  Environment env(env_options(Strategy::Crs, 2), 67);
  Rng rng(69);
  CHECK_THROWS_AS(run_greedy(env, 4, 1.5, rng), std::domain_error);
}
