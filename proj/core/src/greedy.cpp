#include "crs/greedy.hpp"

#include <stdexcept>

namespace crs {
namespace {

// Normalized Exp(1) draws are uniform on the probability simplex.
std::vector<double> simplex_point(std::size_t dim, Rng& rng) {
  std::vector<double> out(dim);
  double sum = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    out[i] = rng.exponential();
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace

ResourceAction sample_uniform_action(Strategy strategy, std::size_t ud_count,
                                     double total_power, Rng& rng) {
  ResourceAction action;
  std::size_t power_dim = 0;
  std::size_t split_dim = 0;
  switch (strategy) {
    case Strategy::Crs:
      power_dim = ud_count + 2;
      split_dim = ud_count + 1;
      action.theta = rng.uniform();
      break;
    case Strategy::Rsma:
      power_dim = ud_count + 1;
      split_dim = ud_count;
      action.theta = 1.0;
      break;
    case Strategy::Sdma:
      power_dim = ud_count;
      split_dim = 0;
      action.theta = 1.0;
      break;
  }
  action.power = simplex_point(power_dim, rng);
  for (double& p : action.power) p *= total_power;
  if (split_dim > 0) {
    // Slack coordinate makes the splits uniform over sum <= 1.
    std::vector<double> with_slack = simplex_point(split_dim + 1, rng);
    with_slack.pop_back();
    action.common_split = std::move(with_slack);
  }
  return action;
}

GreedyResult run_greedy(Environment& env, std::size_t steps,
                        double explore_rate, Rng& rng) {
  if (explore_rate < 0.0 || explore_rate > 1.0) {
    throw std::domain_error("greedy explore_rate outside [0, 1]");
  }
  env.reset();
  GreedyResult result;
  result.rewards.reserve(steps);
  bool have_best = false;
  const double total_power = env.options().gains.tx_power_sat;
  for (std::size_t t = 0; t < steps; ++t) {
    const bool explore = !have_best || rng.uniform() < explore_rate;
    ResourceAction action =
        explore ? sample_uniform_action(env.strategy(), env.ud_count(),
                                        total_power, rng)
                : result.best_action;
    StepOutcome outcome = env.step(action);
    result.rewards.push_back(outcome.reward);
    if (!have_best || outcome.reward > result.best_reward) {
      result.best_action = action;
      result.best_reward = outcome.reward;
      have_best = true;
    }
  }
  return result;
}

}  // namespace crs
