#pragma once

#include <cstddef>
#include <vector>

#include "crs/environment.hpp"

namespace crs {

// Feasible action drawn uniformly: powers and splits uniform over their
// simplexes (Exp(1) variates normalized, with a slack coordinate for the
// splits), theta uniform on [0,1].
ResourceAction sample_uniform_action(Strategy strategy, std::size_t ud_count,
                                     double total_power, Rng& rng);

struct GreedyResult {
  std::vector<double> rewards;  // realized reward per step
  ResourceAction best_action;
  double best_reward = 0.0;
};

// Archive-based baseline: every step either explores a fresh uniform
// action (probability explore_rate) or replays the best archived one.
// All (action, reward) pairs are archived, replays included.
GreedyResult run_greedy(Environment& env, std::size_t steps,
                        double explore_rate, Rng& rng);

}  // namespace crs
