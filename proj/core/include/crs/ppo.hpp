#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "crs/environment.hpp"
#include "crs/neural.hpp"

namespace crs {

struct PpoHyper {
  std::size_t episodes = 2000;          // T_e
  std::size_t steps_per_episode = 512;  // T_b, also the batch size
  std::size_t update_rounds = 3;        // M
  double discount = 0.9;                // eta
  double gae_lambda = 0.95;             // varsigma
  double clip = 0.2;                    // epsilon
  double learning_rate = 1e-4;          // tau
  double entropy_coef = 0.01;           // decays linearly to entropy_coef_final
  double entropy_coef_final = 0.0;
  bool normalize_advantages = true;
  double grad_clip_norm = 0.5;
  double weight_decay = 1e-4;
  std::size_t hidden1 = 512;
  std::size_t hidden2 = 256;

  void validate() const;
};

// Raw action vector layout: [power logits | split logits | theta raw].
// The split softmax runs over the logits plus one slack logit pinned at
// zero, so split_dim raws produce fractions summing to < 1.
struct ActionLayout {
  std::size_t power_dim = 0;
  std::size_t split_dim = 0;
  bool has_theta = false;

  std::size_t raw_dim() const {
    return power_dim + split_dim + (has_theta ? 1 : 0);
  }
  static ActionLayout for_strategy(Strategy strategy, std::size_t ud_count);
};

// Numerically stable softmax (max-subtracted).
std::vector<double> softmax(std::span<const double> logits);

double sigmoid(double x);

// log(sigmoid'(x)) = -softplus(x) - softplus(-x); used as the
// change-of-variables term for the theta branch.
double log_sigmoid_derivative(double x);

// Maps a raw action onto the feasible set: powers through softmax scaled
// to total_power, split fractions through the slack-logit softmax, theta
// through a sigmoid. Satisfies the action validator by construction.
ResourceAction squash_action(std::span<const double> raw,
                             const ActionLayout& layout, double total_power);

// Actor and critic sharing one feature extractor: state -> hidden1 ->
// hidden2 (LayerNorm + GELU), then linear heads. Heads with zero output
// dimension (split for SDMA, theta outside CRS) stay empty. Each action
// branch is a diagonal Gaussian over its raw outputs with a learned
// log-std vector.
struct ActorCritic {
  neural::MlpParams trunk;
  neural::Layer power_head;
  neural::Layer split_head;
  neural::Layer theta_head;
  neural::Layer critic_head;
  std::vector<double> log_std_power;
  std::vector<double> log_std_split;
  std::vector<double> log_std_theta;
};

// Draw order is fixed (trunk layers, power, split, theta, critic) so a
// given rng seed always yields the same initialization.
ActorCritic make_actor_critic(std::size_t state_dim,
                              const ActionLayout& layout,
                              const PpoHyper& hyper, Rng& rng);

struct ActorCriticGrads {
  neural::MlpGrads trunk;
  neural::LayerGrads power_head;
  neural::LayerGrads split_head;
  neural::LayerGrads theta_head;
  neural::LayerGrads critic_head;
  std::vector<double> log_std_power;
  std::vector<double> log_std_split;
  std::vector<double> log_std_theta;
};

ActorCriticGrads make_zero_grads(const ActorCritic& nets);
void zero(ActorCriticGrads& grads);

// Ordered span lists for the optimizer; order matches between the two.
std::vector<std::span<double>> param_spans(ActorCritic& nets);
std::vector<std::span<const double>> grad_spans(const ActorCriticGrads& grads);

// Live policy plus the frozen copy the clipped objective is anchored to.
struct PolicyNetworks {
  std::size_t state_dim = 0;
  ActionLayout layout;
  ActorCritic live;
  ActorCritic old_actor;

  void sync_old() { old_actor = live; }
};

PolicyNetworks make_policy_networks(std::size_t state_dim,
                                    const ActionLayout& layout,
                                    const PpoHyper& hyper, Rng& rng);

struct ActResult {
  std::vector<double> raw;
  ResourceAction action;
  double log_prob = 0.0;  // density of the raw draw, theta branch corrected
                          // by the sigmoid change of variables
  double value = 0.0;
};

// Samples each branch (or takes the mean when deterministic; the rng is
// not consumed then). The state must already be normalized.
ActResult act(const ActorCritic& nets, const ActionLayout& layout,
              std::span<const double> state, double total_power, Rng& rng,
              bool deterministic = false);

struct Transition {
  std::vector<double> state;  // normalized observation as fed to the nets
  std::vector<double> raw_action;
  ResourceAction action;
  double log_prob = 0.0;  // under the collecting policy
  double reward = 0.0;
  double value = 0.0;
};

struct TrajectoryBatch {
  std::vector<Transition> steps;
  double bootstrap_value = 0.0;  // V(s_{T_b}) closing the batch
  std::vector<double> advantages;
  std::vector<double> returns;  // raw advantage + stored value
};

// Backward GAE recursion, equal to the explicit exponentially weighted
// TD-error sum. Fills raw advantages and returns; any advantage
// normalization is the update's concern.
void compute_gae(TrajectoryBatch& batch, const PpoHyper& hyper);

// Mean over t of min(r A, clip(r, 1-eps, 1+eps) A) with r = exp(new - old).
double clipped_surrogate(std::span<const double> new_log_probs,
                         std::span<const double> old_log_probs,
                         std::span<const double> advantages, double clip);

// d(surrogate term)/d(new_log_prob); exactly zero when the clip is active
// and the advantage pushes the ratio further outside the band.
double surrogate_grad_coeff(double new_log_prob, double old_log_prob,
                            double advantage, double clip);

struct LossReport {
  double actor = 0.0;    // clipped surrogate (to maximize)
  double critic = 0.0;   // value MSE against the stored returns
  double entropy = 0.0;  // summed branch entropies
  double combined = 0.0; // critic/2 - actor - entropy_coef * entropy
};

// Loss evaluation without touching parameters (advantages used as stored).
LossReport ppo_losses(const ActorCritic& nets, const TrajectoryBatch& batch,
                      const PpoHyper& hyper, double entropy_coef);

// One full-batch gradient step on the combined loss: analytic backward,
// global gradient-norm clip, AdamW, log-std projection onto its clamp
// range. max_ratio_dev (optional) receives max|r - 1| before the step.
LossReport ppo_update_round(ActorCritic& nets, const TrajectoryBatch& batch,
                            const PpoHyper& hyper, double entropy_coef,
                            neural::AdamWState& opt,
                            double* max_ratio_dev = nullptr);

// Welford running normalizer for state inputs; frozen at evaluation.
class RunningNorm {
 public:
  explicit RunningNorm(std::size_t dim);

  void observe(std::span<const double> x);
  std::vector<double> normalize(std::span<const double> x) const;
  void freeze() { frozen_ = true; }

  std::size_t dim() const { return mean_.size(); }
  double count() const { return count_; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& m2() const { return m2_; }
  void restore(std::vector<double> mean, std::vector<double> m2,
               double count);

 private:
  std::vector<double> mean_;
  std::vector<double> m2_;  // sum of squared deviations
  double count_ = 0.0;
  bool frozen_ = false;
};

struct EpisodeRow {
  std::size_t episode = 0;
  double mean_reward = 0.0;
  double actor_loss = 0.0;   // averaged over the update rounds
  double critic_loss = 0.0;
  double entropy = 0.0;
  double mean_theta = 0.0;
  double mean_pc_fraction = 0.0;  // common-stream share of the power budget
};

using EpisodeSink = std::function<void(const EpisodeRow&)>;

// The collect -> advantage -> update -> sync loop on one environment.
// Seed stream layout: the environment owns streams 0-1 of its root, the
// trainer derives 2 for initialization and 3 for action sampling.
class Trainer {
 public:
  Trainer(EnvOptions env_opts, PpoHyper hyper, std::uint64_t seed);

  // Runs hyper.episodes episodes; the environment continues across
  // episodes (no terminal states), the bootstrap value closes each batch.
  void train(const EpisodeSink& sink = {});

  // Frozen-policy evaluation: deterministic actions on a fresh environment
  // built from the given options (state dimension must match), one reward
  // per step over `draws` steps. The evaluation environment reuses the
  // seed's deployment geometry but runs on fading stream 4, so the draws
  // are disjoint from training.
  std::vector<double> evaluate_rewards(const EnvOptions& opts,
                                       std::size_t draws,
                                       std::uint64_t seed) const;
  double evaluate_mean_min_rate(const EnvOptions& opts, std::size_t draws,
                                std::uint64_t seed) const;
  double evaluate_mean_min_rate(std::size_t draws) const;

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  const PolicyNetworks& nets() const { return nets_; }
  PolicyNetworks& nets() { return nets_; }
  const RunningNorm& state_norm() const { return norm_; }
  const PpoHyper& hyper() const { return hyper_; }
  const EnvOptions& env_options() const { return env_opts_; }
  // Largest |r - 1| seen on the first update round of any episode so far.
  double max_first_round_ratio_dev() const { return max_first_round_dev_; }

 private:
  TrajectoryBatch collect(std::vector<double>& cur_norm);

  EnvOptions env_opts_;
  PpoHyper hyper_;
  std::uint64_t seed_;
  Environment env_;
  PolicyNetworks nets_;
  RunningNorm norm_;
  Rng action_rng_;
  neural::AdamWState opt_;
  std::size_t episodes_done_ = 0;
  double max_first_round_dev_ = 0.0;
};

}  // namespace crs
