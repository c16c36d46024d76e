#include "crs/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

namespace crs {
namespace {

using neural::ForwardCache;
using neural::Layer;
using neural::LayerGrads;
using neural::Tensor2;

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

// Ratios blow up under exp when a branch drifts; the log difference is
// clamped before exponentiation.
constexpr double kRatioLogClamp = 50.0;

double ratio_of(double new_lp, double old_lp) {
  return std::exp(std::clamp(new_lp - old_lp, -kRatioLogClamp, kRatioLogClamp));
}

Tensor2 head_forward(const Layer& head, const Tensor2& x) {
  Tensor2 y(x.rows, head.out_dim());
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double* yr = y.row(r);
    for (std::size_t o = 0; o < head.out_dim(); ++o) {
      const double* w = head.weight.row(o);
      double acc = head.bias[o];
      for (std::size_t i = 0; i < head.in_dim(); ++i) acc += w[i] * xr[i];
      yr[o] = acc;
    }
  }
  return y;
}

void head_backward(const Layer& head, const Tensor2& x, const Tensor2& gy,
                   LayerGrads& grads, Tensor2& gx) {
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double* gxr = gx.row(r);
    for (std::size_t o = 0; o < head.out_dim(); ++o) {
      const double go = gy.at(r, o);
      if (go == 0.0) continue;
      grads.bias[o] += go;
      double* gw = grads.weight.row(o);
      const double* w = head.weight.row(o);
      for (std::size_t i = 0; i < head.in_dim(); ++i) {
        gw[i] += go * xr[i];
        gxr[i] += go * w[i];
      }
    }
  }
}

LayerGrads zero_like(const Layer& layer) {
  LayerGrads g;
  g.weight = Tensor2(layer.out_dim(), layer.in_dim());
  g.bias.assign(layer.out_dim(), 0.0);
  if (layer.layer_norm) {
    g.ln_gain.assign(layer.out_dim(), 0.0);
    g.ln_offset.assign(layer.out_dim(), 0.0);
  }
  return g;
}

std::span<const double> row_span(const Tensor2& t, std::size_t r) {
  return {t.row(r), t.cols};
}

// Log-density of the raw draw under the current branch means, including
// theta's change-of-variables term. Shared verbatim between collection
// and update so first-round ratios are exactly one.
double raw_log_prob(const ActorCritic& nets, const ActionLayout& layout,
                    std::span<const double> mean_power,
                    std::span<const double> mean_split,
                    std::span<const double> mean_theta,
                    std::span<const double> raw) {
  double lp = neural::gaussian::log_prob(mean_power, nets.log_std_power,
                                         raw.subspan(0, layout.power_dim));
  if (layout.split_dim > 0) {
    lp += neural::gaussian::log_prob(
        mean_split, nets.log_std_split,
        raw.subspan(layout.power_dim, layout.split_dim));
  }
  if (layout.has_theta) {
    const double raw_theta = raw[layout.power_dim + layout.split_dim];
    lp += neural::gaussian::log_prob(mean_theta, nets.log_std_theta,
                                     raw.subspan(raw.size() - 1, 1));
    lp -= log_sigmoid_derivative(raw_theta);
  }
  return lp;
}

double branch_entropy(const ActorCritic& nets) {
  return neural::gaussian::entropy(nets.log_std_power) +
         neural::gaussian::entropy(nets.log_std_split) +
         neural::gaussian::entropy(nets.log_std_theta);
}

struct BatchEval {
  Tensor2 input;
  ForwardCache trunk_cache;
  Tensor2 features;
  Tensor2 mean_power;
  Tensor2 mean_split;
  Tensor2 mean_theta;
  Tensor2 values;
  std::vector<double> new_log_probs;
  LossReport losses;
};

ActionLayout layout_of(const ActorCritic& nets) {
  ActionLayout layout;
  layout.power_dim = nets.power_head.out_dim();
  layout.split_dim = nets.split_head.out_dim();
  layout.has_theta = nets.theta_head.out_dim() > 0;
  return layout;
}

BatchEval eval_batch(const ActorCritic& nets, const TrajectoryBatch& batch,
                     const PpoHyper& hyper, double entropy_coef,
                     bool want_cache) {
  const std::size_t steps = batch.steps.size();
  if (steps == 0) throw std::invalid_argument("empty trajectory batch");
  if (batch.advantages.size() != steps || batch.returns.size() != steps)
    throw std::invalid_argument("advantages not computed before update");

  const ActionLayout layout = layout_of(nets);
  const std::size_t state_dim = nets.trunk.front().in_dim();

  BatchEval ev;
  ev.input = Tensor2(steps, state_dim);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto& s = batch.steps[t].state;
    if (s.size() != state_dim)
      throw std::invalid_argument("state dimension mismatch in batch");
    std::copy(s.begin(), s.end(), ev.input.row(t));
  }
  ev.features = neural::forward(nets.trunk, ev.input,
                                want_cache ? &ev.trunk_cache : nullptr);
  ev.mean_power = head_forward(nets.power_head, ev.features);
  if (layout.split_dim > 0)
    ev.mean_split = head_forward(nets.split_head, ev.features);
  if (layout.has_theta)
    ev.mean_theta = head_forward(nets.theta_head, ev.features);
  ev.values = head_forward(nets.critic_head, ev.features);

  ev.new_log_probs.resize(steps);
  std::vector<double> old_log_probs(steps);
  double critic_sum = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const Transition& tr = batch.steps[t];
    if (tr.raw_action.size() != layout.raw_dim())
      throw std::invalid_argument("raw action dimension mismatch in batch");
    ev.new_log_probs[t] = raw_log_prob(
        nets, layout, row_span(ev.mean_power, t),
        layout.split_dim > 0 ? row_span(ev.mean_split, t)
                             : std::span<const double>{},
        layout.has_theta ? row_span(ev.mean_theta, t)
                         : std::span<const double>{},
        tr.raw_action);
    old_log_probs[t] = tr.log_prob;
    const double err = ev.values.at(t, 0) - batch.returns[t];
    critic_sum += err * err;
  }

  ev.losses.actor = clipped_surrogate(ev.new_log_probs, old_log_probs,
                                      batch.advantages, hyper.clip);
  ev.losses.critic = critic_sum / static_cast<double>(steps);
  ev.losses.entropy = branch_entropy(nets);
  ev.losses.combined = ev.losses.critic / 2.0 - ev.losses.actor -
                       entropy_coef * ev.losses.entropy;
  return ev;
}

std::vector<std::span<double>> mutable_grad_spans(ActorCriticGrads& grads) {
  std::vector<std::span<double>> out;
  for (auto& g : grads.trunk) {
    out.emplace_back(g.weight.data);
    out.emplace_back(g.bias);
    if (!g.ln_gain.empty()) {
      out.emplace_back(g.ln_gain);
      out.emplace_back(g.ln_offset);
    }
  }
  auto add_head = [&out](LayerGrads& g) {
    if (g.weight.rows == 0) return;
    out.emplace_back(g.weight.data);
    out.emplace_back(g.bias);
  };
  add_head(grads.power_head);
  add_head(grads.split_head);
  add_head(grads.theta_head);
  add_head(grads.critic_head);
  if (!grads.log_std_power.empty()) out.emplace_back(grads.log_std_power);
  if (!grads.log_std_split.empty()) out.emplace_back(grads.log_std_split);
  if (!grads.log_std_theta.empty()) out.emplace_back(grads.log_std_theta);
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Tensor2 as_row(const std::vector<double>& v) {
  Tensor2 t(1, v.size());
  std::copy(v.begin(), v.end(), t.row(0));
  return t;
}

const std::string& find_meta(const neural::Archive& ar,
                             const std::string& key) {
  for (const auto& [k, v] : ar.meta)
    if (k == key) return v;
  throw std::runtime_error("checkpoint missing metadata key: " + key);
}

void copy_tensor_into(const Tensor2& src, Tensor2& dst,
                      const std::string& name) {
  if (src.rows != dst.rows || src.cols != dst.cols)
    throw std::runtime_error("checkpoint tensor shape mismatch: " + name);
  dst.data = src.data;
}

void copy_tensor_into(const Tensor2& src, std::vector<double>& dst,
                      const std::string& name) {
  if (src.rows != 1 || src.cols != dst.size())
    throw std::runtime_error("checkpoint tensor shape mismatch: " + name);
  dst = src.data;
}

}  // namespace

void PpoHyper::validate() const {
  if (episodes < 1) throw std::domain_error("episodes must be >= 1");
  if (steps_per_episode < 2)
    throw std::domain_error("steps_per_episode must be >= 2");
  if (!(discount >= 0.0 && discount < 1.0))
    throw std::domain_error("discount outside [0, 1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
    throw std::domain_error("gae_lambda outside [0, 1]");
  if (!(clip > 0.0 && clip < 1.0))
    throw std::domain_error("clip outside (0, 1)");
  if (!(learning_rate > 0.0)) throw std::domain_error("learning_rate <= 0");
  if (entropy_coef < 0.0 || entropy_coef_final < 0.0)
    throw std::domain_error("entropy coefficients must be >= 0");
  if (!(grad_clip_norm > 0.0)) throw std::domain_error("grad_clip_norm <= 0");
  if (weight_decay < 0.0) throw std::domain_error("weight_decay < 0");
  if (hidden1 < 1 || hidden2 < 1)
    throw std::domain_error("hidden sizes must be >= 1");
}

ActionLayout ActionLayout::for_strategy(Strategy strategy,
                                        std::size_t ud_count) {
  ActionLayout layout;
  switch (strategy) {
    case Strategy::Crs:
      layout.power_dim = ud_count + 2;
      layout.split_dim = ud_count + 1;
      layout.has_theta = true;
      break;
    case Strategy::Rsma:
      layout.power_dim = ud_count + 1;
      layout.split_dim = ud_count;
      layout.has_theta = false;
      break;
    case Strategy::Sdma:
      layout.power_dim = ud_count;
      layout.split_dim = 0;
      layout.has_theta = false;
      break;
  }
  return layout;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax of empty vector");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double log_sigmoid_derivative(double x) { return -softplus(x) - softplus(-x); }

ResourceAction squash_action(std::span<const double> raw,
                             const ActionLayout& layout, double total_power) {
  if (raw.size() != layout.raw_dim())
    throw std::invalid_argument("raw action dimension mismatch");
  if (!(total_power > 0.0))
    throw std::invalid_argument("total_power must be positive");
  ResourceAction action;
  action.power = softmax(raw.subspan(0, layout.power_dim));
  for (double& p : action.power) p *= total_power;
  if (layout.split_dim > 0) {
    std::vector<double> logits(raw.begin() + layout.power_dim,
                               raw.begin() + layout.power_dim +
                                   layout.split_dim);
    logits.push_back(0.0);  // slack share keeps the split sum below one
    std::vector<double> sm = softmax(logits);
    sm.pop_back();
    action.common_split = std::move(sm);
  }
  action.theta = layout.has_theta ? sigmoid(raw.back()) : 1.0;
  return action;
}

ActorCritic make_actor_critic(std::size_t state_dim,
                              const ActionLayout& layout,
                              const PpoHyper& hyper, Rng& rng) {
  if (state_dim == 0) throw std::domain_error("state_dim must be >= 1");
  if (layout.power_dim == 0)
    throw std::domain_error("action layout needs a power branch");
  ActorCritic nets;
  const double hidden_gain = std::sqrt(2.0);
  nets.trunk.push_back(neural::make_layer(hyper.hidden1, state_dim, true,
                                          neural::Activation::Gelu,
                                          hidden_gain, rng));
  nets.trunk.push_back(neural::make_layer(hyper.hidden2, hyper.hidden1, true,
                                          neural::Activation::Gelu,
                                          hidden_gain, rng));
  nets.power_head = neural::make_layer(layout.power_dim, hyper.hidden2, false,
                                       neural::Activation::None, 0.01, rng);
  if (layout.split_dim > 0)
    nets.split_head = neural::make_layer(layout.split_dim, hyper.hidden2,
                                         false, neural::Activation::None,
                                         0.01, rng);
  if (layout.has_theta)
    nets.theta_head = neural::make_layer(1, hyper.hidden2, false,
                                         neural::Activation::None, 0.01, rng);
  nets.critic_head = neural::make_layer(1, hyper.hidden2, false,
                                        neural::Activation::None, 1.0, rng);
  nets.log_std_power.assign(layout.power_dim, 0.0);
  if (layout.split_dim > 0) nets.log_std_split.assign(layout.split_dim, 0.0);
  if (layout.has_theta) nets.log_std_theta.assign(1, 0.0);
  return nets;
}

ActorCriticGrads make_zero_grads(const ActorCritic& nets) {
  ActorCriticGrads g;
  g.trunk = neural::make_zero_grads(nets.trunk);
  g.power_head = zero_like(nets.power_head);
  g.split_head = zero_like(nets.split_head);
  g.theta_head = zero_like(nets.theta_head);
  g.critic_head = zero_like(nets.critic_head);
  g.log_std_power.assign(nets.log_std_power.size(), 0.0);
  g.log_std_split.assign(nets.log_std_split.size(), 0.0);
  g.log_std_theta.assign(nets.log_std_theta.size(), 0.0);
  return g;
}

void zero(ActorCriticGrads& grads) {
  neural::zero(grads.trunk);
  auto zero_head = [](LayerGrads& g) {
    std::fill(g.weight.data.begin(), g.weight.data.end(), 0.0);
    std::fill(g.bias.begin(), g.bias.end(), 0.0);
  };
  zero_head(grads.power_head);
  zero_head(grads.split_head);
  zero_head(grads.theta_head);
  zero_head(grads.critic_head);
  std::fill(grads.log_std_power.begin(), grads.log_std_power.end(), 0.0);
  std::fill(grads.log_std_split.begin(), grads.log_std_split.end(), 0.0);
  std::fill(grads.log_std_theta.begin(), grads.log_std_theta.end(), 0.0);
}

std::vector<std::span<double>> param_spans(ActorCritic& nets) {
  std::vector<std::span<double>> out = neural::param_spans(nets.trunk);
  auto add_head = [&out](Layer& h) {
    if (h.out_dim() == 0) return;
    out.emplace_back(h.weight.data);
    out.emplace_back(h.bias);
  };
  add_head(nets.power_head);
  add_head(nets.split_head);
  add_head(nets.theta_head);
  add_head(nets.critic_head);
  if (!nets.log_std_power.empty()) out.emplace_back(nets.log_std_power);
  if (!nets.log_std_split.empty()) out.emplace_back(nets.log_std_split);
  if (!nets.log_std_theta.empty()) out.emplace_back(nets.log_std_theta);
  return out;
}

std::vector<std::span<const double>> grad_spans(
    const ActorCriticGrads& grads) {
  std::vector<std::span<const double>> out = neural::grad_spans(grads.trunk);
  auto add_head = [&out](const LayerGrads& g) {
    if (g.weight.rows == 0) return;
    out.emplace_back(g.weight.data);
    out.emplace_back(g.bias);
  };
  add_head(grads.power_head);
  add_head(grads.split_head);
  add_head(grads.theta_head);
  add_head(grads.critic_head);
  if (!grads.log_std_power.empty()) out.emplace_back(grads.log_std_power);
  if (!grads.log_std_split.empty()) out.emplace_back(grads.log_std_split);
  if (!grads.log_std_theta.empty()) out.emplace_back(grads.log_std_theta);
  return out;
}

PolicyNetworks make_policy_networks(std::size_t state_dim,
                                    const ActionLayout& layout,
                                    const PpoHyper& hyper, Rng& rng) {
  PolicyNetworks nets;
  nets.state_dim = state_dim;
  nets.layout = layout;
  nets.live = make_actor_critic(state_dim, layout, hyper, rng);
  nets.old_actor = nets.live;
  return nets;
}

ActResult act(const ActorCritic& nets, const ActionLayout& layout,
              std::span<const double> state, double total_power, Rng& rng,
              bool deterministic) {
  const std::size_t state_dim = nets.trunk.front().in_dim();
  if (state.size() != state_dim)
    throw std::invalid_argument("state dimension mismatch");

  Tensor2 input(1, state_dim);
  std::copy(state.begin(), state.end(), input.row(0));
  const Tensor2 features = neural::forward(nets.trunk, input, nullptr);
  const Tensor2 mean_power = head_forward(nets.power_head, features);
  Tensor2 mean_split;
  if (layout.split_dim > 0)
    mean_split = head_forward(nets.split_head, features);
  Tensor2 mean_theta;
  if (layout.has_theta) mean_theta = head_forward(nets.theta_head, features);
  const Tensor2 value = head_forward(nets.critic_head, features);

  ActResult result;
  result.raw.resize(layout.raw_dim());
  auto fill_branch = [&](std::span<const double> mean,
                         std::span<const double> log_std, std::size_t offset) {
    for (std::size_t i = 0; i < mean.size(); ++i) {
      if (deterministic) {
        result.raw[offset + i] = mean[i];
      } else {
        const double sigma =
            std::exp(neural::gaussian::clamp_log_std(log_std[i]));
        result.raw[offset + i] = mean[i] + sigma * rng.normal();
      }
    }
  };
  fill_branch(row_span(mean_power, 0), nets.log_std_power, 0);
  if (layout.split_dim > 0)
    fill_branch(row_span(mean_split, 0), nets.log_std_split,
                layout.power_dim);
  if (layout.has_theta)
    fill_branch(row_span(mean_theta, 0), nets.log_std_theta,
                layout.power_dim + layout.split_dim);

  result.log_prob = raw_log_prob(
      nets, layout, row_span(mean_power, 0),
      layout.split_dim > 0 ? row_span(mean_split, 0)
                           : std::span<const double>{},
      layout.has_theta ? row_span(mean_theta, 0) : std::span<const double>{},
      result.raw);
  result.value = value.at(0, 0);
  result.action = squash_action(result.raw, layout, total_power);
  return result;
}

void compute_gae(TrajectoryBatch& batch, const PpoHyper& hyper) {
  const std::size_t steps = batch.steps.size();
  if (steps == 0) throw std::invalid_argument("empty trajectory batch");
  batch.advantages.assign(steps, 0.0);
  batch.returns.assign(steps, 0.0);
  double carry = 0.0;
  for (std::size_t i = steps; i-- > 0;) {
    const double next_value =
        (i + 1 == steps) ? batch.bootstrap_value : batch.steps[i + 1].value;
    const double delta = batch.steps[i].reward + hyper.discount * next_value -
                         batch.steps[i].value;
    carry = delta + hyper.discount * hyper.gae_lambda * carry;
    batch.advantages[i] = carry;
    batch.returns[i] = carry + batch.steps[i].value;
  }
}

double clipped_surrogate(std::span<const double> new_log_probs,
                         std::span<const double> old_log_probs,
                         std::span<const double> advantages, double clip) {
  const std::size_t n = new_log_probs.size();
  if (n == 0 || old_log_probs.size() != n || advantages.size() != n)
    throw std::invalid_argument("clipped_surrogate size mismatch");
  double sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double ratio = ratio_of(new_log_probs[t], old_log_probs[t]);
    const double surr = ratio * advantages[t];
    const double surr_clipped =
        std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantages[t];
    sum += std::min(surr, surr_clipped);
  }
  return sum / static_cast<double>(n);
}

double surrogate_grad_coeff(double new_log_prob, double old_log_prob,
                            double advantage, double clip) {
  const double ratio = ratio_of(new_log_prob, old_log_prob);
  const double surr = ratio * advantage;
  const double surr_clipped =
      std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage;
  // Ties take the unclipped branch; d(ratio * A)/d(log_prob) = ratio * A.
  return surr <= surr_clipped ? surr : 0.0;
}

LossReport ppo_losses(const ActorCritic& nets, const TrajectoryBatch& batch,
                      const PpoHyper& hyper, double entropy_coef) {
  return eval_batch(nets, batch, hyper, entropy_coef, false).losses;
}

LossReport ppo_update_round(ActorCritic& nets, const TrajectoryBatch& batch,
                            const PpoHyper& hyper, double entropy_coef,
                            neural::AdamWState& opt, double* max_ratio_dev) {
  BatchEval ev = eval_batch(nets, batch, hyper, entropy_coef, true);
  const std::size_t steps = batch.steps.size();
  const ActionLayout layout = layout_of(nets);
  const double inv_steps = 1.0 / static_cast<double>(steps);

  if (max_ratio_dev != nullptr) {
    double dev = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      const double ratio =
          ratio_of(ev.new_log_probs[t], batch.steps[t].log_prob);
      dev = std::max(dev, std::abs(ratio - 1.0));
    }
    *max_ratio_dev = dev;
  }

  ActorCriticGrads grads = make_zero_grads(nets);
  Tensor2 grad_power(steps, layout.power_dim);
  Tensor2 grad_split(steps, layout.split_dim);
  Tensor2 grad_theta(steps, layout.has_theta ? 1 : 0);
  Tensor2 grad_value(steps, 1);

  for (std::size_t t = 0; t < steps; ++t) {
    const Transition& tr = batch.steps[t];
    // Combined loss carries -surrogate, so descent needs the negated
    // per-transition coefficient.
    const double coeff =
        -inv_steps * surrogate_grad_coeff(ev.new_log_probs[t], tr.log_prob,
                                          batch.advantages[t], hyper.clip);
    if (coeff != 0.0) {
      std::span<const double> raw = tr.raw_action;
      neural::gaussian::accumulate_log_prob_grads(
          row_span(ev.mean_power, t), nets.log_std_power,
          raw.subspan(0, layout.power_dim), coeff,
          {grad_power.row(t), layout.power_dim}, grads.log_std_power);
      if (layout.split_dim > 0) {
        neural::gaussian::accumulate_log_prob_grads(
            row_span(ev.mean_split, t), nets.log_std_split,
            raw.subspan(layout.power_dim, layout.split_dim), coeff,
            {grad_split.row(t), layout.split_dim}, grads.log_std_split);
      }
      if (layout.has_theta) {
        neural::gaussian::accumulate_log_prob_grads(
            row_span(ev.mean_theta, t), nets.log_std_theta,
            raw.subspan(raw.size() - 1, 1), coeff, {grad_theta.row(t), 1},
            grads.log_std_theta);
      }
    }
    grad_value.at(t, 0) =
        (ev.values.at(t, 0) - batch.returns[t]) * inv_steps;
  }

  neural::gaussian::accumulate_entropy_grads(nets.log_std_power,
                                             -entropy_coef,
                                             grads.log_std_power);
  neural::gaussian::accumulate_entropy_grads(nets.log_std_split,
                                             -entropy_coef,
                                             grads.log_std_split);
  neural::gaussian::accumulate_entropy_grads(nets.log_std_theta,
                                             -entropy_coef,
                                             grads.log_std_theta);

  Tensor2 grad_features(steps, ev.features.cols);
  head_backward(nets.power_head, ev.features, grad_power, grads.power_head,
                grad_features);
  if (layout.split_dim > 0)
    head_backward(nets.split_head, ev.features, grad_split, grads.split_head,
                  grad_features);
  if (layout.has_theta)
    head_backward(nets.theta_head, ev.features, grad_theta, grads.theta_head,
                  grad_features);
  head_backward(nets.critic_head, ev.features, grad_value, grads.critic_head,
                grad_features);
  neural::backward(nets.trunk, ev.trunk_cache, grad_features, grads.trunk);

  double sq_norm = 0.0;
  for (const auto& span : grad_spans(grads))
    for (double g : span) sq_norm += g * g;
  const double norm = std::sqrt(sq_norm);
  if (norm > hyper.grad_clip_norm) {
    const double scale = hyper.grad_clip_norm / norm;
    for (auto& span : mutable_grad_spans(grads))
      for (double& g : span) g *= scale;
  }

  neural::adamw_step(param_spans(nets), grad_spans(grads), opt, false);

  auto project = [](std::vector<double>& log_std) {
    for (double& v : log_std) v = neural::gaussian::clamp_log_std(v);
  };
  project(nets.log_std_power);
  project(nets.log_std_split);
  project(nets.log_std_theta);

  return ev.losses;
}

RunningNorm::RunningNorm(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

void RunningNorm::observe(std::span<const double> x) {
  if (frozen_) return;
  if (x.size() != mean_.size())
    throw std::invalid_argument("RunningNorm dimension mismatch");
  count_ += 1.0;
  for (std::size_t i = 0; i < mean_.size(); ++i) {
    const double delta = x[i] - mean_[i];
    mean_[i] += delta / count_;
    m2_[i] += delta * (x[i] - mean_[i]);
  }
}

std::vector<double> RunningNorm::normalize(std::span<const double> x) const {
  if (x.size() != mean_.size())
    throw std::invalid_argument("RunningNorm dimension mismatch");
  std::vector<double> out(x.begin(), x.end());
  if (count_ < 2.0) return out;  // too few samples to scale meaningfully
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double var = m2_[i] / count_;
    out[i] = (out[i] - mean_[i]) / std::sqrt(var + 1e-8);
  }
  return out;
}

void RunningNorm::restore(std::vector<double> mean, std::vector<double> m2,
                          double count) {
  if (mean.size() != mean_.size() || m2.size() != m2_.size())
    throw std::invalid_argument("RunningNorm dimension mismatch");
  mean_ = std::move(mean);
  m2_ = std::move(m2);
  count_ = count;
}

Trainer::Trainer(EnvOptions env_opts, PpoHyper hyper, std::uint64_t seed)
    : env_opts_(std::move(env_opts)),
      hyper_(hyper),
      seed_(seed),
      env_(env_opts_, seed),
      norm_(state_dim_for(env_opts_.strategy, env_opts_.ud_count)),
      action_rng_(Rng(seed).derive(3)) {
  hyper_.validate();
  Rng init_rng = Rng(seed).derive(2);
  const ActionLayout layout =
      ActionLayout::for_strategy(env_opts_.strategy, env_opts_.ud_count);
  nets_ = make_policy_networks(env_.state_dim(), layout, hyper_, init_rng);
  opt_.lr = hyper_.learning_rate;
  opt_.weight_decay = hyper_.weight_decay;
  opt_.init(param_spans(nets_.live));
}

TrajectoryBatch Trainer::collect(std::vector<double>& cur_norm) {
  TrajectoryBatch batch;
  batch.steps.reserve(hyper_.steps_per_episode);
  const double total_power = env_opts_.gains.tx_power_sat;
  for (std::size_t t = 0; t < hyper_.steps_per_episode; ++t) {
    ActResult chosen = act(nets_.live, nets_.layout, cur_norm, total_power,
                           action_rng_, false);
    StepOutcome outcome = env_.step(chosen.action);
    Transition tr;
    tr.state = cur_norm;
    tr.raw_action = std::move(chosen.raw);
    tr.action = std::move(chosen.action);
    tr.log_prob = chosen.log_prob;
    tr.reward = outcome.reward;
    tr.value = chosen.value;
    batch.steps.push_back(std::move(tr));
    norm_.observe(outcome.next_state);
    cur_norm = norm_.normalize(outcome.next_state);
  }
  // Value-only query for the closing state; no action noise is consumed.
  Tensor2 input(1, cur_norm.size());
  std::copy(cur_norm.begin(), cur_norm.end(), input.row(0));
  const Tensor2 features = neural::forward(nets_.live.trunk, input, nullptr);
  batch.bootstrap_value =
      head_forward(nets_.live.critic_head, features).at(0, 0);
  return batch;
}

void Trainer::train(const EpisodeSink& sink) {
  EnvState state = env_.reset();
  norm_.observe(state);
  std::vector<double> cur_norm = norm_.normalize(state);

  for (std::size_t e = 0; e < hyper_.episodes; ++e) {
    TrajectoryBatch batch = collect(cur_norm);
    compute_gae(batch, hyper_);
    if (hyper_.normalize_advantages) {
      const std::size_t n = batch.advantages.size();
      double mean = 0.0;
      for (double a : batch.advantages) mean += a;
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (double a : batch.advantages) var += (a - mean) * (a - mean);
      var /= static_cast<double>(n);
      const double inv = 1.0 / (std::sqrt(var) + 1e-8);
      for (double& a : batch.advantages) a = (a - mean) * inv;
    }

    const double progress =
        hyper_.episodes > 1
            ? static_cast<double>(e) / static_cast<double>(hyper_.episodes - 1)
            : 0.0;
    const double entropy_coef =
        hyper_.entropy_coef +
        (hyper_.entropy_coef_final - hyper_.entropy_coef) * progress;

    LossReport accum;
    for (std::size_t m = 0; m < hyper_.update_rounds; ++m) {
      double dev = 0.0;
      LossReport round =
          ppo_update_round(nets_.live, batch, hyper_, entropy_coef, opt_,
                           m == 0 ? &dev : nullptr);
      if (m == 0) max_first_round_dev_ = std::max(max_first_round_dev_, dev);
      accum.actor += round.actor;
      accum.critic += round.critic;
      accum.entropy += round.entropy;
      accum.combined += round.combined;
    }
    // update_rounds == 0 keeps the policy frozen (random-policy baseline);
    // the loss columns have nothing to average then.
    const double inv_rounds =
        hyper_.update_rounds > 0
            ? 1.0 / static_cast<double>(hyper_.update_rounds)
            : 0.0;

    nets_.sync_old();

    if (sink) {
      EpisodeRow row;
      row.episode = episodes_done_;
      double reward_sum = 0.0;
      double theta_sum = 0.0;
      double pc_sum = 0.0;
      for (const Transition& tr : batch.steps) {
        reward_sum += tr.reward;
        theta_sum += tr.action.theta;
        if (env_opts_.strategy != Strategy::Sdma)
          pc_sum += tr.action.power[0] / env_opts_.gains.tx_power_sat;
      }
      const double inv_steps =
          1.0 / static_cast<double>(hyper_.steps_per_episode);
      row.mean_reward = reward_sum * inv_steps;
      row.actor_loss = accum.actor * inv_rounds;
      row.critic_loss = accum.critic * inv_rounds;
      row.entropy = accum.entropy * inv_rounds;
      row.mean_theta = theta_sum * inv_steps;
      row.mean_pc_fraction = pc_sum * inv_steps;
      sink(row);
    }
    ++episodes_done_;
  }
}

std::vector<double> Trainer::evaluate_rewards(const EnvOptions& opts,
                                              std::size_t draws,
                                              std::uint64_t seed) const {
  if (draws == 0) throw std::invalid_argument("draws must be >= 1");
  if (state_dim_for(opts.strategy, opts.ud_count) != nets_.state_dim)
    throw std::invalid_argument(
        "evaluation options incompatible with the trained policy");
  // Fading stream 4: shares the deployment with a training environment of
  // the same seed while drawing fading the training never saw.
  Environment env(opts, seed, 4);
  EnvState state = env.reset();
  std::vector<double> cur_norm = norm_.normalize(state);
  Rng unused(0);  // deterministic actions never consume noise
  std::vector<double> rewards;
  rewards.reserve(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    ActResult chosen = act(nets_.live, nets_.layout, cur_norm,
                           opts.gains.tx_power_sat, unused, true);
    StepOutcome outcome = env.step(chosen.action);
    rewards.push_back(outcome.reward);
    cur_norm = norm_.normalize(outcome.next_state);
  }
  return rewards;
}

double Trainer::evaluate_mean_min_rate(const EnvOptions& opts,
                                       std::size_t draws,
                                       std::uint64_t seed) const {
  const std::vector<double> rewards = evaluate_rewards(opts, draws, seed);
  double sum = 0.0;
  for (double r : rewards) sum += r;
  return sum / static_cast<double>(rewards.size());
}

double Trainer::evaluate_mean_min_rate(std::size_t draws) const {
  return evaluate_mean_min_rate(env_opts_, draws, seed_);
}

void Trainer::save_checkpoint(const std::string& path) const {
  neural::Archive ar;
  ar.meta.emplace_back("format", "crs-ppo-v1");
  ar.meta.emplace_back("strategy", strategy_name(env_opts_.strategy));
  ar.meta.emplace_back("ud_count", std::to_string(env_opts_.ud_count));
  ar.meta.emplace_back("state_dim", std::to_string(nets_.state_dim));
  ar.meta.emplace_back("episodes_done", std::to_string(episodes_done_));
  ar.meta.emplace_back("norm_count", format_double(norm_.count()));
  ar.meta.emplace_back("hyper.episodes", std::to_string(hyper_.episodes));
  ar.meta.emplace_back("hyper.steps_per_episode",
                       std::to_string(hyper_.steps_per_episode));
  ar.meta.emplace_back("hyper.update_rounds",
                       std::to_string(hyper_.update_rounds));
  ar.meta.emplace_back("hyper.discount", format_double(hyper_.discount));
  ar.meta.emplace_back("hyper.gae_lambda", format_double(hyper_.gae_lambda));
  ar.meta.emplace_back("hyper.clip", format_double(hyper_.clip));
  ar.meta.emplace_back("hyper.learning_rate",
                       format_double(hyper_.learning_rate));
  ar.meta.emplace_back("hyper.entropy_coef",
                       format_double(hyper_.entropy_coef));
  ar.meta.emplace_back("hyper.entropy_coef_final",
                       format_double(hyper_.entropy_coef_final));
  ar.meta.emplace_back("hyper.normalize_advantages",
                       hyper_.normalize_advantages ? "1" : "0");
  ar.meta.emplace_back("hyper.grad_clip_norm",
                       format_double(hyper_.grad_clip_norm));
  ar.meta.emplace_back("hyper.weight_decay",
                       format_double(hyper_.weight_decay));
  ar.meta.emplace_back("hyper.hidden1", std::to_string(hyper_.hidden1));
  ar.meta.emplace_back("hyper.hidden2", std::to_string(hyper_.hidden2));

  const ActorCritic& live = nets_.live;
  for (std::size_t i = 0; i < live.trunk.size(); ++i) {
    const std::string prefix = "trunk" + std::to_string(i);
    ar.tensors.emplace_back(prefix + ".weight", live.trunk[i].weight);
    ar.tensors.emplace_back(prefix + ".bias", as_row(live.trunk[i].bias));
    ar.tensors.emplace_back(prefix + ".ln_gain",
                            as_row(live.trunk[i].ln_gain));
    ar.tensors.emplace_back(prefix + ".ln_offset",
                            as_row(live.trunk[i].ln_offset));
  }
  auto add_head = [&ar](const std::string& name, const Layer& head) {
    if (head.out_dim() == 0) return;
    ar.tensors.emplace_back(name + ".weight", head.weight);
    ar.tensors.emplace_back(name + ".bias", as_row(head.bias));
  };
  add_head("power_head", live.power_head);
  add_head("split_head", live.split_head);
  add_head("theta_head", live.theta_head);
  add_head("critic_head", live.critic_head);
  if (!live.log_std_power.empty())
    ar.tensors.emplace_back("log_std.power", as_row(live.log_std_power));
  if (!live.log_std_split.empty())
    ar.tensors.emplace_back("log_std.split", as_row(live.log_std_split));
  if (!live.log_std_theta.empty())
    ar.tensors.emplace_back("log_std.theta", as_row(live.log_std_theta));
  ar.tensors.emplace_back("norm.mean", as_row(norm_.mean()));
  ar.tensors.emplace_back("norm.m2", as_row(norm_.m2()));

  neural::save_archive(ar, path);
}

void Trainer::load_checkpoint(const std::string& path) {
  const neural::Archive ar = neural::load_archive(path);
  if (find_meta(ar, "format") != "crs-ppo-v1")
    throw std::runtime_error("unsupported checkpoint format");
  if (find_meta(ar, "strategy") != strategy_name(env_opts_.strategy))
    throw std::runtime_error("checkpoint strategy mismatch");
  if (std::stoull(find_meta(ar, "state_dim")) != nets_.state_dim)
    throw std::runtime_error("checkpoint state dimension mismatch");

  ActorCritic& live = nets_.live;
  for (std::size_t i = 0; i < live.trunk.size(); ++i) {
    const std::string prefix = "trunk" + std::to_string(i);
    copy_tensor_into(ar.find(prefix + ".weight"), live.trunk[i].weight,
                     prefix + ".weight");
    copy_tensor_into(ar.find(prefix + ".bias"), live.trunk[i].bias,
                     prefix + ".bias");
    copy_tensor_into(ar.find(prefix + ".ln_gain"), live.trunk[i].ln_gain,
                     prefix + ".ln_gain");
    copy_tensor_into(ar.find(prefix + ".ln_offset"), live.trunk[i].ln_offset,
                     prefix + ".ln_offset");
  }
  auto load_head = [&ar](const std::string& name, Layer& head) {
    if (head.out_dim() == 0) return;
    copy_tensor_into(ar.find(name + ".weight"), head.weight,
                     name + ".weight");
    copy_tensor_into(ar.find(name + ".bias"), head.bias, name + ".bias");
  };
  load_head("power_head", live.power_head);
  load_head("split_head", live.split_head);
  load_head("theta_head", live.theta_head);
  load_head("critic_head", live.critic_head);
  if (!live.log_std_power.empty())
    copy_tensor_into(ar.find("log_std.power"), live.log_std_power,
                     "log_std.power");
  if (!live.log_std_split.empty())
    copy_tensor_into(ar.find("log_std.split"), live.log_std_split,
                     "log_std.split");
  if (!live.log_std_theta.empty())
    copy_tensor_into(ar.find("log_std.theta"), live.log_std_theta,
                     "log_std.theta");

  std::vector<double> mean(norm_.dim()), m2(norm_.dim());
  copy_tensor_into(ar.find("norm.mean"), mean, "norm.mean");
  copy_tensor_into(ar.find("norm.m2"), m2, "norm.m2");
  norm_.restore(std::move(mean), std::move(m2),
                std::stod(find_meta(ar, "norm_count")));
  episodes_done_ = std::stoull(find_meta(ar, "episodes_done"));
  nets_.sync_old();
  // Optimizer moments are not checkpointed; further training restarts them.
  opt_.init(param_spans(nets_.live));
}

}  // namespace crs
