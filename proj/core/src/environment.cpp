#include "crs/environment.hpp"

#include <cmath>
#include <stdexcept>

namespace crs {

void EnvOptions::validate() const {
  if (ud_count < 1)
    throw std::invalid_argument("ud_count must be >= 1");
  if (!(area_radius > 0.0) || !(sat_range > 0.0) || !(relay_height > 0.0))
    throw std::invalid_argument("environment distances must be > 0");
  soil.validate();
  gains.validate();
}

std::size_t state_dim_for(Strategy strategy, std::size_t ud_count) {
  switch (strategy) {
    case Strategy::Crs: return 3 * ud_count + 4;
    case Strategy::Rsma: return 3 * ud_count + 1;
    case Strategy::Sdma: return 2 * ud_count;
  }
  throw std::logic_error("unknown strategy");
}

Environment::Environment(EnvOptions opts, std::uint64_t seed,
                         std::uint64_t fade_stream)
    : opts_(std::move(opts)), seed_(seed), fade_stream_(fade_stream),
      fade_rng_(0) {
  opts_.validate();
  if (fade_stream_ == 0)
    throw std::invalid_argument("fade_stream 0 is the position stream");
  rate_params_ = {opts_.gains.noise_power, opts_.gains.tx_power_relay};
  reset();
}

EnvState Environment::reset() {
  Rng root(seed_);
  Rng pos_rng = root.derive(0);
  fade_rng_ = root.derive(fade_stream_);
  geom_ = make_geometry(opts_.ud_count, opts_.area_radius, opts_.sat_range,
                        opts_.relay_height, opts_.soil.burial_depth, pos_rng);
  override_.reset();
  return EnvState(state_dim(), 0.0);
}

std::size_t Environment::state_dim() const {
  return state_dim_for(opts_.strategy, opts_.ud_count);
}

void Environment::set_fading_override(LinkRealization links) {
  override_ = std::move(links);
}

EnvState Environment::pack_state(const RateReport& report) const {
  const std::size_t n = opts_.ud_count;
  auto g = [&](double sinr) {
    return opts_.log_sinr ? std::log1p(sinr) : sinr;
  };
  EnvState s;
  s.reserve(state_dim());
  switch (opts_.strategy) {
    case Strategy::Crs:
      s.push_back(report.rate_common);
      for (double r : report.rate_total) s.push_back(r);
      s.push_back(g(report.sinr_common_relay));
      s.push_back(g(report.sinr_priv_relay));
      for (std::size_t i = 0; i < n; ++i) s.push_back(g(report.sinr_common_ud[i]));
      for (std::size_t i = 0; i < n; ++i) s.push_back(g(report.sinr_priv_ud[i]));
      break;
    case Strategy::Rsma:
      s.push_back(report.rate_common);
      for (std::size_t i = 0; i < n; ++i) s.push_back(report.rate_total[1 + i]);
      for (std::size_t i = 0; i < n; ++i) s.push_back(g(report.sinr_common_ud[i]));
      for (std::size_t i = 0; i < n; ++i) s.push_back(g(report.sinr_priv_ud[i]));
      break;
    case Strategy::Sdma:
      for (std::size_t i = 0; i < n; ++i) s.push_back(report.rate_total[1 + i]);
      for (std::size_t i = 0; i < n; ++i) s.push_back(g(report.sinr_priv_ud[i]));
      break;
  }
  return s;
}

StepOutcome Environment::step(const ResourceAction& action) {
  validate_action(action, opts_.strategy, opts_.ud_count,
                  opts_.gains.tx_power_sat);
  StepOutcome out;
  if (override_) {
    out.links = *override_;
    override_.reset();
  } else {
    out.links = realize_links(opts_.soil, geom_, opts_.gains, fade_rng_);
  }
  out.report = evaluate_strategy(opts_.strategy, out.links, action, rate_params_);
  out.reward = out.report.min_rate;
  out.next_state = pack_state(out.report);
  return out;
}

}  // namespace crs
