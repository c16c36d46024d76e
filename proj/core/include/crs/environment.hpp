#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "crs/channel.hpp"
#include "crs/rate_engine.hpp"

namespace crs {

struct EnvOptions {
  Strategy strategy = Strategy::Crs;
  std::size_t ud_count = 5;
  double area_radius = 1000.0;
  double sat_range = 550e3;
  double relay_height = 5.0;
  bool log_sinr = true;  // store log(1+gamma) instead of raw gamma
  SoilProfile soil;
  AntennaGains gains;

  void validate() const;
};

// State layout, fixed per strategy at construction:
//   CRS:  [R_c, R_ar^tot, R_1..R_N^tot, g_c_ar, g_p_ar, g_c_1..N, g_p_1..N]
//   RSMA: [R_c, R_1..R_N^tot, g_c_1..N, g_p_1..N]
//   SDMA: [R_1..R_N^tot, g_p_1..N]
using EnvState = std::vector<double>;

std::size_t state_dim_for(Strategy strategy, std::size_t ud_count);

struct StepOutcome {
  double reward = 0.0;       // == report.min_rate
  EnvState next_state;
  RateReport report;
  LinkRealization links;     // diagnostic
};

// The MDP of one strategy variant. UD positions are drawn once per reset
// and stay fixed; small-scale fading redraws i.i.d. every step. Transitions
// do not depend on the previous state, so step carries no state argument.
// fade_stream selects the fading substream of the seed: two environments
// with the same seed but different streams share the deployment geometry
// while drawing independent fading (training vs evaluation).
class Environment {
 public:
  Environment(EnvOptions opts, std::uint64_t seed,
              std::uint64_t fade_stream = 1);

  // Deterministic for a given seed: re-derives position and fading streams,
  // so two resets rebuild the identical run. Returns the zero state.
  EnvState reset();

  StepOutcome step(const ResourceAction& action);

  std::size_t state_dim() const;
  std::size_t ud_count() const { return opts_.ud_count; }
  Strategy strategy() const { return opts_.strategy; }
  const EnvOptions& options() const { return opts_; }
  const Geometry& geometry() const { return geom_; }
  const RateParams& rate_params() const { return rate_params_; }

  // Test hook: the next step consumes this realization instead of drawing.
  void set_fading_override(LinkRealization links);

 private:
  EnvState pack_state(const RateReport& report) const;

  EnvOptions opts_;
  std::uint64_t seed_;
  std::uint64_t fade_stream_;
  Rng fade_rng_;
  Geometry geom_;
  RateParams rate_params_;
  std::optional<LinkRealization> override_;
};

}  // namespace crs
