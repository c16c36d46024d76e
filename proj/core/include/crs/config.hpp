#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crs/environment.hpp"
#include "crs/ppo.hpp"

namespace crs {

// Raised for malformed files, unknown keys, unparsable values, and
// validation failures; the CLI maps it to its config-error exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two bundled scales: desk (N=3, 300 episodes of 256 steps) for quick
// runs, paper (N=5, 2000 episodes of 512 steps) for full experiments.
// Physics defaults are identical.
enum class Preset { Desk, Paper };

Preset parse_preset(const std::string& name);
const char* preset_name(Preset preset);

struct RunConfig {
  EnvOptions env;
  PpoHyper ppo;
  double greedy_explore = 0.3;
  std::size_t eval_draws = 512;
  std::uint64_t seed = 1;
  // Final key/value assignments in schema order (defaults overlaid by the
  // file and CLI). Echoing these through the loader reproduces the exact
  // same configuration; manifests embed them verbatim.
  std::vector<std::pair<std::string, std::string>> entries;
};

// Schema defaults for a preset, resolved and validated.
RunConfig default_config(Preset preset);

// Defaults overlaid with `key = value` lines from the file (empty path
// skips the file), then with the extra pairs (CLI overrides win). Lines
// starting with '#' and blank lines are ignored. dB-specified values are
// converted to linear here, exactly once.
RunConfig load_config(const std::string& path, Preset preset,
                      const std::vector<std::pair<std::string, std::string>>&
                          extra = {});

// One `key = value` line per schema entry.
std::string serialize_config(const RunConfig& cfg);

// Re-resolves a copy of an existing configuration with some keys
// replaced; used by sweeps to derive per-cell configs.
RunConfig override_config(const RunConfig& base,
                          const std::vector<std::pair<std::string,
                                                      std::string>>&
                              overrides);

Strategy parse_strategy(const std::string& name);

}  // namespace crs
