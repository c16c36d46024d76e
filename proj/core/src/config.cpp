#include "crs/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "crs/constants.hpp"

namespace crs {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t idx = 0;
    const double v = std::stod(value, &idx);
    if (idx != value.size())
      throw ConfigError("trailing characters in value for " + key + ": '" +
                        value + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("expected a number for " + key + ", got '" + value +
                      "'");
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  try {
    std::size_t idx = 0;
    if (!value.empty() && value[0] == '-')
      throw ConfigError("expected a non-negative integer for " + key);
    const unsigned long long v = std::stoull(value, &idx);
    if (idx != value.size())
      throw ConfigError("trailing characters in value for " + key + ": '" +
                        value + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("expected a non-negative integer for " + key +
                      ", got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  throw ConfigError("expected a boolean (0/1/true/false) for " + key +
                    ", got '" + value + "'");
}

// "vwc:eps_real:eps_imag,..." with strictly increasing vwc knots.
std::vector<DielectricKnot> parse_eps_table(const std::string& value) {
  std::vector<DielectricKnot> table;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::stringstream knot(item);
    std::string field;
    std::vector<double> fields;
    while (std::getline(knot, field, ':'))
      fields.push_back(parse_double("soil.eps_table", trim(field)));
    if (fields.size() != 3)
      throw ConfigError(
          "soil.eps_table entries must be vwc:eps_real:eps_imag, got '" +
          item + "'");
    table.push_back({fields[0], fields[1], fields[2]});
  }
  if (table.empty()) throw ConfigError("soil.eps_table is empty");
  for (std::size_t i = 1; i < table.size(); ++i)
    if (!(table[i].vwc > table[i - 1].vwc))
      throw ConfigError("soil.eps_table knots must have increasing vwc");
  return table;
}

struct SchemaKey {
  const char* key;
  const char* desk;
  const char* paper;  // nullptr when identical to desk
};

// Flat schema; Table-drawn physics defaults, preset-dependent scale keys.
// soil.eps_real/eps_imag default to "auto": resolved from the table at the
// configured VWC unless set explicitly.
constexpr SchemaKey kSchema[] = {
    {"strategy", "crs", nullptr},
    {"seed", "1", nullptr},
    {"ud.count", "3", "5"},
    {"ud.gain_dbi", "2.15", nullptr},
    {"geom.area_radius_m", "1000", nullptr},
    {"geom.sat_range_m", "550e3", nullptr},
    {"geom.relay_height_m", "5", nullptr},
    {"soil.vwc", "0.15", nullptr},
    {"soil.clay", "0.1686", nullptr},
    {"soil.burial_depth_m", "0.6", nullptr},
    {"soil.eps_real", "auto", nullptr},
    {"soil.eps_imag", "auto", nullptr},
    {"soil.eps_table", "0.10:6.0:0.9,0.15:8.3:1.4,0.20:11.0:2.0,0.25:14.0:2.7",
     nullptr},
    {"rf.freq_hz", "433e6", nullptr},
    {"rf.noise_dbm", "-117", nullptr},
    {"rf.ple_leo", "2", nullptr},
    {"rf.ple_relay", "2.4", nullptr},
    {"rf.rician_leo", "10", nullptr},
    {"rf.rician_relay", "3", nullptr},
    {"sat.antennas", "6", nullptr},
    {"sat.tx_dbm", "30", nullptr},
    {"sat.gain_dbi", "22.6", nullptr},
    {"relay.tx_dbm", "20", nullptr},
    {"relay.gain_dbi", "5", nullptr},
    {"state.log_sinr", "1", nullptr},
    {"ppo.episodes", "300", "2000"},
    {"ppo.steps", "256", "512"},
    {"ppo.update_rounds", "3", nullptr},
    {"ppo.discount", "0.9", nullptr},
    {"ppo.gae_lambda", "0.95", nullptr},
    {"ppo.clip", "0.2", nullptr},
    {"ppo.lr", "1e-4", nullptr},
    {"ppo.entropy_coef", "0.01", nullptr},
    {"ppo.entropy_coef_final", "0", nullptr},
    {"ppo.normalize_advantages", "1", nullptr},
    {"ppo.grad_clip", "0.5", nullptr},
    {"ppo.weight_decay", "1e-4", nullptr},
    {"ppo.hidden1", "512", nullptr},
    {"ppo.hidden2", "256", nullptr},
    {"greedy.explore", "0.3", nullptr},
    {"eval.draws", "512", nullptr},
};

using Entries = std::vector<std::pair<std::string, std::string>>;

Entries default_entries(Preset preset) {
  Entries entries;
  for (const SchemaKey& s : kSchema) {
    const char* value =
        (preset == Preset::Paper && s.paper != nullptr) ? s.paper : s.desk;
    entries.emplace_back(s.key, value);
  }
  return entries;
}

void set_entry(Entries& entries, const std::string& key,
               const std::string& value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  throw ConfigError("unknown config key: " + key);
}

const std::string& get_entry(const Entries& entries, const std::string& key) {
  for (const auto& [k, v] : entries)
    if (k == key) return v;
  throw ConfigError("missing config key: " + key);
}

RunConfig resolve(Entries entries) {
  RunConfig cfg;
  auto str = [&entries](const char* k) -> const std::string& {
    return get_entry(entries, k);
  };
  auto num = [&entries](const char* k) {
    return parse_double(k, get_entry(entries, k));
  };
  auto uint = [&entries](const char* k) {
    return parse_uint(k, get_entry(entries, k));
  };

  cfg.env.strategy = parse_strategy(str("strategy"));
  cfg.seed = uint("seed");
  cfg.env.ud_count = static_cast<std::size_t>(uint("ud.count"));
  cfg.env.area_radius = num("geom.area_radius_m");
  cfg.env.sat_range = num("geom.sat_range_m");
  cfg.env.relay_height = num("geom.relay_height_m");
  cfg.env.log_sinr = parse_bool("state.log_sinr", str("state.log_sinr"));

  SoilProfile& soil = cfg.env.soil;
  soil.vwc = num("soil.vwc");
  soil.clay = num("soil.clay");
  soil.burial_depth = num("soil.burial_depth_m");
  const std::vector<DielectricKnot> table =
      parse_eps_table(str("soil.eps_table"));
  const auto [auto_re, auto_im] = dielectric_from_vwc(soil.vwc, table);
  soil.eps_real =
      str("soil.eps_real") == "auto" ? auto_re : num("soil.eps_real");
  soil.eps_imag =
      str("soil.eps_imag") == "auto" ? auto_im : num("soil.eps_imag");

  AntennaGains& gains = cfg.env.gains;
  gains.g_sat = db_to_linear(num("sat.gain_dbi"));
  gains.g_relay = db_to_linear(num("relay.gain_dbi"));
  gains.g_ud = db_to_linear(num("ud.gain_dbi"));
  gains.tx_power_sat = dbm_to_watt(num("sat.tx_dbm"));
  gains.tx_power_relay = dbm_to_watt(num("relay.tx_dbm"));
  gains.noise_power = dbm_to_watt(num("rf.noise_dbm"));
  gains.carrier_freq = num("rf.freq_hz");
  gains.num_antennas = static_cast<std::size_t>(uint("sat.antennas"));
  gains.rician_k_leo = num("rf.rician_leo");
  gains.rician_k_relay = num("rf.rician_relay");
  gains.ple_leo = num("rf.ple_leo");
  gains.ple_relay = num("rf.ple_relay");

  PpoHyper& ppo = cfg.ppo;
  ppo.episodes = static_cast<std::size_t>(uint("ppo.episodes"));
  ppo.steps_per_episode = static_cast<std::size_t>(uint("ppo.steps"));
  ppo.update_rounds = static_cast<std::size_t>(uint("ppo.update_rounds"));
  ppo.discount = num("ppo.discount");
  ppo.gae_lambda = num("ppo.gae_lambda");
  ppo.clip = num("ppo.clip");
  ppo.learning_rate = num("ppo.lr");
  ppo.entropy_coef = num("ppo.entropy_coef");
  ppo.entropy_coef_final = num("ppo.entropy_coef_final");
  ppo.normalize_advantages =
      parse_bool("ppo.normalize_advantages", str("ppo.normalize_advantages"));
  ppo.grad_clip_norm = num("ppo.grad_clip");
  ppo.weight_decay = num("ppo.weight_decay");
  ppo.hidden1 = static_cast<std::size_t>(uint("ppo.hidden1"));
  ppo.hidden2 = static_cast<std::size_t>(uint("ppo.hidden2"));

  cfg.greedy_explore = num("greedy.explore");
  if (cfg.greedy_explore < 0.0 || cfg.greedy_explore > 1.0)
    throw ConfigError("greedy.explore outside [0, 1]");
  cfg.eval_draws = static_cast<std::size_t>(uint("eval.draws"));
  if (cfg.eval_draws == 0) throw ConfigError("eval.draws must be >= 1");

  try {
    cfg.env.validate();
    cfg.ppo.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  cfg.entries = std::move(entries);
  return cfg;
}

}  // namespace

Preset parse_preset(const std::string& name) {
  if (name == "desk") return Preset::Desk;
  if (name == "paper") return Preset::Paper;
  throw ConfigError("unknown preset: " + name + " (expected desk or paper)");
}

const char* preset_name(Preset preset) {
  return preset == Preset::Desk ? "desk" : "paper";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "crs") return Strategy::Crs;
  if (name == "rsma") return Strategy::Rsma;
  if (name == "sdma") return Strategy::Sdma;
  throw ConfigError("unknown strategy: " + name +
                    " (expected crs, rsma, or sdma)");
}

RunConfig default_config(Preset preset) {
  return resolve(default_entries(preset));
}

RunConfig load_config(
    const std::string& path, Preset preset,
    const std::vector<std::pair<std::string, std::string>>& extra) {
  Entries entries = default_entries(preset);
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string stripped = trim(line);
      if (stripped.empty() || stripped[0] == '#') continue;
      const std::size_t eq = stripped.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": expected 'key = value'");
      const std::string key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      if (key.empty() || value.empty())
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": empty key or value");
      set_entry(entries, key, value);
    }
  }
  for (const auto& [key, value] : extra) set_entry(entries, key, value);
  return resolve(std::move(entries));
}

RunConfig override_config(
    const RunConfig& base,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  Entries entries = base.entries;
  for (const auto& [key, value] : overrides) set_entry(entries, key, value);
  return resolve(std::move(entries));
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, value] : cfg.entries) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

}  // namespace crs
