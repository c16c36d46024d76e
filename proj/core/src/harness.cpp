#include "crs/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace crs {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr const char* kVersionTag = "crs-sim 0.1.0";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

double stdev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

double window_mean(const std::vector<double>& curve, bool tail) {
  const std::size_t w = std::min<std::size_t>(50, curve.size());
  double sum = 0.0;
  const std::size_t begin = tail ? curve.size() - w : 0;
  for (std::size_t i = begin; i < begin + w; ++i) sum += curve[i];
  return sum / static_cast<double>(w);
}

// Versioned CSV: a `# crs.<type>.vN` tag line, then the header row.
class CsvFile {
 public:
  CsvFile(const std::string& path, const std::string& tag,
          const std::string& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open output file: " + path);
    out_ << "# " << tag << "\n" << header << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw std::invalid_argument("output directory not set");
  fs::create_directories(dir);
}

ordered_json config_json(const RunConfig& cfg) {
  ordered_json j = ordered_json::object();
  for (const auto& [key, value] : cfg.entries) j[key] = value;
  return j;
}

void write_manifest(const std::string& path, const std::string& command,
                    const RunConfig& cfg,
                    const std::vector<std::uint64_t>& seeds,
                    const std::vector<std::string>& agents,
                    const ordered_json& extra,
                    const std::vector<std::string>& outputs,
                    double wall_time_s) {
  ordered_json j;
  j["version"] = kVersionTag;
  j["command"] = command;
  j["config"] = config_json(cfg);
  j["seeds"] = seeds;
  j["agents"] = agents;
  for (const auto& [key, value] : extra.items()) j[key] = value;
  j["wall_time_s"] = wall_time_s;
  ordered_json files = ordered_json::array();
  for (const std::string& f : outputs) {
    ordered_json entry;
    entry["file"] = fs::path(f).filename().string();
    entry["fnv1a64"] = file_digest_hex(f);
    files.push_back(entry);
  }
  j["outputs"] = files;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << j.dump(2) << '\n';
}

constexpr const char* kCurveTag = "crs.curve.v1";
constexpr const char* kCurveHeader =
    "episode,mean_reward,actor_loss,critic_loss,entropy,mean_theta,"
    "mean_pc_fraction";
constexpr const char* kGreedyCurveTag = "crs.greedy_curve.v1";
constexpr const char* kGreedyCurveHeader = "episode,mean_reward,best_reward";
constexpr const char* kMeanCurveTag = "crs.curve_mean.v1";
constexpr const char* kMeanCurveHeader = "episode,mean_reward";

std::string run_name(AgentKind agent, std::uint64_t seed) {
  return std::string(agent_name(agent)) + "_seed" + std::to_string(seed);
}

// PPO training with rows streamed into the curve CSV. Returns the trainer
// for frozen-policy evaluation.
Trainer train_ppo(const RunConfig& cfg, std::uint64_t seed,
                  CsvFile* csv, std::vector<double>* curve) {
  Trainer trainer(cfg.env, cfg.ppo, seed);
  trainer.train([&](const EpisodeRow& row) {
    if (csv != nullptr) {
      csv->row({std::to_string(row.episode), fmt(row.mean_reward),
                fmt(row.actor_loss), fmt(row.critic_loss), fmt(row.entropy),
                fmt(row.mean_theta), fmt(row.mean_pc_fraction)});
    }
    if (curve != nullptr) curve->push_back(row.mean_reward);
  });
  return trainer;
}

// Greedy search over the same number of environment steps PPO sees,
// aggregated into episode-sized blocks for a comparable curve.
GreedyResult train_greedy(const RunConfig& cfg, std::uint64_t seed,
                          CsvFile* csv, std::vector<double>* curve) {
  Environment env(cfg.env, seed);
  Rng rng = Rng(seed).derive(3);
  const std::size_t block = cfg.ppo.steps_per_episode;
  const std::size_t steps = cfg.ppo.episodes * block;
  GreedyResult result = run_greedy(env, steps, cfg.greedy_explore, rng);
  double best = 0.0;
  for (std::size_t e = 0; e < cfg.ppo.episodes; ++e) {
    double sum = 0.0;
    for (std::size_t t = e * block; t < (e + 1) * block; ++t) {
      sum += result.rewards[t];
      best = std::max(best, result.rewards[t]);
    }
    const double block_mean = sum / static_cast<double>(block);
    if (csv != nullptr)
      csv->row({std::to_string(e), fmt(block_mean), fmt(best)});
    if (curve != nullptr) curve->push_back(block_mean);
  }
  return result;
}

void dump_trajectory_csv(const std::string& path, const RunConfig& cfg,
                         std::uint64_t seed, const Trainer* trainer,
                         const ResourceAction* replay) {
  const ActionLayout layout =
      ActionLayout::for_strategy(cfg.env.strategy, cfg.env.ud_count);
  std::string header = "step,reward,theta";
  for (std::size_t i = 0; i < layout.power_dim; ++i)
    header += ",power_" + std::to_string(i);
  for (std::size_t i = 0; i < layout.split_dim; ++i)
    header += ",split_" + std::to_string(i);
  CsvFile csv(path, "crs.trajectory.v1", header);

  Environment env(cfg.env, seed, 4);
  EnvState state = env.reset();
  Rng unused(0);
  for (std::size_t t = 0; t < cfg.ppo.steps_per_episode; ++t) {
    ResourceAction action;
    if (trainer != nullptr) {
      const std::vector<double> norm_state =
          trainer->state_norm().normalize(state);
      action = act(trainer->nets().live, layout, norm_state,
                   cfg.env.gains.tx_power_sat, unused, true)
                   .action;
    } else {
      action = *replay;
    }
    StepOutcome outcome = env.step(action);
    std::vector<std::string> cells{std::to_string(t), fmt(outcome.reward),
                                   fmt(action.theta)};
    for (double p : action.power) cells.push_back(fmt(p));
    for (double s : action.common_split) cells.push_back(fmt(s));
    csv.row(cells);
    state = std::move(outcome.next_state);
  }
}

std::vector<double> evaluate_greedy(const RunConfig& cfg, std::uint64_t seed,
                                    const ResourceAction& best,
                                    std::size_t draws) {
  // Stream 4 matches the PPO evaluation convention: same deployment,
  // fading disjoint from the search phase.
  Environment env(cfg.env, seed, 4);
  env.reset();
  std::vector<double> rewards;
  rewards.reserve(draws);
  for (std::size_t d = 0; d < draws; ++d)
    rewards.push_back(env.step(best).reward);
  return rewards;
}

RunConfig cell_config(const RunConfig& base, SweepVar var, double value) {
  switch (var) {
    case SweepVar::UdCount: {
      const double rounded = std::llround(value);
      if (std::abs(value - rounded) > 1e-9 || rounded < 1)
        throw ConfigError("ud_count sweep values must be positive integers");
      return override_config(
          base, {{"ud.count", std::to_string(std::llround(value))}});
    }
    case SweepVar::BurialDepth:
      return override_config(base, {{"soil.burial_depth_m", fmt(value)}});
    case SweepVar::Vwc:
      return override_config(base, {{"soil.vwc", fmt(value)}});
  }
  throw std::logic_error("unreachable sweep variable");
}

cvec cvec_from_json(const ordered_json& j, const std::string& what) {
  cvec out;
  if (!j.is_array())
    throw ConfigError("rate-eval: " + what + " must be an array");
  for (const auto& entry : j) {
    if (!entry.is_array() || entry.size() != 2)
      throw ConfigError("rate-eval: entries of " + what +
                        " must be [re, im] pairs");
    out.emplace_back(entry[0].get<double>(), entry[1].get<double>());
  }
  return out;
}

}  // namespace

AgentKind parse_agent(const std::string& name) {
  if (name == "crs") return AgentKind::PpoCrs;
  if (name == "rsma") return AgentKind::PpoRsma;
  if (name == "sdma") return AgentKind::PpoSdma;
  if (name == "greedy") return AgentKind::GreedyCrs;
  throw ConfigError("unknown agent: " + name +
                    " (expected crs, rsma, sdma, or greedy)");
}

const char* agent_name(AgentKind agent) {
  switch (agent) {
    case AgentKind::PpoCrs: return "crs";
    case AgentKind::PpoRsma: return "rsma";
    case AgentKind::PpoSdma: return "sdma";
    case AgentKind::GreedyCrs: return "greedy";
  }
  return "?";
}

Strategy agent_strategy(AgentKind agent) {
  switch (agent) {
    case AgentKind::PpoRsma: return Strategy::Rsma;
    case AgentKind::PpoSdma: return Strategy::Sdma;
    default: return Strategy::Crs;
  }
}

SweepVar parse_sweep_var(const std::string& name) {
  if (name == "ud_count") return SweepVar::UdCount;
  if (name == "depth") return SweepVar::BurialDepth;
  if (name == "vwc") return SweepVar::Vwc;
  throw ConfigError("unknown sweep variable: " + name +
                    " (expected ud_count, depth, or vwc)");
}

const char* sweep_var_name(SweepVar var) {
  switch (var) {
    case SweepVar::UdCount: return "ud_count";
    case SweepVar::BurialDepth: return "depth";
    case SweepVar::Vwc: return "vwc";
  }
  return "?";
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string file_digest_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file for digest: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(bytes.data(), bytes.size())));
  return buf;
}

TrainOutputs run_train(const RunConfig& cfg, AgentKind agent,
                       std::uint64_t seed, const std::string& out_dir,
                       bool dump_trajectory) {
  const auto t0 = std::chrono::steady_clock::now();
  ensure_dir(out_dir);
  const RunConfig run_cfg = override_config(
      cfg, {{"strategy", strategy_name(agent_strategy(agent))},
            {"seed", std::to_string(seed)}});
  const std::string name = run_name(agent, seed);

  TrainOutputs out;
  const std::string curve_path = join_path(out_dir, "curve_" + name + ".csv");

  if (agent == AgentKind::GreedyCrs) {
    GreedyResult result;
    {
      CsvFile csv(curve_path, kGreedyCurveTag, kGreedyCurveHeader);
      result = train_greedy(run_cfg, seed, &csv, &out.curve);
    }
    out.files.push_back(curve_path);
    if (dump_trajectory) {
      const std::string traj_path =
          join_path(out_dir, "trajectory_" + name + ".csv");
      dump_trajectory_csv(traj_path, run_cfg, seed, nullptr,
                          &result.best_action);
      out.files.push_back(traj_path);
    }
  } else {
    Trainer trainer = [&] {
      CsvFile csv(curve_path, kCurveTag, kCurveHeader);
      return train_ppo(run_cfg, seed, &csv, &out.curve);
    }();
    out.files.push_back(curve_path);
    const std::string ckpt_path =
        join_path(out_dir, "policy_" + name + ".ckpt");
    trainer.save_checkpoint(ckpt_path);
    out.files.push_back(ckpt_path);
    if (dump_trajectory) {
      const std::string traj_path =
          join_path(out_dir, "trajectory_" + name + ".csv");
      dump_trajectory_csv(traj_path, run_cfg, seed, &trainer, nullptr);
      out.files.push_back(traj_path);
    }
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  ordered_json extra;
  extra["trajectory_dump"] = dump_trajectory;
  const std::string manifest_path =
      join_path(out_dir, "manifest_" + name + ".json");
  write_manifest(manifest_path, "train", run_cfg, {seed},
                 {agent_name(agent)}, extra, out.files, wall);
  out.files.push_back(manifest_path);
  return out;
}

ConvergenceResult run_convergence(const ExperimentSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  if (spec.agents.empty()) throw std::invalid_argument("no agents selected");
  if (spec.seeds.empty()) throw std::invalid_argument("no seeds given");
  ensure_dir(spec.out_dir);

  ConvergenceResult result;
  for (AgentKind agent : spec.agents) {
    const RunConfig run_cfg = override_config(
        spec.base, {{"strategy", strategy_name(agent_strategy(agent))}});
    auto& curves = result.curves[agent_name(agent)];
    for (std::uint64_t seed : spec.seeds) {
      const RunConfig seeded =
          override_config(run_cfg, {{"seed", std::to_string(seed)}});
      const std::string curve_path = join_path(
          spec.out_dir, "curve_" + run_name(agent, seed) + ".csv");
      std::vector<double> curve;
      if (agent == AgentKind::GreedyCrs) {
        CsvFile csv(curve_path, kGreedyCurveTag, kGreedyCurveHeader);
        train_greedy(seeded, seed, &csv, &curve);
      } else {
        CsvFile csv(curve_path, kCurveTag, kCurveHeader);
        train_ppo(seeded, seed, &csv, &curve);
      }
      curves.push_back(std::move(curve));
      result.files.push_back(curve_path);
    }

    const std::size_t episodes = curves.front().size();
    const std::string mean_path = join_path(
        spec.out_dir,
        "curve_" + std::string(agent_name(agent)) + "_mean.csv");
    CsvFile mean_csv(mean_path, kMeanCurveTag, kMeanCurveHeader);
    for (std::size_t e = 0; e < episodes; ++e) {
      double sum = 0.0;
      for (const auto& curve : curves) sum += curve[e];
      mean_csv.row({std::to_string(e),
                    fmt(sum / static_cast<double>(curves.size()))});
    }
    result.files.push_back(mean_path);

    double initial = 0.0;
    double final_ = 0.0;
    for (const auto& curve : curves) {
      initial += window_mean(curve, false);
      final_ += window_mean(curve, true);
    }
    result.initial_mean[agent_name(agent)] =
        initial / static_cast<double>(curves.size());
    result.final_mean[agent_name(agent)] =
        final_ / static_cast<double>(curves.size());
  }

  const std::string summary_path = join_path(spec.out_dir, "summary.csv");
  {
    CsvFile csv(summary_path, "crs.summary.v1",
                "strategy,seed,initial_mean_reward,final_mean_reward");
    for (AgentKind agent : spec.agents) {
      const auto& curves = result.curves[agent_name(agent)];
      for (std::size_t s = 0; s < spec.seeds.size(); ++s) {
        csv.row({agent_name(agent), std::to_string(spec.seeds[s]),
                 fmt(window_mean(curves[s], false)),
                 fmt(window_mean(curves[s], true))});
      }
      csv.row({agent_name(agent), "all",
               fmt(result.initial_mean[agent_name(agent)]),
               fmt(result.final_mean[agent_name(agent)])});
    }
  }
  result.files.push_back(summary_path);

  if (result.final_mean.count("crs") != 0) {
    const std::string gains_path = join_path(spec.out_dir, "gains.csv");
    CsvFile csv(gains_path, "crs.gains.v1",
                "baseline,crs_final,baseline_final,gain_pct");
    const double crs_final = result.final_mean["crs"];
    for (const char* baseline : {"rsma", "sdma", "greedy"}) {
      if (result.final_mean.count(baseline) == 0) continue;
      const double base_final = result.final_mean[baseline];
      csv.row({baseline, fmt(crs_final), fmt(base_final),
               fmt((crs_final - base_final) / base_final * 100.0)});
    }
    result.files.push_back(gains_path);
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::vector<std::string> agents;
  for (AgentKind agent : spec.agents) agents.push_back(agent_name(agent));
  const std::string manifest_path = join_path(spec.out_dir, "manifest.json");
  write_manifest(manifest_path, "convergence", spec.base, spec.seeds, agents,
                 ordered_json::object(), result.files, wall);
  result.files.push_back(manifest_path);
  return result;
}

SweepResult run_sweep(const ExperimentSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  if (spec.sweep_values.empty())
    throw std::invalid_argument("no sweep values given");
  if (spec.agents.empty()) throw std::invalid_argument("no agents selected");
  if (spec.seeds.empty()) throw std::invalid_argument("no seeds given");
  ensure_dir(spec.out_dir);

  SweepResult result;
  const std::string var = sweep_var_name(spec.sweep_var);
  const std::string cells_path = join_path(spec.out_dir, "sweep_cells.csv");
  {
    CsvFile cells_csv(
        cells_path, "crs.sweep_cells.v1",
        "variable,value,strategy,seed,mean_min_rate,std_min_rate");

    for (double value : spec.sweep_values) {
      const RunConfig base_cell =
          cell_config(spec.base, spec.sweep_var, value);
      for (AgentKind agent : spec.agents) {
        const RunConfig agent_cfg = override_config(
            base_cell, {{"strategy", strategy_name(agent_strategy(agent))}});
        SweepCell cell;
        cell.value = value;
        cell.agent = agent_name(agent);
        for (std::uint64_t seed : spec.seeds) {
          const RunConfig run_cfg =
              override_config(agent_cfg, {{"seed", std::to_string(seed)}});
          std::vector<double> rewards;
          if (agent == AgentKind::GreedyCrs) {
            GreedyResult greedy =
                train_greedy(run_cfg, seed, nullptr, nullptr);
            rewards = evaluate_greedy(run_cfg, seed, greedy.best_action,
                                      run_cfg.eval_draws);
          } else {
            Trainer trainer = train_ppo(run_cfg, seed, nullptr, nullptr);
            rewards = trainer.evaluate_rewards(run_cfg.env,
                                               run_cfg.eval_draws, seed);
          }
          const double m = mean_of(rewards);
          cell.seed_means.push_back(m);
          cells_csv.row({var, fmt(value), cell.agent, std::to_string(seed),
                         fmt(m), fmt(stdev_of(rewards))});
        }
        cell.mean = mean_of(cell.seed_means);
        cell.stdev = stdev_of(cell.seed_means);
        result.cells.push_back(std::move(cell));
      }
    }
  }
  result.files.push_back(cells_path);

  const std::string sweep_path = join_path(spec.out_dir, "sweep.csv");
  {
    CsvFile csv(sweep_path, "crs.sweep.v1",
                "variable,value,strategy,mean_min_rate,std_min_rate");
    for (const SweepCell& cell : result.cells)
      csv.row({var, fmt(cell.value), cell.agent, fmt(cell.mean),
               fmt(cell.stdev)});
  }
  result.files.push_back(sweep_path);

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::vector<std::string> agents;
  for (AgentKind agent : spec.agents) agents.push_back(agent_name(agent));
  ordered_json extra;
  extra["sweep_var"] = var;
  extra["sweep_values"] = spec.sweep_values;
  const std::string manifest_path = join_path(spec.out_dir, "manifest.json");
  write_manifest(manifest_path, "sweep", spec.base, spec.seeds, agents, extra,
                 result.files, wall);
  result.files.push_back(manifest_path);
  return result;
}

RateEvalCase rate_eval_case_from_json(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("rate-eval: invalid JSON: ") + e.what());
  }
  try {
    RateEvalCase c;
    c.strategy = parse_strategy(j.at("strategy").get<std::string>());
    c.params.noise_power = j.at("noise_power").get<double>();
    c.params.relay_power = j.value("relay_power", 0.0);
    const auto& links = j.at("links");
    c.links.h_ar = cvec_from_json(links.at("h_ar"), "links.h_ar");
    for (const auto& h : links.at("h_ud"))
      c.links.h_ud.push_back(cvec_from_json(h, "links.h_ud[n]"));
    c.links.h_relay_ud =
        cvec_from_json(links.at("h_relay_ud"), "links.h_relay_ud");
    const auto& action = j.at("action");
    c.action.power = action.at("power").get<std::vector<double>>();
    if (action.contains("common_split"))
      c.action.common_split =
          action.at("common_split").get<std::vector<double>>();
    c.action.theta = action.value("theta", 1.0);
    return c;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("rate-eval: malformed input: ") + e.what());
  }
}

RateReport rate_eval(const RateEvalCase& c) {
  double budget = 0.0;
  for (double p : c.action.power) budget += p;
  validate_action(c.action, c.strategy, c.links.ud_count(), budget);
  return evaluate_strategy(c.strategy, c.links, c.action, c.params);
}

std::string rate_report_to_json(const RateEvalCase& c,
                                const RateReport& report) {
  ordered_json j;
  j["strategy"] = strategy_name(c.strategy);
  j["min_rate"] = report.min_rate;
  j["rate_common"] = report.rate_common;
  j["rate_total"] = report.rate_total;
  j["rate_coop_ud"] = report.rate_coop_ud;
  j["sinr_common_relay"] = report.sinr_common_relay;
  j["sinr_common_ud"] = report.sinr_common_ud;
  j["sinr_priv_relay"] = report.sinr_priv_relay;
  j["sinr_priv_ud"] = report.sinr_priv_ud;
  return j.dump(2) + "\n";
}

}  // namespace crs
