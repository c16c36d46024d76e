#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "crs/config.hpp"
#include "crs/greedy.hpp"

namespace crs {

// The trainable agents the experiment driver compares. The greedy agent
// runs on the CRS action space.
enum class AgentKind { PpoCrs, PpoRsma, PpoSdma, GreedyCrs };

AgentKind parse_agent(const std::string& name);  // crs|rsma|sdma|greedy
const char* agent_name(AgentKind agent);
Strategy agent_strategy(AgentKind agent);

enum class SweepVar { UdCount, BurialDepth, Vwc };

SweepVar parse_sweep_var(const std::string& name);  // ud_count|depth|vwc
const char* sweep_var_name(SweepVar var);

struct ExperimentSpec {
  RunConfig base;
  std::vector<AgentKind> agents{AgentKind::PpoCrs, AgentKind::PpoRsma,
                                AgentKind::PpoSdma, AgentKind::GreedyCrs};
  SweepVar sweep_var = SweepVar::BurialDepth;
  std::vector<double> sweep_values;
  std::vector<std::uint64_t> seeds{1};
  std::string out_dir;
};

// 64-bit FNV-1a over a byte string, hex-encoded; manifests digest every
// output file with it.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string file_digest_hex(const std::string& path);

// Trains one agent with one seed: learning-curve CSV, checkpoint (PPO
// agents), optional frozen-policy trajectory CSV, manifest.json.
struct TrainOutputs {
  std::vector<double> curve;  // per-episode mean reward
  std::vector<std::string> files;
};

TrainOutputs run_train(const RunConfig& cfg, AgentKind agent,
                       std::uint64_t seed, const std::string& out_dir,
                       bool dump_trajectory = false);

// Trains every agent on every seed with shared physics and seeds; one
// curve CSV per (agent, seed), a per-agent mean curve, summary and
// percentage-gain CSVs, and a manifest covering all of them.
struct ConvergenceResult {
  // agent name -> one mean-reward curve per seed, seed order preserved
  std::map<std::string, std::vector<std::vector<double>>> curves;
  std::map<std::string, double> initial_mean;  // first-window mean, seeds pooled
  std::map<std::string, double> final_mean;    // last-window mean, seeds pooled
  std::vector<std::string> files;
};

ConvergenceResult run_convergence(const ExperimentSpec& spec);

// Retrains per sweep cell and evaluates the frozen policy over
// base.eval_draws fresh realizations; greedy replays its best archived
// action. Long-format CSV per cell plus a per-seed detail CSV.
struct SweepCell {
  double value = 0.0;
  std::string agent;
  std::vector<double> seed_means;  // per-seed mean over evaluation draws
  double mean = 0.0;               // across seeds
  double stdev = 0.0;              // across seeds, population
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<std::string> files;
};

SweepResult run_sweep(const ExperimentSpec& spec);

// rate-eval: evaluates one dumped (links, action) instance. The JSON
// schema is documented in the README; complex numbers are [re, im] pairs.
struct RateEvalCase {
  Strategy strategy = Strategy::Crs;
  LinkRealization links;
  ResourceAction action;
  RateParams params;
};

RateEvalCase rate_eval_case_from_json(const std::string& json_text);
RateReport rate_eval(const RateEvalCase& c);
std::string rate_report_to_json(const RateEvalCase& c,
                                const RateReport& report);

}  // namespace crs
