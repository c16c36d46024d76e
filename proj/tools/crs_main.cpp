// Experiment driver: trains and compares the resource-allocation agents,
// sweeps physical parameters, and evaluates dumped rate instances.
// Exit codes: 0 success, 2 configuration/usage error, 3 runtime fault.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crs/config.hpp"
#include "crs/harness.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string preset = "desk";
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_out) {
  cmd->add_option("--config", args.config_path,
                  "Key = value configuration file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--preset", args.preset,
                  "Parameter preset the config overlays")
      ->check(CLI::IsMember({"desk", "paper"}));
  auto* out =
      cmd->add_option("--out", args.out_dir, "Output directory for CSVs");
  if (needs_out) out->required();
}

crs::RunConfig load(const CommonArgs& args) {
  return crs::load_config(args.config_path, crs::parse_preset(args.preset));
}

std::vector<crs::AgentKind> parse_agents(
    const std::vector<std::string>& names) {
  std::vector<crs::AgentKind> agents;
  for (const std::string& name : names)
    agents.push_back(crs::parse_agent(name));
  return agents;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Simulator and trainer for cooperative rate-splitting downlinks to "
      "underground devices"};
  app.require_subcommand(1);

  CommonArgs train_args;
  std::string train_strategy;
  std::uint64_t train_seed = 0;
  bool train_seed_set = false;
  bool dump_trajectory = false;
  auto* train_cmd = app.add_subcommand(
      "train", "Train one agent and write its learning curve");
  train_cmd
      ->add_option("--strategy", train_strategy,
                   "Agent to train (crs|rsma|sdma|greedy)")
      ->required()
      ->check(CLI::IsMember({"crs", "rsma", "sdma", "greedy"}));
  train_cmd->add_option("--seed", train_seed, "Run seed (defaults to config)")
      ->each([&train_seed_set](const std::string&) { train_seed_set = true; });
  train_cmd->add_flag("--dump-trajectory", dump_trajectory,
                      "Also write a frozen-policy per-step trajectory CSV");
  add_common(train_cmd, train_args, true);

  CommonArgs conv_args;
  std::vector<std::uint64_t> conv_seeds{1, 2, 3};
  std::vector<std::string> conv_agents{"crs", "rsma", "sdma", "greedy"};
  auto* conv_cmd = app.add_subcommand(
      "convergence",
      "Train every agent on a shared seed set and write learning curves, "
      "summary, and percentage gains");
  conv_cmd->add_option("--seeds", conv_seeds, "Seed set")->delimiter(',');
  conv_cmd->add_option("--strategies", conv_agents, "Agents to compare")
      ->delimiter(',')
      ->check(CLI::IsMember({"crs", "rsma", "sdma", "greedy"}));
  add_common(conv_cmd, conv_args, true);

  CommonArgs sweep_args;
  std::string sweep_var;
  std::vector<double> sweep_values;
  std::vector<std::uint64_t> sweep_seeds{1};
  std::vector<std::string> sweep_agents{"crs", "rsma", "sdma", "greedy"};
  auto* sweep_cmd = app.add_subcommand(
      "sweep",
      "Retrain per parameter value and evaluate each frozen policy over "
      "fresh channel draws");
  sweep_cmd
      ->add_option("--var", sweep_var, "Swept variable (ud_count|depth|vwc)")
      ->required()
      ->check(CLI::IsMember({"ud_count", "depth", "vwc"}));
  sweep_cmd->add_option("--values", sweep_values, "Values of the variable")
      ->required()
      ->delimiter(',');
  sweep_cmd->add_option("--seeds", sweep_seeds, "Seeds per cell")
      ->delimiter(',');
  sweep_cmd->add_option("--strategies", sweep_agents, "Agents to evaluate")
      ->delimiter(',')
      ->check(CLI::IsMember({"crs", "rsma", "sdma", "greedy"}));
  add_common(sweep_cmd, sweep_args, true);

  std::string rate_eval_in;
  auto* rate_cmd = app.add_subcommand(
      "rate-eval", "Evaluate one dumped (links, action) instance");
  rate_cmd->add_option("--in", rate_eval_in, "JSON input file")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) {
      const crs::RunConfig cfg = load(train_args);
      const std::uint64_t seed = train_seed_set ? train_seed : cfg.seed;
      crs::run_train(cfg, crs::parse_agent(train_strategy), seed,
                     train_args.out_dir, dump_trajectory);
    } else if (*conv_cmd) {
      crs::ExperimentSpec spec;
      spec.base = load(conv_args);
      spec.agents = parse_agents(conv_agents);
      spec.seeds = conv_seeds;
      spec.out_dir = conv_args.out_dir;
      crs::run_convergence(spec);
    } else if (*sweep_cmd) {
      crs::ExperimentSpec spec;
      spec.base = load(sweep_args);
      spec.agents = parse_agents(sweep_agents);
      spec.sweep_var = crs::parse_sweep_var(sweep_var);
      spec.sweep_values = sweep_values;
      spec.seeds = sweep_seeds;
      spec.out_dir = sweep_args.out_dir;
      crs::run_sweep(spec);
    } else if (*rate_cmd) {
      std::ifstream in(rate_eval_in, std::ios::binary);
      std::ostringstream buf;
      buf << in.rdbuf();
      const crs::RateEvalCase c =
          crs::rate_eval_case_from_json(buf.str());
      std::cout << crs::rate_report_to_json(c, crs::rate_eval(c));
    }
  } catch (const crs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
