// Command-line front end: train victims and deceptive targets, run attack
// sweeps, and verify the certificates and bounds from the library.
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "advrl/analysis.hpp"
#include "advrl/certificates.hpp"
#include "advrl/experiment.hpp"
#include "advrl/gridworld.hpp"
#include "advrl/policy.hpp"
#include "advrl/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerificationFailed = 1;
constexpr int kExitUsage = 2;

int cmd_render_env(const std::string& env) {
  const advrl::Gridworld world = advrl::build_named_world(env);
  std::cout << world.render_ascii();
  std::cout << "states: " << world.num_states()
            << "  start: " << world.start_state()
            << "  gate: " << world.gate_state() << "\n";
  return kExitOk;
}

int cmd_train_victim(const std::string& env, const advrl::TrainConfig& config,
                     const std::string& out) {
  const advrl::Gridworld world = advrl::build_named_world(env);
  const advrl::TrainResult result = advrl::train_policy(world.to_mdp(), config);
  std::cout << "algo: " << advrl::train_algo_name(config.algo)
            << "  episodes: " << config.episodes
            << "  exact return: " << result.exact_return << "\n";
  if (!out.empty()) {
    advrl::save_policy(out, result.policy);
    std::cout << "saved " << out << "\n";
  }
  return kExitOk;
}

int cmd_train_deceptive(const std::string& env,
                        const advrl::DeceptiveConfig& config,
                        const std::string& out) {
  const advrl::Gridworld world = advrl::build_named_world(env);
  const advrl::DeceptiveResult result =
      advrl::train_deceptive(world.to_mdp(), config);
  std::cout << "member returns:";
  for (const double r : result.member_returns) std::cout << " " << r;
  std::cout << "\nselected member " << result.selected_index
            << " (median return "
            << result.member_returns[result.selected_index] << ")\n";
  if (!out.empty()) {
    advrl::save_policy(out, result.selected);
    std::cout << "saved " << out << "\n";
  }
  return kExitOk;
}

int cmd_attack(const std::string& config_path, const std::string& attack,
               double epsilon, std::int64_t seed) {
  advrl::ExperimentConfig config =
      advrl::load_experiment_config(config_path);
  if (!attack.empty()) {
    // The identity entry stays as the no-noise control row.
    std::vector<advrl::AttackSetting> kept;
    bool found = false;
    for (const advrl::AttackSetting& setting : config.attacks) {
      const std::string name = advrl::attack_kind_name(setting.kind);
      if (name == attack || name == "identity") {
        kept.push_back(setting);
        found = found || name == attack;
      }
    }
    if (!found) {
      throw std::invalid_argument("attack '" + attack +
                                  "' is not in the config");
    }
    config.attacks = kept;
  }
  if (epsilon > 0.0) config.epsilons = {epsilon};
  if (seed >= 0) config.seeds = {static_cast<std::uint64_t>(seed)};
  const advrl::SweepResult result = advrl::run_sweep(config, nullptr);
  std::cout << advrl::sweep_csv(result.rows);
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, bool quiet) {
  const advrl::ExperimentConfig config =
      advrl::load_experiment_config(config_path);
  const advrl::SweepResult result =
      advrl::run_sweep_to_dir(config, quiet ? nullptr : &std::cout);
  std::cout << "wrote " << result.rows.size() << " rows to "
            << advrl::resolved_output_dir(config) << "/results.csv\n";
  return kExitOk;
}

int cmd_verify_props(int worlds, std::uint64_t seed0,
                     const std::string& json_out) {
  const advrl::CorridorCertificate corridor = advrl::certify_corridor();
  const advrl::JunctionCertificate junction = advrl::certify_junction();
  const advrl::ChainSweepResult chain =
      advrl::check_chain_on_random_worlds(worlds, seed0);

  std::cout << "corridor certificate: " << (corridor.holds ? "PASS" : "FAIL")
            << "\n"
            << "  optimal return " << corridor.optimal_return
            << ", adversary return " << corridor.adversary_return
            << ", untargeted pool min " << corridor.pool_min_return << "\n"
            << "  adversary pi(a*|gate) " << corridor.adversary_preferred_prob
            << ", pool diverts gate: "
            << (corridor.pool_all_divert ? "yes" : "no") << "\n";
  std::cout << "junction certificate: " << (junction.holds ? "PASS" : "FAIL")
            << "\n"
            << "  adversary V(gate) north " << junction.adversary_gate_value_north
            << ", east " << junction.adversary_gate_value_east << "\n"
            << "  divert cases safe: " << (junction.all_cases_safe ? "yes" : "no")
            << ", pooled flavors strictly above: "
            << (junction.all_flavors_strictly_above ? "yes" : "no") << "\n";
  const bool chain_ok = chain.violations == 0;
  std::cout << "inclusion chain on " << chain.worlds_checked
            << " random worlds: " << (chain_ok ? "PASS" : "FAIL") << " ("
            << chain.violations << " violations)\n";

  if (!json_out.empty()) {
    const nlohmann::json j = {{"corridor", corridor},
                              {"junction", junction},
                              {"chain",
                               {{"worlds_checked", chain.worlds_checked},
                                {"violations", chain.violations},
                                {"violating_seeds", chain.violating_seeds}}}};
    std::ofstream out(json_out, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + json_out);
    out << j.dump(2) << "\n";
    std::cout << "wrote " << json_out << "\n";
  }
  return corridor.holds && junction.holds && chain_ok
             ? kExitOk
             : kExitVerificationFailed;
}

int cmd_check_bounds(const std::string& config_path) {
  const advrl::ExperimentConfig config =
      advrl::load_experiment_config(config_path);
  const advrl::SweepResult result = advrl::run_sweep(config, nullptr);
  int bound_failures = 0;
  int tv_failures = 0;
  int threshold_failures = 0;
  for (std::size_t i = 0; i < result.reports.size(); ++i) {
    const advrl::BoundReport& report = result.reports[i];
    const advrl::SweepRow& row = result.rows[i];
    const bool ok =
        report.bound_holds && report.tv_holds && report.threshold_consistent;
    if (!ok) {
      std::cout << "FAIL " << row.attack << " eps=" << row.epsilon
                << " seed=" << row.seed
                << (report.bound_holds ? "" : " [return bound]")
                << (report.tv_holds ? "" : " [tv bound]")
                << (report.threshold_consistent ? "" : " [threshold]") << "\n";
    }
    bound_failures += report.bound_holds ? 0 : 1;
    tv_failures += report.tv_holds ? 0 : 1;
    threshold_failures += report.threshold_consistent ? 0 : 1;
  }
  const int failures = bound_failures + tv_failures + threshold_failures;
  std::cout << result.rows.size() << " rows: return bound "
            << (bound_failures == 0 ? "PASS" : "FAIL") << ", tv bound "
            << (tv_failures == 0 ? "PASS" : "FAIL") << ", imitation threshold "
            << (threshold_failures == 0 ? "PASS" : "FAIL") << "\n";
  return failures == 0 ? kExitOk : kExitVerificationFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial observation attacks on tabular RL policies"};
  app.require_subcommand(1);

  std::string env = "corridor";
  std::string config_path;
  std::string out_path;
  std::string attack_name;
  std::string json_out;
  double epsilon = 0.0;
  std::int64_t seed_filter = -1;
  bool quiet = false;
  int worlds = 20;
  std::uint64_t seed0 = 7;
  advrl::TrainConfig train_config;

  CLI::App* render = app.add_subcommand("render-env", "Print a world as text");
  render->add_option("--env", env, "corridor, junction_north or junction_east");

  CLI::App* train = app.add_subcommand("train-victim", "Train a tabular victim");
  std::string algo_name = "q_learning";
  train->add_option("--env", env, "world name");
  train->add_option("--algo", algo_name,
                    "q_learning, actor_critic or policy_gradient");
  train->add_option("--episodes", train_config.episodes, "training episodes");
  train->add_option("--lr", train_config.lr, "step size");
  train->add_option("--margin", train_config.greedy_margin,
                    "logit margin of the extracted greedy policy");
  train->add_option("--seed", train_config.seed, "rng seed");
  train->add_option("--out", out_path, "policy checkpoint path");

  CLI::App* deceptive =
      app.add_subcommand("train-deceptive", "Train the deceptive target");
  int ensemble_size = 5;
  deceptive->add_option("--env", env, "world name");
  deceptive->add_option("--episodes", train_config.episodes,
                        "training episodes per member");
  deceptive->add_option("--ensemble", ensemble_size, "ensemble size (odd)");
  deceptive->add_option("--seed", train_config.seed, "base rng seed");
  deceptive->add_option("--out", out_path, "policy checkpoint path");

  CLI::App* attack =
      app.add_subcommand("attack", "Run selected sweep cells to stdout");
  attack->add_option("--config", config_path, "sweep config JSON")->required();
  attack->add_option("--attack", attack_name, "restrict to one attack kind");
  attack->add_option("--epsilon", epsilon, "restrict to one budget");
  attack->add_option("--seed", seed_filter, "restrict to one seed");

  CLI::App* sweep =
      app.add_subcommand("sweep", "Run a full sweep into its output dir");
  sweep->add_option("--config", config_path, "sweep config JSON")->required();
  sweep->add_flag("--quiet", quiet, "suppress per-cell progress rows");

  CLI::App* verify = app.add_subcommand(
      "verify-props", "Check the corridor and junction certificates");
  verify->add_option("--worlds", worlds, "random worlds for the chain check");
  verify->add_option("--seed0", seed0, "first random-world seed");
  verify->add_option("--json", json_out, "write certificates as JSON");

  CLI::App* bounds = app.add_subcommand(
      "check-bounds", "Verify the return and divergence bounds on a sweep");
  bounds->add_option("--config", config_path, "sweep config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (render->parsed()) return cmd_render_env(env);
    if (train->parsed()) {
      train_config.algo = advrl::train_algo_from_name(algo_name);
      return cmd_train_victim(env, train_config, out_path);
    }
    if (deceptive->parsed()) {
      advrl::DeceptiveConfig config;
      config.base = train_config;
      config.ensemble_size = ensemble_size;
      return cmd_train_deceptive(env, config, out_path);
    }
    if (attack->parsed()) {
      return cmd_attack(config_path, attack_name, epsilon, seed_filter);
    }
    if (sweep->parsed()) return cmd_sweep(config_path, quiet);
    if (verify->parsed()) return cmd_verify_props(worlds, seed0, json_out);
    if (bounds->parsed()) return cmd_check_bounds(config_path);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
