#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "advrl/analysis.hpp"
#include "advrl/attacks.hpp"
#include "advrl/embedding.hpp"
#include "advrl/gridworld.hpp"
#include "advrl/train.hpp"

namespace advrl {

/// Environments the harness can build by name.
Gridworld build_named_world(const std::string& name);
bool is_known_world(const std::string& name);

/// One attack entry of a sweep.
struct AttackSetting {
  AttackKind kind = AttackKind::identity;
  OptimizerConfig opt;
  StrategicTimer timer;
  MadFlavor flavor = MadFlavor::kl_forward;
};

/// Full sweep description, loadable from JSON. validate() throws
/// std::invalid_argument naming the offending field: unknown env, empty or
/// non-increasing epsilons, empty seeds or attacks, duplicate attack kinds,
/// a missing identity control entry, or optimizer fields out of range
/// (iterations >= 1, step_size >= 0, entropy_weight >= 0, threshold in
/// [0,1]).
struct ExperimentConfig {
  std::string name;
  std::string env = "corridor";
  EmbeddingKind embedding = EmbeddingKind::coordinate;
  Norm norm = Norm::linf;
  std::vector<double> epsilons;
  std::vector<AttackSetting> attacks;
  std::vector<std::uint64_t> seeds;
  TrainConfig victim_train;
  DistillConfig distill;
  DeceptiveConfig deceptive;
  std::string output_dir = "out";

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_experiment_config(const std::string& path);

/// One measured sweep cell.
struct SweepRow {
  std::string attack;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double return_value = 0.0;
  double beta0 = 0.0;
  double beta1 = 0.0;
  double c_adv = 0.0;
  double alpha_hat = 0.0;
  double lemma1_rhs = 0.0;
  bool lemma1_holds = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by (attack, epsilon, seed)
  /// Full bound reports in row order, for the acceptance checks; not
  /// serialized to CSV.
  std::vector<BoundReport> reports;
};

/// Everything a sweep derives from its config before attacking: the world,
/// embedding, trained victim (tabular and distilled net) and the selected
/// deceptive target, plus exact reference returns. Deterministic given the
/// config.
struct SweepContext {
  Gridworld world;
  MdpSpec mdp;
  ObservationEmbedding embedding;
  Policy victim_tabular;
  Policy victim_net;
  Policy deceptive;
  PolicyRows expert_rows;     // victim net on clean encodings
  PolicyRows deceptive_rows;  // deceptive target rows
  double return_expert = 0.0;
  double return_deceptive = 0.0;
  double return_min = 0.0;
  double return_max = 0.0;
};

SweepContext prepare_sweep(const ExperimentConfig& config);

/// Runs every (attack, epsilon, seed) cell by exact evaluation of the
/// induced tabular policy, sorted deterministically. `skip` cells present in
/// a previous results file are reused verbatim when resuming.
SweepResult run_sweep(const ExperimentConfig& config, std::ostream* log);

/// CSV with pinned header
/// attack,epsilon,seed,return,beta0,beta1,C,alpha_hat,lemma1_rhs,lemma1_holds
/// and deterministic number formatting; identical configs produce identical
/// bytes.
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> parse_sweep_csv(const std::string& text);

/// Directory run_sweep_to_dir writes into: config.output_dir, prefixed by
/// the ADVRL_OUT_ROOT environment variable when that is set and the
/// configured path is relative.
std::string resolved_output_dir(const ExperimentConfig& config);

/// Writes results.csv, config_snapshot.json and manifest.json under
/// resolved_output_dir(config) (created if missing). If results.csv exists,
/// rows whose (attack, epsilon, seed) key matches the config are kept, only
/// missing cells are computed, and the merged file is rewritten sorted.
/// Returns the merged result; reports are filled only when every cell was
/// computed in this call (reused rows carry no bound report, so a resumed
/// merge returns rows only).
SweepResult run_sweep_to_dir(const ExperimentConfig& config,
                             std::ostream* log);

}  // namespace advrl
