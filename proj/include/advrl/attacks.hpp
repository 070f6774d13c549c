#pragma once

#include <string>
#include <vector>

#include "advrl/embedding.hpp"
#include "advrl/mdp.hpp"
#include "advrl/policy.hpp"
#include "advrl/rng.hpp"

namespace advrl {

/// Observation attacks. identity leaves observations alone; random draws
/// uniformly from the budget; mad maximizes the divergence between the
/// clean and perturbed action distributions at every step; strategic is mad
/// gated by a timing rule; critic steers toward the action the victim's own
/// Q-table ranks worst; two_stage steers toward a separately trained
/// deceptive policy (two_stage_fgsm is the single-step variant).
enum class AttackKind {
  identity,
  random,
  mad,
  strategic,
  critic,
  two_stage_fgsm,
  two_stage,
};

std::string attack_kind_name(AttackKind kind);
AttackKind attack_kind_from_name(const std::string& name);

enum class AttackMethod { fgsm, pgd };

/// First-order optimizer settings for continuous budgets. step_size <= 0
/// means "use the budget epsilon", which makes PGD's first iterate coincide
/// with the FGSM point. best_iterate_tracking keeps the best objective value
/// seen across iterates including the clean observation, so an optimized
/// attack never returns a point worse than no attack under its own
/// objective.
struct OptimizerConfig {
  AttackMethod method = AttackMethod::pgd;
  int iterations = 10;
  double step_size = 0.0;
  double entropy_weight = 0.0;
  bool best_iterate_tracking = true;
};

enum class TimingRule { always, never, preference_gap };

/// When a strategic attack fires: preference_gap attacks only in states
/// where max_a pi(a|s) - min_a pi(a|s) exceeds the threshold on the clean
/// observation.
struct StrategicTimer {
  TimingRule rule = TimingRule::preference_gap;
  double threshold = 0.0;
};

/// Divergence maximized by untargeted attacks. Forward KL is
/// KL(clean || perturbed); reverse swaps the arguments; tv is total
/// variation; cross_entropy_argmax is -log pi(a_clean* | perturbed), the
/// deterministic-policy limit.
enum class MadFlavor { kl_forward, kl_reverse, tv, cross_entropy_argmax };

std::string mad_flavor_name(MadFlavor flavor);

/// D_flavor(clean || candidate) between two action rows, with logs clamped
/// at 1e-300 so one-hot rows produce large finite values that tie.
double row_divergence(MadFlavor flavor, const std::vector<double>& clean,
                      const std::vector<double>& candidate);

/// All flavors usable on discrete budgets, in enumeration order.
const std::vector<MadFlavor>& discrete_flavor_pool();

/// Everything one attack needs. target is the deceptive policy (two_stage
/// kinds); q_table is the victim's state-action values (critic, and the
/// strategic timer's tie to the victim is through the victim policy itself).
struct Attacker {
  AttackKind kind = AttackKind::identity;
  PerturbationBudget budget;
  OptimizerConfig opt;
  StrategicTimer timer;
  MadFlavor flavor = MadFlavor::kl_forward;
  const Policy* victim = nullptr;
  const ObservationEmbedding* embedding = nullptr;
  const Policy* target = nullptr;
  const std::vector<std::vector<double>>* q_table = nullptr;
};

/// Result of one continuous-budget optimization.
struct OptimizeResult {
  std::vector<double> obs;
  double objective = 0.0;
  int best_iterate = 0;  // 0 means the clean observation won
};

/// Weighted-sum objective over the loss kinds, maximized by gradient ascent.
struct ObjectiveTerm {
  LossSpec loss;
  double weight = 1.0;
};

/// Projected gradient ascent (or single-step FGSM) of the weighted objective
/// inside the budget ball, box-clipped to [0,1]. Iterate t uses step/t
/// (harmonic decay, so a PGD run's first iterate is exactly the FGSM point);
/// l2 steps move step_t * sqrt(dim) * g/||g||, linf steps move
/// step_t * sign(g); each iterate is projected onto the ball and then
/// clipped. Gradients with norm below 1e-15 stop the loop. Continuous
/// budgets only.
OptimizeResult maximize_objective(const Policy& victim,
                                  const std::vector<double>& clean_obs,
                                  const PerturbationBudget& budget,
                                  const OptimizerConfig& opt,
                                  const std::vector<ObjectiveTerm>& objective);

/// Untargeted step: maximizes the configured divergence from the clean
/// distribution (plus entropy_weight * entropy).
OptimizeResult mad_attack_step(const Policy& victim,
                               const ObservationEmbedding& embedding,
                               const std::vector<double>& clean_obs,
                               const PerturbationBudget& budget,
                               const OptimizerConfig& opt, MadFlavor flavor);

/// Timing rule evaluated on the victim's clean action distribution.
bool strategic_should_attack(const StrategicTimer& timer,
                             const std::vector<double>& clean_probs);

/// Targeted step toward the action with the lowest q_row value (ties to the
/// lowest action index): minimizes -log pi(worst action | obs).
OptimizeResult critic_attack_step(const Policy& victim,
                                  const ObservationEmbedding& embedding,
                                  const std::vector<double>& clean_obs,
                                  const std::vector<double>& q_row,
                                  const PerturbationBudget& budget,
                                  const OptimizerConfig& opt);

/// Targeted step toward a full distribution: descends
/// KL(perturbed || target_probs) + entropy_weight * H(perturbed). The
/// entropy term is optional pressure past exact imitation toward more
/// peaked rows.
OptimizeResult two_stage_attack_step(const Policy& victim,
                                     const ObservationEmbedding& embedding,
                                     const std::vector<double>& clean_obs,
                                     const std::vector<double>& target_probs,
                                     const PerturbationBudget& budget,
                                     const OptimizerConfig& opt);

/// Uniform draw from the budget: per-coordinate uniform for linf, uniform in
/// the ball for l2, uniform over the neighbor set for discrete budgets.
std::vector<double> random_attack_step(const ObservationEmbedding& embedding,
                                       int state,
                                       const std::vector<double>& clean_obs,
                                       const PerturbationBudget& budget,
                                       Rng& rng);

/// Perturbed observation for one state. Discrete budgets pick the best
/// neighbor encoding by exhaustive scan (ties to the lowest state index);
/// continuous budgets run the configured optimizer. The true state selects
/// the target row (two_stage) and Q row (critic); the victim only ever sees
/// the observation.
std::vector<double> perturb(const Attacker& attacker, int state,
                            const std::vector<double>& clean_obs, Rng& rng);

/// The attacked policy as explicit rows: row s is the victim's distribution
/// at perturb(encode(s)). This is what exact evaluation and the bound
/// reports consume. Deterministic given the seed.
PolicyRows induced_tabular_policy(const Attacker& attacker, int num_states,
                                  std::uint64_t seed);

}  // namespace advrl
