#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "advrl/analysis.hpp"
#include "advrl/gridworld.hpp"

namespace advrl {

/// Outcome of one full-time untargeted attack flavor on the corridor world.
struct FlavorGateOutcome {
  std::string flavor;
  int gate_source = -1;         // transplant source state at the gate
  int gate_action = -1;         // argmax action of the transplanted row
  double preferred_prob = 0.0;  // attacked pi(a* | gate)
  double exact_return = 0.0;
};

/// Machine-checked certificate that on the corridor world no full-time
/// untargeted attack is worst-case. Checks, all by exact evaluation:
/// the victim's preferred gate action a* is the unique argmax for both the
/// optimal and the reward-flipped optimal policy; the optimal adversary
/// plays a* at the gate with probability exactly 1 yet reaches the minimum;
/// every pooled flavor sets pi(a*|gate) to exactly 0 and lands strictly
/// above the adversary's return.
struct CorridorCertificate {
  int gate_state = -1;
  int preferred_action = -1;
  double optimal_return = 0.0;
  double min_policy_return = 0.0;
  double gate_value_optimal = 0.0;
  double adversary_return = 0.0;
  double adversary_gate_value = 0.0;
  double adversary_preferred_prob = 0.0;
  int adversary_gate_source = -1;
  std::vector<FlavorGateOutcome> pool;
  double pool_min_return = 0.0;

  bool preferred_unique = false;
  bool flipped_prefers_same = false;
  bool adversary_keeps_preferred = false;  // pi_h*(a*|gate) == 1 within 1e-9
  bool pool_all_divert = false;            // pi_h1(a*|gate) == 0 within 1e-9
  bool pool_strictly_above_adversary = false;
  bool holds = false;
};

CorridorCertificate certify_corridor();

void to_json(nlohmann::json& j, const CorridorCertificate& c);

/// One divert-action case of the junction argument: on the designated
/// variant, every strategically-timed policy whose gate options are
/// {victim row, some row preferring `divert_action`} keeps V(gate) >= 0,
/// while the optimal adversary's V(gate) is exactly -1. Rows elsewhere range
/// over the victim row and every pooled flavor's divert row, a superset of
/// any single flavor's timing family.
struct JunctionCaseOutcome {
  int divert_action = -1;
  JunctionPenalty variant = JunctionPenalty::north;
  double family_min_gate_value = 0.0;
  double family_min_return = 0.0;
  bool safe = false;  // family_min_gate_value >= 0 > -1
};

/// Outcome of one pooled flavor's full strategic family (its divert map, all
/// timings) on the variant designated for its gate divert action.
struct JunctionFlavorOutcome {
  std::string flavor;
  int gate_divert_action = -1;
  JunctionPenalty variant = JunctionPenalty::north;
  double family_min_return = 0.0;
  double family_min_gate_value = 0.0;
  double adversary_return = 0.0;
  bool strictly_above = false;
};

/// Machine-checked certificate that on the junction pair no
/// strategically-timed untargeted attack is worst-case: whichever action an
/// untargeted map induces at the gate, one variant of the world keeps the
/// whole timing family at V(gate) >= 0 while the optimal adversary reaches
/// V(gate) = -1 exactly there.
struct JunctionCertificate {
  int gate_state = -1;
  int preferred_action = -1;
  double gate_value_optimal = 0.0;
  double optimal_return_north = 0.0;
  double optimal_return_east = 0.0;
  double adversary_return_north = 0.0;
  double adversary_return_east = 0.0;
  double adversary_gate_value_north = 0.0;
  double adversary_gate_value_east = 0.0;
  std::vector<JunctionCaseOutcome> cases;      // three divert actions
  std::vector<JunctionFlavorOutcome> flavors;  // the shipped pool

  bool preferred_unique = false;
  bool adversary_diverts_gate = false;  // on both variants
  bool adversary_gate_value_is_minus_one = false;
  bool all_cases_safe = false;
  bool all_flavors_strictly_above = false;
  bool holds = false;
};

JunctionCertificate certify_junction();

void to_json(nlohmann::json& j, const JunctionCertificate& c);

/// Budget used by both certificates: every state is a neighbor of every
/// other, so the adversary may present any state as the observation. This is
/// the regime of the counterexample worlds; the point they make is that even
/// with unbounded perception attacks, untargeted objectives pick the wrong
/// divert action.
PerturbationBudget full_transplant_budget(const Gridworld& world);

/// Runs verify_inclusion_chain on count random worlds (seeds seed0,
/// seed0+1, ...). Returns the number of worlds with any violated inclusion
/// or non-monotone worst-case chain; 0 means the family ordering held
/// everywhere.
struct ChainSweepResult {
  int worlds_checked = 0;
  int violations = 0;
  std::vector<std::uint64_t> violating_seeds;
};
ChainSweepResult check_chain_on_random_worlds(int count, std::uint64_t seed0);

}  // namespace advrl
