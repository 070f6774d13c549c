#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace advrl {

/// Per-state action distributions: rows[s][a] = pi(a|s).
/// Every row must be nonnegative and sum to 1 within 1e-9.
using PolicyRows = std::vector<std::vector<double>>;

/// Finite MDP with explicit tables.
///
/// transition[s][a][s'] is the probability of moving to s' when taking a in
/// s; reward[s][a] is the expected immediate reward of taking a in s.
/// Terminal states must self-loop with zero reward so infinite-horizon
/// discounted values stay finite and episodic semantics are preserved.
struct MdpSpec {
  int num_states = 0;
  int num_actions = 0;
  std::vector<std::vector<std::vector<double>>> transition;  // [s][a][s']
  std::vector<std::vector<double>> reward;                   // [s][a]
  double gamma = 0.9;
  std::vector<double> initial_dist;                          // [s]
  std::vector<std::uint8_t> terminal;                        // [s], 0/1

  /// Throws std::invalid_argument naming the offending entry when a shape or
  /// stochasticity constraint is violated: transition rows must sum to 1
  /// within 1e-9, gamma must lie in (0,1), initial_dist must be a
  /// distribution, terminals must self-loop with zero reward.
  void validate() const;
};

void to_json(nlohmann::json& j, const MdpSpec& m);
void from_json(const nlohmann::json& j, MdpSpec& m);

/// Everything exact policy evaluation produces in one pass.
struct EvaluationReport {
  double return_value = 0.0;             // E_{s0~mu0} V(s0)
  std::vector<double> v;                 // [s]
  std::vector<std::vector<double>> q;    // [s][a]
  std::vector<std::vector<double>> adv;  // [s][a], q - v
  std::vector<double> occupancy;         // [s], discounted visitation, sums to 1
};

/// Exact evaluation of a stochastic policy by direct linear solve of
/// (I - gamma P_pi) v = r_pi. No simulation, no iteration-to-tolerance.
/// The occupancy is the normalized discounted visitation
/// d(s) = (1-gamma) sum_t gamma^t Pr(s_t = s) from initial_dist.
EvaluationReport evaluate_policy(const MdpSpec& mdp, const PolicyRows& pi);

/// Same MDP with every reward negated. Terminal self-loop rewards stay zero.
MdpSpec flip_rewards(const MdpSpec& mdp);

/// One transition of a sampled episode.
struct TrajectoryStep {
  int episode = 0;
  int step = 0;
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  bool done = false;
};

/// Sampled episodes plus the CSV rendering used by the CLI.
struct TrajectoryBatch {
  std::vector<TrajectoryStep> steps;

  /// Header "episode,step,state,action,reward,next_state,done", one row per
  /// step, deterministic formatting.
  std::string to_csv() const;
};

/// Samples episodes with a seeded generator. Identical (mdp, pi, episodes,
/// seed) inputs produce identical batches on every platform. Episodes end on
/// entering a terminal state or after horizon_cap steps.
TrajectoryBatch sample_trajectories(const MdpSpec& mdp, const PolicyRows& pi,
                                    int episodes, std::uint64_t seed,
                                    int horizon_cap = 1000);

}  // namespace advrl
