#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advrl/embedding.hpp"
#include "advrl/mdp.hpp"
#include "advrl/policy.hpp"

namespace advrl {

enum class TrainAlgo { q_learning, actor_critic, policy_gradient };

std::string train_algo_name(TrainAlgo algo);
TrainAlgo train_algo_from_name(const std::string& name);

/// Tabular trainer settings. All trainers are deterministic given the seed:
/// identical configs produce identical policies on every platform.
struct TrainConfig {
  TrainAlgo algo = TrainAlgo::q_learning;
  int episodes = 4000;
  int horizon_cap = 200;
  double lr = 0.2;               // q step size / policy logit step size
  double critic_lr = 0.1;        // actor_critic value step size
  double epsilon_explore = 0.2;  // q_learning epsilon-greedy
  double greedy_margin = 6.0;    // logit margin of the extracted policy
  std::uint64_t seed = 0;
};

struct TrainResult {
  Policy policy;  // tabular_softmax
  double exact_return = 0.0;
  std::vector<double> episode_returns;
};

/// Trains a tabular policy on the MDP. q_learning extracts the greedy policy
/// as tabular softmax with logit margin greedy_margin; the policy-based
/// trainers return their learned logits directly. exact_return is computed
/// by exact evaluation, not by rollout averaging.
TrainResult train_policy(const MdpSpec& mdp, const TrainConfig& config);

struct DeceptiveConfig {
  TrainConfig base;
  int ensemble_size = 5;  // odd, so the median is a member
};

struct DeceptiveResult {
  Policy selected;
  int selected_index = 0;
  std::vector<double> member_returns;  // exact returns on the original MDP
};

/// Trains ensemble_size policies on the reward-flipped MDP (seeds base.seed,
/// base.seed+1, ...), evaluates each exactly on the original MDP, and
/// selects the member with the median return. The selected policy is the
/// deceptive imitation target: near-minimal return, full action support.
DeceptiveResult train_deceptive(const MdpSpec& mdp,
                                const DeceptiveConfig& config);

struct DistillConfig {
  std::vector<int> hidden = {32, 32};
  double temperature = 1.0;
  int steps = 5000;
  double lr = 0.01;
  std::uint64_t seed = 0;
};

/// Distills a tabular policy into a feedforward net by cross-entropy on the
/// clean encodings of all states (Adam, full-batch). Throws
/// std::runtime_error if the distilled net's argmax disagrees with the
/// teacher's argmax at any state: downstream certificates assume the net
/// reproduces the teacher on clean observations.
Policy distill_feedforward(const Policy& teacher,
                           const ObservationEmbedding& embedding,
                           const DistillConfig& config);

}  // namespace advrl
