#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "advrl/embedding.hpp"
#include "advrl/mdp.hpp"
#include "advrl/rng.hpp"

namespace advrl {

enum class PolicyKind { tabular_softmax, feedforward };

/// Stochastic policy over discrete actions.
///
/// tabular_softmax: one logit row per state; observations are decoded to the
/// nearest state first, so the policy is piecewise constant and has no input
/// gradients.
///
/// feedforward: fully connected net on the raw observation, tanh hidden
/// layers (at most 3, at most 64 units each), linear output logits. params
/// stores, per layer, the weight matrix row-major (out x in) followed by the
/// bias.
///
/// Both kinds turn logits into probabilities with softmax(logits /
/// temperature), temperature > 0.
struct Policy {
  PolicyKind kind = PolicyKind::tabular_softmax;
  double temperature = 1.0;

  // tabular_softmax
  std::vector<std::vector<double>> logits;  // [s][a]

  // feedforward
  std::vector<int> layer_sizes;  // {input, hidden..., num_actions}
  std::vector<double> params;

  int num_actions() const;
  int input_dim() const;
  /// Throws std::invalid_argument with the offending field on shape errors,
  /// nonpositive temperature, or hidden layers beyond the 3x64 limit.
  void validate() const;
};

void to_json(nlohmann::json& j, const Policy& p);
void from_json(const nlohmann::json& j, Policy& p);

/// Structured-text checkpoint ("advrl-policy-v1"). save overwrites; load
/// throws std::runtime_error naming the path and the problem on missing
/// files, malformed JSON, or an unknown format tag.
void save_policy(const std::string& path, const Policy& policy);
Policy load_policy(const std::string& path);

/// Numerically stable softmax(z / temperature).
std::vector<double> softmax(const std::vector<double>& logits,
                            double temperature);

/// Logits at an observation: tabular policies decode to the nearest state,
/// feedforward policies run the net.
std::vector<double> policy_logits(const Policy& policy,
                                  const ObservationEmbedding& embedding,
                                  const std::vector<double>& obs);

/// Action distribution at an observation.
std::vector<double> act_probs(const Policy& policy,
                              const ObservationEmbedding& embedding,
                              const std::vector<double>& obs);

/// Action distribution at a state's clean encoding.
std::vector<double> act_probs_state(const Policy& policy,
                                    const ObservationEmbedding& embedding,
                                    int state);

/// Full tabular rendering of the policy on clean encodings, one row per
/// state. This is what exact evaluation consumes.
PolicyRows policy_rows(const Policy& policy,
                       const ObservationEmbedding& embedding, int num_states);

/// Differentiable scalar objectives of the action distribution.
///
/// kl_to_target: KL(pi(.|obs) || target_dist).
/// neg_log_prob_of_action: -log pi(target_action | obs).
/// entropy: H(pi(.|obs)).
enum class LossKind { kl_to_target, neg_log_prob_of_action, entropy };

struct LossSpec {
  LossKind kind = LossKind::entropy;
  std::vector<double> target_dist;  // kl_to_target only
  int target_action = -1;           // neg_log_prob_of_action only
};

/// Loss value with its gradients. param_grad is filled only when requested
/// and only for feedforward policies.
struct GradientBundle {
  double loss = 0.0;
  std::vector<double> input_grad;
  std::vector<double> param_grad;
};

/// Loss and exact reverse-mode gradients at an observation. Tabular policies
/// have no input gradients: throws std::invalid_argument telling the caller
/// to use a feedforward policy or a discrete budget.
GradientBundle input_gradient(const Policy& policy,
                              const std::vector<double>& obs,
                              const LossSpec& loss,
                              bool want_param_grad = false);

/// Tabular softmax emitting the given action per state with the given logit
/// margin (chosen action gets `margin`, the rest 0). Margin 800 makes the
/// softmax an exact one-hot in double precision; margin 6 keeps full support
/// for divergence targets.
Policy make_tabular_from_actions(const std::vector<int>& actions,
                                 int num_actions, double margin);

/// Fresh feedforward policy with seeded scaled-normal initialization.
Policy make_feedforward(int input_dim, const std::vector<int>& hidden,
                        int num_actions, double temperature, Rng& rng);

}  // namespace advrl
