#pragma once

#include <string>
#include <utility>
#include <vector>

#include "advrl/gridworld.hpp"

namespace advrl {

/// How a discrete state is presented to a policy network.
///
/// one_hot: dim = num_states, exact indicator.
/// coordinate: dim = 2, cell center ((x+0.5)/W, (y+0.5)/H).
/// coordinate_plus_noise_channel: dim = 3, coordinate plus a constant 0.5
/// channel that carries no information but gives attacks an extra direction.
enum class EmbeddingKind { one_hot, coordinate, coordinate_plus_noise_channel };

std::string embedding_kind_name(EmbeddingKind kind);
EmbeddingKind embedding_kind_from_name(const std::string& name);

/// Injective map from states to points in [0,1]^dim, with nearest-point
/// decoding. Observations, perturbed or not, always live in the [0,1] box.
struct ObservationEmbedding {
  EmbeddingKind kind = EmbeddingKind::coordinate;
  int width = 0;
  int height = 0;
  std::vector<std::pair<int, int>> state_cells;  // state -> (x, y)

  int num_states() const { return static_cast<int>(state_cells.size()); }
  int dim() const;
  std::vector<double> encode(int state) const;
  /// State whose clean encoding is nearest in l2; ties break to the lowest
  /// state index.
  int decode_nearest(const std::vector<double>& obs) const;
};

ObservationEmbedding make_embedding(EmbeddingKind kind, const Gridworld& world);

/// Norm defining the perturbation ball.
enum class Norm { l2, linf };

std::string norm_name(Norm norm);
Norm norm_from_name(const std::string& name);

/// Attack budget: a continuous epsilon-ball around the clean observation
/// (intersected with the [0,1] box), or a discrete neighbor set per state.
struct PerturbationBudget {
  double epsilon = 0.0;
  Norm norm = Norm::linf;
  bool discrete = false;
  /// Discrete mode only: neighbors[s] lists the states whose clean encodings
  /// lie within epsilon of state s's encoding, ascending, always containing
  /// s itself.
  std::vector<std::vector<int>> neighbors;
};

PerturbationBudget continuous_budget(double epsilon, Norm norm);

/// Discrete budget induced by a radius: state s' is a neighbor of s when
/// ||encode(s') - encode(s)|| <= epsilon in the given norm.
PerturbationBudget discrete_budget_from_radius(
    const ObservationEmbedding& embedding, double epsilon, Norm norm);

/// Projects obs onto the epsilon-ball around center (continuous budgets
/// only), then clips to the [0,1] box. Projection first, clip second.
std::vector<double> project_to_budget(const std::vector<double>& center,
                                      std::vector<double> obs,
                                      const PerturbationBudget& budget);

}  // namespace advrl
