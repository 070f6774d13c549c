#include "advrl/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace advrl {

std::string embedding_kind_name(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::one_hot: return "one_hot";
    case EmbeddingKind::coordinate: return "coordinate";
    case EmbeddingKind::coordinate_plus_noise_channel:
      return "coordinate_plus_noise_channel";
  }
  return "coordinate";
}

EmbeddingKind embedding_kind_from_name(const std::string& name) {
  if (name == "one_hot") return EmbeddingKind::one_hot;
  if (name == "coordinate") return EmbeddingKind::coordinate;
  if (name == "coordinate_plus_noise_channel") {
    return EmbeddingKind::coordinate_plus_noise_channel;
  }
  throw std::invalid_argument("unknown embedding kind: " + name);
}

int ObservationEmbedding::dim() const {
  switch (kind) {
    case EmbeddingKind::one_hot: return num_states();
    case EmbeddingKind::coordinate: return 2;
    case EmbeddingKind::coordinate_plus_noise_channel: return 3;
  }
  return 2;
}

std::vector<double> ObservationEmbedding::encode(int state) const {
  if (state < 0 || state >= num_states()) {
    throw std::invalid_argument("encode: state " + std::to_string(state) +
                                " out of range");
  }
  const auto [x, y] = state_cells[state];
  switch (kind) {
    case EmbeddingKind::one_hot: {
      std::vector<double> v(num_states(), 0.0);
      v[state] = 1.0;
      return v;
    }
    case EmbeddingKind::coordinate:
      return {(x + 0.5) / width, (y + 0.5) / height};
    case EmbeddingKind::coordinate_plus_noise_channel:
      return {(x + 0.5) / width, (y + 0.5) / height, 0.5};
  }
  return {};
}

int ObservationEmbedding::decode_nearest(const std::vector<double>& obs) const {
  if (static_cast<int>(obs.size()) != dim()) {
    throw std::invalid_argument("decode_nearest: observation has dimension " +
                                std::to_string(obs.size()) + ", expected " +
                                std::to_string(dim()));
  }
  int best = 0;
  double best_d2 = 1e300;
  for (int s = 0; s < num_states(); ++s) {
    const std::vector<double> e = encode(s);
    double d2 = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double d = obs[i] - e[i];
      d2 += d * d;
    }
    if (d2 < best_d2 - 1e-15) {
      best_d2 = d2;
      best = s;
    }
  }
  return best;
}

ObservationEmbedding make_embedding(EmbeddingKind kind,
                                    const Gridworld& world) {
  ObservationEmbedding e;
  e.kind = kind;
  e.width = world.width;
  e.height = world.height;
  e.state_cells = world.state_cells;
  return e;
}

std::string norm_name(Norm norm) {
  return norm == Norm::l2 ? "l2" : "linf";
}

Norm norm_from_name(const std::string& name) {
  if (name == "l2") return Norm::l2;
  if (name == "linf") return Norm::linf;
  throw std::invalid_argument("unknown norm: " + name + " (want l2 or linf)");
}

PerturbationBudget continuous_budget(double epsilon, Norm norm) {
  if (epsilon < 0.0) throw std::invalid_argument("epsilon must be >= 0");
  PerturbationBudget b;
  b.epsilon = epsilon;
  b.norm = norm;
  b.discrete = false;
  return b;
}

PerturbationBudget discrete_budget_from_radius(
    const ObservationEmbedding& embedding, double epsilon, Norm norm) {
  if (epsilon < 0.0) throw std::invalid_argument("epsilon must be >= 0");
  PerturbationBudget b;
  b.epsilon = epsilon;
  b.norm = norm;
  b.discrete = true;
  const int n = embedding.num_states();
  b.neighbors.assign(n, {});
  for (int s = 0; s < n; ++s) {
    const std::vector<double> es = embedding.encode(s);
    for (int t = 0; t < n; ++t) {
      const std::vector<double> et = embedding.encode(t);
      double dist = 0.0;
      if (norm == Norm::linf) {
        for (std::size_t i = 0; i < es.size(); ++i) {
          dist = std::max(dist, std::abs(es[i] - et[i]));
        }
      } else {
        for (std::size_t i = 0; i < es.size(); ++i) {
          const double d = es[i] - et[i];
          dist += d * d;
        }
        dist = std::sqrt(dist);
      }
      if (dist <= epsilon) b.neighbors[s].push_back(t);
    }
  }
  return b;
}

std::vector<double> project_to_budget(const std::vector<double>& center,
                                      std::vector<double> obs,
                                      const PerturbationBudget& budget) {
  if (budget.discrete) {
    throw std::invalid_argument(
        "project_to_budget applies to continuous budgets only");
  }
  if (center.size() != obs.size()) {
    throw std::invalid_argument("project_to_budget: dimension mismatch");
  }
  if (budget.norm == Norm::linf) {
    for (std::size_t i = 0; i < obs.size(); ++i) {
      obs[i] = std::clamp(obs[i], center[i] - budget.epsilon,
                          center[i] + budget.epsilon);
    }
  } else {
    double d2 = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const double d = obs[i] - center[i];
      d2 += d * d;
    }
    const double dist = std::sqrt(d2);
    if (dist > budget.epsilon && dist > 0.0) {
      const double scale = budget.epsilon / dist;
      for (std::size_t i = 0; i < obs.size(); ++i) {
        obs[i] = center[i] + (obs[i] - center[i]) * scale;
      }
    }
  }
  for (double& v : obs) v = std::clamp(v, 0.0, 1.0);
  return obs;
}

}  // namespace advrl
