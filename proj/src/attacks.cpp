#include "advrl/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace advrl {

namespace {

constexpr double kGradientFloor = 1e-15;
constexpr double kLogFloor = 1e-300;

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

int argmax_lowest(const std::vector<double>& row) {
  int arg = 0;
  for (std::size_t a = 1; a < row.size(); ++a) {
    if (row[a] > row[arg] + 1e-12) arg = static_cast<int>(a);
  }
  return arg;
}

int argmin_lowest(const std::vector<double>& row) {
  int arg = 0;
  for (std::size_t a = 1; a < row.size(); ++a) {
    if (row[a] < row[arg] - 1e-12) arg = static_cast<int>(a);
  }
  return arg;
}

}  // namespace

double row_divergence(MadFlavor flavor, const std::vector<double>& clean,
                      const std::vector<double>& candidate) {
  switch (flavor) {
    case MadFlavor::kl_forward: {
      double d = 0.0;
      for (std::size_t a = 0; a < clean.size(); ++a) {
        if (clean[a] > 0.0) {
          d += clean[a] * (safe_log(clean[a]) - safe_log(candidate[a]));
        }
      }
      return d;
    }
    case MadFlavor::kl_reverse: {
      double d = 0.0;
      for (std::size_t a = 0; a < clean.size(); ++a) {
        if (candidate[a] > 0.0) {
          d += candidate[a] * (safe_log(candidate[a]) - safe_log(clean[a]));
        }
      }
      return d;
    }
    case MadFlavor::tv: {
      double d = 0.0;
      for (std::size_t a = 0; a < clean.size(); ++a) {
        d += std::abs(clean[a] - candidate[a]);
      }
      return 0.5 * d;
    }
    case MadFlavor::cross_entropy_argmax:
      return -safe_log(candidate[argmax_lowest(clean)]);
  }
  return 0.0;
}

const std::vector<MadFlavor>& discrete_flavor_pool() {
  static const std::vector<MadFlavor> pool = {
      MadFlavor::kl_forward, MadFlavor::kl_reverse, MadFlavor::tv,
      MadFlavor::cross_entropy_argmax};
  return pool;
}

namespace {

/// Ascent objective for the continuous untargeted attack: the divergence
/// terms, built from the pinned loss kinds so the same bundles the gradient
/// checks certify are the ones the attack uses.
std::vector<ObjectiveTerm> mad_objective(const Policy& victim,
                                         const ObservationEmbedding& embedding,
                                         const std::vector<double>& clean_obs,
                                         MadFlavor flavor,
                                         double entropy_weight) {
  const std::vector<double> clean = act_probs(victim, embedding, clean_obs);
  std::vector<ObjectiveTerm> terms;
  switch (flavor) {
    case MadFlavor::kl_forward:
      // KL(clean || pi_x) = sum_a clean_a * (-log pi_x(a)) - H(clean):
      // per-action neg-log-prob terms weighted by the clean row, constant
      // dropped.
      for (std::size_t a = 0; a < clean.size(); ++a) {
        if (clean[a] <= 0.0) continue;
        ObjectiveTerm t;
        t.loss.kind = LossKind::neg_log_prob_of_action;
        t.loss.target_action = static_cast<int>(a);
        t.weight = clean[a];
        terms.push_back(std::move(t));
      }
      break;
    case MadFlavor::kl_reverse: {
      ObjectiveTerm t;
      t.loss.kind = LossKind::kl_to_target;
      t.loss.target_dist = clean;
      t.weight = 1.0;
      terms.push_back(std::move(t));
      break;
    }
    case MadFlavor::tv:
      throw std::invalid_argument(
          "total variation has no smooth gradient; use it with discrete "
          "budgets");
    case MadFlavor::cross_entropy_argmax: {
      ObjectiveTerm t;
      t.loss.kind = LossKind::neg_log_prob_of_action;
      t.loss.target_action = argmax_lowest(clean);
      t.weight = 1.0;
      terms.push_back(std::move(t));
      break;
    }
  }
  if (entropy_weight != 0.0) {
    ObjectiveTerm t;
    t.loss.kind = LossKind::entropy;
    t.weight = entropy_weight;
    terms.push_back(std::move(t));
  }
  return terms;
}

double objective_value(const Policy& victim, const std::vector<double>& obs,
                       const std::vector<ObjectiveTerm>& objective,
                       std::vector<double>* grad) {
  double value = 0.0;
  if (grad) grad->assign(obs.size(), 0.0);
  for (const ObjectiveTerm& term : objective) {
    const GradientBundle g = input_gradient(victim, obs, term.loss);
    value += term.weight * g.loss;
    if (grad) {
      for (std::size_t i = 0; i < obs.size(); ++i) {
        (*grad)[i] += term.weight * g.input_grad[i];
      }
    }
  }
  return value;
}

}  // namespace

std::string attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::identity: return "identity";
    case AttackKind::random: return "random";
    case AttackKind::mad: return "mad";
    case AttackKind::strategic: return "strategic";
    case AttackKind::critic: return "critic";
    case AttackKind::two_stage_fgsm: return "two_stage_fgsm";
    case AttackKind::two_stage: return "two_stage";
  }
  return "identity";
}

AttackKind attack_kind_from_name(const std::string& name) {
  if (name == "identity") return AttackKind::identity;
  if (name == "random") return AttackKind::random;
  if (name == "mad") return AttackKind::mad;
  if (name == "strategic") return AttackKind::strategic;
  if (name == "critic") return AttackKind::critic;
  if (name == "two_stage_fgsm") return AttackKind::two_stage_fgsm;
  if (name == "two_stage") return AttackKind::two_stage;
  throw std::invalid_argument("unknown attack kind: " + name);
}

std::string mad_flavor_name(MadFlavor flavor) {
  switch (flavor) {
    case MadFlavor::kl_forward: return "kl_forward";
    case MadFlavor::kl_reverse: return "kl_reverse";
    case MadFlavor::tv: return "tv";
    case MadFlavor::cross_entropy_argmax: return "cross_entropy_argmax";
  }
  return "kl_forward";
}

OptimizeResult maximize_objective(const Policy& victim,
                                  const std::vector<double>& clean_obs,
                                  const PerturbationBudget& budget,
                                  const OptimizerConfig& opt,
                                  const std::vector<ObjectiveTerm>& objective) {
  if (budget.discrete) {
    throw std::invalid_argument(
        "maximize_objective needs a continuous budget");
  }
  const double step =
      opt.step_size > 0.0 ? opt.step_size : budget.epsilon;
  const int iterations = opt.method == AttackMethod::fgsm ? 1 : opt.iterations;
  const double dim_scale = std::sqrt(static_cast<double>(clean_obs.size()));

  OptimizeResult best;
  best.obs = clean_obs;
  best.objective = objective_value(victim, clean_obs, objective, nullptr);
  best.best_iterate = 0;

  std::vector<double> x = clean_obs;
  std::vector<double> grad;
  for (int it = 1; it <= iterations; ++it) {
    objective_value(victim, x, objective, &grad);
    double norm = 0.0;
    for (const double g : grad) norm += g * g;
    norm = std::sqrt(norm);
    if (norm < kGradientFloor) break;
    // Harmonic decay: the first iterate takes the full step (so a PGD run
    // visits the FGSM point), later iterates refine.
    const double step_t = step / it;
    if (budget.norm == Norm::linf) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] += step_t * (grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0));
      }
    } else {
      const double scale = step_t * dim_scale / norm;
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += scale * grad[i];
    }
    x = project_to_budget(clean_obs, std::move(x), budget);
    const double value = objective_value(victim, x, objective, nullptr);
    if (!opt.best_iterate_tracking || value > best.objective) {
      best.objective = value;
      best.obs = x;
      best.best_iterate = it;
    }
  }
  return best;
}

OptimizeResult mad_attack_step(const Policy& victim,
                               const ObservationEmbedding& embedding,
                               const std::vector<double>& clean_obs,
                               const PerturbationBudget& budget,
                               const OptimizerConfig& opt, MadFlavor flavor) {
  return maximize_objective(
      victim, clean_obs, budget, opt,
      mad_objective(victim, embedding, clean_obs, flavor,
                    opt.entropy_weight));
}

bool strategic_should_attack(const StrategicTimer& timer,
                             const std::vector<double>& clean_probs) {
  switch (timer.rule) {
    case TimingRule::always: return true;
    case TimingRule::never: return false;
    case TimingRule::preference_gap: {
      const auto [lo, hi] =
          std::minmax_element(clean_probs.begin(), clean_probs.end());
      return *hi - *lo > timer.threshold;
    }
  }
  return true;
}

OptimizeResult critic_attack_step(const Policy& victim,
                                  const ObservationEmbedding& embedding,
                                  const std::vector<double>& clean_obs,
                                  const std::vector<double>& q_row,
                                  const PerturbationBudget& budget,
                                  const OptimizerConfig& opt) {
  (void)embedding;
  // Steer toward the lowest-value action: maximize log pi(worst | obs),
  // i.e. ascend -neg_log_prob.
  ObjectiveTerm t;
  t.loss.kind = LossKind::neg_log_prob_of_action;
  t.loss.target_action = argmin_lowest(q_row);
  t.weight = -1.0;
  return maximize_objective(victim, clean_obs, budget, opt, {t});
}

OptimizeResult two_stage_attack_step(const Policy& victim,
                                     const ObservationEmbedding& embedding,
                                     const std::vector<double>& clean_obs,
                                     const std::vector<double>& target_probs,
                                     const PerturbationBudget& budget,
                                     const OptimizerConfig& opt) {
  (void)embedding;
  // Descend KL(perturbed || target) + entropy_weight * H(perturbed): the
  // maximizer gets both terms negated. A positive entropy weight biases the
  // optimum past exact imitation toward rows even more peaked than the
  // target, which only helps a reward-minimizing target.
  std::vector<ObjectiveTerm> terms;
  ObjectiveTerm kl;
  kl.loss.kind = LossKind::kl_to_target;
  kl.loss.target_dist = target_probs;
  kl.weight = -1.0;
  terms.push_back(std::move(kl));
  if (opt.entropy_weight != 0.0) {
    ObjectiveTerm ent;
    ent.loss.kind = LossKind::entropy;
    ent.weight = -opt.entropy_weight;
    terms.push_back(std::move(ent));
  }
  return maximize_objective(victim, clean_obs, budget, opt, terms);
}

std::vector<double> random_attack_step(const ObservationEmbedding& embedding,
                                       int state,
                                       const std::vector<double>& clean_obs,
                                       const PerturbationBudget& budget,
                                       Rng& rng) {
  if (budget.discrete) {
    const auto& nbrs = budget.neighbors.at(state);
    const int pick = nbrs[rng.uniform_int(static_cast<int>(nbrs.size()))];
    return embedding.encode(pick);
  }
  std::vector<double> x = clean_obs;
  if (budget.norm == Norm::linf) {
    for (double& v : x) v += rng.uniform(-budget.epsilon, budget.epsilon);
  } else {
    // Uniform in the l2 ball: normal direction, radius ~ u^(1/dim).
    std::vector<double> dir(x.size(), 0.0);
    double norm = 0.0;
    for (double& d : dir) {
      d = rng.normal();
      norm += d * d;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      const double radius =
          budget.epsilon *
          std::pow(rng.uniform01(), 1.0 / static_cast<double>(x.size()));
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] += radius * dir[i] / norm;
      }
    }
  }
  return project_to_budget(clean_obs, std::move(x), budget);
}

namespace {

/// Discrete budgets: pick the neighbor whose clean row maximizes `score`,
/// ties to the lowest state index.
template <typename Score>
int best_neighbor(const std::vector<int>& nbrs, Score&& score) {
  int best = nbrs.front();
  double best_value = score(nbrs.front());
  for (std::size_t i = 1; i < nbrs.size(); ++i) {
    const double value = score(nbrs[i]);
    if (value > best_value + 1e-12) {
      best = nbrs[i];
      best_value = value;
    }
  }
  return best;
}

std::vector<double> perturb_discrete(const Attacker& attacker, int state,
                                     const std::vector<double>& clean_obs,
                                     Rng& rng) {
  const auto& nbrs = attacker.budget.neighbors.at(state);
  const ObservationEmbedding& emb = *attacker.embedding;
  const Policy& victim = *attacker.victim;
  const std::vector<double> clean = act_probs(victim, emb, clean_obs);
  switch (attacker.kind) {
    case AttackKind::identity:
      return clean_obs;
    case AttackKind::random:
      return random_attack_step(emb, state, clean_obs, attacker.budget, rng);
    case AttackKind::strategic:
      if (!strategic_should_attack(attacker.timer, clean)) return clean_obs;
      [[fallthrough]];
    case AttackKind::mad: {
      const int pick = best_neighbor(nbrs, [&](int t) {
        return row_divergence(attacker.flavor, clean,
                              act_probs_state(victim, emb, t));
      });
      return emb.encode(pick);
    }
    case AttackKind::critic: {
      if (!attacker.q_table) {
        throw std::invalid_argument("critic attack needs a q_table");
      }
      const int worst = argmin_lowest(attacker.q_table->at(state));
      const int pick = best_neighbor(nbrs, [&](int t) {
        return act_probs_state(victim, emb, t)[worst];
      });
      return emb.encode(pick);
    }
    case AttackKind::two_stage_fgsm:
    case AttackKind::two_stage: {
      if (!attacker.target) {
        throw std::invalid_argument("two-stage attack needs a target policy");
      }
      const std::vector<double> target =
          act_probs_state(*attacker.target, emb, state);
      const int pick = best_neighbor(nbrs, [&](int t) {
        // Minimize KL(candidate row || deceptive row).
        return -row_divergence(MadFlavor::kl_forward,
                               act_probs_state(victim, emb, t), target);
      });
      return emb.encode(pick);
    }
  }
  return clean_obs;
}

}  // namespace

std::vector<double> perturb(const Attacker& attacker, int state,
                            const std::vector<double>& clean_obs, Rng& rng) {
  if (!attacker.victim || !attacker.embedding) {
    throw std::invalid_argument("attacker needs a victim and an embedding");
  }
  if (attacker.budget.discrete) {
    return perturb_discrete(attacker, state, clean_obs, rng);
  }
  const ObservationEmbedding& emb = *attacker.embedding;
  const Policy& victim = *attacker.victim;
  switch (attacker.kind) {
    case AttackKind::identity:
      return clean_obs;
    case AttackKind::random:
      return random_attack_step(emb, state, clean_obs, attacker.budget, rng);
    case AttackKind::strategic: {
      const std::vector<double> clean = act_probs(victim, emb, clean_obs);
      if (!strategic_should_attack(attacker.timer, clean)) return clean_obs;
      return mad_attack_step(victim, emb, clean_obs, attacker.budget,
                             attacker.opt, attacker.flavor)
          .obs;
    }
    case AttackKind::mad:
      return mad_attack_step(victim, emb, clean_obs, attacker.budget,
                             attacker.opt, attacker.flavor)
          .obs;
    case AttackKind::critic: {
      if (!attacker.q_table) {
        throw std::invalid_argument("critic attack needs a q_table");
      }
      return critic_attack_step(victim, emb, clean_obs,
                                attacker.q_table->at(state), attacker.budget,
                                attacker.opt)
          .obs;
    }
    case AttackKind::two_stage_fgsm:
    case AttackKind::two_stage: {
      if (!attacker.target) {
        throw std::invalid_argument("two-stage attack needs a target policy");
      }
      OptimizerConfig opt = attacker.opt;
      if (attacker.kind == AttackKind::two_stage_fgsm) {
        opt.method = AttackMethod::fgsm;
      }
      return two_stage_attack_step(
                 victim, emb, clean_obs,
                 act_probs_state(*attacker.target, emb, state),
                 attacker.budget, opt)
          .obs;
    }
  }
  return clean_obs;
}

PolicyRows induced_tabular_policy(const Attacker& attacker, int num_states,
                                  std::uint64_t seed) {
  if (!attacker.victim || !attacker.embedding) {
    throw std::invalid_argument("attacker needs a victim and an embedding");
  }
  Rng rng(seed);
  PolicyRows rows(num_states);
  for (int s = 0; s < num_states; ++s) {
    const std::vector<double> clean = attacker.embedding->encode(s);
    const std::vector<double> adv = perturb(attacker, s, clean, rng);
    rows[s] = act_probs(*attacker.victim, *attacker.embedding, adv);
  }
  return rows;
}

}  // namespace advrl
