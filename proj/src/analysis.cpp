#include "advrl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace advrl {

namespace {

constexpr double kRowMatchTol = 1e-9;
constexpr double kBoundSlack = 1e-8;
constexpr double kTvSlack = 1e-10;
constexpr double kLogFloor = 1e-300;

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

/// Canonical key of a row under 1e-9 quantization, for dedup and matching.
std::string row_key(const std::vector<double>& row) {
  std::string key;
  char buf[32];
  for (const double v : row) {
    std::snprintf(buf, sizeof(buf), "%.0f;", v / kRowMatchTol);
    key += buf;
  }
  return key;
}

/// Per-flavor divert map on a discrete budget: phi[s] is the neighbor whose
/// victim row maximizes the divergence from s's row, ties to the lowest
/// state index.
std::vector<int> divert_map(const PolicyRows& victim,
                            const PerturbationBudget& budget,
                            MadFlavor flavor) {
  const int n = static_cast<int>(victim.size());
  std::vector<int> phi(n, 0);
  for (int s = 0; s < n; ++s) {
    const auto& nbrs = budget.neighbors.at(s);
    int best = nbrs.front();
    double best_value = row_divergence(flavor, victim[s], victim[best]);
    for (std::size_t i = 1; i < nbrs.size(); ++i) {
      const double value =
          row_divergence(flavor, victim[s], victim[nbrs[i]]);
      if (value > best_value + 1e-12) {
        best = nbrs[i];
        best_value = value;
      }
    }
    phi[s] = best;
  }
  return phi;
}

void require_discrete(const PerturbationBudget& budget) {
  if (!budget.discrete) {
    throw std::invalid_argument(
        "policy-set enumeration needs a discrete budget");
  }
}

/// Appends `source`'s row to the state's option list unless an identical
/// row (within 1e-9) is already present.
void add_option(ProductPolicySet& set, int state,
                const std::vector<double>& row, int source) {
  for (const auto& existing : set.options[state]) {
    bool same = true;
    for (std::size_t a = 0; a < row.size(); ++a) {
      if (std::abs(existing[a] - row[a]) > kRowMatchTol) {
        same = false;
        break;
      }
    }
    if (same) return;
  }
  set.options[state].push_back(row);
  set.option_sources[state].push_back(source);
}

ProductPolicySet product_from_sources(
    const PolicyRows& victim, const std::vector<std::vector<int>>& sources) {
  const int n = static_cast<int>(victim.size());
  ProductPolicySet set;
  set.options.assign(n, {});
  set.option_sources.assign(n, {});
  for (int s = 0; s < n; ++s) {
    for (const int src : sources[s]) add_option(set, s, victim[src], src);
  }
  return set;
}

double product_cardinality(const ProductPolicySet& set) {
  double count = 1.0;
  for (const auto& opts : set.options) {
    count *= static_cast<double>(opts.size());
  }
  return count;
}

void fill_worst(PolicySetCertificate& cert, const MdpSpec& mdp) {
  bool first = true;
  for (const ProductPolicySet& component : cert.components) {
    const WorstCaseResult w = worst_case_over_product(component, mdp);
    if (first || w.worst_return < cert.worst_return) {
      cert.worst_return = w.worst_return;
      cert.worst_rows = w.rows;
      cert.worst_sources = w.sources;
      first = false;
    }
    cert.member_count += product_cardinality(component);
  }
}

}  // namespace

std::string adversary_space_name(AdversarySpace space) {
  switch (space) {
    case AdversarySpace::full_untargeted: return "full_untargeted";
    case AdversarySpace::strategic_untargeted: return "strategic_untargeted";
    case AdversarySpace::targeted: return "targeted";
    case AdversarySpace::unrestricted: return "unrestricted";
  }
  return "unrestricted";
}

PolicySetCertificate enumerate_policy_set(AdversarySpace space,
                                          const PolicyRows& victim,
                                          const PerturbationBudget& budget,
                                          const MdpSpec& mdp) {
  require_discrete(budget);
  const int n = static_cast<int>(victim.size());
  if (n != mdp.num_states) {
    throw std::invalid_argument("victim rows disagree with the MDP");
  }
  PolicySetCertificate cert;
  cert.space = space;

  switch (space) {
    case AdversarySpace::full_untargeted: {
      // One explicit policy per flavor, deduplicated across flavors.
      std::map<std::string, bool> seen;
      for (const MadFlavor flavor : discrete_flavor_pool()) {
        const std::vector<int> phi = divert_map(victim, budget, flavor);
        std::vector<std::vector<int>> sources(n);
        std::string key;
        for (int s = 0; s < n; ++s) {
          sources[s] = {phi[s]};
          key += row_key(victim[phi[s]]);
        }
        if (seen.count(key)) continue;
        seen[key] = true;
        cert.components.push_back(product_from_sources(victim, sources));
      }
      break;
    }
    case AdversarySpace::strategic_untargeted: {
      // One product set per flavor map: per state, attack with the map's
      // divert row or leave the state alone.
      for (const MadFlavor flavor : discrete_flavor_pool()) {
        const std::vector<int> phi = divert_map(victim, budget, flavor);
        std::vector<std::vector<int>> sources(n);
        for (int s = 0; s < n; ++s) sources[s] = {s, phi[s]};
        cert.components.push_back(product_from_sources(victim, sources));
      }
      break;
    }
    case AdversarySpace::targeted:
    case AdversarySpace::unrestricted: {
      // With every deceptive target admitted, targeted steering realizes any
      // neighbor row, so both spaces are the full product.
      std::vector<std::vector<int>> sources(n);
      for (int s = 0; s < n; ++s) sources[s] = budget.neighbors.at(s);
      cert.components.push_back(product_from_sources(victim, sources));
      break;
    }
  }
  fill_worst(cert, mdp);
  return cert;
}

WorstCaseResult worst_case_over_product(const ProductPolicySet& set,
                                        const MdpSpec& mdp) {
  const int n = mdp.num_states;
  if (static_cast<int>(set.options.size()) != n) {
    throw std::invalid_argument("product set disagrees with the MDP");
  }
  for (int s = 0; s < n; ++s) {
    if (set.options[s].empty()) {
      throw std::invalid_argument("state " + std::to_string(s) +
                                  " has no options");
    }
  }
  // Policy iteration on the adversary's per-state selection; switches only
  // on strict improvement, so it terminates.
  std::vector<int> pick(n, 0);
  PolicyRows rows(n);
  EvaluationReport report;
  for (int round = 0; round < 10000; ++round) {
    for (int s = 0; s < n; ++s) rows[s] = set.options[s][pick[s]];
    report = evaluate_policy(mdp, rows);
    bool changed = false;
    for (int s = 0; s < n; ++s) {
      double current = 0.0;
      for (int a = 0; a < mdp.num_actions; ++a) {
        current += set.options[s][pick[s]][a] * report.q[s][a];
      }
      int best_k = pick[s];
      double best_value = current;
      for (std::size_t k = 0; k < set.options[s].size(); ++k) {
        double value = 0.0;
        for (int a = 0; a < mdp.num_actions; ++a) {
          value += set.options[s][k][a] * report.q[s][a];
        }
        if (value < best_value - 1e-12) {
          best_value = value;
          best_k = static_cast<int>(k);
        }
      }
      if (best_k != pick[s]) {
        pick[s] = best_k;
        changed = true;
      }
    }
    if (!changed) break;
  }
  WorstCaseResult out;
  out.worst_return = report.return_value;
  out.v = report.v;
  out.rows = rows;
  out.sources.assign(n, -1);
  for (int s = 0; s < n; ++s) {
    out.sources[s] = set.option_sources.empty() || set.option_sources[s].empty()
                         ? -1
                         : set.option_sources[s][pick[s]];
  }
  return out;
}

InclusionReport check_inclusion(const PolicySetCertificate& inner,
                                const PolicySetCertificate& outer) {
  InclusionReport report;
  for (std::size_t ci = 0; ci < inner.components.size(); ++ci) {
    const ProductPolicySet& a = inner.components[ci];
    bool contained_somewhere = false;
    for (const ProductPolicySet& b : outer.components) {
      bool contained = true;
      for (std::size_t s = 0; s < a.options.size() && contained; ++s) {
        for (const auto& row : a.options[s]) {
          const std::string key = row_key(row);
          bool found = false;
          for (const auto& other : b.options[s]) {
            if (row_key(other) == key) {
              found = true;
              break;
            }
          }
          if (!found) {
            contained = false;
            break;
          }
        }
      }
      if (contained) {
        contained_somewhere = true;
        break;
      }
    }
    if (!contained_somewhere) {
      // Recompute against the last component for a concrete witness.
      report.included = false;
      report.failing_component = static_cast<int>(ci);
      for (std::size_t s = 0; s < a.options.size(); ++s) {
        for (std::size_t k = 0; k < a.options[s].size(); ++k) {
          bool found = false;
          for (const ProductPolicySet& b : outer.components) {
            for (const auto& other : b.options[s]) {
              if (row_key(other) == row_key(a.options[s][k])) {
                found = true;
                break;
              }
            }
            if (found) break;
          }
          if (!found) {
            report.failing_state = static_cast<int>(s);
            report.failing_option = static_cast<int>(k);
            return report;
          }
        }
      }
      return report;
    }
  }
  return report;
}

InclusionChainReport verify_inclusion_chain(const PolicyRows& victim,
                                            const PerturbationBudget& budget,
                                            const MdpSpec& mdp) {
  InclusionChainReport chain;
  chain.full_untargeted = enumerate_policy_set(AdversarySpace::full_untargeted,
                                               victim, budget, mdp);
  chain.strategic_untargeted = enumerate_policy_set(
      AdversarySpace::strategic_untargeted, victim, budget, mdp);
  chain.targeted =
      enumerate_policy_set(AdversarySpace::targeted, victim, budget, mdp);
  chain.optimal_adversary_return =
      optimal_adversary(victim, budget, mdp).worst_return;

  chain.inclusions_hold =
      check_inclusion(chain.full_untargeted, chain.strategic_untargeted)
          .included &&
      check_inclusion(chain.strategic_untargeted, chain.targeted).included;
  chain.worst_returns_monotone =
      chain.full_untargeted.worst_return >=
          chain.strategic_untargeted.worst_return - kRowMatchTol &&
      chain.strategic_untargeted.worst_return >=
          chain.targeted.worst_return - kRowMatchTol &&
      chain.targeted.worst_return >=
          chain.optimal_adversary_return - kRowMatchTol;
  return chain;
}

WorstCaseResult optimal_adversary(const PolicyRows& victim,
                                  const PerturbationBudget& budget,
                                  const MdpSpec& mdp) {
  require_discrete(budget);
  const int n = static_cast<int>(victim.size());
  std::vector<std::vector<int>> sources(n);
  for (int s = 0; s < n; ++s) sources[s] = budget.neighbors.at(s);
  return worst_case_over_product(product_from_sources(victim, sources), mdp);
}

namespace {

/// Exact optimal return via policy iteration with linear-solve evaluation.
double optimal_return(const MdpSpec& mdp) {
  const int n = mdp.num_states;
  const int na = mdp.num_actions;
  std::vector<int> pick(n, 0);
  PolicyRows rows(n, std::vector<double>(na, 0.0));
  EvaluationReport report;
  for (int round = 0; round < 10000; ++round) {
    for (int s = 0; s < n; ++s) {
      for (int a = 0; a < na; ++a) rows[s][a] = a == pick[s] ? 1.0 : 0.0;
    }
    report = evaluate_policy(mdp, rows);
    bool changed = false;
    for (int s = 0; s < n; ++s) {
      int best = pick[s];
      double best_value = report.q[s][pick[s]];
      for (int a = 0; a < na; ++a) {
        if (report.q[s][a] > best_value + 1e-12) {
          best_value = report.q[s][a];
          best = a;
        }
      }
      if (best != pick[s]) {
        pick[s] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return report.return_value;
}

}  // namespace

double max_return(const MdpSpec& mdp) { return optimal_return(mdp); }

double min_return(const MdpSpec& mdp) {
  return -optimal_return(flip_rewards(mdp));
}

BoundReport compute_bound_report(const MdpSpec& mdp,
                                 const PolicyRows& attacked,
                                 const PolicyRows& reference,
                                 const PolicyRows& expert, double return_min) {
  const int n = mdp.num_states;
  const int na = mdp.num_actions;
  const EvaluationReport ref = evaluate_policy(mdp, reference);
  const EvaluationReport att = evaluate_policy(mdp, attacked);
  const EvaluationReport expert_eval = evaluate_policy(mdp, expert);

  BoundReport r;
  r.return_attacked = att.return_value;
  r.return_reference = ref.return_value;
  r.return_expert = expert_eval.return_value;
  r.return_min = return_min;
  r.alpha_hat = ref.return_value - return_min;
  r.alpha_e = expert_eval.return_value - ref.return_value;

  double tv_expected = 0.0;
  for (int s = 0; s < n; ++s) {
    double kl = 0.0;
    double tv = 0.0;
    double adv = 0.0;
    for (int a = 0; a < na; ++a) {
      const double p = attacked[s][a];
      const double q = reference[s][a];
      if (p > 0.0) kl += p * (safe_log(p) - safe_log(q));
      tv += std::abs(p - q);
      adv += p * ref.adv[s][a];
      const double ratio_dev = q > 0.0 ? std::abs(p / q - 1.0) : 1e300;
      r.beta1 = std::max(r.beta1, ratio_dev);
    }
    r.beta0 = std::max(r.beta0, kl);
    r.c_adv = std::max(r.c_adv, std::abs(adv));
    tv_expected += ref.occupancy[s] * 0.5 * tv;
  }

  const double g = mdp.gamma;
  r.bound_rhs = r.alpha_hat + r.c_adv * r.beta1 / (1.0 - g) +
                2.0 * g * r.c_adv * std::sqrt(r.beta0 / 2.0) /
                    ((1.0 - g) * (1.0 - g)) +
                ref.return_value;
  r.bound_holds = att.return_value <= r.bound_rhs + kBoundSlack;

  r.tv_expected = tv_expected;
  r.tv_bound = std::sqrt(r.beta0 / 2.0);
  r.tv_holds = tv_expected <= r.tv_bound + kTvSlack;

  const double c = r.c_adv;
  if (c > 1e-12) {
    const double disc = 2.0 * g * g * c * c +
                        4.0 * (r.alpha_e - r.alpha_hat) * std::pow(1.0 - g, 3);
    if (disc >= 0.0) {
      r.threshold_applicable = true;
      r.beta1_threshold = (-std::sqrt(2.0) * g * c + std::sqrt(disc)) /
                          (2.0 * (1.0 - g) * c);
    }
  }
  r.threshold_consistent =
      !(r.threshold_applicable && r.beta1 < r.beta1_threshold &&
        att.return_value > expert_eval.return_value + kBoundSlack);
  return r;
}

void to_json(nlohmann::json& j, const PolicySetCertificate& c) {
  std::vector<std::vector<std::size_t>> option_counts;
  for (const ProductPolicySet& set : c.components) {
    std::vector<std::size_t> counts;
    for (const auto& opts : set.options) counts.push_back(opts.size());
    option_counts.push_back(std::move(counts));
  }
  j = nlohmann::json{{"space", adversary_space_name(c.space)},
                     {"components", c.components.size()},
                     {"per_state_option_counts", option_counts},
                     {"worst_return", c.worst_return},
                     {"worst_sources", c.worst_sources},
                     {"member_count", c.member_count}};
}

void to_json(nlohmann::json& j, const BoundReport& r) {
  j = nlohmann::json{{"beta0", r.beta0},
                     {"beta1", r.beta1},
                     {"c_adv", r.c_adv},
                     {"return_attacked", r.return_attacked},
                     {"return_reference", r.return_reference},
                     {"return_expert", r.return_expert},
                     {"return_min", r.return_min},
                     {"alpha_hat", r.alpha_hat},
                     {"alpha_e", r.alpha_e},
                     {"bound_rhs", r.bound_rhs},
                     {"bound_holds", r.bound_holds},
                     {"tv_expected", r.tv_expected},
                     {"tv_bound", r.tv_bound},
                     {"tv_holds", r.tv_holds},
                     {"beta1_threshold", r.beta1_threshold},
                     {"threshold_applicable", r.threshold_applicable},
                     {"threshold_consistent", r.threshold_consistent}};
}

}  // namespace advrl
