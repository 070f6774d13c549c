#include "advrl/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "advrl/policy.hpp"

namespace advrl {

namespace {

constexpr double kExactTol = 1e-9;
constexpr double kOneHotMargin = 800.0;  // exp(-800) underflows to exactly 0

int argmax_lowest(const std::vector<double>& row) {
  int arg = 0;
  for (std::size_t a = 1; a < row.size(); ++a) {
    if (row[a] > row[arg] + 1e-12) arg = static_cast<int>(a);
  }
  return arg;
}

std::vector<double> one_hot_row(int action, int num_actions) {
  std::vector<double> row(num_actions, 0.0);
  row[action] = 1.0;
  return row;
}

/// Exact one-hot rows of the optimal greedy policy.
PolicyRows greedy_victim_rows(const MdpSpec& mdp,
                              const ObservationEmbedding& embedding) {
  const Policy victim = make_tabular_from_actions(
      optimal_greedy_actions(mdp), mdp.num_actions, kOneHotMargin);
  return policy_rows(victim, embedding, mdp.num_states);
}

/// True when `action` is the strict argmax of q within tolerance.
bool unique_argmax(const std::vector<double>& q, int action) {
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (static_cast<int>(a) == action) continue;
    if (q[a] >= q[action] - kExactTol) return false;
  }
  return true;
}

/// Per-flavor divert map over a discrete budget: the neighbor with maximal
/// divergence from the state's own row, ties to the lowest state index.
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
      const double value = row_divergence(flavor, victim[s], victim[nbrs[i]]);
      if (value > best_value + 1e-12) {
        best = nbrs[i];
        best_value = value;
      }
    }
    phi[s] = best;
  }
  return phi;
}

ProductPolicySet timing_family(const PolicyRows& victim,
                               const std::vector<int>& phi) {
  const int n = static_cast<int>(victim.size());
  ProductPolicySet set;
  set.options.assign(n, {});
  set.option_sources.assign(n, {});
  for (int s = 0; s < n; ++s) {
    set.options[s].push_back(victim[s]);
    set.option_sources[s].push_back(s);
    if (phi[s] != s) {
      set.options[s].push_back(victim[phi[s]]);
      set.option_sources[s].push_back(phi[s]);
    }
  }
  return set;
}

}  // namespace

PerturbationBudget full_transplant_budget(const Gridworld& world) {
  const ObservationEmbedding embedding =
      make_embedding(EmbeddingKind::coordinate, world);
  // Encodings live in the unit box, so radius 2 covers every pair.
  return discrete_budget_from_radius(embedding, 2.0, Norm::l2);
}

CorridorCertificate certify_corridor() {
  const Gridworld world = build_corridor_world();
  const MdpSpec mdp = world.to_mdp();
  const ObservationEmbedding embedding =
      make_embedding(EmbeddingKind::coordinate, world);
  const PerturbationBudget budget = full_transplant_budget(world);
  const PolicyRows victim = greedy_victim_rows(mdp, embedding);

  CorridorCertificate cert;
  cert.gate_state = world.gate_state();
  const EvaluationReport optimal = evaluate_policy(mdp, victim);
  cert.optimal_return = optimal.return_value;
  cert.min_policy_return = min_return(mdp);
  cert.gate_value_optimal = optimal.v[cert.gate_state];
  cert.preferred_action = argmax_lowest(victim[cert.gate_state]);
  cert.preferred_unique =
      unique_argmax(optimal.q[cert.gate_state], cert.preferred_action);

  // The reward-flipped optimum must prefer the same gate action, uniquely:
  // this is what makes the optimal adversary leave the gate alone.
  const MdpSpec flipped = flip_rewards(mdp);
  const PolicyRows flipped_victim = greedy_victim_rows(flipped, embedding);
  const EvaluationReport flipped_eval =
      evaluate_policy(flipped, flipped_victim);
  const int flipped_action = argmax_lowest(flipped_victim[cert.gate_state]);
  cert.flipped_prefers_same =
      flipped_action == cert.preferred_action &&
      unique_argmax(flipped_eval.q[cert.gate_state], flipped_action);

  const WorstCaseResult adversary = optimal_adversary(victim, budget, mdp);
  cert.adversary_return = adversary.worst_return;
  cert.adversary_gate_value = adversary.v[cert.gate_state];
  cert.adversary_preferred_prob =
      adversary.rows[cert.gate_state][cert.preferred_action];
  cert.adversary_gate_source = adversary.sources[cert.gate_state];
  cert.adversary_keeps_preferred =
      std::abs(cert.adversary_preferred_prob - 1.0) <= kExactTol;

  const Policy victim_policy = make_tabular_from_actions(
      optimal_greedy_actions(mdp), mdp.num_actions, kOneHotMargin);
  bool all_divert = true;
  bool first = true;
  for (const MadFlavor flavor : discrete_flavor_pool()) {
    Attacker attacker;
    attacker.kind = AttackKind::mad;
    attacker.budget = budget;
    attacker.flavor = flavor;
    attacker.victim = &victim_policy;
    attacker.embedding = &embedding;
    const PolicyRows rows =
        induced_tabular_policy(attacker, mdp.num_states, 0);
    FlavorGateOutcome outcome;
    outcome.flavor = mad_flavor_name(flavor);
    Rng rng(0);
    const std::vector<double> gate_obs = perturb(
        attacker, cert.gate_state, embedding.encode(cert.gate_state), rng);
    outcome.gate_source = embedding.decode_nearest(gate_obs);
    outcome.gate_action = argmax_lowest(victim[outcome.gate_source]);
    outcome.preferred_prob = rows[cert.gate_state][cert.preferred_action];
    outcome.exact_return = evaluate_policy(mdp, rows).return_value;
    all_divert = all_divert && outcome.preferred_prob <= kExactTol;
    if (first || outcome.exact_return < cert.pool_min_return) {
      cert.pool_min_return = outcome.exact_return;
      first = false;
    }
    cert.pool.push_back(std::move(outcome));
  }
  cert.pool_all_divert = all_divert;
  cert.pool_strictly_above_adversary =
      cert.pool_min_return > cert.adversary_return + kExactTol;

  cert.holds = cert.preferred_unique && cert.flipped_prefers_same &&
               cert.adversary_keeps_preferred && cert.pool_all_divert &&
               cert.pool_strictly_above_adversary;
  return cert;
}

JunctionCertificate certify_junction() {
  JunctionCertificate cert;

  struct VariantData {
    MdpSpec mdp;
    ObservationEmbedding embedding;
    PerturbationBudget budget;
    PolicyRows victim;
    EvaluationReport optimal;
    WorstCaseResult adversary;
  };
  auto build = [](JunctionPenalty penalty) {
    const Gridworld world = build_junction_world(penalty);
    VariantData d;
    d.mdp = world.to_mdp();
    d.embedding = make_embedding(EmbeddingKind::coordinate, world);
    d.budget = full_transplant_budget(world);
    d.victim = greedy_victim_rows(d.mdp, d.embedding);
    d.optimal = evaluate_policy(d.mdp, d.victim);
    d.adversary = optimal_adversary(d.victim, d.budget, d.mdp);
    return d;
  };
  const VariantData north = build(JunctionPenalty::north);
  const VariantData east = build(JunctionPenalty::east);
  const Gridworld world = build_junction_world(JunctionPenalty::north);
  cert.gate_state = world.gate_state();

  cert.preferred_action = argmax_lowest(north.victim[cert.gate_state]);
  cert.preferred_unique =
      unique_argmax(north.optimal.q[cert.gate_state], cert.preferred_action) &&
      argmax_lowest(east.victim[cert.gate_state]) == cert.preferred_action &&
      unique_argmax(east.optimal.q[cert.gate_state], cert.preferred_action);
  cert.gate_value_optimal = north.optimal.v[cert.gate_state];
  cert.optimal_return_north = north.optimal.return_value;
  cert.optimal_return_east = east.optimal.return_value;

  cert.adversary_return_north = north.adversary.worst_return;
  cert.adversary_return_east = east.adversary.worst_return;
  cert.adversary_gate_value_north = north.adversary.v[cert.gate_state];
  cert.adversary_gate_value_east = east.adversary.v[cert.gate_state];
  const int north_divert =
      argmax_lowest(north.adversary.rows[cert.gate_state]);
  const int east_divert = argmax_lowest(east.adversary.rows[cert.gate_state]);
  cert.adversary_diverts_gate = north_divert != cert.preferred_action &&
                                east_divert != cert.preferred_action;
  cert.adversary_gate_value_is_minus_one =
      std::abs(cert.adversary_gate_value_north + 1.0) <= kExactTol &&
      std::abs(cert.adversary_gate_value_east + 1.0) <= kExactTol;

  // Case analysis: whatever single action an untargeted map induces at the
  // gate, the designated variant keeps the whole timing family's V(gate)
  // at or above zero. Non-gate states may use the victim row or any pooled
  // flavor's divert row, a superset of each flavor's own family.
  const auto variant_for = [&](int divert) {
    return divert == kRight ? JunctionPenalty::north : JunctionPenalty::east;
  };
  bool all_cases_safe = true;
  for (const int divert : {kUp, kRight, kLeft}) {
    const VariantData& data =
        variant_for(divert) == JunctionPenalty::north ? north : east;
    const int n = data.mdp.num_states;
    ProductPolicySet family;
    family.options.assign(n, {});
    family.option_sources.assign(n, {});
    for (int s = 0; s < n; ++s) {
      family.options[s].push_back(data.victim[s]);
      family.option_sources[s].push_back(s);
      if (s == cert.gate_state) continue;
      for (const MadFlavor flavor : discrete_flavor_pool()) {
        const std::vector<int> phi = divert_map(data.victim, data.budget,
                                                flavor);
        if (phi[s] != s) {
          family.options[s].push_back(data.victim[phi[s]]);
          family.option_sources[s].push_back(phi[s]);
        }
      }
    }
    family.options[cert.gate_state].push_back(
        one_hot_row(divert, data.mdp.num_actions));
    family.option_sources[cert.gate_state].push_back(-1);

    const WorstCaseResult worst = worst_case_over_product(family, data.mdp);
    JunctionCaseOutcome outcome;
    outcome.divert_action = divert;
    outcome.variant = variant_for(divert);
    outcome.family_min_gate_value = worst.v[cert.gate_state];
    outcome.family_min_return = worst.worst_return;
    outcome.safe = worst.v[cert.gate_state] >= -kExactTol;
    all_cases_safe = all_cases_safe && outcome.safe;
    cert.cases.push_back(outcome);
  }
  cert.all_cases_safe = all_cases_safe;

  // Operational check: each pooled flavor's actual gate divert, tested on
  // the variant designated for that divert action.
  bool all_flavors_above = true;
  for (const MadFlavor flavor : discrete_flavor_pool()) {
    const std::vector<int> phi_north =
        divert_map(north.victim, north.budget, flavor);
    const int divert =
        argmax_lowest(north.victim[phi_north[cert.gate_state]]);
    const VariantData& data =
        variant_for(divert) == JunctionPenalty::north ? north : east;
    const std::vector<int> phi = divert_map(data.victim, data.budget, flavor);
    const WorstCaseResult worst =
        worst_case_over_product(timing_family(data.victim, phi), data.mdp);

    JunctionFlavorOutcome outcome;
    outcome.flavor = mad_flavor_name(flavor);
    outcome.gate_divert_action = divert;
    outcome.variant = variant_for(divert);
    outcome.family_min_return = worst.worst_return;
    outcome.family_min_gate_value = worst.v[cert.gate_state];
    outcome.adversary_return = data.adversary.worst_return;
    outcome.strictly_above =
        divert != cert.preferred_action &&
        worst.worst_return > data.adversary.worst_return + kExactTol;
    all_flavors_above = all_flavors_above && outcome.strictly_above;
    cert.flavors.push_back(std::move(outcome));
  }
  cert.all_flavors_strictly_above = all_flavors_above;

  cert.holds = cert.preferred_unique && cert.adversary_diverts_gate &&
               cert.adversary_gate_value_is_minus_one && cert.all_cases_safe &&
               cert.all_flavors_strictly_above;
  return cert;
}

ChainSweepResult check_chain_on_random_worlds(int count, std::uint64_t seed0) {
  ChainSweepResult result;
  for (int i = 0; i < count; ++i) {
    RandomGridworldConfig config;
    config.width = 5;
    config.height = 5;
    config.obstacle_density = 0.25;
    config.seed = seed0 + static_cast<std::uint64_t>(i);
    const Gridworld world = build_random_gridworld(config);
    const MdpSpec mdp = world.to_mdp();
    const ObservationEmbedding embedding =
        make_embedding(EmbeddingKind::coordinate, world);
    const PerturbationBudget budget =
        discrete_budget_from_radius(embedding, 0.45, Norm::linf);
    const PolicyRows victim = greedy_victim_rows(mdp, embedding);
    const InclusionChainReport chain =
        verify_inclusion_chain(victim, budget, mdp);
    ++result.worlds_checked;
    if (!chain.inclusions_hold || !chain.worst_returns_monotone) {
      ++result.violations;
      result.violating_seeds.push_back(config.seed);
    }
  }
  return result;
}

void to_json(nlohmann::json& j, const CorridorCertificate& c) {
  nlohmann::json pool = nlohmann::json::array();
  for (const FlavorGateOutcome& f : c.pool) {
    pool.push_back({{"flavor", f.flavor},
                    {"gate_source", f.gate_source},
                    {"gate_action", f.gate_action},
                    {"preferred_prob", f.preferred_prob},
                    {"exact_return", f.exact_return}});
  }
  j = nlohmann::json{
      {"gate_state", c.gate_state},
      {"preferred_action", c.preferred_action},
      {"optimal_return", c.optimal_return},
      {"min_policy_return", c.min_policy_return},
      {"gate_value_optimal", c.gate_value_optimal},
      {"adversary_return", c.adversary_return},
      {"adversary_gate_value", c.adversary_gate_value},
      {"adversary_preferred_prob", c.adversary_preferred_prob},
      {"adversary_gate_source", c.adversary_gate_source},
      {"pool", pool},
      {"pool_min_return", c.pool_min_return},
      {"preferred_unique", c.preferred_unique},
      {"flipped_prefers_same", c.flipped_prefers_same},
      {"adversary_keeps_preferred", c.adversary_keeps_preferred},
      {"pool_all_divert", c.pool_all_divert},
      {"pool_strictly_above_adversary", c.pool_strictly_above_adversary},
      {"holds", c.holds}};
}

void to_json(nlohmann::json& j, const JunctionCertificate& c) {
  nlohmann::json cases = nlohmann::json::array();
  for (const JunctionCaseOutcome& o : c.cases) {
    cases.push_back(
        {{"divert_action", kActionNames[o.divert_action]},
         {"variant", o.variant == JunctionPenalty::north ? "north" : "east"},
         {"family_min_gate_value", o.family_min_gate_value},
         {"family_min_return", o.family_min_return},
         {"safe", o.safe}});
  }
  nlohmann::json flavors = nlohmann::json::array();
  for (const JunctionFlavorOutcome& o : c.flavors) {
    flavors.push_back(
        {{"flavor", o.flavor},
         {"gate_divert_action", kActionNames[o.gate_divert_action]},
         {"variant", o.variant == JunctionPenalty::north ? "north" : "east"},
         {"family_min_return", o.family_min_return},
         {"family_min_gate_value", o.family_min_gate_value},
         {"adversary_return", o.adversary_return},
         {"strictly_above", o.strictly_above}});
  }
  j = nlohmann::json{
      {"gate_state", c.gate_state},
      {"preferred_action", c.preferred_action},
      {"gate_value_optimal", c.gate_value_optimal},
      {"optimal_return_north", c.optimal_return_north},
      {"optimal_return_east", c.optimal_return_east},
      {"adversary_return_north", c.adversary_return_north},
      {"adversary_return_east", c.adversary_return_east},
      {"adversary_gate_value_north", c.adversary_gate_value_north},
      {"adversary_gate_value_east", c.adversary_gate_value_east},
      {"cases", cases},
      {"flavors", flavors},
      {"preferred_unique", c.preferred_unique},
      {"adversary_diverts_gate", c.adversary_diverts_gate},
      {"adversary_gate_value_is_minus_one",
       c.adversary_gate_value_is_minus_one},
      {"all_cases_safe", c.all_cases_safe},
      {"all_flavors_strictly_above", c.all_flavors_strictly_above},
      {"holds", c.holds}};
}

}  // namespace advrl
