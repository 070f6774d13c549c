#include <algorithm>
#include <cmath>
#include <vector>

#include "advrl/analysis.hpp"
#include "advrl/certificates.hpp"
#include "advrl/embedding.hpp"
#include "advrl/gridworld.hpp"
#include "advrl/mdp.hpp"
#include "advrl/policy.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace advrl;

namespace {

/// Small world fixture for exhaustive family checks: a 3x3 grid, the optimal
/// tabular victim at margin 6 and a one-cell l2 discrete budget.
struct FamilyLab {
  Gridworld world;
  MdpSpec mdp;
  ObservationEmbedding emb;
  PolicyRows victim;
  PerturbationBudget budget;

  FamilyLab() {
    RandomGridworldConfig config;
    config.width = 3;
    config.height = 3;
    config.obstacle_density = 0.0;
    config.seed = 5;
    world = build_random_gridworld(config);
    mdp = world.to_mdp();
    emb = make_embedding(EmbeddingKind::coordinate, world);
    const Policy pi =
        make_tabular_from_actions(optimal_greedy_actions(mdp), 4, 6.0);
    victim = policy_rows(pi, emb, mdp.num_states);
    // 1/3 cell pitch: the l2 ball covers axis-aligned neighbors only.
    budget = discrete_budget_from_radius(emb, 0.34, Norm::l2);
  }
};

const FamilyLab& family_lab() {
  static const FamilyLab instance;
  return instance;
}

double evaluate_rows(const MdpSpec& mdp, const PolicyRows& rows) {
  return evaluate_policy(mdp, rows).return_value;
}

}  // namespace

TEST_CASE("extreme returns match the value-iteration oracle") {
  const MdpSpec corridor = build_corridor_world().to_mdp();
  CHECK(max_return(corridor) == doctest::Approx(0.6561).epsilon(1e-10));
  CHECK(min_return(corridor) == doctest::Approx(-0.6561).epsilon(1e-10));

  const MdpSpec junction =
      build_junction_world(JunctionPenalty::north).to_mdp();
  CHECK(max_return(junction) == doctest::Approx(0.81).epsilon(1e-10));
  CHECK(min_return(junction) == doctest::Approx(-0.81).epsilon(1e-10));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MdpSpec mdp = oracle::random_mdp(6, 3, seed);
    CHECK(max_return(mdp) ==
          doctest::Approx(oracle::extreme_return(mdp, true)).epsilon(1e-9));
    CHECK(min_return(mdp) ==
          doctest::Approx(oracle::extreme_return(mdp, false)).epsilon(1e-9));
  }
}

TEST_CASE("optimal adversary matches the min-player oracle") {
  const auto check_world = [](const Gridworld& world,
                              const PerturbationBudget& budget,
                              const PolicyRows& victim) {
    const MdpSpec mdp = world.to_mdp();
    const WorstCaseResult result = optimal_adversary(victim, budget, mdp);
    CHECK(result.worst_return ==
          doctest::Approx(oracle::transplant_worst_return(mdp, victim,
                                                          budget.neighbors))
              .epsilon(1e-9));
    // The reported rows really achieve the reported return.
    CHECK(evaluate_rows(mdp, result.rows) ==
          doctest::Approx(result.worst_return).epsilon(1e-9));
    for (int s = 0; s < mdp.num_states; ++s) {
      const int src = result.sources[s];
      CHECK(std::binary_search(budget.neighbors[s].begin(),
                               budget.neighbors[s].end(), src));
      CHECK(result.rows[s] == victim[src]);
    }
  };

  SUBCASE("corridor under full transplants") {
    const Gridworld world = build_corridor_world();
    const MdpSpec mdp = world.to_mdp();
    const ObservationEmbedding emb =
        make_embedding(EmbeddingKind::coordinate, world);
    const Policy pi =
        make_tabular_from_actions(optimal_greedy_actions(mdp), 4, 6.0);
    check_world(world, full_transplant_budget(world),
                policy_rows(pi, emb, mdp.num_states));
  }

  SUBCASE("random worlds under one-cell budgets") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      RandomGridworldConfig config;
      config.seed = seed;
      const Gridworld world = build_random_gridworld(config);
      const MdpSpec mdp = world.to_mdp();
      const ObservationEmbedding emb =
          make_embedding(EmbeddingKind::coordinate, world);
      const Policy pi =
          make_tabular_from_actions(optimal_greedy_actions(mdp), 4, 6.0);
      check_world(world, discrete_budget_from_radius(emb, 0.45, Norm::linf),
                  policy_rows(pi, emb, mdp.num_states));
    }
  }
}

TEST_CASE("enumerated families against exhaustive enumeration") {
  const FamilyLab& l = family_lab();

  const PolicySetCertificate full = enumerate_policy_set(
      AdversarySpace::full_untargeted, l.victim, l.budget, l.mdp);
  const PolicySetCertificate strategic = enumerate_policy_set(
      AdversarySpace::strategic_untargeted, l.victim, l.budget, l.mdp);
  const PolicySetCertificate targeted = enumerate_policy_set(
      AdversarySpace::targeted, l.victim, l.budget, l.mdp);
  const PolicySetCertificate unrestricted = enumerate_policy_set(
      AdversarySpace::unrestricted, l.victim, l.budget, l.mdp);

  SUBCASE("full-time maps are the per-state divergence argmax policies") {
    CHECK(!full.components.empty());
    CHECK(full.components.size() <= discrete_flavor_pool().size());
    double expected_worst = 1e300;
    for (const ProductPolicySet& component : full.components) {
      PolicyRows rows(l.mdp.num_states);
      for (int s = 0; s < l.mdp.num_states; ++s) {
        REQUIRE(component.options[s].size() == 1);
        rows[s] = component.options[s][0];
        // Each row is the victim row of a neighbor.
        CHECK(l.victim[component.option_sources[s][0]] == rows[s]);
      }
      expected_worst = std::min(expected_worst, evaluate_rows(l.mdp, rows));
    }
    CHECK(full.worst_return == doctest::Approx(expected_worst).epsilon(1e-9));

    // Recompute one flavor's map by hand and demand it is a component.
    PolicyRows forward(l.mdp.num_states);
    for (int s = 0; s < l.mdp.num_states; ++s) {
      int pick = -1;
      double best = 0.0;
      for (const int t : l.budget.neighbors[s]) {
        const double score =
            row_divergence(MadFlavor::kl_forward, l.victim[s], l.victim[t]);
        if (pick < 0 || score > best + 1e-12) {
          pick = t;
          best = score;
        }
      }
      forward[s] = l.victim[pick];
    }
    bool found = false;
    for (const ProductPolicySet& component : full.components) {
      bool same = true;
      for (int s = 0; s < l.mdp.num_states && same; ++s) {
        same = component.options[s][0] == forward[s];
      }
      found = found || same;
    }
    CHECK(found);
  }

  SUBCASE("strategic worst case equals brute force over all timings") {
    double brute = 1e300;
    for (const ProductPolicySet& component : strategic.components) {
      brute = std::min(brute,
                       oracle::product_min_return(l.mdp, component.options));
    }
    CHECK(strategic.worst_return == doctest::Approx(brute).epsilon(1e-9));
    // Every state offers the no-attack row among its options.
    for (const ProductPolicySet& component : strategic.components) {
      for (int s = 0; s < l.mdp.num_states; ++s) {
        CHECK(component.options[s].size() <= 2);
        bool has_clean = false;
        for (const auto& row : component.options[s]) {
          has_clean = has_clean || row == l.victim[s];
        }
        CHECK(has_clean);
      }
    }
  }

  SUBCASE("targeted worst case equals the optimal adversary, brute forced") {
    REQUIRE(targeted.components.size() == 1);
    const double brute = oracle::product_min_return(
        l.mdp, targeted.components[0].options);
    CHECK(targeted.worst_return == doctest::Approx(brute).epsilon(1e-9));
    const WorstCaseResult adversary =
        optimal_adversary(l.victim, l.budget, l.mdp);
    CHECK(targeted.worst_return ==
          doctest::Approx(adversary.worst_return).epsilon(1e-9));
    CHECK(unrestricted.worst_return ==
          doctest::Approx(adversary.worst_return).epsilon(1e-9));
    CHECK(targeted.member_count == unrestricted.member_count);
  }

  SUBCASE("containment holds along the chain and fails backwards") {
    CHECK(check_inclusion(full, strategic).included);
    CHECK(check_inclusion(strategic, targeted).included);
    CHECK(check_inclusion(full, targeted).included);

    const InclusionReport backwards = check_inclusion(targeted, strategic);
    CHECK(!backwards.included);
    CHECK(backwards.failing_component >= 0);
    CHECK(backwards.failing_state >= 0);
    CHECK(backwards.failing_option >= 0);
  }

}

TEST_CASE("zero-radius families collapse to the victim") {
  const FamilyLab& l = family_lab();
  const PerturbationBudget zero =
      discrete_budget_from_radius(l.emb, 0.0, Norm::l2);
  const double victim_return = evaluate_rows(l.mdp, l.victim);

  for (const AdversarySpace space :
       {AdversarySpace::full_untargeted, AdversarySpace::strategic_untargeted,
        AdversarySpace::targeted, AdversarySpace::unrestricted}) {
    const PolicySetCertificate cert =
        enumerate_policy_set(space, l.victim, zero, l.mdp);
    CHECK(cert.worst_return == doctest::Approx(victim_return).epsilon(1e-10));
    for (int s = 0; s < l.mdp.num_states; ++s) {
      CHECK(cert.worst_rows[s] == l.victim[s]);
    }
  }

  SUBCASE("continuous budgets are rejected") {
    CHECK_THROWS_AS(
        enumerate_policy_set(AdversarySpace::targeted, l.victim,
                             continuous_budget(0.3, Norm::l2), l.mdp),
        std::invalid_argument);
  }
}

TEST_CASE("inclusion chain on random worlds") {
  for (std::uint64_t seed = 31; seed < 34; ++seed) {
    RandomGridworldConfig config;
    config.seed = seed;
    const Gridworld world = build_random_gridworld(config);
    const MdpSpec mdp = world.to_mdp();
    const ObservationEmbedding emb =
        make_embedding(EmbeddingKind::coordinate, world);
    const Policy pi =
        make_tabular_from_actions(optimal_greedy_actions(mdp), 4, 6.0);
    const PolicyRows victim = policy_rows(pi, emb, mdp.num_states);
    const PerturbationBudget budget =
        discrete_budget_from_radius(emb, 0.45, Norm::linf);

    const InclusionChainReport chain =
        verify_inclusion_chain(victim, budget, mdp);
    CHECK(chain.inclusions_hold);
    CHECK(chain.worst_returns_monotone);
    CHECK(chain.full_untargeted.worst_return >=
          chain.strategic_untargeted.worst_return - 1e-9);
    CHECK(chain.strategic_untargeted.worst_return >=
          chain.targeted.worst_return - 1e-9);
    CHECK(chain.targeted.worst_return >=
          chain.optimal_adversary_return - 1e-9);
  }

  SUBCASE("the packaged sweep is clean") {
    const ChainSweepResult sweep = check_chain_on_random_worlds(3, 11);
    CHECK(sweep.worlds_checked == 3);
    CHECK(sweep.violations == 0);
    CHECK(sweep.violating_seeds.empty());
  }
}

TEST_CASE("bound reports") {
  const FamilyLab& l = family_lab();
  const Policy soft_pi =
      make_tabular_from_actions(optimal_greedy_actions(l.mdp), 4, 6.0);
  const PolicyRows expert = policy_rows(soft_pi, l.emb, l.mdp.num_states);
  const Policy worst_pi = make_tabular_from_actions(
      optimal_greedy_actions(flip_rewards(l.mdp)), 4, 6.0);
  const PolicyRows reference = policy_rows(worst_pi, l.emb, l.mdp.num_states);
  const double floor = min_return(l.mdp);

  SUBCASE("attacking with the reference itself zeroes the divergences") {
    const BoundReport r =
        compute_bound_report(l.mdp, reference, reference, expert, floor);
    CHECK(r.beta0 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.beta1 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.c_adv == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(r.alpha_hat ==
          doctest::Approx(r.return_reference - floor).epsilon(1e-12));
    CHECK(r.bound_rhs ==
          doctest::Approx(r.alpha_hat + r.return_reference).epsilon(1e-9));
    CHECK(r.bound_holds);
    CHECK(r.tv_expected == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.tv_holds);
    CHECK(!r.threshold_applicable);  // c_adv is zero
    CHECK(r.threshold_consistent);
  }

  SUBCASE("a reference with zeros sends beta1 to the sentinel") {
    const Policy hard = make_tabular_from_actions(
        optimal_greedy_actions(flip_rewards(l.mdp)), 4, 800.0);
    const PolicyRows one_hot = policy_rows(hard, l.emb, l.mdp.num_states);
    const BoundReport r =
        compute_bound_report(l.mdp, expert, one_hot, expert, floor);
    CHECK(r.beta1 == 1e300);
    CHECK(r.bound_holds);  // the bound is vacuous but still an upper bound
  }

  SUBCASE("the performance bound and Pinsker hold on random triples") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const MdpSpec mdp = oracle::random_mdp(5, 3, seed);
      const PolicyRows attacked = oracle::random_policy(5, 3, 3 * seed + 1);
      const PolicyRows ref = oracle::random_policy(5, 3, 3 * seed + 2);
      const PolicyRows exp_rows = oracle::random_policy(5, 3, 3 * seed + 3);
      const BoundReport r = compute_bound_report(mdp, attacked, ref, exp_rows,
                                                 min_return(mdp));
      CHECK(r.bound_holds);
      CHECK(r.tv_holds);
      CHECK(r.threshold_consistent);
      CHECK(r.alpha_hat >= -1e-12);
      CHECK(r.beta0 >= 0.0);
      CHECK(r.beta1 >= 0.0);

      // Recompute the expectation side of Pinsker independently.
      const EvaluationReport ref_eval = evaluate_policy(mdp, ref);
      double tv = 0.0;
      for (int s = 0; s < mdp.num_states; ++s) {
        double half_l1 = 0.0;
        for (int a = 0; a < mdp.num_actions; ++a) {
          half_l1 += 0.5 * std::abs(attacked[s][a] - ref[s][a]);
        }
        tv += ref_eval.occupancy[s] * half_l1;
      }
      CHECK(r.tv_expected == doctest::Approx(tv).epsilon(1e-9));
      CHECK(r.tv_expected <= std::sqrt(r.beta0 / 2.0) + 1e-10);
    }
  }
}

TEST_CASE("corridor certificate") {
  const CorridorCertificate cert = certify_corridor();
  CHECK(cert.holds);
  CHECK(cert.preferred_unique);
  CHECK(cert.flipped_prefers_same);
  CHECK(cert.adversary_keeps_preferred);
  CHECK(cert.pool_all_divert);
  CHECK(cert.pool_strictly_above_adversary);

  CHECK(cert.gate_state == 4);
  CHECK(cert.optimal_return == doctest::Approx(0.6561).epsilon(1e-10));
  CHECK(cert.min_policy_return == doctest::Approx(-0.6561).epsilon(1e-10));
  CHECK(cert.gate_value_optimal == doctest::Approx(0.81).epsilon(1e-10));
  CHECK(cert.adversary_return == doctest::Approx(-0.6561).epsilon(1e-10));
  CHECK(cert.adversary_gate_value == doctest::Approx(-0.81).epsilon(1e-10));
  CHECK(cert.adversary_preferred_prob == doctest::Approx(1.0).epsilon(1e-12));

  REQUIRE(!cert.pool.empty());
  for (const FlavorGateOutcome& flavor : cert.pool) {
    CHECK(flavor.preferred_prob == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(flavor.exact_return > cert.adversary_return + 1e-6);
  }
  // Diverting the gate dead-ends into the pocket: exactly zero return.
  CHECK(cert.pool_min_return == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("junction certificate") {
  const JunctionCertificate cert = certify_junction();
  CHECK(cert.holds);
  CHECK(cert.preferred_unique);
  CHECK(cert.adversary_diverts_gate);
  CHECK(cert.adversary_gate_value_is_minus_one);
  CHECK(cert.all_cases_safe);
  CHECK(cert.all_flavors_strictly_above);

  CHECK(cert.gate_state == 4);
  CHECK(cert.preferred_action == kDown);
  CHECK(cert.optimal_return_north == doctest::Approx(0.81).epsilon(1e-10));
  CHECK(cert.optimal_return_east == doctest::Approx(0.81).epsilon(1e-10));
  CHECK(cert.adversary_return_north == doctest::Approx(-0.81).epsilon(1e-10));
  CHECK(cert.adversary_return_east == doctest::Approx(-0.81).epsilon(1e-10));
  CHECK(cert.adversary_gate_value_north ==
        doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(cert.adversary_gate_value_east ==
        doctest::Approx(-1.0).epsilon(1e-10));

  REQUIRE(cert.cases.size() == 3);
  std::vector<int> divert_actions;
  for (const JunctionCaseOutcome& c : cert.cases) {
    divert_actions.push_back(c.divert_action);
    CHECK(c.safe);
    CHECK(c.family_min_gate_value >= -1e-10);
  }
  std::sort(divert_actions.begin(), divert_actions.end());
  CHECK(divert_actions == std::vector<int>{kUp, kRight, kLeft});

  for (const JunctionFlavorOutcome& flavor : cert.flavors) {
    CHECK(flavor.strictly_above);
    CHECK(flavor.family_min_return > flavor.adversary_return + 1e-6);
  }
}
