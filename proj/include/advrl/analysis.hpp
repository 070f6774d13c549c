#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "advrl/attacks.hpp"
#include "advrl/embedding.hpp"
#include "advrl/mdp.hpp"

namespace advrl {

/// Families of attacked policies, ordered by strength. full_untargeted
/// perturbs every state with a divergence-maximizing map;
/// strategic_untargeted applies one such map on an arbitrary subset of
/// states; targeted imitates an arbitrary deceptive target; unrestricted is
/// every policy reachable within the budget, the optimal adversary's search
/// space.
enum class AdversarySpace {
  full_untargeted,
  strategic_untargeted,
  targeted,
  unrestricted,
};

std::string adversary_space_name(AdversarySpace space);

/// Product-form set of attacked policies: a member picks, independently per
/// state, one of the listed rows. options[s][k] is a full action
/// distribution; option_sources[s][k] records which neighbor's victim row it
/// is (provenance for witnesses).
struct ProductPolicySet {
  std::vector<std::vector<std::vector<double>>> options;  // [s][k][a]
  std::vector<std::vector<int>> option_sources;           // [s][k]
};

/// An enumerated family of attacked policies as a union of product sets,
/// with its exact worst case. A single explicit policy is a product set with
/// one option per state.
struct PolicySetCertificate {
  AdversarySpace space = AdversarySpace::unrestricted;
  std::vector<ProductPolicySet> components;
  double worst_return = 0.0;
  PolicyRows worst_rows;
  std::vector<int> worst_sources;  // per-state transplant source state
  double member_count = 0.0;       // sum of product cardinalities
};

void to_json(nlohmann::json& j, const PolicySetCertificate& c);

/// Enumerates the family of attacked policies induced by a discrete budget.
///
/// full_untargeted: one explicit policy per divergence flavor in the pool
/// (the per-state divergence argmax over the neighbor set, ties to the
/// lowest state), deduplicated.
/// strategic_untargeted: for each pooled flavor map phi, the product set
/// {victim row, row at phi(s)} per state (all on/off timings of that map).
/// targeted and unrestricted: the single product set of all neighbor rows
/// per state; with every deceptive target admitted, targeted steering can
/// realize any neighbor row, so the two coincide by construction.
///
/// Members are never materialized: each component stays in product form and
/// member_count tracks cardinality as a double, so large targeted sets are
/// fine. Throws std::invalid_argument for continuous budgets.
PolicySetCertificate enumerate_policy_set(AdversarySpace space,
                                          const PolicyRows& victim,
                                          const PerturbationBudget& budget,
                                          const MdpSpec& mdp);

/// Exact minimum return over a product set, by policy iteration on the
/// adversary's selection (evaluate the current selection by linear solve,
/// switch each state to its argmin option, repeat to a fixed point).
/// Also fills worst_rows / worst_sources of the returned selection.
struct WorstCaseResult {
  double worst_return = 0.0;
  std::vector<double> v;
  PolicyRows rows;
  std::vector<int> sources;
};
WorstCaseResult worst_case_over_product(const ProductPolicySet& set,
                                        const MdpSpec& mdp);

/// Containment of enumerated families. Sufficient row-wise test: every
/// component of `inner` must have, in some single component of `outer`, all
/// of its option rows per state (rows compared within 1e-9). Exact for the
/// families enumerate_policy_set produces.
struct InclusionReport {
  bool included = true;
  int failing_component = -1;
  int failing_state = -1;
  int failing_option = -1;
};
InclusionReport check_inclusion(const PolicySetCertificate& inner,
                                const PolicySetCertificate& outer);

/// Chain report over the three restricted families plus the unrestricted
/// optimum: set containment full_untargeted within strategic_untargeted
/// within targeted, and the matching monotone worst-case returns.
struct InclusionChainReport {
  PolicySetCertificate full_untargeted;
  PolicySetCertificate strategic_untargeted;
  PolicySetCertificate targeted;
  double optimal_adversary_return = 0.0;
  bool inclusions_hold = false;
  bool worst_returns_monotone = false;
};
InclusionChainReport verify_inclusion_chain(const PolicyRows& victim,
                                            const PerturbationBudget& budget,
                                            const MdpSpec& mdp);

/// Divergence and advantage statistics of an attacked policy against a
/// reference, with the return bound they imply.
///
/// beta0 = max_s KL(attacked(.|s) || reference(.|s))
/// beta1 = max_{s,a} |attacked(a|s)/reference(a|s) - 1|
/// c_adv = max_s |E_{a~attacked} A_reference(s,a)|
/// alpha_hat = reference return - exact minimum return (>= 0)
/// bound_rhs = alpha_hat + c_adv*beta1/(1-gamma)
///             + 2*gamma*c_adv*sqrt(beta0/2)/(1-gamma)^2 + reference return
/// bound_holds: attacked return <= bound_rhs + 1e-8
/// tv_expected = E_{s~occupancy(reference)} TV(attacked(.|s), ref(.|s))
/// tv_bound = sqrt(beta0/2); tv_holds: tv_expected <= tv_bound + 1e-10
///
/// The imitation-threshold test: with alpha_e = expert return - reference
/// return, beta1_threshold is the verbatim root
/// (-sqrt(2)*gamma*c + sqrt(2*gamma^2*c^2 + 4*(alpha_e - alpha_hat)*
/// (1-gamma)^3)) / (2*(1-gamma)*c); threshold_applicable is false when
/// c_adv is ~0 or the discriminant is negative. threshold_consistent is
/// false only if beta1 < threshold while the attacked return still exceeds
/// the expert return by more than 1e-8.
struct BoundReport {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double c_adv = 0.0;
  double return_attacked = 0.0;
  double return_reference = 0.0;
  double return_expert = 0.0;
  double return_min = 0.0;
  double alpha_hat = 0.0;
  double alpha_e = 0.0;
  double bound_rhs = 0.0;
  bool bound_holds = false;
  double tv_expected = 0.0;
  double tv_bound = 0.0;
  bool tv_holds = false;
  double beta1_threshold = 0.0;
  bool threshold_applicable = false;
  bool threshold_consistent = true;
};

void to_json(nlohmann::json& j, const BoundReport& r);

/// Computes the full report. `attacked` is the induced attacked policy,
/// `reference` the deceptive imitation target (full support required for
/// finite beta0/beta1), `expert` the clean victim rows; return_min is the
/// exact minimum return of the MDP (from the flipped-reward optimum).
BoundReport compute_bound_report(const MdpSpec& mdp,
                                 const PolicyRows& attacked,
                                 const PolicyRows& reference,
                                 const PolicyRows& expert, double return_min);

/// Exact optimal adversary over a discrete budget: the adversary picks, per
/// state, which neighbor's victim row the victim acts with, minimizing the
/// victim's return. Solved by policy iteration (exact). Returns the worst
/// rows, per-state sources and values.
WorstCaseResult optimal_adversary(const PolicyRows& victim,
                                  const PerturbationBudget& budget,
                                  const MdpSpec& mdp);

/// Exact minimum return over all policies, via the reward-flipped optimum.
double min_return(const MdpSpec& mdp);

/// Exact maximum return over all policies.
double max_return(const MdpSpec& mdp);

}  // namespace advrl
