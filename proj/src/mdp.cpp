#include "advrl/mdp.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "advrl/rng.hpp"

namespace advrl {

namespace {

constexpr double kRowSumTol = 1e-9;

std::string entry_name(const char* what, int s, int a) {
  return std::string(what) + "[" + std::to_string(s) + "][" +
         std::to_string(a) + "]";
}

void check_policy_rows(const MdpSpec& mdp, const PolicyRows& pi) {
  if (static_cast<int>(pi.size()) != mdp.num_states) {
    throw std::invalid_argument("policy has " + std::to_string(pi.size()) +
                                " rows, MDP has " +
                                std::to_string(mdp.num_states) + " states");
  }
  for (int s = 0; s < mdp.num_states; ++s) {
    if (static_cast<int>(pi[s].size()) != mdp.num_actions) {
      throw std::invalid_argument("policy row " + std::to_string(s) +
                                  " has wrong action count");
    }
    double sum = 0.0;
    for (int a = 0; a < mdp.num_actions; ++a) {
      if (pi[s][a] < -kRowSumTol) {
        throw std::invalid_argument("policy row " + std::to_string(s) +
                                    " has a negative probability");
      }
      sum += pi[s][a];
    }
    if (std::abs(sum - 1.0) > kRowSumTol) {
      throw std::invalid_argument("policy row " + std::to_string(s) +
                                  " sums to " + std::to_string(sum));
    }
  }
}

}  // namespace

void MdpSpec::validate() const {
  if (num_states <= 0) throw std::invalid_argument("num_states must be > 0");
  if (num_actions <= 0) throw std::invalid_argument("num_actions must be > 0");
  if (!(gamma > 0.0) || !(gamma < 1.0)) {
    throw std::invalid_argument("gamma must lie in (0,1), got " +
                                std::to_string(gamma));
  }
  if (static_cast<int>(transition.size()) != num_states ||
      static_cast<int>(reward.size()) != num_states ||
      static_cast<int>(terminal.size()) != num_states ||
      static_cast<int>(initial_dist.size()) != num_states) {
    throw std::invalid_argument("table sizes disagree with num_states");
  }
  double init_sum = 0.0;
  for (int s = 0; s < num_states; ++s) {
    if (initial_dist[s] < 0.0) {
      throw std::invalid_argument("initial_dist[" + std::to_string(s) +
                                  "] is negative");
    }
    init_sum += initial_dist[s];
    if (static_cast<int>(transition[s].size()) != num_actions ||
        static_cast<int>(reward[s].size()) != num_actions) {
      throw std::invalid_argument("state " + std::to_string(s) +
                                  " has wrong action table size");
    }
    for (int a = 0; a < num_actions; ++a) {
      if (static_cast<int>(transition[s][a].size()) != num_states) {
        throw std::invalid_argument(entry_name("transition", s, a) +
                                    " has wrong length");
      }
      double row = 0.0;
      for (int t = 0; t < num_states; ++t) {
        if (transition[s][a][t] < 0.0) {
          throw std::invalid_argument(entry_name("transition", s, a) +
                                      " has a negative probability");
        }
        row += transition[s][a][t];
      }
      if (std::abs(row - 1.0) > kRowSumTol) {
        throw std::invalid_argument(entry_name("transition", s, a) +
                                    " sums to " + std::to_string(row));
      }
      if (terminal[s]) {
        if (std::abs(transition[s][a][s] - 1.0) > kRowSumTol) {
          throw std::invalid_argument("terminal state " + std::to_string(s) +
                                      " does not self-loop");
        }
        if (reward[s][a] != 0.0) {
          throw std::invalid_argument("terminal state " + std::to_string(s) +
                                      " has nonzero reward");
        }
      }
    }
  }
  if (std::abs(init_sum - 1.0) > kRowSumTol) {
    throw std::invalid_argument("initial_dist sums to " +
                                std::to_string(init_sum));
  }
}

void to_json(nlohmann::json& j, const MdpSpec& m) {
  j = nlohmann::json{{"num_states", m.num_states},
                     {"num_actions", m.num_actions},
                     {"transition", m.transition},
                     {"reward", m.reward},
                     {"gamma", m.gamma},
                     {"initial_dist", m.initial_dist},
                     {"terminal", m.terminal}};
}

void from_json(const nlohmann::json& j, MdpSpec& m) {
  j.at("num_states").get_to(m.num_states);
  j.at("num_actions").get_to(m.num_actions);
  j.at("transition").get_to(m.transition);
  j.at("reward").get_to(m.reward);
  j.at("gamma").get_to(m.gamma);
  j.at("initial_dist").get_to(m.initial_dist);
  j.at("terminal").get_to(m.terminal);
}

EvaluationReport evaluate_policy(const MdpSpec& mdp, const PolicyRows& pi) {
  check_policy_rows(mdp, pi);
  const int n = mdp.num_states;
  const int na = mdp.num_actions;

  Eigen::MatrixXd p_pi(n, n);
  Eigen::VectorXd r_pi(n);
  for (int s = 0; s < n; ++s) {
    double r = 0.0;
    for (int t = 0; t < n; ++t) p_pi(s, t) = 0.0;
    for (int a = 0; a < na; ++a) {
      const double w = pi[s][a];
      if (w == 0.0) continue;
      r += w * mdp.reward[s][a];
      for (int t = 0; t < n; ++t) p_pi(s, t) += w * mdp.transition[s][a][t];
    }
    r_pi(s) = r;
  }

  const Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(n, n) - mdp.gamma * p_pi;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  const Eigen::VectorXd v = lu.solve(r_pi);

  // Occupancy solves the transposed system against the initial distribution:
  // d = (1-gamma) (I - gamma P_pi^T)^{-1} mu0.
  Eigen::VectorXd mu0(n);
  for (int s = 0; s < n; ++s) mu0(s) = mdp.initial_dist[s];
  const Eigen::VectorXd d =
      (1.0 - mdp.gamma) *
      Eigen::PartialPivLU<Eigen::MatrixXd>(system.transpose()).solve(mu0);

  EvaluationReport out;
  out.v.assign(n, 0.0);
  out.occupancy.assign(n, 0.0);
  out.q.assign(n, std::vector<double>(na, 0.0));
  out.adv.assign(n, std::vector<double>(na, 0.0));
  double ret = 0.0;
  for (int s = 0; s < n; ++s) {
    out.v[s] = v(s);
    out.occupancy[s] = d(s);
    ret += mdp.initial_dist[s] * v(s);
    for (int a = 0; a < na; ++a) {
      double q = mdp.reward[s][a];
      for (int t = 0; t < n; ++t) {
        const double p = mdp.transition[s][a][t];
        if (p != 0.0) q += mdp.gamma * p * v(t);
      }
      out.q[s][a] = q;
      out.adv[s][a] = q - v(s);
    }
  }
  out.return_value = ret;
  return out;
}

MdpSpec flip_rewards(const MdpSpec& mdp) {
  MdpSpec out = mdp;
  for (int s = 0; s < mdp.num_states; ++s) {
    if (mdp.terminal[s]) continue;  // terminal self-loops stay at zero
    for (int a = 0; a < mdp.num_actions; ++a) out.reward[s][a] = -out.reward[s][a];
  }
  return out;
}

std::string TrajectoryBatch::to_csv() const {
  std::string out = "episode,step,state,action,reward,next_state,done\n";
  char buf[160];
  for (const TrajectoryStep& t : steps) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%d,%.10g,%d,%d\n", t.episode,
                  t.step, t.state, t.action, t.reward, t.next_state,
                  t.done ? 1 : 0);
    out += buf;
  }
  return out;
}

TrajectoryBatch sample_trajectories(const MdpSpec& mdp, const PolicyRows& pi,
                                    int episodes, std::uint64_t seed,
                                    int horizon_cap) {
  check_policy_rows(mdp, pi);
  Rng rng(seed);
  TrajectoryBatch batch;
  for (int e = 0; e < episodes; ++e) {
    int s = rng.categorical(mdp.initial_dist);
    for (int k = 0; k < horizon_cap; ++k) {
      if (mdp.terminal[s]) break;
      const int a = rng.categorical(pi[s]);
      const int t = rng.categorical(mdp.transition[s][a]);
      const bool done = mdp.terminal[t] != 0;
      batch.steps.push_back(
          {e, k, s, a, mdp.reward[s][a], t, done});
      s = t;
      if (done) break;
    }
  }
  return batch;
}

}  // namespace advrl
