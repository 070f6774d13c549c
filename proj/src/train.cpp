#include "advrl/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "advrl/rng.hpp"

namespace advrl {

namespace {

PolicyRows rows_from_logits(const std::vector<std::vector<double>>& logits) {
  PolicyRows rows(logits.size());
  for (std::size_t s = 0; s < logits.size(); ++s) {
    rows[s] = softmax(logits[s], 1.0);
  }
  return rows;
}

int argmax_lowest(const std::vector<double>& row) {
  int arg = 0;
  for (std::size_t a = 1; a < row.size(); ++a) {
    if (row[a] > row[arg] + 1e-12) arg = static_cast<int>(a);
  }
  return arg;
}

double episode_return(const MdpSpec& mdp, const std::vector<double>& rewards) {
  double g = 0.0;
  double disc = 1.0;
  for (const double r : rewards) {
    g += disc * r;
    disc *= mdp.gamma;
  }
  return g;
}

TrainResult train_q_learning(const MdpSpec& mdp, const TrainConfig& config) {
  const int n = mdp.num_states;
  const int na = mdp.num_actions;
  Rng rng(config.seed);
  std::vector<std::vector<double>> q(n, std::vector<double>(na, 0.0));
  std::vector<double> returns;
  returns.reserve(config.episodes);
  for (int e = 0; e < config.episodes; ++e) {
    int s = rng.categorical(mdp.initial_dist);
    std::vector<double> rewards;
    for (int k = 0; k < config.horizon_cap && !mdp.terminal[s]; ++k) {
      int a;
      if (rng.uniform01() < config.epsilon_explore) {
        a = rng.uniform_int(na);
      } else {
        a = argmax_lowest(q[s]);
      }
      const int t = rng.categorical(mdp.transition[s][a]);
      const double r = mdp.reward[s][a];
      rewards.push_back(r);
      const double bootstrap =
          mdp.terminal[t] ? 0.0 : *std::max_element(q[t].begin(), q[t].end());
      q[s][a] += config.lr * (r + mdp.gamma * bootstrap - q[s][a]);
      s = t;
    }
    returns.push_back(episode_return(mdp, rewards));
  }
  std::vector<int> greedy(n, 0);
  for (int s = 0; s < n; ++s) greedy[s] = argmax_lowest(q[s]);

  TrainResult out;
  out.policy = make_tabular_from_actions(greedy, na, config.greedy_margin);
  out.episode_returns = std::move(returns);
  return out;
}

TrainResult train_actor_critic(const MdpSpec& mdp, const TrainConfig& config) {
  const int n = mdp.num_states;
  const int na = mdp.num_actions;
  Rng rng(config.seed);
  std::vector<std::vector<double>> theta(n, std::vector<double>(na, 0.0));
  std::vector<double> value(n, 0.0);
  std::vector<double> returns;
  returns.reserve(config.episodes);
  for (int e = 0; e < config.episodes; ++e) {
    int s = rng.categorical(mdp.initial_dist);
    std::vector<double> rewards;
    double disc = 1.0;
    for (int k = 0; k < config.horizon_cap && !mdp.terminal[s]; ++k) {
      const std::vector<double> pi = softmax(theta[s], 1.0);
      const int a = rng.categorical(pi);
      const int t = rng.categorical(mdp.transition[s][a]);
      const double r = mdp.reward[s][a];
      rewards.push_back(r);
      const double v_next = mdp.terminal[t] ? 0.0 : value[t];
      const double td = r + mdp.gamma * v_next - value[s];
      value[s] += config.critic_lr * td;
      for (int b = 0; b < na; ++b) {
        const double indicator = b == a ? 1.0 : 0.0;
        theta[s][b] += config.lr * disc * td * (indicator - pi[b]);
      }
      disc *= mdp.gamma;
      s = t;
    }
    returns.push_back(episode_return(mdp, rewards));
  }
  TrainResult out;
  out.policy.kind = PolicyKind::tabular_softmax;
  out.policy.temperature = 1.0;
  out.policy.logits = std::move(theta);
  out.episode_returns = std::move(returns);
  return out;
}

TrainResult train_policy_gradient(const MdpSpec& mdp,
                                  const TrainConfig& config) {
  const int n = mdp.num_states;
  const int na = mdp.num_actions;
  Rng rng(config.seed);
  std::vector<std::vector<double>> theta(n, std::vector<double>(na, 0.0));
  std::vector<double> returns;
  returns.reserve(config.episodes);
  std::vector<int> states, actions;
  std::vector<double> rewards;
  for (int e = 0; e < config.episodes; ++e) {
    states.clear();
    actions.clear();
    rewards.clear();
    int s = rng.categorical(mdp.initial_dist);
    for (int k = 0; k < config.horizon_cap && !mdp.terminal[s]; ++k) {
      const std::vector<double> pi = softmax(theta[s], 1.0);
      const int a = rng.categorical(pi);
      const int t = rng.categorical(mdp.transition[s][a]);
      states.push_back(s);
      actions.push_back(a);
      rewards.push_back(mdp.reward[s][a]);
      s = t;
    }
    returns.push_back(episode_return(mdp, rewards));
    // Discounted returns-to-go, then one REINFORCE update per visited step.
    double g = 0.0;
    std::vector<double> togo(rewards.size(), 0.0);
    for (int k = static_cast<int>(rewards.size()) - 1; k >= 0; --k) {
      g = rewards[k] + mdp.gamma * g;
      togo[k] = g;
    }
    double disc = 1.0;
    for (std::size_t k = 0; k < states.size(); ++k) {
      const int sk = states[k];
      const std::vector<double> pi = softmax(theta[sk], 1.0);
      for (int b = 0; b < na; ++b) {
        const double indicator = b == actions[k] ? 1.0 : 0.0;
        theta[sk][b] += config.lr * disc * togo[k] * (indicator - pi[b]);
      }
      disc *= mdp.gamma;
    }
  }
  TrainResult out;
  out.policy.kind = PolicyKind::tabular_softmax;
  out.policy.temperature = 1.0;
  out.policy.logits = std::move(theta);
  out.episode_returns = std::move(returns);
  return out;
}

}  // namespace

std::string train_algo_name(TrainAlgo algo) {
  switch (algo) {
    case TrainAlgo::q_learning: return "q_learning";
    case TrainAlgo::actor_critic: return "actor_critic";
    case TrainAlgo::policy_gradient: return "policy_gradient";
  }
  return "q_learning";
}

TrainAlgo train_algo_from_name(const std::string& name) {
  if (name == "q_learning") return TrainAlgo::q_learning;
  if (name == "actor_critic") return TrainAlgo::actor_critic;
  if (name == "policy_gradient") return TrainAlgo::policy_gradient;
  throw std::invalid_argument("unknown training algorithm: " + name);
}

TrainResult train_policy(const MdpSpec& mdp, const TrainConfig& config) {
  mdp.validate();
  if (config.episodes <= 0) {
    throw std::invalid_argument("episodes must be positive");
  }
  TrainResult out;
  switch (config.algo) {
    case TrainAlgo::q_learning:
      out = train_q_learning(mdp, config);
      break;
    case TrainAlgo::actor_critic:
      out = train_actor_critic(mdp, config);
      break;
    case TrainAlgo::policy_gradient:
      out = train_policy_gradient(mdp, config);
      break;
  }
  out.exact_return =
      evaluate_policy(mdp, rows_from_logits(out.policy.logits)).return_value;
  return out;
}

DeceptiveResult train_deceptive(const MdpSpec& mdp,
                                const DeceptiveConfig& config) {
  if (config.ensemble_size <= 0 || config.ensemble_size % 2 == 0) {
    throw std::invalid_argument("ensemble_size must be odd and positive");
  }
  const MdpSpec flipped = flip_rewards(mdp);
  std::vector<Policy> members;
  std::vector<double> returns;
  for (int i = 0; i < config.ensemble_size; ++i) {
    TrainConfig member_config = config.base;
    member_config.seed = config.base.seed + static_cast<std::uint64_t>(i);
    TrainResult r = train_policy(flipped, member_config);
    // Rank by exact return on the original rewards, not the flipped ones.
    const double original_return =
        evaluate_policy(mdp, rows_from_logits(r.policy.logits)).return_value;
    members.push_back(std::move(r.policy));
    returns.push_back(original_return);
  }
  std::vector<int> order(members.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (returns[a] != returns[b]) return returns[a] < returns[b];
    return a < b;
  });
  const int median = order[order.size() / 2];

  DeceptiveResult out;
  out.selected = members[median];
  out.selected_index = median;
  out.member_returns = std::move(returns);
  return out;
}

Policy distill_feedforward(const Policy& teacher,
                           const ObservationEmbedding& embedding,
                           const DistillConfig& config) {
  if (teacher.kind != PolicyKind::tabular_softmax) {
    throw std::invalid_argument("distillation teacher must be tabular");
  }
  const int n = embedding.num_states();
  if (static_cast<int>(teacher.logits.size()) != n) {
    throw std::invalid_argument("teacher rows disagree with embedding states");
  }
  const int na = teacher.num_actions();
  PolicyRows targets(n);
  for (int s = 0; s < n; ++s) {
    targets[s] = softmax(teacher.logits[s], teacher.temperature);
  }

  Rng rng(config.seed);
  Policy net = make_feedforward(embedding.dim(), config.hidden, na,
                                config.temperature, rng);

  // Full-batch Adam on the mean KL to the teacher rows.
  std::vector<double> m(net.params.size(), 0.0), v(net.params.size(), 0.0);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int step = 1; step <= config.steps; ++step) {
    std::vector<double> grad(net.params.size(), 0.0);
    for (int s = 0; s < n; ++s) {
      LossSpec loss;
      loss.kind = LossKind::kl_to_target;
      loss.target_dist = targets[s];
      const GradientBundle g =
          input_gradient(net, embedding.encode(s), loss, true);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        grad[i] += g.param_grad[i] / n;
      }
    }
    const double c1 = 1.0 - std::pow(b1, step);
    const double c2 = 1.0 - std::pow(b2, step);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
      v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
      net.params[i] -= config.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }

  for (int s = 0; s < n; ++s) {
    const std::vector<double> p = act_probs_state(net, embedding, s);
    if (argmax_lowest(p) != argmax_lowest(targets[s])) {
      throw std::runtime_error(
          "distilled net disagrees with the teacher's argmax at state " +
          std::to_string(s) + "; increase steps or network size");
    }
  }
  return net;
}

}  // namespace advrl
