#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "advrl/embedding.hpp"
#include "advrl/gridworld.hpp"
#include "advrl/policy.hpp"
#include "advrl/rng.hpp"
#include "advrl/train.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace advrl;

namespace {

int argmax_index(const std::vector<double>& row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) -
                          row.begin());
}

double entropy_of(const std::vector<double>& p) {
  double h = 0.0;
  for (const double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

std::vector<double> random_obs(Rng& rng, int dim) {
  std::vector<double> obs(dim);
  for (double& v : obs) v = rng.uniform01();
  return obs;
}

std::vector<double> random_dist(Rng& rng, int n) {
  std::vector<double> p(n);
  double total = 0.0;
  for (double& v : p) {
    v = 0.05 + rng.uniform01();
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

/// Relative disagreement between two gradient vectors.
double gradient_rel_error(const std::vector<double>& a,
                          const std::vector<double>& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    scale += a[i] * a[i] + b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(scale), 1e-8);
}

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {}
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
};

}  // namespace

TEST_CASE("softmax basics") {
  SUBCASE("constant logits give the uniform distribution") {
    const std::vector<double> p = softmax({3.0, 3.0, 3.0, 3.0}, 1.0);
    for (const double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("margin 800 is an exact one-hot in doubles") {
    const std::vector<double> p = softmax({0.0, 800.0, 0.0}, 1.0);
    CHECK(p[0] == 0.0);
    CHECK(p[1] == 1.0);
    CHECK(p[2] == 0.0);
  }
  SUBCASE("large logits do not overflow") {
    const std::vector<double> p = softmax({1e4, 1e4 - 3.0}, 1.0);
    CHECK(std::isfinite(p[0]));
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("hotter temperature means more entropy") {
    const std::vector<double> logits = {1.0, 0.2, -0.5, 2.0};
    double prev = -1.0;
    for (const double temp : {0.25, 1.0, 4.0, 16.0}) {
      const double h = entropy_of(softmax(logits, temp));
      CHECK(h > prev);
      prev = h;
    }
  }
}

TEST_CASE("action distributions normalize on random probes") {
  const Gridworld world = build_corridor_world();
  const ObservationEmbedding emb =
      make_embedding(EmbeddingKind::coordinate_plus_noise_channel, world);
  Rng rng(5);
  Policy net = make_feedforward(emb.dim(), {8, 8}, 4, 0.8, rng);

  for (int probe = 0; probe < 10000; ++probe) {
    const std::vector<double> obs = random_obs(rng, emb.dim());
    const std::vector<double> p = act_probs(net, emb, obs);
    double total = 0.0;
    for (const double v : p) {
      CHECK(v >= 0.0);
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("zeroed parameters give the uniform distribution") {
    std::fill(net.params.begin(), net.params.end(), 0.0);
    const std::vector<double> p = act_probs(net, emb, emb.encode(0));
    for (const double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("policy validation names the offending field") {
  Policy p;
  p.kind = PolicyKind::tabular_softmax;
  p.logits = {{0.0, 1.0}, {1.0, 0.0}};
  CHECK_NOTHROW(p.validate());

  SUBCASE("nonpositive temperature") {
    p.temperature = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("ragged logit rows") {
    p.logits.push_back({1.0});
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("too many hidden layers") {
    Rng rng(0);
    Policy net = make_feedforward(2, {4, 4, 4}, 3, 1.0, rng);
    CHECK_NOTHROW(net.validate());
    CHECK_THROWS_AS(make_feedforward(2, {4, 4, 4, 4}, 3, 1.0, rng),
                    std::invalid_argument);
  }
  SUBCASE("hidden layer too wide") {
    Rng rng(0);
    CHECK_THROWS_AS(make_feedforward(2, {65}, 3, 1.0, rng),
                    std::invalid_argument);
  }
  SUBCASE("parameter count mismatch") {
    Rng rng(0);
    Policy net = make_feedforward(2, {4}, 3, 1.0, rng);
    net.params.pop_back();
    CHECK_THROWS_AS(net.validate(), std::invalid_argument);
  }
}

TEST_CASE("input gradients") {
  const int dim = 3;
  const int num_actions = 4;

  SUBCASE("tabular policies have no input gradient") {
    const Policy tab = make_tabular_from_actions({0, 1}, 2, 6.0);
    LossSpec loss;
    loss.kind = LossKind::entropy;
    CHECK_THROWS_AS(input_gradient(tab, {0.5, 0.5}, loss),
                    std::invalid_argument);
  }

  SUBCASE("finite differences agree for every loss kind") {
    Rng rng(11);
    for (const LossKind kind :
         {LossKind::kl_to_target, LossKind::neg_log_prob_of_action,
          LossKind::entropy}) {
      for (int probe = 0; probe < 110; ++probe) {
        // A fresh random net every few probes exercises many weight draws.
        Policy net = make_feedforward(dim, {6, 5}, num_actions,
                                      0.5 + rng.uniform01(), rng);
        const std::vector<double> obs = random_obs(rng, dim);
        LossSpec loss;
        loss.kind = kind;
        if (kind == LossKind::kl_to_target) {
          loss.target_dist = random_dist(rng, num_actions);
        } else if (kind == LossKind::neg_log_prob_of_action) {
          loss.target_action = rng.uniform_int(num_actions);
        }
        const GradientBundle g = input_gradient(net, obs, loss);
        const std::vector<double> fd = oracle::central_diff(
            [&](const std::vector<double>& probe_obs) {
              return input_gradient(net, probe_obs, loss).loss;
            },
            obs, 1e-5);
        CHECK(gradient_rel_error(g.input_grad, fd) <= 1e-4);
      }
    }
  }

  SUBCASE("KL to the policy's own distribution is flat") {
    Rng rng(13);
    Policy net = make_feedforward(dim, {6}, num_actions, 1.0, rng);
    const std::vector<double> obs = random_obs(rng, dim);
    const ObservationEmbedding unused{};  // feedforward ignores it
    LossSpec loss;
    loss.kind = LossKind::kl_to_target;
    loss.target_dist = act_probs(net, unused, obs);
    const GradientBundle g = input_gradient(net, obs, loss);
    CHECK(std::abs(g.loss) <= 1e-10);
    for (const double v : g.input_grad) CHECK(std::abs(v) <= 1e-8);
  }

  SUBCASE("linear softmax policy matches the closed form") {
    // No hidden layers: logits = Wx + b, so for L = -log p[a] the input
    // gradient is W^T (p - e_a) / temperature.
    Rng rng(17);
    const double temp = 0.7;
    Policy net = make_feedforward(dim, {}, num_actions, temp, rng);
    const std::vector<double> obs = random_obs(rng, dim);

    LossSpec loss;
    loss.kind = LossKind::neg_log_prob_of_action;
    loss.target_action = 2;
    const GradientBundle g = input_gradient(net, obs, loss);

    // Forward pass by hand. params = W row-major (out x in) then bias.
    std::vector<double> logits(num_actions, 0.0);
    for (int o = 0; o < num_actions; ++o) {
      for (int i = 0; i < dim; ++i) {
        logits[o] += net.params[o * dim + i] * obs[i];
      }
      logits[o] += net.params[num_actions * dim + o];
    }
    const std::vector<double> p = softmax(logits, temp);
    for (int i = 0; i < dim; ++i) {
      double expected = 0.0;
      for (int o = 0; o < num_actions; ++o) {
        const double delta = p[o] - (o == loss.target_action ? 1.0 : 0.0);
        expected += net.params[o * dim + i] * delta;
      }
      expected /= temp;
      CHECK(g.input_grad[i] == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("policy checkpoints") {
  Rng rng(23);
  Policy net = make_feedforward(3, {5}, 4, 1.3, rng);
  TempFile file("advrl_test_policy.json");

  SUBCASE("round trip preserves every parameter bit") {
    save_policy(file.path.string(), net);
    const Policy back = load_policy(file.path.string());
    CHECK(back.kind == net.kind);
    CHECK(back.temperature == net.temperature);
    CHECK(back.layer_sizes == net.layer_sizes);
    CHECK(back.params == net.params);

    Policy tab = make_tabular_from_actions({0, 1, 2}, 3, 6.0);
    save_policy(file.path.string(), tab);
    const Policy tab_back = load_policy(file.path.string());
    CHECK(tab_back.kind == PolicyKind::tabular_softmax);
    CHECK(tab_back.logits == tab.logits);
  }

  SUBCASE("missing file names the path") {
    const std::string missing = "/nonexistent/advrl_nope.json";
    CHECK_THROWS_WITH_AS(load_policy(missing),
                         doctest::Contains("advrl_nope.json"),
                         std::runtime_error);
  }

  SUBCASE("malformed file is reported as such") {
    std::ofstream(file.path) << "this is not json {";
    CHECK_THROWS_WITH_AS(load_policy(file.path.string()),
                         doctest::Contains("malformed"), std::runtime_error);
  }

  SUBCASE("unknown format tag is rejected") {
    std::ofstream(file.path)
        << R"({"format":"advrl-policy-v99","kind":"tabular_softmax",)"
        << R"("temperature":1.0,"logits":[[0.0,1.0]]})";
    CHECK_THROWS_WITH_AS(load_policy(file.path.string()),
                         doctest::Contains("advrl-policy-v99"),
                         std::runtime_error);
  }
}

TEST_CASE("trainers reach near-optimal returns on the shipped worlds") {
  struct WorldCase {
    const char* name;
    MdpSpec mdp;
  };
  const std::vector<WorldCase> worlds = {
      {"corridor", build_corridor_world().to_mdp()},
      {"junction_north",
       build_junction_world(JunctionPenalty::north).to_mdp()},
  };
  for (const WorldCase& world : worlds) {
    CAPTURE(world.name);
    const double best = oracle::extreme_return(world.mdp, true);
    for (const TrainAlgo algo : {TrainAlgo::q_learning, TrainAlgo::actor_critic,
                                 TrainAlgo::policy_gradient}) {
      CAPTURE(train_algo_name(algo));
      TrainConfig config;
      config.algo = algo;
      const TrainResult result = train_policy(world.mdp, config);
      CHECK(result.exact_return >= 0.95 * best);
      CHECK(result.policy.kind == PolicyKind::tabular_softmax);
      CHECK(static_cast<int>(result.episode_returns.size()) ==
            config.episodes);
    }
  }
}

TEST_CASE("training is deterministic in the seed") {
  const MdpSpec mdp = build_corridor_world().to_mdp();
  TrainConfig config;
  config.algo = TrainAlgo::policy_gradient;
  config.episodes = 500;

  const TrainResult a = train_policy(mdp, config);
  const TrainResult b = train_policy(mdp, config);
  CHECK(a.policy.logits == b.policy.logits);
  CHECK(a.exact_return == b.exact_return);

  config.seed = 99;
  const TrainResult c = train_policy(mdp, config);
  CHECK(a.policy.logits != c.policy.logits);
}

TEST_CASE("deceptive training selects the median-return flipped policy") {
  const MdpSpec mdp = build_corridor_world().to_mdp();
  DeceptiveConfig config;
  config.base.seed = 100;
  config.ensemble_size = 5;

  const DeceptiveResult result = train_deceptive(mdp, config);
  REQUIRE(result.member_returns.size() == 5);
  REQUIRE(result.selected_index >= 0);
  REQUIRE(result.selected_index < 5);

  SUBCASE("selected member carries the median exact return") {
    std::vector<double> sorted = result.member_returns;
    std::sort(sorted.begin(), sorted.end());
    CHECK(result.member_returns[result.selected_index] == sorted[2]);
  }

  SUBCASE("the deceptive argmax is the worst policy on the original MDP") {
    const ObservationEmbedding emb = make_embedding(
        EmbeddingKind::coordinate, build_corridor_world());
    const PolicyRows rows =
        policy_rows(result.selected, emb, mdp.num_states);
    std::vector<int> greedy(rows.size());
    for (std::size_t s = 0; s < rows.size(); ++s) {
      greedy[s] = argmax_index(rows[s]);
    }
    const Policy hard = make_tabular_from_actions(greedy, 4, 800.0);
    const PolicyRows hard_rows = policy_rows(hard, emb, mdp.num_states);
    const double hard_return = evaluate_policy(mdp, hard_rows).return_value;
    CHECK(hard_return ==
          doctest::Approx(oracle::extreme_return(mdp, false)).epsilon(1e-9));
    // The softened member itself stays close to, but above, the minimum.
    for (const double r : result.member_returns) {
      CHECK(r >= oracle::extreme_return(mdp, false) - 1e-12);
    }
  }

  SUBCASE("ensemble of one is plain training on the flipped MDP") {
    DeceptiveConfig single = config;
    single.ensemble_size = 1;
    const DeceptiveResult one = train_deceptive(mdp, single);
    const TrainResult direct = train_policy(flip_rewards(mdp), single.base);
    CHECK(one.selected.logits == direct.policy.logits);
    CHECK(one.selected_index == 0);
  }
}

TEST_CASE("distillation reproduces the teacher argmax everywhere") {
  const Gridworld world = build_corridor_world();
  const MdpSpec mdp = world.to_mdp();
  const ObservationEmbedding emb =
      make_embedding(EmbeddingKind::coordinate, world);

  TrainConfig train;
  const TrainResult victim = train_policy(mdp, train);

  DistillConfig distill;
  distill.hidden = {16, 16};
  distill.steps = 3000;
  const Policy net = distill_feedforward(victim.policy, emb, distill);
  CHECK(net.kind == PolicyKind::feedforward);
  CHECK(net.layer_sizes ==
        std::vector<int>{emb.dim(), 16, 16, mdp.num_actions});

  const PolicyRows teacher_rows =
      policy_rows(victim.policy, emb, mdp.num_states);
  const PolicyRows net_rows = policy_rows(net, emb, mdp.num_states);
  for (int s = 0; s < mdp.num_states; ++s) {
    CHECK(argmax_index(net_rows[s]) == argmax_index(teacher_rows[s]));
  }

  SUBCASE("distillation is deterministic in its seed") {
    const Policy again = distill_feedforward(victim.policy, emb, distill);
    CHECK(again.params == net.params);
  }
}
