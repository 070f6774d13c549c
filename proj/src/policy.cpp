#include "advrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace advrl {

namespace {

constexpr const char* kPolicyFormat = "advrl-policy-v1";
constexpr double kLogFloor = 1e-300;

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

/// Offset of layer l's weights in params; biases follow the weights.
struct LayerView {
  int in = 0;
  int out = 0;
  std::size_t w_off = 0;
  std::size_t b_off = 0;
};

std::vector<LayerView> layer_views(const std::vector<int>& sizes) {
  std::vector<LayerView> views;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    LayerView v;
    v.in = sizes[l];
    v.out = sizes[l + 1];
    v.w_off = off;
    off += static_cast<std::size_t>(v.in) * v.out;
    v.b_off = off;
    off += v.out;
    views.push_back(v);
  }
  return views;
}

std::size_t param_count(const std::vector<int>& sizes) {
  const auto views = layer_views(sizes);
  if (views.empty()) return 0;
  const LayerView& last = views.back();
  return last.b_off + last.out;
}

/// Forward pass keeping all activations for the backward pass.
struct ForwardTrace {
  std::vector<std::vector<double>> acts;  // acts[0] = input, back() = logits
};

ForwardTrace forward(const Policy& p, const std::vector<double>& obs) {
  ForwardTrace tr;
  tr.acts.push_back(obs);
  const auto views = layer_views(p.layer_sizes);
  for (std::size_t l = 0; l < views.size(); ++l) {
    const LayerView& v = views[l];
    const std::vector<double>& x = tr.acts.back();
    std::vector<double> z(v.out, 0.0);
    for (int o = 0; o < v.out; ++o) {
      double acc = p.params[v.b_off + o];
      const std::size_t row = v.w_off + static_cast<std::size_t>(o) * v.in;
      for (int i = 0; i < v.in; ++i) acc += p.params[row + i] * x[i];
      z[o] = acc;
    }
    if (l + 1 < views.size()) {
      for (double& u : z) u = std::tanh(u);
    }
    tr.acts.push_back(std::move(z));
  }
  return tr;
}

/// Gradient of the loss with respect to the logits, given probs = softmax
/// (logits / temperature). Returned without the 1/temperature factor; the
/// caller divides once.
std::vector<double> loss_and_logit_grad(const std::vector<double>& probs,
                                        const LossSpec& loss, double* value) {
  const int n = static_cast<int>(probs.size());
  std::vector<double> g(n, 0.0);
  switch (loss.kind) {
    case LossKind::kl_to_target: {
      if (static_cast<int>(loss.target_dist.size()) != n) {
        throw std::invalid_argument(
            "kl_to_target needs a target_dist matching num_actions");
      }
      double kl = 0.0;
      for (int a = 0; a < n; ++a) {
        if (probs[a] > 0.0) {
          kl += probs[a] * (safe_log(probs[a]) - safe_log(loss.target_dist[a]));
        }
      }
      for (int a = 0; a < n; ++a) {
        const double diff =
            probs[a] > 0.0 ? safe_log(probs[a]) - safe_log(loss.target_dist[a])
                           : safe_log(kLogFloor) - safe_log(loss.target_dist[a]);
        g[a] = probs[a] * (diff - kl);
      }
      *value = kl;
      break;
    }
    case LossKind::neg_log_prob_of_action: {
      if (loss.target_action < 0 || loss.target_action >= n) {
        throw std::invalid_argument(
            "neg_log_prob_of_action needs a valid target_action");
      }
      *value = -safe_log(probs[loss.target_action]);
      for (int a = 0; a < n; ++a) g[a] = probs[a];
      g[loss.target_action] -= 1.0;
      break;
    }
    case LossKind::entropy: {
      double h = 0.0;
      for (int a = 0; a < n; ++a) {
        if (probs[a] > 0.0) h -= probs[a] * std::log(probs[a]);
      }
      *value = h;
      for (int a = 0; a < n; ++a) {
        g[a] = probs[a] > 0.0 ? -probs[a] * (std::log(probs[a]) + h) : 0.0;
      }
      break;
    }
  }
  return g;
}

}  // namespace

int Policy::num_actions() const {
  if (kind == PolicyKind::tabular_softmax) {
    return logits.empty() ? 0 : static_cast<int>(logits[0].size());
  }
  return layer_sizes.empty() ? 0 : layer_sizes.back();
}

int Policy::input_dim() const {
  if (kind == PolicyKind::feedforward && !layer_sizes.empty()) {
    return layer_sizes.front();
  }
  return 0;
}

void Policy::validate() const {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("temperature must be > 0, got " +
                                std::to_string(temperature));
  }
  if (kind == PolicyKind::tabular_softmax) {
    if (logits.empty()) throw std::invalid_argument("tabular policy is empty");
    const std::size_t na = logits[0].size();
    if (na == 0) throw std::invalid_argument("tabular policy has no actions");
    for (const auto& row : logits) {
      if (row.size() != na) {
        throw std::invalid_argument("tabular logit rows have unequal lengths");
      }
    }
    return;
  }
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("feedforward policy needs input and output");
  }
  const int hidden = static_cast<int>(layer_sizes.size()) - 2;
  if (hidden > 3) {
    throw std::invalid_argument("feedforward policy allows at most 3 hidden "
                                "layers, got " + std::to_string(hidden));
  }
  for (std::size_t l = 0; l < layer_sizes.size(); ++l) {
    if (layer_sizes[l] <= 0) {
      throw std::invalid_argument("layer_sizes[" + std::to_string(l) +
                                  "] must be positive");
    }
    if (l > 0 && l + 1 < layer_sizes.size() && layer_sizes[l] > 64) {
      throw std::invalid_argument("hidden layers are limited to 64 units");
    }
  }
  if (params.size() != param_count(layer_sizes)) {
    throw std::invalid_argument(
        "params has " + std::to_string(params.size()) + " entries, expected " +
        std::to_string(param_count(layer_sizes)));
  }
}

void to_json(nlohmann::json& j, const Policy& p) {
  j = nlohmann::json{{"format", kPolicyFormat},
                     {"temperature", p.temperature}};
  if (p.kind == PolicyKind::tabular_softmax) {
    j["kind"] = "tabular_softmax";
    j["logits"] = p.logits;
  } else {
    j["kind"] = "feedforward";
    j["layer_sizes"] = p.layer_sizes;
    j["activation"] = "tanh";
    j["params"] = p.params;
  }
}

void from_json(const nlohmann::json& j, Policy& p) {
  const std::string format = j.at("format").get<std::string>();
  if (format != kPolicyFormat) {
    throw std::runtime_error("unsupported policy format tag: " + format);
  }
  const std::string kind = j.at("kind").get<std::string>();
  p.temperature = j.at("temperature").get<double>();
  if (kind == "tabular_softmax") {
    p.kind = PolicyKind::tabular_softmax;
    j.at("logits").get_to(p.logits);
  } else if (kind == "feedforward") {
    p.kind = PolicyKind::feedforward;
    j.at("layer_sizes").get_to(p.layer_sizes);
    j.at("params").get_to(p.params);
    const std::string act = j.value("activation", "tanh");
    if (act != "tanh") {
      throw std::runtime_error("unsupported activation: " + act);
    }
  } else {
    throw std::runtime_error("unknown policy kind: " + kind);
  }
  p.validate();
}

void save_policy(const std::string& path, const Policy& policy) {
  policy.validate();
  nlohmann::json j = policy;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("failed writing policy to " + path);
}

Policy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open policy file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("malformed policy file " + path + ": " +
                             e.what());
  }
  try {
    return j.get<Policy>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("policy file " + path +
                             " is missing fields: " + e.what());
  }
}

std::vector<double> softmax(const std::vector<double>& logits,
                            double temperature) {
  std::vector<double> p(logits.size(), 0.0);
  double top = -1e300;
  for (const double z : logits) top = std::max(top, z / temperature);
  double sum = 0.0;
  for (std::size_t a = 0; a < logits.size(); ++a) {
    p[a] = std::exp(logits[a] / temperature - top);
    sum += p[a];
  }
  for (double& x : p) x /= sum;
  return p;
}

std::vector<double> policy_logits(const Policy& policy,
                                  const ObservationEmbedding& embedding,
                                  const std::vector<double>& obs) {
  if (policy.kind == PolicyKind::tabular_softmax) {
    const int s = embedding.decode_nearest(obs);
    if (s >= static_cast<int>(policy.logits.size())) {
      throw std::invalid_argument("tabular policy has no row for state " +
                                  std::to_string(s));
    }
    return policy.logits[s];
  }
  if (static_cast<int>(obs.size()) != policy.input_dim()) {
    throw std::invalid_argument("observation has dimension " +
                                std::to_string(obs.size()) + ", net expects " +
                                std::to_string(policy.input_dim()));
  }
  return forward(policy, obs).acts.back();
}

std::vector<double> act_probs(const Policy& policy,
                              const ObservationEmbedding& embedding,
                              const std::vector<double>& obs) {
  return softmax(policy_logits(policy, embedding, obs), policy.temperature);
}

std::vector<double> act_probs_state(const Policy& policy,
                                    const ObservationEmbedding& embedding,
                                    int state) {
  return act_probs(policy, embedding, embedding.encode(state));
}

PolicyRows policy_rows(const Policy& policy,
                       const ObservationEmbedding& embedding,
                       int num_states) {
  PolicyRows rows(num_states);
  for (int s = 0; s < num_states; ++s) {
    rows[s] = act_probs_state(policy, embedding, s);
  }
  return rows;
}

GradientBundle input_gradient(const Policy& policy,
                              const std::vector<double>& obs,
                              const LossSpec& loss, bool want_param_grad) {
  if (policy.kind != PolicyKind::feedforward) {
    throw std::invalid_argument(
        "input gradients need a feedforward policy; tabular policies are "
        "piecewise constant (use a discrete budget instead)");
  }
  if (static_cast<int>(obs.size()) != policy.input_dim()) {
    throw std::invalid_argument("observation has dimension " +
                                std::to_string(obs.size()) + ", net expects " +
                                std::to_string(policy.input_dim()));
  }
  const ForwardTrace tr = forward(policy, obs);
  const std::vector<double> probs =
      softmax(tr.acts.back(), policy.temperature);

  GradientBundle out;
  std::vector<double> delta = loss_and_logit_grad(probs, loss, &out.loss);
  for (double& d : delta) d /= policy.temperature;

  const auto views = layer_views(policy.layer_sizes);
  if (want_param_grad) out.param_grad.assign(policy.params.size(), 0.0);
  for (int l = static_cast<int>(views.size()) - 1; l >= 0; --l) {
    const LayerView& v = views[l];
    const std::vector<double>& x = tr.acts[l];
    if (want_param_grad) {
      for (int o = 0; o < v.out; ++o) {
        const std::size_t row = v.w_off + static_cast<std::size_t>(o) * v.in;
        for (int i = 0; i < v.in; ++i) out.param_grad[row + i] = delta[o] * x[i];
        out.param_grad[v.b_off + o] = delta[o];
      }
    }
    std::vector<double> prev(v.in, 0.0);
    for (int i = 0; i < v.in; ++i) {
      double acc = 0.0;
      for (int o = 0; o < v.out; ++o) {
        acc += policy.params[v.w_off + static_cast<std::size_t>(o) * v.in + i] *
               delta[o];
      }
      prev[i] = acc;
    }
    if (l > 0) {
      // tanh derivative via the stored activation.
      for (int i = 0; i < v.in; ++i) prev[i] *= 1.0 - x[i] * x[i];
    }
    delta.swap(prev);
  }
  out.input_grad = std::move(delta);
  return out;
}

Policy make_tabular_from_actions(const std::vector<int>& actions,
                                 int num_actions, double margin) {
  Policy p;
  p.kind = PolicyKind::tabular_softmax;
  p.temperature = 1.0;
  p.logits.assign(actions.size(), std::vector<double>(num_actions, 0.0));
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= num_actions) {
      throw std::invalid_argument("action out of range at state " +
                                  std::to_string(s));
    }
    p.logits[s][actions[s]] = margin;
  }
  return p;
}

Policy make_feedforward(int input_dim, const std::vector<int>& hidden,
                        int num_actions, double temperature, Rng& rng) {
  Policy p;
  p.kind = PolicyKind::feedforward;
  p.temperature = temperature;
  p.layer_sizes.push_back(input_dim);
  for (const int h : hidden) p.layer_sizes.push_back(h);
  p.layer_sizes.push_back(num_actions);
  p.params.assign(param_count(p.layer_sizes), 0.0);
  const auto views = layer_views(p.layer_sizes);
  for (const LayerView& v : views) {
    const double scale = std::sqrt(2.0 / (v.in + v.out));
    for (int o = 0; o < v.out; ++o) {
      const std::size_t row = v.w_off + static_cast<std::size_t>(o) * v.in;
      for (int i = 0; i < v.in; ++i) p.params[row + i] = scale * rng.normal();
      p.params[v.b_off + o] = 0.0;
    }
  }
  p.validate();
  return p;
}

}  // namespace advrl
