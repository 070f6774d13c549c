#include "advrl/experiment.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <nlohmann/json.hpp>

#include "advrl/policy.hpp"

namespace advrl {

namespace {

constexpr const char* kResultsHeader =
    "attack,epsilon,seed,return,beta0,beta1,C,alpha_hat,lemma1_rhs,"
    "lemma1_holds";

std::string attack_method_name(AttackMethod method) {
  return method == AttackMethod::fgsm ? "fgsm" : "pgd";
}

AttackMethod attack_method_from_name(const std::string& name) {
  if (name == "fgsm") return AttackMethod::fgsm;
  if (name == "pgd") return AttackMethod::pgd;
  throw std::invalid_argument("unknown attack method: " + name);
}

std::string timing_rule_name(TimingRule rule) {
  switch (rule) {
    case TimingRule::always: return "always";
    case TimingRule::never: return "never";
    case TimingRule::preference_gap: return "preference_gap";
  }
  return "preference_gap";
}

TimingRule timing_rule_from_name(const std::string& name) {
  if (name == "always") return TimingRule::always;
  if (name == "never") return TimingRule::never;
  if (name == "preference_gap") return TimingRule::preference_gap;
  throw std::invalid_argument("unknown timing rule: " + name);
}

MadFlavor mad_flavor_from_name(const std::string& name) {
  for (const MadFlavor flavor : discrete_flavor_pool()) {
    if (mad_flavor_name(flavor) == name) return flavor;
  }
  throw std::invalid_argument("unknown divergence flavor: " + name);
}

void read_train(const nlohmann::json& j, TrainConfig& c) {
  c.algo = train_algo_from_name(
      j.value("algo", train_algo_name(c.algo)));
  c.episodes = j.value("episodes", c.episodes);
  c.horizon_cap = j.value("horizon_cap", c.horizon_cap);
  c.lr = j.value("lr", c.lr);
  c.critic_lr = j.value("critic_lr", c.critic_lr);
  c.epsilon_explore = j.value("epsilon_explore", c.epsilon_explore);
  c.greedy_margin = j.value("greedy_margin", c.greedy_margin);
  c.seed = j.value("seed", c.seed);
}

nlohmann::json write_train(const TrainConfig& c) {
  return nlohmann::json{{"algo", train_algo_name(c.algo)},
                        {"episodes", c.episodes},
                        {"horizon_cap", c.horizon_cap},
                        {"lr", c.lr},
                        {"critic_lr", c.critic_lr},
                        {"epsilon_explore", c.epsilon_explore},
                        {"greedy_margin", c.greedy_margin},
                        {"seed", c.seed}};
}

std::tuple<std::string, double, std::uint64_t> row_key(const SweepRow& r) {
  return {r.attack, r.epsilon, r.seed};
}

std::string format_row(const SweepRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%s,%.10g,%llu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d",
                r.attack.c_str(), r.epsilon,
                static_cast<unsigned long long>(r.seed), r.return_value,
                r.beta0, r.beta1, r.c_adv, r.alpha_hat, r.lemma1_rhs,
                r.lemma1_holds ? 1 : 0);
  return buf;
}

std::uint64_t fnv1a_64(const std::string& bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (const unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace

Gridworld build_named_world(const std::string& name) {
  if (name == "corridor") return build_corridor_world();
  if (name == "junction_north") return build_junction_world(JunctionPenalty::north);
  if (name == "junction_east") return build_junction_world(JunctionPenalty::east);
  throw std::invalid_argument("unknown world: " + name);
}

bool is_known_world(const std::string& name) {
  return name == "corridor" || name == "junction_north" ||
         name == "junction_east";
}

void ExperimentConfig::validate() const {
  if (!is_known_world(env)) {
    throw std::invalid_argument("env: unknown world '" + env + "'");
  }
  if (epsilons.empty()) {
    throw std::invalid_argument("epsilons: must be non-empty");
  }
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (epsilons[i] < 0.0) {
      throw std::invalid_argument("epsilons: values must be nonnegative");
    }
    if (i > 0 && epsilons[i] <= epsilons[i - 1]) {
      throw std::invalid_argument("epsilons: must be strictly increasing");
    }
  }
  if (seeds.empty()) {
    throw std::invalid_argument("seeds: must be non-empty");
  }
  if (attacks.empty()) {
    throw std::invalid_argument("attacks: must be non-empty");
  }
  std::set<std::string> seen;
  for (const AttackSetting& setting : attacks) {
    if (!seen.insert(attack_kind_name(setting.kind)).second) {
      throw std::invalid_argument("attacks: duplicate kind '" +
                                  attack_kind_name(setting.kind) + "'");
    }
    if (setting.opt.iterations < 1) {
      throw std::invalid_argument("attacks: iterations must be >= 1");
    }
    if (setting.opt.step_size < 0.0) {
      throw std::invalid_argument(
          "attacks: step_size must be >= 0 (0 uses epsilon)");
    }
    if (setting.opt.entropy_weight < 0.0) {
      throw std::invalid_argument("attacks: entropy_weight must be >= 0");
    }
    if (setting.timer.threshold < 0.0 || setting.timer.threshold > 1.0) {
      throw std::invalid_argument("attacks: threshold must lie in [0,1]");
    }
  }
  if (!seen.count("identity")) {
    throw std::invalid_argument(
        "attacks: the identity control must be present");
  }
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json attacks = nlohmann::json::array();
  for (const AttackSetting& a : c.attacks) {
    attacks.push_back(
        {{"kind", attack_kind_name(a.kind)},
         {"method", attack_method_name(a.opt.method)},
         {"iterations", a.opt.iterations},
         {"step_size", a.opt.step_size},
         {"entropy_weight", a.opt.entropy_weight},
         {"best_iterate_tracking", a.opt.best_iterate_tracking},
         {"timing", timing_rule_name(a.timer.rule)},
         {"threshold", a.timer.threshold},
         {"flavor", mad_flavor_name(a.flavor)}});
  }
  j = nlohmann::json{
      {"name", c.name},
      {"env", c.env},
      {"embedding", embedding_kind_name(c.embedding)},
      {"norm", norm_name(c.norm)},
      {"epsilons", c.epsilons},
      {"attacks", attacks},
      {"seeds", c.seeds},
      {"victim_train", write_train(c.victim_train)},
      {"distill",
       {{"hidden", c.distill.hidden},
        {"temperature", c.distill.temperature},
        {"steps", c.distill.steps},
        {"lr", c.distill.lr},
        {"seed", c.distill.seed}}},
      {"deceptive",
       {{"base", write_train(c.deceptive.base)},
        {"ensemble_size", c.deceptive.ensemble_size}}},
      {"output_dir", c.output_dir}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  c.name = j.value("name", c.name);
  c.env = j.value("env", c.env);
  c.embedding = embedding_kind_from_name(
      j.value("embedding", embedding_kind_name(c.embedding)));
  c.norm = norm_from_name(j.value("norm", norm_name(c.norm)));
  if (j.contains("epsilons")) {
    c.epsilons = j.at("epsilons").get<std::vector<double>>();
  }
  if (j.contains("seeds")) {
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  }
  c.attacks.clear();
  for (const nlohmann::json& a : j.value("attacks", nlohmann::json::array())) {
    AttackSetting setting;
    setting.kind = attack_kind_from_name(a.at("kind").get<std::string>());
    setting.opt.method = attack_method_from_name(
        a.value("method", attack_method_name(setting.opt.method)));
    setting.opt.iterations = a.value("iterations", setting.opt.iterations);
    setting.opt.step_size = a.value("step_size", setting.opt.step_size);
    setting.opt.entropy_weight =
        a.value("entropy_weight", setting.opt.entropy_weight);
    setting.opt.best_iterate_tracking =
        a.value("best_iterate_tracking", setting.opt.best_iterate_tracking);
    setting.timer.rule = timing_rule_from_name(
        a.value("timing", timing_rule_name(setting.timer.rule)));
    setting.timer.threshold = a.value("threshold", setting.timer.threshold);
    setting.flavor = mad_flavor_from_name(
        a.value("flavor", mad_flavor_name(setting.flavor)));
    c.attacks.push_back(setting);
  }
  if (j.contains("victim_train")) read_train(j.at("victim_train"), c.victim_train);
  if (j.contains("distill")) {
    const nlohmann::json& d = j.at("distill");
    if (d.contains("hidden")) {
      c.distill.hidden = d.at("hidden").get<std::vector<int>>();
    }
    c.distill.temperature = d.value("temperature", c.distill.temperature);
    c.distill.steps = d.value("steps", c.distill.steps);
    c.distill.lr = d.value("lr", c.distill.lr);
    c.distill.seed = d.value("seed", c.distill.seed);
  }
  if (j.contains("deceptive")) {
    const nlohmann::json& d = j.at("deceptive");
    if (d.contains("base")) read_train(d.at("base"), c.deceptive.base);
    c.deceptive.ensemble_size =
        d.value("ensemble_size", c.deceptive.ensemble_size);
  }
  c.output_dir = j.value("output_dir", c.output_dir);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const nlohmann::json j = nlohmann::json::parse(read_text_file(path));
  ExperimentConfig config = j.get<ExperimentConfig>();
  config.validate();
  return config;
}

SweepContext prepare_sweep(const ExperimentConfig& config) {
  config.validate();
  SweepContext ctx;
  ctx.world = build_named_world(config.env);
  ctx.mdp = ctx.world.to_mdp();
  ctx.embedding = make_embedding(config.embedding, ctx.world);
  ctx.victim_tabular = train_policy(ctx.mdp, config.victim_train).policy;
  ctx.victim_net =
      distill_feedforward(ctx.victim_tabular, ctx.embedding, config.distill);
  ctx.deceptive = train_deceptive(ctx.mdp, config.deceptive).selected;
  ctx.expert_rows = policy_rows(ctx.victim_net, ctx.embedding, ctx.mdp.num_states);
  ctx.deceptive_rows =
      policy_rows(ctx.deceptive, ctx.embedding, ctx.mdp.num_states);
  ctx.return_expert = evaluate_policy(ctx.mdp, ctx.expert_rows).return_value;
  ctx.return_deceptive =
      evaluate_policy(ctx.mdp, ctx.deceptive_rows).return_value;
  ctx.return_min = min_return(ctx.mdp);
  ctx.return_max = max_return(ctx.mdp);
  return ctx;
}

namespace {

struct Cell {
  const AttackSetting* setting;
  double epsilon;
  std::uint64_t seed;
};

/// Runs the given cells against a prepared context; rows and reports come
/// back sorted by (attack, epsilon, seed).
SweepResult run_cells(const ExperimentConfig& config, const SweepContext& ctx,
                      const std::vector<Cell>& cells, std::ostream* log) {
  const EvaluationReport expert_eval =
      evaluate_policy(ctx.mdp, ctx.expert_rows);
  SweepResult result;
  for (const Cell& cell : cells) {
    Attacker attacker;
    attacker.kind = cell.setting->kind;
    attacker.budget = continuous_budget(cell.epsilon, config.norm);
    attacker.opt = cell.setting->opt;
    attacker.timer = cell.setting->timer;
    attacker.flavor = cell.setting->flavor;
    attacker.victim = &ctx.victim_net;
    attacker.embedding = &ctx.embedding;
    attacker.target = &ctx.deceptive;
    attacker.q_table = &expert_eval.q;
    const PolicyRows attacked =
        induced_tabular_policy(attacker, ctx.mdp.num_states, cell.seed);
    const BoundReport report = compute_bound_report(
        ctx.mdp, attacked, ctx.deceptive_rows, ctx.expert_rows,
        ctx.return_min);

    SweepRow row;
    row.attack = attack_kind_name(cell.setting->kind);
    row.epsilon = cell.epsilon;
    row.seed = cell.seed;
    row.return_value = report.return_attacked;
    row.beta0 = report.beta0;
    row.beta1 = report.beta1;
    row.c_adv = report.c_adv;
    row.alpha_hat = report.alpha_hat;
    row.lemma1_rhs = report.bound_rhs;
    row.lemma1_holds = report.bound_holds;
    if (log) *log << format_row(row) << '\n';
    result.rows.push_back(std::move(row));
    result.reports.push_back(report);
  }
  std::vector<std::size_t> order(result.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return row_key(result.rows[a]) < row_key(result.rows[b]);
  });
  SweepResult sorted;
  for (const std::size_t i : order) {
    sorted.rows.push_back(std::move(result.rows[i]));
    sorted.reports.push_back(std::move(result.reports[i]));
  }
  return sorted;
}

std::vector<Cell> all_cells(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  for (const AttackSetting& setting : config.attacks) {
    for (const double epsilon : config.epsilons) {
      for (const std::uint64_t seed : config.seeds) {
        cells.push_back({&setting, epsilon, seed});
      }
    }
  }
  return cells;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  const SweepContext ctx = prepare_sweep(config);
  return run_cells(config, ctx, all_cells(config), log);
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = kResultsHeader;
  out += '\n';
  for (const SweepRow& row : rows) {
    out += format_row(row);
    out += '\n';
  }
  return out;
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) {
    throw std::runtime_error("unexpected results header: " + line);
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream split(line);
    while (std::getline(split, field, ',')) fields.push_back(field);
    if (fields.size() != 10) {
      throw std::runtime_error("malformed results row: " + line);
    }
    SweepRow row;
    row.attack = fields[0];
    row.epsilon = std::strtod(fields[1].c_str(), nullptr);
    row.seed = std::strtoull(fields[2].c_str(), nullptr, 10);
    row.return_value = std::strtod(fields[3].c_str(), nullptr);
    row.beta0 = std::strtod(fields[4].c_str(), nullptr);
    row.beta1 = std::strtod(fields[5].c_str(), nullptr);
    row.c_adv = std::strtod(fields[6].c_str(), nullptr);
    row.alpha_hat = std::strtod(fields[7].c_str(), nullptr);
    row.lemma1_rhs = std::strtod(fields[8].c_str(), nullptr);
    row.lemma1_holds = fields[9] == "1";
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string resolved_output_dir(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  std::string out_dir = config.output_dir;
  if (const char* root = std::getenv("ADVRL_OUT_ROOT");
      root != nullptr && *root != '\0' && !fs::path(out_dir).is_absolute()) {
    out_dir = (fs::path(root) / out_dir).string();
  }
  return out_dir;
}

SweepResult run_sweep_to_dir(const ExperimentConfig& config,
                             std::ostream* log) {
  config.validate();
  namespace fs = std::filesystem;
  const std::string out_dir = resolved_output_dir(config);
  fs::create_directories(out_dir);
  const std::string results_path = out_dir + "/results.csv";

  std::vector<SweepRow> reused;
  if (fs::exists(results_path)) {
    reused = parse_sweep_csv(read_text_file(results_path));
  }
  std::set<std::tuple<std::string, double, std::uint64_t>> have;
  for (const SweepRow& row : reused) have.insert(row_key(row));

  std::vector<Cell> missing;
  std::set<std::tuple<std::string, double, std::uint64_t>> wanted;
  for (const Cell& cell : all_cells(config)) {
    const auto key = std::make_tuple(attack_kind_name(cell.setting->kind),
                                     cell.epsilon, cell.seed);
    wanted.insert(key);
    if (!have.count(key)) missing.push_back(cell);
  }

  SweepResult merged;
  if (reused.empty() && missing.size() == all_cells(config).size()) {
    merged = run_sweep(config, log);
  } else {
    const SweepContext ctx = prepare_sweep(config);
    SweepResult fresh = run_cells(config, ctx, missing, log);
    for (SweepRow& row : reused) {
      if (wanted.count(row_key(row))) merged.rows.push_back(std::move(row));
    }
    merged.rows.insert(merged.rows.end(),
                       std::make_move_iterator(fresh.rows.begin()),
                       std::make_move_iterator(fresh.rows.end()));
    std::sort(merged.rows.begin(), merged.rows.end(),
              [](const SweepRow& a, const SweepRow& b) {
                return row_key(a) < row_key(b);
              });
  }

  write_text_file(results_path, sweep_csv(merged.rows));

  nlohmann::json snapshot = config;
  const std::string snapshot_text = snapshot.dump(2) + "\n";
  write_text_file(out_dir + "/config_snapshot.json", snapshot_text);

  char hash_hex[32];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(fnv1a_64(snapshot.dump())));
  std::vector<std::string> attack_names;
  for (const AttackSetting& a : config.attacks) {
    attack_names.push_back(attack_kind_name(a.kind));
  }
  const nlohmann::json manifest = {{"name", config.name},
                                   {"env", config.env},
                                   {"config_hash", hash_hex},
                                   {"attacks", attack_names},
                                   {"epsilons", config.epsilons},
                                   {"seeds", config.seeds},
                                   {"rows", merged.rows.size()},
                                   {"results", "results.csv"}};
  write_text_file(out_dir + "/manifest.json",
                  manifest.dump(2) + "\n");
  return merged;
}

}  // namespace advrl
