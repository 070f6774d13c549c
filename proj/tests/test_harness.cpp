#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advrl/experiment.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace advrl;
namespace fs = std::filesystem;

namespace {

/// Six-cell corridor sweep that still exercises training, distillation and
/// the optimized attack path.
ExperimentConfig mini_config() {
  ExperimentConfig c;
  c.name = "mini";
  c.env = "corridor";
  c.embedding = EmbeddingKind::coordinate;
  c.norm = Norm::l2;
  c.epsilons = {0.0, 0.2};
  c.seeds = {0};

  AttackSetting identity;
  identity.kind = AttackKind::identity;
  AttackSetting random_noise;
  random_noise.kind = AttackKind::random;
  AttackSetting two_stage;
  two_stage.kind = AttackKind::two_stage;
  two_stage.opt.method = AttackMethod::pgd;
  two_stage.opt.iterations = 3;
  two_stage.opt.entropy_weight = 1.0;
  c.attacks = {identity, random_noise, two_stage};

  c.deceptive.base.seed = 100;
  c.deceptive.ensemble_size = 3;
  c.distill.hidden = {16, 16};
  c.output_dir = (fs::temp_directory_path() / "advrl_mini_out").string();
  return c;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("named worlds") {
  CHECK(is_known_world("corridor"));
  CHECK(is_known_world("junction_north"));
  CHECK(is_known_world("junction_east"));
  CHECK(!is_known_world("mesa"));
  CHECK(build_named_world("corridor").num_states() == 14);
  CHECK_THROWS_AS(build_named_world("mesa"), std::invalid_argument);
}

TEST_CASE("config validation names the offending field") {
  const ExperimentConfig good = mini_config();
  CHECK_NOTHROW(good.validate());

  const auto expect_reject = [&](auto&& mutate, const char* needle) {
    ExperimentConfig bad = good;
    mutate(bad);
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains(needle),
                         std::invalid_argument);
  };

  expect_reject([](ExperimentConfig& c) { c.env = "mesa"; }, "env");
  expect_reject([](ExperimentConfig& c) { c.epsilons.clear(); }, "epsilons");
  expect_reject([](ExperimentConfig& c) { c.epsilons = {-0.1}; }, "epsilons");
  expect_reject([](ExperimentConfig& c) { c.epsilons = {0.2, 0.1}; },
                "epsilons");
  expect_reject([](ExperimentConfig& c) { c.seeds.clear(); }, "seeds");
  expect_reject([](ExperimentConfig& c) { c.attacks.clear(); }, "attacks");
  expect_reject(
      [](ExperimentConfig& c) { c.attacks.push_back(c.attacks.back()); },
      "duplicate");
  expect_reject(
      [](ExperimentConfig& c) { c.attacks.erase(c.attacks.begin()); },
      "identity");
  expect_reject([](ExperimentConfig& c) { c.attacks[1].opt.iterations = 0; },
                "iterations");
  expect_reject([](ExperimentConfig& c) { c.attacks[1].opt.step_size = -1.0; },
                "step_size");
  expect_reject(
      [](ExperimentConfig& c) { c.attacks[1].opt.entropy_weight = -0.5; },
      "entropy_weight");
  expect_reject([](ExperimentConfig& c) { c.attacks[1].timer.threshold = 2.0; },
                "threshold");

  SUBCASE("an all-zero epsilon grid is allowed") {
    ExperimentConfig zero = good;
    zero.epsilons = {0.0};
    CHECK_NOTHROW(zero.validate());
  }
}

TEST_CASE("config json round trip") {
  const ExperimentConfig config = mini_config();
  nlohmann::json j = config;
  const ExperimentConfig back = j.get<ExperimentConfig>();
  nlohmann::json j2 = back;
  CHECK(j.dump(2) == j2.dump(2));
  CHECK(back.attacks.size() == config.attacks.size());
  CHECK(back.epsilons == config.epsilons);
  CHECK(back.norm == config.norm);
  CHECK(back.distill.hidden == config.distill.hidden);

  SUBCASE("a missing config file reports its path") {
    CHECK_THROWS_WITH_AS(load_experiment_config("/nonexistent/advrl.json"),
                         doctest::Contains("/nonexistent/advrl.json"),
                         std::runtime_error);
  }

  SUBCASE("the shipped configs load and validate") {
    const fs::path root = ADVRL_SOURCE_DIR;
    for (const char* name : {"corridor_sweep.json", "junction_sweep.json"}) {
      const ExperimentConfig shipped =
          load_experiment_config((root / "configs" / name).string());
      CHECK(shipped.attacks.size() == 7);
      CHECK(shipped.epsilons.size() == 5);
    }
  }
}

TEST_CASE("sweep csv format") {
  std::vector<SweepRow> rows(2);
  rows[0].attack = "identity";
  rows[0].epsilon = 0.1;
  rows[0].seed = 3;
  rows[0].return_value = 0.5;
  rows[0].lemma1_holds = true;
  rows[1].attack = "mad";
  rows[1].epsilon = 0.35;
  rows[1].seed = 7;
  rows[1].return_value = -0.1234567891234;
  rows[1].beta0 = 1.5;
  rows[1].beta1 = 1e300;
  rows[1].c_adv = 0.25;
  rows[1].alpha_hat = 0.01;
  rows[1].lemma1_rhs = 12.5;
  rows[1].lemma1_holds = true;

  const std::string csv = sweep_csv(rows);
  CHECK(csv.rfind("attack,epsilon,seed,return,beta0,beta1,C,alpha_hat,"
                  "lemma1_rhs,lemma1_holds",
                  0) == 0);

  SUBCASE("parse inverts the writer") {
    const std::vector<SweepRow> back = parse_sweep_csv(csv);
    REQUIRE(back.size() == 2);
    CHECK(back[1].attack == "mad");
    CHECK(back[1].seed == 7);
    CHECK(back[1].beta1 == 1e300);
    CHECK(sweep_csv(back) == csv);  // fixed-point through one round trip
  }

  SUBCASE("a wrong header is rejected") {
    CHECK_THROWS_WITH_AS(parse_sweep_csv("attack,epsilon\nidentity,0.1\n"),
                         doctest::Contains("header"), std::runtime_error);
  }

  SUBCASE("a short row is rejected") {
    std::string broken = csv;
    broken += "identity,0.1,0\n";
    CHECK_THROWS_WITH_AS(parse_sweep_csv(broken),
                         doctest::Contains("malformed"), std::runtime_error);
  }
}

TEST_CASE("sweeps are exact, ordered and reproducible") {
  const ExperimentConfig config = mini_config();
  const SweepContext context = prepare_sweep(config);
  const SweepResult result = run_sweep(config, nullptr);

  REQUIRE(result.rows.size() == 6);  // 3 attacks x 2 epsilons x 1 seed
  REQUIRE(result.reports.size() == result.rows.size());

  SUBCASE("rows are sorted by attack, epsilon, seed") {
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
      const SweepRow& a = result.rows[i - 1];
      const SweepRow& b = result.rows[i];
      const auto key = [](const SweepRow& r) {
        return std::make_tuple(r.attack, r.epsilon, r.seed);
      };
      CHECK(key(a) < key(b));
    }
  }

  SUBCASE("identity rows carry the clean return at every epsilon") {
    int identity_rows = 0;
    for (const SweepRow& row : result.rows) {
      if (row.attack != "identity") continue;
      ++identity_rows;
      CHECK(row.return_value == context.return_expert);
    }
    CHECK(identity_rows == 2);
  }

  SUBCASE("a zero epsilon makes every attack the no-noise control") {
    for (const SweepRow& row : result.rows) {
      if (row.epsilon == 0.0) {
        CHECK(row.return_value ==
              doctest::Approx(context.return_expert).epsilon(1e-12));
      }
    }
  }

  SUBCASE("every cell satisfies the return bound when beta1 is finite") {
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
      CHECK(result.rows[i].lemma1_holds);
      CHECK(result.reports[i].bound_holds);
      CHECK(result.reports[i].tv_holds);
      CHECK(result.reports[i].threshold_consistent);
    }
  }

  SUBCASE("identical configs produce identical bytes") {
    const SweepResult again = run_sweep(config, nullptr);
    CHECK(sweep_csv(again.rows) == sweep_csv(result.rows));
  }
}

TEST_CASE("sweep directories") {
  ExperimentConfig config = mini_config();
  TempDir dir("advrl_dir_test");
  config.output_dir = dir.path.string();

  std::ostringstream log;
  const SweepResult fresh = run_sweep_to_dir(config, &log);
  REQUIRE(fs::exists(dir.path / "results.csv"));
  REQUIRE(fs::exists(dir.path / "config_snapshot.json"));
  REQUIRE(fs::exists(dir.path / "manifest.json"));

  const std::string first_csv = read_file(dir.path / "results.csv");
  const std::string first_manifest = read_file(dir.path / "manifest.json");
  CHECK(first_csv == sweep_csv(fresh.rows));

  SUBCASE("a rerun changes nothing") {
    run_sweep_to_dir(config, nullptr);
    CHECK(read_file(dir.path / "results.csv") == first_csv);
    CHECK(read_file(dir.path / "manifest.json") == first_manifest);
  }

  SUBCASE("a truncated results file is resumed to the same bytes") {
    // Keep the header and the first two rows; the sweep must recompute the
    // missing cells and merge back to the identical file.
    std::istringstream in(first_csv);
    std::string line, kept;
    for (int i = 0; i < 3 && std::getline(in, line); ++i) {
      kept += line + "\n";
    }
    std::ofstream(dir.path / "results.csv", std::ios::binary) << kept;
    const SweepResult resumed = run_sweep_to_dir(config, nullptr);
    CHECK(read_file(dir.path / "results.csv") == first_csv);
    CHECK(sweep_csv(resumed.rows) == first_csv);
  }

  SUBCASE("a foreign key in the results file is dropped on merge") {
    std::string extended = first_csv;
    extended += "mad,0.9,55,0,0,0,0,0,0,1\n";
    std::ofstream(dir.path / "results.csv", std::ios::binary) << extended;
    run_sweep_to_dir(config, nullptr);
    CHECK(read_file(dir.path / "results.csv") == first_csv);
  }

  SUBCASE("the manifest pins the config hash and row count") {
    const nlohmann::json manifest =
        nlohmann::json::parse(first_manifest);
    CHECK(manifest.contains("config_hash"));
    CHECK(manifest.at("rows").get<int>() == 6);
  }
}

TEST_CASE("output root override") {
  ExperimentConfig config = mini_config();

  SUBCASE("relative directories move under the root") {
    config.output_dir = "nested/out";
    REQUIRE(setenv("ADVRL_OUT_ROOT", "/tmp/advrl_root", 1) == 0);
    CHECK(resolved_output_dir(config) == "/tmp/advrl_root/nested/out");
    REQUIRE(unsetenv("ADVRL_OUT_ROOT") == 0);
    CHECK(resolved_output_dir(config) == "nested/out");
  }

  SUBCASE("absolute directories ignore the root") {
    config.output_dir = "/tmp/advrl_abs";
    REQUIRE(setenv("ADVRL_OUT_ROOT", "/tmp/advrl_root", 1) == 0);
    CHECK(resolved_output_dir(config) == "/tmp/advrl_abs");
    REQUIRE(unsetenv("ADVRL_OUT_ROOT") == 0);
  }

  SUBCASE("an empty root is ignored") {
    config.output_dir = "nested/out";
    REQUIRE(setenv("ADVRL_OUT_ROOT", "", 1) == 0);
    CHECK(resolved_output_dir(config) == "nested/out");
    REQUIRE(unsetenv("ADVRL_OUT_ROOT") == 0);
  }

  SUBCASE("the sweep writes under the root") {
    TempDir root("advrl_root_test");
    config.output_dir = "sub/run";
    REQUIRE(setenv("ADVRL_OUT_ROOT", root.path.string().c_str(), 1) == 0);
    run_sweep_to_dir(config, nullptr);
    REQUIRE(unsetenv("ADVRL_OUT_ROOT") == 0);
    CHECK(fs::exists(root.path / "sub" / "run" / "results.csv"));
  }
}
