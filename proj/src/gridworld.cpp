#include "advrl/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "advrl/rng.hpp"

namespace advrl {

void Gridworld::build_indices() {
  state_cells.clear();
  cell_state.assign(static_cast<std::size_t>(width) * height, -1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (glyphs[y][x] == '#') continue;
      cell_state[cell_key(x, y)] = static_cast<int>(state_cells.size());
      state_cells.emplace_back(x, y);
    }
  }
}

bool Gridworld::is_obstacle(int x, int y) const {
  return !in_bounds(x, y) || glyphs[y][x] == '#';
}

bool Gridworld::is_terminal_cell(int x, int y) const {
  return terminal_reward.count(cell_key(x, y)) > 0;
}

int Gridworld::state_at(int x, int y) const {
  if (!in_bounds(x, y)) return -1;
  return cell_state[cell_key(x, y)];
}

int Gridworld::gate_state() const {
  if (gate_x < 0) return -1;
  return state_at(gate_x, gate_y);
}

std::pair<int, int> Gridworld::step_cell(int x, int y, int a) const {
  const auto it = allowed.find(cell_key(x, y));
  if (it != allowed.end() && !it->second[a]) return {x, y};
  const int nx = x + kActionDx[a];
  const int ny = y + kActionDy[a];
  if (is_obstacle(nx, ny)) return {x, y};
  return {nx, ny};
}

MdpSpec Gridworld::to_mdp() const {
  MdpSpec mdp;
  mdp.num_states = num_states();
  mdp.num_actions = kNumGridActions;
  mdp.gamma = gamma;
  mdp.transition.assign(
      mdp.num_states,
      std::vector<std::vector<double>>(
          kNumGridActions, std::vector<double>(mdp.num_states, 0.0)));
  mdp.reward.assign(mdp.num_states,
                    std::vector<double>(kNumGridActions, 0.0));
  mdp.initial_dist.assign(mdp.num_states, 0.0);
  mdp.terminal.assign(mdp.num_states, 0);

  for (int s = 0; s < mdp.num_states; ++s) {
    const auto [x, y] = state_cells[s];
    if (is_terminal_cell(x, y)) {
      mdp.terminal[s] = 1;
      for (int a = 0; a < kNumGridActions; ++a) mdp.transition[s][a][s] = 1.0;
      continue;
    }
    for (int a = 0; a < kNumGridActions; ++a) {
      const auto [nx, ny] = step_cell(x, y, a);
      const int t = state_at(nx, ny);
      mdp.transition[s][a][t] = 1.0;
      const auto it = terminal_reward.find(cell_key(nx, ny));
      if (it != terminal_reward.end()) mdp.reward[s][a] = it->second;
    }
  }
  mdp.initial_dist[start_state()] = 1.0;
  mdp.validate();
  return mdp;
}

std::string Gridworld::render_ascii() const {
  std::string out;
  for (int y = 0; y < height; ++y) {
    out += glyphs[y];
    out += '\n';
  }
  return out;
}

Gridworld build_corridor_world() {
  Gridworld w;
  w.width = 4;
  w.height = 4;
  w.glyphs = {
      "..#R",
      ".G..",
      "..#X",
      "....",
  };
  w.terminal_reward[w.cell_key(3, 0)] = 1.0;
  w.terminal_reward[w.cell_key(3, 2)] = -1.0;
  w.start_x = 0;
  w.start_y = 0;
  w.gate_x = 1;
  w.gate_y = 1;
  // The two west columns only allow right and down, funneling the start into
  // the gate and keeping the -1 reachable from the diverted region only by a
  // strictly longer path.
  for (int x = 0; x <= 1; ++x) {
    for (int y = 0; y < 4; ++y) {
      w.allowed[w.cell_key(x, y)] = {false, true, true, false};
    }
  }
  w.build_indices();
  return w;
}

Gridworld build_junction_world(JunctionPenalty penalty) {
  Gridworld w;
  w.width = 4;
  w.height = 4;
  const bool north_pocket = penalty == JunctionPenalty::north;
  w.glyphs = {
      north_pocket ? ".#X#" : ".#Y#",
      north_pocket ? "..GY" : "..GX",
      "..R.",
      "....",
  };
  const double north = north_pocket ? -1.0 : 0.0;
  const double east = north_pocket ? 0.0 : -1.0;
  w.terminal_reward[w.cell_key(2, 0)] = north;
  w.terminal_reward[w.cell_key(3, 1)] = east;
  w.terminal_reward[w.cell_key(2, 2)] = 1.0;
  w.start_x = 0;
  w.start_y = 1;
  w.gate_x = 2;
  w.gate_y = 1;
  w.build_indices();
  return w;
}

namespace {

/// True when the goal cell can be entered from the start cell.
bool goal_reachable(const Gridworld& w, int gx, int gy) {
  std::vector<char> seen(static_cast<std::size_t>(w.width) * w.height, 0);
  std::queue<std::pair<int, int>> frontier;
  frontier.emplace(w.start_x, w.start_y);
  seen[w.cell_key(w.start_x, w.start_y)] = 1;
  while (!frontier.empty()) {
    const auto [x, y] = frontier.front();
    frontier.pop();
    if (x == gx && y == gy) return true;
    if (w.is_terminal_cell(x, y)) continue;  // terminals absorb
    for (int a = 0; a < kNumGridActions; ++a) {
      const auto [nx, ny] = w.step_cell(x, y, a);
      if (!seen[w.cell_key(nx, ny)]) {
        seen[w.cell_key(nx, ny)] = 1;
        frontier.emplace(nx, ny);
      }
    }
  }
  return false;
}

}  // namespace

Gridworld build_random_gridworld(const RandomGridworldConfig& config) {
  if (config.width < 2 || config.height < 2) {
    throw std::invalid_argument("random gridworld needs width, height >= 2");
  }
  if (config.obstacle_density < 0.0 || config.obstacle_density > 0.4) {
    throw std::invalid_argument(
        "obstacle_density must lie in [0, 0.4], got " +
        std::to_string(config.obstacle_density));
  }
  Rng rng(config.seed);
  const int cells = config.width * config.height;
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    Gridworld w;
    w.width = config.width;
    w.height = config.height;
    w.gamma = config.gamma;
    w.glyphs.assign(config.height, std::string(config.width, '.'));
    for (int y = 0; y < config.height; ++y) {
      for (int x = 0; x < config.width; ++x) {
        if (rng.uniform01() < config.obstacle_density) w.glyphs[y][x] = '#';
      }
    }
    // Draw distinct free cells for goal, penalty and start.
    std::vector<int> free;
    for (int c = 0; c < cells; ++c) {
      if (w.glyphs[c / config.width][c % config.width] != '#') free.push_back(c);
    }
    if (free.size() < 3) continue;
    const int goal = free[rng.uniform_int(static_cast<int>(free.size()))];
    int penalty = goal;
    while (penalty == goal) {
      penalty = free[rng.uniform_int(static_cast<int>(free.size()))];
    }
    int start = goal;
    while (start == goal || start == penalty) {
      start = free[rng.uniform_int(static_cast<int>(free.size()))];
    }
    const int gx = goal % config.width, gy = goal / config.width;
    const int px = penalty % config.width, py = penalty / config.width;
    w.glyphs[gy][gx] = 'R';
    w.glyphs[py][px] = 'X';
    w.terminal_reward[goal] = 1.0;
    w.terminal_reward[penalty] = -1.0;
    w.start_x = start % config.width;
    w.start_y = start / config.width;
    if (!goal_reachable(w, gx, gy)) continue;
    w.build_indices();
    return w;
  }
  throw std::runtime_error("no valid random gridworld after " +
                           std::to_string(config.max_attempts) +
                           " attempts (seed " + std::to_string(config.seed) +
                           ")");
}

std::vector<int> optimal_greedy_actions(const MdpSpec& mdp) {
  const int n = mdp.num_states;
  const int na = mdp.num_actions;
  std::vector<double> v(n, 0.0), next(n, 0.0);
  for (int it = 0; it < 100000; ++it) {
    double delta = 0.0;
    for (int s = 0; s < n; ++s) {
      double best = -1e300;
      for (int a = 0; a < na; ++a) {
        double q = mdp.reward[s][a];
        for (int t = 0; t < n; ++t) {
          const double p = mdp.transition[s][a][t];
          if (p != 0.0) q += mdp.gamma * p * v[t];
        }
        best = std::max(best, q);
      }
      next[s] = best;
      delta = std::max(delta, std::abs(next[s] - v[s]));
    }
    v.swap(next);
    if (delta < 1e-14) break;
  }
  std::vector<int> actions(n, 0);
  for (int s = 0; s < n; ++s) {
    double best = -1e300;
    int arg = 0;
    for (int a = 0; a < na; ++a) {
      double q = mdp.reward[s][a];
      for (int t = 0; t < n; ++t) {
        const double p = mdp.transition[s][a][t];
        if (p != 0.0) q += mdp.gamma * p * v[t];
      }
      if (q > best + 1e-12) {
        best = q;
        arg = a;
      }
    }
    actions[s] = arg;
  }
  return actions;
}

}  // namespace advrl
