#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "advrl/mdp.hpp"

namespace advrl {

/// Action indexing shared by every gridworld: a blocked or disallowed move
/// leaves the agent in place.
inline constexpr int kUp = 0;
inline constexpr int kRight = 1;
inline constexpr int kDown = 2;
inline constexpr int kLeft = 3;
inline constexpr int kNumGridActions = 4;
inline constexpr std::array<int, 4> kActionDx = {0, 1, 0, -1};
inline constexpr std::array<int, 4> kActionDy = {-1, 0, 1, 0};
inline constexpr std::array<const char*, 4> kActionNames = {"up", "right",
                                                            "down", "left"};

/// Rectangular gridworld. Cells are addressed (x, y) with x the column and
/// y the row, (0,0) top left. States are the non-obstacle cells in row-major
/// order. Entering a cell pays that cell's terminal reward (0 elsewhere);
/// terminal states absorb with zero reward.
///
/// Render glyphs: '#' obstacle, 'G' gate (the decision cell the certificates
/// reason about), 'R' the +1 terminal, 'X' the penalty terminal, 'Y' the
/// second pocket terminal, '.' anything else.
struct Gridworld {
  int width = 0;
  int height = 0;
  std::vector<std::string> glyphs;               // glyphs[y][x]
  std::map<int, double> terminal_reward;         // key y*width+x
  std::map<int, std::array<bool, 4>> allowed;    // restricted cells only
  int start_x = 0;
  int start_y = 0;
  int gate_x = -1;
  int gate_y = -1;
  double gamma = 0.9;

  // Derived by build_indices().
  std::vector<std::pair<int, int>> state_cells;  // state -> (x, y)
  std::vector<int> cell_state;                   // y*width+x -> state or -1

  /// Rebuilds the state index tables from the glyph grid. Builders call this;
  /// call it again after editing glyphs by hand.
  void build_indices();

  int num_states() const { return static_cast<int>(state_cells.size()); }
  int cell_key(int x, int y) const { return y * width + x; }
  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  bool is_obstacle(int x, int y) const;
  bool is_terminal_cell(int x, int y) const;
  /// State index at (x, y), or -1 for obstacles and out-of-bounds cells.
  int state_at(int x, int y) const;
  int start_state() const { return state_at(start_x, start_y); }
  /// Gate state index, or -1 when the world has no marked gate.
  int gate_state() const;
  /// Destination cell of action a from (x, y); blocked, out-of-bounds and
  /// disallowed moves stay in place.
  std::pair<int, int> step_cell(int x, int y, int a) const;

  /// Explicit tabular MDP: deterministic moves, point-mass initial
  /// distribution on the start cell, terminals self-loop with zero reward.
  MdpSpec to_mdp() const;

  /// One text row per grid row, newline-terminated, using the glyph legend
  /// above.
  std::string render_ascii() const;
};

/// 4x4 world built so that the worst-case adversary must leave the victim's
/// preferred action untouched at the gate. A restricted corridor funnels the
/// start into the gate; past the gate the corridor forks to the +1 and -1
/// terminals, and the -1 is reachable from the divertible region only by a
/// strictly longer path. Used by the certificate showing every full-time
/// untargeted attack is suboptimal here.
Gridworld build_corridor_world();

/// Which pocket of the junction world carries the -1 terminal.
enum class JunctionPenalty { north, east };

/// 4x4 world with a gate hub whose north and east neighbors are
/// terminal-sealed pockets and whose south neighbor is the +1 terminal. The
/// -1 sits in the pocket selected by `penalty`; the other pocket absorbs with
/// reward 0. Used by the certificate showing every strategically-timed
/// untargeted attack is suboptimal on one of the two variants.
Gridworld build_junction_world(JunctionPenalty penalty);

/// Parameters for randomized worlds used in the inclusion-chain checks.
struct RandomGridworldConfig {
  int width = 5;
  int height = 5;
  double obstacle_density = 0.25;  // must be <= 0.4
  double gamma = 0.9;
  std::uint64_t seed = 0;
  int max_attempts = 100;
};

/// Random world with exactly one +1 and one -1 terminal and a start cell
/// from which the +1 terminal is reachable (checked by breadth-first
/// search). Rejection-samples layouts; throws std::runtime_error if no valid
/// layout is found within max_attempts.
Gridworld build_random_gridworld(const RandomGridworldConfig& config);

/// Greedy action per state of the optimal policy, computed by value
/// iteration to fixed point and exact argmax (ties to the lowest action
/// index). Exposed because victims and deceptive references are derived
/// from it in several places.
std::vector<int> optimal_greedy_actions(const MdpSpec& mdp);

}  // namespace advrl
