#pragma once

#include <cstddef>
#include <vector>

#include "riskval/mdp.hpp"
#include "riskval/rng.hpp"

namespace riskval {

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

enum class GridAction { Up, Down, Left, Right, Stay };
inline constexpr std::size_t kGridActions = 5;

/// Item-delivery grid world. The agent carries at most one item; walking
/// onto an item picks it up, walking onto the delivery cell with an item
/// delivers it.
struct GridWorldConfig {
  int width = 5;
  int height = 5;
  double spawn_prob = 0.05;
  std::size_t item_lifetime = 8;
  Cell delivery_cell{2, 2};
  double move_reward = -1.0;
  double delivery_reward = 15.0;
  std::size_t episode_length = 50;
  std::size_t carry_capacity = 1;
  /// Cap on items in the world, the carried one included; 0 means no cap.
  std::size_t max_items = 0;
  Cell start_cell{0, 0};

  void validate() const;
  std::size_t num_cells() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
};

struct GridItem {
  Cell cell;
  std::size_t age = 0;
  friend bool operator==(const GridItem&, const GridItem&) = default;
};

struct GridState {
  std::size_t t = 0;
  Cell agent;
  bool carrying = false;
  /// Sorted by cell (row-major) so equal worlds compare equal.
  std::vector<GridItem> items;
  friend bool operator==(const GridState&, const GridState&) = default;
};

struct GridStep {
  GridState next;
  double reward = 0.0;
  bool delivered = false;
};

GridState gridworld_initial_state(const GridWorldConfig& cfg);

/// One step, in order: move (walls clamp, move_reward for every action but
/// Stay), pick up an item on the agent's cell, deliver on the delivery
/// cell, age items and drop those reaching item_lifetime, then spawn on
/// each free cell (not the delivery cell, not the agent's cell, no item)
/// with spawn_prob. Under max_items the spawned set is thinned to a
/// uniformly chosen subset of the allowed size.
GridStep gridworld_step(const GridState& state, GridAction action, const GridWorldConfig& cfg, Rng& rng);

inline constexpr std::size_t kMaxTabularGridStates = 200'000;

/// Number of states of gridworld_tabularize(cfg).
std::size_t gridworld_tabular_state_count(const GridWorldConfig& cfg);

/// Exact FiniteMdp of the single-item variant (max_items = 1) with the
/// episode length as horizon. State ids, with C cells, L = item_lifetime
/// and layer size C (2 + C L):
///   t * layer + c                          carrying, agent on cell c
///   t * layer + C + c                      empty world, agent on c
///   t * layer + 2C + (c C + j) L + age     item on cell j, agent on c
/// for t < episode_length, and one terminal state at episode_length * layer.
/// Cells are numbered row-major, c = y * width + x. Actions follow GridAction.
FiniteMdp gridworld_tabularize(const GridWorldConfig& cfg);

/// Inverse pair for the encoding above; state must satisfy the single-item
/// constraint and t <= episode_length (t = episode_length maps to the terminal).
StateId gridworld_encode(const GridState& state, const GridWorldConfig& cfg);
GridState gridworld_decode(StateId id, const GridWorldConfig& cfg);

/// cfg with spawn_prob scaled by factor.
GridWorldConfig gridworld_shifted(const GridWorldConfig& cfg, double factor);

}  // namespace riskval
