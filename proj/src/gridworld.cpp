#include "riskval/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "riskval/errors.hpp"

namespace riskval {
namespace {

std::size_t cell_index(Cell c, const GridWorldConfig& cfg) {
  return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(cfg.width) + static_cast<std::size_t>(c.x);
}

Cell cell_at(std::size_t index, const GridWorldConfig& cfg) {
  const auto w = static_cast<std::size_t>(cfg.width);
  return {static_cast<int>(index % w), static_cast<int>(index / w)};
}

bool inside(Cell c, const GridWorldConfig& cfg) { return c.x >= 0 && c.y >= 0 && c.x < cfg.width && c.y < cfg.height; }

void sort_items(std::vector<GridItem>& items, const GridWorldConfig& cfg) {
  std::sort(items.begin(), items.end(),
            [&](const GridItem& a, const GridItem& b) { return cell_index(a.cell, cfg) < cell_index(b.cell, cfg); });
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)), n - 1);
}

/// Everything before spawning; deterministic.
struct PreSpawn {
  GridState state;
  double reward = 0.0;
  bool delivered = false;
  std::vector<Cell> free_cells;
  std::size_t allowed = 0;  ///< how many items may still appear
};

PreSpawn advance(const GridState& s, GridAction action, const GridWorldConfig& cfg) {
  PreSpawn out{s, 0.0, false, {}, 0};
  GridState& n = out.state;
  Cell target = s.agent;
  switch (action) {
    case GridAction::Up: --target.y; break;
    case GridAction::Down: ++target.y; break;
    case GridAction::Left: --target.x; break;
    case GridAction::Right: ++target.x; break;
    case GridAction::Stay: break;
  }
  if (action != GridAction::Stay) out.reward += cfg.move_reward;
  if (inside(target, cfg)) n.agent = target;

  if (!n.carrying) {
    const auto it = std::find_if(n.items.begin(), n.items.end(), [&](const GridItem& i) { return i.cell == n.agent; });
    if (it != n.items.end()) {
      n.items.erase(it);
      n.carrying = true;
    }
  }
  if (n.carrying && n.agent == cfg.delivery_cell) {
    n.carrying = false;
    out.reward += cfg.delivery_reward;
    out.delivered = true;
  }
  for (GridItem& item : n.items) ++item.age;
  std::erase_if(n.items, [&](const GridItem& i) { return i.age >= cfg.item_lifetime; });
  ++n.t;

  for (std::size_t c = 0; c < cfg.num_cells(); ++c) {
    const Cell cell = cell_at(c, cfg);
    if (cell == cfg.delivery_cell || cell == n.agent) continue;
    if (std::any_of(n.items.begin(), n.items.end(), [&](const GridItem& i) { return i.cell == cell; })) continue;
    out.free_cells.push_back(cell);
  }
  const std::size_t present = n.items.size() + (n.carrying ? 1 : 0);
  out.allowed = cfg.max_items == 0 ? out.free_cells.size() : (present >= cfg.max_items ? 0 : cfg.max_items - present);
  return out;
}

void check_tabular_state(const GridState& s, const GridWorldConfig& cfg) {
  if (s.t > cfg.episode_length) throw InputError("grid state time beyond the episode length");
  if (!inside(s.agent, cfg)) throw InputError("agent outside the grid");
  if (s.items.size() + (s.carrying ? 1 : 0) > 1) throw InputError("the tabular encoding holds at most one item");
  for (const GridItem& i : s.items) {
    if (!inside(i.cell, cfg) || i.age >= cfg.item_lifetime) throw InputError("item outside the encoding range");
  }
}

}  // namespace

void GridWorldConfig::validate() const {
  if (width <= 0 || height <= 0) throw InputError("grid dimensions must be positive");
  if (!(spawn_prob >= 0.0 && spawn_prob <= 1.0)) throw InputError("spawn_prob must lie in [0, 1]");
  if (item_lifetime == 0) throw InputError("item_lifetime must be positive");
  if (!inside(delivery_cell, *this)) throw InputError("delivery cell outside the grid");
  if (!inside(start_cell, *this)) throw InputError("start cell outside the grid");
  if (episode_length == 0) throw InputError("episode_length must be positive");
  if (carry_capacity != 1) throw InputError("carry capacity is fixed at 1");
  if (!std::isfinite(move_reward) || !std::isfinite(delivery_reward)) throw InputError("rewards must be finite");
}

GridState gridworld_initial_state(const GridWorldConfig& cfg) {
  cfg.validate();
  return {0, cfg.start_cell, false, {}};
}

GridStep gridworld_step(const GridState& state, GridAction action, const GridWorldConfig& cfg, Rng& rng) {
  if (state.t >= cfg.episode_length) throw InputError("the episode has already ended");
  PreSpawn pre = advance(state, action, cfg);
  std::vector<Cell> spawned;
  for (const Cell& c : pre.free_cells) {
    if (uniform01(rng) < cfg.spawn_prob) spawned.push_back(c);
  }
  if (spawned.size() > pre.allowed) {
    for (std::size_t i = 0; i < pre.allowed; ++i) {
      std::swap(spawned[i], spawned[i + uniform_index(rng, spawned.size() - i)]);
    }
    spawned.resize(pre.allowed);
  }
  for (const Cell& c : spawned) pre.state.items.push_back({c, 0});
  sort_items(pre.state.items, cfg);
  return {std::move(pre.state), pre.reward, pre.delivered};
}

std::size_t gridworld_tabular_state_count(const GridWorldConfig& cfg) {
  const std::size_t C = cfg.num_cells();
  return cfg.episode_length * C * (2 + C * cfg.item_lifetime) + 1;
}

StateId gridworld_encode(const GridState& s, const GridWorldConfig& cfg) {
  check_tabular_state(s, cfg);
  const std::size_t C = cfg.num_cells();
  const std::size_t L = cfg.item_lifetime;
  const std::size_t layer = C * (2 + C * L);
  if (s.t == cfg.episode_length) return cfg.episode_length * layer;
  const std::size_t c = cell_index(s.agent, cfg);
  std::size_t local;
  if (s.carrying) {
    local = c;
  } else if (s.items.empty()) {
    local = C + c;
  } else {
    local = 2 * C + (c * C + cell_index(s.items.front().cell, cfg)) * L + s.items.front().age;
  }
  return s.t * layer + local;
}

GridState gridworld_decode(StateId id, const GridWorldConfig& cfg) {
  const std::size_t C = cfg.num_cells();
  const std::size_t L = cfg.item_lifetime;
  const std::size_t layer = C * (2 + C * L);
  if (id > cfg.episode_length * layer) throw InputError("state id outside the grid-world encoding");
  GridState s;
  s.t = id / layer;
  if (s.t == cfg.episode_length) {
    s.agent = cfg.start_cell;
    return s;
  }
  std::size_t local = id % layer;
  if (local < C) {
    s.agent = cell_at(local, cfg);
    s.carrying = true;
  } else if (local < 2 * C) {
    s.agent = cell_at(local - C, cfg);
  } else {
    local -= 2 * C;
    const std::size_t age = local % L;
    const std::size_t pair = local / L;
    s.agent = cell_at(pair / C, cfg);
    s.items.push_back({cell_at(pair % C, cfg), age});
  }
  return s;
}

FiniteMdp gridworld_tabularize(const GridWorldConfig& base) {
  base.validate();
  GridWorldConfig cfg = base;
  cfg.max_items = 1;
  const std::size_t count = gridworld_tabular_state_count(cfg);
  if (count > kMaxTabularGridStates) {
    throw CapacityError("tabular grid world needs " + std::to_string(count) + " states (limit " +
                        std::to_string(kMaxTabularGridStates) +
                        "); reduce width * height, item_lifetime or episode_length");
  }
  const std::size_t terminal = count - 1;
  MdpBuilder builder(count, kGridActions, cfg.episode_length, gridworld_encode(gridworld_initial_state(cfg), cfg));
  builder.terminal(terminal);
  for (StateId id = 0; id < terminal; ++id) {
    const GridState s = gridworld_decode(id, cfg);
    for (std::size_t a = 0; a < kGridActions; ++a) {
      const PreSpawn pre = advance(s, static_cast<GridAction>(a), cfg);
      const StateId quiet = gridworld_encode(pre.state, cfg);
      if (pre.allowed == 0 || pre.free_cells.empty() || cfg.spawn_prob == 0.0 || pre.state.t == cfg.episode_length) {
        builder.add(id, a, quiet, 1.0, pre.reward);
        continue;
      }
      // At most one item may appear: by symmetry each free cell is equally likely.
      const double m = static_cast<double>(pre.free_cells.size());
      const double any = -std::expm1(m * std::log1p(-cfg.spawn_prob));
      if (any < 1.0) builder.add(id, a, quiet, 1.0 - any, pre.reward);
      for (const Cell& c : pre.free_cells) {
        GridState next = pre.state;
        next.items.push_back({c, 0});
        builder.add(id, a, gridworld_encode(next, cfg), any / m, pre.reward);
      }
    }
  }
  return builder.build();
}

GridWorldConfig gridworld_shifted(const GridWorldConfig& cfg, double factor) {
  const double p = cfg.spawn_prob * factor;
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("shifted spawn probability leaves [0, 1]");
  GridWorldConfig out = cfg;
  out.spawn_prob = p;
  return out;
}

}  // namespace riskval
