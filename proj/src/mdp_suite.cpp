#include "riskval/mdp_suite.hpp"

#include <algorithm>
#include <numeric>

#include "riskval/errors.hpp"
#include "riskval/rng.hpp"

namespace riskval {

FiniteMdp random_layered_mdp(std::uint64_t seed, const LayeredMdpShape& shape) {
  if (shape.layers == 0 || shape.width == 0 || shape.actions == 0) throw InputError("empty MDP shape");
  if (shape.branching == 0 || shape.branching > shape.width) throw InputError("branching must lie in [1, width]");
  Rng rng = make_rng({seed});
  const std::size_t terminal = 1 + shape.layers * shape.width;
  auto layer_state = [&](std::size_t layer, std::size_t i) { return 1 + layer * shape.width + i; };

  MdpBuilder builder(terminal + 1, shape.actions, shape.layers + 1);
  builder.terminal(terminal);
  auto add_action = [&](StateId s, ActionId a, std::size_t next_layer) {
    std::vector<StateId> targets;
    if (next_layer == shape.layers) {
      targets.assign(shape.branching, terminal);
    } else {
      std::vector<std::size_t> idx(shape.width);
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t k = 0; k < shape.branching; ++k) {
        const auto pick = k + std::min(idx.size() - k - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(idx.size() - k)));
        std::swap(idx[k], idx[pick]);
        targets.push_back(layer_state(next_layer, idx[k]));
      }
    }
    std::vector<double> weights(shape.branching);
    for (double& w : weights) w = 0.1 + uniform01(rng);
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (std::size_t k = 0; k < shape.branching; ++k) {
      const double reward = shape.reward_scale * (2.0 * uniform01(rng) - 1.0);
      builder.add(s, a, targets[k], weights[k] / total, reward);
    }
  };
  auto add_state = [&](StateId s, std::size_t next_layer) {
    const auto kept = std::min(shape.actions - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(shape.actions)));
    for (ActionId a = 0; a < shape.actions; ++a) {
      if (a != kept && uniform01(rng) < shape.missing_action_prob) continue;
      add_action(s, a, next_layer);
    }
  };
  add_state(0, 0);
  for (std::size_t layer = 0; layer < shape.layers; ++layer) {
    for (std::size_t i = 0; i < shape.width; ++i) add_state(layer_state(layer, i), layer + 1);
  }
  return builder.build();
}

FiniteMdp two_point_target_mdp() {
  return MdpBuilder(2, 1, 1).terminal(1).add(0, 0, 1, 0.5, 1.0).add(0, 0, 1, 0.5, -1.0).build();
}

std::vector<FiniteMdp> oracle_mdp_suite() {
  return {
      random_layered_mdp(101, {2, 2, 2, 2, 1.0, 0.0}),
      random_layered_mdp(102, {2, 3, 3, 3, 1.0, 0.25}),
      random_layered_mdp(103, {2, 3, 2, 2, 2.0, 0.0}),
      random_layered_mdp(104, {1, 3, 3, 3, 1.5, 0.25}),
      random_layered_mdp(105, {2, 3, 3, 2, 0.5, 0.0}),
  };
}

}  // namespace riskval
