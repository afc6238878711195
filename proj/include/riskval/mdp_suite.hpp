#pragma once

#include <cstdint>
#include <vector>

#include "riskval/mdp.hpp"

namespace riskval {

struct LayeredMdpShape {
  std::size_t layers = 3;
  std::size_t width = 3;
  std::size_t actions = 2;
  std::size_t branching = 2;
  double reward_scale = 1.0;
  /// Chance that an action is missing in a state (one action always stays).
  double missing_action_prob = 0.0;
};

/// Random acyclic MDP: a single initial state, `layers` layers of `width`
/// states, then one terminal state. Each available action moves to
/// `branching` distinct states of the next layer with random probabilities
/// and rewards uniform in [-reward_scale, reward_scale].
FiniteMdp random_layered_mdp(std::uint64_t seed, const LayeredMdpShape& shape);

/// One decision, then reward +1 or -1 with probability 1/2 each and the
/// episode ends. Its entropic value is -log(cosh(alpha)) / alpha.
FiniteMdp two_point_target_mdp();

/// The five fixed random MDPs (at most 3 steps, 3 actions and 3 successors)
/// used by the convergence and oracle checks.
std::vector<FiniteMdp> oracle_mdp_suite();

}  // namespace riskval
