#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "riskval/entropic.hpp"

namespace riskval {

using StateId = std::size_t;
using ActionId = std::size_t;

struct Transition {
  StateId next;
  double probability;
  double reward;
};

/// Finite-horizon MDP with the timestamp folded into the state.
///
/// The transition graph must be acyclic and every path from the initial
/// state must reach a terminal state within `horizon` steps; the
/// constructor checks both and stores a topological order for backward
/// induction. An action is available in a state iff it has a nonempty
/// outcome list there.
class FiniteMdp {
 public:
  /// outcomes[s * num_actions + a] lists the successors of (s, a).
  FiniteMdp(std::size_t num_states, std::size_t num_actions, StateId initial_state, std::size_t horizon,
            std::vector<bool> terminal, std::vector<std::vector<Transition>> outcomes);

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  StateId initial_state() const { return initial_; }
  std::size_t horizon() const { return horizon_; }
  bool is_terminal(StateId s) const { return terminal_[s]; }
  bool is_available(StateId s, ActionId a) const { return !outcomes_[s * num_actions_ + a].empty(); }

  std::span<const Transition> outcomes(StateId s, ActionId a) const { return outcomes_[s * num_actions_ + a]; }

  /// States such that every successor appears earlier (terminal first).
  const std::vector<StateId>& backward_order() const { return backward_order_; }

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  StateId initial_;
  std::size_t horizon_;
  std::vector<bool> terminal_;
  std::vector<std::vector<Transition>> outcomes_;
  std::vector<StateId> backward_order_;
};

/// Incremental construction helper for FiniteMdp.
class MdpBuilder {
 public:
  MdpBuilder(std::size_t num_states, std::size_t num_actions, std::size_t horizon, StateId initial_state = 0);

  MdpBuilder& terminal(StateId s);
  MdpBuilder& add(StateId s, ActionId a, StateId next, double probability, double reward);
  FiniteMdp build() const;

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::size_t horizon_;
  StateId initial_;
  std::vector<bool> terminal_;
  std::vector<std::vector<Transition>> outcomes_;
};

/// Markov policy: row s is a distribution over actions.
class TabularPolicy {
 public:
  explicit TabularPolicy(Eigen::MatrixXd probs);

  static TabularPolicy deterministic(std::span<const ActionId> actions, std::size_t num_actions);
  /// Uniform over the actions available in each state (action 0 in terminal states).
  static TabularPolicy uniform(const FiniteMdp& mdp);

  const Eigen::MatrixXd& probs() const { return probs_; }
  double prob(StateId s, ActionId a) const { return probs_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)); }
  std::size_t num_states() const { return static_cast<std::size_t>(probs_.rows()); }
  std::size_t num_actions() const { return static_cast<std::size_t>(probs_.cols()); }

  /// Throws InputError unless shapes match and no mass sits on unavailable actions.
  void check_compatible(const FiniteMdp& mdp) const;

 private:
  Eigen::MatrixXd probs_;
};

struct TrajectoryStep {
  StateId state;
  ActionId action;
  double reward;
  StateId next;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double total_return = 0.0;
};

/// States reached with positive probability from the initial state under policy.
std::vector<bool> reachable_states(const FiniteMdp& mdp, const TabularPolicy& policy);

/// Rolls out one episode from the initial state; reproducible per seed.
Trajectory sample_trajectory(const FiniteMdp& mdp, const TabularPolicy& policy, std::uint64_t seed);

/// Exact backward induction V(s) = CE over (a, s') of r + V(s').
Eigen::VectorXd entropic_policy_evaluation(const FiniteMdp& mdp, const TabularPolicy& policy, const RiskAversion& ra);

struct OptimalSolution {
  Eigen::VectorXd v_star;
  /// -inf marks unavailable actions; terminal rows are 0.
  Eigen::MatrixXd q_star;
  TabularPolicy greedy;
};

/// Exact backward induction for V* and Q*; greedy ties go to the lowest action index.
OptimalSolution entropic_value_iteration(const FiniteMdp& mdp, const RiskAversion& ra);

OptimalSolution risk_neutral_value_iteration(const FiniteMdp& mdp);

/// Argmax over available actions of a Q row, lowest index on ties.
ActionId greedy_action(const FiniteMdp& mdp, const Eigen::MatrixXd& q, StateId s);

inline constexpr std::size_t kMaxEnumeratedTrajectories = 1'000'000;

/// CE of the full-trajectory return distribution from the initial state,
/// by explicit enumeration. Independent of the Bellman recursion.
double entropic_return_ce(const FiniteMdp& mdp, const TabularPolicy& policy, const RiskAversion& ra,
                          std::size_t max_trajectories = kMaxEnumeratedTrajectories);

/// Return distribution of all trajectories (same enumeration as entropic_return_ce).
DiscreteDistribution return_distribution(const FiniteMdp& mdp, const TabularPolicy& policy,
                                         std::size_t max_trajectories = kMaxEnumeratedTrajectories);

}  // namespace riskval
