#include "riskval/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "riskval/errors.hpp"
#include "riskval/rng.hpp"

namespace riskval {
namespace {

constexpr double kProbabilityTolerance = 1e-12;

std::size_t sample_index(const auto& weights, std::size_t n, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last_positive = n;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights(i);
    if (w <= 0.0) continue;
    acc += w;
    last_positive = i;
    if (u < acc) return i;
  }
  if (last_positive == n) throw InternalError("sampling from an empty distribution");
  return last_positive;
}

}  // namespace

FiniteMdp::FiniteMdp(std::size_t num_states, std::size_t num_actions, StateId initial_state, std::size_t horizon,
                     std::vector<bool> terminal, std::vector<std::vector<Transition>> outcomes)
    : num_states_(num_states),
      num_actions_(num_actions),
      initial_(initial_state),
      horizon_(horizon),
      terminal_(std::move(terminal)),
      outcomes_(std::move(outcomes)) {
  if (num_states_ == 0 || num_actions_ == 0) throw ModelError("MDP needs at least one state and one action");
  if (initial_ >= num_states_) throw ModelError("initial state out of range");
  if (terminal_.size() != num_states_) throw ModelError("terminal flags must cover every state");
  if (outcomes_.size() != num_states_ * num_actions_) throw ModelError("outcome table has the wrong size");

  for (StateId s = 0; s < num_states_; ++s) {
    bool any_action = false;
    for (ActionId a = 0; a < num_actions_; ++a) {
      const auto& list = outcomes_[s * num_actions_ + a];
      if (list.empty()) continue;
      if (terminal_[s]) throw ModelError("terminal state " + std::to_string(s) + " has outgoing transitions");
      any_action = true;
      double total = 0.0;
      for (const Transition& t : list) {
        if (t.next >= num_states_) throw ModelError("transition target out of range");
        if (!(t.probability >= 0.0) || !std::isfinite(t.probability)) throw ModelError("invalid transition probability");
        if (!std::isfinite(t.reward)) throw ModelError("non-finite reward");
        total += t.probability;
      }
      if (std::abs(total - 1.0) > kProbabilityTolerance) {
        throw ModelError("transition probabilities of (" + std::to_string(s) + ", " + std::to_string(a) +
                         ") sum to " + std::to_string(total));
      }
    }
    if (!terminal_[s] && !any_action) throw ModelError("non-terminal state " + std::to_string(s) + " has no action");
  }

  // Iterative DFS post-order: successors finish before their predecessors.
  enum class Mark : unsigned char { Fresh, Open, Done };
  struct Frame {
    StateId state;
    ActionId action;
    std::size_t index;
  };
  std::vector<Mark> mark(num_states_, Mark::Fresh);
  std::vector<std::size_t> steps_to_end(num_states_, 0);
  backward_order_.reserve(num_states_);
  std::vector<Frame> stack;
  for (StateId root = 0; root < num_states_; ++root) {
    if (mark[root] != Mark::Fresh) continue;
    mark[root] = Mark::Open;
    stack.push_back({root, 0, 0});
    while (!stack.empty()) {
      Frame& top = stack.back();
      if (top.action < num_actions_) {
        const auto& list = outcomes_[top.state * num_actions_ + top.action];
        if (top.index >= list.size()) {
          ++top.action;
          top.index = 0;
          continue;
        }
        const StateId next = list[top.index++].next;
        if (mark[next] == Mark::Open) throw ModelError("transition graph has a cycle through state " + std::to_string(next));
        if (mark[next] == Mark::Fresh) {
          mark[next] = Mark::Open;
          stack.push_back({next, 0, 0});
        }
        continue;
      }
      const StateId done = top.state;
      std::size_t depth = 0;
      for (ActionId a = 0; a < num_actions_; ++a) {
        for (const Transition& t : outcomes_[done * num_actions_ + a]) depth = std::max(depth, steps_to_end[t.next] + 1);
      }
      if (depth > horizon_) {
        throw ModelError("state " + std::to_string(done) + " needs " + std::to_string(depth) +
                         " steps to terminate, more than the horizon");
      }
      steps_to_end[done] = depth;
      mark[done] = Mark::Done;
      backward_order_.push_back(done);
      stack.pop_back();
    }
  }
}

MdpBuilder::MdpBuilder(std::size_t num_states, std::size_t num_actions, std::size_t horizon, StateId initial_state)
    : num_states_(num_states),
      num_actions_(num_actions),
      horizon_(horizon),
      initial_(initial_state),
      terminal_(num_states, false),
      outcomes_(num_states * num_actions) {}

MdpBuilder& MdpBuilder::terminal(StateId s) {
  if (s >= num_states_) throw ModelError("terminal state out of range");
  terminal_[s] = true;
  return *this;
}

MdpBuilder& MdpBuilder::add(StateId s, ActionId a, StateId next, double probability, double reward) {
  if (s >= num_states_ || a >= num_actions_) throw ModelError("transition source out of range");
  outcomes_[s * num_actions_ + a].push_back({next, probability, reward});
  return *this;
}

FiniteMdp MdpBuilder::build() const {
  return FiniteMdp(num_states_, num_actions_, initial_, horizon_, terminal_, outcomes_);
}

TabularPolicy::TabularPolicy(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
  if (probs_.rows() == 0 || probs_.cols() == 0) throw InputError("policy table is empty");
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    if (!(probs_.row(s).array() >= 0.0).all() || !probs_.row(s).allFinite()) {
      throw InputError("policy row " + std::to_string(s) + " has a negative or non-finite entry");
    }
    if (std::abs(probs_.row(s).sum() - 1.0) > kProbabilityTolerance) {
      throw InputError("policy row " + std::to_string(s) + " does not sum to 1");
    }
  }
}

TabularPolicy TabularPolicy::deterministic(std::span<const ActionId> actions, std::size_t num_actions) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(actions.size()), static_cast<Eigen::Index>(num_actions));
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] >= num_actions) throw InputError("action index out of range");
    p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(actions[s])) = 1.0;
  }
  return TabularPolicy(std::move(p));
}

TabularPolicy TabularPolicy::uniform(const FiniteMdp& mdp) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mdp.num_states()),
                                            static_cast<Eigen::Index>(mdp.num_actions()));
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    const auto row = static_cast<Eigen::Index>(s);
    if (mdp.is_terminal(s)) {
      p(row, 0) = 1.0;
      continue;
    }
    double count = 0.0;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) count += mdp.is_available(s, a) ? 1.0 : 0.0;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      if (mdp.is_available(s, a)) p(row, static_cast<Eigen::Index>(a)) = 1.0 / count;
    }
  }
  return TabularPolicy(std::move(p));
}

void TabularPolicy::check_compatible(const FiniteMdp& mdp) const {
  if (num_states() != mdp.num_states() || num_actions() != mdp.num_actions()) {
    throw InputError("policy shape does not match the MDP");
  }
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      if (prob(s, a) > 0.0 && !mdp.is_available(s, a)) {
        throw InputError("policy puts mass on unavailable action " + std::to_string(a) + " in state " + std::to_string(s));
      }
    }
  }
}

std::vector<bool> reachable_states(const FiniteMdp& mdp, const TabularPolicy& policy) {
  policy.check_compatible(mdp);
  std::vector<bool> seen(mdp.num_states(), false);
  std::vector<StateId> stack{mdp.initial_state()};
  seen[mdp.initial_state()] = true;
  while (!stack.empty()) {
    const StateId s = stack.back();
    stack.pop_back();
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      if (!(policy.prob(s, a) > 0.0)) continue;
      for (const Transition& t : mdp.outcomes(s, a)) {
        if (t.probability > 0.0 && !seen[t.next]) {
          seen[t.next] = true;
          stack.push_back(t.next);
        }
      }
    }
  }
  return seen;
}

Trajectory sample_trajectory(const FiniteMdp& mdp, const TabularPolicy& policy, std::uint64_t seed) {
  policy.check_compatible(mdp);
  Rng rng = make_rng({seed});
  Trajectory traj;
  StateId s = mdp.initial_state();
  while (!mdp.is_terminal(s)) {
    if (traj.steps.size() >= mdp.horizon()) throw ModelError("trajectory exceeded the horizon without terminating");
    const auto row = policy.probs().row(static_cast<Eigen::Index>(s));
    const ActionId a = sample_index(row, mdp.num_actions(), rng);
    const auto outs = mdp.outcomes(s, a);
    const std::size_t k = sample_index([&](std::size_t i) { return outs[i].probability; }, outs.size(), rng);
    traj.steps.push_back({s, a, outs[k].reward, outs[k].next});
    traj.total_return += outs[k].reward;
    s = outs[k].next;
  }
  return traj;
}

Eigen::VectorXd entropic_policy_evaluation(const FiniteMdp& mdp, const TabularPolicy& policy, const RiskAversion& ra) {
  policy.check_compatible(mdp);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mdp.num_states()));
  std::vector<double> xs;
  std::vector<double> ps;
  for (StateId s : mdp.backward_order()) {
    if (mdp.is_terminal(s)) continue;
    xs.clear();
    ps.clear();
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      const double pa = policy.prob(s, a);
      if (pa <= 0.0) continue;
      for (const Transition& t : mdp.outcomes(s, a)) {
        xs.push_back(t.reward + v[static_cast<Eigen::Index>(t.next)]);
        ps.push_back(pa * t.probability);
      }
    }
    const auto n = static_cast<Eigen::Index>(xs.size());
    v[static_cast<Eigen::Index>(s)] =
        weighted_certainty_equivalent(Eigen::Map<const Eigen::VectorXd>(xs.data(), n), Eigen::Map<const Eigen::VectorXd>(ps.data(), n), ra);
  }
  return v;
}

ActionId greedy_action(const FiniteMdp& mdp, const Eigen::MatrixXd& q, StateId s) {
  ActionId best = mdp.num_actions();
  double best_value = -std::numeric_limits<double>::infinity();
  for (ActionId a = 0; a < mdp.num_actions(); ++a) {
    if (!mdp.is_available(s, a)) continue;
    const double value = q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
    if (best == mdp.num_actions() || value > best_value) {
      best = a;
      best_value = value;
    }
  }
  return best == mdp.num_actions() ? 0 : best;
}

OptimalSolution entropic_value_iteration(const FiniteMdp& mdp, const RiskAversion& ra) {
  const auto S = static_cast<Eigen::Index>(mdp.num_states());
  const auto A = static_cast<Eigen::Index>(mdp.num_actions());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(S);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(S, A);
  std::vector<ActionId> greedy(mdp.num_states(), 0);
  Eigen::VectorXd xs;
  Eigen::VectorXd ps;
  for (StateId s : mdp.backward_order()) {
    const auto row = static_cast<Eigen::Index>(s);
    if (mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      const auto col = static_cast<Eigen::Index>(a);
      const auto outs = mdp.outcomes(s, a);
      if (outs.empty()) {
        q(row, col) = -std::numeric_limits<double>::infinity();
        continue;
      }
      xs.resize(static_cast<Eigen::Index>(outs.size()));
      ps.resize(xs.size());
      for (std::size_t i = 0; i < outs.size(); ++i) {
        xs[static_cast<Eigen::Index>(i)] = outs[i].reward + v[static_cast<Eigen::Index>(outs[i].next)];
        ps[static_cast<Eigen::Index>(i)] = outs[i].probability;
      }
      q(row, col) = weighted_certainty_equivalent(xs, ps, ra);
    }
    greedy[s] = greedy_action(mdp, q, s);
    v[row] = q(row, static_cast<Eigen::Index>(greedy[s]));
  }
  return {std::move(v), std::move(q), TabularPolicy::deterministic(greedy, mdp.num_actions())};
}

OptimalSolution risk_neutral_value_iteration(const FiniteMdp& mdp) {
  return entropic_value_iteration(mdp, RiskAversion::risk_neutral());
}

namespace {

struct ReturnAtoms {
  std::vector<double> returns;
  std::vector<double> probs;
};

ReturnAtoms enumerate_returns(const FiniteMdp& mdp, const TabularPolicy& policy, std::size_t max_trajectories) {
  policy.check_compatible(mdp);
  struct Node {
    StateId state;
    double prob;
    double ret;
  };
  ReturnAtoms atoms;
  std::vector<Node> stack{{mdp.initial_state(), 1.0, 0.0}};
  while (!stack.empty()) {
    const Node node = stack.back();
    stack.pop_back();
    if (mdp.is_terminal(node.state)) {
      if (atoms.returns.size() >= max_trajectories) {
        throw CapacityError("trajectory enumeration exceeds " + std::to_string(max_trajectories) + " trajectories");
      }
      atoms.returns.push_back(node.ret);
      atoms.probs.push_back(node.prob);
      continue;
    }
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      const double pa = policy.prob(node.state, a);
      if (pa <= 0.0) continue;
      for (const Transition& t : mdp.outcomes(node.state, a)) {
        if (t.probability <= 0.0) continue;
        stack.push_back({t.next, node.prob * pa * t.probability, node.ret + t.reward});
      }
    }
  }
  return atoms;
}

}  // namespace

double entropic_return_ce(const FiniteMdp& mdp, const TabularPolicy& policy, const RiskAversion& ra,
                          std::size_t max_trajectories) {
  const ReturnAtoms atoms = enumerate_returns(mdp, policy, max_trajectories);
  const auto n = static_cast<Eigen::Index>(atoms.returns.size());
  return weighted_certainty_equivalent(Eigen::Map<const Eigen::VectorXd>(atoms.returns.data(), n),
                                       Eigen::Map<const Eigen::VectorXd>(atoms.probs.data(), n), ra);
}

DiscreteDistribution return_distribution(const FiniteMdp& mdp, const TabularPolicy& policy,
                                         std::size_t max_trajectories) {
  const ReturnAtoms atoms = enumerate_returns(mdp, policy, max_trajectories);
  const auto n = static_cast<Eigen::Index>(atoms.returns.size());
  Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(atoms.probs.data(), n);
  p /= p.sum();
  return DiscreteDistribution(Eigen::Map<const Eigen::VectorXd>(atoms.returns.data(), n), std::move(p));
}

}  // namespace riskval
