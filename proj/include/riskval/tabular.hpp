#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <variant>
#include <vector>

#include "riskval/entropic.hpp"
#include "riskval/losses.hpp"
#include "riskval/mdp.hpp"

namespace riskval {

/// Step size as a function of the per-entry visit count k.
class LearningSchedule {
 public:
  struct Constant {
    double eta;
  };
  /// eta_k = c / (1 + k * decay); Robbins-Monro when decay > 0.
  struct Harmonic {
    double c;
    double decay;
  };

  LearningSchedule(Constant rule);
  LearningSchedule(Harmonic rule);

  static LearningSchedule constant(double eta) { return LearningSchedule(Constant{eta}); }
  static LearningSchedule harmonic(double c, double decay) { return LearningSchedule(Harmonic{c, decay}); }

  double rate(std::uint64_t k) const;
  const std::variant<Constant, Harmonic>& rule() const { return rule_; }

 private:
  std::variant<Constant, Harmonic> rule_;
};

/// Default step sizes used by the oracle-convergence suite. Not normative.
inline LearningSchedule default_schedule() { return LearningSchedule::harmonic(0.1, 0.05); }

/// One stochastic-approximation step: current - eta * dloss/dcurrent at
/// delta = current - target. Non-finite results are returned as-is.
double sa_update(double current, double target, const RiskAversion& ra, double eta, LossKind kind);

/// Root v of E[dloss/dv] = 0 for targets drawn from `target`: the point a
/// tabular learner of this kind settles on when one state bootstraps from a
/// fixed law. Bisection on [min, max] of the outcomes. For IS this is the
/// certainty equivalent, for MSE the mean.
double sa_fixed_point(LossKind kind, const DiscreteDistribution& target, const RiskAversion& ra);

struct TabularValueState {
  Eigen::VectorXd values;
  std::vector<std::uint64_t> visit_counts;
};

struct TabularLearnOptions {
  RiskAversion ra;
  LossKind kind = LossKind::ItakuraSaito;
  LearningSchedule schedule = default_schedule();
  std::uint64_t episodes = 0;
  std::uint64_t seed = 0;
};

/// TD(0) evaluation of a fixed policy. Episode i draws from the stream
/// derive_seed({seed, i}). Throws NumericDivergence on a non-finite entry.
TabularValueState td0_policy_evaluation(const FiniteMdp& mdp, const TabularPolicy& policy,
                                        const TabularLearnOptions& options);

/// max |learned(s) - exact(s)| over the states the policy reaches from the
/// initial state; unreachable states are never visited by TD.
double reachable_max_error(const FiniteMdp& mdp, const TabularPolicy& policy, const Eigen::VectorXd& learned,
                           const Eigen::VectorXd& exact);

struct QLearningResult {
  /// -inf marks unavailable actions.
  Eigen::MatrixXd q;
  std::vector<std::uint64_t> visit_counts;
  TabularPolicy greedy;
};

/// Q-learning toward r + max_a' Q(s', a') under an epsilon-greedy behaviour policy.
QLearningResult entropic_q_learning(const FiniteMdp& mdp, const TabularLearnOptions& options, double exploration_epsilon);

}  // namespace riskval
