#include "riskval/tabular.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "riskval/errors.hpp"
#include "riskval/rng.hpp"

namespace riskval {
namespace {

std::string divergence_message(LossKind kind, std::uint64_t episode) {
  return std::string("non-finite value with loss ") + std::string(to_string(kind)) + " at episode " +
         std::to_string(episode);
}

// MSE ignores alpha, so an Mse learner is risk-neutral whatever ra holds.
void check_options(const TabularLearnOptions& options) { options.ra.require_nonnegative(); }

const Transition& sample_outcome(std::span<const Transition> outs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  const Transition* last = nullptr;
  for (const Transition& t : outs) {
    if (t.probability <= 0.0) continue;
    acc += t.probability;
    last = &t;
    if (u < acc) return t;
  }
  return *last;
}

ActionId sample_policy_action(const TabularPolicy& policy, StateId s, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  ActionId last = 0;
  for (ActionId a = 0; a < policy.num_actions(); ++a) {
    const double p = policy.prob(s, a);
    if (p <= 0.0) continue;
    acc += p;
    last = a;
    if (u < acc) return a;
  }
  return last;
}

}  // namespace

LearningSchedule::LearningSchedule(Constant rule) : rule_(rule) {
  if (!(rule.eta > 0.0) || !std::isfinite(rule.eta)) throw InputError("constant step size must be positive");
}

LearningSchedule::LearningSchedule(Harmonic rule) : rule_(rule) {
  if (!(rule.c > 0.0) || !(rule.decay >= 0.0) || !std::isfinite(rule.c) || !std::isfinite(rule.decay)) {
    throw InputError("harmonic schedule needs c > 0 and decay >= 0");
  }
}

double LearningSchedule::rate(std::uint64_t k) const {
  if (const auto* c = std::get_if<Constant>(&rule_)) return c->eta;
  const auto& h = std::get<Harmonic>(rule_);
  return h.c / (1.0 + static_cast<double>(k) * h.decay);
}

double sa_update(double current, double target, const RiskAversion& ra, double eta, LossKind kind) {
  if (!(eta > 0.0)) throw InputError("step size must be positive");
  ra.require_nonnegative();
  return current - eta * evaluate_loss(kind, current, target, ra).grad;
}

TabularValueState td0_policy_evaluation(const FiniteMdp& mdp, const TabularPolicy& policy,
                                        const TabularLearnOptions& options) {
  check_options(options);
  policy.check_compatible(mdp);
  TabularValueState state{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mdp.num_states())),
                          std::vector<std::uint64_t>(mdp.num_states(), 0)};
  auto& v = state.values;
  for (std::uint64_t episode = 0; episode < options.episodes; ++episode) {
    Rng rng = make_rng({options.seed, episode});
    StateId s = mdp.initial_state();
    for (std::size_t step = 0; !mdp.is_terminal(s); ++step) {
      if (step >= mdp.horizon()) throw ModelError("episode exceeded the horizon");
      const ActionId a = sample_policy_action(policy, s, rng);
      const Transition& t = sample_outcome(mdp.outcomes(s, a), rng);
      const auto row = static_cast<Eigen::Index>(s);
      const double target = t.reward + v[static_cast<Eigen::Index>(t.next)];
      const double eta = options.schedule.rate(state.visit_counts[s]++);
      v[row] = sa_update(v[row], target, options.ra, eta, options.kind);
      if (!std::isfinite(v[row])) throw NumericDivergence(divergence_message(options.kind, episode));
      s = t.next;
    }
  }
  return state;
}

QLearningResult entropic_q_learning(const FiniteMdp& mdp, const TabularLearnOptions& options, double exploration_epsilon) {
  check_options(options);
  if (!(exploration_epsilon > 0.0 && exploration_epsilon <= 1.0)) throw InputError("exploration epsilon must lie in (0, 1]");
  const auto S = static_cast<Eigen::Index>(mdp.num_states());
  const auto A = static_cast<Eigen::Index>(mdp.num_actions());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(S, A);
  std::vector<std::vector<ActionId>> available(mdp.num_states());
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      if (mdp.is_available(s, a)) {
        available[s].push_back(a);
      } else if (!mdp.is_terminal(s)) {
        q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = -std::numeric_limits<double>::infinity();
      }
    }
  }
  std::vector<std::uint64_t> counts(mdp.num_states() * mdp.num_actions(), 0);

  auto state_value = [&](StateId s) {
    if (mdp.is_terminal(s)) return 0.0;
    return q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(greedy_action(mdp, q, s)));
  };

  for (std::uint64_t episode = 0; episode < options.episodes; ++episode) {
    Rng rng = make_rng({options.seed, episode});
    StateId s = mdp.initial_state();
    for (std::size_t step = 0; !mdp.is_terminal(s); ++step) {
      if (step >= mdp.horizon()) throw ModelError("episode exceeded the horizon");
      ActionId a;
      if (uniform01(rng) < exploration_epsilon) {
        const auto& choices = available[s];
        a = choices[std::min(choices.size() - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(choices.size())))];
      } else {
        a = greedy_action(mdp, q, s);
      }
      const Transition& t = sample_outcome(mdp.outcomes(s, a), rng);
      const double target = t.reward + state_value(t.next);
      double& entry = q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      const double eta = options.schedule.rate(counts[s * mdp.num_actions() + a]++);
      entry = sa_update(entry, target, options.ra, eta, options.kind);
      if (!std::isfinite(entry)) throw NumericDivergence(divergence_message(options.kind, episode));
      s = t.next;
    }
  }

  std::vector<ActionId> greedy(mdp.num_states(), 0);
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (!mdp.is_terminal(s)) greedy[s] = greedy_action(mdp, q, s);
  }
  return {std::move(q), std::move(counts), TabularPolicy::deterministic(greedy, mdp.num_actions())};
}

double reachable_max_error(const FiniteMdp& mdp, const TabularPolicy& policy, const Eigen::VectorXd& learned,
                           const Eigen::VectorXd& exact) {
  const std::vector<bool> reach = reachable_states(mdp, policy);
  if (learned.size() != exact.size() || static_cast<std::size_t>(exact.size()) != reach.size()) {
    throw InputError("value tables must cover every state");
  }
  double worst = 0.0;
  for (std::size_t s = 0; s < reach.size(); ++s) {
    if (!reach[s]) continue;
    const double gap = std::abs(learned[static_cast<Eigen::Index>(s)] - exact[static_cast<Eigen::Index>(s)]);
    worst = std::isnan(gap) ? gap : std::max(worst, gap);
    if (std::isnan(worst)) break;
  }
  return worst;
}

double sa_fixed_point(LossKind kind, const DiscreteDistribution& target, const RiskAversion& ra) {
  ra.require_nonnegative();
  const auto& x = target.outcomes();
  const auto& p = target.probabilities();
  auto mean_grad = [&](double v) {
    double g = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) g += p[i] * evaluate_loss(kind, v, x[i], ra).grad;
    return g;
  };
  double lo = x.minCoeff();
  double hi = x.maxCoeff();
  if (lo == hi) return lo;
  for (int iter = 0; iter < 200 && hi - lo > 0.0; ++iter) {
    const double mid = lo + (hi - lo) / 2;
    if (mid == lo || mid == hi) break;
    (mean_grad(mid) < 0.0 ? lo : hi) = mid;
  }
  return lo + (hi - lo) / 2;
}

}  // namespace riskval
