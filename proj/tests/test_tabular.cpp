#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "riskval/mdp_suite.hpp"
#include "riskval/tabular.hpp"

using namespace riskval;
using doctest::Approx;

namespace {

const double kCoin = -std::log(std::cosh(1.0));

FiniteMdp coin_bandit() {
  MdpBuilder b(2, 2, 1);
  b.terminal(1).add(0, 0, 1, 1.0, 0.0).add(0, 1, 1, 0.5, 1.0).add(0, 1, 1, 0.5, -1.0);
  return b.build();
}

TabularLearnOptions options(double alpha, LossKind kind, std::uint64_t episodes, std::uint64_t seed,
                            LearningSchedule schedule = default_schedule()) {
  return {RiskAversion(alpha), kind, schedule, episodes, seed};
}

}  // namespace

TEST_CASE("sa_update examples") {
  CHECK(sa_update(0.0, 1.0, RiskAversion(1.0), 0.1, LossKind::ItakuraSaito) == Approx(0.0632120558828558).epsilon(1e-14));
  CHECK(sa_update(0.0, 1.0, RiskAversion(1.0), 0.1, LossKind::Mse) == Approx(0.1).epsilon(1e-15));
  for (LossKind kind : kAllLossKinds) CHECK(sa_update(0.4, 0.4, RiskAversion(1.0), 0.3, kind) == 0.4);
  CHECK_THROWS_AS(sa_update(0.0, 1.0, RiskAversion(1.0), 0.0, LossKind::Mse), InputError);
  CHECK(std::isinf(sa_update(-900.0, 0.0, RiskAversion(1.0), 0.1, LossKind::Emse)));
}

TEST_CASE("schedules") {
  const auto h = LearningSchedule::harmonic(0.5, 0.01);
  CHECK(h.rate(0) == 0.5);
  CHECK(h.rate(100) == Approx(0.25).epsilon(1e-15));
  CHECK(LearningSchedule::constant(0.2).rate(12345) == 0.2);
  CHECK_THROWS_AS(LearningSchedule::constant(0.0), InputError);
  CHECK_THROWS_AS(LearningSchedule::harmonic(-1.0, 0.1), InputError);
  CHECK_THROWS_AS(LearningSchedule::harmonic(1.0, -0.1), InputError);
}

TEST_CASE("fixed points of the stochastic-approximation rules") {
  const auto coin = DiscreteDistribution::uniform(Eigen::Vector2d(1.0, -1.0));
  for (double alpha : {0.5, 1.0, 2.0}) {
    const RiskAversion ra(alpha);
    CHECK(sa_fixed_point(LossKind::ItakuraSaito, coin, ra) == Approx(certainty_equivalent(coin, ra)).epsilon(1e-12));
    CHECK(sa_fixed_point(LossKind::Emse, coin, ra) == Approx(certainty_equivalent(coin, ra)).epsilon(1e-12));
  }
  CHECK(std::abs(sa_fixed_point(LossKind::Mse, coin, RiskAversion(1.0))) <= 1e-15);
  const double sp = sa_fixed_point(LossKind::Softplus, coin, RiskAversion(1.0));
  CHECK(std::abs(sp - kCoin) >= 0.1);
  CHECK(sp < kCoin);
}

TEST_CASE("coin state evaluation") {
  MdpBuilder b(2, 1, 1);
  b.terminal(1).add(0, 0, 1, 0.5, 1.0).add(0, 0, 1, 0.5, -1.0);
  const FiniteMdp coin = b.build();
  const TabularPolicy pi = TabularPolicy::uniform(coin);
  const auto is = td0_policy_evaluation(coin, pi, options(1.0, LossKind::ItakuraSaito, 200'000, 1));
  CHECK(std::abs(is.values[0] - kCoin) <= 0.01);
  CHECK(is.values[1] == 0.0);
  CHECK(is.visit_counts[0] == 200'000);
  const auto mse = td0_policy_evaluation(coin, pi, options(1.0, LossKind::Mse, 200'000, 1));
  CHECK(std::abs(mse.values[0]) <= 0.01);
}

TEST_CASE("deterministic chain is exact after one sweep per layer with unit steps") {
  MdpBuilder b(4, 1, 3);
  b.terminal(3).add(0, 0, 1, 1.0, 1.0).add(1, 0, 2, 1.0, -2.0).add(2, 0, 3, 1.0, 4.5);
  const FiniteMdp chain = b.build();
  const TabularPolicy pi = TabularPolicy::uniform(chain);
  const auto st = td0_policy_evaluation(chain, pi, options(0.0, LossKind::Mse, 3, 0, LearningSchedule::constant(1.0)));
  CHECK(st.values[0] == 3.5);
  CHECK(st.values[1] == 2.5);
  CHECK(st.values[2] == 4.5);
  CHECK(st.values[3] == 0.0);
}

TEST_CASE("identical seeds give identical tables") {
  const FiniteMdp mdp = oracle_mdp_suite()[1];
  const TabularPolicy pi = TabularPolicy::uniform(mdp);
  const auto a = td0_policy_evaluation(mdp, pi, options(1.0, LossKind::ItakuraSaito, 5000, 9));
  const auto b = td0_policy_evaluation(mdp, pi, options(1.0, LossKind::ItakuraSaito, 5000, 9));
  CHECK((a.values.array() == b.values.array()).all());
  CHECK(a.visit_counts == b.visit_counts);
  const auto q1 = entropic_q_learning(mdp, options(1.0, LossKind::ItakuraSaito, 5000, 9), 0.2);
  const auto q2 = entropic_q_learning(mdp, options(1.0, LossKind::ItakuraSaito, 5000, 9), 0.2);
  CHECK((q1.q.array() == q2.q.array()).all());
  const auto c = td0_policy_evaluation(mdp, pi, options(1.0, LossKind::ItakuraSaito, 5000, 10));
  CHECK(!(a.values.array() == c.values.array()).all());
}

TEST_CASE("terminal entries stay pinned at zero") {
  for (const FiniteMdp& mdp : oracle_mdp_suite()) {
    const auto st = td0_policy_evaluation(mdp, TabularPolicy::uniform(mdp), options(1.0, LossKind::ItakuraSaito, 2000, 3));
    const auto q = entropic_q_learning(mdp, options(1.0, LossKind::ItakuraSaito, 2000, 3), 0.3);
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      if (!mdp.is_terminal(s)) continue;
      CHECK(st.values[static_cast<Eigen::Index>(s)] == 0.0);
      CHECK(st.visit_counts[s] == 0);
      CHECK(q.q.row(static_cast<Eigen::Index>(s)).isZero(0.0));
    }
  }
}

TEST_CASE("bandit Q-learning") {
  const FiniteMdp bandit = coin_bandit();
  const auto is = entropic_q_learning(bandit, options(1.0, LossKind::ItakuraSaito, 200'000, 4), 0.5);
  CHECK(is.greedy.prob(0, 0) == 1.0);
  CHECK(std::abs(is.q(0, 1) - kCoin) <= 0.02);
  CHECK(std::abs(is.q(0, 0)) <= 0.02);

  const auto mse = entropic_q_learning(bandit, options(1.0, LossKind::Mse, 200'000, 4), 0.5);
  CHECK(std::abs(mse.q(0, 0)) <= 0.02);
  CHECK(std::abs(mse.q(0, 1)) <= 0.02);

  const auto tiny = entropic_q_learning(bandit, options(1e-6, LossKind::ItakuraSaito, 200'000, 4), 0.5);
  CHECK((tiny.q - mse.q).cwiseAbs().maxCoeff() <= 0.01);
  CHECK_THROWS_AS(entropic_q_learning(bandit, options(1.0, LossKind::Mse, 10, 4), 0.0), InputError);
}

TEST_CASE("Q-learning recovers the optimal table on a small MDP") {
  const FiniteMdp mdp = oracle_mdp_suite()[0];
  const RiskAversion ra(1.0);
  const OptimalSolution opt = entropic_value_iteration(mdp, ra);
  const auto q = entropic_q_learning(mdp, options(1.0, LossKind::ItakuraSaito, 200'000, 5), 0.5);
  const Eigen::Index s0 = static_cast<Eigen::Index>(mdp.initial_state());
  CHECK(std::abs(q.q.row(s0).maxCoeff() - opt.v_star[s0]) <= 0.03);
}

TEST_CASE("divergence is reported, not clamped") {
  MdpBuilder b(2, 1, 1);
  b.terminal(1).add(0, 0, 1, 0.5, 400.0).add(0, 0, 1, 0.5, -400.0);
  const FiniteMdp wild = b.build();
  CHECK_THROWS_AS(td0_policy_evaluation(wild, TabularPolicy::uniform(wild),
                                        options(5.0, LossKind::Emse, 1000, 1, LearningSchedule::constant(1.0))),
                  NumericDivergence);
}

TEST_CASE("IS TD(0) converges to the exact entropic values on the suite") {
  for (double alpha : {0.5, 1.0}) {
    const auto suite = oracle_mdp_suite();
    for (std::size_t i = 0; i < suite.size(); ++i) {
      const TabularPolicy pi = TabularPolicy::uniform(suite[i]);
      const auto exact = entropic_policy_evaluation(suite[i], pi, RiskAversion(alpha));
      const auto st = td0_policy_evaluation(suite[i], pi, options(alpha, LossKind::ItakuraSaito, 200'000, 1));
      CAPTURE(alpha);
      CAPTURE(i);
      CHECK(reachable_max_error(suite[i], pi, st.values, exact) <= 0.02);
    }
  }
}

TEST_CASE("reachable states") {
  MdpBuilder b(4, 2, 2);
  b.terminal(3).add(0, 0, 1, 1.0, 0.0).add(0, 1, 2, 1.0, 0.0).add(1, 0, 3, 1.0, 0.0).add(2, 0, 3, 1.0, 0.0);
  const FiniteMdp mdp = b.build();
  const std::vector<ActionId> first{0, 0, 0, 0};
  const auto reach = reachable_states(mdp, TabularPolicy::deterministic(first, 2));
  CHECK(reach == std::vector<bool>{true, true, false, true});
  Eigen::VectorXd learned = Eigen::VectorXd::Zero(4), exact = Eigen::VectorXd::Zero(4);
  exact[2] = 5.0;
  exact[1] = 0.25;
  CHECK(reachable_max_error(mdp, TabularPolicy::deterministic(first, 2), learned, exact) == 0.25);
}
