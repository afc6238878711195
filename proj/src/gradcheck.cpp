#include "riskval/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "riskval/errors.hpp"
#include "riskval/mlp.hpp"
#include "riskval/rng.hpp"
#include "riskval/td_training.hpp"
#include "riskval/trading.hpp"

namespace riskval {
namespace {

double max_vector_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) worst = std::max(worst, gradient_error(analytic[i], numeric[i]));
  return worst;
}

Eigen::VectorXd numeric_gradient(Mlp& net, const std::function<double()>& objective, double h) {
  Eigen::VectorXd grad(net.num_parameters());
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    const double saved = net.parameters()[i];
    grad[i] = central_difference(
        [&](double x) {
          net.parameters()[i] = x;
          return objective();
        },
        saved, h);
    net.parameters()[i] = saved;
  }
  return grad;
}

TransitionBatch hedging_batch(std::uint64_t seed, std::size_t n) {
  const BachelierParams params;
  const TradingEnv env(params, TradingRewardSpec::call(params.S0));
  Rng rng = make_rng({seed, 7});
  return env.sample(n, rng);
}

}  // namespace

double gradient_error(double analytic, double numeric, double floor) {
  if (!std::isfinite(analytic) || !std::isfinite(numeric)) return std::numeric_limits<double>::infinity();
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

double central_difference(const std::function<double(double)>& f, double x, double h) {
  const auto d = [&](double step) { return (f(x + step) - f(x - step)) / (2.0 * step); };
  return (4.0 * d(h / 2.0) - d(h)) / 3.0;
}

double loss_gradient_max_error(LossKind kind, const RiskAversion& ra, std::size_t points) {
  if (points < 2) throw InputError("need at least two grid points");
  constexpr double target = 0.3;
  double worst = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double delta = -5.0 + 10.0 * static_cast<double>(i) / static_cast<double>(points - 1);
    const double v = target + delta;
    const double h = 5e-5 / std::max(1.0, ra.alpha());
    const double numeric = central_difference([&](double x) { return evaluate_loss(kind, x, target, ra).value; }, v, h);
    worst = std::max(worst, gradient_error(evaluate_loss(kind, v, target, ra).grad, numeric));
  }
  return worst;
}

double mlp_gradient_max_error(std::uint64_t seed) {
  Rng rng = make_rng({seed, 11});
  Mlp net = Mlp::initialized({3, 6, 5, 1}, rng);
  Eigen::MatrixXd inputs(3, 4);
  for (Eigen::Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = 4.0 * uniform01(rng) - 2.0;
  Eigen::RowVectorXd upstream(4);
  for (Eigen::Index i = 0; i < upstream.size(); ++i) upstream[i] = 2.0 * uniform01(rng) - 1.0;
  const Eigen::VectorXd analytic = net.backward_batch(inputs, upstream);
  const Eigen::VectorXd numeric =
      numeric_gradient(net, [&] { return net.forward_batch(inputs).dot(upstream); }, 1e-4);
  return max_vector_error(analytic, numeric);
}

double td_gradient_max_error(LossKind kind, const RiskAversion& ra, std::uint64_t seed) {
  const TransitionBatch batch = hedging_batch(seed, 16);
  Rng rng = make_rng({seed, 12});
  Mlp value = Mlp::initialized({2, 8, 8, 1}, rng);
  const Mlp target = Mlp::initialized({2, 8, 8, 1}, rng);
  Eigen::RowVectorXd actions(batch.size());
  for (Eigen::Index i = 0; i < actions.size(); ++i) actions[i] = uniform01(rng);
  const Eigen::VectorXd analytic = value_loss_gradient(value, target, batch, actions, kind, ra).grad;
  const Eigen::VectorXd numeric = numeric_gradient(
      value, [&] { return value_loss_gradient(value, target, batch, actions, kind, ra).value; }, 1e-4);
  return max_vector_error(analytic, numeric);
}

double policy_gradient_max_error(const RiskAversion& ra, std::uint64_t seed) {
  const TransitionBatch batch = hedging_batch(seed, 16);
  Rng rng = make_rng({seed, 13});
  Mlp policy = Mlp::initialized({2, 8, 8, 1}, rng);
  const Mlp value = Mlp::initialized({2, 8, 8, 1}, rng);
  constexpr double scale = 0.7;
  const Eigen::VectorXd analytic = policy_objective_gradient(policy, scale, value, batch, ra).grad;
  const Eigen::VectorXd numeric = numeric_gradient(
      policy, [&] { return policy_objective_gradient(policy, scale, value, batch, ra).value; }, 1e-4);
  return max_vector_error(analytic, numeric);
}

double dilogarithm_series_oracle(double x) {
  if (!(x >= -1.0 && x < 1.0)) throw InputError("series oracle needs -1 <= x < 1");
  const long double z = x;
  long double sum = 0.0L;
  long double power = 1.0L;
  for (long k = 1; k <= 2'000'000; ++k) {
    power *= z;
    const long double term = power / (static_cast<long double>(k) * static_cast<long double>(k));
    sum += term;
    if (std::fabs(term) < 1e-24L) break;
  }
  return static_cast<double>(sum);
}

double dilogarithm_max_error(std::size_t points) {
  if (points < 2) throw InputError("need at least two grid points");
  double worst = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = -1.0 + 1.99 * static_cast<double>(i) / static_cast<double>(points - 1);
    worst = std::max(worst, std::abs(dilogarithm(x) - dilogarithm_series_oracle(x)));
  }
  return worst;
}

}  // namespace riskval
