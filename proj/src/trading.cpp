#include "riskval/trading.hpp"

#include <cmath>
#include <numbers>

#include "riskval/errors.hpp"

namespace riskval {
namespace {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

void BachelierParams::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("sigma must be positive");
  if (T < 1) throw InputError("horizon T must be at least 1");
  if (!std::isfinite(mu) || !std::isfinite(S0)) throw InputError("mu and S0 must be finite");
}

double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("normal quantile needs p in (0, 1)");
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double terminal_reward(double final_price, const BachelierParams& params, const TradingRewardSpec& spec) {
  switch (spec.kind) {
    case RewardKind::PureTrading: return 0.0;
    case RewardKind::QuadraticTerminal: {
      const double x = final_price - params.S0;
      return -0.5 * x * x;
    }
    case RewardKind::CallHedging: return -std::max(final_price - spec.strike, 0.0);
  }
  return 0.0;
}

MarketStep bachelier_step(const MarketState& state, double action, const BachelierParams& params,
                          const TradingRewardSpec& spec, Rng& rng) {
  if (state.t >= params.T) throw InputError("cannot step a terminal market state");
  const double z = params.mu + params.sigma * standard_normal(rng);
  const MarketState next{state.t + 1, state.price + z};
  double reward = action * z;
  if (next.t == params.T) reward += terminal_reward(next.price, params, spec);
  return {next, reward};
}

AnalyticSolution analytic_gaussian_solution(std::size_t t, const BachelierParams& params, const RiskAversion& ra) {
  if (ra.is_risk_neutral()) throw InputError("the risk-neutral trading problem is unbounded");
  const double alpha = ra.require_positive().alpha();
  if (t > params.T) throw InputError("time index beyond the horizon");
  const double s2 = params.sigma * params.sigma;
  return {params.mu / (alpha * s2), params.mu * params.mu * static_cast<double>(params.T - t) / (2.0 * alpha * s2)};
}

AnalyticSolution analytic_quadratic_solution(std::size_t t, double price, const BachelierParams& params,
                                             const RiskAversion& ra) {
  const double alpha = ra.require_positive().alpha();
  if (params.mu != 0.0) throw InputError("the quadratic-penalty solution requires mu = 0");
  if (t > params.T) throw InputError("time index beyond the horizon");
  const double as2 = alpha * params.sigma * params.sigma;
  if (!(as2 < 1.0)) throw InputError("the quadratic-penalty solution needs alpha sigma^2 < 1");
  const double x = price - params.S0;
  return {x, -0.5 * x * x + static_cast<double>(params.T - t) / (2.0 * alpha) * std::log1p(-as2)};
}

double bachelier_call_price(const BachelierParams& params) {
  if (params.mu != 0.0) throw InputError("the closed-form call price requires mu = 0");
  return params.sigma * std::sqrt(static_cast<double>(params.T) / (2.0 * std::numbers::pi));
}

double bachelier_call_value(std::size_t t, double price, double strike, const BachelierParams& params) {
  if (params.mu != 0.0) throw InputError("the closed-form call value requires mu = 0");
  if (t >= params.T) return std::max(price - strike, 0.0);
  const double s = params.sigma * std::sqrt(static_cast<double>(params.T - t));
  const double d = (price - strike) / s;
  return (price - strike) * normal_cdf(d) + s * normal_pdf(d);
}

double analytic_value(SolutionKind kind, const MarketState& s, const BachelierParams& params, const RiskAversion& ra) {
  return kind == SolutionKind::Gaussian ? analytic_gaussian_solution(s.t, params, ra).value
                                        : analytic_quadratic_solution(s.t, s.price, params, ra).value;
}

std::vector<MarketState> probe_states(const BachelierParams& params, std::size_t per_layer) {
  if (per_layer == 0) throw InputError("need at least one probe per layer");
  std::vector<MarketState> probes;
  probes.reserve(params.T * per_layer);
  for (std::size_t t = 0; t < params.T; ++t) {
    const double spread = params.sigma * std::sqrt(static_cast<double>(t));
    for (std::size_t i = 0; i < per_layer; ++i) {
      const double q = normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(per_layer));
      probes.push_back({t, params.S0 + params.mu * static_cast<double>(t) + spread * q});
    }
  }
  return probes;
}

double rmse_vs_analytic(const MarketValueFunction& value, SolutionKind kind, const BachelierParams& params,
                        const RiskAversion& ra, std::span<const MarketState> probes) {
  if (probes.empty()) throw InputError("RMSE needs at least one probe state");
  double sum = 0.0;
  for (const MarketState& s : probes) {
    const double gap = analytic_value(kind, s, params, ra) - value(s);
    sum += gap * gap;
  }
  return std::sqrt(sum / static_cast<double>(probes.size()));
}

TradingEnv::TradingEnv(BachelierParams params, TradingRewardSpec spec) : params_(params), spec_(spec) {
  params_.validate();
}

Eigen::Vector2d TradingEnv::features(const MarketState& s) const {
  const double T = static_cast<double>(params_.T);
  const double t = static_cast<double>(s.t);
  return {t / T, (s.price - params_.S0 - params_.mu * t) / (params_.sigma * std::sqrt(T))};
}

Eigen::MatrixXd TradingEnv::features(std::span<const MarketState> states) const {
  Eigen::MatrixXd f(2, static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) f.col(static_cast<Eigen::Index>(i)) = features(states[i]);
  return f;
}

TransitionBatch TradingEnv::sample(std::size_t n, Rng& rng) const {
  const auto cols = static_cast<Eigen::Index>(n);
  TransitionBatch batch{Eigen::MatrixXd(2, cols), Eigen::MatrixXd(2, cols), Eigen::RowVectorXd(cols),
                        Eigen::RowVectorXd(cols), Eigen::Array<bool, 1, Eigen::Dynamic>(cols)};
  for (Eigen::Index i = 0; i < cols; ++i) {
    const auto t = std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(params_.T)), params_.T - 1);
    const double price = params_.S0 + params_.mu * static_cast<double>(t) +
                         params_.sigma * std::sqrt(static_cast<double>(t)) * standard_normal(rng);
    const MarketState s{t, price};
    // Unit action: the reward is affine in the action, slope = price move.
    const MarketStep step = bachelier_step(s, 0.0, params_, spec_, rng);
    batch.features.col(i) = features(s);
    batch.next_features.col(i) = features(step.next);
    batch.reward_base[i] = step.reward;
    batch.reward_slope[i] = step.next.price - price;
    batch.next_terminal[i] = step.next.t == params_.T;
  }
  return batch;
}

MarketValueFunction TradingEnv::value_function(const Mlp& net) const {
  return [this, &net](const MarketState& s) {
    if (s.t >= params_.T) return 0.0;
    return net.forward(features(s));
  };
}

double rmse_vs_analytic(const Mlp& value_net, const TradingEnv& env, SolutionKind kind, const RiskAversion& ra,
                        std::span<const MarketState> probes) {
  if (probes.empty()) throw InputError("RMSE needs at least one probe state");
  const Eigen::RowVectorXd v = value_net.forward_batch(env.features(probes));
  double sum = 0.0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const double gap = analytic_value(kind, probes[i], env.params(), ra) - v[static_cast<Eigen::Index>(i)];
    sum += gap * gap;
  }
  return std::sqrt(sum / static_cast<double>(probes.size()));
}

}  // namespace riskval
