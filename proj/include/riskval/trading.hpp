#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "riskval/entropic.hpp"
#include "riskval/mlp.hpp"
#include "riskval/rng.hpp"
#include "riskval/td_training.hpp"

namespace riskval {

/// Discrete-time Bachelier model: S_{t+1} = S_t + Z, Z ~ N(mu, sigma^2).
struct BachelierParams {
  double mu = 0.0;
  double sigma = 0.2 / 3.1622776601683795;  // 0.2 / sqrt(10)
  std::size_t T = 10;
  double S0 = 1.0;

  void validate() const;
};

enum class RewardKind { PureTrading, QuadraticTerminal, CallHedging };

/// Per-step reward a (S_{t+1} - S_t); the last step adds a terminal term:
///   QuadraticTerminal: -(S_T - S0)^2 / 2
///   CallHedging:       -max(S_T - strike, 0)
struct TradingRewardSpec {
  RewardKind kind = RewardKind::PureTrading;
  double strike = 0.0;

  static TradingRewardSpec pure() { return {RewardKind::PureTrading, 0.0}; }
  static TradingRewardSpec quadratic() { return {RewardKind::QuadraticTerminal, 0.0}; }
  static TradingRewardSpec call(double strike) { return {RewardKind::CallHedging, strike}; }
};

struct MarketState {
  std::size_t t = 0;
  double price = 0.0;
};

struct MarketStep {
  MarketState next;
  double reward;
};

/// Standard normal via Box-Muller on uniform01 draws.
double standard_normal(Rng& rng);

/// Inverse of the standard normal CDF, accurate to ~1e-15 on (0, 1).
double normal_quantile(double p);

double terminal_reward(double final_price, const BachelierParams& params, const TradingRewardSpec& spec);

/// One market step. The next price uses exactly one normal draw from rng,
/// whatever the action.
MarketStep bachelier_step(const MarketState& state, double action, const BachelierParams& params,
                          const TradingRewardSpec& spec, Rng& rng);

struct AnalyticSolution {
  double action;
  double value;
};

/// Pure trading: constant action mu / (alpha sigma^2), value mu^2 (T - t) / (2 alpha sigma^2).
AnalyticSolution analytic_gaussian_solution(std::size_t t, const BachelierParams& params, const RiskAversion& ra);

/// Quadratic terminal penalty, mu = 0, alpha sigma^2 < 1: action S_t - S0,
/// value -(S_t - S0)^2 / 2 + (T - t) log(1 - alpha sigma^2) / (2 alpha).
AnalyticSolution analytic_quadratic_solution(std::size_t t, double price, const BachelierParams& params,
                                             const RiskAversion& ra);

/// At-the-money risk-neutral call price sigma sqrt(T / (2 pi)); requires mu = 0.
double bachelier_call_price(const BachelierParams& params);

/// Risk-neutral Bachelier call value E[max(S_T - K, 0) | S_t = price], mu = 0.
double bachelier_call_value(std::size_t t, double price, double strike, const BachelierParams& params);

enum class SolutionKind { Gaussian, Quadratic };

double analytic_value(SolutionKind kind, const MarketState& s, const BachelierParams& params, const RiskAversion& ra);

/// per_layer prices for every t in [0, T): quantiles (i + 1/2) / per_layer of
/// the marginal law S0 + mu t + sigma sqrt(t) N(0, 1).
std::vector<MarketState> probe_states(const BachelierParams& params, std::size_t per_layer = 64);

using MarketValueFunction = std::function<double(const MarketState&)>;

/// Root-mean-square gap between a value function and the analytic solution over probes.
double rmse_vs_analytic(const MarketValueFunction& value, SolutionKind kind, const BachelierParams& params,
                        const RiskAversion& ra, std::span<const MarketState> probes);

/// Transition sampler over (t, S_t): t uniform on [0, T), S_t from its
/// marginal law, then one step. Features are t / T and the standardized
/// price (S_t - S0 - mu t) / (sigma sqrt(T)).
class TradingEnv final : public TransitionSampler {
 public:
  TradingEnv(BachelierParams params, TradingRewardSpec spec);

  Eigen::Index feature_dim() const override { return 2; }
  TransitionBatch sample(std::size_t n, Rng& rng) const override;

  Eigen::Vector2d features(const MarketState& s) const;
  Eigen::MatrixXd features(std::span<const MarketState> states) const;

  /// Value function backed by a network over this environment's features.
  MarketValueFunction value_function(const Mlp& net) const;

  const BachelierParams& params() const { return params_; }
  const TradingRewardSpec& reward_spec() const { return spec_; }

 private:
  BachelierParams params_;
  TradingRewardSpec spec_;
};

double rmse_vs_analytic(const Mlp& value_net, const TradingEnv& env, SolutionKind kind, const RiskAversion& ra,
                        std::span<const MarketState> probes);

}  // namespace riskval
