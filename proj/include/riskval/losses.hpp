#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string_view>

#include "riskval/entropic.hpp"
#include "riskval/errors.hpp"

namespace riskval {

enum class LossKind { Mse, Emse, Softplus, ItakuraSaito };

inline constexpr LossKind kAllLossKinds[] = {LossKind::Mse, LossKind::Emse, LossKind::Softplus,
                                             LossKind::ItakuraSaito};

constexpr std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Mse: return "MSE";
    case LossKind::Emse: return "EMSE";
    case LossKind::Softplus: return "SP";
    case LossKind::ItakuraSaito: return "IS";
  }
  return "?";
}

/// Accepts the short names above, case-sensitive.
LossKind parse_loss_kind(std::string_view name);

/// A loss value together with its derivative in the predicted value
/// (equivalently in the TD error delta = v - target, for delta-only losses).
template <typename Scalar>
struct LossEval {
  Scalar value;
  Scalar grad;
};

namespace detail {

template <typename Scalar>
Scalar dilog_series(Scalar x) {
  // |x| <= 1/2: sum x^k / k^2 converges geometrically.
  Scalar term = x;
  Scalar sum(0);
  for (int k = 1; k < 200; ++k) {
    const Scalar add = term / (Scalar(k) * Scalar(k));
    sum += add;
    using std::abs;
    if (abs(add) <= std::numeric_limits<Scalar>::epsilon() * abs(sum) * Scalar(0.01)) break;
    term *= x;
  }
  return sum;
}

template <typename Scalar>
Scalar softplus(Scalar y) {
  using std::exp;
  using std::log1p;
  return y > Scalar(0) ? y + log1p(exp(-y)) : log1p(exp(y));
}

template <typename Scalar>
Scalar logistic(Scalar y) {
  using std::exp;
  if (y >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-y));
  const Scalar e = exp(y);
  return e / (Scalar(1) + e);
}

}  // namespace detail

/// Spence's dilogarithm li2(x) = -int_0^x log(1 - t) / t dt for x <= 1.
///
/// Identities used to land every argument in |u| <= 1/2, where the power
/// series is evaluated:
///   x in (1/2, 1):  li2(x) = pi^2/6 - log(x) log(1-x) - li2(1-x)
///   x in [-1, -1/2): li2(x) = -li2(x/(x-1)) - log(1-x)^2 / 2
///   x < -1:          li2(x) = -pi^2/6 - log(-x)^2 / 2 - li2(1/x)
template <typename Scalar>
Scalar dilogarithm(Scalar x) {
  using std::log;
  using std::log1p;
  const Scalar pi2_6 = std::numbers::pi_v<Scalar> * std::numbers::pi_v<Scalar> / Scalar(6);
  if (std::isnan(static_cast<double>(x)) || x > Scalar(1)) throw InputError("dilogarithm is defined here for x <= 1");
  if (x == Scalar(1)) return pi2_6;
  if (x < Scalar(-1)) {
    const Scalar l = log(-x);
    return -pi2_6 - l * l / Scalar(2) - dilogarithm(Scalar(1) / x);
  }
  if (x < Scalar(-0.5)) {
    const Scalar l = log1p(-x);
    return -detail::dilog_series(x / (x - Scalar(1))) - l * l / Scalar(2);
  }
  if (x <= Scalar(0.5)) return detail::dilog_series(x);
  return pi2_6 - log(x) * log1p(-x) - detail::dilog_series(Scalar(1) - x);
}

/// li2(-exp(y)) without forming exp(y) when y is large.
template <typename Scalar>
Scalar dilogarithm_of_negative_exp(Scalar y) {
  using std::exp;
  if (std::isnan(static_cast<double>(y))) return y;
  if (y <= Scalar(0)) return dilogarithm(-exp(y));
  const Scalar pi2_6 = std::numbers::pi_v<Scalar> * std::numbers::pi_v<Scalar> / Scalar(6);
  return -pi2_6 - y * y / Scalar(2) - dilogarithm(-exp(-y));
}

/// delta^2 / 2.
template <typename Scalar>
LossEval<Scalar> mse_loss(Scalar delta) {
  return {delta * delta / Scalar(2), delta};
}

/// (exp(-alpha v) - exp(-alpha target))^2 / (2 alpha^2), gradient in v.
/// Exponentials are not rescaled: overflow is an observable of this loss.
template <typename Scalar>
LossEval<Scalar> emse_loss(Scalar v_s, Scalar target, const BasicRiskAversion<Scalar>& ra) {
  using std::exp;
  const Scalar alpha = ra.require_positive().alpha();
  const Scalar pred = exp(-alpha * v_s);
  const Scalar tgt = exp(-alpha * target);
  const Scalar diff = pred - tgt;
  return {diff * diff / (Scalar(2) * alpha * alpha), pred * (tgt - pred) / alpha};
}

/// Softplus loss; its gradient 2 delta logistic(alpha delta) is the
/// classical risk-sensitive TD rule.
template <typename Scalar>
LossEval<Scalar> softplus_loss(Scalar delta, const BasicRiskAversion<Scalar>& ra) {
  const Scalar alpha = ra.require_positive().alpha();
  const Scalar y = alpha * delta;
  const Scalar grad = Scalar(2) * delta * detail::logistic(y);
  if (std::abs(static_cast<double>(y)) < 0.1) {
    // Integral of 2 t logistic(t) from 0 to y, expanded to avoid cancellation.
    const Scalar y2 = y * y;
    const Scalar series =
        y2 * (Scalar(1) / Scalar(2) +
              y * (Scalar(1) / Scalar(6) +
                   y2 * (Scalar(-1) / Scalar(120) + y2 * (Scalar(1) / Scalar(1680) - y2 * Scalar(17) / Scalar(362880)))));
    return {series / (alpha * alpha), grad};
  }
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar value = Scalar(2) * delta / alpha * detail::softplus(y) +
                       Scalar(2) / (alpha * alpha) * dilogarithm_of_negative_exp(y) +
                       pi * pi / (Scalar(6) * alpha * alpha);
  return {value, grad};
}

/// Itakura-Saito loss (exp(alpha delta) - alpha delta - 1) / alpha^2.
template <typename Scalar>
LossEval<Scalar> is_loss(Scalar delta, const BasicRiskAversion<Scalar>& ra) {
  using std::abs;
  using std::expm1;
  const Scalar alpha = ra.require_positive().alpha();
  const Scalar y = alpha * delta;
  if (abs(y) < Scalar(1e-4)) {
    // Second-order Taylor forms in alpha delta; the closed form cancels here.
    return {delta * delta / Scalar(2), delta * (Scalar(1) + y / Scalar(2))};
  }
  const Scalar em1 = expm1(y);
  return {(em1 - y) / (alpha * alpha), em1 / alpha};
}

/// Itakura-Saito distance x/y - log(x/y) - 1.
template <typename Scalar>
Scalar is_divergence(Scalar x, Scalar y) {
  using std::log;
  if (!(x > Scalar(0)) || !(y > Scalar(0))) throw InputError("Itakura-Saito distance needs positive arguments");
  const Scalar ratio = x / y;
  return ratio - log(ratio) - Scalar(1);
}

/// Loss of predicting v_s for the bootstrapped target, by kind.
///
/// grad is always d(loss)/d(v_s). At alpha = 0 every kind collapses onto
/// its risk-neutral limit, which is MSE.
template <typename Scalar>
LossEval<Scalar> evaluate_loss(LossKind kind, Scalar v_s, Scalar target, const BasicRiskAversion<Scalar>& ra) {
  const Scalar delta = v_s - target;
  if (kind == LossKind::Mse || ra.is_risk_neutral()) return mse_loss(delta);
  switch (kind) {
    case LossKind::Emse: return emse_loss(v_s, target, ra);
    case LossKind::Softplus: return softplus_loss(delta, ra);
    case LossKind::ItakuraSaito: return is_loss(delta, ra);
    case LossKind::Mse: break;
  }
  return mse_loss(delta);
}

}  // namespace riskval
