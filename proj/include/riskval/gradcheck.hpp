#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>

#include "riskval/entropic.hpp"
#include "riskval/losses.hpp"

namespace riskval {

/// |a - n| / max(|a|, |n|, floor): relative, with an absolute floor for
/// gradients that vanish.
inline constexpr double kGradientErrorFloor = 1e-6;
double gradient_error(double analytic, double numeric, double floor = kGradientErrorFloor);

/// Central difference with one Richardson step, error O(h^4).
double central_difference(const std::function<double(double)>& f, double x, double h);

/// Largest gradient_error of a loss's analytic gradient in v over delta in
/// [-5, 5] (`points` values), target fixed at 0.3.
double loss_gradient_max_error(LossKind kind, const RiskAversion& ra, std::size_t points);

/// Largest gradient_error of the MLP backward pass against finite
/// differences of sum_j upstream_j * output_j, over every parameter.
double mlp_gradient_max_error(std::uint64_t seed);

/// End-to-end: the mean TD loss gradient of a value network on a hedging
/// batch against finite differences in every parameter.
double td_gradient_max_error(LossKind kind, const RiskAversion& ra, std::uint64_t seed);

/// Same for the policy objective gradient (alpha > 0).
double policy_gradient_max_error(const RiskAversion& ra, std::uint64_t seed);

/// li2 by direct power series in long double, for -1 <= x < 1.
double dilogarithm_series_oracle(double x);

/// Largest |dilogarithm(x) - oracle(x)| over `points` values spread over [-1, 0.99].
double dilogarithm_max_error(std::size_t points);

}  // namespace riskval
