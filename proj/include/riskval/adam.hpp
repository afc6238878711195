#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "riskval/errors.hpp"

namespace riskval {

template <typename Scalar>
struct BasicAdamState {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicAdamState(Eigen::Index num_parameters, Scalar base_lr, Scalar beta1 = Scalar(0.99), Scalar beta2 = Scalar(0.999),
                 Scalar eps = Scalar(1e-8))
      : first_moment(Vector::Zero(num_parameters)),
        second_moment(Vector::Zero(num_parameters)),
        beta1(beta1),
        beta2(beta2),
        base_lr(base_lr),
        eps(eps) {
    if (!(base_lr > Scalar(0))) throw InputError("learning rate must be positive");
    if (!(beta1 >= Scalar(0) && beta1 < Scalar(1) && beta2 >= Scalar(0) && beta2 < Scalar(1))) {
      throw InputError("Adam betas must lie in [0, 1)");
    }
  }

  Vector first_moment;
  Vector second_moment;
  std::uint64_t step = 0;
  Scalar beta1;
  Scalar beta2;
  Scalar base_lr;
  Scalar eps;
};

using AdamState = BasicAdamState<double>;

/// Clamp every entry to [-value_clip, value_clip], then rescale the whole
/// vector to norm_clip if its norm is larger. NaN entries pass through.
template <typename Derived, typename Scalar>
void clip_gradients(Eigen::MatrixBase<Derived>& grads, Scalar value_clip, Scalar norm_clip) {
  for (Eigen::Index i = 0; i < grads.size(); ++i) {
    auto& g = grads.derived().coeffRef(i);
    if (g > value_clip) g = value_clip;
    else if (g < -value_clip) g = -value_clip;
  }
  const Scalar norm = grads.norm();
  if (norm > norm_clip) grads *= norm_clip / norm;
}

/// Bias-corrected Adam with effective rate base_lr * lr_scale.
template <typename Scalar>
void adam_step(BasicAdamState<Scalar>& state, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& params,
               const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& grads, Scalar lr_scale) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw InputError("Adam state, parameters and gradients must have equal sizes");
  }
  using std::pow;
  using std::sqrt;
  ++state.step;
  state.first_moment = state.beta1 * state.first_moment + (Scalar(1) - state.beta1) * grads;
  state.second_moment = state.beta2 * state.second_moment + (Scalar(1) - state.beta2) * grads.cwiseAbs2();
  const Scalar t = static_cast<Scalar>(state.step);
  const Scalar bias1 = Scalar(1) - pow(state.beta1, t);
  const Scalar bias2 = Scalar(1) - pow(state.beta2, t);
  const Scalar lr = state.base_lr * lr_scale;
  params.array() -= lr * (state.first_moment.array() / bias1) /
                    ((state.second_moment.array() / bias2).sqrt() + state.eps);
}

}  // namespace riskval
