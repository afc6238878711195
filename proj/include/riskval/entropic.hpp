#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "riskval/errors.hpp"

namespace riskval {

/// Curvature of the exponential utility u(x) = (1 - exp(-alpha x)) / alpha.
///
/// alpha = 0 is the risk-neutral limit; every consumer implements the limit
/// explicitly. Negative alpha (risk seeking) is accepted here so the core
/// formulas can be evaluated, but learners call require_nonnegative().
template <typename Scalar>
class BasicRiskAversion {
 public:
  constexpr BasicRiskAversion() = default;

  explicit BasicRiskAversion(Scalar alpha) : alpha_(alpha) {
    if (!std::isfinite(static_cast<double>(alpha))) {
      throw InputError("risk aversion must be finite");
    }
  }

  static BasicRiskAversion risk_neutral() { return BasicRiskAversion(Scalar(0)); }

  Scalar alpha() const { return alpha_; }
  bool is_risk_neutral() const { return alpha_ == Scalar(0); }

  const BasicRiskAversion& require_nonnegative() const {
    if (alpha_ < Scalar(0)) throw InputError("risk-seeking alpha < 0 is not supported here");
    return *this;
  }

  const BasicRiskAversion& require_positive() const {
    if (!(alpha_ > Scalar(0))) throw InputError("this operation requires alpha > 0");
    return *this;
  }

 private:
  Scalar alpha_ = Scalar(0);
};

using RiskAversion = BasicRiskAversion<double>;

/// Finite-support random variable: outcomes with matching probabilities.
template <typename Scalar>
class BasicDiscreteDistribution {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicDiscreteDistribution(Vector outcomes, Vector probabilities)
      : outcomes_(std::move(outcomes)), probabilities_(std::move(probabilities)) {
    if (outcomes_.size() == 0 || outcomes_.size() != probabilities_.size()) {
      throw InputError("distribution needs equal, nonzero numbers of outcomes and probabilities");
    }
    Scalar total(0);
    for (Eigen::Index i = 0; i < probabilities_.size(); ++i) {
      const Scalar p = probabilities_[i];
      if (!(p >= Scalar(0)) || !std::isfinite(static_cast<double>(p))) {
        throw InputError("probabilities must be finite and nonnegative");
      }
      if (!std::isfinite(static_cast<double>(outcomes_[i]))) {
        throw InputError("outcomes must be finite");
      }
      total += p;
    }
    using std::abs;
    if (abs(total - Scalar(1)) > Scalar(1e-12)) {
      throw InputError("probabilities must sum to 1 (got " + std::to_string(static_cast<double>(total)) + ")");
    }
  }

  static BasicDiscreteDistribution point_mass(Scalar x) {
    return BasicDiscreteDistribution(Vector::Constant(1, x), Vector::Ones(1));
  }

  /// Equiprobable outcomes.
  static BasicDiscreteDistribution uniform(Vector outcomes) {
    const auto n = outcomes.size();
    if (n == 0) throw InputError("uniform distribution needs at least one outcome");
    return BasicDiscreteDistribution(std::move(outcomes), Vector::Constant(n, Scalar(1) / Scalar(n)));
  }

  const Vector& outcomes() const { return outcomes_; }
  const Vector& probabilities() const { return probabilities_; }
  Eigen::Index size() const { return outcomes_.size(); }

  Scalar mean() const { return probabilities_.dot(outcomes_) / probabilities_.sum(); }

  /// Same probabilities, every outcome shifted by c.
  BasicDiscreteDistribution shifted(Scalar c) const {
    return BasicDiscreteDistribution((outcomes_.array() + c).matrix(), probabilities_);
  }

 private:
  Vector outcomes_;
  Vector probabilities_;
};

using DiscreteDistribution = BasicDiscreteDistribution<double>;

/// Exponential-utility certainty equivalent -log(E[exp(-alpha X)]) / alpha
/// of outcomes x with (possibly unnormalized) weights p.
///
/// Evaluated as a max-shifted log-sum-exp; the remaining sum is written as
/// log1p(sum p (exp(d) - 1) / sum p) so that alpha -> 0 degrades smoothly into
/// the mean instead of cancelling. alpha = 0 returns the weighted mean.
template <typename DerivedX, typename DerivedP, typename Scalar>
Scalar weighted_certainty_equivalent(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedP>& p,
                                     const BasicRiskAversion<Scalar>& ra) {
  using std::expm1;
  using std::log1p;
  const Scalar alpha = ra.alpha();
  Scalar mass(0);
  for (Eigen::Index i = 0; i < x.size(); ++i) mass += p[i];
  if (!(mass > Scalar(0))) throw InputError("certainty equivalent needs positive total probability");
  if (alpha == Scalar(0)) return p.dot(x) / mass;

  Scalar shift = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (p[i] > Scalar(0)) shift = std::max(shift, -alpha * x[i]);
  }
  Scalar excess(0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (p[i] > Scalar(0)) excess += p[i] * expm1(-alpha * x[i] - shift);
  }
  const Scalar ce = -(shift + log1p(excess / mass)) / alpha;
  if (!std::isfinite(static_cast<double>(ce))) throw InternalError("certainty equivalent is not finite");
  return ce;
}

template <typename Scalar>
Scalar certainty_equivalent(const BasicDiscreteDistribution<Scalar>& dist, const BasicRiskAversion<Scalar>& ra) {
  return weighted_certainty_equivalent(dist.outcomes(), dist.probabilities(), ra);
}

/// Closed form for a Gaussian N(mean, variance): mean - alpha * variance / 2.
template <typename Scalar>
Scalar gaussian_certainty_equivalent(Scalar mean, Scalar variance, const BasicRiskAversion<Scalar>& ra) {
  if (!(variance >= Scalar(0))) throw InputError("variance must be nonnegative");
  return mean - ra.alpha() * variance / Scalar(2);
}

}  // namespace riskval
