#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

#include "riskval/entropic.hpp"
#include "riskval/rng.hpp"

namespace riskval::testing {

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline Eigen::VectorXd random_probabilities(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd p(n);
  for (Eigen::Index i = 0; i < n; ++i) p[i] = 0.05 + uniform01(rng);
  return p / p.sum();
}

inline DiscreteDistribution random_distribution(Rng& rng, Eigen::Index n, double scale = 3.0) {
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = uniform(rng, -scale, scale);
  Eigen::VectorXd p = random_probabilities(rng, n);
  p[n - 1] = 1.0 - p.head(n - 1).sum();
  return DiscreteDistribution(x, p);
}

inline double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace riskval::testing
