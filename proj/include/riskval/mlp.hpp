#pragma once

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "riskval/errors.hpp"
#include "riskval/rng.hpp"

namespace riskval {

/// Mish(x) = x tanh(softplus(x)), using tanh(log(1 + e^x)) = n / (n + 2) with n = e^x (e^x + 2).
template <typename Scalar>
Scalar mish(Scalar x) {
  using std::exp;
  if (x > Scalar(20)) return x;
  const Scalar e = exp(x);
  const Scalar n = e * (e + Scalar(2));
  return x * n / (n + Scalar(2));
}

template <typename Scalar>
Scalar mish_derivative(Scalar x) {
  using std::exp;
  if (x > Scalar(20)) return Scalar(1);
  const Scalar e = exp(x);
  const Scalar n = e * (e + Scalar(2));
  const Scalar th = n / (n + Scalar(2));
  const Scalar sigmoid = e / (Scalar(1) + e);
  return th + x * (Scalar(1) - th * th) * sigmoid;
}

/// Feed-forward network with Mish hidden layers and a scalar identity output.
///
/// All parameters live in one flat vector, layer by layer: the weight matrix
/// (outputs x inputs, column-major) followed by the bias. Layer views are
/// Eigen::Maps into that vector, so flatten/unflatten are plain copies and
/// optimizers work directly on parameters().
template <typename Scalar>
class BasicMlp {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  BasicMlp() = default;

  /// Zero-initialized network. The last size must be 1.
  explicit BasicMlp(std::vector<Eigen::Index> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw InputError("an MLP needs input and output sizes");
    if (sizes_.back() != 1) throw InputError("the output layer must have exactly one unit");
    offsets_.push_back(0);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw InputError("layer sizes must be positive");
      offsets_.push_back(offsets_.back() + sizes_[l + 1] * sizes_[l] + sizes_[l + 1]);
    }
    params_ = Vector::Zero(offsets_.back());
  }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static BasicMlp initialized(std::vector<Eigen::Index> layer_sizes, Rng& rng) {
    BasicMlp net(std::move(layer_sizes));
    for (Eigen::Index l = 0; l < net.num_layers(); ++l) {
      const Scalar bound = Scalar(1) / std::sqrt(Scalar(net.sizes_[static_cast<std::size_t>(l)]));
      auto segment = net.params_.segment(net.offsets_[static_cast<std::size_t>(l)],
                                         net.offsets_[static_cast<std::size_t>(l) + 1] - net.offsets_[static_cast<std::size_t>(l)]);
      for (Eigen::Index i = 0; i < segment.size(); ++i) segment[i] = bound * Scalar(2 * uniform01(rng) - 1);
    }
    return net;
  }

  const std::vector<Eigen::Index>& layer_sizes() const { return sizes_; }
  Eigen::Index input_size() const { return sizes_.front(); }
  Eigen::Index num_layers() const { return static_cast<Eigen::Index>(sizes_.size()) - 1; }
  Eigen::Index num_parameters() const { return params_.size(); }

  const Vector& parameters() const { return params_; }
  Vector& parameters() { return params_; }
  Vector flatten() const { return params_; }
  void unflatten(const Vector& flat) {
    if (flat.size() != params_.size()) throw InputError("parameter vector has the wrong length");
    params_ = flat;
  }

  Eigen::Map<const Matrix> weight(Eigen::Index l) const {
    return Eigen::Map<const Matrix>(params_.data() + offset(l), out(l), in(l));
  }
  Eigen::Map<Matrix> weight(Eigen::Index l) { return Eigen::Map<Matrix>(params_.data() + offset(l), out(l), in(l)); }
  Eigen::Map<const Vector> bias(Eigen::Index l) const {
    return Eigen::Map<const Vector>(params_.data() + offset(l) + out(l) * in(l), out(l));
  }
  Eigen::Map<Vector> bias(Eigen::Index l) { return Eigen::Map<Vector>(params_.data() + offset(l) + out(l) * in(l), out(l)); }

  /// One output per input column.
  RowVector forward_batch(const Matrix& inputs) const {
    check_inputs(inputs.rows());
    Matrix a = inputs;
    for (Eigen::Index l = 0; l < num_layers(); ++l) {
      Matrix z = (weight(l) * a).colwise() + bias(l);
      a = l + 1 < num_layers() ? Matrix(z.unaryExpr([](Scalar x) { return mish(x); })) : std::move(z);
    }
    return a;
  }

  Scalar forward(const Vector& input) const { return forward_batch(input)(0); }

  /// Pre-activations and activations of one batched forward pass.
  struct ForwardCache {
    std::vector<Matrix> pre;
    std::vector<Matrix> act;  ///< act[0] = inputs, act.back() = outputs
    const RowVector output() const { return act.back(); }
  };

  ForwardCache forward_cached(const Matrix& inputs) const {
    check_inputs(inputs.rows());
    const auto L = static_cast<std::size_t>(num_layers());
    ForwardCache cache{std::vector<Matrix>(L), std::vector<Matrix>(L + 1)};
    cache.act[0] = inputs;
    for (std::size_t l = 0; l < L; ++l) {
      const auto li = static_cast<Eigen::Index>(l);
      cache.pre[l] = (weight(li) * cache.act[l]).colwise() + bias(li);
      cache.act[l + 1] = l + 1 < L ? Matrix(cache.pre[l].unaryExpr([](Scalar x) { return mish(x); })) : cache.pre[l];
    }
    return cache;
  }

  /// Gradient of sum_j upstream[j] * output_j with respect to every parameter.
  Vector backward_cached(const ForwardCache& cache, const RowVector& upstream) const {
    if (upstream.size() != cache.act[0].cols()) throw InputError("upstream gradient must match the batch size");
    const auto L = static_cast<std::size_t>(num_layers());
    Vector grad(params_.size());
    Matrix g = upstream;
    for (std::size_t l = L; l-- > 0;) {
      const auto li = static_cast<Eigen::Index>(l);
      Eigen::Map<Matrix>(grad.data() + offset(li), out(li), in(li)).noalias() = g * cache.act[l].transpose();
      Eigen::Map<Vector>(grad.data() + offset(li) + out(li) * in(li), out(li)) = g.rowwise().sum();
      if (l > 0) {
        g = (weight(li).transpose() * g)
                .cwiseProduct(cache.pre[l - 1].unaryExpr([](Scalar x) { return mish_derivative(x); }));
      }
    }
    return grad;
  }

  Vector backward_batch(const Matrix& inputs, const RowVector& upstream) const {
    return backward_cached(forward_cached(inputs), upstream);
  }

  Vector backward(const Vector& input, Scalar upstream) const {
    return backward_batch(input, RowVector::Constant(1, upstream));
  }

  friend bool operator==(const BasicMlp& a, const BasicMlp& b) {
    return a.sizes_ == b.sizes_ && a.params_.size() == b.params_.size() && (a.params_.array() == b.params_.array()).all();
  }

 private:
  Eigen::Index offset(Eigen::Index l) const { return offsets_[static_cast<std::size_t>(l)]; }
  Eigen::Index in(Eigen::Index l) const { return sizes_[static_cast<std::size_t>(l)]; }
  Eigen::Index out(Eigen::Index l) const { return sizes_[static_cast<std::size_t>(l) + 1]; }

  void check_inputs(Eigen::Index rows) const {
    if (rows != input_size()) {
      throw InputError("input has " + std::to_string(rows) + " features, network expects " + std::to_string(input_size()));
    }
  }

  std::vector<Eigen::Index> sizes_;
  std::vector<Eigen::Index> offsets_;
  Vector params_;
};

using Mlp = BasicMlp<double>;

/// Frozen copy of a network used for bootstrap targets. Only a whole
/// parameter copy (hard sync) changes it.
class TargetNetwork {
 public:
  explicit TargetNetwork(const Mlp& live) : net_(live) {}
  void sync_from(const Mlp& live) { net_ = live; }
  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
};

/// Checkpoint layout (little-endian):
///   8 bytes  magic "RVMLP001"
///   u64      number of layer sizes n
///   n x u64  layer sizes
///   u64      parameter count p
///   p x f64  parameters in flat order
void save_checkpoint(const Mlp& net, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace riskval
