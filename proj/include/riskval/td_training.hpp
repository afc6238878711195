#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "riskval/entropic.hpp"
#include "riskval/losses.hpp"
#include "riskval/mlp.hpp"
#include "riskval/records.hpp"
#include "riskval/rng.hpp"

namespace riskval {

struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t total_iters = 6000;
  std::size_t warmup_iters = 300;
  std::size_t plateau_iters = 2700;
  std::size_t cosine_t_max = 3000;
  double grad_value_clip = 1.0;
  double grad_norm_clip = 10.0;
  std::size_t target_sync_period = 100;
  RiskAversion ra;
  LossKind kind = LossKind::ItakuraSaito;

  double value_lr = 1e-3;
  double policy_lr = 1e-3;
  double adam_beta1 = 0.99;
  double adam_beta2 = 0.999;
  std::vector<Eigen::Index> hidden_sizes = {32, 32};
  /// Policy action = policy_output_scale * network output.
  double policy_output_scale = 1.0;

  std::size_t log_every = 250;
  std::size_t probe_every = 1000;
  bool fail_fast = false;

  /// Throws InputError when the schedule or clips are inconsistent.
  void validate() const;

  /// 2x32 nets, batch 256, lr 1e-3, 6k iterations (300 warmup, 2.7k plateau, 3k cosine).
  static TrainConfig desk_scale();
  /// Original sizes: 2x64 nets, batch 1024, lr 1e-4, 1k warmup, 49k plateau, 50k cosine.
  static TrainConfig reference_scale();
};

/// Learning-rate multiplier: linear 0.01 -> 1 over warmup, flat over the
/// plateau, then (1 + cos(pi t / T_max)) / 2, held at 0 past T_max.
double lr_scale(std::size_t iter, const TrainConfig& cfg);

/// A batch of one-step transitions from an environment whose state law does
/// not depend on the action and whose reward is affine in it:
/// r = reward_base + action * reward_slope.
struct TransitionBatch {
  Eigen::MatrixXd features;       ///< s, one column per sample
  Eigen::MatrixXd next_features;  ///< s'
  Eigen::RowVectorXd reward_base;
  Eigen::RowVectorXd reward_slope;
  Eigen::Array<bool, 1, Eigen::Dynamic> next_terminal;

  Eigen::Index size() const { return features.cols(); }
  Eigen::RowVectorXd rewards(const Eigen::RowVectorXd& actions) const {
    return reward_base + actions.cwiseProduct(reward_slope);
  }
};

class TransitionSampler {
 public:
  virtual ~TransitionSampler() = default;
  virtual Eigen::Index feature_dim() const = 0;
  /// Draws states from the visitation law and one transition from each.
  virtual TransitionBatch sample(std::size_t n, Rng& rng) const = 0;
};

/// Deterministic action per state column.
using ActionFunction = std::function<Eigen::RowVectorXd(const Eigen::MatrixXd& features)>;

/// Extra metrics evaluated every probe_every iterations and at the end.
using ProbeFunction =
    std::function<std::vector<std::pair<std::string, double>>(const Mlp& value_net, const Mlp* policy_net)>;

struct LossAndGradient {
  double value;
  Eigen::VectorXd grad;
};

/// Mean TD loss over the batch and its gradient in the live parameters.
/// Targets r + V_target(s') use target_net only; terminal s' bootstraps 0.
LossAndGradient value_loss_gradient(const Mlp& value_net, const Mlp& target_net, const TransitionBatch& batch,
                                    const Eigen::RowVectorXd& actions, LossKind kind, const RiskAversion& ra);

/// Mean of exp(-alpha (r(s, pi(s), s') + V(s') - V(s))) / alpha and its
/// gradient in the policy parameters; value_net is held fixed.
LossAndGradient policy_objective_gradient(const Mlp& policy_net, double output_scale, const Mlp& value_net,
                                          const TransitionBatch& batch, const RiskAversion& ra);

struct TrainResult {
  Mlp value_net;
  std::optional<Mlp> policy_net;
  std::vector<RunRecord> history;
  /// First iteration whose value loss was not finite.
  std::optional<std::size_t> first_nonfinite_iter;
};

/// Value network sizes for a sampler: feature_dim, hidden..., 1.
std::vector<Eigen::Index> network_sizes(const TransitionSampler& env, const TrainConfig& cfg);

/// TD(0) for a fixed policy. The run seed initializes the network
/// (stream {seed, 1}) and the batches (stream {seed, 3}).
TrainResult train_value_td0(const TransitionSampler& env, const TrainConfig& cfg, std::uint64_t seed,
                            const ActionFunction& policy, const ProbeFunction& probe = {});

/// Alternates one value step and one policy step per iteration, starting
/// from the given networks.
TrainResult train_policy(const TransitionSampler& env, Mlp value_net, Mlp policy_net, const TrainConfig& cfg,
                         std::uint64_t seed, const ProbeFunction& probe = {});

/// train_policy from freshly initialized networks (streams {seed, 1} and {seed, 2}).
TrainResult train_actor_critic(const TransitionSampler& env, const TrainConfig& cfg, std::uint64_t seed,
                               const ProbeFunction& probe = {});

}  // namespace riskval
