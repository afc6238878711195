#include "riskval/td_training.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "riskval/adam.hpp"
#include "riskval/errors.hpp"

namespace riskval {

void TrainConfig::validate() const {
  if (batch_size == 0 || total_iters == 0) throw InputError("batch size and iteration count must be positive");
  if (warmup_iters + plateau_iters > total_iters) throw InputError("warmup + plateau exceeds total iterations");
  if (!(grad_value_clip > 0.0) || !(grad_norm_clip > 0.0)) throw InputError("gradient clips must be positive");
  if (target_sync_period == 0) throw InputError("target sync period must be positive");
  if (!(value_lr > 0.0) || !(policy_lr > 0.0)) throw InputError("learning rates must be positive");
  if (!(policy_output_scale > 0.0)) throw InputError("policy output scale must be positive");
  if (log_every == 0 || probe_every == 0) throw InputError("logging periods must be positive");
  for (Eigen::Index h : hidden_sizes) {
    if (h <= 0) throw InputError("hidden sizes must be positive");
  }
  ra.require_nonnegative();
}

TrainConfig TrainConfig::desk_scale() { return TrainConfig{}; }

TrainConfig TrainConfig::reference_scale() {
  TrainConfig cfg;
  cfg.batch_size = 1024;
  cfg.total_iters = 100000;
  cfg.warmup_iters = 1000;
  cfg.plateau_iters = 49000;
  cfg.cosine_t_max = 50000;
  cfg.value_lr = 1e-4;
  cfg.policy_lr = 1e-4;
  cfg.hidden_sizes = {64, 64};
  return cfg;
}

double lr_scale(std::size_t iter, const TrainConfig& cfg) {
  constexpr double kStartFactor = 0.01;
  if (iter < cfg.warmup_iters) {
    return kStartFactor + (1.0 - kStartFactor) * static_cast<double>(iter) / static_cast<double>(cfg.warmup_iters);
  }
  const std::size_t decay_start = cfg.warmup_iters + cfg.plateau_iters;
  if (iter < decay_start || cfg.cosine_t_max == 0) return 1.0;
  const double t = static_cast<double>(std::min(iter - decay_start, cfg.cosine_t_max));
  return 0.5 * (1.0 + std::cos(std::numbers::pi * t / static_cast<double>(cfg.cosine_t_max)));
}

LossAndGradient value_loss_gradient(const Mlp& value_net, const Mlp& target_net, const TransitionBatch& batch,
                                    const Eigen::RowVectorXd& actions, LossKind kind, const RiskAversion& ra) {
  const Eigen::Index n = batch.size();
  const auto cache = value_net.forward_cached(batch.features);
  const Eigen::RowVectorXd v = cache.output();
  const Eigen::RowVectorXd bootstrap = batch.next_terminal.select(0.0, target_net.forward_batch(batch.next_features));
  const Eigen::RowVectorXd targets = batch.rewards(actions) + bootstrap;
  Eigen::RowVectorXd upstream(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto e = evaluate_loss(kind, v[i], targets[i], ra);
    total += e.value;
    upstream[i] = e.grad / static_cast<double>(n);
  }
  return {total / static_cast<double>(n), value_net.backward_cached(cache, upstream)};
}

LossAndGradient policy_objective_gradient(const Mlp& policy_net, double output_scale, const Mlp& value_net,
                                          const TransitionBatch& batch, const RiskAversion& ra) {
  const double alpha = ra.require_positive().alpha();
  const Eigen::Index n = batch.size();
  const auto cache = policy_net.forward_cached(batch.features);
  const Eigen::RowVectorXd actions = output_scale * cache.output();
  const Eigen::RowVectorXd v = value_net.forward_batch(batch.features);
  const Eigen::RowVectorXd v_next = batch.next_terminal.select(0.0, value_net.forward_batch(batch.next_features));
  const Eigen::RowVectorXd advantage = batch.rewards(actions) + v_next - v;
  const Eigen::RowVectorXd weight = (-alpha * advantage).array().exp().matrix();
  const double objective = weight.sum() / (alpha * static_cast<double>(n));
  const Eigen::RowVectorXd upstream = -(output_scale / static_cast<double>(n)) * weight.cwiseProduct(batch.reward_slope);
  return {objective, policy_net.backward_cached(cache, upstream)};
}

std::vector<Eigen::Index> network_sizes(const TransitionSampler& env, const TrainConfig& cfg) {
  std::vector<Eigen::Index> sizes{env.feature_dim()};
  sizes.insert(sizes.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
  sizes.push_back(1);
  return sizes;
}

namespace {

class Trainer {
 public:
  Trainer(const TransitionSampler& env, const TrainConfig& cfg, std::uint64_t seed, Mlp value_net,
          std::optional<Mlp> policy_net, ActionFunction fixed_policy)
      : env_(env),
        cfg_(cfg),
        seed_(seed),
        value_(std::move(value_net)),
        target_(value_),
        value_adam_(value_.num_parameters(), cfg.value_lr, cfg.adam_beta1, cfg.adam_beta2),
        policy_(std::move(policy_net)),
        fixed_policy_(std::move(fixed_policy)),
        batch_rng_(make_rng({seed, 3})) {
    cfg_.validate();
    if (value_.input_size() != env_.feature_dim()) throw InputError("value network does not match the feature size");
    if (policy_) {
      cfg_.ra.require_positive();
      if (policy_->input_size() != env_.feature_dim()) throw InputError("policy network does not match the feature size");
      policy_adam_.emplace(policy_->num_parameters(), cfg.policy_lr, cfg.adam_beta1, cfg.adam_beta2);
    }
  }

  TrainResult run(const ProbeFunction& probe) {
    TrainResult result;
    for (std::size_t iter = 0; iter < cfg_.total_iters; ++iter) {
      const double scale = lr_scale(iter, cfg_);
      const TransitionBatch batch = env_.sample(cfg_.batch_size, batch_rng_);
      const Eigen::RowVectorXd actions =
          policy_ ? Eigen::RowVectorXd(cfg_.policy_output_scale * policy_->forward_batch(batch.features))
                  : fixed_policy_(batch.features);

      LossAndGradient value_step = value_loss_gradient(value_, target_.net(), batch, actions, cfg_.kind, cfg_.ra);
      const bool log_now = iter % cfg_.log_every == 0;
      const bool first_failure = !std::isfinite(value_step.value) && !result.first_nonfinite_iter;
      if (first_failure) result.first_nonfinite_iter = iter;
      if (log_now || first_failure) record(result, iter, "loss", value_step.value);
      if (first_failure && cfg_.fail_fast) {
        throw NumericDivergence(std::string("non-finite ") + std::string(to_string(cfg_.kind)) + " loss at iteration " +
                                std::to_string(iter));
      }
      clip_gradients(value_step.grad, cfg_.grad_value_clip, cfg_.grad_norm_clip);
      adam_step(value_adam_, value_.parameters(), value_step.grad, scale);
      if ((iter + 1) % cfg_.target_sync_period == 0) target_.sync_from(value_);

      if (policy_) {
        LossAndGradient policy_step = policy_objective_gradient(*policy_, cfg_.policy_output_scale, value_, batch, cfg_.ra);
        if (log_now) record(result, iter, "policy_loss", policy_step.value);
        clip_gradients(policy_step.grad, cfg_.grad_value_clip, cfg_.grad_norm_clip);
        adam_step(*policy_adam_, policy_->parameters(), policy_step.grad, scale);
      }

      const std::size_t done = iter + 1;
      if (probe && (done % cfg_.probe_every == 0 || done == cfg_.total_iters)) {
        for (const auto& [name, value] : probe(value_, policy_ ? &*policy_ : nullptr)) record(result, done, name, value);
      }
    }
    result.value_net = std::move(value_);
    result.policy_net = std::move(policy_);
    return result;
  }

 private:
  void record(TrainResult& result, std::size_t iter, const std::string& name, double value) const {
    result.history.push_back({seed_, iter, std::string(to_string(cfg_.kind)), cfg_.ra.alpha(), name, value});
  }

  const TransitionSampler& env_;
  TrainConfig cfg_;
  std::uint64_t seed_;
  Mlp value_;
  TargetNetwork target_;
  AdamState value_adam_;
  std::optional<Mlp> policy_;
  std::optional<AdamState> policy_adam_;
  ActionFunction fixed_policy_;
  Rng batch_rng_;
};

}  // namespace

TrainResult train_value_td0(const TransitionSampler& env, const TrainConfig& cfg, std::uint64_t seed,
                            const ActionFunction& policy, const ProbeFunction& probe) {
  if (!policy) throw InputError("train_value_td0 needs a policy");
  Rng init = make_rng({seed, 1});
  Mlp value = Mlp::initialized(network_sizes(env, cfg), init);
  return Trainer(env, cfg, seed, std::move(value), std::nullopt, policy).run(probe);
}

TrainResult train_policy(const TransitionSampler& env, Mlp value_net, Mlp policy_net, const TrainConfig& cfg,
                         std::uint64_t seed, const ProbeFunction& probe) {
  return Trainer(env, cfg, seed, std::move(value_net), std::move(policy_net), {}).run(probe);
}

TrainResult train_actor_critic(const TransitionSampler& env, const TrainConfig& cfg, std::uint64_t seed,
                               const ProbeFunction& probe) {
  Rng value_init = make_rng({seed, 1});
  Rng policy_init = make_rng({seed, 2});
  Mlp value = Mlp::initialized(network_sizes(env, cfg), value_init);
  Mlp policy = Mlp::initialized(network_sizes(env, cfg), policy_init);
  return train_policy(env, std::move(value), std::move(policy), cfg, seed, probe);
}

}  // namespace riskval
