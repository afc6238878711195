#include "riskval/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "riskval/errors.hpp"
#include "riskval/gradcheck.hpp"
#include "riskval/mdp_suite.hpp"
#include "riskval/tabular.hpp"

namespace riskval {
namespace {

constexpr ExperimentKind kAllExperiments[] = {ExperimentKind::GaussianTrading, ExperimentKind::QuadraticTrading,
                                              ExperimentKind::DeepHedging,     ExperimentKind::GridTabular,
                                              ExperimentKind::OracleSuite,     ExperimentKind::GradCheck};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> items;
  while (true) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) items.push_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return items;
}

double to_double(std::string_view text) {
  const double v = parse_number(text);
  if (!std::isfinite(v)) throw InputError("expected a finite number, got '" + std::string(text) + "'");
  return v;
}

std::uint64_t to_uint(std::string_view text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError("expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

int to_int(std::string_view text) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError("expected an integer, got '" + std::string(text) + "'");
  }
  return v;
}

bool to_bool(std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw InputError("expected true or false, got '" + std::string(text) + "'");
}

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    t["alphas"] = [](ExperimentConfig& c, std::string_view v) {
      c.alphas.clear();
      for (auto item : split_list(v)) c.alphas.push_back(to_double(item));
    };
    t["losses"] = [](ExperimentConfig& c, std::string_view v) {
      c.losses.clear();
      for (auto item : split_list(v)) c.losses.push_back(parse_loss_kind(item));
    };
    t["seeds"] = [](ExperimentConfig& c, std::string_view v) {
      c.seeds.clear();
      for (auto item : split_list(v)) c.seeds.push_back(to_uint(item));
    };
    t["output_dir"] = [](ExperimentConfig& c, std::string_view v) { c.output_dir = std::string(v); };
    t["fail_fast"] = [](ExperimentConfig& c, std::string_view v) { c.fail_fast = to_bool(v); };
    t["parallel"] = [](ExperimentConfig& c, std::string_view v) { c.parallel = to_uint(v); };

    t["train.batch_size"] = [](ExperimentConfig& c, std::string_view v) { c.train.batch_size = to_uint(v); };
    t["train.total_iters"] = [](ExperimentConfig& c, std::string_view v) { c.train.total_iters = to_uint(v); };
    t["train.warmup_iters"] = [](ExperimentConfig& c, std::string_view v) { c.train.warmup_iters = to_uint(v); };
    t["train.plateau_iters"] = [](ExperimentConfig& c, std::string_view v) { c.train.plateau_iters = to_uint(v); };
    t["train.cosine_t_max"] = [](ExperimentConfig& c, std::string_view v) { c.train.cosine_t_max = to_uint(v); };
    t["train.grad_value_clip"] = [](ExperimentConfig& c, std::string_view v) { c.train.grad_value_clip = to_double(v); };
    t["train.grad_norm_clip"] = [](ExperimentConfig& c, std::string_view v) { c.train.grad_norm_clip = to_double(v); };
    t["train.target_sync_period"] = [](ExperimentConfig& c, std::string_view v) {
      c.train.target_sync_period = to_uint(v);
    };
    t["train.value_lr"] = [](ExperimentConfig& c, std::string_view v) { c.train.value_lr = to_double(v); };
    t["train.policy_lr"] = [](ExperimentConfig& c, std::string_view v) { c.train.policy_lr = to_double(v); };
    t["train.adam_beta1"] = [](ExperimentConfig& c, std::string_view v) { c.train.adam_beta1 = to_double(v); };
    t["train.adam_beta2"] = [](ExperimentConfig& c, std::string_view v) { c.train.adam_beta2 = to_double(v); };
    t["train.hidden_sizes"] = [](ExperimentConfig& c, std::string_view v) {
      c.train.hidden_sizes.clear();
      for (auto item : split_list(v)) c.train.hidden_sizes.push_back(static_cast<Eigen::Index>(to_uint(item)));
    };
    t["train.policy_output_scale"] = [](ExperimentConfig& c, std::string_view v) {
      c.train.policy_output_scale = to_double(v);
    };
    t["train.log_every"] = [](ExperimentConfig& c, std::string_view v) { c.train.log_every = to_uint(v); };
    t["train.probe_every"] = [](ExperimentConfig& c, std::string_view v) { c.train.probe_every = to_uint(v); };
    t["train.learn_policy"] = [](ExperimentConfig& c, std::string_view v) { c.learn_policy = to_bool(v); };
    t["train.scale"] = [](ExperimentConfig& c, std::string_view v) {
      if (v == "desk") {
        c.train = TrainConfig::desk_scale();
      } else if (v == "reference") {
        c.train = TrainConfig::reference_scale();
      } else {
        throw InputError("train.scale must be desk or reference");
      }
    };

    t["market.mu"] = [](ExperimentConfig& c, std::string_view v) { c.market.mu = to_double(v); };
    t["market.sigma"] = [](ExperimentConfig& c, std::string_view v) { c.market.sigma = to_double(v); };
    t["market.T"] = [](ExperimentConfig& c, std::string_view v) { c.market.T = to_uint(v); };
    t["market.S0"] = [](ExperimentConfig& c, std::string_view v) { c.market.S0 = to_double(v); };
    t["market.strike"] = [](ExperimentConfig& c, std::string_view v) { c.strike = to_double(v); };
    t["market.probes_per_layer"] = [](ExperimentConfig& c, std::string_view v) { c.probes_per_layer = to_uint(v); };

    t["grid.width"] = [](ExperimentConfig& c, std::string_view v) { c.grid.width = to_int(v); };
    t["grid.height"] = [](ExperimentConfig& c, std::string_view v) { c.grid.height = to_int(v); };
    t["grid.spawn_prob"] = [](ExperimentConfig& c, std::string_view v) { c.grid.spawn_prob = to_double(v); };
    t["grid.item_lifetime"] = [](ExperimentConfig& c, std::string_view v) { c.grid.item_lifetime = to_uint(v); };
    t["grid.delivery_x"] = [](ExperimentConfig& c, std::string_view v) { c.grid.delivery_cell.x = to_int(v); };
    t["grid.delivery_y"] = [](ExperimentConfig& c, std::string_view v) { c.grid.delivery_cell.y = to_int(v); };
    t["grid.start_x"] = [](ExperimentConfig& c, std::string_view v) { c.grid.start_cell.x = to_int(v); };
    t["grid.start_y"] = [](ExperimentConfig& c, std::string_view v) { c.grid.start_cell.y = to_int(v); };
    t["grid.move_reward"] = [](ExperimentConfig& c, std::string_view v) { c.grid.move_reward = to_double(v); };
    t["grid.delivery_reward"] = [](ExperimentConfig& c, std::string_view v) { c.grid.delivery_reward = to_double(v); };
    t["grid.episode_length"] = [](ExperimentConfig& c, std::string_view v) { c.grid.episode_length = to_uint(v); };
    t["grid.shift_factor"] = [](ExperimentConfig& c, std::string_view v) { c.grid_shift = to_double(v); };
    t["grid.steps"] = [](ExperimentConfig& c, std::string_view v) { c.grid_steps = to_uint(v); };
    t["grid.rate_c"] = [](ExperimentConfig& c, std::string_view v) { c.grid_rate_c = to_double(v); };
    t["grid.rate_decay"] = [](ExperimentConfig& c, std::string_view v) { c.grid_rate_decay = to_double(v); };
    t["grid.epsilon"] = [](ExperimentConfig& c, std::string_view v) { c.grid_epsilon = to_double(v); };

    t["tabular.episodes"] = [](ExperimentConfig& c, std::string_view v) { c.tabular_episodes = to_uint(v); };
    t["tabular.rate_c"] = [](ExperimentConfig& c, std::string_view v) { c.tabular_rate_c = to_double(v); };
    t["tabular.rate_decay"] = [](ExperimentConfig& c, std::string_view v) { c.tabular_rate_decay = to_double(v); };

    t["gradcheck.points"] = [](ExperimentConfig& c, std::string_view v) { c.gradcheck_points = to_uint(v); };
    t["gradcheck.dilog_points"] = [](ExperimentConfig& c, std::string_view v) { c.dilog_points = to_uint(v); };
    return t;
  }();
  return table;
}

struct RunCell {
  LossKind kind;
  std::string label;  ///< loss column; "exact" or "none" for loss-free rows
  double alpha;
  std::uint64_t seed;
};

class CellRecorder {
 public:
  CellRecorder(const RunCell& cell, std::vector<RunRecord>& out) : cell_(cell), out_(out) {}
  void operator()(std::uint64_t iteration, const std::string& name, double value) const {
    out_.push_back({cell_.seed, iteration, cell_.label, cell_.alpha, name, value});
  }

 private:
  const RunCell& cell_;
  std::vector<RunRecord>& out_;
};

TrainConfig cell_train_config(const ExperimentConfig& cfg, const RunCell& cell) {
  TrainConfig train = cfg.train;
  train.ra = RiskAversion(cell.alpha);
  train.kind = cell.kind;
  train.fail_fast = cfg.fail_fast;
  return train;
}

void append_history(std::vector<RunRecord>& out, const TrainResult& result, const RunCell& cell) {
  for (RunRecord r : result.history) {
    r.loss_kind = cell.label;
    out.push_back(std::move(r));
  }
}

double mean_policy_action(const Mlp& policy, double scale, const TradingEnv& env, std::span<const MarketState> probes) {
  return scale * policy.forward_batch(env.features(probes)).mean();
}

void run_trading_cell(const ExperimentConfig& cfg, const RunCell& cell, std::vector<RunRecord>& out) {
  const CellRecorder record(cell, out);
  const TrainConfig train = cell_train_config(cfg, cell);
  TradingRewardSpec spec = TradingRewardSpec::pure();
  std::optional<SolutionKind> solution;
  switch (cfg.experiment) {
    case ExperimentKind::GaussianTrading:
      solution = SolutionKind::Gaussian;
      break;
    case ExperimentKind::QuadraticTrading:
      spec = TradingRewardSpec::quadratic();
      solution = SolutionKind::Quadratic;
      break;
    default:
      spec = TradingRewardSpec::call(cfg.strike.value_or(cfg.market.S0));
      break;
  }
  const TradingEnv env(cfg.market, spec);
  const std::vector<MarketState> probes = probe_states(cfg.market, cfg.probes_per_layer);
  const Eigen::VectorXd start = env.features(MarketState{0, cfg.market.S0});
  const double reference = cfg.experiment == ExperimentKind::DeepHedging && cfg.market.mu == 0.0 &&
                                   spec.strike == cfg.market.S0
                               ? bachelier_call_price(cfg.market)
                               : std::numeric_limits<double>::quiet_NaN();

  ProbeFunction probe = [&](const Mlp& value, const Mlp* policy) {
    std::vector<std::pair<std::string, double>> metrics;
    const double v0 = value.forward(start);
    metrics.emplace_back("v0", v0);
    if (solution) metrics.emplace_back("rmse", rmse_vs_analytic(value, env, *solution, train.ra, probes));
    if (cfg.experiment == ExperimentKind::DeepHedging) {
      metrics.emplace_back("price", -v0);
      if (std::isfinite(reference)) metrics.emplace_back("price_rel_error", std::abs(-v0 - reference) / reference);
    }
    if (policy) metrics.emplace_back("mean_action", mean_policy_action(*policy, train.policy_output_scale, env, probes));
    return metrics;
  };

  const bool learn = cfg.experiment != ExperimentKind::QuadraticTrading || cfg.learn_policy;
  TrainResult result;
  if (learn) {
    result = train_actor_critic(env, train, cell.seed, probe);
  } else {
    const double scale = cfg.market.sigma * std::sqrt(static_cast<double>(cfg.market.T));
    // Closed-form optimal action S_t - S0, read back from the standardized price feature.
    const ActionFunction optimal = [scale](const Eigen::MatrixXd& f) { return Eigen::RowVectorXd(scale * f.row(1)); };
    result = train_value_td0(env, train, cell.seed, optimal, probe);
  }
  append_history(out, result, cell);
  record(train.total_iters, "diverged", result.first_nonfinite_iter ? 1.0 : 0.0);
}

void run_grid_cell(const ExperimentConfig& cfg, const RunCell& cell, std::vector<RunRecord>& out) {
  const CellRecorder record(cell, out);
  const FiniteMdp base = gridworld_tabularize(cfg.grid);
  const FiniteMdp shifted = gridworld_tabularize(gridworld_shifted(cfg.grid, cfg.grid_shift));
  const std::uint64_t episodes = std::max<std::uint64_t>(1, cfg.grid_steps / cfg.grid.episode_length);
  const TabularLearnOptions options{RiskAversion(cell.alpha), cell.kind,
                                    LearningSchedule::harmonic(cfg.grid_rate_c, cfg.grid_rate_decay), episodes,
                                    cell.seed};
  const std::uint64_t steps = episodes * cfg.grid.episode_length;
  try {
    const QLearningResult q = entropic_q_learning(base, options, cfg.grid_epsilon);
    const RiskAversion neutral(0.0);
    const double r_base = entropic_policy_evaluation(base, q.greedy, neutral)[static_cast<Eigen::Index>(base.initial_state())];
    const double r_shift =
        entropic_policy_evaluation(shifted, q.greedy, neutral)[static_cast<Eigen::Index>(shifted.initial_state())];
    record(steps, "table_finite", 1.0);
    record(steps, "return_base", r_base);
    record(steps, "return_shifted", r_shift);
    record(steps, "degradation", (r_base - r_shift) / std::abs(r_base));
  } catch (const NumericDivergence&) {
    if (cfg.fail_fast) throw;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    record(steps, "table_finite", 0.0);
    record(steps, "return_base", nan);
    record(steps, "return_shifted", nan);
    record(steps, "degradation", nan);
  }
}

constexpr double kOracleTolerance = 1e-9;

void run_oracle_exact_cell(const ExperimentConfig&, const RunCell& cell, std::vector<RunRecord>& out) {
  const CellRecorder record(cell, out);
  const RiskAversion ra(cell.alpha);
  const std::vector<FiniteMdp> suite = oracle_mdp_suite();
  double worst = 0.0;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const FiniteMdp& mdp = suite[i];
    const auto s0 = static_cast<Eigen::Index>(mdp.initial_state());
    const OptimalSolution opt = entropic_value_iteration(mdp, ra);
    const TabularPolicy uniform = TabularPolicy::uniform(mdp);
    const std::string prefix = "mdp" + std::to_string(i) + "_";
    const double vi_gap = std::abs(opt.v_star[s0] - entropic_return_ce(mdp, opt.greedy, ra));
    const double pe_gap = std::abs(entropic_policy_evaluation(mdp, uniform, ra)[s0] - entropic_return_ce(mdp, uniform, ra));
    record(0, prefix + "vi_vs_enumeration", vi_gap);
    record(0, prefix + "pe_vs_enumeration", pe_gap);
    worst = std::max({worst, vi_gap, pe_gap});
    if (ra.is_risk_neutral()) {
      const double rn_gap = (opt.v_star - risk_neutral_value_iteration(mdp).v_star).cwiseAbs().maxCoeff();
      record(0, prefix + "vi_vs_risk_neutral", rn_gap);
      worst = std::max(worst, rn_gap);
    }
  }
  record(0, "max_gap", worst);
  record(0, "pass", worst <= kOracleTolerance ? 1.0 : 0.0);
}

void run_oracle_td_cell(const ExperimentConfig& cfg, const RunCell& cell, std::vector<RunRecord>& out) {
  const CellRecorder record(cell, out);
  const RiskAversion ra(cell.alpha);
  const std::vector<FiniteMdp> suite = oracle_mdp_suite();
  const TabularLearnOptions options{ra, cell.kind, LearningSchedule::harmonic(cfg.tabular_rate_c, cfg.tabular_rate_decay),
                                    cfg.tabular_episodes, cell.seed};
  double worst = 0.0;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const FiniteMdp& mdp = suite[i];
    const TabularPolicy uniform = TabularPolicy::uniform(mdp);
    const Eigen::VectorXd exact = entropic_policy_evaluation(mdp, uniform, ra);
    double err;
    try {
      err = reachable_max_error(mdp, uniform, td0_policy_evaluation(mdp, uniform, options).values, exact);
    } catch (const NumericDivergence&) {
      if (cfg.fail_fast) throw;
      err = std::numeric_limits<double>::infinity();
    }
    record(cfg.tabular_episodes, "mdp" + std::to_string(i) + "_td_max_error", err);
    worst = std::max(worst, err);
  }
  record(cfg.tabular_episodes, "td_max_error", worst);

  const FiniteMdp two_point = two_point_target_mdp();
  const TabularPolicy only = TabularPolicy::uniform(two_point);
  const double exact = entropic_policy_evaluation(two_point, only, ra)[0];
  double gap;
  try {
    gap = std::abs(td0_policy_evaluation(two_point, only, options).values[0] - exact);
  } catch (const NumericDivergence&) {
    if (cfg.fail_fast) throw;
    gap = std::numeric_limits<double>::infinity();
  }
  record(cfg.tabular_episodes, "two_point_td_error", gap);
}

void run_gradcheck_cell(const ExperimentConfig& cfg, const RunCell& cell, std::vector<RunRecord>& out) {
  const CellRecorder record(cell, out);
  if (cell.label == "none") {
    record(0, "mlp_max_rel_error", mlp_gradient_max_error(cell.seed));
    record(0, "dilog_max_abs_error", dilogarithm_max_error(cfg.dilog_points));
    return;
  }
  const RiskAversion ra(cell.alpha);
  record(0, "loss_max_rel_error", loss_gradient_max_error(cell.kind, ra, cfg.gradcheck_points));
  record(0, "td_max_rel_error", td_gradient_max_error(cell.kind, ra, cell.seed));
  if (cell.kind == LossKind::ItakuraSaito && !ra.is_risk_neutral()) {
    record(0, "policy_max_rel_error", policy_gradient_max_error(ra, cell.seed));
  }
}

std::vector<RunCell> make_cells(const ExperimentConfig& cfg) {
  std::vector<RunCell> cells;
  auto add_grid = [&](const std::vector<std::uint64_t>& seeds) {
    for (LossKind kind : cfg.losses) {
      for (double alpha : cfg.alphas) {
        for (std::uint64_t seed : seeds) cells.push_back({kind, std::string(to_string(kind)), alpha, seed});
      }
    }
  };
  switch (cfg.experiment) {
    case ExperimentKind::OracleSuite:
      for (double alpha : cfg.alphas) cells.push_back({LossKind::Mse, "exact", alpha, 0});
      add_grid(cfg.seeds);
      break;
    case ExperimentKind::GradCheck:
      cells.push_back({LossKind::Mse, "none", 0.0, cfg.seeds.front()});
      add_grid({cfg.seeds.front()});
      break;
    default:
      add_grid(cfg.seeds);
      break;
  }
  return cells;
}

void run_cell(const ExperimentConfig& cfg, const RunCell& cell, std::vector<RunRecord>& out) {
  switch (cfg.experiment) {
    case ExperimentKind::GaussianTrading:
    case ExperimentKind::QuadraticTrading:
    case ExperimentKind::DeepHedging: run_trading_cell(cfg, cell, out); break;
    case ExperimentKind::GridTabular: run_grid_cell(cfg, cell, out); break;
    case ExperimentKind::OracleSuite:
      if (cell.label == "exact") {
        run_oracle_exact_cell(cfg, cell, out);
      } else {
        run_oracle_td_cell(cfg, cell, out);
      }
      break;
    case ExperimentKind::GradCheck: run_gradcheck_cell(cfg, cell, out); break;
  }
}

std::string cell_file_name(std::size_t index, const RunCell& cell) {
  std::string alpha = format_number(cell.alpha);
  std::replace(alpha.begin(), alpha.end(), '.', 'p');
  return "cell" + std::to_string(index) + "_" + cell.label + "_a" + alpha + "_s" + std::to_string(cell.seed) + ".csv";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  return quoted + "\"";
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::GaussianTrading: return "GaussianTrading";
    case ExperimentKind::QuadraticTrading: return "QuadraticTrading";
    case ExperimentKind::DeepHedging: return "DeepHedging";
    case ExperimentKind::GridTabular: return "GridTabular";
    case ExperimentKind::OracleSuite: return "OracleSuite";
    case ExperimentKind::GradCheck: return "GradCheck";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (ExperimentKind kind : kAllExperiments) {
    if (to_string(kind) == name) return kind;
  }
  throw InputError("unknown experiment '" + std::string(name) + "'");
}

ExperimentConfig default_experiment_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.experiment = kind;
  switch (kind) {
    case ExperimentKind::GaussianTrading:
      cfg.market.mu = 0.03;
      cfg.alphas = {1.0};
      cfg.losses = {LossKind::ItakuraSaito, LossKind::Softplus, LossKind::Emse, LossKind::Mse};
      break;
    case ExperimentKind::QuadraticTrading:
      cfg.alphas = {100.0};
      cfg.losses = {LossKind::ItakuraSaito, LossKind::Softplus};
      cfg.learn_policy = false;
      break;
    case ExperimentKind::DeepHedging:
      cfg.alphas = {0.1, 0.3, 1.0, 3.0, 10.0};
      cfg.losses = {LossKind::ItakuraSaito, LossKind::Softplus, LossKind::Emse};
      break;
    case ExperimentKind::GridTabular:
      cfg.alphas = {0.0, 0.1};
      cfg.losses = {LossKind::ItakuraSaito};
      cfg.seeds = {1, 2, 3};
      cfg.grid.width = 3;
      cfg.grid.height = 3;
      cfg.grid.item_lifetime = 3;
      cfg.grid.episode_length = 12;
      cfg.grid.delivery_cell = {1, 1};
      break;
    case ExperimentKind::OracleSuite:
      cfg.alphas = {0.0, 0.5, 1.0};
      cfg.losses = {LossKind::ItakuraSaito, LossKind::Softplus};
      break;
    case ExperimentKind::GradCheck:
      cfg.alphas = {0.1, 1.0, 10.0};
      cfg.losses = {LossKind::Mse, LossKind::Emse, LossKind::Softplus, LossKind::ItakuraSaito};
      break;
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw InputError("at least one seed is required");
  if (alphas.empty()) throw InputError("at least one alpha is required");
  if (losses.empty()) throw InputError("at least one loss kind is required");
  if (parallel == 0) throw InputError("parallel must be at least 1");
  for (double a : alphas) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw InputError("alpha values must be finite and non-negative");
  }
  const bool trading = experiment == ExperimentKind::GaussianTrading || experiment == ExperimentKind::QuadraticTrading ||
                       experiment == ExperimentKind::DeepHedging;
  if (trading) {
    market.validate();
    TrainConfig t = train;
    t.validate();
    if (probes_per_layer == 0) throw InputError("market.probes_per_layer must be positive");
    const bool learns = experiment != ExperimentKind::QuadraticTrading || learn_policy;
    for (double a : alphas) {
      if (learns && a == 0.0) throw InputError("policy learning needs alpha > 0");
      if (experiment == ExperimentKind::GaussianTrading && a == 0.0) {
        throw InputError("the Gaussian trading problem is unbounded at alpha = 0");
      }
      if (experiment == ExperimentKind::QuadraticTrading) {
        if (market.mu != 0.0) throw InputError("QuadraticTrading requires market.mu = 0");
        if (!(a > 0.0) || !(a * market.sigma * market.sigma < 1.0)) {
          throw InputError("QuadraticTrading requires 0 < alpha sigma^2 < 1 (alpha = " + format_number(a) + ")");
        }
      }
    }
  }
  if (experiment == ExperimentKind::GridTabular) {
    grid.validate();
    gridworld_shifted(grid, grid_shift);
    if (gridworld_tabular_state_count(grid) > kMaxTabularGridStates) {
      throw InputError("grid too large for the tabular reduction; shrink the grid, lifetime or episode length");
    }
    if (!(grid_epsilon > 0.0 && grid_epsilon <= 1.0)) throw InputError("grid.epsilon must lie in (0, 1]");
    if (grid_steps == 0) throw InputError("grid.steps must be positive");
    LearningSchedule::harmonic(grid_rate_c, grid_rate_decay);
  }
  if (experiment == ExperimentKind::GridTabular || experiment == ExperimentKind::OracleSuite) {
    LearningSchedule::harmonic(tabular_rate_c, tabular_rate_decay);
    if (tabular_episodes == 0) throw InputError("tabular.episodes must be positive");
  }
  if (experiment == ExperimentKind::GradCheck && (gradcheck_points < 2 || dilog_points < 2)) {
    throw InputError("gradient-check grids need at least two points");
  }
}

ExperimentConfig parse_experiment_config(std::istream& in, const std::string& source) {
  std::vector<std::tuple<std::size_t, std::string, std::string>> entries;
  std::optional<ExperimentKind> kind;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](std::size_t at, const std::string& what) -> InputError {
    return InputError(source + ":" + std::to_string(at) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw fail(lineno, "expected key = value");
    const std::string key(trim(view.substr(0, eq)));
    const std::string value(trim(view.substr(eq + 1)));
    if (key.empty()) throw fail(lineno, "empty key");
    for (const auto& [at, k, v] : entries) {
      if (k == key) throw fail(lineno, "duplicate key '" + key + "' (first on line " + std::to_string(at) + ")");
    }
    if (key == "experiment") {
      try {
        kind = parse_experiment_kind(value);
      } catch (const InputError& e) {
        throw fail(lineno, e.what());
      }
    } else if (!setters().contains(key)) {
      throw fail(lineno, "unknown key '" + key + "'");
    }
    entries.emplace_back(lineno, key, value);
  }
  if (!kind) throw InputError(source + ": missing 'experiment' key");
  ExperimentConfig cfg = default_experiment_config(*kind);
  for (const auto& [at, key, value] : entries) {
    if (key == "experiment") continue;
    try {
      setters().find(key)->second(cfg, value);
    } catch (const InputError& e) {
      throw fail(at, key + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  return parse_experiment_config(in, path.string());
}

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records, const std::string& experiment,
                                  std::vector<std::string>* warnings) {
  struct Group {
    std::string loss_kind;
    double alpha;
    std::string metric;
    std::vector<std::uint64_t> seeds;                            // first-appearance order
    std::map<std::uint64_t, std::pair<std::uint64_t, double>> last;  // seed -> (iteration, value)
  };
  std::vector<Group> groups;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
  for (const RunRecord& r : records) {
    const auto key = std::make_tuple(r.loss_kind, format_number(r.alpha), r.metric_name);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      groups.push_back({r.loss_kind, r.alpha, r.metric_name, {}, {}});
    }
    Group& g = groups[it->second];
    auto [slot, inserted] = g.last.try_emplace(r.seed, r.iteration, r.metric_value);
    if (inserted) {
      g.seeds.push_back(r.seed);
    } else if (r.iteration >= slot->second.first) {
      slot->second = {r.iteration, r.metric_value};
    }
  }

  std::vector<SummaryRow> rows;
  for (const Group& g : groups) {
    SummaryRow row{experiment, g.loss_kind, g.alpha, g.metric, g.seeds.size(), 0, 0.0, 0.0, 0.0, 0.0};
    std::vector<double> finite;
    for (std::uint64_t seed : g.seeds) {
      const double v = g.last.at(seed).second;
      if (std::isfinite(v)) {
        finite.push_back(v);
      } else {
        ++row.nonfinite;
      }
    }
    if (finite.empty()) {
      if (warnings) {
        warnings->push_back("no finite values for " + g.loss_kind + " alpha=" + format_number(g.alpha) + " " + g.metric +
                            " (" + std::to_string(row.nonfinite) + " non-finite); group omitted");
      }
      continue;
    }
    double sum = 0.0;
    for (double v : finite) sum += v;
    row.mean = sum / static_cast<double>(finite.size());
    double ss = 0.0;
    for (double v : finite) ss += (v - row.mean) * (v - row.mean);
    row.std = finite.size() > 1 ? std::sqrt(ss / static_cast<double>(finite.size() - 1)) : 0.0;
    row.min = *std::min_element(finite.begin(), finite.end());
    row.max = *std::max_element(finite.begin(), finite.end());
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryCsvHeader << '\n';
  for (const SummaryRow& r : rows) {
    out << csv_field(r.experiment) << ',' << csv_field(r.loss_kind) << ',' << format_number(r.alpha) << ','
        << csv_field(r.metric_name) << ',' << r.count << ',' << r.nonfinite << ',' << format_number(r.mean) << ','
        << format_number(r.std) << ',' << format_number(r.min) << ',' << format_number(r.max) << '\n';
  }
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("RISKVAL_OUTPUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<RunCell> cells = make_cells(cfg);
  std::vector<std::vector<RunRecord>> per_cell(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size() && !abort; i = next++) {
      try {
        run_cell(cfg, cells[i], per_cell[i]);
      } catch (...) {
        errors[i] = std::current_exception();
        abort = true;
      }
    }
  };
  const std::size_t threads = std::min(cfg.parallel, cells.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentOutcome outcome;
  const std::filesystem::path dir = resolve_output_dir(cfg);
  std::filesystem::create_directories(dir / "cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    write_records_csv(dir / "cells" / cell_file_name(i, cells[i]), per_cell[i]);
    outcome.records.insert(outcome.records.end(), per_cell[i].begin(), per_cell[i].end());
  }
  outcome.records_path = dir / "records.csv";
  outcome.summary_path = dir / "summary.csv";
  write_records_csv(outcome.records_path, outcome.records);
  outcome.summary = summarize(outcome.records, std::string(to_string(cfg.experiment)), &outcome.warnings);
  std::ofstream summary(outcome.summary_path, std::ios::binary);
  if (!summary) throw InputError("cannot write " + outcome.summary_path.string());
  write_summary_csv(summary, outcome.summary);
  return outcome;
}

}  // namespace riskval
