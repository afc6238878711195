// Acceptance report: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "riskval/entropic.hpp"
#include "riskval/experiment.hpp"
#include "riskval/rng.hpp"
#include "support.hpp"

using namespace riskval;
namespace fs = std::filesystem;
using riskval::testing::random_probabilities;
using riskval::testing::uniform;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

fs::path work_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "riskval_acceptance" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

using CellKey = std::tuple<std::string, double, std::uint64_t>;

/// Last value of `metric` for every (loss, alpha, seed) cell.
std::map<CellKey, double> final_metric(const std::vector<RunRecord>& records, const std::string& metric) {
  std::map<CellKey, double> out;
  for (const RunRecord& r : records) {
    if (r.metric_name == metric) out[{r.loss_kind, r.alpha, r.seed}] = r.metric_value;
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Verdict ce_axioms() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng = make_rng({2024});
  const std::vector<double> alphas = {0.0, 0.1, 1.0, 10.0, 100.0};
  int cases = 0;
  double worst_p3 = 0.0, worst_p4 = 0.0;
  bool p1 = true, p2 = true, p5 = true;
  for (double a : alphas) p1 = p1 && certainty_equivalent(DiscreteDistribution::point_mass(0.0), RiskAversion(a)) == 0.0;
  for (int trial = 0; trial < 200; ++trial, ++cases) {
    const Eigen::Index n = 2 + trial % 7;
    const Eigen::VectorXd p = random_probabilities(rng, n);
    Eigen::VectorXd x(n), y(n), up(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x[i] = uniform(rng, -3, 3);
      y[i] = uniform(rng, -3, 3);
      up[i] = x[i] + uniform(rng, 0, 2);
    }
    const double c = uniform(rng, -10, 10);
    for (double a : {0.0, 0.5, 2.0, 10.0}) {
      const RiskAversion ra(a);
      const double cx = weighted_certainty_equivalent(x, p, ra);
      const double cy = weighted_certainty_equivalent(y, p, ra);
      worst_p3 = std::max(worst_p3, std::abs(weighted_certainty_equivalent(Eigen::VectorXd(x.array() + c), p, ra) - cx - c));
      p2 = p2 && cx <= weighted_certainty_equivalent(up, p, ra) + 1e-12;
      for (int k = 0; k <= 10; ++k) {
        const double lam = k / 10.0;
        p5 = p5 && weighted_certainty_equivalent(Eigen::VectorXd(lam * x + (1 - lam) * y), p, ra) >=
                       lam * cx + (1 - lam) * cy - 1e-10;
      }
    }

    const Eigen::Index nx = 2 + trial % 3, ny = 2 + (trial / 3) % 3;
    const Eigen::VectorXd px = random_probabilities(rng, nx);
    Eigen::MatrixXd py(nx, ny), ty(nx, ny);
    for (Eigen::Index i = 0; i < nx; ++i) {
      py.row(i) = random_probabilities(rng, ny).transpose();
      for (Eigen::Index j = 0; j < ny; ++j) ty(i, j) = uniform(rng, -3, 3);
    }
    for (double a : {0.0, 0.5, 2.0}) {
      const RiskAversion ra(a);
      Eigen::VectorXd inner(nx), flat_x(nx * ny), flat_p(nx * ny);
      for (Eigen::Index i = 0; i < nx; ++i) {
        inner[i] = weighted_certainty_equivalent(ty.row(i).transpose(), py.row(i).transpose(), ra);
        for (Eigen::Index j = 0; j < ny; ++j) {
          flat_x[i * ny + j] = ty(i, j);
          flat_p[i * ny + j] = px[i] * py(i, j);
        }
      }
      worst_p4 = std::max(worst_p4, std::abs(weighted_certainty_equivalent(inner, px, ra) -
                                             weighted_certainty_equivalent(flat_x, flat_p, ra)));
    }
  }
  const double elapsed = seconds_since(start);
  const bool pass = p1 && p2 && p5 && worst_p3 <= 1e-10 && worst_p4 <= 1e-10 && cases >= 100 && elapsed < 5.0;
  return {pass, fmt("%d cases, normalization %s, monotone %s, shift err %.1e, tower err %.1e, concave %s, %.2fs", cases,
                    p1 ? "ok" : "broken", p2 ? "ok" : "broken", worst_p3, worst_p4, p5 ? "ok" : "broken", elapsed)};
}

double oracle_seconds = 0.0;

const ExperimentOutcome& oracle_run() {
  static const ExperimentOutcome outcome = [] {
    const auto start = std::chrono::steady_clock::now();
    ExperimentConfig cfg = default_experiment_config(ExperimentKind::OracleSuite);
    cfg.alphas = {0.5, 1.0};
    cfg.losses = {LossKind::ItakuraSaito, LossKind::Softplus};
    cfg.output_dir = work_dir("oracle");
    ExperimentOutcome out = run_experiment(cfg);
    oracle_seconds = seconds_since(start);
    return out;
  }();
  return outcome;
}

Verdict is_td_on_suite() {
  double worst = 0.0;
  int cells = 0;
  for (const auto& [key, err] : final_metric(oracle_run().records, "td_max_error")) {
    if (std::get<0>(key) != "IS") continue;
    worst = std::max(worst, std::isfinite(err) ? err : INFINITY);
    ++cells;
  }
  return {cells == 10 && worst <= 0.02 && oracle_seconds < 120.0,
          fmt("IS TD(0) worst max-norm error %.4f over %d (alpha, seed) cells (limit 0.02), IS and SP runs %.0fs", worst,
              cells, oracle_seconds)};
}

Verdict softplus_bias() {
  double sp_min = INFINITY, is_max = 0.0;
  for (const auto& [key, gap] : final_metric(oracle_run().records, "two_point_td_error")) {
    if (std::get<1>(key) != 1.0) continue;
    const double g = std::isfinite(gap) ? gap : INFINITY;
    if (std::get<0>(key) == "SP") sp_min = std::min(sp_min, g);
    if (std::get<0>(key) == "IS") is_max = std::max(is_max, g);
  }
  return {sp_min >= 0.05 && is_max <= 0.02,
          fmt("two-point target at alpha=1: SP gap >= %.4f (need >= 0.05), IS gap <= %.4f (need <= 0.02)", sp_min, is_max)};
}

Verdict gaussian_trading() {
  ExperimentConfig cfg = default_experiment_config(ExperimentKind::GaussianTrading);
  cfg.losses = {LossKind::ItakuraSaito};
  cfg.output_dir = work_dir("gaussian");
  const auto start = std::chrono::steady_clock::now();
  const ExperimentOutcome out = run_experiment(cfg);
  const double per_seed = seconds_since(start) / static_cast<double>(cfg.seeds.size());
  const auto rmse = final_metric(out.records, "rmse");
  const auto action = final_metric(out.records, "mean_action");
  double worst_rmse = 0.0, worst_action = 7.5;
  bool ok = rmse.size() == cfg.seeds.size();
  for (const auto& [key, r] : rmse) {
    const double a = action.at(key);
    ok = ok && r <= 0.05 && std::abs(a - 7.5) <= 0.5;
    worst_rmse = std::max(worst_rmse, std::isfinite(r) ? r : INFINITY);
    worst_action = std::abs(a - 7.5) > std::abs(worst_action - 7.5) ? a : worst_action;
  }
  return {ok && per_seed < 600.0, fmt("IS worst RMSE %.4f (limit 0.05), furthest action %.3f (7.5 +- 0.5), %.0fs/seed",
                                      worst_rmse, worst_action, per_seed)};
}

Verdict quadratic_trading() {
  ExperimentConfig cfg = default_experiment_config(ExperimentKind::QuadraticTrading);
  cfg.output_dir = work_dir("quadratic");
  const auto start = std::chrono::steady_clock::now();
  const ExperimentOutcome out = run_experiment(cfg);
  const double per_seed = seconds_since(start) / static_cast<double>(cfg.seeds.size());
  const auto rmse = final_metric(out.records, "rmse");
  const double alpha = cfg.alphas.front();
  double worst_is = 0.0;
  int sp_worse = 0;
  for (std::uint64_t seed : cfg.seeds) {
    const double is = rmse.at({"IS", alpha, seed});
    const double sp = rmse.at({"SP", alpha, seed});
    worst_is = std::max(worst_is, std::isfinite(is) ? is : INFINITY);
    sp_worse += std::isfinite(is) && sp > is ? 1 : 0;
  }
  return {worst_is <= 0.05 && sp_worse >= 4 && per_seed < 600.0,
          fmt("IS worst RMSE %.4f (limit 0.05), SP above IS in %d of %zu seeds (need 4), %.0fs/seed", worst_is, sp_worse,
              cfg.seeds.size(), per_seed)};
}

Verdict deep_hedging() {
  ExperimentConfig is_cfg = default_experiment_config(ExperimentKind::DeepHedging);
  is_cfg.losses = {LossKind::ItakuraSaito};
  is_cfg.alphas = {0.1, 1.0, 10.0};
  is_cfg.output_dir = work_dir("hedging_is");
  ExperimentConfig emse_cfg = is_cfg;
  emse_cfg.losses = {LossKind::Emse};
  emse_cfg.alphas = {10.0};
  emse_cfg.output_dir = work_dir("hedging_emse");
  const auto start = std::chrono::steady_clock::now();
  const ExperimentOutcome is_out = run_experiment(is_cfg);
  const ExperimentOutcome emse_out = run_experiment(emse_cfg);
  const double per_seed = seconds_since(start) / static_cast<double>(is_cfg.seeds.size());

  const auto rel = final_metric(is_out.records, "price_rel_error");
  const auto is_diverged = final_metric(is_out.records, "diverged");
  const auto is_v0 = final_metric(is_out.records, "v0");
  double worst_rel = 0.0;
  bool price_ok = true;
  for (const auto& [key, err] : rel) {
    if (std::get<1>(key) == 10.0) continue;
    worst_rel = std::max(worst_rel, std::isfinite(err) ? err : INFINITY);
    price_ok = price_ok && err <= 0.15;
  }
  int is_finite = 0;
  for (const auto& [key, d] : is_diverged) {
    if (std::get<1>(key) == 10.0 && d == 0.0 && std::isfinite(is_v0.at(key))) ++is_finite;
  }
  int emse_failed = 0;
  for (const auto& [key, d] : final_metric(emse_out.records, "diverged")) emse_failed += d != 0.0 ? 1 : 0;
  const int n = static_cast<int>(is_cfg.seeds.size());
  return {price_ok && is_finite == n && emse_failed >= 4 && per_seed < 900.0,
          fmt("IS price worst relative error %.3f at alpha 0.1/1 (limit 0.15); alpha=10: IS finite in %d of %d, EMSE "
              "non-finite in %d of %d (need 4), %.0fs/seed",
              worst_rel, is_finite, n, emse_failed, n, per_seed)};
}

Verdict gradient_suite() {
  ExperimentConfig cfg = default_experiment_config(ExperimentKind::GradCheck);
  cfg.output_dir = work_dir("gradcheck");
  const auto start = std::chrono::steady_clock::now();
  const ExperimentOutcome out = run_experiment(cfg);
  const double elapsed = seconds_since(start);
  double worst_grad = 0.0, dilog = 0.0;
  for (const RunRecord& r : out.records) {
    const double v = std::isfinite(r.metric_value) ? r.metric_value : INFINITY;
    if (r.metric_name == "dilog_max_abs_error") {
      dilog = std::max(dilog, v);
    } else if (r.metric_name.ends_with("_max_rel_error")) {
      worst_grad = std::max(worst_grad, v);
    }
  }
  return {worst_grad <= 1e-4 && dilog <= 1e-10 && elapsed < 30.0,
          fmt("worst relative gradient error %.2e (limit 1e-4), dilogarithm error %.2e over %zu points (limit 1e-10), %.1fs",
              worst_grad, dilog, cfg.dilog_points, elapsed)};
}

Verdict grid_probe() {
  ExperimentConfig cfg = default_experiment_config(ExperimentKind::GridTabular);
  cfg.output_dir = work_dir("grid");
  const auto start = std::chrono::steady_clock::now();
  const ExperimentOutcome out = run_experiment(cfg);
  const double elapsed = seconds_since(start);
  const auto finite = final_metric(out.records, "table_finite");
  const auto degradation = final_metric(out.records, "degradation");
  bool all_finite = true;
  for (const auto& [key, f] : finite) all_finite = all_finite && f == 1.0;
  int robust = 0;
  std::string per_seed;
  for (std::uint64_t seed : cfg.seeds) {
    const double entropic = degradation.at({"IS", 0.1, seed});
    const double neutral = degradation.at({"IS", 0.0, seed});
    robust += entropic <= neutral ? 1 : 0;
    per_seed += fmt(" seed %llu: %.4f vs %.4f;", static_cast<unsigned long long>(seed), entropic, neutral);
  }
  return {all_finite && robust >= 2 && elapsed < 600.0,
          fmt("tables finite: %s; entropic degradation <= risk-neutral in %d of %zu seeds (need 2);%s %.1fs",
              all_finite ? "yes" : "no", robust, cfg.seeds.size(), per_seed.c_str(), elapsed)};
}

Verdict determinism() {
  std::vector<ExperimentConfig> configs;
  ExperimentConfig grad = default_experiment_config(ExperimentKind::GradCheck);
  configs.push_back(grad);
  ExperimentConfig oracle = default_experiment_config(ExperimentKind::OracleSuite);
  oracle.seeds = {1, 2};
  oracle.tabular_episodes = 20'000;
  configs.push_back(oracle);
  ExperimentConfig trading = default_experiment_config(ExperimentKind::GaussianTrading);
  trading.seeds = {1, 2};
  trading.losses = {LossKind::ItakuraSaito, LossKind::Emse};
  trading.train.total_iters = 400;
  trading.train.warmup_iters = 50;
  trading.train.plateau_iters = 150;
  trading.train.cosine_t_max = 200;
  trading.train.log_every = 50;
  trading.train.probe_every = 100;
  configs.push_back(trading);
  ExperimentConfig grid = default_experiment_config(ExperimentKind::GridTabular);
  grid.grid_steps = 24'000;
  configs.push_back(grid);

  int identical = 0;
  std::string names;
  for (ExperimentConfig& cfg : configs) {
    const std::string name(to_string(cfg.experiment));
    cfg.output_dir = work_dir("det_a_" + name);
    run_experiment(cfg);
    const fs::path a = cfg.output_dir;
    cfg.output_dir = work_dir("det_b_" + name);
    run_experiment(cfg);
    const fs::path b = cfg.output_dir;
    bool same = slurp(a / "records.csv") == slurp(b / "records.csv") && slurp(a / "summary.csv") == slurp(b / "summary.csv");
    for (const auto& entry : fs::directory_iterator(a / "cells")) {
      same = same && slurp(entry.path()) == slurp(b / "cells" / entry.path().filename());
    }
    identical += same ? 1 : 0;
    names += " " + name + (same ? "" : "(differs)");
  }
  return {identical == static_cast<int>(configs.size()),
          fmt("%d of %zu reruns byte-identical:%s", identical, configs.size(), names.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"AC1 certainty-equivalent axioms", ce_axioms},
      {"AC2 IS TD(0) on the oracle suite", is_td_on_suite},
      {"AC3 softplus bias on a two-point target", softplus_bias},
      {"AC4 Gaussian trading", gaussian_trading},
      {"AC5 quadratic trading", quadratic_trading},
      {"AC6 deep hedging", deep_hedging},
      {"AC7 gradient suite", gradient_suite},
      {"AC8 grid-world shift probe", grid_probe},
      {"AC9 byte-identical reruns", determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
