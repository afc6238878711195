#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "riskval/gridworld.hpp"
#include "riskval/losses.hpp"
#include "riskval/records.hpp"
#include "riskval/td_training.hpp"
#include "riskval/trading.hpp"

namespace riskval {

enum class ExperimentKind { GaussianTrading, QuadraticTrading, DeepHedging, GridTabular, OracleSuite, GradCheck };

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view name);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::OracleSuite;
  std::vector<double> alphas;
  std::vector<LossKind> losses;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  TrainConfig train = TrainConfig::desk_scale();

  BachelierParams market;
  /// Call strike for DeepHedging; defaults to S0 (at the money).
  std::optional<double> strike;
  /// QuadraticTrading trains a policy only when set; otherwise the value
  /// network evaluates the closed-form optimal policy.
  bool learn_policy = true;
  std::size_t probes_per_layer = 64;

  GridWorldConfig grid;
  double grid_shift = 0.5;
  std::uint64_t grid_steps = 200'000;
  double grid_epsilon = 0.1;
  double grid_rate_c = 0.5;
  double grid_rate_decay = 0.02;

  std::uint64_t tabular_episodes = 200'000;
  double tabular_rate_c = 0.1;
  double tabular_rate_decay = 0.05;

  std::size_t gradcheck_points = 201;
  std::size_t dilog_points = 1000;

  std::filesystem::path output_dir = "riskval_out";
  bool fail_fast = false;
  std::size_t parallel = 1;

  /// Throws InputError on inconsistent settings.
  void validate() const;
};

/// Defaults for one experiment: alpha and loss lists, market drift, grid size.
ExperimentConfig default_experiment_config(ExperimentKind kind);

/// Flat key=value text; '#' starts a comment. `experiment` selects the
/// defaults, every other key overrides one field (see the README for the
/// key list). Errors name the source and line.
ExperimentConfig parse_experiment_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Final-metric statistics of one (experiment, loss, alpha, metric) group.
/// Each seed contributes its last record; statistics skip non-finite values.
struct SummaryRow {
  std::string experiment;
  std::string loss_kind;
  double alpha = 0.0;
  std::string metric_name;
  std::size_t count = 0;
  std::size_t nonfinite = 0;
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation, 0 for a single value
  double min = 0.0;
  double max = 0.0;
};

inline constexpr std::string_view kSummaryCsvHeader = "experiment,loss_kind,alpha,metric_name,count,nonfinite,mean,std,min,max";

/// Groups in order of first appearance. Groups without a finite value are
/// omitted and reported in warnings.
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records, const std::string& experiment,
                                  std::vector<std::string>* warnings = nullptr);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

struct ExperimentOutcome {
  std::vector<RunRecord> records;
  std::vector<SummaryRow> summary;
  std::vector<std::string> warnings;
  std::filesystem::path records_path;
  std::filesystem::path summary_path;
};

/// Runs every (loss, alpha, seed) cell, writes cells/<cell>.csv, records.csv
/// and summary.csv under the output directory (RISKVAL_OUTPUT_DIR overrides
/// the configured one) and returns what it wrote. A diverging cell is
/// recorded; with fail_fast the NumericDivergence propagates instead.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

/// The output directory run_experiment will use.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

}  // namespace riskval
