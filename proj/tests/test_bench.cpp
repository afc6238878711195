#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>

#include "riskval/experiment.hpp"
#include "riskval/records.hpp"

using namespace riskval;
namespace fs = std::filesystem;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("riskval_bench_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RISKVAL_BENCH_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<RunRecord> rows(const std::vector<double>& values, const std::string& metric = "rmse") {
  std::vector<RunRecord> out;
  std::uint64_t seed = 1;
  for (double v : values) out.push_back({seed++, 100, "IS", 1.0, metric, v});
  return out;
}

}  // namespace

TEST_CASE("number formatting") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1e-300) == "1e-300");
  CHECK(format_number(kInf) == "inf");
  CHECK(format_number(-kInf) == "-inf");
  CHECK(format_number(std::nan("")) == "nan");
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.125}) CHECK(parse_number(format_number(v)) == v);
  CHECK(std::isnan(parse_number("nan")));
  CHECK(parse_number("-inf") == -kInf);
  CHECK_THROWS_AS(parse_number("1.0x"), InputError);
  CHECK_THROWS_AS(parse_number(""), InputError);
}

TEST_CASE("records csv round-trip keeps non-finite values") {
  std::vector<RunRecord> recs = {{1, 0, "IS", 0.5, "loss", 0.25},
                                 {2, 10, "EMSE", 10.0, "loss", kInf},
                                 {3, 20, "SP", 1.0, "v0", -kInf}};
  std::ostringstream out;
  write_records_csv(out, recs);
  const std::string text = out.str();
  CHECK(text.rfind(std::string(kRecordCsvHeader) + "\n", 0) == 0);
  CHECK(text.find("2,10,EMSE,10,loss,inf\n") != std::string::npos);
  std::istringstream in(text);
  CHECK(read_records_csv(in) == recs);

  RunRecord n{4, 0, "IS", 1.0, "x", std::nan("")};
  std::ostringstream o2;
  write_records_csv(o2, {n});
  CHECK(o2.str().find(",nan\n") != std::string::npos);
}

TEST_CASE("malformed rows name their line") {
  std::istringstream bad(std::string(kRecordCsvHeader) + "\n1,0,IS,1,loss,0.5\n1,0,IS,1,loss\n");
  try {
    read_records_csv(bad);
    FAIL("expected a parse error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream header("seed,iteration\n");
  CHECK_THROWS_AS(read_records_csv(header), InputError);
  std::istringstream number(std::string(kRecordCsvHeader) + "\n1,0,IS,1,loss,zero\n");
  CHECK_THROWS_WITH_AS(read_records_csv(number), doctest::Contains("line 2"), InputError);
}

TEST_CASE("summary of identical runs") {
  const auto summary = summarize(rows({0.7, 0.7, 0.7, 0.7, 0.7}), "GaussianTrading");
  REQUIRE(summary.size() == 1);
  CHECK(summary[0].experiment == "GaussianTrading");
  CHECK(summary[0].count == 5);
  CHECK(summary[0].mean == 0.7);
  CHECK(summary[0].std == 0.0);
  CHECK(summary[0].min == 0.7);
  CHECK(summary[0].max == 0.7);
}

TEST_CASE("summary counts and skips non-finite runs") {
  const auto summary = summarize(rows({1.0, 2.0, kInf, 3.0, 4.0}), "DeepHedging");
  REQUIRE(summary.size() == 1);
  CHECK(summary[0].count == 5);
  CHECK(summary[0].nonfinite == 1);
  CHECK(summary[0].mean == 2.5);
  CHECK(summary[0].std == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-14));
  CHECK(summary[0].min == 1.0);
  CHECK(summary[0].max == 4.0);
}

TEST_CASE("summary uses the last record of each seed") {
  std::vector<RunRecord> recs = {{1, 0, "IS", 1.0, "rmse", 9.0}, {1, 100, "IS", 1.0, "rmse", 1.0},
                                 {2, 0, "IS", 1.0, "rmse", 7.0}, {2, 100, "IS", 1.0, "rmse", 3.0}};
  const auto summary = summarize(recs, "x");
  REQUIRE(summary.size() == 1);
  CHECK(summary[0].count == 2);
  CHECK(summary[0].mean == 2.0);
}

TEST_CASE("groups without finite values are omitted with a warning") {
  auto recs = rows({kInf, std::nan("")}, "loss");
  for (const RunRecord& r : rows({0.5}, "v0")) recs.push_back(r);
  std::vector<std::string> warnings;
  const auto summary = summarize(recs, "x", &warnings);
  REQUIRE(summary.size() == 1);
  CHECK(summary[0].metric_name == "v0");
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("loss") != std::string::npos);
}

TEST_CASE("summary csv layout") {
  std::ostringstream out;
  write_summary_csv(out, summarize(rows({1.0, 3.0}), "GaussianTrading"));
  CHECK(out.str() == std::string(kSummaryCsvHeader) + "\nGaussianTrading,IS,1,rmse,2,0,2,1.4142135623730951,1,3\n");
}

TEST_CASE("config parsing") {
  std::istringstream text(
      "# comment\n"
      "experiment = DeepHedging\n"
      "alphas = 0.1, 1\n"
      "losses = IS,EMSE   # trailing comment\n"
      "seeds = 1,2\n"
      "train.total_iters = 100\n"
      "train.warmup_iters = 10\n"
      "train.plateau_iters = 40\n"
      "train.cosine_t_max = 50\n"
      "train.hidden_sizes = 16,8\n"
      "market.strike = 1.1\n"
      "output_dir = /tmp/somewhere\n");
  const ExperimentConfig cfg = parse_experiment_config(text, "t.cfg");
  CHECK(cfg.experiment == ExperimentKind::DeepHedging);
  CHECK(cfg.alphas == std::vector<double>{0.1, 1.0});
  CHECK(cfg.losses == std::vector<LossKind>{LossKind::ItakuraSaito, LossKind::Emse});
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(cfg.train.total_iters == 100);
  CHECK(cfg.train.hidden_sizes == std::vector<Eigen::Index>{16, 8});
  CHECK(cfg.strike == 1.1);
  CHECK(cfg.output_dir == "/tmp/somewhere");
  CHECK(cfg.market.mu == 0.0);

  std::istringstream grid("experiment = GridTabular\ngrid.rate_c = 0.3\ngrid.rate_decay = 0.01\ngrid.width = 4\n");
  const ExperimentConfig g = parse_experiment_config(grid);
  CHECK(g.grid_rate_c == 0.3);
  CHECK(g.grid_rate_decay == 0.01);
  CHECK(g.grid.width == 4);
}

TEST_CASE("config errors name source and line") {
  auto error_of = [](const std::string& body) {
    std::istringstream in(body);
    try {
      parse_experiment_config(in, "bad.cfg");
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(error_of("experiment = GradCheck\nbogus = 1\n").find("bad.cfg:2") != std::string::npos);
  CHECK(error_of("experiment = GradCheck\nalphas = 1\nalphas = 2\n").find("bad.cfg:3") != std::string::npos);
  CHECK(error_of("experiment = Nope\n").find("bad.cfg:1") != std::string::npos);
  CHECK(error_of("alphas = 1\n").find("experiment") != std::string::npos);
  CHECK(error_of("experiment = GradCheck\nlosses = IS, XX\n").find("bad.cfg:2") != std::string::npos);
  CHECK(error_of("experiment = GradCheck\nno equals sign\n").find("bad.cfg:2") != std::string::npos);
  CHECK(error_of("experiment = GaussianTrading\ntrain.total_iters = ten\n").find("bad.cfg:2") != std::string::npos);
  CHECK(error_of("experiment = GradCheck\nseeds =\n") != "no error");
  CHECK(error_of("experiment = QuadraticTrading\nalphas = 300\n") != "no error");
  CHECK(error_of("experiment = GaussianTrading\nalphas = 0\n") != "no error");
  CHECK(error_of("experiment = GaussianTrading\nalphas = -1\n") != "no error");
}

TEST_CASE("built-in configs validate") {
  for (ExperimentKind kind : {ExperimentKind::GaussianTrading, ExperimentKind::QuadraticTrading,
                              ExperimentKind::DeepHedging, ExperimentKind::GridTabular, ExperimentKind::OracleSuite,
                              ExperimentKind::GradCheck}) {
    CHECK_NOTHROW(default_experiment_config(kind).validate());
    CHECK(parse_experiment_kind(to_string(kind)) == kind);
  }
  CHECK(default_experiment_config(ExperimentKind::GaussianTrading).seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
}

TEST_CASE("experiment output is deterministic and independent of parallelism") {
  const fs::path a = scratch_dir("det_a");
  const fs::path b = scratch_dir("det_b");
  ExperimentConfig cfg = default_experiment_config(ExperimentKind::GaussianTrading);
  cfg.losses = {LossKind::ItakuraSaito, LossKind::Mse};
  cfg.seeds = {1, 2};
  cfg.train.total_iters = 60;
  cfg.train.warmup_iters = 10;
  cfg.train.plateau_iters = 20;
  cfg.train.cosine_t_max = 30;
  cfg.train.batch_size = 32;
  cfg.train.log_every = 20;
  cfg.train.probe_every = 30;
  cfg.output_dir = a;
  const ExperimentOutcome first = run_experiment(cfg);
  cfg.output_dir = b;
  cfg.parallel = 3;
  const ExperimentOutcome second = run_experiment(cfg);
  CHECK(first.records == second.records);
  CHECK(slurp(a / "records.csv") == slurp(b / "records.csv"));
  CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
  CHECK(fs::exists(a / "cells"));
  std::size_t v0_rows = 0;
  for (const SummaryRow& row : first.summary) v0_rows += row.metric_name == "rmse" ? 1 : 0;
  CHECK(v0_rows == 2);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("output directory override") {
  const fs::path dir = scratch_dir("override");
  ExperimentConfig cfg = default_experiment_config(ExperimentKind::GradCheck);
  cfg.output_dir = "should_not_be_used";
  setenv("RISKVAL_OUTPUT_DIR", dir.c_str(), 1);
  CHECK(resolve_output_dir(cfg) == dir);
  unsetenv("RISKVAL_OUTPUT_DIR");
  CHECK(resolve_output_dir(cfg) == "should_not_be_used");
  fs::remove_all(dir);
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch_dir("cli");
  CHECK(run_cli("") != 0);
  CHECK(run_cli("run --config " + (dir / "missing.cfg").string()) == 2);
  CHECK(run_cli("run --config " + write_file(dir / "bad.cfg", "experiment = GradCheck\nwhat = 1\n").string()) == 2);

  const std::string diverging = "experiment = OracleSuite\nalphas = 200\nlosses = EMSE\nseeds = 1\n"
                                "tabular.episodes = 2000\noutput_dir = " + (dir / "emse").string() + "\n";
  const fs::path emse = write_file(dir / "emse.cfg", diverging);
  CHECK(run_cli("run --config " + emse.string()) == 0);
  const std::string summary = slurp(dir / "emse" / "records.csv");
  CHECK(summary.find("td_max_error,inf") != std::string::npos);
  CHECK(run_cli("run --fail-fast --config " + emse.string()) == 3);

  CHECK(run_cli("gradcheck --output-dir " + (dir / "grad").string()) == 0);
  CHECK(run_cli("summarize --in " + (dir / "grad" / "records.csv").string() + " --experiment GradCheck --out " +
                (dir / "again.csv").string()) == 0);
  CHECK(slurp(dir / "again.csv") == slurp(dir / "grad" / "summary.csv"));
  CHECK(run_cli("summarize --in " + write_file(dir / "broken.csv", "nonsense\n").string()) == 2);
  fs::remove_all(dir);
}
