#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tnqg/cli/commands.hpp"

using namespace tnqg;
using namespace tnqg::cli;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"([lattice]
kind = chain
dims = 4
[model]
J = 1
h = 1.5
[ansatz]
basis_states = 2
modes = 4
[schedule]
window_length = 0.2
windows = 2
grid_points = 9
iterations = 40
learning_rate = 1e-2
[run]
observables = mx, x1
)";

fs::path fresh(const std::string& name) {
  auto p = fs::temp_directory_path() / ("tnqg_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

int run_tool(const std::string& args) {
  const int status = std::system((std::string(TNQG_TOOL) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesSectionsAndDefaults) {
  const auto c = parse_config(kSmall);
  EXPECT_EQ(c.n_sites(), 4u);
  EXPECT_DOUBLE_EQ(c.h, 1.5);
  EXPECT_EQ(c.ansatz.n_basis, 2u);
  EXPECT_EQ(c.schedule.windows, 2u);
  EXPECT_TRUE(c.auto_spectrum);
  EXPECT_EQ(c.estimator.mode, EstimatorMode::exact);
  EXPECT_EQ(c.observables, (std::vector<std::string>{"mx", "x1"}));
  const auto sq = parse_config("[lattice]\nkind = square\ndims = 3x3\n");
  EXPECT_EQ(sq.n_sites(), 9u);
  EXPECT_EQ(sq.ansatz.n_modes, kDefaultModes2d);
}

TEST(Config, RoundTripsThroughIni) {
  auto c = parse_config(std::string(kSmall) + "[estimator]\nmode = mc\nsamples = 256\n[cg]\ntimes = 0, 0.5\n");
  const auto d = parse_config(to_ini(c));
  EXPECT_EQ(to_ini(c), to_ini(d));
  EXPECT_EQ(d.estimator.mode, EstimatorMode::monte_carlo);
  EXPECT_EQ(d.estimator.chains.n_samples, 256u);
  EXPECT_EQ(d.cg_times, (std::vector<double>{0.0, 0.5}));
}

TEST(Config, RejectsInvalidInput) {
  EXPECT_THROW(parse_config("[model]\nhh = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[modle]\nh = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[model]\nh = abc\n"), ConfigError);
  EXPECT_THROW(parse_config("[schedule]\ngrid_points = 10\n"), ConfigError);
  EXPECT_THROW(parse_config("[schedule]\nwindows = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("[lattice]\nkind = chain\ndims = 3x3\n"), ConfigError);
  EXPECT_THROW(parse_config("[run]\nobservables = mq\n"), ConfigError);
  EXPECT_THROW(parse_config("[ansatz]\ne_min = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("[estimator]\nmode = mc\nsamples = 510\nchains = 4\n"), ConfigError);
  EXPECT_THROW(parse_config("[model]\ninitial = neel\n"), ConfigError);
}

TEST(Config, OverridesTakePrecedence) {
  auto c = parse_config(kSmall);
  Overrides o;
  o.seed = 99;
  o.estimator = EstimatorMode::monte_carlo;
  o.output = "elsewhere";
  apply_overrides(c, o);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.estimator.chains.seed, 99u);
  EXPECT_EQ(c.estimator.mode, EstimatorMode::monte_carlo);
  EXPECT_EQ(c.output, "elsewhere");
}

TEST(Config, PresetsParse) {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(TNQG_PRESET_DIR)) {
    if (entry.path().extension() != ".ini") continue;
    SCOPED_TRACE(entry.path().filename().string());
    EXPECT_NO_THROW(load_config(entry.path()));
    ++count;
  }
  EXPECT_GE(count, 10u);
}

TEST(Commands, RunRefineExtrapolateWriteDocumentedFiles) {
  const auto dir = fresh("pipeline");
  Context ctx;
  ctx.config = parse_config(kSmall);
  ctx.config.output = dir.string();
  ctx.command = "run";
  cmd_run(ctx);
  for (auto f : {"config.ini", "trajectory.csv", "trajectory.csv.meta.json", "checkpoints/window_001.json",
                 "loss/window_000.csv", "loss/window_001.csv.meta.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto traj_csv = read_csv(dir / "trajectory.csv");
  EXPECT_EQ(traj_csv[0], kTrajectoryColumns);
  EXPECT_EQ(traj_csv.size(), 1u + 17u * 2u);
  EXPECT_EQ(read_csv(dir / "loss/window_000.csv")[0], kLossColumns);
  EXPECT_EQ(read_csv(dir / "loss/window_000.csv").size(), 41u);

  auto [config, traj] = load_run(dir);
  ctx.config = config;
  ctx.command = "refine";
  cmd_refine(ctx, traj);
  const auto refined = read_csv(dir / "refined.csv");
  ASSERT_EQ(refined.size(), 1u + 17u * 2u);
  for (std::size_t r = 1; r < refined.size(); ++r) {
    const double loss = std::stod(refined[r][5]), check = std::stod(refined[r][8]);
    EXPECT_NEAR(loss, check, 1e-9 * std::max(1.0, check));
  }
  // c(0) = e_0: the initial observables are those of |+>.
  EXPECT_NEAR(std::stod(refined[1][3]), 1.0, 1e-10);

  ctx.command = "extrapolate";
  cmd_extrapolate(ctx, traj);
  const auto ext = read_csv(dir / "extrapolate.csv");
  ASSERT_EQ(ext.size(), 3u);
  EXPECT_EQ(ext[1][0], "mx");
  EXPECT_EQ(ext[1][7], "false");
  const Json report = Json::parse(read_text(dir / "extrapolate.json"));
  EXPECT_LT(report["rescale_deviation"].get<double>(), 1e-8);
  fs::remove_all(dir);
}

TEST(Commands, RefinementWithoutBasisStatesIsAPhase) {
  const auto dir = fresh("m0");
  Context ctx;
  ctx.config = parse_config(kSmall);
  ctx.config.ansatz.n_basis = 0;
  ctx.config.schedule.optimize.iterations = 2;
  ctx.config.output = dir.string();
  cmd_run(ctx);
  const auto [config, traj] = load_run(dir);
  ctx.config = config;
  cmd_refine(ctx, traj);
  for (const auto& row : read_csv(dir / "refined.csv")) {
    if (row[0] == "t") continue;
    EXPECT_NEAR(std::stod(row[3]), row[2] == "mx" || row[2] == "x1" ? 1.0 : 0.0, 1e-12) << row[0];
  }
  fs::remove_all(dir);
}

TEST(Commands, BenchmarkBoundsCoverErrors) {
  const auto dir = fresh("bench");
  Context ctx;
  ctx.config = parse_config(std::string(kSmall) + "[benchmark]\neval_time = 0.6\n");
  ctx.config.output = dir.string();
  cmd_benchmark(ctx);
  const auto rows = read_csv(dir / "benchmark.csv");
  EXPECT_EQ(rows[0], kBenchmarkColumns);
  ASSERT_EQ(rows.size(), 1u + 25u * 2u);
  EXPECT_LT(std::stod(rows[1][4]), 1e-12);
  for (std::size_t r = 1; r < rows.size(); ++r) EXPECT_GE(std::stod(rows[r][6]) + 1e-12, std::stod(rows[r][4]));
  EXPECT_EQ(rows.back()[9], "0");
  const auto both = read_csv(dir / "benchmark_trajectory.csv");
  EXPECT_EQ(both[1][1], "exact");
  EXPECT_EQ(both[2][1], "tnqg");
  fs::remove_all(dir);
}

TEST(Commands, CgStudyWritesTableAndFit) {
  const auto dir = fresh("cg");
  Context ctx;
  ctx.config = parse_config("[lattice]\ndims = 6\n[cg]\nm_values = 4, 8, 64\ntimes = 0, 0.5\n");
  ctx.config.output = dir.string();
  cmd_cg_study(ctx);
  const auto rows = read_csv(dir / "cg.csv");
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_LT(std::stod(rows[1][2]), 1e-12);  // delta(0) = 0
  EXPECT_LT(std::stod(rows[6][2]), 1e-8);  // M = 2^N spans the space
  EXPECT_TRUE(fs::exists(dir / "cg_fit.csv.meta.json"));
  fs::remove_all(dir);
}

TEST(Tool, ExitCodes) {
  const auto dir = fresh("tool");
  std::ofstream(dir / "ok.ini") << kSmall;
  std::ofstream(dir / "bad.ini") << "[model]\nfoo = 1\n";
  std::string diverging = kSmall;
  diverging.replace(diverging.find("learning_rate = 1e-2"), 20, "learning_rate = 5\ndivergence_factor = 1.5");
  std::ofstream(dir / "diverge.ini") << diverging;
  EXPECT_EQ(run_tool("run --config " + (dir / "ok.ini").string() + " --out " + (dir / "r").string()), 0);
  EXPECT_EQ(run_tool("refine --out " + (dir / "r").string()), 0);
  EXPECT_EQ(run_tool("run --config " + (dir / "bad.ini").string()), 2);
  EXPECT_EQ(run_tool("run --config " + (dir / "missing.ini").string()), 2);
  EXPECT_EQ(run_tool("frobnicate --config " + (dir / "ok.ini").string()), 2);
  EXPECT_EQ(run_tool("run --config " + (dir / "ok.ini").string() + " --estimator fast"), 2);
  EXPECT_EQ(run_tool("refine --out " + (dir / "nothing").string()), 2);
  EXPECT_EQ(run_tool("run --config " + (dir / "diverge.ini").string() + " --out " + (dir / "d").string()), 3);
  fs::remove_all(dir);
}
