#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "tnqg/cli/config.hpp"
#include "tnqg/io.hpp"
#include "tnqg/pipeline.hpp"

namespace tnqg::cli {

namespace fs = std::filesystem;

inline const std::vector<std::string> kTrajectoryColumns{"t",        "source",    "obs_name",        "value_re",
                                                         "value_im", "loss_t",    "loss_t_per_site", "window_index"};

inline const std::vector<std::string> kLossColumns{"iter",      "loss",           "loss_per_site",
                                                   "grad_norm", "discarded_samples", "wall_ms"};

inline const std::vector<std::string> kBenchmarkColumns{"t",         "obs_name", "obs_exact",   "obs_tnqg",
                                                        "abs_err",   "loss_t",   "bound",       "state_bound",
                                                        "state_err", "trained_window", "window_index"};

struct Context {
  RunConfig config;
  std::string command;
  std::ostream* log = nullptr;

  fs::path out() const { return config.output; }

  template <class... Ts>
  void say(const Ts&... parts) const {
    if (log == nullptr) return;
    ((*log << parts), ...);
    *log << std::endl;
  }

  void meta(const fs::path& file, Json extra = Json::object()) const {
    extra["estimator"] = to_string(config.estimator.mode);
    write_metadata(file, to_ini(config), config.seed, command, std::move(extra));
  }
};

inline GalerkinState initial_state(const RunConfig& c) {
  AnsatzInit init = c.ansatz;
  if (c.auto_spectrum) std::tie(init.e_min, init.e_max) = spectral_interval(c.hamiltonian());
  std::mt19937_64 rng(c.seed);
  auto s = make_galerkin_state(c.n_sites(), init, rng);
  s.train_gamma = c.train_gamma;
  s.train_omega = c.train_omega;
  return s;
}

inline void write_loss_csv(const Context& ctx, const WindowRecord& w) {
  const fs::path path = ctx.out() / "loss" / fs::path(checkpoint_name(w.index)).replace_extension(".csv");
  {
    CsvWriter csv(path, kLossColumns);
    for (const auto& r : w.history) csv.write(r.iter, r.loss, r.loss_per_site, r.grad_norm, r.discarded, r.wall_ms);
  }
  ctx.meta(path, {{"window_index", w.index}});
}

// Optimised observables on every grid point of every window.
inline void write_trajectory_csv(const Context& ctx, const Trajectory& traj, const fs::path& path) {
  const auto obs = ctx.config.observable_map();
  const double n = static_cast<double>(ctx.config.n_sites());
  {
    CsvWriter csv(path, kTrajectoryColumns);
    std::uint64_t stream = 1u << 30;
    for (const auto& w : traj.windows()) {
      for (std::size_t j = 0; j < w.report.times.size(); ++j) {
        if (j == 0 && w.index > 0) continue;  // shared with the previous window's last point
        const double local = w.report.times[j];
        const double loss = w.report.point_loss[j];
        for (const auto& [name, op] : obs) {
          const Complex v = galerkin_expectation(*w.state, op, local, ctx.config.estimator, stream++);
          csv.write(w.t_start + local, "tnqg", name, v.real(), v.imag(), loss, loss / n, w.index);
        }
      }
    }
  }
  ctx.meta(path);
}

inline Trajectory train(const Context& ctx) {
  const auto& c = ctx.config;
  thread_limit() = c.threads;
  fs::create_directories(ctx.out());
  write_text(ctx.out() / "config.ini", to_ini(c));
  const auto h = c.hamiltonian();
  const auto start = std::chrono::steady_clock::now();
  auto on_iteration = [&](std::size_t k, const IterationRecord& r) {
    if (r.iter % 100 == 0) ctx.say("window ", k, " iter ", r.iter, " loss ", r.loss, " |grad| ", r.grad_norm);
  };
  auto on_window = [&](const WindowRecord& w) {
    write_text(ctx.out() / "checkpoints" / checkpoint_name(w.index),
               window_checkpoint(w, c.schedule.window_length).dump(1));
    write_loss_csv(ctx, w);
    ctx.say("window ", w.index, " done: best loss ", w.best_loss, " (per site ",
            w.best_loss / static_cast<double>(c.n_sites()), ")");
  };
  Trajectory traj = run_concatenated(initial_state(c), h, c.schedule, c.estimator, on_window, on_iteration);
  write_trajectory_csv(ctx, traj, ctx.out() / "trajectory.csv");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Json summary = {{"windows", traj.windows().size()}, {"total_time", traj.total_time()}, {"wall_s", seconds}};
  for (const auto& w : traj.windows()) summary["best_loss"].push_back(w.best_loss);
  write_text(ctx.out() / "run.json", summary.dump(2) + "\n");
  return traj;
}

inline void cmd_run(const Context& ctx) { train(ctx); }

// Config and checkpoints of an existing run directory.
inline std::pair<RunConfig, Trajectory> load_run(const fs::path& dir) {
  RunConfig c = load_config((dir / "config.ini").string());
  c.output = dir.string();
  Trajectory traj = load_trajectory(dir / "checkpoints");
  if (traj.windows().front().state->n_sites != c.n_sites()) {
    throw ConfigError("checkpoints in " + dir.string() + " do not match its config");
  }
  return {std::move(c), std::move(traj)};
}

inline void cmd_refine(const Context& ctx, const Trajectory& traj) {
  const auto& c = ctx.config;
  thread_limit() = c.threads;
  const auto h = c.hamiltonian();
  const auto obs = c.observable_map();
  for (const auto& w : traj.windows()) {
    const auto ref = refine_window(*w.state, h, obs, c.estimator, c.regularization, w.index);
    ctx.say("window ", w.index, ": Gram condition ", ref.pencil.condition, ", clipped ", ref.pencil.clipped, " of ",
            ref.matrices.dim(), " eigenvalues at ", ref.pencil.epsilon);
    write_text(ctx.out() / "matrices" / checkpoint_name(w.index), matrices_export(ref.matrices).dump(1));
  }
  const auto points = refine_trajectory(traj, h, obs, c.estimator, c.regularization);
  const fs::path path = ctx.out() / "refined.csv";
  {
    auto columns = kTrajectoryColumns;
    columns.push_back("loss_t_check");
    CsvWriter csv(path, columns);
    const double n = static_cast<double>(c.n_sites());
    for (const auto& p : points) {
      for (const auto& [name, v] : p.values) {
        csv.write(p.t, "refined", name, v.real(), v.imag(), p.loss, p.loss / n, p.window, p.loss_check);
      }
    }
  }
  ctx.meta(path);
}

// Infinite-time values from the last window, with the thermal reference when
// the lattice is small enough to diagonalise.
inline void cmd_extrapolate(const Context& ctx, const Trajectory& traj, const std::vector<std::string>& only = {}) {
  const auto& c = ctx.config;
  thread_limit() = c.threads;
  const auto h = c.hamiltonian();
  ObservableMap obs = c.observable_map();
  for (const auto& name : only) {
    if (!obs.count(name)) obs.emplace(name, named_observable(name, c.n_sites()));
  }
  const auto& last = traj.windows().back();
  const fs::path exported = ctx.out() / "matrices" / checkpoint_name(last.index);
  RefinedWindow ref;
  bool reuse = false;
  if (fs::exists(exported)) {
    ref.matrices = matrices_from_json(Json::parse(read_text(exported)));
    reuse = true;
    for (const auto& [name, op] : obs) reuse = reuse && ref.matrices.observables.count(name);
  }
  if (reuse) {
    ref.pencil = solve_pencil(ref.matrices, c.regularization);
    ref.modes = mode_decomposition(ref.pencil, unit_initial_coefficients(ref.matrices.dim()));
  } else {
    ref = refine_window(*last.state, h, obs, c.estimator, c.regularization, last.index);
  }
  const auto rep = infinite_time_report(ref, c.n_sites());
  ctx.say("infinite-time loss per site ", rep.loss_per_site, "; rescaled-matrix deviation ", rep.rescale_deviation);
  const bool thermal = c.n_sites() <= kSpectralIntervalDenseCap;

  const fs::path path = ctx.out() / "extrapolate.csv";
  Json report = {{"loss", rep.loss},
                 {"loss_per_site", rep.loss_per_site},
                 {"rescale_deviation", rep.rescale_deviation},
                 {"window", last.index},
                 {"groups", Json::array()}};
  for (auto [w, mult] : rep.groups) report["groups"].push_back({{"frequency", w}, {"multiplicity", mult}});
  {
    CsvWriter csv(path, {"obs_name", "value_re", "value_im", "loss_inf", "loss_inf_per_site", "energy", "beta_eff",
                         "beta_capped", "thermal", "diagonal", "relative_deviation"});
    for (const auto& [name, v] : rep.values) {
      if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
      ThermalComparison tc;
      tc.energy = tc.beta.beta = tc.thermal = tc.diagonal = tc.relative_deviation = NAN;
      if (thermal) tc = thermal_comparison(h, obs.at(name), v.real());
      csv.write(name, v.real(), v.imag(), rep.loss, rep.loss_per_site, tc.energy, tc.beta.beta,
                thermal ? (tc.beta.capped ? "true" : "false") : "", tc.thermal, tc.diagonal, tc.relative_deviation);
      report["observables"][name] = {{"value", to_json(v)}, {"thermal", thermal ? Json(tc.thermal) : Json()},
                                     {"relative_deviation", thermal ? Json(tc.relative_deviation) : Json()}};
      ctx.say(name, " (t -> infinity) = ", v.real(),
              thermal ? "  thermal " + std::to_string(tc.thermal) + "  deviation " +
                            std::to_string(tc.relative_deviation)
                      : std::string());
    }
  }
  ctx.meta(path);
  write_text(ctx.out() / "extrapolate.json", report.dump(2) + "\n");
}

inline void cmd_benchmark(const Context& ctx) {
  const auto& c = ctx.config;
  const Trajectory traj = train(ctx);
  const auto h = c.hamiltonian();
  const auto obs = c.observable_map();
  const auto rows = benchmark(traj, h, obs, c.estimator, c.evaluation_time(), c.extrapolation, c.propagator);
  const double n = static_cast<double>(c.n_sites());
  const fs::path bench = ctx.out() / "benchmark.csv";
  const fs::path both = ctx.out() / "benchmark_trajectory.csv";
  double max_in = 0, max_out = 0;
  {
    CsvWriter b(bench, kBenchmarkColumns);
    CsvWriter t(both, kTrajectoryColumns);
    for (const auto& r : rows) {
      b.write(r.t, r.observable, r.exact, r.tnqg, r.abs_err, r.loss, r.bound, r.state_bound, r.state_err,
              r.trained ? 1 : 0, r.window);
      t.write(r.t, "exact", r.observable, r.exact, 0.0, 0.0, 0.0, r.window);
      t.write(r.t, "tnqg", r.observable, r.tnqg, 0.0, r.loss, r.loss / n, r.window);
      (r.trained ? max_in : max_out) = std::max(r.trained ? max_in : max_out, r.abs_err);
    }
  }
  ctx.meta(bench, {{"extrapolation", to_string(c.extrapolation)}, {"eval_time", c.evaluation_time()}});
  ctx.meta(both);
  ctx.say("max |error| in training interval ", max_in, ", beyond it ", max_out);
}

inline void cmd_cg_study(const Context& ctx) {
  const auto& c = ctx.config;
  const auto study = cg_study(c.hamiltonian(), c.cg_m, c.cg_times);
  const fs::path rows = ctx.out() / "cg.csv";
  const fs::path fit = ctx.out() / "cg_fit.csv";
  {
    CsvWriter csv(rows, {"M", "t", "delta"});
    for (const auto& r : study.rows) csv.write(r.m, r.t, r.delta);
    CsvWriter f(fit, {"t", "exponent"});
    for (const auto& [t, e] : study.exponent) {
      f.write(t, e);
      ctx.say("t = ", t, ": delta ~ M^", e);
    }
  }
  ctx.meta(rows);
  ctx.meta(fit);
}

}  // namespace tnqg::cli
