#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tnqg/common.hpp"
#include "tnqg/galerkin.hpp"
#include "tnqg/loss.hpp"

namespace tnqg {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  AdamState() = default;
  AdamState(std::size_t dim, AdamConfig cfg)
      : config(cfg), m(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
        v(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))) {}
};

inline void adam_step(AdamState& s, Eigen::VectorXd& params, const Eigen::VectorXd& gradient) {
  if (params.size() != s.m.size() || gradient.size() != s.m.size()) {
    throw InvalidArgument("Adam: parameter, gradient and moment sizes differ");
  }
  for (Eigen::Index k = 0; k < gradient.size(); ++k) {
    if (!std::isfinite(gradient(k))) {
      throw NumericalError("Adam: non-finite gradient component " + std::to_string(k) + " at step " +
                           std::to_string(s.step + 1));
    }
  }
  const auto& c = s.config;
  ++s.step;
  s.m = c.beta1 * s.m + (1.0 - c.beta1) * gradient;
  s.v = c.beta2 * s.v + (1.0 - c.beta2) * gradient.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));
  params.array() -= c.lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + c.eps);
}

struct OptimizeConfig {
  std::size_t iterations = 2000;
  AdamConfig adam;
  double divergence_factor = 1e6;
};

struct IterationRecord {
  std::size_t iter = 0;
  double loss = 0.0;
  double loss_per_site = 0.0;
  double grad_norm = 0.0;
  std::size_t discarded = 0;
  double wall_ms = 0.0;
};

struct WindowResult {
  GalerkinState state;  // best-loss parameters
  double best_loss = 0.0;
  std::size_t best_iter = 0;
  LossReport report;  // per-point losses of the returned state
  std::vector<IterationRecord> history;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

// Adam on the global loss over the evaluator's grid. The best parameters seen
// are returned; iterations use fresh Monte Carlo streams.
inline WindowResult optimize_window(GalerkinState state, LossEvaluator& evaluator, const OptimizeConfig& cfg,
                                    const IterationCallback& on_iteration = {}) {
  const auto layout = parameter_layout(state);
  WindowResult out;
  Eigen::VectorXd x = get_real_parameters(state);
  AdamState adam(layout.n_real, cfg.adam);
  double initial = -1.0;
  out.best_loss = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x = x;

  const bool trainable = layout.n_real > 0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto start = std::chrono::steady_clock::now();
    const LossReport rep = evaluator.evaluate(state, trainable, it);
    if (!std::isfinite(rep.loss)) throw NumericalError("loss is not finite at iteration " + std::to_string(it));
    if (initial < 0) initial = rep.loss;
    if (rep.loss > cfg.divergence_factor * initial && rep.loss > 0) {
      throw NumericalError("loss diverged at iteration " + std::to_string(it) + " (" + std::to_string(rep.loss) +
                           " vs initial " + std::to_string(initial) + ")");
    }
    if (rep.loss < out.best_loss) {
      out.best_loss = rep.loss;
      out.best_iter = it;
      best_x = x;
    }
    if (trainable) {
      adam_step(adam, x, rep.gradient);
      set_real_parameters(state, x);
    }
    IterationRecord rec;
    rec.iter = it;
    rec.loss = rep.loss;
    rec.loss_per_site = rep.loss_per_site;
    rec.grad_norm = trainable ? rep.gradient.norm() : 0.0;
    rec.discarded = rep.discarded;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out.history.push_back(rec);
    if (on_iteration) on_iteration(rec);
  }
  if (trainable) set_real_parameters(state, best_x);
  out.state = std::move(state);
  // Per-point losses of the kept parameters, on a stream no iteration used.
  out.report = evaluator.evaluate(out.state, false, cfg.iterations);
  if (cfg.iterations == 0) out.best_loss = out.report.loss;
  return out;
}

// ---------------------------------------------------------------------------
// Sub-interval concatenation.

struct WindowSchedule {
  double window_length = 0.25;  // Delta T
  std::size_t windows = 1;
  std::size_t grid_points = 129;
  OptimizeConfig optimize;
  bool warm_start = true;

  double total_time() const { return window_length * static_cast<double>(windows); }

  void validate() const {
    if (!(window_length > 0)) throw InvalidArgument("window length must be positive");
    if (windows == 0) throw InvalidArgument("schedule needs at least one window");
    if (grid_points < 3 || grid_points % 2 == 0) throw InvalidArgument("grid points must be odd and >= 3");
  }
};

struct WindowRecord {
  std::size_t index = 0;
  double t_start = 0.0;
  std::shared_ptr<const GalerkinState> state;
  LossReport report;  // local times
  std::vector<IterationRecord> history;
  double best_loss = 0.0;
};

// Error raised inside window `window`.
class WindowError : public NumericalError {
 public:
  WindowError(std::size_t window, const std::string& what)
      : NumericalError("window " + std::to_string(window) + ": " + what), window_(window) {}
  std::size_t window() const { return window_; }

 private:
  std::size_t window_;
};

// Piecewise trajectory on [0, windows * Delta T].
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(double window_length, std::vector<WindowRecord> windows)
      : window_length_(window_length), windows_(std::move(windows)) {}

  double window_length() const { return window_length_; }
  double total_time() const { return window_length_ * static_cast<double>(windows_.size()); }
  const std::vector<WindowRecord>& windows() const { return windows_; }
  std::vector<WindowRecord>& windows() { return windows_; }

  // (window, local time) for a global time; t = k Delta T maps to the start of window k
  // except at the final endpoint.
  std::pair<std::size_t, double> locate(double t) const {
    if (windows_.empty()) throw InvalidArgument("empty trajectory");
    if (t < 0) throw InvalidArgument("negative time");
    auto k = static_cast<std::size_t>(std::floor(t / window_length_));
    if (k >= windows_.size()) k = windows_.size() - 1;
    return {k, t - window_length_ * static_cast<double>(k)};
  }

  const GalerkinState& state(std::size_t window) const { return *windows_.at(window).state; }

  Complex log_amplitude(SpinConfiguration sigma, double t) const {
    const auto [k, local] = locate(t);
    return galerkin_log_amplitude(state(k), sigma, local);
  }

  Complex expectation(const SparsePauliOperator& op, double t, const EstimatorOptions& options,
                      std::uint64_t stream = 0) const {
    const auto [k, local] = locate(t);
    return galerkin_expectation(state(k), op, local, options, stream);
  }

  Eigen::VectorXcd state_vector(double t, std::size_t cap = kDefaultEnumerationCap) const {
    const auto [k, local] = locate(t);
    return galerkin_state_vector(state(k), local, cap);
  }

  // Per-point losses on global times, windows joined (shared boundary points kept once).
  std::pair<std::vector<double>, std::vector<double>> loss_profile() const {
    std::vector<double> times, losses;
    for (const auto& w : windows_) {
      for (std::size_t j = 0; j < w.report.times.size(); ++j) {
        if (j == 0 && !times.empty()) continue;
        times.push_back(w.t_start + w.report.times[j]);
        losses.push_back(w.report.point_loss[j]);
      }
    }
    return {times, losses};
  }

 private:
  double window_length_ = 0.0;
  std::vector<WindowRecord> windows_;
};

using WindowCallback = std::function<void(const WindowRecord&)>;
using WindowIterationCallback = std::function<void(std::size_t window, const IterationRecord&)>;

// Optimizes the windows in sequence. Window k+1 starts from phi_0 = window k at
// local time Delta T; with warm_start its RBMs and Fourier table are copied from
// window k, otherwise `initial` is reused.
inline Trajectory run_concatenated(const GalerkinState& initial, const SparsePauliOperator& hamiltonian,
                                   const WindowSchedule& schedule, const EstimatorOptions& estimator,
                                   const WindowCallback& on_window = {},
                                   const WindowIterationCallback& on_iteration = {}) {
  schedule.validate();
  std::vector<WindowRecord> records;
  GalerkinState next = initial;
  for (std::size_t k = 0; k < schedule.windows; ++k) {
    try {
      LossEvaluator ev(hamiltonian, QuadratureGrid(0.0, schedule.window_length, schedule.grid_points), estimator);
      IterationCallback cb;
      if (on_iteration) cb = [&](const IterationRecord& r) { on_iteration(k, r); };
      auto result = optimize_window(next, ev, schedule.optimize, cb);
      WindowRecord rec;
      rec.index = k;
      rec.t_start = schedule.window_length * static_cast<double>(k);
      rec.state = std::make_shared<const GalerkinState>(std::move(result.state));
      rec.report = std::move(result.report);
      rec.history = std::move(result.history);
      rec.best_loss = result.best_loss;
      if (on_window) on_window(rec);
      next = schedule.warm_start ? *rec.state : initial;
      next.phi0 = FrozenState::frozen(rec.state, schedule.window_length);
      records.push_back(std::move(rec));
    } catch (const WindowError&) {
      throw;
    } catch (const Error& e) {
      throw WindowError(k, e.what());
    }
  }
  return Trajectory(schedule.window_length, std::move(records));
}

}  // namespace tnqg
