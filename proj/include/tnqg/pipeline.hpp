#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tnqg/exact.hpp"
#include "tnqg/loss.hpp"
#include "tnqg/optimizer.hpp"
#include "tnqg/subspace.hpp"

namespace tnqg {

using ObservableMap = std::map<std::string, SparsePauliOperator>;

// ---------------------------------------------------------------------------
// Refinement: within each window, replace the trained coefficients by the
// linear variational solution from c(0) = e_0 in that window's basis.

struct RefinedWindow {
  SubspaceMatrices matrices;
  Pencil pencil;
  ModeDecomposition modes;
};

inline RefinedWindow refine_window(const GalerkinState& state, const SparsePauliOperator& hamiltonian,
                                   const ObservableMap& observables, const EstimatorOptions& options,
                                   double rel_eps = kDefaultRegularization, std::uint64_t stream = 0) {
  RefinedWindow out;
  out.matrices = estimate_matrices(state, hamiltonian, observables, options, stream);
  out.pencil = solve_pencil(out.matrices, rel_eps);
  out.modes = mode_decomposition(out.pencil, unit_initial_coefficients(out.matrices.dim()));
  return out;
}

struct RefinedPoint {
  double t = 0.0;  // global
  std::size_t window = 0;
  std::map<std::string, Complex> values;
  double loss = 0.0;        // subspace loss
  double loss_check = NAN;  // loss-module evaluation of the same state (exact mode only)
};

inline std::vector<RefinedPoint> refine_trajectory(const Trajectory& traj, const SparsePauliOperator& hamiltonian,
                                                   const ObservableMap& observables, const EstimatorOptions& options,
                                                   double rel_eps = kDefaultRegularization) {
  std::vector<RefinedPoint> out;
  for (const auto& w : traj.windows()) {
    const auto& state = *w.state;
    const auto ref = refine_window(state, hamiltonian, observables, options, rel_eps, w.index);
    std::optional<LossEvaluator> ev;
    Eigen::MatrixXcd log_table;
    if (options.mode == EstimatorMode::exact) {
      ev.emplace(hamiltonian, QuadratureGrid(0, 1, 3), options);
      log_table = ev->exact_log_table(state);
    }
    for (std::size_t j = 0; j < w.report.times.size(); ++j) {
      if (j == 0 && !out.empty()) continue;  // shared boundary kept from the previous window
      const double local = w.report.times[j];
      RefinedPoint p;
      p.t = w.t_start + local;
      p.window = w.index;
      const Eigen::VectorXcd c = ref.modes.coefficients(local);
      for (const auto& [name, o] : ref.matrices.observables) p.values[name] = subspace_expectation(ref.matrices, o, c);
      p.loss = subspace_loss(ref.matrices, ref.pencil, c);
      if (ev) {
        const Eigen::VectorXcd c_dot = linear_variational_rate(ref.pencil, ref.matrices.H, c);
        p.loss_check = exact_time_local_loss(log_table, ev->connection_table(), c, c_dot);
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation past the trained horizon.

enum class ExtrapolationMode { pencil, fourier };

inline std::string to_string(ExtrapolationMode m) { return m == ExtrapolationMode::pencil ? "pencil" : "fourier"; }

inline ExtrapolationMode parse_extrapolation_mode(const std::string& s) {
  if (s == "pencil") return ExtrapolationMode::pencil;
  if (s == "fourier") return ExtrapolationMode::fourier;
  throw InvalidArgument("unknown extrapolation mode '" + s + "' (expected pencil or fourier)");
}

// Trained trajectory on [0, T]; beyond T either the last window's Fourier
// coefficients are continued, or the last window's state at T is propagated
// with the linear variational equations in that window's basis.
class ExtendedTrajectory {
 public:
  ExtendedTrajectory(const Trajectory& traj, const SparsePauliOperator& hamiltonian, const ObservableMap& observables,
                     const EstimatorOptions& options, ExtrapolationMode mode,
                     double rel_eps = kDefaultRegularization)
      : traj_(traj), hamiltonian_(hamiltonian), options_(options), mode_(mode) {
    if (mode_ == ExtrapolationMode::pencil) {
      const auto& last = traj_.state(traj_.windows().size() - 1);
      matrices_ = estimate_matrices(last, hamiltonian, observables, options, 0x5eed);
      pencil_ = solve_pencil(matrices_, rel_eps);
      const Eigen::VectorXcd c_end = coefficients(last.coeffs, traj_.window_length()).c;
      modes_ = mode_decomposition(pencil_, c_end);
    }
  }

  double horizon() const { return traj_.total_time(); }
  bool trained(double t) const { return t <= horizon() * (1 + 1e-12); }

  Complex expectation(const std::string& name, const SparsePauliOperator& op, double t,
                      std::uint64_t stream = 0) const {
    if (trained(t) || mode_ == ExtrapolationMode::fourier) return traj_.expectation(op, t, options_, stream);
    const auto it = matrices_.observables.find(name);
    if (it == matrices_.observables.end()) throw InvalidArgument("no subspace matrix for observable '" + name + "'");
    return subspace_expectation(matrices_, it->second, modes_.coefficients(t - horizon()));
  }

  // Time-local loss past the horizon (inside it, use the training report).
  double loss(double t, std::uint64_t stream = 0) const {
    if (mode_ == ExtrapolationMode::fourier || trained(t)) {
      const auto [k, local] = traj_.locate(t);
      return time_local_loss(traj_.state(k), hamiltonian_, local, options_, stream);
    }
    return subspace_loss(matrices_, pencil_, modes_.coefficients(t - horizon()));
  }

  // Normalised state vector (exact mode sizes only).
  Eigen::VectorXcd state_vector(double t) const {
    if (trained(t) || mode_ == ExtrapolationMode::fourier) return traj_.state_vector(t, options_.enumeration_cap);
    const auto& last = traj_.state(traj_.windows().size() - 1);
    const auto configs = enumerate_configs(last.n_sites, options_.enumeration_cap);
    const Eigen::MatrixXd spins = spins_matrix(configs, last.n_sites);
    const Eigen::MatrixXcd table = basis_log_table(last, configs, spins);
    Eigen::VectorXcd psi = scaled_amplitudes(table) * modes_.coefficients(t - horizon());
    return psi / psi.norm();
  }

 private:
  const Trajectory& traj_;
  SparsePauliOperator hamiltonian_;
  EstimatorOptions options_;
  ExtrapolationMode mode_;
  SubspaceMatrices matrices_;
  Pencil pencil_;
  ModeDecomposition modes_;
};

// ---------------------------------------------------------------------------
// Side-by-side comparison with the exact oracle.

struct BenchmarkRow {
  double t = 0.0;
  std::string observable;
  double exact = 0.0;
  double tnqg = 0.0;
  double abs_err = 0.0;
  double loss = 0.0;
  double bound = 0.0;        // observable bound, ||O|| = 1
  double state_bound = 0.0;  // t sqrt(L_[0,t])
  double state_err = 0.0;    // phase-aligned distance to the exact state
  bool trained = true;
  std::size_t window = 0;
};

// Rows on the training grid up to the horizon, then on the same spacing up to t_eval.
inline std::vector<BenchmarkRow> benchmark(const Trajectory& traj, const SparsePauliOperator& hamiltonian,
                                           const ObservableMap& observables, const EstimatorOptions& options,
                                           double t_eval, ExtrapolationMode mode,
                                           Propagator propagator = Propagator::dense) {
  const auto n = hamiltonian.site_count();
  check_enumeration_cap(n, options.enumeration_cap);
  auto [times, losses] = traj.loss_profile();
  const ExtendedTrajectory ext(traj, hamiltonian, observables, options, mode);
  const double h = times[1] - times[0];
  const double horizon = traj.total_time();
  if (t_eval > horizon * (1 + 1e-12)) {
    const auto extra = static_cast<std::size_t>(std::ceil((t_eval - horizon) / h - 1e-9));
    for (std::size_t k = 1; k <= extra; ++k) {
      const double t = horizon + h * static_cast<double>(k);
      times.push_back(t);
      losses.push_back(ext.loss(t, k));
    }
  }
  const auto bounds = error_bounds(times, losses, 1.0);
  const auto exact_states = evolve_exact(hamiltonian, plus_state_vector(n), times, propagator);
  std::vector<BenchmarkRow> rows;
  for (std::size_t j = 0; j < times.size(); ++j) {
    const Eigen::VectorXcd psi = ext.state_vector(times[j]);
    const double state_err = phase_aligned_distance(exact_states[j], psi);
    for (const auto& [name, op] : observables) {
      BenchmarkRow r;
      r.t = times[j];
      r.observable = name;
      r.exact = expectation(exact_states[j], op).real();
      r.tnqg = ext.expectation(name, op, times[j], j).real();
      r.abs_err = std::abs(r.exact - r.tnqg);
      r.loss = losses[j];
      r.bound = bounds.observable[j];
      r.state_bound = bounds.state[j];
      r.state_err = state_err;
      r.trained = ext.trained(times[j]);
      r.window = traj.locate(std::min(times[j], horizon)).first;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Coarse-grained basis scaling.

struct CgRow {
  std::size_t m = 0;
  double t = 0.0;
  double delta = 0.0;
};

struct CgStudy {
  std::vector<CgRow> rows;
  std::map<double, double> exponent;  // least-squares slope of log delta vs log M, per t > 0
};

inline CgStudy cg_study(const SparsePauliOperator& hamiltonian, const std::vector<std::size_t>& m_values,
                        const std::vector<double>& times) {
  const auto spec = diagonalize(hamiltonian);
  const auto psi0 = plus_state_vector(hamiltonian.site_count());
  CgStudy out;
  for (auto m : m_values) {
    const auto basis = cg_basis(spec, psi0, cg_mu_grid(spec, m));
    for (double t : times) out.rows.push_back({m, t, cg_error(spec, psi0, basis, t)});
  }
  for (double t : times) {
    if (t <= 0) continue;
    std::vector<double> x, y;
    for (const auto& r : out.rows) {
      if (r.t == t && r.delta > 0) {
        x.push_back(std::log(static_cast<double>(r.m)));
        y.push_back(std::log(r.delta));
      }
    }
    if (x.size() < 2) continue;
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    const double xm = xv.mean(), ym = yv.mean();
    out.exponent[t] = ((xv.array() - xm) * (yv.array() - ym)).sum() / (xv.array() - xm).square().sum();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Infinite-time report and thermal comparison.

struct InfiniteTimeReport {
  std::map<std::string, Complex> values;
  double loss = 0.0;
  double loss_per_site = 0.0;
  std::vector<std::pair<double, std::size_t>> groups;  // (frequency, multiplicity)
  double rescale_deviation = 0.0;  // max |value(k S, k H, ...) - value| over observables
};

inline InfiniteTimeReport infinite_time_report(const RefinedWindow& ref, std::size_t n_sites) {
  InfiniteTimeReport out;
  for (const auto& [name, o] : ref.matrices.observables) {
    out.values[name] = infinite_time_expectation(ref.matrices, ref.modes, o);
  }
  out.loss = infinite_time_loss(ref.matrices, ref.pencil, ref.modes);
  out.loss_per_site = out.loss / static_cast<double>(n_sites);
  for (auto [a, b] : ref.modes.groups) out.groups.emplace_back(ref.modes.lambda(a), static_cast<std::size_t>(b - a));
  // The unknown common constant must cancel.
  SubspaceMatrices scaled = ref.matrices;
  const double k = 3.7;
  scaled.S *= k;
  scaled.H *= k;
  scaled.H2 *= k;
  for (auto& [name, o] : scaled.observables) o *= k;
  const auto modes = mode_decomposition(solve_pencil(scaled), unit_initial_coefficients(scaled.dim()));
  for (const auto& [name, o] : scaled.observables) {
    out.rescale_deviation =
        std::max(out.rescale_deviation, std::abs(infinite_time_expectation(scaled, modes, o) - out.values[name]));
  }
  return out;
}

struct ThermalComparison {
  double energy = 0.0;  // <Psi_0|H|Psi_0>
  EffectiveBeta beta;
  double thermal = 0.0;
  double diagonal = 0.0;   // diagonal-ensemble value of the exact dynamics
  double predicted = 0.0;  // t-NQG infinite-time value
  double relative_deviation = 0.0;  // (predicted - thermal) / thermal
};

inline ThermalComparison thermal_comparison(const SparsePauliOperator& hamiltonian, const SparsePauliOperator& op,
                                            double predicted) {
  const auto spec = diagonalize(hamiltonian);
  const auto psi0 = plus_state_vector(hamiltonian.site_count());
  const Eigen::MatrixXcd od = dense_matrix(op);
  ThermalComparison out;
  out.energy = expectation(psi0, hamiltonian).real();
  out.beta = effective_beta(spec, out.energy);
  out.thermal = thermal_expectation(spec, od, out.beta.beta).real();
  out.diagonal = diagonal_ensemble_expectation(spec, psi0, od).real();
  out.predicted = predicted;
  // Undefined when the thermal value vanishes (e.g. sigma^z by symmetry).
  out.relative_deviation = std::abs(out.thermal) > 1e-12 ? (predicted - out.thermal) / out.thermal : NAN;
  return out;
}

}  // namespace tnqg
