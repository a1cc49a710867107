#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tnqg/common.hpp"
#include "tnqg/galerkin.hpp"
#include "tnqg/lattice.hpp"
#include "tnqg/parallel.hpp"
#include "tnqg/pauli_operator.hpp"
#include "tnqg/quadrature.hpp"
#include "tnqg/sampler.hpp"

namespace tnqg {

enum class EstimatorMode { exact, monte_carlo };

inline std::string to_string(EstimatorMode m) { return m == EstimatorMode::exact ? "exact" : "mc"; }

inline EstimatorMode parse_estimator_mode(const std::string& s) {
  if (s == "exact") return EstimatorMode::exact;
  if (s == "mc") return EstimatorMode::monte_carlo;
  throw InvalidArgument("unknown estimator '" + s + "' (expected exact or mc)");
}

struct EstimatorOptions {
  EstimatorMode mode = EstimatorMode::exact;
  ChainConfig chains;
  std::size_t enumeration_cap = kDefaultEnumerationCap;
};

// L_loc = O_t + i E_loc at one configuration.
struct LocalLoss {
  Complex l_loc;
  Complex o_t;
  Complex e_loc;
};

// Empty when Psi(sigma, t) = 0.
inline std::optional<LocalLoss> local_loss_estimator(const GalerkinState& state, const SparsePauliOperator& hamiltonian,
                                                     SpinConfiguration sigma, double t) {
  const auto cv = coefficients(state.coeffs, t);
  const Eigen::VectorXcd logs = basis_log_amplitudes(state, sigma);
  const Complex log_psi = combine_log(cv.c, logs);
  if (is_log_zero(log_psi)) return std::nullopt;
  Complex o_t{};
  for (Eigen::Index i = 0; i < logs.size(); ++i) o_t += cv.c_dot(i) * safe_exp(logs(i) - log_psi);
  Complex e_loc{};
  for (const auto& e : hamiltonian.connected(sigma)) {
    const Complex lp = e.config == sigma ? log_psi : combine_log(cv.c, basis_log_amplitudes(state, e.config));
    e_loc += e.amplitude * safe_exp(lp - log_psi);
  }
  return LocalLoss{o_t + kI * e_loc, o_t, e_loc};
}

// ---------------------------------------------------------------------------
// Full-summation machinery. Basis amplitudes are tabulated on all 2^N
// configurations with one common scale factor, which cancels in every ratio.

struct ExactBasis {
  Eigen::MatrixXcd phi;    // 2^N x (M+1), scaled amplitudes
  Eigen::MatrixXcd h_phi;  // H applied to every column
  double log_scale = 0.0;  // phi_true = phi * exp(log_scale)
};

// exp(log_table - shift) with shift = max Re over the nonzero entries.
inline Eigen::MatrixXcd scaled_amplitudes(const Eigen::MatrixXcd& log_table, double* log_scale = nullptr) {
  double shift = -std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < log_table.rows(); ++r) {
    for (Eigen::Index c = 0; c < log_table.cols(); ++c) {
      if (!is_log_zero(log_table(r, c))) shift = std::max(shift, log_table(r, c).real());
    }
  }
  if (!std::isfinite(shift)) throw NumericalError("every basis state vanishes identically");
  Eigen::MatrixXcd out(log_table.rows(), log_table.cols());
  for (Eigen::Index r = 0; r < log_table.rows(); ++r) {
    for (Eigen::Index c = 0; c < log_table.cols(); ++c) out(r, c) = safe_exp(log_table(r, c) - shift);
  }
  if (log_scale != nullptr) *log_scale = shift;
  return out;
}

inline ExactBasis make_exact_basis(const Eigen::MatrixXcd& log_table, const ConnectionTable& hamiltonian) {
  ExactBasis out;
  out.phi = scaled_amplitudes(log_table, &out.log_scale);
  out.h_phi = apply_table(hamiltonian, out.phi);
  return out;
}

// Per-time-point quantities of the exact estimator.
struct ExactPoint {
  double loss = 0.0;
  Eigen::VectorXcd psi;
  Eigen::VectorXcd u;  // weights multiplying d Psi / d theta
  Eigen::VectorXcd r;  // weights multiplying d Psi_dot / d theta
  Eigen::VectorXcd y;  // weights multiplying H d Psi / d theta
};

inline ExactPoint exact_point(const ExactBasis& basis, const Eigen::VectorXcd& c, const Eigen::VectorXcd& c_dot,
                              bool with_gradient) {
  ExactPoint pt;
  pt.psi = basis.phi * c;
  const Eigen::VectorXcd psi_dot = basis.phi * c_dot;
  const Eigen::VectorXcd h_psi = basis.h_phi * c;
  const double norm = pt.psi.squaredNorm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericalError("state has zero or non-finite norm");
  const auto n = pt.psi.size();
  Eigen::VectorXd p(n);
  Eigen::VectorXcd l_loc = Eigen::VectorXcd::Zero(n);
  Complex mean{};
  for (Eigen::Index s = 0; s < n; ++s) {
    p(s) = std::norm(pt.psi(s)) / norm;
    if (pt.psi(s) == Complex{}) continue;
    l_loc(s) = (psi_dot(s) + kI * h_psi(s)) / pt.psi(s);
    mean += p(s) * l_loc(s);
  }
  Eigen::VectorXcd delta(n);
  double var = 0.0;
  for (Eigen::Index s = 0; s < n; ++s) {
    delta(s) = pt.psi(s) == Complex{} ? Complex{} : l_loc(s) - mean;
    var += p(s) * std::norm(delta(s));
  }
  pt.loss = var;
  if (!with_gradient) return pt;
  pt.u = Eigen::VectorXcd::Zero(n);
  pt.r = Eigen::VectorXcd::Zero(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    if (pt.psi(s) == Complex{}) continue;
    const Complex f = p(s) / pt.psi(s);
    pt.u(s) = f * (std::norm(delta(s)) - var - std::conj(delta(s)) * l_loc(s));
    pt.r(s) = f * std::conj(delta(s));
  }
  pt.y = kI * pt.r;
  return pt;
}

// Loss of the state sum_i c_i phi_i with time derivative sum_i c_dot_i phi_i,
// basis given as log-amplitudes on every configuration.
inline double exact_time_local_loss(const Eigen::MatrixXcd& log_table, const ConnectionTable& hamiltonian,
                                    const Eigen::VectorXcd& c, const Eigen::VectorXcd& c_dot) {
  return exact_point(make_exact_basis(log_table, hamiltonian), c, c_dot, false).loss;
}

// ---------------------------------------------------------------------------

struct LossReport {
  std::vector<double> times;
  std::vector<double> point_loss;
  double loss = 0.0;           // (1/T) int L(t) dt
  double loss_per_site = 0.0;  // loss / N
  Eigen::VectorXd gradient;    // real parameter layout; empty unless requested
  std::size_t discarded = 0;
};

// Evaluates the global loss and its gradient over one time window. Caches the
// enumerated Hilbert space and the frozen initial state between calls.
class LossEvaluator {
 public:
  LossEvaluator(const SparsePauliOperator& hamiltonian, QuadratureGrid grid, EstimatorOptions options)
      : hamiltonian_(hamiltonian), grid_(std::move(grid)), options_(options) {
    if (options_.mode == EstimatorMode::exact) {
      configs_ = enumerate_configs(hamiltonian_.site_count(), options_.enumeration_cap);
      spins_ = spins_matrix(configs_, hamiltonian_.site_count());
      table_ = build_connection_table(hamiltonian_, options_.enumeration_cap);
    } else {
      options_.chains.validate();
    }
  }

  const QuadratureGrid& grid() const { return grid_; }
  const EstimatorOptions& options() const { return options_; }

  // `iteration` selects fresh Monte Carlo streams; ignored in exact mode.
  LossReport evaluate(const GalerkinState& state, bool with_gradient, std::uint64_t iteration = 0) {
    state.validate();
    if (options_.mode == EstimatorMode::exact) return evaluate_exact(state, with_gradient);
    return evaluate_mc(state, with_gradient, iteration);
  }

  // Exact log-amplitude table of the state's basis (rows: configurations).
  Eigen::MatrixXcd exact_log_table(const GalerkinState& state, std::vector<Eigen::MatrixXcd>* tanh_theta = nullptr) {
    Eigen::MatrixXcd table(static_cast<Eigen::Index>(configs_.size()),
                           static_cast<Eigen::Index>(state.basis_count() + 1));
    table.col(0) = phi0_column(state.phi0);
    if (tanh_theta != nullptr) tanh_theta->resize(state.basis_count());
    for (std::size_t j = 0; j < state.basis_count(); ++j) {
      table.col(static_cast<Eigen::Index>(j + 1)) =
          rbm_log_amplitudes(state.basis[j], spins_, tanh_theta ? &(*tanh_theta)[j] : nullptr).array() +
          Complex{state.basis_log_offset(j), 0.0};
    }
    return table;
  }

  const ConnectionTable& connection_table() const { return table_; }

 private:
  const Eigen::VectorXcd& phi0_column(const FrozenState& phi0) {
    const auto key = std::make_pair(phi0.parent().get(), phi0.t_star());
    if (phi0_cache_key_ != key || phi0_cache_.size() == 0) {
      phi0_cache_ = phi0.log_amplitudes(configs_, spins_);
      phi0_cache_key_ = key;
    }
    return phi0_cache_;
  }

  LossReport make_report(std::size_t n_points) const {
    LossReport rep;
    rep.times = grid_.points();
    rep.point_loss.assign(n_points, 0.0);
    return rep;
  }

  void finish(LossReport& rep) const {
    rep.loss = grid_.integrate_values(rep.point_loss) / grid_.length();
    rep.loss_per_site = rep.loss / static_cast<double>(hamiltonian_.site_count());
  }

  LossReport evaluate_exact(const GalerkinState& state, bool with_gradient) {
    const auto layout = parameter_layout(state);
    std::vector<Eigen::MatrixXcd> tanh_theta;
    const Eigen::MatrixXcd log_table = exact_log_table(state, with_gradient ? &tanh_theta : nullptr);
    const ExactBasis basis = make_exact_basis(log_table, table_);
    const auto n_cfg = basis.phi.rows();
    const auto& gamma = state.coeffs.gamma;
    const auto& omega = state.coeffs.omega;

    auto rep = make_report(grid_.size());
    Eigen::VectorXcd grad = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(layout.n_complex));
    std::vector<Eigen::VectorXcd> c_acc(layout.rbm_index.size(), Eigen::VectorXcd::Zero(n_cfg));
    std::vector<Eigen::VectorXcd> y_acc(layout.rbm_index.size(), Eigen::VectorXcd::Zero(n_cfg));

    for (std::size_t j = 0; j < grid_.size(); ++j) {
      const double t = grid_.points()[j];
      const double w = grid_.weights()[j];
      const auto cv = coefficients(state.coeffs, t);
      const ExactPoint pt = exact_point(basis, cv.c, cv.c_dot, with_gradient);
      rep.point_loss[j] = pt.loss;
      if (!with_gradient) continue;

      const Eigen::VectorXcd p_vec = basis.phi.transpose() * pt.u + basis.h_phi.transpose() * pt.y;
      const Eigen::VectorXcd q_vec = basis.phi.transpose() * pt.r;
      accumulate_coefficient_gradient(layout, gamma, omega, t, w, p_vec, q_vec, grad);
      for (std::size_t r = 0; r < layout.rbm_index.size(); ++r) {
        const auto idx = static_cast<Eigen::Index>(layout.rbm_index[r] + 1);
        c_acc[r] += w * (cv.c(idx) * pt.u + cv.c_dot(idx) * pt.r);
        y_acc[r] += (w * cv.c(idx)) * pt.y;
      }
    }
    finish(rep);
    if (!with_gradient) return rep;

    for (std::size_t r = 0; r < layout.rbm_index.size(); ++r) {
      const auto j = layout.rbm_index[r];
      Eigen::VectorXcd g = c_acc[r] + apply_table_transpose(table_, y_acc[r]);
      g.array() *= basis.phi.col(static_cast<Eigen::Index>(j + 1)).array();
      const Eigen::VectorXcd gk = rbm_contract_derivatives(state.basis[j], spins_, tanh_theta[j], g);
      grad.segment(static_cast<Eigen::Index>(layout.rbm_offset[r]), gk.size()) += gk;
    }
    grad /= grid_.length();
    rep.gradient = real_gradient(layout, grad);
    return rep;
  }

  // Gradient of the gamma and omega entries given P_i = sum u phi_i + y H phi_i and
  // Q_i = sum r phi_i at one time point.
  static void accumulate_coefficient_gradient(const ParameterLayout& layout, const Eigen::MatrixXcd& gamma,
                                              const Eigen::VectorXd& omega, double t, double w,
                                              const Eigen::VectorXcd& p_vec, const Eigen::VectorXcd& q_vec,
                                              Eigen::VectorXcd& grad) {
    if (layout.gamma) {
      Eigen::Index k = static_cast<Eigen::Index>(layout.gamma_offset);
      for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
        for (Eigen::Index m = 0; m < gamma.cols(); ++m) {
          const Complex e = std::exp(kI * (omega(m) * t));
          grad(k++) += w * ((e - 1.0) * p_vec(i + 1) + kI * omega(m) * e * q_vec(i + 1));
        }
      }
    }
    if (layout.omega) {
      Eigen::Index k = static_cast<Eigen::Index>(layout.omega_offset);
      for (Eigen::Index m = 0; m < omega.size(); ++m) {
        const Complex e = std::exp(kI * (omega(m) * t));
        Complex acc{};
        for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
          acc += gamma(i, m) * (kI * t * e * p_vec(i + 1) + e * (kI - omega(m) * t) * q_vec(i + 1));
        }
        grad(k++) += w * acc;
      }
    }
  }

  struct McPoint {
    double loss = 0.0;
    std::size_t discarded = 0;
    Eigen::VectorXcd grad;
  };

  McPoint mc_point(const GalerkinState& state, const ParameterLayout& layout, double t, bool with_gradient,
                   std::uint64_t stream) const {
    const auto cv = coefficients(state.coeffs, t);
    const auto samples = sample_born(state, t, options_.chains, stream);
    const auto m1 = static_cast<Eigen::Index>(state.basis_count() + 1);

    struct Neighbour {
      SpinConfiguration config;
      Complex h;
      Eigen::VectorXcd ratio;  // phi_i(sigma') / Psi(sigma)
    };
    struct Sample {
      SpinConfiguration config;
      Eigen::VectorXcd ratio;  // phi_i(sigma) / Psi(sigma)
      Complex l_loc;
      std::vector<Neighbour> neighbours;
    };
    McPoint out;
    std::vector<Sample> kept;
    kept.reserve(samples.configs.size());
    for (const auto sigma : samples.configs) {
      const Eigen::VectorXcd logs = basis_log_amplitudes(state, sigma);
      const Complex log_psi = combine_log(cv.c, logs);
      if (is_log_zero(log_psi)) {
        ++out.discarded;
        continue;
      }
      Sample s{sigma, (logs.array() - log_psi).unaryExpr([](Complex z) { return safe_exp(z); }), {}, {}};
      const Complex o_t = (cv.c_dot.array() * s.ratio.array()).sum();
      Complex e_loc{};
      for (const auto& e : hamiltonian_.connected(sigma)) {
        Eigen::VectorXcd ratio = e.config == sigma
                                     ? s.ratio
                                     : Eigen::VectorXcd((basis_log_amplitudes(state, e.config).array() - log_psi)
                                                            .unaryExpr([](Complex z) { return safe_exp(z); }));
        e_loc += e.amplitude * (cv.c.array() * ratio.array()).sum();
        if (with_gradient) s.neighbours.push_back({e.config, e.amplitude, std::move(ratio)});
      }
      s.l_loc = o_t + kI * e_loc;
      kept.push_back(std::move(s));
    }
    if (kept.empty()) throw NumericalError("all Monte Carlo samples had zero amplitude");
    const double w = 1.0 / static_cast<double>(kept.size());
    Complex mean{};
    for (const auto& s : kept) mean += w * s.l_loc;
    double var = 0.0;
    for (const auto& s : kept) var += w * std::norm(s.l_loc - mean);
    out.loss = var;
    if (!with_gradient) return out;

    out.grad = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(layout.n_complex));
    Eigen::VectorXcd p_vec = Eigen::VectorXcd::Zero(m1);
    Eigen::VectorXcd q_vec = Eigen::VectorXcd::Zero(m1);
    for (const auto& s : kept) {
      const Complex delta = s.l_loc - mean;
      const Complex u = w * (std::norm(delta) - var - std::conj(delta) * s.l_loc);
      const Complex r = w * std::conj(delta);
      const Complex y = kI * r;
      p_vec += u * s.ratio;
      q_vec += r * s.ratio;
      for (const auto& nb : s.neighbours) p_vec += (y * nb.h) * nb.ratio;
      for (std::size_t k = 0; k < layout.rbm_index.size(); ++k) {
        const auto j = layout.rbm_index[k];
        const auto idx = static_cast<Eigen::Index>(j + 1);
        const auto& rbm = state.basis[j];
        const auto off = static_cast<Eigen::Index>(layout.rbm_offset[k]);
        const auto len = static_cast<Eigen::Index>(rbm.parameter_count());
        out.grad.segment(off, len) +=
            ((cv.c(idx) * u + cv.c_dot(idx) * r) * s.ratio(idx)) * rbm_log_derivatives(rbm, s.config);
        for (const auto& nb : s.neighbours) {
          out.grad.segment(off, len) += (cv.c(idx) * y * nb.h * nb.ratio(idx)) * rbm_log_derivatives(rbm, nb.config);
        }
      }
    }
    accumulate_coefficient_gradient(layout, state.coeffs.gamma, state.coeffs.omega, t, 1.0, p_vec, q_vec, out.grad);
    return out;
  }

  LossReport evaluate_mc(const GalerkinState& state, bool with_gradient, std::uint64_t iteration) {
    const auto layout = parameter_layout(state);
    const std::size_t n = grid_.size();
    std::vector<McPoint> points(n);
    parallel_for(n, [&](std::size_t j) {
      points[j] = mc_point(state, layout, grid_.points()[j], with_gradient, iteration * n + j);
    });
    auto rep = make_report(n);
    Eigen::VectorXcd grad = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(layout.n_complex));
    for (std::size_t j = 0; j < n; ++j) {
      rep.point_loss[j] = points[j].loss;
      rep.discarded += points[j].discarded;
      if (with_gradient) grad += grid_.weights()[j] * points[j].grad;
    }
    finish(rep);
    if (with_gradient) rep.gradient = real_gradient(layout, grad / grid_.length());
    return rep;
  }

  SparsePauliOperator hamiltonian_;
  QuadratureGrid grid_;
  EstimatorOptions options_;
  std::vector<SpinConfiguration> configs_;
  Eigen::MatrixXd spins_;
  ConnectionTable table_;
  Eigen::VectorXcd phi0_cache_;
  std::pair<const GalerkinState*, double> phi0_cache_key_{nullptr, -1.0};
};

// Variance of L_loc under |Psi(t)|^2 at a single time.
inline double time_local_loss(const GalerkinState& state, const SparsePauliOperator& hamiltonian, double t,
                              const EstimatorOptions& options, std::uint64_t stream = 0) {
  if (options.mode == EstimatorMode::exact) {
    LossEvaluator ev(hamiltonian, QuadratureGrid(0.0, 1.0, 3), options);
    const ExactBasis basis = make_exact_basis(ev.exact_log_table(state), ev.connection_table());
    const auto cv = coefficients(state.coeffs, t);
    return exact_point(basis, cv.c, cv.c_dot, false).loss;
  }
  const auto samples = sample_born(state, t, options.chains, stream);
  std::vector<Complex> values;
  for (const auto s : samples.configs) {
    if (auto l = local_loss_estimator(state, hamiltonian, s, t)) values.push_back(l->l_loc);
  }
  if (values.empty()) throw NumericalError("all Monte Carlo samples had zero amplitude");
  Complex mean{};
  for (auto v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (auto v : values) var += std::norm(v - mean);
  return var / static_cast<double>(values.size());
}

inline LossReport global_loss(const GalerkinState& state, const SparsePauliOperator& hamiltonian,
                              const QuadratureGrid& grid, const EstimatorOptions& options,
                              std::uint64_t iteration = 0) {
  LossEvaluator ev(hamiltonian, grid, options);
  return ev.evaluate(state, false, iteration);
}

inline LossReport global_loss_gradient(const GalerkinState& state, const SparsePauliOperator& hamiltonian,
                                       const QuadratureGrid& grid, const EstimatorOptions& options,
                                       std::uint64_t iteration = 0) {
  if (parameter_layout(state).n_real == 0) throw InvalidArgument("state has no trainable parameters");
  LossEvaluator ev(hamiltonian, grid, options);
  return ev.evaluate(state, true, iteration);
}

// ---------------------------------------------------------------------------
// State vectors and expectation values of Galerkin states.

// Normalised state vector over all 2^N configurations.
inline Eigen::VectorXcd galerkin_state_vector(const GalerkinState& state, double t,
                                              std::size_t cap = kDefaultEnumerationCap) {
  const auto configs = enumerate_configs(state.n_sites, cap);
  const Eigen::MatrixXd spins = spins_matrix(configs, state.n_sites);
  const Eigen::MatrixXcd table = basis_log_table(state, configs, spins);
  const auto cv = coefficients(state.coeffs, t);
  Eigen::VectorXcd logs(table.rows());
  double shift = -std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    logs(r) = combine_log(cv.c, table.row(r).transpose());
    if (!is_log_zero(logs(r))) shift = std::max(shift, logs(r).real());
  }
  if (!std::isfinite(shift)) throw NumericalError("state vanishes on every configuration");
  Eigen::VectorXcd psi(table.rows());
  for (Eigen::Index r = 0; r < table.rows(); ++r) psi(r) = safe_exp(logs(r) - shift);
  return psi / psi.norm();
}

// <Psi(t)|O|Psi(t)> / <Psi(t)|Psi(t)>, exactly or as the Born-sampled mean of O_loc.
inline Complex galerkin_expectation(const GalerkinState& state, const SparsePauliOperator& op, double t,
                                    const EstimatorOptions& options, std::uint64_t stream = 0) {
  if (options.mode == EstimatorMode::exact) {
    const Eigen::VectorXcd psi = galerkin_state_vector(state, t, options.enumeration_cap);
    return psi.dot(apply_operator(op, psi));
  }
  const auto cv = coefficients(state.coeffs, t);
  const auto samples = sample_born(state, t, options.chains, stream);
  Complex acc{};
  std::size_t kept = 0;
  for (const auto s : samples.configs) {
    const Complex lp = combine_log(cv.c, basis_log_amplitudes(state, s));
    if (is_log_zero(lp)) continue;
    Complex o_loc{};
    for (const auto& e : op.connected(s)) {
      o_loc += e.amplitude * safe_exp(combine_log(cv.c, basis_log_amplitudes(state, e.config)) - lp);
    }
    acc += o_loc;
    ++kept;
  }
  if (kept == 0) throw NumericalError("all Monte Carlo samples had zero amplitude");
  return acc / static_cast<double>(kept);
}

}  // namespace tnqg
