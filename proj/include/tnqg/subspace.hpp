#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tnqg/common.hpp"
#include "tnqg/exact.hpp"
#include "tnqg/loss.hpp"
#include "tnqg/pauli_operator.hpp"
#include "tnqg/quadrature.hpp"
#include "tnqg/sampler.hpp"

namespace tnqg {

// Matrix elements in the span of the basis states, all divided by the same
// unknown positive constant k (the mixture normalisation sum_sigma Pi(sigma)).
struct SubspaceMatrices {
  Eigen::MatrixXcd S;
  Eigen::MatrixXcd H;
  Eigen::MatrixXcd H2;
  std::map<std::string, Eigen::MatrixXcd> observables;
  // Standard errors of the real and imaginary parts (Monte Carlo mode only).
  Eigen::MatrixXd S_se, H_se, H2_se;
  EstimatorMode mode = EstimatorMode::exact;
  std::size_t samples = 0;

  Eigen::Index dim() const { return S.rows(); }
};

inline Eigen::MatrixXcd hermitize(const Eigen::MatrixXcd& a) { return 0.5 * (a + a.adjoint()); }

namespace detail {

inline std::vector<std::pair<std::string, const SparsePauliOperator*>> operator_list(
    const std::map<std::string, SparsePauliOperator>& ops) {
  std::vector<std::pair<std::string, const SparsePauliOperator*>> out;
  for (const auto& [name, op] : ops) out.emplace_back(name, &op);
  return out;
}

// Entrywise standard error of the mean of complex per-sample terms, combining
// the real and imaginary spreads in quadrature.
struct MomentAccumulator {
  Eigen::MatrixXcd sum;
  Eigen::MatrixXd sum_sq;

  explicit MomentAccumulator(Eigen::Index m) : sum(Eigen::MatrixXcd::Zero(m, m)), sum_sq(Eigen::MatrixXd::Zero(m, m)) {}

  void add(const Eigen::MatrixXcd& term) {
    sum += term;
    sum_sq.array() += term.array().real().square() + term.array().imag().square();
  }
  Eigen::MatrixXcd mean(double n) const { return sum / n; }
  Eigen::MatrixXd standard_error(double n) const {
    const Eigen::ArrayXXd mean_sq = (sum / n).array().abs2();
    return ((sum_sq.array() / n - mean_sq).max(0.0) / std::max(1.0, n - 1.0)).sqrt().matrix();
  }
};

}  // namespace detail

// S_ij = <phi_i|phi_j>, H_ij = <phi_i|H|phi_j>, H2_ij = <H phi_i|H phi_j>, O_ij = <phi_i|O|phi_j>,
// by full enumeration or from samples of Pi(sigma) = sum_i |phi_i(sigma)|^2. The
// observable estimator is symmetrised: (phi_i* (O phi_j) + (O phi_i)* phi_j) / (2 Pi).
inline SubspaceMatrices estimate_matrices(std::size_t n_sites, const std::vector<LogAmplitudeFn>& basis,
                                          const SparsePauliOperator& hamiltonian,
                                          const std::map<std::string, SparsePauliOperator>& observables,
                                          const EstimatorOptions& options, std::uint64_t stream = 0) {
  if (basis.empty()) throw InvalidArgument("subspace needs at least one basis state");
  if (hamiltonian.site_count() != n_sites) throw InvalidArgument("Hamiltonian size differs from the basis");
  for (const auto& [name, op] : observables) {
    if (op.site_count() != n_sites) throw InvalidArgument("observable '" + name + "' has the wrong site count");
  }
  const auto m = static_cast<Eigen::Index>(basis.size());
  const auto ops = detail::operator_list(observables);
  SubspaceMatrices out;
  out.mode = options.mode;

  if (options.mode == EstimatorMode::exact) {
    const auto configs = enumerate_configs(n_sites, options.enumeration_cap);
    Eigen::MatrixXcd log_table(static_cast<Eigen::Index>(configs.size()), m);
    parallel_for(configs.size(), [&](std::size_t r) {
      for (Eigen::Index i = 0; i < m; ++i) log_table(static_cast<Eigen::Index>(r), i) = basis[i](configs[r]);
    });
    const auto table = build_connection_table(hamiltonian, options.enumeration_cap);
    const ExactBasis eb = make_exact_basis(log_table, table);
    const double k = eb.phi.squaredNorm();
    if (!(k > 0)) throw NumericalError("mixture distribution vanishes identically");
    out.S = hermitize(eb.phi.adjoint() * eb.phi / k);
    out.H = hermitize(eb.phi.adjoint() * eb.h_phi / k);
    out.H2 = hermitize(eb.h_phi.adjoint() * eb.h_phi / k);
    for (const auto& [name, op] : ops) {
      const Eigen::MatrixXcd o_phi = apply_table(build_connection_table(*op, options.enumeration_cap), eb.phi);
      Eigen::MatrixXcd o = eb.phi.adjoint() * o_phi / k;
      out.observables[name] = op->is_hermitian() ? hermitize(o) : o;
    }
    out.samples = configs.size();
    return out;
  }

  const auto samples = sample_mixture(n_sites, basis, options.chains, stream);
  const auto n = static_cast<double>(samples.configs.size());
  detail::MomentAccumulator s_acc(m), h_acc(m), h2_acc(m);
  std::vector<Eigen::MatrixXcd> o_sum(ops.size(), Eigen::MatrixXcd::Zero(m, m));

  auto scaled = [&](SpinConfiguration s, double half_log_pi) {
    Eigen::VectorXcd v(m);
    for (Eigen::Index i = 0; i < m; ++i) v(i) = safe_exp(basis[i](s) - half_log_pi);
    return v;
  };
  for (const auto sigma : samples.configs) {
    const double half_log_pi = 0.5 * mixture_log_density(basis, sigma);
    if (!std::isfinite(half_log_pi)) throw NumericalError("sampled configuration with zero mixture weight");
    const Eigen::VectorXcd v = scaled(sigma, half_log_pi);  // phi_i / sqrt(Pi)
    Eigen::VectorXcd hv = Eigen::VectorXcd::Zero(m);        // (H phi_i) / sqrt(Pi)
    std::map<std::uint64_t, Eigen::VectorXcd> neighbour_cache;
    auto neighbour = [&](SpinConfiguration s) -> const Eigen::VectorXcd& {
      auto it = neighbour_cache.find(s.bits());
      if (it == neighbour_cache.end()) it = neighbour_cache.emplace(s.bits(), s == sigma ? v : scaled(s, half_log_pi)).first;
      return it->second;
    };
    for (const auto& e : hamiltonian.connected(sigma)) hv += e.amplitude * neighbour(e.config);
    s_acc.add(v.conjugate() * v.transpose());
    h_acc.add(0.5 * (v.conjugate() * hv.transpose() + hv.conjugate() * v.transpose()));
    h2_acc.add(hv.conjugate() * hv.transpose());
    for (std::size_t q = 0; q < ops.size(); ++q) {
      Eigen::VectorXcd ov = Eigen::VectorXcd::Zero(m);
      for (const auto& e : ops[q].second->connected(sigma)) ov += e.amplitude * neighbour(e.config);
      o_sum[q] += 0.5 * (v.conjugate() * ov.transpose() + ov.conjugate() * v.transpose());
    }
  }
  out.S = hermitize(s_acc.mean(n));
  out.H = hermitize(h_acc.mean(n));
  out.H2 = hermitize(h2_acc.mean(n));
  out.S_se = s_acc.standard_error(n);
  out.H_se = h_acc.standard_error(n);
  out.H2_se = h2_acc.standard_error(n);
  for (std::size_t q = 0; q < ops.size(); ++q) {
    Eigen::MatrixXcd o = o_sum[q] / n;
    out.observables[ops[q].first] = ops[q].second->is_hermitian() ? hermitize(o) : o;
  }
  out.samples = samples.configs.size();
  return out;
}

// Basis of a Galerkin state: phi_0 followed by the RBMs.
inline SubspaceMatrices estimate_matrices(const GalerkinState& state, const SparsePauliOperator& hamiltonian,
                                          const std::map<std::string, SparsePauliOperator>& observables,
                                          const EstimatorOptions& options, std::uint64_t stream = 0) {
  return estimate_matrices(state.n_sites, galerkin_basis_functions(state), hamiltonian, observables, options, stream);
}

// ---------------------------------------------------------------------------
// Generalised eigenproblem H v = lambda S v on the regularised pencil.

inline constexpr double kDefaultRegularization = 1e-10;

struct Pencil {
  Eigen::VectorXd lambda;    // ascending
  Eigen::MatrixXcd modes;    // columns v_k with v_k^dag S_reg v_k = 1
  Eigen::MatrixXcd s_reg;    // S with eigenvalues clipped from below at epsilon
  Eigen::MatrixXcd s_inv;    // S_reg^-1
  double epsilon = 0.0;
  std::size_t clipped = 0;   // eigenvalues of S raised to epsilon
  double condition = 0.0;    // of S before clipping (inf if singular)
};

// epsilon = rel_eps * tr(S) / dim. Eigenvalues of S below epsilon are raised to
// epsilon; the rest of S is left untouched.
inline Pencil solve_pencil(const Eigen::MatrixXcd& s, const Eigen::MatrixXcd& h,
                           double rel_eps = kDefaultRegularization) {
  if (s.rows() != s.cols() || h.rows() != s.rows() || s.rows() == 0) {
    throw InvalidArgument("pencil matrices must be square and of equal size");
  }
  const auto dim = s.rows();
  const double trace = s.trace().real();
  if (!(trace > 0) || !std::isfinite(trace) || !s.allFinite() || !h.allFinite()) {
    throw NumericalError("overlap matrix is singular or not finite (trace " + std::to_string(trace) + ")");
  }
  Pencil p;
  p.epsilon = rel_eps * trace / static_cast<double>(dim);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitize(s));
  Eigen::VectorXd ev = es.eigenvalues();
  p.condition = ev(0) > 0 ? ev(dim - 1) / ev(0) : std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < dim; ++k) {
    if (ev(k) < p.epsilon) {
      ev(k) = p.epsilon;
      ++p.clipped;
    }
  }
  if (!(p.epsilon > 0) || !ev.allFinite()) {
    throw NumericalError("overlap matrix cannot be regularised (condition " + std::to_string(p.condition) + ")");
  }
  const Eigen::MatrixXcd& u = es.eigenvectors();
  p.s_reg = hermitize(u * ev.cast<Complex>().asDiagonal() * u.adjoint());
  const Eigen::MatrixXcd x = u * ev.cwiseInverse().cwiseSqrt().cast<Complex>().asDiagonal();
  p.s_inv = hermitize(x * x.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> hs(hermitize(x.adjoint() * hermitize(h) * x));
  if (hs.info() != Eigen::Success) throw NumericalError("pencil eigensolver failed");
  p.lambda = hs.eigenvalues();
  p.modes = x * hs.eigenvectors();
  return p;
}

inline Pencil solve_pencil(const SubspaceMatrices& m, double rel_eps = kDefaultRegularization) {
  return solve_pencil(m.S, m.H, rel_eps);
}

// c(t) = sum_k gamma_k e^{-i lambda_k t} with gamma_k = v_k (v_k^dag S c0).
struct ModeDecomposition {
  Eigen::VectorXd lambda;
  Eigen::MatrixXcd amplitudes;  // column k = gamma_k
  std::vector<std::pair<Eigen::Index, Eigen::Index>> groups;  // degenerate index ranges of lambda

  Eigen::VectorXcd coefficients(double t) const {
    Eigen::VectorXcd phases(lambda.size());
    for (Eigen::Index k = 0; k < lambda.size(); ++k) phases(k) = std::exp(-kI * (lambda(k) * t));
    return amplitudes * phases;
  }
};

inline Eigen::VectorXcd unit_initial_coefficients(Eigen::Index dim) {
  Eigen::VectorXcd c0 = Eigen::VectorXcd::Zero(dim);
  c0(0) = 1.0;
  return c0;
}

inline ModeDecomposition mode_decomposition(const Pencil& p, const Eigen::VectorXcd& c0,
                                            double degeneracy_tol = kDegeneracyTolerance) {
  if (c0.size() != p.modes.rows()) throw InvalidArgument("initial coefficient vector has the wrong size");
  ModeDecomposition out;
  out.lambda = p.lambda;
  const Eigen::VectorXcd proj = p.modes.adjoint() * (p.s_reg * c0);
  out.amplitudes = p.modes * proj.asDiagonal();
  out.groups = degenerate_groups(p.lambda, degeneracy_tol);
  return out;
}

inline ModeDecomposition mode_decomposition(const SubspaceMatrices& m, double rel_eps = kDefaultRegularization,
                                            double degeneracy_tol = kDegeneracyTolerance) {
  return mode_decomposition(solve_pencil(m, rel_eps), unit_initial_coefficients(m.dim()), degeneracy_tol);
}

// Solution of S c' = -i H c, c(0) = c0 (default e_0), at each requested time.
inline std::vector<Eigen::VectorXcd> linear_variational_coefficients(const Pencil& p, const std::vector<double>& times,
                                                                     const Eigen::VectorXcd& c0) {
  const auto modes = mode_decomposition(p, c0);
  std::vector<Eigen::VectorXcd> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(modes.coefficients(t));
  return out;
}

inline std::vector<Eigen::VectorXcd> linear_variational_coefficients(const SubspaceMatrices& m,
                                                                     const std::vector<double>& times,
                                                                     double rel_eps = kDefaultRegularization) {
  return linear_variational_coefficients(solve_pencil(m, rel_eps), times, unit_initial_coefficients(m.dim()));
}

// Time derivative of the coefficients along the linear variational flow.
inline Eigen::VectorXcd linear_variational_rate(const Pencil& p, const Eigen::MatrixXcd& h, const Eigen::VectorXcd& c) {
  return -kI * (p.s_inv * (h * c));
}

// Sigma = H2 - H S^-1 H.
inline Eigen::MatrixXcd residual_matrix(const SubspaceMatrices& m, const Pencil& p) {
  return hermitize(m.H2 - m.H * p.s_inv * m.H);
}

// (c^dag Sigma c) / (c^dag S c), clamped at zero.
inline double subspace_loss(const SubspaceMatrices& m, const Pencil& p, const Eigen::VectorXcd& c) {
  const double norm = c.dot(p.s_reg * c).real();
  if (!(norm > 0)) throw NumericalError("c^dag S c is not positive");
  return std::max(0.0, c.dot(residual_matrix(m, p) * c).real() / norm);
}

inline double subspace_loss(const SubspaceMatrices& m, const Eigen::VectorXcd& c,
                            double rel_eps = kDefaultRegularization) {
  return subspace_loss(m, solve_pencil(m, rel_eps), c);
}

// <Psi(t)|O|Psi(t)> / <Psi(t)|Psi(t)> for Psi = sum_i c_i phi_i.
inline Complex subspace_expectation(const SubspaceMatrices& m, const Eigen::MatrixXcd& op, const Eigen::VectorXcd& c) {
  const double norm = c.dot(m.S * c).real();
  if (!(norm > 0)) throw NumericalError("c^dag S c is not positive");
  return c.dot(op * c) / norm;
}

namespace detail {

// sum over degenerate groups G of g_G^dag A g_G, g_G = sum_{k in G} gamma_k.
inline Complex grouped_quadratic_form(const ModeDecomposition& modes, const Eigen::MatrixXcd& a) {
  Complex acc{};
  for (auto [first, last] : modes.groups) {
    const Eigen::VectorXcd g = modes.amplitudes.middleCols(first, last - first).rowwise().sum();
    acc += g.dot(a * g);
  }
  return acc;
}

}  // namespace detail

// t -> infinity limit of the expectation: oscillating cross terms between
// distinct frequency groups average out.
inline Complex infinite_time_expectation(const SubspaceMatrices& m, const ModeDecomposition& modes,
                                         const Eigen::MatrixXcd& op) {
  const double den = detail::grouped_quadratic_form(modes, m.S).real();
  if (!(den > 0)) throw NumericalError("vanishing infinite-time normalisation");
  return detail::grouped_quadratic_form(modes, op) / den;
}

inline Complex infinite_time_expectation(const SubspaceMatrices& m, const ModeDecomposition& modes,
                                         const std::string& observable) {
  const auto it = m.observables.find(observable);
  if (it == m.observables.end()) throw InvalidArgument("no matrix for observable '" + observable + "'");
  return infinite_time_expectation(m, modes, it->second);
}

inline double infinite_time_loss(const SubspaceMatrices& m, const Pencil& p, const ModeDecomposition& modes) {
  const double den = detail::grouped_quadratic_form(modes, m.S).real();
  if (!(den > 0)) throw NumericalError("vanishing infinite-time normalisation");
  return std::max(0.0, detail::grouped_quadratic_form(modes, residual_matrix(m, p)).real() / den);
}

// Modes read off a trained Fourier table: c_i(t) = sum_k gamma_ik e^{i omega_k t} - sum_k gamma_ik,
// i.e. frequencies -omega_k plus a static mode carrying c_0 = 1.
inline ModeDecomposition fourier_mode_decomposition(const FourierCoefficients& coeffs,
                                                    double degeneracy_tol = kDegeneracyTolerance) {
  const auto m = static_cast<Eigen::Index>(coeffs.basis_count());
  const auto nb = static_cast<Eigen::Index>(coeffs.mode_count());
  std::vector<std::pair<double, Eigen::VectorXcd>> modes;
  Eigen::VectorXcd stat = Eigen::VectorXcd::Zero(m + 1);
  stat(0) = 1.0;
  if (m > 0) stat.tail(m) = -coeffs.gamma.rowwise().sum();
  modes.emplace_back(0.0, stat);
  for (Eigen::Index k = 0; k < nb && m > 0; ++k) {
    Eigen::VectorXcd col = Eigen::VectorXcd::Zero(m + 1);
    col.tail(m) = coeffs.gamma.col(k);
    modes.emplace_back(-coeffs.omega(k), col);
  }
  std::sort(modes.begin(), modes.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  ModeDecomposition out;
  out.lambda.resize(static_cast<Eigen::Index>(modes.size()));
  out.amplitudes.resize(m + 1, static_cast<Eigen::Index>(modes.size()));
  for (std::size_t k = 0; k < modes.size(); ++k) {
    out.lambda(static_cast<Eigen::Index>(k)) = modes[k].first;
    out.amplitudes.col(static_cast<Eigen::Index>(k)) = modes[k].second;
  }
  out.groups = degenerate_groups(out.lambda, degeneracy_tol);
  return out;
}

// ---------------------------------------------------------------------------
// Error bounds from a sampled loss history L(t_j) on an equally spaced grid starting at t = 0:
//   state:      t sqrt(L_[0,t]) with L_[0,t] = (1/t) int_0^t L,
//   observable: ||O|| (2 x + x^2) with x the state bound.

struct ErrorBounds {
  std::vector<double> times;
  std::vector<double> state;
  std::vector<double> observable;
};

inline ErrorBounds error_bounds(const std::vector<double>& times, const std::vector<double>& losses,
                                double op_norm = 1.0) {
  if (times.size() != losses.size() || times.size() < 2) throw InvalidArgument("loss history needs >= 2 points");
  if (times.front() != 0.0) throw InvalidArgument("loss history must start at t = 0");
  if (op_norm < 0) throw InvalidArgument("operator norm must be nonnegative");
  for (double l : losses) {
    if (l < 0 || !std::isfinite(l)) throw InvalidArgument("loss history contains a negative or non-finite value");
  }
  const double h = times[1] - times[0];
  for (std::size_t j = 1; j < times.size(); ++j) {
    if (std::abs(times[j] - times[j - 1] - h) > 1e-9 * std::max(1.0, std::abs(times[j]))) {
      throw InvalidArgument("loss history must be equally spaced");
    }
  }
  const auto integral = cumulative_simpson(losses, h);
  ErrorBounds out{times, {}, {}};
  for (std::size_t j = 0; j < times.size(); ++j) {
    // t sqrt(L_[0,t]) = sqrt(t int_0^t L)
    const double x = std::sqrt(times[j] * std::max(0.0, integral[j]));
    out.state.push_back(x);
    out.observable.push_back(op_norm * (2.0 * x + x * x));
  }
  return out;
}

}  // namespace tnqg
