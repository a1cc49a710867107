#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tnqg/common.hpp"
#include "tnqg/lattice.hpp"
#include "tnqg/rbm.hpp"

namespace tnqg {

// Time coefficients of the variational basis states:
//   c_0(t) = 1,   c_i(t) = sum_k gamma_ik (exp(i omega_k t) - 1),  i = 1..M.
struct FourierCoefficients {
  Eigen::MatrixXcd gamma;  // M x N_b
  Eigen::VectorXd omega;   // N_b angular frequencies

  std::size_t basis_count() const { return static_cast<std::size_t>(gamma.rows()); }
  std::size_t mode_count() const { return static_cast<std::size_t>(omega.size()); }
};

inline constexpr std::size_t kDefaultModes1d = 64;
inline constexpr std::size_t kDefaultModes2d = 128;

// Coefficient vector c (length M+1) and its time derivative.
struct CoefficientValues {
  Eigen::VectorXcd c;
  Eigen::VectorXcd c_dot;
};

inline CoefficientValues coefficients(const FourierCoefficients& coeffs, double t) {
  if (t < 0) throw InvalidArgument("coefficients are defined for t >= 0");
  const auto m = static_cast<Eigen::Index>(coeffs.basis_count());
  CoefficientValues out{Eigen::VectorXcd::Zero(m + 1), Eigen::VectorXcd::Zero(m + 1)};
  out.c(0) = 1.0;
  if (m == 0 || coeffs.mode_count() == 0) return out;
  Eigen::VectorXcd phase(coeffs.omega.size());
  Eigen::VectorXcd rate(coeffs.omega.size());
  for (Eigen::Index k = 0; k < phase.size(); ++k) {
    const Complex e = std::exp(kI * (coeffs.omega(k) * t));
    phase(k) = e - 1.0;
    rate(k) = kI * coeffs.omega(k) * e;
  }
  out.c.tail(m) = coeffs.gamma * phase;
  out.c_dot.tail(m) = coeffs.gamma * rate;
  return out;
}

// Evenly spaced frequencies spanning [e_min, e_max].
inline Eigen::VectorXd init_frequencies(double e_min, double e_max, std::size_t n_modes) {
  if (!(e_min < e_max)) throw InvalidArgument("init_frequencies needs e_min < e_max");
  if (n_modes < 2) throw InvalidArgument("init_frequencies needs at least 2 modes");
  Eigen::VectorXd w(static_cast<Eigen::Index>(n_modes));
  for (std::size_t k = 0; k < n_modes; ++k) {
    w(static_cast<Eigen::Index>(k)) = e_min + static_cast<double>(k) * (e_max - e_min) / static_cast<double>(n_modes - 1);
  }
  return w;
}

struct GalerkinState;

// Fixed initial state of a window: either |+>^N with unit amplitude on every
// configuration, or a completed window's state evaluated at a fixed local time.
class FrozenState {
 public:
  static FrozenState plus_state() { return FrozenState(); }
  static FrozenState frozen(std::shared_ptr<const GalerkinState> state, double t_star) {
    if (!state) throw InvalidArgument("frozen state needs a parent");
    FrozenState f;
    f.parent_ = std::move(state);
    f.t_star_ = t_star;
    return f;
  }

  bool is_plus_state() const { return parent_ == nullptr; }
  const std::shared_ptr<const GalerkinState>& parent() const { return parent_; }
  double t_star() const { return t_star_; }
  std::size_t depth() const;

  Complex log_amplitude(SpinConfiguration sigma) const;
  // Batched over configurations (rows of `spins`, in the same order as `configs`).
  Eigen::VectorXcd log_amplitudes(std::span<const SpinConfiguration> configs, const Eigen::MatrixXd& spins) const;

 private:
  FrozenState() = default;
  std::shared_ptr<const GalerkinState> parent_;
  double t_star_ = 0.0;
};

// Psi(sigma, t) = sum_{i=0}^{M} c_i(t) phi_i(sigma), phi_0 fixed, phi_{1..M} RBMs.
// The RBM basis states enter with a constant factor 2^{-n_hidden} so that a
// freshly initialised RBM has amplitudes of order one, like phi_0.
struct GalerkinState {
  std::size_t n_sites = 0;
  FrozenState phi0 = FrozenState::plus_state();
  std::vector<RbmParameters> basis;
  FourierCoefficients coeffs;
  std::vector<bool> frozen_basis;  // per RBM; frozen ones receive no gradient
  bool train_gamma = true;
  bool train_omega = true;

  std::size_t basis_count() const { return basis.size(); }

  double basis_log_offset(std::size_t j) const {
    return -static_cast<double>(basis[j].n_hidden()) * std::numbers::ln2;
  }

  void validate() const {
    if (coeffs.basis_count() != basis.size()) throw InvalidArgument("gamma rows must equal the basis count");
    if (frozen_basis.size() != basis.size()) throw InvalidArgument("frozen flags must match the basis count");
    for (const auto& b : basis) {
      if (b.n_visible() != n_sites) throw InvalidArgument("RBM visible size differs from the site count");
    }
  }
};

struct AnsatzInit {
  std::size_t n_basis = 4;        // M
  std::size_t alpha = 1;
  std::size_t n_modes = kDefaultModes1d;
  double rbm_std = 0.01;           // W and b
  double visible_std = 0.0;        // a
  double gamma_std = 0.0;
  double e_min = -1.0;
  double e_max = 1.0;
};

template <class Rng>
GalerkinState make_galerkin_state(std::size_t n_sites, const AnsatzInit& init, Rng& rng) {
  GalerkinState s;
  s.n_sites = n_sites;
  for (std::size_t j = 0; j < init.n_basis; ++j) {
    s.basis.push_back(RbmParameters::random(n_sites, init.alpha, init.rbm_std, init.visible_std, rng));
  }
  s.frozen_basis.assign(init.n_basis, false);
  s.coeffs.omega = init.n_modes >= 2 ? init_frequencies(init.e_min, init.e_max, init.n_modes)
                                     : Eigen::VectorXd::Constant(static_cast<Eigen::Index>(init.n_modes), init.e_max);
  s.coeffs.gamma = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(init.n_basis),
                                          static_cast<Eigen::Index>(init.n_modes));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < s.coeffs.gamma.rows(); ++i) {
    for (Eigen::Index k = 0; k < s.coeffs.gamma.cols(); ++k) {
      s.coeffs.gamma(i, k) = Complex{init.gamma_std * gauss(rng), init.gamma_std * gauss(rng)};
    }
  }
  return s;
}

// log phi_i(sigma) for i = 0..M.
inline Eigen::VectorXcd basis_log_amplitudes(const GalerkinState& state, SpinConfiguration sigma) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(state.basis_count() + 1));
  out(0) = state.phi0.log_amplitude(sigma);
  for (std::size_t j = 0; j < state.basis_count(); ++j) {
    out(static_cast<Eigen::Index>(j + 1)) = rbm_log_amplitude(state.basis[j], sigma) + state.basis_log_offset(j);
  }
  return out;
}

// Rows = configurations, columns = basis states 0..M.
inline Eigen::MatrixXcd basis_log_table(const GalerkinState& state, std::span<const SpinConfiguration> configs,
                                        const Eigen::MatrixXd& spins, std::vector<Eigen::MatrixXcd>* tanh_theta = nullptr) {
  Eigen::MatrixXcd table(static_cast<Eigen::Index>(configs.size()), static_cast<Eigen::Index>(state.basis_count() + 1));
  table.col(0) = state.phi0.log_amplitudes(configs, spins);
  if (tanh_theta != nullptr) tanh_theta->resize(state.basis_count());
  for (std::size_t j = 0; j < state.basis_count(); ++j) {
    table.col(static_cast<Eigen::Index>(j + 1)) =
        rbm_log_amplitudes(state.basis[j], spins, tanh_theta ? &(*tanh_theta)[j] : nullptr).array() +
        Complex{state.basis_log_offset(j), 0.0};
  }
  return table;
}

inline Complex combine_log(const Eigen::VectorXcd& c, const Eigen::VectorXcd& log_phi) {
  return log_sum_exp(std::span<const Complex>(c.data(), static_cast<std::size_t>(c.size())),
                     std::span<const Complex>(log_phi.data(), static_cast<std::size_t>(log_phi.size())));
}

inline Complex galerkin_log_amplitude(const GalerkinState& state, SpinConfiguration sigma, double t) {
  const auto cv = coefficients(state.coeffs, t);
  return combine_log(cv.c, basis_log_amplitudes(state, sigma));
}

// O_t = d/dt log Psi(sigma, t); empty when Psi(sigma, t) = 0.
inline std::optional<Complex> log_time_derivative(const GalerkinState& state, SpinConfiguration sigma, double t) {
  const auto cv = coefficients(state.coeffs, t);
  const Eigen::VectorXcd logs = basis_log_amplitudes(state, sigma);
  const Complex log_psi = combine_log(cv.c, logs);
  if (is_log_zero(log_psi)) return std::nullopt;
  Complex out{};
  for (Eigen::Index i = 0; i < logs.size(); ++i) out += cv.c_dot(i) * safe_exp(logs(i) - log_psi);
  return out;
}

inline std::size_t FrozenState::depth() const { return parent_ ? 1 + parent_->phi0.depth() : 0; }

inline Complex FrozenState::log_amplitude(SpinConfiguration sigma) const {
  if (!parent_) return {0.0, 0.0};
  return galerkin_log_amplitude(*parent_, sigma, t_star_);
}

inline Eigen::VectorXcd FrozenState::log_amplitudes(std::span<const SpinConfiguration> configs,
                                                    const Eigen::MatrixXd& spins) const {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(configs.size()));
  if (!parent_) return out;
  const Eigen::MatrixXcd table = basis_log_table(*parent_, configs, spins);
  const auto cv = coefficients(parent_->coeffs, t_star_);
  for (Eigen::Index r = 0; r < table.rows(); ++r) out(r) = combine_log(cv.c, table.row(r).transpose());
  return out;
}

// ---------------------------------------------------------------------------
// Trainable parameters.
//
// Complex parameters are ordered: every non-frozen RBM (flattening order), then
// gamma row-major (if trained), then omega (if trained; real-valued). The real
// vector interleaves (Re, Im) for complex entries and holds omega as is.

struct ParameterLayout {
  std::vector<std::size_t> rbm_index;   // basis index (0-based among RBMs) of each trained RBM
  std::vector<std::size_t> rbm_offset;  // complex offset of each trained RBM
  std::size_t gamma_offset = 0;
  std::size_t omega_offset = 0;
  std::size_t n_complex = 0;  // total entries in complex layout (omega included)
  std::size_t n_real = 0;
  bool gamma = false;
  bool omega = false;
  std::size_t gamma_count = 0;
  std::size_t omega_count = 0;

  bool is_real_entry(std::size_t k) const { return omega && k >= omega_offset; }
};

inline ParameterLayout parameter_layout(const GalerkinState& state) {
  ParameterLayout l;
  std::size_t k = 0;
  for (std::size_t j = 0; j < state.basis_count(); ++j) {
    if (state.frozen_basis[j]) continue;
    l.rbm_index.push_back(j);
    l.rbm_offset.push_back(k);
    k += state.basis[j].parameter_count();
  }
  l.gamma = state.train_gamma && state.coeffs.gamma.size() > 0;
  l.gamma_offset = k;
  if (l.gamma) {
    l.gamma_count = static_cast<std::size_t>(state.coeffs.gamma.size());
    k += l.gamma_count;
  }
  l.omega = state.train_omega && state.coeffs.omega.size() > 0 && state.coeffs.gamma.size() > 0;
  l.omega_offset = k;
  if (l.omega) {
    l.omega_count = static_cast<std::size_t>(state.coeffs.omega.size());
    k += l.omega_count;
  }
  l.n_complex = k;
  l.n_real = 2 * (k - l.omega_count) + l.omega_count;
  return l;
}

inline Eigen::VectorXd get_real_parameters(const GalerkinState& state) {
  const auto l = parameter_layout(state);
  Eigen::VectorXd out(static_cast<Eigen::Index>(l.n_real));
  Eigen::Index r = 0;
  auto push = [&](Complex z) {
    out(r++) = z.real();
    out(r++) = z.imag();
  };
  for (auto j : l.rbm_index) {
    const Eigen::VectorXcd flat = state.basis[j].flatten();
    for (Eigen::Index k = 0; k < flat.size(); ++k) push(flat(k));
  }
  if (l.gamma) {
    for (Eigen::Index i = 0; i < state.coeffs.gamma.rows(); ++i) {
      for (Eigen::Index k = 0; k < state.coeffs.gamma.cols(); ++k) push(state.coeffs.gamma(i, k));
    }
  }
  if (l.omega) {
    for (Eigen::Index k = 0; k < state.coeffs.omega.size(); ++k) out(r++) = state.coeffs.omega(k);
  }
  return out;
}

inline void set_real_parameters(GalerkinState& state, const Eigen::VectorXd& x) {
  const auto l = parameter_layout(state);
  if (static_cast<std::size_t>(x.size()) != l.n_real) throw InvalidArgument("parameter vector has wrong length");
  Eigen::Index r = 0;
  auto pull = [&]() {
    const Complex z{x(r), x(r + 1)};
    r += 2;
    return z;
  };
  for (auto j : l.rbm_index) {
    std::vector<Complex> flat(state.basis[j].parameter_count());
    for (auto& z : flat) z = pull();
    state.basis[j].unflatten(flat);
  }
  if (l.gamma) {
    for (Eigen::Index i = 0; i < state.coeffs.gamma.rows(); ++i) {
      for (Eigen::Index k = 0; k < state.coeffs.gamma.cols(); ++k) state.coeffs.gamma(i, k) = pull();
    }
  }
  if (l.omega) {
    for (Eigen::Index k = 0; k < state.coeffs.omega.size(); ++k) state.coeffs.omega(k) = x(r++);
  }
}

// Maps a holomorphic (Wirtinger) gradient dL/dtheta of a real loss onto the real
// parameter vector: d/dRe = 2 Re g, d/dIm = -2 Im g; real entries get 2 Re g.
inline Eigen::VectorXd real_gradient(const ParameterLayout& l, const Eigen::VectorXcd& g) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(l.n_real));
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < l.n_complex; ++k) {
    const Complex gk = g(static_cast<Eigen::Index>(k));
    if (l.is_real_entry(k)) {
      out(r++) = 2.0 * gk.real();
    } else {
      out(r++) = 2.0 * gk.real();
      out(r++) = -2.0 * gk.imag();
    }
  }
  return out;
}

// O_k(sigma, t) = d log Psi / d theta_k and its time derivative, in layout order.
struct ParamDerivatives {
  Eigen::VectorXcd o;
  Eigen::VectorXcd o_dot;
};

inline std::optional<ParamDerivatives> log_param_derivatives(const GalerkinState& state, SpinConfiguration sigma,
                                                             double t) {
  const auto l = parameter_layout(state);
  const auto cv = coefficients(state.coeffs, t);
  const Eigen::VectorXcd logs = basis_log_amplitudes(state, sigma);
  const Complex log_psi = combine_log(cv.c, logs);
  if (is_log_zero(log_psi)) return std::nullopt;
  Eigen::VectorXcd ratio(logs.size());  // phi_i / Psi
  for (Eigen::Index i = 0; i < logs.size(); ++i) ratio(i) = safe_exp(logs(i) - log_psi);
  const Complex o_t = (cv.c_dot.array() * ratio.array()).sum();

  ParamDerivatives out{Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(l.n_complex)),
                       Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(l.n_complex))};
  for (std::size_t r = 0; r < l.rbm_index.size(); ++r) {
    const auto j = l.rbm_index[r];
    const auto idx = static_cast<Eigen::Index>(j + 1);
    const Eigen::VectorXcd d = rbm_log_derivatives(state.basis[j], sigma);
    const auto off = static_cast<Eigen::Index>(l.rbm_offset[r]);
    out.o.segment(off, d.size()) = cv.c(idx) * ratio(idx) * d;
    out.o_dot.segment(off, d.size()) = cv.c_dot(idx) * ratio(idx) * d;
  }
  const auto& w = state.coeffs.omega;
  const auto& g = state.coeffs.gamma;
  if (l.gamma) {
    Eigen::Index k = static_cast<Eigen::Index>(l.gamma_offset);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index m = 0; m < g.cols(); ++m) {
        const Complex e = std::exp(kI * (w(m) * t));
        out.o(k) = (e - 1.0) * ratio(i + 1);
        out.o_dot(k) = kI * w(m) * e * ratio(i + 1);
        ++k;
      }
    }
  }
  if (l.omega) {
    Eigen::Index k = static_cast<Eigen::Index>(l.omega_offset);
    for (Eigen::Index m = 0; m < w.size(); ++m) {
      const Complex e = std::exp(kI * (w(m) * t));
      Complex acc{};
      for (Eigen::Index i = 0; i < g.rows(); ++i) acc += g(i, m) * ratio(i + 1);
      out.o(k) = kI * t * e * acc;
      out.o_dot(k) = e * (kI - w(m) * t) * acc;
      ++k;
    }
  }
  // d/dt (A/Psi) = A_dot/Psi - (A/Psi) O_t
  out.o_dot -= o_t * out.o;
  return out;
}

}  // namespace tnqg
