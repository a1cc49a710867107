#pragma once

#include <random>
#include <span>

#include <Eigen/Dense>

#include "tnqg/common.hpp"
#include "tnqg/lattice.hpp"

namespace tnqg {

// Flattening order of RbmParameters::flatten(): a, then b, then W row-major.
inline constexpr const char* kRbmFlatteningTag = "rbm-a-b-W-rowmajor-v1";

// Complex RBM: log phi(s) = sum_i a_i s_i + sum_j log(2 cosh(b_j + sum_i W_ji s_i)).
struct RbmParameters {
  Eigen::VectorXcd a;  // visible biases, N
  Eigen::VectorXcd b;  // hidden biases, alpha*N
  Eigen::MatrixXcd W;  // alpha*N x N
  std::size_t alpha = 1;

  static RbmParameters zeros(std::size_t n_visible, std::size_t alpha) {
    if (n_visible == 0 || alpha == 0) throw InvalidArgument("RBM needs n_visible >= 1 and alpha >= 1");
    const auto n = static_cast<Eigen::Index>(n_visible);
    const auto m = static_cast<Eigen::Index>(n_visible * alpha);
    return {Eigen::VectorXcd::Zero(n), Eigen::VectorXcd::Zero(m), Eigen::MatrixXcd::Zero(m, n), alpha};
  }

  // Independent complex Gaussian entries: real and imaginary parts each ~ N(0, std^2).
  template <class Rng>
  static RbmParameters random(std::size_t n_visible, std::size_t alpha, double std_weights, double std_visible,
                              Rng& rng) {
    auto p = zeros(n_visible, alpha);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto draw = [&](double s) { return Complex{s * gauss(rng), s * gauss(rng)}; };
    for (Eigen::Index i = 0; i < p.a.size(); ++i) p.a(i) = draw(std_visible);
    for (Eigen::Index j = 0; j < p.b.size(); ++j) p.b(j) = draw(std_weights);
    for (Eigen::Index j = 0; j < p.W.rows(); ++j) {
      for (Eigen::Index i = 0; i < p.W.cols(); ++i) p.W(j, i) = draw(std_weights);
    }
    return p;
  }

  std::size_t n_visible() const { return static_cast<std::size_t>(a.size()); }
  std::size_t n_hidden() const { return static_cast<std::size_t>(b.size()); }
  std::size_t parameter_count() const { return n_visible() + n_hidden() + n_hidden() * n_visible(); }

  Eigen::VectorXcd flatten() const {
    Eigen::VectorXcd out(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) out(k++) = a(i);
    for (Eigen::Index j = 0; j < b.size(); ++j) out(k++) = b(j);
    for (Eigen::Index j = 0; j < W.rows(); ++j) {
      for (Eigen::Index i = 0; i < W.cols(); ++i) out(k++) = W(j, i);
    }
    return out;
  }

  void unflatten(std::span<const Complex> flat) {
    if (flat.size() != parameter_count()) throw InvalidArgument("RBM parameter vector has wrong length");
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = flat[k++];
    for (Eigen::Index j = 0; j < b.size(); ++j) b(j) = flat[k++];
    for (Eigen::Index j = 0; j < W.rows(); ++j) {
      for (Eigen::Index i = 0; i < W.cols(); ++i) W(j, i) = flat[k++];
    }
  }

  bool has_nan() const { return a.hasNaN() || b.hasNaN() || W.hasNaN(); }
};

// log(2 cosh z), accurate for |Re z| far beyond the overflow point of cosh.
inline Complex log_2cosh(Complex z) {
  if (z.real() < 0) z = -z;
  return z + std::log(1.0 + std::exp(-2.0 * z));
}

inline Eigen::VectorXd spins_vector(SpinConfiguration sigma, std::size_t n_sites) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(n_sites));
  for (std::size_t i = 0; i < n_sites; ++i) s(static_cast<Eigen::Index>(i)) = sigma.spin(i);
  return s;
}

// Rows are the +-1 spin vectors of `configs`.
inline Eigen::MatrixXd spins_matrix(std::span<const SpinConfiguration> configs, std::size_t n_sites) {
  Eigen::MatrixXd s(static_cast<Eigen::Index>(configs.size()), static_cast<Eigen::Index>(n_sites));
  for (std::size_t r = 0; r < configs.size(); ++r) {
    for (std::size_t i = 0; i < n_sites; ++i) {
      s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = configs[r].spin(i);
    }
  }
  return s;
}

inline Complex rbm_log_amplitude(const RbmParameters& p, SpinConfiguration sigma) {
  if (p.has_nan()) throw NumericalError("RBM parameters contain NaN");
  const Eigen::VectorXcd s = spins_vector(sigma, p.n_visible()).cast<Complex>();
  const Eigen::VectorXcd theta = p.b + p.W * s;
  Complex out = p.a.cwiseProduct(s).sum();
  for (Eigen::Index j = 0; j < theta.size(); ++j) out += log_2cosh(theta(j));
  return out;
}

// d log phi / d p_k for every parameter, in flattening order:
// d/da_i = s_i, d/db_j = tanh(theta_j), d/dW_ji = s_i tanh(theta_j).
inline Eigen::VectorXcd rbm_log_derivatives(const RbmParameters& p, SpinConfiguration sigma) {
  const Eigen::VectorXd s = spins_vector(sigma, p.n_visible());
  const Eigen::VectorXcd theta = p.b + p.W * s.cast<Complex>();
  Eigen::VectorXcd out(static_cast<Eigen::Index>(p.parameter_count()));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) out(k++) = s(i);
  const Eigen::VectorXcd t = theta.array().tanh();
  for (Eigen::Index j = 0; j < t.size(); ++j) out(k++) = t(j);
  for (Eigen::Index j = 0; j < t.size(); ++j) {
    for (Eigen::Index i = 0; i < s.size(); ++i) out(k++) = s(i) * t(j);
  }
  return out;
}

// Batched evaluation over the rows of a spin matrix. Optionally returns tanh(theta)
// (rows = configurations) for gradient contractions.
inline Eigen::VectorXcd rbm_log_amplitudes(const RbmParameters& p, const Eigen::MatrixXd& spins,
                                           Eigen::MatrixXcd* tanh_theta = nullptr) {
  if (p.has_nan()) throw NumericalError("RBM parameters contain NaN");
  const Eigen::MatrixXcd s = spins.cast<Complex>();
  Eigen::MatrixXcd theta = s * p.W.transpose();
  theta.rowwise() += p.b.transpose();
  Eigen::VectorXcd out = s * p.a;
  for (Eigen::Index r = 0; r < theta.rows(); ++r) {
    Complex acc{};
    for (Eigen::Index j = 0; j < theta.cols(); ++j) acc += log_2cosh(theta(r, j));
    out(r) += acc;
  }
  if (tanh_theta != nullptr) *tanh_theta = theta.array().tanh();
  return out;
}

// Contracts per-configuration weights g(s) with the log-derivatives:
// returns sum_s g(s) d log phi(s) / d p_k in flattening order.
inline Eigen::VectorXcd rbm_contract_derivatives(const RbmParameters& p, const Eigen::MatrixXd& spins,
                                                 const Eigen::MatrixXcd& tanh_theta, const Eigen::VectorXcd& g) {
  const Eigen::MatrixXcd s = spins.cast<Complex>();
  Eigen::VectorXcd out(static_cast<Eigen::Index>(p.parameter_count()));
  const auto n = static_cast<Eigen::Index>(p.n_visible());
  const auto m = static_cast<Eigen::Index>(p.n_hidden());
  out.segment(0, n) = s.transpose() * g;
  out.segment(n, m) = tanh_theta.transpose() * g;
  const Eigen::MatrixXcd gw = tanh_theta.transpose() * g.asDiagonal() * s;  // m x n
  for (Eigen::Index j = 0; j < m; ++j) out.segment(n + m + j * n, n) = gw.row(j).transpose();
  return out;
}

}  // namespace tnqg
