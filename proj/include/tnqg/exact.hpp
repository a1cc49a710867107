#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tnqg/common.hpp"
#include "tnqg/lattice.hpp"
#include "tnqg/pauli_operator.hpp"

namespace tnqg {

struct DenseSpectrum {
  Eigen::VectorXd energies;  // ascending
  Eigen::MatrixXcd vectors;  // columns

  Eigen::Index dim() const { return energies.size(); }
  double width() const { return energies(dim() - 1) - energies(0); }
};

inline DenseSpectrum diagonalize(const Eigen::MatrixXcd& h) {
  if (h.rows() != h.cols() || h.rows() == 0) throw InvalidArgument("diagonalize needs a nonempty square matrix");
  DenseSpectrum out;
  if (h.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.real());
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
    out.energies = es.eigenvalues();
    out.vectors = es.eigenvectors().cast<Complex>();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
    out.energies = es.eigenvalues();
    out.vectors = es.eigenvectors();
  }
  return out;
}

inline DenseSpectrum diagonalize(const SparsePauliOperator& h, std::size_t cap = kDenseMatrixCap) {
  if (!h.is_hermitian()) throw InvalidArgument("diagonalize needs a Hermitian operator");
  return diagonalize(dense_matrix(h, cap));
}

inline constexpr std::size_t kSpectralIntervalDenseCap = 12;

// [E_min, E_max] from dense diagonalisation for small N, else the norm bound [-B, B].
inline std::pair<double, double> spectral_interval(const SparsePauliOperator& h) {
  if (h.site_count() <= kSpectralIntervalDenseCap) {
    const auto spec = diagonalize(h);
    return {spec.energies(0), spec.energies(spec.energies.size() - 1)};
  }
  return {-h.norm_bound(), h.norm_bound()};
}

// |+>^N, normalised.
inline Eigen::VectorXcd plus_state_vector(std::size_t n_sites) {
  check_enumeration_cap(n_sites);
  const auto dim = Eigen::Index{1} << n_sites;
  return Eigen::VectorXcd::Constant(dim, Complex{1.0 / std::sqrt(static_cast<double>(dim)), 0.0});
}

inline Complex expectation(const Eigen::VectorXcd& psi, const SparsePauliOperator& op) {
  const double norm = psi.squaredNorm();
  if (!(norm > 0)) throw InvalidArgument("expectation of a zero vector");
  return psi.dot(apply_operator(op, psi)) / norm;
}

// sqrt(2 - 2|<a|b>|) for the normalised vectors: the distance after the optimal global phase.
inline double phase_aligned_distance(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  const double overlap = std::abs(a.dot(b)) / (a.norm() * b.norm());
  return std::sqrt(std::max(0.0, 2.0 - 2.0 * std::min(1.0, overlap)));
}

inline Eigen::VectorXcd evolve_dense(const DenseSpectrum& spec, const Eigen::VectorXcd& psi0, double t) {
  Eigen::VectorXcd coeff = spec.vectors.adjoint() * psi0;
  for (Eigen::Index k = 0; k < coeff.size(); ++k) coeff(k) *= std::exp(-kI * (spec.energies(k) * t));
  return spec.vectors * coeff;
}

// Short-iterate Lanczos propagator for e^{-iHt} psi. Each substep's Krylov
// error estimate is kept below `tol`; the step shrinks when it is not.
class KrylovPropagator {
 public:
  static constexpr std::size_t kMaxSites = 20;
  static constexpr std::size_t kTableSites = 16;

  explicit KrylovPropagator(const SparsePauliOperator& h, double tol = 1e-10, std::size_t krylov_dim = 30)
      : h_(h), tol_(tol), m_(krylov_dim) {
    if (!h.is_hermitian()) throw InvalidArgument("Krylov propagator needs a Hermitian operator");
    check_enumeration_cap(h.site_count(), kMaxSites);
    if (h.site_count() <= kTableSites) table_ = build_connection_table(h, kTableSites);
  }

  Eigen::VectorXcd apply_h(const Eigen::VectorXcd& v) const {
    return table_.rows() > 0 ? Eigen::VectorXcd(apply_table(table_, v)) : apply_operator(h_, v);
  }

  Eigen::VectorXcd evolve(Eigen::VectorXcd psi, double t) {
    double done = 0.0;
    double dt = t - done;
    if (step_ > 0) dt = std::min(dt, step_);
    while (done < t) {
      dt = std::min(dt, t - done);
      Eigen::VectorXcd next;
      if (try_step(psi, dt, next)) {
        psi = std::move(next);
        done += dt;
        step_ = dt;
        dt *= 1.5;
      } else {
        dt *= 0.5;
        if (dt < 1e-12 * std::max(1.0, t)) throw NumericalError("Krylov step size underflow");
      }
    }
    return psi;
  }

 private:
  bool try_step(const Eigen::VectorXcd& psi, double dt, Eigen::VectorXcd& out) const {
    const double beta0 = psi.norm();
    if (beta0 == 0.0) {
      out = psi;
      return true;
    }
    const auto dim = static_cast<std::size_t>(psi.size());
    const std::size_t m = std::min(m_, dim);
    std::vector<Eigen::VectorXcd> q{psi / beta0};
    std::vector<double> alpha, beta;
    double beta_last = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      Eigen::VectorXcd w = apply_h(q[j]);
      const double a = q[j].dot(w).real();
      w -= a * q[j];
      if (j > 0) w -= beta[j - 1] * q[j - 1];
      // full reorthogonalisation keeps the small problem faithful
      for (const auto& qi : q) w -= qi.dot(w) * qi;
      alpha.push_back(a);
      const double b = w.norm();
      beta_last = b;
      if (j + 1 == m || b < 1e-14 * beta0) break;
      beta.push_back(b);
      q.push_back(w / b);
    }
    const auto k = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      tri(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < k) tri(i, i + 1) = tri(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const Complex phase = std::exp(-kI * (es.eigenvalues()(i) * dt));
      y += phase * es.eigenvectors()(0, i) * es.eigenvectors().col(i).cast<Complex>();
    }
    const bool exhausted = static_cast<std::size_t>(k) < m || beta_last < 1e-14 * beta0;
    const double err = exhausted ? 0.0 : beta_last * std::abs(y(k - 1)) * dt;
    if (err > tol_) return false;
    out = Eigen::VectorXcd::Zero(psi.size());
    for (Eigen::Index i = 0; i < k; ++i) out += y(i) * q[static_cast<std::size_t>(i)];
    out *= beta0;
    return true;
  }

  SparsePauliOperator h_;
  ConnectionTable table_;
  double tol_;
  std::size_t m_;
  double step_ = 0.0;
};

enum class Propagator { dense, krylov };

// psi(t) for every requested time (any order). The dense path needs N <= 14.
inline std::vector<Eigen::VectorXcd> evolve_exact(const SparsePauliOperator& h, const Eigen::VectorXcd& psi0,
                                                  const std::vector<double>& times,
                                                  Propagator method = Propagator::dense) {
  if (psi0.size() != (Eigen::Index{1} << h.site_count())) throw InvalidArgument("state dimension mismatch");
  std::vector<Eigen::VectorXcd> out(times.size());
  if (method == Propagator::dense) {
    const auto spec = diagonalize(h);
    for (std::size_t k = 0; k < times.size(); ++k) out[k] = evolve_dense(spec, psi0, times[k]);
    return out;
  }
  std::vector<std::size_t> order(times.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return times[a] < times[b]; });
  KrylovPropagator prop(h);
  Eigen::VectorXcd psi = psi0;
  double now = 0.0;
  for (auto k : order) {
    if (times[k] < 0) throw InvalidArgument("negative time");
    psi = prop.evolve(psi, times[k] - now);
    now = times[k];
    out[k] = psi;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ensembles.

inline constexpr double kDegeneracyTolerance = 1e-8;

// Index ranges [first, last) of eigenvalues closer than tol * width to their neighbour.
inline std::vector<std::pair<Eigen::Index, Eigen::Index>> degenerate_groups(const Eigen::VectorXd& sorted,
                                                                            double rel_tol = kDegeneracyTolerance) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> groups;
  if (sorted.size() == 0) return groups;
  const double width = sorted(sorted.size() - 1) - sorted(0);
  const double tol = rel_tol * (width > 0 ? width : 1.0);
  Eigen::Index start = 0;
  for (Eigen::Index k = 1; k <= sorted.size(); ++k) {
    if (k == sorted.size() || sorted(k) - sorted(k - 1) >= tol) {
      groups.emplace_back(start, k);
      start = k;
    }
  }
  return groups;
}

inline double log_partition(const Eigen::VectorXd& energies, double beta) {
  std::vector<double> x(static_cast<std::size_t>(energies.size()));
  for (Eigen::Index k = 0; k < energies.size(); ++k) x[static_cast<std::size_t>(k)] = -beta * energies(k);
  return log_sum_exp_real(x);
}

inline Eigen::VectorXd boltzmann_weights(const Eigen::VectorXd& energies, double beta) {
  const double lz = log_partition(energies, beta);
  return (-beta * energies.array() - lz).exp();
}

inline double thermal_energy(const DenseSpectrum& spec, double beta) {
  return boltzmann_weights(spec.energies, beta).dot(spec.energies);
}

struct EffectiveBeta {
  double beta = 0.0;
  double residual = 0.0;  // |<H>_beta - E0|
  bool capped = false;    // E0 lies beyond the searched range
};

// Solves <H>_beta = e0 by bisection on the monotone map beta -> <H>_beta.
inline EffectiveBeta effective_beta(const DenseSpectrum& spec, double e0, double beta_min = -50.0,
                                    double beta_max = 50.0) {
  if (!(beta_min < beta_max)) throw InvalidArgument("effective_beta needs beta_min < beta_max");
  if (e0 <= spec.energies(0) || e0 >= spec.energies(spec.dim() - 1)) {
    throw InvalidArgument("energy outside the open spectral interval");
  }
  EffectiveBeta out;
  const double e_hi = thermal_energy(spec, beta_min);
  const double e_lo = thermal_energy(spec, beta_max);
  if (e0 >= e_hi || e0 <= e_lo) {
    out.capped = true;
    out.beta = e0 >= e_hi ? beta_min : beta_max;
    out.residual = std::abs(thermal_energy(spec, out.beta) - e0);
    return out;
  }
  double lo = beta_min, hi = beta_max;
  for (int it = 0; it < 200 && hi - lo > 0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (thermal_energy(spec, mid) > e0 ? lo : hi) = mid;
  }
  const double r_lo = std::abs(thermal_energy(spec, lo) - e0);
  const double r_hi = std::abs(thermal_energy(spec, hi) - e0);
  out.beta = r_lo <= r_hi ? lo : hi;
  out.residual = std::min(r_lo, r_hi);
  return out;
}

inline Complex thermal_expectation(const DenseSpectrum& spec, const Eigen::MatrixXcd& op, double beta) {
  const Eigen::VectorXd w = boltzmann_weights(spec.energies, beta);
  Complex acc{};
  for (Eigen::Index k = 0; k < spec.dim(); ++k) {
    acc += w(k) * spec.vectors.col(k).dot(op * spec.vectors.col(k));
  }
  return acc;
}

// Long-time average of <psi(t)|O|psi(t)>: sum over degenerate groups of the projected blocks.
inline Complex diagonal_ensemble_expectation(const DenseSpectrum& spec, const Eigen::VectorXcd& psi0,
                                             const Eigen::MatrixXcd& op, double rel_tol = kDegeneracyTolerance) {
  const Eigen::VectorXcd coeff = spec.vectors.adjoint() * psi0;
  Complex acc{};
  for (auto [a, b] : degenerate_groups(spec.energies, rel_tol)) {
    const Eigen::VectorXcd proj = spec.vectors.middleCols(a, b - a) * coeff.segment(a, b - a);
    acc += proj.dot(op * proj);
  }
  return acc / psi0.squaredNorm();
}

// ---------------------------------------------------------------------------
// Coarse-grained basis: w_i = W_i psi0 with W_i = (H - mu_i)^-2 / sum_j (H - mu_j)^-2.

struct CgBasis {
  std::vector<double> mu;
  std::vector<Eigen::VectorXcd> states;  // w_i
  std::vector<double> frequencies;       // Rayleigh quotients lambda_i
};

// M points from E_min to E_max inclusive. With M >= 2^N the grid is the
// spectrum itself, which makes the basis complete.
inline std::vector<double> cg_mu_grid(const DenseSpectrum& spec, std::size_t m) {
  if (m < 2) throw InvalidArgument("CG basis needs at least 2 grid points");
  if (m >= static_cast<std::size_t>(spec.dim())) {
    return {spec.energies.data(), spec.energies.data() + spec.energies.size()};
  }
  std::vector<double> mu(m);
  for (std::size_t i = 0; i < m; ++i) {
    mu[i] = spec.energies(0) + spec.width() * static_cast<double>(i) / static_cast<double>(m - 1);
  }
  return mu;
}

inline CgBasis cg_basis(const DenseSpectrum& spec, const Eigen::VectorXcd& psi0, std::vector<double> mu) {
  if (mu.empty()) throw InvalidArgument("empty mu grid");
  const double shift = 1e-12 * (spec.width() > 0 ? spec.width() : 1.0);
  for (auto& m : mu) {
    for (Eigen::Index k = 0; k < spec.dim(); ++k) {
      if (spec.energies(k) == m) {
        m += shift;
        break;
      }
    }
  }
  const Eigen::VectorXcd coeff = spec.vectors.adjoint() * psi0;
  const auto n_mu = mu.size();
  // Normalised weights per eigenvalue; scaled by the nearest distance to avoid overflow.
  Eigen::MatrixXd weight(spec.dim(), static_cast<Eigen::Index>(n_mu));
  for (Eigen::Index k = 0; k < spec.dim(); ++k) {
    double dmin = std::numeric_limits<double>::infinity();
    for (double m : mu) dmin = std::min(dmin, std::abs(spec.energies(k) - m));
    double total = 0.0;
    for (std::size_t i = 0; i < n_mu; ++i) {
      const double r = dmin / (spec.energies(k) - mu[i]);
      weight(k, static_cast<Eigen::Index>(i)) = r * r;
      total += r * r;
    }
    weight.row(k) /= total;
  }
  CgBasis out;
  out.mu = mu;
  for (std::size_t i = 0; i < n_mu; ++i) {
    const Eigen::VectorXcd c = weight.col(static_cast<Eigen::Index>(i)).cast<Complex>().cwiseProduct(coeff);
    const double norm = c.squaredNorm();
    out.states.push_back(spec.vectors * c);
    out.frequencies.push_back(norm > 0 ? c.cwiseAbs2().dot(spec.energies) / norm : mu[i]);
  }
  return out;
}

inline Eigen::VectorXcd cg_state(const CgBasis& basis, double t) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(basis.states.front().size());
  for (std::size_t i = 0; i < basis.states.size(); ++i) out += std::exp(-kI * (basis.frequencies[i] * t)) * basis.states[i];
  return out;
}

// delta(t) = || e^{-iHt} psi0 - Psi_CG(t) ||
inline double cg_error(const DenseSpectrum& spec, const Eigen::VectorXcd& psi0, const CgBasis& basis, double t) {
  return (evolve_dense(spec, psi0, t) - cg_state(basis, t)).norm();
}

}  // namespace tnqg
