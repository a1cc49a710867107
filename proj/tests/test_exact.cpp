#include <gtest/gtest.h>

#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "tnqg/exact.hpp"

using namespace tnqg;

namespace {

SparsePauliOperator chain_tfi(std::size_t n, double h) {
  return tfi_hamiltonian(build_lattice(LatticeKind::chain, {n}, true), 1.0, h);
}

Eigen::VectorXcd random_state(Eigen::Index dim, unsigned seed) {
  std::srand(seed);
  Eigen::VectorXcd v = Eigen::VectorXcd::Random(dim);
  return v / v.norm();
}

}  // namespace

TEST(DenseSpectrum, ReconstructsHamiltonian) {
  const auto h = chain_tfi(6, 0.9);
  const auto spec = diagonalize(h);
  const Eigen::MatrixXcd d = dense_matrix(h);
  const double res = (d * spec.vectors - spec.vectors * spec.energies.cast<Complex>().asDiagonal()).cwiseAbs().maxCoeff();
  EXPECT_LE(res, 1e-10 * d.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 1; k < spec.dim(); ++k) EXPECT_LE(spec.energies(k - 1), spec.energies(k));
}

TEST(Evolution, TrivialCases) {
  const auto h = chain_tfi(4, 1.5);
  const auto spec = diagonalize(h);
  const auto psi0 = plus_state_vector(4);
  EXPECT_LT((evolve_dense(spec, psi0, 0.0) - psi0).norm(), 1e-14);
  const Eigen::VectorXcd eig = spec.vectors.col(3);
  EXPECT_NEAR(std::abs(eig.dot(evolve_dense(spec, eig, 2.7))), 1.0, 1e-12);
}

TEST(Evolution, DenseMatchesMatrixExponential) {
  const auto h = chain_tfi(5, 2.0);
  const auto psi0 = random_state(32, 3);
  const Eigen::MatrixXcd u = (Complex(0, -0.8) * dense_matrix(h)).exp();
  const auto out = evolve_exact(h, psi0, {0.8});
  EXPECT_LT((out[0] - u * psi0).norm(), 1e-11);
}

TEST(Evolution, KrylovAgreesWithDenseOnQuench) {
  const auto h = chain_tfi(10, 2.0);
  const auto psi0 = plus_state_vector(10);
  const auto mx = named_observable("mx", 10);
  std::vector<double> times{0.0, 0.3, 1.0, 0.7, 2.5};
  const auto dense = evolve_exact(h, psi0, times, Propagator::dense);
  const auto krylov = evolve_exact(h, psi0, times, Propagator::krylov);
  const Eigen::MatrixXcd hd = dense_matrix(h);
  const double e0 = psi0.dot(hd * psi0).real();
  for (std::size_t k = 0; k < times.size(); ++k) {
    EXPECT_NEAR(expectation(dense[k], mx).real(), expectation(krylov[k], mx).real(), 1e-8);
    EXPECT_NEAR(krylov[k].norm(), 1.0, 1e-10);
    EXPECT_NEAR(dense[k].dot(hd * dense[k]).real(), e0, 1e-9 * std::abs(e0));
  }
}

TEST(Expectation, ProductStates) {
  const auto x2 = named_observable("x2", 5);
  EXPECT_NEAR(expectation(plus_state_vector(5), x2).real(), 1.0, 1e-14);
  Eigen::VectorXcd up = Eigen::VectorXcd::Zero(32);
  up(31) = 1.0;
  EXPECT_NEAR(std::abs(expectation(up, x2)), 0.0, 1e-15);
  const auto psi = random_state(32, 5);
  const auto zz = SparsePauliOperator(5, {PauliTerm{0.3, {{0, Pauli::Z}, {3, Pauli::Z}}}, PauliTerm{1.1, {{2, Pauli::Y}}}});
  EXPECT_NEAR(std::abs(expectation(psi, zz) - psi.dot(dense_matrix(zz) * psi)), 0.0, 1e-13);
}

TEST(Thermal, InfiniteTemperatureAndGroundState) {
  const auto h = chain_tfi(6, 1.2);
  const auto spec = diagonalize(h);
  const Eigen::MatrixXcd x0 = dense_matrix(named_observable("x0", 6));
  EXPECT_NEAR(std::abs(thermal_expectation(spec, x0, 0.0)), 0.0, 1e-12);
  const Complex gs = spec.vectors.col(0).dot(x0 * spec.vectors.col(0));
  EXPECT_NEAR(thermal_expectation(spec, x0, 200.0).real(), gs.real(), 1e-8);
  const auto b0 = effective_beta(spec, spec.energies.mean());
  EXPECT_NEAR(b0.beta, 0.0, 1e-10);
}

TEST(Thermal, MatchesMatrixExponentialTrace) {
  const auto h = chain_tfi(8, 0.7);
  const Eigen::MatrixXcd hd = dense_matrix(h);
  const auto spec = diagonalize(hd);
  const Eigen::MatrixXcd o = dense_matrix(named_observable("mx", 8));
  const double beta = 0.37;
  const Eigen::MatrixXcd rho = (-beta * hd).exp();
  const Complex ref = (rho * o).trace() / rho.trace();
  EXPECT_NEAR(std::abs(thermal_expectation(spec, o, beta) - ref), 0.0, 1e-10);
}

TEST(Thermal, EffectiveBetaIsMonotone) {
  const auto spec = diagonalize(chain_tfi(6, 2.0));
  const auto a = effective_beta(spec, -8.0);
  const auto b = effective_beta(spec, -6.0);
  EXPECT_GT(a.beta, b.beta);
  EXPECT_LE(a.residual, 1e-8 * spec.energies.cwiseAbs().maxCoeff());
  const auto capped = effective_beta(spec, spec.energies(0) + 0.01 * spec.width(), -1.0, 1.0);
  EXPECT_TRUE(capped.capped);
  EXPECT_THROW(effective_beta(spec, spec.energies(0) - 1.0), InvalidArgument);
}

TEST(DiagonalEnsemble, TrivialCases) {
  const auto h = chain_tfi(6, 1.3);
  const Eigen::MatrixXcd hd = dense_matrix(h);
  const auto spec = diagonalize(hd);
  const auto psi0 = plus_state_vector(6);
  EXPECT_NEAR(diagonal_ensemble_expectation(spec, psi0, hd).real(), psi0.dot(hd * psi0).real(), 1e-11);
  const Eigen::MatrixXcd o = dense_matrix(named_observable("x1", 6));
  const Eigen::VectorXcd eig = spec.vectors.col(5);
  EXPECT_NEAR(std::abs(diagonal_ensemble_expectation(spec, eig, o) - eig.dot(o * eig)), 0.0, 1e-12);
}

TEST(DiagonalEnsemble, MatchesLongTimeAverage) {
  // Open chain: no momentum degeneracies among the quench-reachable states.
  const auto h = tfi_hamiltonian(build_lattice(LatticeKind::chain, {8}, false), 1.0, 1.1);
  const auto spec = diagonalize(h);
  const auto psi0 = plus_state_vector(8);
  const Eigen::MatrixXcd o = dense_matrix(named_observable("mx", 8));
  const Complex de = diagonal_ensemble_expectation(spec, psi0, o);
  // Mean over uniform random times in [0, 2000]
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 2000.0);
  double avg = 0.0;
  const int n = 4000;
  for (int k = 0; k < n; ++k) {
    const auto psi = evolve_dense(spec, psi0, u(rng));
    avg += psi.dot(o * psi).real() / n;
  }
  EXPECT_NEAR(avg, de.real(), 1e-3 * std::abs(de.real()) + 2e-3);
}

TEST(CgBasis, PartitionOfUnityAndZeroInitialError) {
  const auto h = chain_tfi(8, 2.0);
  const auto spec = diagonalize(h);
  const auto psi0 = plus_state_vector(8);
  const auto basis = cg_basis(spec, psi0, cg_mu_grid(spec, 8));
  Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(psi0.size());
  for (const auto& w : basis.states) sum += w;
  EXPECT_LT((sum - psi0).norm(), 1e-12);
  EXPECT_LT(cg_error(spec, psi0, basis, 0.0), 1e-12);
  // A grid point on an eigenvalue is shifted, not divided by zero.
  auto mu = cg_mu_grid(spec, 4);
  mu[1] = spec.energies(10);
  const auto shifted = cg_basis(spec, psi0, mu);
  EXPECT_NE(shifted.mu[1], spec.energies(10));
  for (const auto& w : shifted.states) EXPECT_TRUE(w.allFinite());
}

TEST(CgBasis, FullGridIsComplete) {
  const auto lat = build_lattice(LatticeKind::chain, {5}, true);
  const auto spec = diagonalize(tfi_hamiltonian(lat, 1.0, 2.0));
  const auto psi0 = plus_state_vector(5);
  const auto basis = cg_basis(spec, psi0, cg_mu_grid(spec, 32));
  EXPECT_EQ(basis.states.size(), 32u);
  for (double t : {0.5, 2.0, 7.0}) EXPECT_LT(cg_error(spec, psi0, basis, t), 1e-8) << t;
}
