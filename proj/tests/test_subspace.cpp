#include <gtest/gtest.h>

#include <random>

#include "tnqg/subspace.hpp"

using namespace tnqg;

namespace {

GalerkinState random_state(std::size_t n, std::size_t m, std::uint64_t seed, double std = 0.3) {
  std::mt19937_64 rng(seed);
  AnsatzInit init;
  init.n_basis = m;
  init.n_modes = 3;
  init.rbm_std = std;
  init.visible_std = std;
  init.gamma_std = 0.2;
  return make_galerkin_state(n, init, rng);
}

SparsePauliOperator chain_tfi(std::size_t n, double h, bool pbc = true) {
  return tfi_hamiltonian(build_lattice(LatticeKind::chain, {n}, pbc), 1.0, h);
}

// Basis functions given by explicit vectors on the 2^N configurations.
std::vector<LogAmplitudeFn> vector_basis(const std::vector<Eigen::VectorXcd>& vs) {
  std::vector<LogAmplitudeFn> out;
  for (const auto& v : vs) out.emplace_back([v](SpinConfiguration s) { return safe_log(v(static_cast<Eigen::Index>(s.bits()))); });
  return out;
}

}  // namespace

TEST(Matrices, ComputationalBasisGivesScaledIdentity) {
  std::vector<Eigen::VectorXcd> vs;
  for (int k : {0, 5, 9}) vs.push_back(Eigen::VectorXcd::Unit(16, k));
  const auto m = estimate_matrices(4, vector_basis(vs), chain_tfi(4, 1.0), {}, {});
  EXPECT_LT((m.S - Eigen::MatrixXcd::Identity(3, 3) / 3.0).norm(), 1e-14);
}

TEST(Matrices, SingleStateRayleighQuotient) {
  const auto h = chain_tfi(5, 0.8);
  const auto state = random_state(5, 0, 1);
  Eigen::VectorXcd v = Eigen::VectorXcd::Random(32);
  const auto m = estimate_matrices(5, vector_basis({v}), h, {}, {});
  EXPECT_NEAR(m.H(0, 0).real() / m.S(0, 0).real(), expectation(v, h).real(), 1e-12);
}

TEST(Matrices, MonteCarloWithinStandardErrors) {
  const auto h = chain_tfi(6, 1.0);
  const auto state = random_state(6, 2, 2);
  const std::map<std::string, SparsePauliOperator> obs{{"mx", named_observable("mx", 6)}};
  const auto exact = estimate_matrices(state, h, obs, {});
  EstimatorOptions mc;
  mc.mode = EstimatorMode::monte_carlo;
  mc.chains.n_samples = 20000;
  mc.chains.thin = 2;
  const auto est = estimate_matrices(state, h, obs, mc, 3);
  int outside = 0;
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      outside += std::abs(est.S(i, j) - exact.S(i, j)) > 4 * est.S_se(i, j) + 1e-12;
      outside += std::abs(est.H(i, j) - exact.H(i, j)) > 4 * est.H_se(i, j) + 1e-12;
      outside += std::abs(est.H2(i, j) - exact.H2(i, j)) > 4 * est.H2_se(i, j) + 1e-12;
    }
  }
  // Autocorrelation makes the naive standard error optimistic; allow one straggler.
  EXPECT_LE(outside, 1);
  EXPECT_NEAR(std::abs(est.observables.at("mx")(0, 0) - exact.observables.at("mx")(0, 0)), 0.0, 0.02);
}

TEST(Pencil, EigenstateIsStationary) {
  const auto h = chain_tfi(4, 1.7);
  const auto spec = diagonalize(h);
  const Eigen::VectorXcd v = spec.vectors.col(2);
  const auto m = estimate_matrices(4, vector_basis({v}), h, {}, {});
  const auto cs = linear_variational_coefficients(m, {0.0, 1.3});
  EXPECT_NEAR(std::abs(cs[1](0) - std::exp(Complex(0, -spec.energies(2) * 1.3))), 0.0, 1e-12);
  EXPECT_NEAR(subspace_loss(m, cs[1]), 0.0, 1e-12);
  const auto modes = mode_decomposition(m);
  EXPECT_EQ(modes.lambda.size(), 1);
  EXPECT_NEAR(modes.lambda(0), spec.energies(2), 1e-12);
  EXPECT_NEAR(std::abs(modes.amplitudes(0, 0)), 1.0, 1e-12);
}

TEST(Pencil, InvariantSubspaceMatchesExactEvolution) {
  const auto h = chain_tfi(4, 1.2);
  const auto spec = diagonalize(h);
  // phi0 = a + b, phi1 = a - 2b for eigenvectors a, b
  const Eigen::VectorXcd a = spec.vectors.col(1), b = spec.vectors.col(7);
  const Eigen::VectorXcd phi0 = a + b, phi1 = a - 2.0 * b;
  const auto m = estimate_matrices(4, vector_basis({phi0, phi1}), h, {}, {});
  const double t = 0.9;
  const auto c = linear_variational_coefficients(m, {t})[0];
  const Eigen::VectorXcd lhs = c(0) * phi0 + c(1) * phi1;
  EXPECT_LT((lhs - evolve_dense(spec, phi0, t)).norm(), 1e-10);
}

TEST(Pencil, ConservesNormAndEnergy) {
  const auto h = chain_tfi(6, 2.0);
  const auto m = estimate_matrices(random_state(6, 4, 4), h, {}, {});
  const auto p = solve_pencil(m);
  const auto c0 = unit_initial_coefficients(m.dim());
  std::vector<double> ts;
  for (int k = 0; k <= 50; ++k) ts.push_back(k);
  const auto cs = linear_variational_coefficients(p, ts, c0);
  const double n0 = c0.dot(m.S * c0).real(), e0 = c0.dot(m.H * c0).real();
  for (const auto& c : cs) {
    EXPECT_NEAR(c.dot(m.S * c).real(), n0, 1e-10 * n0);
    EXPECT_NEAR(c.dot(m.H * c).real(), e0, 1e-10 * std::abs(e0));
  }
}

TEST(Pencil, ClipsSingularOverlap) {
  const Eigen::VectorXcd v = Eigen::VectorXcd::Random(16);
  const auto m = estimate_matrices(4, vector_basis({v, 2.0 * v}), chain_tfi(4, 1.0), {}, {});
  const auto p = solve_pencil(m);
  EXPECT_EQ(p.clipped, 1u);
  EXPECT_TRUE(p.modes.allFinite());
  Eigen::MatrixXcd bad = Eigen::MatrixXcd::Zero(2, 2);
  EXPECT_THROW(solve_pencil(bad, bad), NumericalError);
}

TEST(SubspaceLoss, MatchesTimeLocalLossOnRefinedTrajectory) {
  const std::size_t n = 6;
  const auto h = chain_tfi(n, 2.0);
  const auto state = random_state(n, 3, 5);
  const auto m = estimate_matrices(state, h, {}, {});
  const auto p = solve_pencil(m);
  LossEvaluator ev(h, QuadratureGrid(0, 1, 3), {});
  const Eigen::MatrixXcd table = ev.exact_log_table(state);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int k = 0; k < 10; ++k) {
    const double t = u(rng);
    const auto c = linear_variational_coefficients(p, {t}, unit_initial_coefficients(m.dim()))[0];
    const Eigen::VectorXcd c_dot = linear_variational_rate(p, m.H, c);
    const double direct = exact_time_local_loss(table, ev.connection_table(), c, c_dot);
    EXPECT_NEAR(subspace_loss(m, p, c), direct, 1e-10 * std::max(1.0, direct));
  }
}

TEST(SubspaceLoss, CompleteBasisVanishes) {
  std::vector<Eigen::VectorXcd> vs;
  for (int k = 0; k < 16; ++k) vs.push_back(Eigen::VectorXcd::Unit(16, k) + 0.1 * Eigen::VectorXcd::Unit(16, (k + 1) % 16));
  const auto h = chain_tfi(4, 1.0);
  const auto m = estimate_matrices(4, vector_basis(vs), h, {}, {});
  const auto cs = linear_variational_coefficients(m, {0.0, 0.7, 3.1});
  for (const auto& c : cs) EXPECT_NEAR(subspace_loss(m, c), 0.0, 1e-9);
  EXPECT_NEAR(infinite_time_loss(m, solve_pencil(m), mode_decomposition(m)), 0.0, 1e-9);
}

TEST(InfiniteTime, FullSpanMatchesDiagonalEnsemble) {
  const auto h = chain_tfi(4, 2.0);
  const auto spec = diagonalize(h);
  std::vector<Eigen::VectorXcd> vs{plus_state_vector(4)};
  for (int k = 1; k < 16; ++k) vs.push_back(Eigen::VectorXcd::Unit(16, k));
  const auto obs = std::map<std::string, SparsePauliOperator>{{"mx", named_observable("mx", 4)}};
  const auto m = estimate_matrices(4, vector_basis(vs), h, obs, {});
  const auto modes = mode_decomposition(m);
  const Complex inf = infinite_time_expectation(m, modes, "mx");
  const Complex de = diagonal_ensemble_expectation(spec, plus_state_vector(4), dense_matrix(named_observable("mx", 4)));
  EXPECT_NEAR(std::abs(inf - de), 0.0, 1e-8 * std::abs(de));
}

TEST(InfiniteTime, InvariantUnderCommonScale) {
  const auto h = chain_tfi(5, 1.4);
  const auto obs = std::map<std::string, SparsePauliOperator>{{"x0", named_observable("x0", 5)}};
  auto m = estimate_matrices(random_state(5, 2, 6), h, obs, {});
  const Complex a = infinite_time_expectation(m, mode_decomposition(m), "x0");
  m.S *= 7.5;
  m.H *= 7.5;
  m.H2 *= 7.5;
  m.observables["x0"] *= 7.5;
  const Complex b = infinite_time_expectation(m, mode_decomposition(m), "x0");
  EXPECT_NEAR(std::abs(a - b), 0.0, 1e-10);
}

TEST(InfiniteTime, EigenstateAndSeparatedModes) {
  const auto h = chain_tfi(4, 0.6);
  const auto spec = diagonalize(h);
  const auto m = estimate_matrices(4, vector_basis({spec.vectors.col(0)}), h, {}, {});
  const auto modes = mode_decomposition(m);
  EXPECT_NEAR(infinite_time_expectation(m, modes, m.H).real() / 1.0, spec.energies(0), 1e-10);
  EXPECT_NEAR(infinite_time_loss(m, solve_pencil(m), modes), 0.0, 1e-12);
  Pencil toy;
  toy.lambda = Eigen::Vector2d(-1.0, 2.0);
  toy.modes = Eigen::MatrixXcd::Identity(2, 2);
  toy.s_reg = Eigen::MatrixXcd::Identity(2, 2);
  EXPECT_EQ(mode_decomposition(toy, Eigen::Vector2cd(1.0, 1.0)).groups.size(), 2u);
}

TEST(ModeDecomposition, ReconstructsPropagatedCoefficients) {
  const auto m = estimate_matrices(random_state(5, 3, 7), chain_tfi(5, 2.0), {}, {});
  const auto p = solve_pencil(m);
  const auto modes = mode_decomposition(p, unit_initial_coefficients(4));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int k = 0; k < 20; ++k) {
    const double t = u(rng);
    // Independent propagation: matrix exponential of -i S^-1 H via the Hermitian form.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m.S);
    const Eigen::MatrixXcd sh = es.operatorInverseSqrt();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> hs(sh * m.H * sh);
    Eigen::VectorXcd ph(4);
    for (int i = 0; i < 4; ++i) ph(i) = std::exp(Complex(0, -hs.eigenvalues()(i) * t));
    const Eigen::VectorXcd ref = sh * hs.eigenvectors() * ph.asDiagonal() * hs.eigenvectors().adjoint() *
                                 es.operatorSqrt() * unit_initial_coefficients(4);
    EXPECT_LT((modes.coefficients(t) - ref).norm(), 1e-8 * ref.norm());
  }
}

TEST(ErrorBounds, ZeroLossAndKnownIntegral) {
  std::vector<double> t{0, 0.5, 1.0}, zero{0, 0, 0}, one{1, 1, 1};
  const auto z = error_bounds(t, zero);
  for (double v : z.observable) EXPECT_EQ(v, 0.0);
  const auto b = error_bounds(t, one, 2.0);
  EXPECT_NEAR(b.state[2], 1.0, 1e-14);  // t sqrt(L) with L = 1
  EXPECT_NEAR(b.observable[2], 2.0 * 3.0, 1e-14);
  EXPECT_THROW(error_bounds(t, {0, -1, 0}), InvalidArgument);
}

TEST(FourierModes, ReproduceFourierCoefficients) {
  const auto state = random_state(4, 2, 8);
  const auto modes = fourier_mode_decomposition(state.coeffs);
  for (double t : {0.0, 0.4, 2.2}) {
    EXPECT_LT((modes.coefficients(t) - coefficients(state.coeffs, t).c).norm(), 1e-12);
  }
}
