#include <gtest/gtest.h>

#include <random>

#include "tnqg/loss.hpp"

using namespace tnqg;

namespace {

GalerkinState random_state(std::size_t n, std::size_t m, std::size_t nb, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AnsatzInit init;
  init.n_basis = m;
  init.n_modes = nb;
  init.rbm_std = 0.2;
  init.visible_std = 0.1;
  init.gamma_std = 0.3;
  init.e_min = -3.0;
  init.e_max = 3.0;
  return make_galerkin_state(n, init, rng);
}

Eigen::VectorXd central_difference(GalerkinState state, const SparsePauliOperator& h, const QuadratureGrid& grid,
                                   double step) {
  EstimatorOptions opts;
  LossEvaluator ev(h, grid, opts);
  const Eigen::VectorXd x0 = get_real_parameters(state);
  Eigen::VectorXd g(x0.size());
  for (Eigen::Index k = 0; k < x0.size(); ++k) {
    Eigen::VectorXd x = x0;
    x(k) += step;
    set_real_parameters(state, x);
    const double up = ev.evaluate(state, false).loss;
    x(k) -= 2 * step;
    set_real_parameters(state, x);
    const double down = ev.evaluate(state, false).loss;
    g(k) = (up - down) / (2 * step);
  }
  return g;
}

}  // namespace

TEST(LocalLoss, PlusStateIsStationaryWithoutCoupling) {
  const auto lat = build_lattice(LatticeKind::chain, {5}, true);
  const auto h = tfi_hamiltonian(lat, 0.0, 1.3);
  auto state = random_state(5, 2, 4, 1);
  state.coeffs.gamma.setZero();
  EstimatorOptions opts;
  EXPECT_NEAR(time_local_loss(state, h, 0.4, opts), 0.0, 1e-24);
  const auto l = local_loss_estimator(state, h, SpinConfiguration(0b10110), 0.4);
  ASSERT_TRUE(l.has_value());
  EXPECT_NEAR(std::abs(l->e_loc - Complex(-1.3 * 5, 0)), 0.0, 1e-12);
}

TEST(LocalLoss, ExactLossMatchesDirectSum) {
  const auto lat = build_lattice(LatticeKind::chain, {4}, true);
  const auto h = tfi_hamiltonian(lat, 1.0, 0.8);
  const auto state = random_state(4, 2, 3, 2);
  const double t = 0.37;
  // Direct: sum_sigma |Psi|^2 |L_loc - <L_loc>|^2 / Z via the single-configuration estimator.
  const auto configs = enumerate_configs(4);
  std::vector<double> p;
  std::vector<Complex> l;
  for (auto s : configs) {
    const Complex lp = galerkin_log_amplitude(state, s, t);
    p.push_back(std::exp(2 * lp.real()));
    l.push_back(local_loss_estimator(state, h, s, t)->l_loc);
  }
  double z = 0;
  Complex mean{};
  for (std::size_t k = 0; k < p.size(); ++k) z += p[k];
  for (std::size_t k = 0; k < p.size(); ++k) mean += p[k] / z * l[k];
  double var = 0;
  for (std::size_t k = 0; k < p.size(); ++k) var += p[k] / z * std::norm(l[k] - mean);
  EXPECT_NEAR(time_local_loss(state, h, t, {}), var, 1e-12 * var);
}

TEST(LossGradient, MatchesCentralDifferences) {
  const auto lat = build_lattice(LatticeKind::chain, {4}, true);
  const auto h = tfi_hamiltonian(lat, 1.0, 1.0);
  const QuadratureGrid grid(0.0, 0.1, 9);
  const auto state = random_state(4, 2, 4, 3);
  const auto rep = global_loss_gradient(state, h, grid, {});
  const Eigen::VectorXd fd = central_difference(state, h, grid, 1e-5);
  ASSERT_EQ(rep.gradient.size(), fd.size());
  EXPECT_LT((rep.gradient - fd).norm() / fd.norm(), 1e-6);
}

TEST(LossGradient, FrozenBasisAndWindowedInitialState) {
  const auto lat = build_lattice(LatticeKind::chain, {4}, false);
  const auto h = tfi_hamiltonian(lat, 1.0, 2.0);
  auto parent = std::make_shared<const GalerkinState>(random_state(4, 2, 3, 4));
  auto state = random_state(4, 3, 3, 5);
  state.phi0 = FrozenState::frozen(parent, 0.25);
  state.frozen_basis = {false, true, false};
  const QuadratureGrid grid(0.0, 0.2, 5);
  const auto rep = global_loss_gradient(state, h, grid, {});
  const Eigen::VectorXd fd = central_difference(state, h, grid, 1e-5);
  EXPECT_LT((rep.gradient - fd).norm() / fd.norm(), 1e-6);
}

TEST(LossGradient, MonteCarloAgreesWithExactOnAverage) {
  const auto lat = build_lattice(LatticeKind::chain, {4}, true);
  const auto h = tfi_hamiltonian(lat, 1.0, 1.0);
  const QuadratureGrid grid(0.0, 0.2, 3);
  const auto state = random_state(4, 1, 2, 6);
  const auto exact = global_loss_gradient(state, h, grid, {});
  EstimatorOptions mc;
  mc.mode = EstimatorMode::monte_carlo;
  mc.chains.n_samples = 4000;
  mc.chains.burn_in = 50;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(exact.gradient.size());
  double loss = 0;
  const int reps = 10;
  for (int r = 0; r < reps; ++r) {
    const auto rep = global_loss_gradient(state, h, grid, mc, static_cast<std::uint64_t>(r));
    mean += rep.gradient / reps;
    loss += rep.loss / reps;
    EXPECT_EQ(rep.discarded, 0u);
  }
  EXPECT_NEAR(loss, exact.loss, 0.05 * exact.loss);
  EXPECT_LT((mean - exact.gradient).norm() / exact.gradient.norm(), 0.1);
}

TEST(LossGradient, RejectsStateWithoutTrainableParameters) {
  const auto lat = build_lattice(LatticeKind::chain, {3}, false);
  auto state = random_state(3, 1, 2, 7);
  state.frozen_basis = {true};
  state.train_gamma = false;
  state.train_omega = false;
  EXPECT_THROW(global_loss_gradient(state, tfi_hamiltonian(lat, 1, 1), QuadratureGrid(0, 1, 3), {}), InvalidArgument);
}

TEST(GalerkinExpectation, ExactAndSampledAgree) {
  const auto state = random_state(5, 2, 3, 8);
  const auto op = named_observable("mx", 5);
  const Complex exact = galerkin_expectation(state, op, 0.3, {});
  EXPECT_NEAR(exact.imag(), 0.0, 1e-12);
  EstimatorOptions mc;
  mc.mode = EstimatorMode::monte_carlo;
  mc.chains.n_samples = 20000;
  EXPECT_NEAR(galerkin_expectation(state, op, 0.3, mc).real(), exact.real(), 0.03);
}
