#include <gtest/gtest.h>

#include <random>

#include "tnqg/galerkin.hpp"
#include "tnqg/rbm.hpp"

using namespace tnqg;

namespace {

RbmParameters random_rbm(std::size_t n, std::size_t alpha, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return RbmParameters::random(n, alpha, 0.3, 0.2, rng);
}

}  // namespace

TEST(Rbm, LogAmplitudeMatchesDirectProduct) {
  const auto p = random_rbm(5, 2, 1);
  for (std::uint64_t bits : {0ULL, 7ULL, 19ULL, 31ULL}) {
    const SpinConfiguration s(bits);
    const Eigen::VectorXd v = spins_vector(s, 5);
    Complex amp = std::exp((p.a.transpose() * v.cast<Complex>())(0));
    for (Eigen::Index j = 0; j < p.b.size(); ++j) amp *= 2.0 * std::cosh(p.b(j) + (p.W.row(j) * v.cast<Complex>())(0));
    EXPECT_NEAR(std::abs(std::exp(rbm_log_amplitude(p, s)) - amp), 0.0, 1e-12 * std::abs(amp));
  }
}

TEST(Rbm, LogTwoCoshIsStableForLargeArguments) {
  const Complex z{800.0, 0.3};
  const Complex expected = z + std::log(1.0 + std::exp(-2.0 * z));
  EXPECT_NEAR(std::abs(log_2cosh(z) - expected), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(log_2cosh(-z) - expected), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(log_2cosh(Complex{0.0, 0.0}) - std::log(2.0)), 0.0, 1e-15);
}

TEST(Rbm, DerivativesMatchFiniteDifferences) {
  auto p = random_rbm(4, 1, 2);
  const SpinConfiguration s(0b1011);
  const Eigen::VectorXcd d = rbm_log_derivatives(p, s);
  const Eigen::VectorXcd x0 = p.flatten();
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < x0.size(); ++k) {
    Eigen::VectorXcd x = x0;
    x(k) += h;
    p.unflatten(std::span<const Complex>(x.data(), static_cast<std::size_t>(x.size())));
    const Complex up = rbm_log_amplitude(p, s);
    x(k) -= 2 * h;
    p.unflatten(std::span<const Complex>(x.data(), static_cast<std::size_t>(x.size())));
    const Complex down = rbm_log_amplitude(p, s);
    EXPECT_NEAR(std::abs((up - down) / (2 * h) - d(k)), 0.0, 1e-8) << k;
  }
}

TEST(Rbm, BatchedContractionMatchesPerConfiguration) {
  const auto p = random_rbm(4, 2, 3);
  const auto configs = enumerate_configs(4);
  const Eigen::MatrixXd spins = spins_matrix(configs, 4);
  Eigen::MatrixXcd tanh_theta;
  const Eigen::VectorXcd logs = rbm_log_amplitudes(p, spins, &tanh_theta);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Eigen::VectorXcd w(16);
  for (auto& z : w) z = {g(rng), g(rng)};
  Eigen::VectorXcd direct = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(p.parameter_count()));
  for (std::size_t r = 0; r < configs.size(); ++r) {
    EXPECT_NEAR(std::abs(logs(static_cast<Eigen::Index>(r)) - rbm_log_amplitude(p, configs[r])), 0.0, 1e-12);
    direct += w(static_cast<Eigen::Index>(r)) * rbm_log_derivatives(p, configs[r]);
  }
  EXPECT_NEAR((rbm_contract_derivatives(p, spins, tanh_theta, w) - direct).norm(), 0.0, 1e-11);
}

TEST(Rbm, FlattenRoundTrip) {
  auto p = random_rbm(3, 2, 5);
  const Eigen::VectorXcd flat = p.flatten();
  EXPECT_EQ(static_cast<std::size_t>(flat.size()), 3u + 6u + 18u);
  auto q = RbmParameters::zeros(3, 2);
  q.unflatten(std::span<const Complex>(flat.data(), static_cast<std::size_t>(flat.size())));
  EXPECT_EQ((q.W - p.W).norm(), 0.0);
  EXPECT_THROW(q.unflatten(std::span<const Complex>(flat.data(), 4)), InvalidArgument);
}

TEST(Galerkin, CoefficientsStartAtUnitVector) {
  FourierCoefficients f;
  f.gamma = Eigen::MatrixXcd::Random(3, 5);
  f.omega = init_frequencies(-2.0, 2.0, 5);
  const auto cv = coefficients(f, 0.0);
  EXPECT_EQ(cv.c(0), Complex(1.0, 0.0));
  EXPECT_NEAR(cv.c.tail(3).norm(), 0.0, 1e-15);
  // c_dot is the derivative of c.
  const double t = 0.41, h = 1e-6;
  const Eigen::VectorXcd fd = (coefficients(f, t + h).c - coefficients(f, t - h).c) / (2 * h);
  EXPECT_NEAR((fd - coefficients(f, t).c_dot).norm(), 0.0, 1e-8);
  EXPECT_THROW(coefficients(f, -0.1), InvalidArgument);
}

TEST(Galerkin, FrequenciesSpanTheInterval) {
  const auto w = init_frequencies(-3.0, 5.0, 9);
  EXPECT_DOUBLE_EQ(w(0), -3.0);
  EXPECT_DOUBLE_EQ(w(8), 5.0);
  EXPECT_DOUBLE_EQ(w(4), 1.0);
  EXPECT_THROW(init_frequencies(1.0, 1.0, 4), InvalidArgument);
}

TEST(Galerkin, AmplitudeIsTheCoefficientSum) {
  std::mt19937_64 rng(6);
  AnsatzInit init;
  init.n_basis = 2;
  init.n_modes = 3;
  init.rbm_std = 0.2;
  init.gamma_std = 0.5;
  const auto s = make_galerkin_state(4, init, rng);
  const double t = 0.7;
  const auto cv = coefficients(s.coeffs, t);
  const SpinConfiguration sigma(0b0110);
  Complex psi = cv.c(0);  // phi_0 = 1 for |+>
  for (std::size_t j = 0; j < 2; ++j) {
    psi += cv.c(static_cast<Eigen::Index>(j + 1)) *
           std::exp(rbm_log_amplitude(s.basis[j], sigma) + s.basis_log_offset(j));
  }
  EXPECT_NEAR(std::abs(std::exp(galerkin_log_amplitude(s, sigma, t)) - psi), 0.0, 1e-12);
}

TEST(Galerkin, FrozenPhiZeroEvaluatesTheParentWindow) {
  std::mt19937_64 rng(7);
  AnsatzInit init;
  init.n_basis = 2;
  init.n_modes = 4;
  init.rbm_std = 0.2;
  init.gamma_std = 0.4;
  auto parent = std::make_shared<const GalerkinState>(make_galerkin_state(3, init, rng));
  auto child = make_galerkin_state(3, init, rng);
  child.phi0 = FrozenState::frozen(parent, 0.25);
  EXPECT_EQ(child.phi0.depth(), 1u);
  for (std::uint64_t b = 0; b < 8; ++b) {
    const SpinConfiguration s(b);
    EXPECT_NEAR(std::abs(child.phi0.log_amplitude(s) - galerkin_log_amplitude(*parent, s, 0.25)), 0.0, 1e-14);
    // At t = 0 the child equals its phi_0.
    EXPECT_NEAR(std::abs(galerkin_log_amplitude(child, s, 0.0) - child.phi0.log_amplitude(s)), 0.0, 1e-12);
  }
  EXPECT_THROW(FrozenState::frozen(nullptr, 0.1), InvalidArgument);
}

TEST(Galerkin, RealParameterRoundTripRespectsFlags) {
  std::mt19937_64 rng(8);
  AnsatzInit init;
  init.n_basis = 2;
  init.n_modes = 3;
  auto s = make_galerkin_state(3, init, rng);
  const auto full = parameter_layout(s).n_real;
  s.train_omega = false;
  EXPECT_EQ(parameter_layout(s).n_real, full - 3);
  s.frozen_basis[1] = true;
  EXPECT_EQ(parameter_layout(s).n_real, full - 3 - 2 * s.basis[1].parameter_count());
  Eigen::VectorXd x = get_real_parameters(s);
  x.setLinSpaced(0.0, 1.0);
  set_real_parameters(s, x);
  EXPECT_EQ((get_real_parameters(s) - x).norm(), 0.0);
}
