#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tnqg/common.hpp"
#include "tnqg/galerkin.hpp"
#include "tnqg/lattice.hpp"
#include "tnqg/parallel.hpp"

namespace tnqg {

struct ChainConfig {
  std::size_t n_samples = 512;
  std::size_t n_chains = 4;
  std::size_t burn_in = 100;  // sweeps; one sweep = N single-spin-flip proposals
  std::size_t thin = 1;       // sweeps between recorded samples
  std::uint64_t seed = 1234;

  void validate() const {
    if (n_chains == 0 || n_samples == 0) throw InvalidArgument("sampler needs at least one chain and one sample");
    if (n_samples % n_chains != 0) throw InvalidArgument("n_samples must be divisible by n_chains");
    if (thin == 0) throw InvalidArgument("thin must be >= 1");
  }
};

struct SampleSet {
  std::vector<SpinConfiguration> configs;
  std::size_t proposals = 0;
  std::size_t accepted = 0;

  double acceptance_rate() const {
    return proposals == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposals);
  }
};

// Independent RNG stream for (seed, chain, stream). `stream` usually encodes the
// optimisation iteration and quadrature point so serial and parallel runs agree.
inline std::mt19937_64 chain_rng(std::uint64_t seed, std::uint64_t chain, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), static_cast<std::uint32_t>(chain >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// Metropolis sampling of exp(log_density(sigma)) with single-spin-flip proposals.
// log_density returns -inf for configurations of zero weight.
inline SampleSet metropolis(std::size_t n_sites, const std::function<double(SpinConfiguration)>& log_density,
                            const ChainConfig& cfg, std::uint64_t stream = 0) {
  cfg.validate();
  const std::size_t per_chain = cfg.n_samples / cfg.n_chains;
  std::vector<SampleSet> chains(cfg.n_chains);
  parallel_for(cfg.n_chains, [&](std::size_t chain) {
    auto rng = chain_rng(cfg.seed, chain, stream);
    std::uniform_int_distribution<std::size_t> site_dist(0, n_sites - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::uint64_t mask = n_sites == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n_sites) - 1;

    SpinConfiguration sigma;
    double log_p = -std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < 10000 && !std::isfinite(log_p); ++attempt) {
      sigma = SpinConfiguration(rng() & mask);
      log_p = log_density(sigma);
    }
    if (!std::isfinite(log_p)) throw NumericalError("sampler could not find a configuration of nonzero weight");

    auto& out = chains[chain];
    out.configs.reserve(per_chain);
    auto step = [&](bool count) {
      const SpinConfiguration proposal = sigma.flipped(site_dist(rng));
      const double log_q = log_density(proposal);
      const double log_ratio = log_q - log_p;
      const bool accept = std::isfinite(log_q) && (log_ratio >= 0.0 || unif(rng) < std::exp(log_ratio));
      if (accept) {
        sigma = proposal;
        log_p = log_q;
      }
      if (count) {
        ++out.proposals;
        out.accepted += accept ? 1 : 0;
      }
    };
    for (std::size_t k = 0; k < cfg.burn_in * n_sites; ++k) step(false);
    for (std::size_t s = 0; s < per_chain; ++s) {
      for (std::size_t k = 0; k < cfg.thin * n_sites; ++k) step(true);
      out.configs.push_back(sigma);
    }
  });
  SampleSet merged;
  merged.configs.reserve(cfg.n_samples);
  for (const auto& c : chains) {
    merged.configs.insert(merged.configs.end(), c.configs.begin(), c.configs.end());
    merged.proposals += c.proposals;
    merged.accepted += c.accepted;
  }
  return merged;
}

// Samples from |Psi(sigma, t)|^2.
inline SampleSet sample_born(const GalerkinState& state, double t, const ChainConfig& cfg, std::uint64_t stream = 0) {
  const auto cv = coefficients(state.coeffs, t);
  return metropolis(
      state.n_sites,
      [&](SpinConfiguration s) {
        const Complex lp = combine_log(cv.c, basis_log_amplitudes(state, s));
        return is_log_zero(lp) ? -std::numeric_limits<double>::infinity() : 2.0 * lp.real();
      },
      cfg, stream);
}

using LogAmplitudeFn = std::function<Complex(SpinConfiguration)>;

// The M+1 basis states of a Galerkin state as standalone amplitude functions.
inline std::vector<LogAmplitudeFn> galerkin_basis_functions(const GalerkinState& state) {
  std::vector<LogAmplitudeFn> out;
  out.emplace_back([phi0 = state.phi0](SpinConfiguration s) { return phi0.log_amplitude(s); });
  for (std::size_t j = 0; j < state.basis_count(); ++j) {
    out.emplace_back([rbm = state.basis[j], offset = state.basis_log_offset(j)](SpinConfiguration s) {
      return rbm_log_amplitude(rbm, s) + offset;
    });
  }
  return out;
}

// log Pi(sigma) with Pi = sum_i |phi_i(sigma)|^2.
inline double mixture_log_density(const std::vector<LogAmplitudeFn>& basis, SpinConfiguration s) {
  std::vector<double> terms;
  terms.reserve(basis.size());
  for (const auto& f : basis) {
    const Complex l = f(s);
    terms.push_back(is_log_zero(l) ? -std::numeric_limits<double>::infinity() : 2.0 * l.real());
  }
  return log_sum_exp_real(terms);
}

// Samples from Pi(sigma) proportional to sum_i |phi_i(sigma)|^2.
inline SampleSet sample_mixture(std::size_t n_sites, const std::vector<LogAmplitudeFn>& basis, const ChainConfig& cfg,
                                std::uint64_t stream = 0) {
  if (basis.empty()) throw InvalidArgument("mixture sampling needs at least one basis state");
  return metropolis(
      n_sites, [&](SpinConfiguration s) { return mixture_log_density(basis, s); }, cfg, stream);
}

// Exact |Psi(sigma, t)|^2 / Z over all 2^N configurations (ascending bit order).
inline Eigen::VectorXd full_summation_weights(const GalerkinState& state, double t,
                                              std::size_t cap = kDefaultEnumerationCap) {
  const auto configs = enumerate_configs(state.n_sites, cap);
  const Eigen::MatrixXd spins = spins_matrix(configs, state.n_sites);
  const Eigen::MatrixXcd table = basis_log_table(state, configs, spins);
  const auto cv = coefficients(state.coeffs, t);
  Eigen::VectorXd logp(table.rows());
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    const Complex l = combine_log(cv.c, table.row(r).transpose());
    logp(r) = is_log_zero(l) ? -std::numeric_limits<double>::infinity() : 2.0 * l.real();
  }
  const double shift = logp.maxCoeff();
  if (!std::isfinite(shift)) throw NumericalError("state vanishes on every configuration");
  Eigen::VectorXd p = (logp.array() - shift).exp();
  return p / p.sum();
}

}  // namespace tnqg
