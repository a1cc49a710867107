#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tnqg/common.hpp"
#include "tnqg/lattice.hpp"

namespace tnqg {

enum class Pauli : char { X = 'X', Y = 'Y', Z = 'Z' };

struct PauliFactor {
  std::size_t site;
  Pauli pauli;
};

struct PauliTerm {
  Complex weight;
  std::vector<PauliFactor> factors;
};

// One nonzero matrix element <sigma|op|sigma'> of a row of the operator.
struct ConnectedElement {
  SpinConfiguration config;
  Complex amplitude;
};

// Sum of Pauli strings with complex weights acting on `site_count` spins.
class SparsePauliOperator {
 public:
  SparsePauliOperator(std::size_t site_count, std::vector<PauliTerm> terms)
      : site_count_(site_count), terms_(std::move(terms)) {
    if (site_count_ == 0 || site_count_ > SpinConfiguration::kMaxSites) {
      throw InvalidArgument("operator site count must be in [1, 64]");
    }
    for (auto& term : terms_) {
      std::sort(term.factors.begin(), term.factors.end(),
                [](const PauliFactor& a, const PauliFactor& b) { return a.site < b.site; });
      for (std::size_t k = 0; k < term.factors.size(); ++k) {
        if (term.factors[k].site >= site_count_) throw InvalidArgument("Pauli factor site out of range");
        if (k > 0 && term.factors[k].site == term.factors[k - 1].site) {
          throw InvalidArgument("a Pauli term may act on each site at most once");
        }
      }
    }
    hermitian_ = compute_hermitian();
  }

  std::size_t site_count() const { return site_count_; }
  const std::vector<PauliTerm>& terms() const { return terms_; }
  bool is_hermitian() const { return hermitian_; }

  // Upper bound on the operator 2-norm (exact for sums of commuting single-site terms
  // with equal weights, e.g. the site-averaged magnetisation).
  double norm_bound() const {
    double s = 0.0;
    for (const auto& t : terms_) s += std::abs(t.weight);
    return s;
  }

  // Row <sigma| op as a list of (sigma', <sigma|op|sigma'>). Entries with equal sigma'
  // are merged and exact zeros dropped; the diagonal entry, if any, comes first.
  std::vector<ConnectedElement> connected(SpinConfiguration sigma) const {
    std::vector<ConnectedElement> out;
    out.reserve(terms_.size());
    out.push_back({sigma, Complex{}});
    for (const auto& term : terms_) {
      if (term.weight == Complex{}) continue;
      Complex amp = term.weight;
      std::uint64_t flip = 0;
      for (const auto& f : term.factors) {
        const int s = sigma.spin(f.site);
        switch (f.pauli) {
          case Pauli::Z: amp *= static_cast<double>(s); break;
          case Pauli::X: flip |= std::uint64_t{1} << f.site; break;
          case Pauli::Y:
            amp *= Complex{0.0, -static_cast<double>(s)};
            flip |= std::uint64_t{1} << f.site;
            break;
        }
      }
      const SpinConfiguration target(sigma.bits() ^ flip);
      auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.config == target; });
      if (it == out.end()) out.push_back({target, amp});
      else it->amplitude += amp;
    }
    std::erase_if(out, [](const ConnectedElement& e) { return e.amplitude == Complex{}; });
    return out;
  }

 private:
  bool compute_hermitian() const {
    // Pauli strings are Hermitian, so the sum is Hermitian iff merged weights are real.
    std::vector<std::pair<std::string, Complex>> merged;
    double scale = 0.0;
    for (const auto& t : terms_) {
      std::string key;
      for (const auto& f : t.factors) key += std::to_string(f.site) + static_cast<char>(f.pauli) + ',';
      auto it = std::find_if(merged.begin(), merged.end(), [&](const auto& m) { return m.first == key; });
      if (it == merged.end()) merged.emplace_back(key, t.weight);
      else it->second += t.weight;
      scale = std::max(scale, std::abs(t.weight));
    }
    return std::all_of(merged.begin(), merged.end(),
                       [&](const auto& m) { return std::abs(m.second.imag()) <= 1e-14 * std::max(scale, 1.0); });
  }

  std::size_t site_count_;
  std::vector<PauliTerm> terms_;
  bool hermitian_ = false;
};

// H = -J sum_<ij> Z_i Z_j - h sum_i X_i
inline SparsePauliOperator tfi_hamiltonian(const Lattice& lattice, double coupling, double field) {
  std::vector<PauliTerm> terms;
  terms.reserve(lattice.bonds().size() + lattice.size());
  for (const auto& [i, j] : lattice.bonds()) {
    terms.push_back({Complex{-coupling, 0.0}, {{i, Pauli::Z}, {j, Pauli::Z}}});
  }
  for (std::size_t i = 0; i < lattice.size(); ++i) terms.push_back({Complex{-field, 0.0}, {{i, Pauli::X}}});
  return SparsePauliOperator(lattice.size(), std::move(terms));
}

inline SparsePauliOperator single_site_operator(std::size_t n_sites, std::size_t site, Pauli p) {
  return SparsePauliOperator(n_sites, {{Complex{1.0, 0.0}, {{site, p}}}});
}

// (1/N) sum_i P_i
inline SparsePauliOperator site_averaged_operator(std::size_t n_sites, Pauli p) {
  std::vector<PauliTerm> terms;
  for (std::size_t i = 0; i < n_sites; ++i) {
    terms.push_back({Complex{1.0 / static_cast<double>(n_sites), 0.0}, {{i, p}}});
  }
  return SparsePauliOperator(n_sites, std::move(terms));
}

// Named observables: "mx", "my", "mz" (site averages) and "x3", "z0", ... (single sites).
inline SparsePauliOperator named_observable(const std::string& name, std::size_t n_sites) {
  auto pauli_of = [&](char c) {
    switch (c) {
      case 'x': return Pauli::X;
      case 'y': return Pauli::Y;
      case 'z': return Pauli::Z;
      default: throw InvalidArgument("unknown observable '" + name + "'");
    }
  };
  if (name.size() == 2 && name[0] == 'm') return site_averaged_operator(n_sites, pauli_of(name[1]));
  if (name.size() >= 2 && std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(c); })) {
    const auto site = static_cast<std::size_t>(std::stoul(name.substr(1)));
    if (site >= n_sites) throw InvalidArgument("observable site out of range: " + name);
    return single_site_operator(n_sites, site, pauli_of(name[0]));
  }
  throw InvalidArgument("unknown observable '" + name + "'");
}

inline constexpr std::size_t kDenseMatrixCap = 14;

inline Eigen::MatrixXcd dense_matrix(const SparsePauliOperator& op, std::size_t cap = kDenseMatrixCap) {
  if (op.site_count() > cap) {
    throw CapacityError("dense matrix of " + std::to_string(op.site_count()) + " spins exceeds the cap of " +
                        std::to_string(cap));
  }
  const auto dim = static_cast<Eigen::Index>(std::uint64_t{1} << op.site_count());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (Eigen::Index row = 0; row < dim; ++row) {
    for (const auto& e : op.connected(SpinConfiguration(static_cast<std::uint64_t>(row)))) {
      m(row, static_cast<Eigen::Index>(e.config.bits())) += e.amplitude;
    }
  }
  return m;
}

// Compressed rows of an operator over the full enumerated Hilbert space.
struct ConnectionTable {
  std::vector<std::size_t> offsets;
  std::vector<std::uint64_t> columns;
  std::vector<Complex> values;

  std::size_t rows() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

inline ConnectionTable build_connection_table(const SparsePauliOperator& op,
                                              std::size_t cap = kDefaultEnumerationCap) {
  check_enumeration_cap(op.site_count(), cap);
  const std::uint64_t dim = std::uint64_t{1} << op.site_count();
  ConnectionTable table;
  table.offsets.reserve(dim + 1);
  table.offsets.push_back(0);
  for (std::uint64_t row = 0; row < dim; ++row) {
    for (const auto& e : op.connected(SpinConfiguration(row))) {
      table.columns.push_back(e.config.bits());
      table.values.push_back(e.amplitude);
    }
    table.offsets.push_back(table.columns.size());
  }
  return table;
}

// out = op * in over the enumerated basis; columns are applied independently.
inline Eigen::MatrixXcd apply_table(const ConnectionTable& table, const Eigen::MatrixXcd& in) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(in.rows(), in.cols());
  for (std::size_t row = 0; row < table.rows(); ++row) {
    for (std::size_t k = table.offsets[row]; k < table.offsets[row + 1]; ++k) {
      out.row(static_cast<Eigen::Index>(row)) +=
          table.values[k] * in.row(static_cast<Eigen::Index>(table.columns[k]));
    }
  }
  return out;
}

// out = op^T * in, i.e. out(sigma') = sum_sigma in(sigma) <sigma|op|sigma'>.
inline Eigen::MatrixXcd apply_table_transpose(const ConnectionTable& table, const Eigen::MatrixXcd& in) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(in.rows(), in.cols());
  for (std::size_t row = 0; row < table.rows(); ++row) {
    for (std::size_t k = table.offsets[row]; k < table.offsets[row + 1]; ++k) {
      out.row(static_cast<Eigen::Index>(table.columns[k])) +=
          table.values[k] * in.row(static_cast<Eigen::Index>(row));
    }
  }
  return out;
}

// Matrix-free product op * psi, for state vectors too large to tabulate connections.
inline Eigen::VectorXcd apply_operator(const SparsePauliOperator& op, const Eigen::VectorXcd& psi) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi.size());
  for (Eigen::Index row = 0; row < psi.size(); ++row) {
    Complex acc{};
    for (const auto& e : op.connected(SpinConfiguration(static_cast<std::uint64_t>(row)))) {
      acc += e.amplitude * psi(static_cast<Eigen::Index>(e.config.bits()));
    }
    out(row) = acc;
  }
  return out;
}

}  // namespace tnqg
