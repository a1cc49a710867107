#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tnqg/common.hpp"

namespace tnqg {

// z-basis configuration of up to 64 spins. Bit i set <=> sigma^z_i = +1.
class SpinConfiguration {
 public:
  static constexpr std::size_t kMaxSites = 64;

  constexpr SpinConfiguration() = default;
  constexpr explicit SpinConfiguration(std::uint64_t bits) : bits_(bits) {}

  static SpinConfiguration from_spins(std::span<const int> spins) {
    if (spins.size() > kMaxSites) throw InvalidArgument("SpinConfiguration supports at most 64 sites");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < spins.size(); ++i) {
      if (spins[i] != 1 && spins[i] != -1) throw InvalidArgument("spin values must be +1 or -1");
      if (spins[i] == 1) bits |= std::uint64_t{1} << i;
    }
    return SpinConfiguration(bits);
  }

  std::vector<int> to_spins(std::size_t n_sites) const {
    std::vector<int> out(n_sites);
    for (std::size_t i = 0; i < n_sites; ++i) out[i] = spin(i);
    return out;
  }

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr int spin(std::size_t site) const { return ((bits_ >> site) & 1U) ? 1 : -1; }
  constexpr SpinConfiguration flipped(std::size_t site) const {
    return SpinConfiguration(bits_ ^ (std::uint64_t{1} << site));
  }

  constexpr auto operator<=>(const SpinConfiguration&) const = default;

 private:
  std::uint64_t bits_ = 0;
};

enum class LatticeKind { chain, square };

inline std::string to_string(LatticeKind kind) { return kind == LatticeKind::chain ? "chain" : "square"; }

inline LatticeKind parse_lattice_kind(const std::string& name) {
  if (name == "chain") return LatticeKind::chain;
  if (name == "square") return LatticeKind::square;
  throw InvalidArgument("unknown lattice kind '" + name + "' (expected chain or square)");
}

using Bond = std::pair<std::size_t, std::size_t>;

// Nearest-neighbour geometry. Sites on square lattices are indexed row-major;
// every bond is stored with the smaller site first and appears once.
class Lattice {
 public:
  Lattice(LatticeKind kind, std::vector<std::size_t> dims, bool pbc)
      : kind_(kind), dims_(std::move(dims)), pbc_(pbc) {
    const std::size_t expected_rank = kind_ == LatticeKind::chain ? 1 : 2;
    if (dims_.size() != expected_rank) {
      throw InvalidArgument(to_string(kind_) + " lattice needs " + std::to_string(expected_rank) +
                            " dimension(s), got " + std::to_string(dims_.size()));
    }
    for (auto d : dims_) {
      if (d < 2) throw InvalidArgument("every lattice dimension must be >= 2");
    }
    if (pbc_ && std::any_of(dims_.begin(), dims_.end(), [](auto d) { return d == 2; })) {
      throw InvalidArgument(
          "periodic boundary with extent 2 would duplicate bonds; use open boundaries or extent >= 3");
    }
    n_sites_ = 1;
    for (auto d : dims_) n_sites_ *= d;
    if (n_sites_ > SpinConfiguration::kMaxSites) throw InvalidArgument("lattices are limited to 64 sites");
    build_bonds();
  }

  LatticeKind kind() const { return kind_; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  bool pbc() const { return pbc_; }
  std::size_t size() const { return n_sites_; }
  const std::vector<Bond>& bonds() const { return bonds_; }

 private:
  void add_bond(std::size_t i, std::size_t j) {
    bonds_.emplace_back(std::min(i, j), std::max(i, j));
  }

  void build_bonds() {
    if (kind_ == LatticeKind::chain) {
      const auto n = dims_[0];
      for (std::size_t i = 0; i + 1 < n; ++i) add_bond(i, i + 1);
      if (pbc_) add_bond(n - 1, 0);
    } else {
      const auto rows = dims_[0];
      const auto cols = dims_[1];
      auto index = [cols](std::size_t r, std::size_t c) { return r * cols + c; };
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          if (c + 1 < cols) add_bond(index(r, c), index(r, c + 1));
          else if (pbc_) add_bond(index(r, c), index(r, 0));
          if (r + 1 < rows) add_bond(index(r, c), index(r + 1, c));
          else if (pbc_) add_bond(index(r, c), index(0, c));
        }
      }
    }
    std::sort(bonds_.begin(), bonds_.end());
  }

  LatticeKind kind_;
  std::vector<std::size_t> dims_;
  bool pbc_;
  std::size_t n_sites_ = 0;
  std::vector<Bond> bonds_;
};

inline Lattice build_lattice(LatticeKind kind, std::vector<std::size_t> dims, bool pbc) {
  return Lattice(kind, std::move(dims), pbc);
}

inline constexpr std::size_t kDefaultEnumerationCap = 20;

inline void check_enumeration_cap(std::size_t n_sites, std::size_t cap = kDefaultEnumerationCap) {
  if (n_sites > cap || n_sites >= SpinConfiguration::kMaxSites) {
    throw CapacityError("full enumeration of " + std::to_string(n_sites) + " spins exceeds the cap of " +
                        std::to_string(cap) + "; use the Monte Carlo estimator instead");
  }
}

// All 2^N configurations in ascending bit order.
inline std::vector<SpinConfiguration> enumerate_configs(std::size_t n_sites,
                                                        std::size_t cap = kDefaultEnumerationCap) {
  check_enumeration_cap(n_sites, cap);
  const std::uint64_t count = std::uint64_t{1} << n_sites;
  std::vector<SpinConfiguration> out;
  out.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) out.emplace_back(k);
  return out;
}

}  // namespace tnqg
