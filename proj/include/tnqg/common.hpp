#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace tnqg {

using Complex = std::complex<double>;

inline constexpr Complex kI{0.0, 1.0};
inline constexpr const char* kVersion = "0.3.0";

// Base class for all engine errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid shapes, ranges, or configuration values.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Requested size exceeds an enumeration or dense-matrix cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Divergence, NaN, singular matrices and similar numerical failures.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Log-amplitudes are complex numbers log|psi| + i arg(psi). An exactly vanishing
// amplitude is represented by a real part of -infinity and a zero imaginary part.
inline Complex log_zero() { return {-std::numeric_limits<double>::infinity(), 0.0}; }

inline bool is_log_zero(Complex log_amp) { return std::isinf(log_amp.real()) && log_amp.real() < 0; }

inline bool is_finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// exp() that maps the distinguished zero to an exact 0.
inline Complex safe_exp(Complex log_amp) {
  if (is_log_zero(log_amp)) return {0.0, 0.0};
  return std::exp(log_amp);
}

inline Complex safe_log(Complex z) {
  if (z == Complex{0.0, 0.0}) return log_zero();
  return std::log(z);
}

// log(sum_i w_i exp(x_i)) with complex weights, stabilized by the largest real part.
// Returns log_zero() when every term vanishes.
inline Complex log_sum_exp(std::span<const Complex> weights, std::span<const Complex> logs) {
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logs.size(); ++i) {
    if (weights[i] == Complex{} || is_log_zero(logs[i])) continue;
    shift = std::max(shift, logs[i].real() + std::log(std::abs(weights[i])));
  }
  if (std::isinf(shift)) return log_zero();
  Complex sum{0.0, 0.0};
  for (std::size_t i = 0; i < logs.size(); ++i) {
    if (weights[i] == Complex{} || is_log_zero(logs[i])) continue;
    sum += weights[i] * std::exp(logs[i] - shift);
  }
  if (sum == Complex{}) return log_zero();
  return std::log(sum) + shift;
}

// log(sum_i exp(x_i)) for real x.
inline double log_sum_exp_real(std::span<const double> xs) {
  double shift = -std::numeric_limits<double>::infinity();
  for (double x : xs) shift = std::max(shift, x);
  if (std::isinf(shift)) return shift;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - shift);
  return std::log(sum) + shift;
}

}  // namespace tnqg
