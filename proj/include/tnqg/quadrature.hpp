#pragma once

#include <span>
#include <vector>

#include "tnqg/common.hpp"

namespace tnqg {

// Composite Simpson 1/3 rule on an odd number of equally spaced points.
class QuadratureGrid {
 public:
  QuadratureGrid(double t_start, double t_end, std::size_t n_points)
      : t_start_(t_start), t_end_(t_end) {
    if (!(t_end > t_start)) throw InvalidArgument("quadrature grid needs t_end > t_start");
    if (n_points < 3 || n_points % 2 == 0) throw InvalidArgument("Simpson grid needs an odd point count >= 3");
    const double h = (t_end - t_start) / static_cast<double>(n_points - 1);
    points_.resize(n_points);
    weights_.resize(n_points);
    for (std::size_t j = 0; j < n_points; ++j) {
      points_[j] = j + 1 == n_points ? t_end : t_start + h * static_cast<double>(j);
      const double pattern = (j == 0 || j + 1 == n_points) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
      weights_[j] = pattern * h / 3.0;
    }
  }

  double t_start() const { return t_start_; }
  double t_end() const { return t_end_; }
  double length() const { return t_end_ - t_start_; }
  std::size_t size() const { return points_.size(); }
  double spacing() const { return length() / static_cast<double>(size() - 1); }
  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }

  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < size(); ++j) acc += weights_[j] * f(points_[j]);
    return acc;
  }

  double integrate_values(std::span<const double> values) const {
    if (values.size() != size()) throw InvalidArgument("value count differs from grid size");
    double acc = 0.0;
    for (std::size_t j = 0; j < size(); ++j) acc += weights_[j] * values[j];
    return acc;
  }

 private:
  double t_start_;
  double t_end_;
  std::vector<double> points_;
  std::vector<double> weights_;
};

// Running integral int_{x_0}^{x_j} f on an equally spaced grid with spacing h, for every j.
// Even panels use Simpson's rule; the trailing half panel at odd j uses the
// three-point formula (5 f_{j-1} + 8 f_j - f_{j+1}) h / 12 (or the trapezoid at the end).
inline std::vector<double> cumulative_simpson(std::span<const double> values, double h) {
  std::vector<double> out(values.size(), 0.0);
  for (std::size_t j = 2; j < values.size(); j += 2) {
    out[j] = out[j - 2] + h / 3.0 * (values[j - 2] + 4.0 * values[j - 1] + values[j]);
  }
  for (std::size_t j = 1; j < values.size(); j += 2) {
    const double tail = j + 1 < values.size()
                            ? h / 12.0 * (5.0 * values[j - 1] + 8.0 * values[j] - values[j + 1])
                            : 0.5 * h * (values[j - 1] + values[j]);
    out[j] = out[j - 1] + tail;
  }
  return out;
}

}  // namespace tnqg
