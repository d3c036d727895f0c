#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace plumedial {

// Weights of the two hat basis functions active at a query point.
struct SplineBasis {
  int i0 = 0;
  int i1 = 0;
  double b0 = 1.0;
  double b1 = 0.0;
};

// Linear spline with equally spaced knots on [0, length]; evaluation clamps
// outside the domain (constant extrapolation).
template <std::size_t N>
class LinearSpline {
 public:
  LinearSpline() = default;
  LinearSpline(const std::array<double, N>& knots, double length)
      : knots_(knots), length_(length) {}

  double value(double s) const {
    const SplineBasis b = basis(s);
    return b.b0 * knots_[b.i0] + b.b1 * knots_[b.i1];
  }

  SplineBasis basis(double s) const {
    static_assert(N >= 2);
    const double h = length_ / static_cast<double>(N - 1);
    if (s <= 0.0) return {0, 0, 1.0, 0.0};
    if (s >= length_) return {static_cast<int>(N - 1), static_cast<int>(N - 1), 1.0, 0.0};
    int i = static_cast<int>(s / h);
    if (i > static_cast<int>(N) - 2) i = static_cast<int>(N) - 2;
    const double t = s / h - i;
    return {i, i + 1, 1.0 - t, t};
  }

  const std::array<double, N>& knots() const { return knots_; }
  std::array<double, N>& knots() { return knots_; }
  double length() const { return length_; }

 private:
  std::array<double, N> knots_{};
  double length_ = 1.0;
};

// Piecewise-constant vector of time: segments [t_i, t_{i+1}) carry value_i,
// the last value extends to +infinity.
template <typename T>
class PiecewiseConstant {
 public:
  PiecewiseConstant() = default;
  explicit PiecewiseConstant(T constant) : times_{0.0}, values_{constant} {}
  PiecewiseConstant(std::vector<double> times, std::vector<T> values)
      : times_(std::move(times)), values_(std::move(values)) {}

  T value(double t) const {
    std::size_t i = segment(t);
    return values_[i];
  }

  // Integral of value(s) ds over [0, t].
  T integral(double t) const {
    T acc{};
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const double lo = times_[i];
      const double hi = (i + 1 < times_.size()) ? times_[i + 1] : t;
      if (t <= lo) break;
      const double width = std::min(t, hi) - lo;
      if (width > 0.0) acc += values_[i] * width;
    }
    return acc;
  }

  const std::vector<T>& values() const { return values_; }

 private:
  std::size_t segment(double t) const {
    std::size_t i = 0;
    while (i + 1 < times_.size() && t >= times_[i + 1]) ++i;
    return i;
  }

  std::vector<double> times_{0.0};
  std::vector<T> values_{T{}};
};

// Piecewise-linear scalar of time given by (t, v) knots; clamped outside.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  explicit PiecewiseLinear(double constant) : ts_{0.0}, vs_{constant} {}
  PiecewiseLinear(std::vector<double> ts, std::vector<double> vs)
      : ts_(std::move(ts)), vs_(std::move(vs)) {}

  double value(double t) const {
    if (vs_.size() == 1 || t <= ts_.front()) return vs_.front();
    if (t >= ts_.back()) return vs_.back();
    std::size_t i = 0;
    while (t >= ts_[i + 1]) ++i;
    const double w = (t - ts_[i]) / (ts_[i + 1] - ts_[i]);
    return (1.0 - w) * vs_[i] + w * vs_[i + 1];
  }

  bool nondecreasing() const {
    for (std::size_t i = 1; i < vs_.size(); ++i)
      if (vs_[i] < vs_[i - 1]) return false;
    return true;
  }

  const std::vector<double>& values() const { return vs_; }

 private:
  std::vector<double> ts_{0.0};
  std::vector<double> vs_{0.0};
};

}  // namespace plumedial
