#pragma once

#include <cstddef>
#include <vector>

#include "smq/linalg.hpp"

namespace smq {

/// Uniform grid t_k = k * dt, k = 0..steps.
struct TimeGrid {
  double dt = 0.0;
  int steps = 0;

  TimeGrid() = default;
  TimeGrid(double dt, int steps);
  /// Grid covering [0, horizon] with step closest to `dt` that divides the horizon.
  static TimeGrid over(double horizon, double dt);

  std::size_t size() const { return static_cast<std::size_t>(steps) + 1; }
  double time(int k) const { return k * dt; }
  double horizon() const { return steps * dt; }
  /// Nearest grid index, clamped into range.
  int nearest(double t) const;

  bool operator==(const TimeGrid& o) const;
};

/// Sampled superoperators on a grid, all of one dimension.
class SuperoperatorFamily {
 public:
  SuperoperatorFamily() = default;
  SuperoperatorFamily(TimeGrid grid, std::vector<Superoperator> vals);
  static SuperoperatorFamily constant(const TimeGrid& grid, const Superoperator& s);
  static SuperoperatorFamily zero(const TimeGrid& grid, int d);

  template <class F>
  static SuperoperatorFamily generate(const TimeGrid& grid, F&& f) {
    std::vector<Superoperator> v;
    v.reserve(grid.size());
    for (int k = 0; k <= grid.steps; ++k) v.push_back(f(grid.time(k)));
    return SuperoperatorFamily(grid, std::move(v));
  }

  const TimeGrid& grid() const { return grid_; }
  int dim() const { return dim_; }
  std::size_t size() const { return vals_.size(); }
  const Superoperator& operator[](std::size_t k) const { return vals_[k]; }
  const std::vector<Superoperator>& values() const { return vals_; }

  /// Raw d^2 x d^2 matrices, for kernels.
  std::vector<Mat> matrices() const;
  static SuperoperatorFamily from_matrices(const TimeGrid& grid, std::vector<Mat> mats);

  /// Linear interpolation between neighbouring nodes; t is clamped into the grid.
  Superoperator interpolate(double t) const;

  SuperoperatorFamily operator+(const SuperoperatorFamily& o) const;
  SuperoperatorFamily operator-(const SuperoperatorFamily& o) const;
  SuperoperatorFamily operator*(double s) const;
  /// Pointwise composition left[k] * right[k].
  friend SuperoperatorFamily compose(const SuperoperatorFamily& left,
                                     const SuperoperatorFamily& right);

 private:
  TimeGrid grid_;
  int dim_ = 0;
  std::vector<Superoperator> vals_;
};

/// Sampled (Hermitian) operators on a grid.
class OperatorFamily {
 public:
  OperatorFamily() = default;
  OperatorFamily(TimeGrid grid, std::vector<Mat> vals);

  const TimeGrid& grid() const { return grid_; }
  int dim() const { return dim_; }
  std::size_t size() const { return vals_.size(); }
  const Mat& operator[](std::size_t k) const { return vals_[k]; }
  const std::vector<Mat>& values() const { return vals_; }
  Mat interpolate(double t) const;

 private:
  TimeGrid grid_;
  int dim_ = 0;
  std::vector<Mat> vals_;
};

/// max_k max-abs entry of a[k] - b[k]
double max_deviation(const SuperoperatorFamily& a, const SuperoperatorFamily& b);

}  // namespace smq
