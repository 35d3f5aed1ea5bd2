#include "smq/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smq/error.hpp"

namespace smq {

TimeGrid::TimeGrid(double dt_, int steps_) : dt(dt_), steps(steps_) {
  if (!(dt > 0.0)) throw InvalidArgument("TimeGrid: dt must be positive");
  if (steps < 2) throw InvalidArgument("TimeGrid: need at least 2 steps");
}

TimeGrid TimeGrid::over(double horizon, double dt) {
  if (!(horizon > 0.0) || !(dt > 0.0)) throw InvalidArgument("TimeGrid: horizon and dt must be positive");
  const int steps = std::max(2, static_cast<int>(std::lround(horizon / dt)));
  return TimeGrid(horizon / steps, steps);
}

int TimeGrid::nearest(double t) const {
  const auto k = static_cast<long>(std::lround(t / dt));
  return static_cast<int>(std::clamp<long>(k, 0, steps));
}

bool TimeGrid::operator==(const TimeGrid& o) const {
  return steps == o.steps && std::abs(dt - o.dt) <= 1e-14 * std::max(dt, o.dt);
}

SuperoperatorFamily::SuperoperatorFamily(TimeGrid grid, std::vector<Superoperator> vals)
    : grid_(grid), vals_(std::move(vals)) {
  if (vals_.size() != grid_.size()) {
    throw InvalidArgument("SuperoperatorFamily: expected " + std::to_string(grid_.size()) +
                          " samples, got " + std::to_string(vals_.size()));
  }
  dim_ = vals_.front().dim();
  for (const auto& v : vals_)
    if (v.dim() != dim_) throw InvalidArgument("SuperoperatorFamily: mixed dimensions");
}

SuperoperatorFamily SuperoperatorFamily::constant(const TimeGrid& grid, const Superoperator& s) {
  return SuperoperatorFamily(grid, std::vector<Superoperator>(grid.size(), s));
}

SuperoperatorFamily SuperoperatorFamily::zero(const TimeGrid& grid, int d) {
  return constant(grid, Superoperator::zero(d));
}

std::vector<Mat> SuperoperatorFamily::matrices() const {
  std::vector<Mat> out;
  out.reserve(vals_.size());
  for (const auto& v : vals_) out.push_back(v.matrix());
  return out;
}

SuperoperatorFamily SuperoperatorFamily::from_matrices(const TimeGrid& grid, std::vector<Mat> mats) {
  std::vector<Superoperator> v;
  v.reserve(mats.size());
  for (auto& m : mats) v.emplace_back(std::move(m));
  return SuperoperatorFamily(grid, std::move(v));
}

Superoperator SuperoperatorFamily::interpolate(double t) const {
  const double x = std::clamp(t / grid_.dt, 0.0, static_cast<double>(grid_.steps));
  const int k = std::min(static_cast<int>(x), grid_.steps - 1);
  const double theta = x - k;
  return Superoperator((1.0 - theta) * vals_[k].matrix() + theta * vals_[k + 1].matrix());
}

SuperoperatorFamily SuperoperatorFamily::operator+(const SuperoperatorFamily& o) const {
  if (!(grid_ == o.grid_)) throw InvalidArgument("family sum: grid mismatch");
  std::vector<Superoperator> v;
  v.reserve(size());
  for (std::size_t k = 0; k < size(); ++k) v.push_back(vals_[k] + o.vals_[k]);
  return SuperoperatorFamily(grid_, std::move(v));
}

SuperoperatorFamily SuperoperatorFamily::operator-(const SuperoperatorFamily& o) const {
  if (!(grid_ == o.grid_)) throw InvalidArgument("family difference: grid mismatch");
  std::vector<Superoperator> v;
  v.reserve(size());
  for (std::size_t k = 0; k < size(); ++k) v.push_back(vals_[k] - o.vals_[k]);
  return SuperoperatorFamily(grid_, std::move(v));
}

SuperoperatorFamily SuperoperatorFamily::operator*(double s) const {
  std::vector<Superoperator> v;
  v.reserve(size());
  for (const auto& x : vals_) v.push_back(x * s);
  return SuperoperatorFamily(grid_, std::move(v));
}

SuperoperatorFamily compose(const SuperoperatorFamily& left, const SuperoperatorFamily& right) {
  if (!(left.grid_ == right.grid_)) throw InvalidArgument("compose: grid mismatch");
  std::vector<Superoperator> v;
  v.reserve(left.size());
  for (std::size_t k = 0; k < left.size(); ++k) v.push_back(left.vals_[k] * right.vals_[k]);
  return SuperoperatorFamily(left.grid_, std::move(v));
}

OperatorFamily::OperatorFamily(TimeGrid grid, std::vector<Mat> vals)
    : grid_(grid), vals_(std::move(vals)) {
  if (vals_.size() != grid_.size()) throw InvalidArgument("OperatorFamily: sample count mismatch");
  dim_ = static_cast<int>(vals_.front().rows());
  for (const auto& v : vals_)
    if (v.rows() != dim_ || v.cols() != dim_) throw InvalidArgument("OperatorFamily: mixed shapes");
}

Mat OperatorFamily::interpolate(double t) const {
  const double x = std::clamp(t / grid_.dt, 0.0, static_cast<double>(grid_.steps));
  const int k = std::min(static_cast<int>(x), grid_.steps - 1);
  const double theta = x - k;
  return (1.0 - theta) * vals_[k] + theta * vals_[k + 1];
}

double max_deviation(const SuperoperatorFamily& a, const SuperoperatorFamily& b) {
  if (a.size() != b.size()) throw InvalidArgument("max_deviation: length mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    m = std::max(m, max_abs(a[k].matrix() - b[k].matrix()));
  return m;
}

}  // namespace smq
