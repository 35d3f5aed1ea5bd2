#pragma once

#include <string>
#include <utility>
#include <vector>

#include "smq/grid.hpp"

namespace smq {

/// Scalar waiting-time density f(t) >= 0 with int_0^inf f <= 1.
///
/// Exponential, mixture and Erlang densities carry closed-form survival
/// functions; tabulated densities are integrated by the trapezoidal rule
/// and extrapolated exponentially past the last sample for the tail mass.
class WaitingDensity {
 public:
  enum class Kind { exponential, mixture, erlang, tabulated };

  struct Component {
    double weight;
    double rate;
  };

  static WaitingDensity exponential(double rate);
  /// sum_i w_i rate_i e^{-rate_i t}; total mass sum_i w_i must not exceed 1.
  static WaitingDensity mixture(std::vector<Component> components);
  /// rate^n t^{n-1} e^{-rate t} / (n-1)!
  static WaitingDensity erlang(int shape, double rate);
  static WaitingDensity tabulated(TimeGrid grid, std::vector<double> values);

  Kind kind() const { return kind_; }
  double density(double t) const;
  /// 1 - int_0^t f
  double survival(double t) const;
  /// int_0^inf f
  double total_mass() const;
  std::vector<double> sample(const TimeGrid& grid) const;
  std::string describe() const;

  const std::vector<Component>& components() const { return components_; }
  int shape() const { return shape_; }

 private:
  Kind kind_ = Kind::exponential;
  std::vector<Component> components_;
  int shape_ = 1;
  TimeGrid table_grid_;
  std::vector<double> table_;
};

/// Trapezoidal cumulative integral: out[k] = int_0^{t_k} f.
std::vector<double> cumulative_integral(const std::vector<double>& f, double dt);

}  // namespace smq
