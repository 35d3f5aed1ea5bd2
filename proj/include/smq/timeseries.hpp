#pragma once

// Operations on sampled families: convolution, Laplace evaluation,
// differentiation, the convolution series for the dynamical map, and the
// Volterra propagator for a memory-kernel master equation.
//
// Everything uses the trapezoidal rule on a uniform grid, so every
// construction here is second order in dt.

#include <optional>
#include <string>
#include <vector>

#include "smq/error.hpp"
#include "smq/grid.hpp"

namespace smq {

/// left : Lambda = N + N*Q + N*Q*Q + ...
/// right: Lambda = N + Q*N + Q*Q*N + ...
enum class Order { left, right };

/// (a * b)(t) = int_0^t a(tau) b(t - tau) dtau, trapezoidal.
SuperoperatorFamily convolve(const SuperoperatorFamily& a, const SuperoperatorFamily& b);

struct LaplaceValue {
  Superoperator value;
  /// |A_T|_max e^{-sT} / s, a rough size of the truncated tail.
  double tail_bound = 0.0;
};
LaplaceValue laplace_eval(const SuperoperatorFamily& a, double s);
/// Scalar counterpart on the same quadrature.
double laplace_eval(const std::vector<double>& f, const TimeGrid& grid, double s);

/// Central differences inside, second-order one-sided at the ends.
SuperoperatorFamily differentiate(const SuperoperatorFamily& a);
std::vector<double> differentiate(const std::vector<double>& f, double dt);
/// Second derivative: three-point stencil inside, four-point one-sided at the ends.
SuperoperatorFamily second_derivative(const SuperoperatorFamily& a);

struct BuildOptions {
  Order order = Order::left;
  double tail_tol = 1e-10;
  int n_max = 64;
};

struct BuildDiagnostics {
  int terms = 0;  // convolution terms added beyond N itself
  double last_term_magnitude = 0.0;
  double min_choi = 0.0;           // over the grid
  double max_trace_defect = 0.0;   // over the grid
  double integrated_q_excess = 0.0;  // lambda_max(int_0^T Q^dagger[1]) - 1
  bool converged = false;
  std::vector<std::string> warnings;
};

struct BuiltMap {
  SuperoperatorFamily lambda;
  BuildDiagnostics diagnostics;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, BuiltMap partial)
      : Error(what), partial_(std::move(partial)) {}
  const BuiltMap& partial() const { return partial_; }

 private:
  BuiltMap partial_;
};

/// Sums the convolution series until the newest term's worst-grid-point
/// magnitude (largest |eigenvalue| of dual(term)[1]) drops below tail_tol.
/// Throws ConvergenceError carrying the partial sum after n_max terms.
BuiltMap build_map(const SuperoperatorFamily& n, const SuperoperatorFamily& q,
                   const BuildOptions& options = {});

/// Worst-grid-point min Choi eigenvalue and trace defect of a family.
struct FamilyCheck {
  double min_choi = 0.0;
  double max_trace_defect = 0.0;
  int worst_choi_index = 0;
};
FamilyCheck check_family(const SuperoperatorFamily& a);

/// K_t = delta(t) singular + regular_t.
struct MemoryKernel {
  std::optional<Superoperator> singular;
  SuperoperatorFamily regular;

  int dim() const { return regular.dim(); }
  const TimeGrid& grid() const { return regular.grid(); }
  /// Laplace transform: singular + int e^{-st} regular.
  Superoperator laplace(double s) const;
};

/// Solves d/dt Lambda = S0 Lambda + int_0^t K_{t-tau} Lambda_tau dtau with
/// Lambda_0 = identity (order == right swaps every product). Trapezoidal
/// corrector, solved exactly at each step since the equation is linear.
SuperoperatorFamily propagate_with_kernel(const MemoryKernel& kernel, const TimeGrid& grid,
                                          Order order = Order::left);
SuperoperatorFamily propagate_with_kernel_serial(const MemoryKernel& kernel, const TimeGrid& grid,
                                                 Order order = Order::left);

struct ResidualReport {
  double max_residual = 0.0;
  int worst_index = 0;
  /// 1 + max |d^3 Lambda / dt^3|: the constant in front of dt^2 one expects.
  double scale = 1.0;
  double dt = 0.0;
  bool within(double factor) const { return max_residual <= factor * dt * dt * scale; }
};
/// Residual of d/dt Lambda = S0 Lambda + K * Lambda (mirrored for order == right).
ResidualReport verify_master_equation(const SuperoperatorFamily& lambda, const MemoryKernel& kernel,
                                      Order order = Order::left);

}  // namespace smq
