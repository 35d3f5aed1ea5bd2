#include "smq/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "smq/kernels.hpp"

namespace smq {

namespace {

void require_same_grid(const SuperoperatorFamily& a, const SuperoperatorFamily& b, const char* who) {
  if (!(a.grid() == b.grid())) throw InvalidArgument(std::string(who) + ": grid mismatch");
  if (a.dim() != b.dim()) throw InvalidArgument(std::string(who) + ": dimension mismatch");
}

double term_magnitude(const Mat& m, int d) {
  const Vec id = vec(Mat::Identity(d, d));
  const Mat f = unvec(m.adjoint() * id, d);
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(f), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

SuperoperatorFamily convolve(const SuperoperatorFamily& a, const SuperoperatorFamily& b) {
  require_same_grid(a, b, "convolve");
  const auto am = a.matrices();
  const auto bm = b.matrices();
  return SuperoperatorFamily::from_matrices(
      a.grid(), kernels::convolve<complex>(std::span<const Mat>(am), std::span<const Mat>(bm),
                                           a.grid().dt));
}

LaplaceValue laplace_eval(const SuperoperatorFamily& a, double s) {
  if (!(s > 0.0)) throw InvalidArgument("laplace_eval: s must be positive");
  const auto& g = a.grid();
  Mat acc = Mat::Zero(a[0].matrix().rows(), a[0].matrix().cols());
  for (int k = 0; k <= g.steps; ++k) {
    const double w = (k == 0 || k == g.steps) ? 0.5 : 1.0;
    acc += (w * std::exp(-s * g.time(k))) * a[static_cast<std::size_t>(k)].matrix();
  }
  const double tail = max_abs(a[a.size() - 1].matrix()) * std::exp(-s * g.horizon()) / s;
  return {Superoperator(g.dt * acc), tail};
}

double laplace_eval(const std::vector<double>& f, const TimeGrid& grid, double s) {
  if (!(s > 0.0)) throw InvalidArgument("laplace_eval: s must be positive");
  if (f.size() != grid.size()) throw InvalidArgument("laplace_eval: sample count mismatch");
  double acc = 0.0;
  for (int k = 0; k <= grid.steps; ++k) {
    const double w = (k == 0 || k == grid.steps) ? 0.5 : 1.0;
    acc += w * std::exp(-s * grid.time(k)) * f[static_cast<std::size_t>(k)];
  }
  return grid.dt * acc;
}

SuperoperatorFamily differentiate(const SuperoperatorFamily& a) {
  const auto& g = a.grid();
  const int m = g.steps;
  const double h = g.dt;
  std::vector<Mat> out(a.size());
  const auto at = [&](int k) -> const Mat& { return a[static_cast<std::size_t>(k)].matrix(); };
  out[0] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
  for (int k = 1; k < m; ++k) out[static_cast<std::size_t>(k)] = (at(k + 1) - at(k - 1)) / (2.0 * h);
  out[static_cast<std::size_t>(m)] = (3.0 * at(m) - 4.0 * at(m - 1) + at(m - 2)) / (2.0 * h);
  return SuperoperatorFamily::from_matrices(g, std::move(out));
}

std::vector<double> differentiate(const std::vector<double>& f, double dt) {
  const auto n = f.size();
  if (n < 3) throw InvalidArgument("differentiate: need at least 3 samples");
  std::vector<double> out(n);
  out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt);
  for (std::size_t k = 1; k + 1 < n; ++k) out[k] = (f[k + 1] - f[k - 1]) / (2.0 * dt);
  out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dt);
  return out;
}

SuperoperatorFamily second_derivative(const SuperoperatorFamily& a) {
  const auto& g = a.grid();
  const int m = g.steps;
  if (m < 3) throw InvalidArgument("second_derivative: need at least 4 samples");
  const double h2 = g.dt * g.dt;
  std::vector<Mat> out(a.size());
  const auto at = [&](int k) -> const Mat& { return a[static_cast<std::size_t>(k)].matrix(); };
  out[0] = (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2;
  for (int k = 1; k < m; ++k) out[static_cast<std::size_t>(k)] = (at(k + 1) - 2.0 * at(k) + at(k - 1)) / h2;
  out[static_cast<std::size_t>(m)] = (2.0 * at(m) - 5.0 * at(m - 1) + 4.0 * at(m - 2) - at(m - 3)) / h2;
  return SuperoperatorFamily::from_matrices(g, std::move(out));
}

FamilyCheck check_family(const SuperoperatorFamily& a) {
  FamilyCheck c;
  c.min_choi = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double m = min_choi_eigenvalue(a[k]);
    if (m < c.min_choi) {
      c.min_choi = m;
      c.worst_choi_index = static_cast<int>(k);
    }
    c.max_trace_defect = std::max(c.max_trace_defect, trace_defect(a[k]));
  }
  return c;
}

BuiltMap build_map(const SuperoperatorFamily& n, const SuperoperatorFamily& q,
                   const BuildOptions& options) {
  require_same_grid(n, q, "build_map");
  if (options.n_max < 1) throw InvalidArgument("build_map: n_max must be >= 1");
  const int d = n.dim();
  const double dt = n.grid().dt;
  BuildDiagnostics diag;

  // integrated trace condition on Q: int_0^T Q^dagger[1] <= 1
  {
    Mat acc = Mat::Zero(d, d);
    for (std::size_t k = 0; k < q.size(); ++k) {
      const double w = (k == 0 || k + 1 == q.size()) ? 0.5 : 1.0;
      acc += w * dt * dual_identity(q[k]);
    }
    diag.integrated_q_excess = max_eigenvalue(acc) - 1.0;
    if (diag.integrated_q_excess > 1e-8) {
      diag.warnings.push_back("Q is not trace-nonincreasing in the integrated sense (excess " +
                              std::to_string(diag.integrated_q_excess) + ")");
    }
  }

  const auto qm = q.matrices();
  std::vector<Mat> term = n.matrices();
  std::vector<Mat> sum = term;
  for (int i = 1; i <= options.n_max; ++i) {
    term = options.order == Order::left
               ? kernels::convolve<complex>(std::span<const Mat>(term), std::span<const Mat>(qm), dt)
               : kernels::convolve<complex>(std::span<const Mat>(qm), std::span<const Mat>(term), dt);
    double mag = 0.0;
    for (std::size_t k = 0; k < sum.size(); ++k) {
      sum[k] += term[k];
      mag = std::max(mag, term_magnitude(term[k], d));
    }
    diag.terms = i;
    diag.last_term_magnitude = mag;
    if (mag < options.tail_tol) {
      diag.converged = true;
      break;
    }
  }

  BuiltMap out{SuperoperatorFamily::from_matrices(n.grid(), std::move(sum)), diag};
  const auto check = check_family(out.lambda);
  out.diagnostics.min_choi = check.min_choi;
  out.diagnostics.max_trace_defect = check.max_trace_defect;
  if (!out.diagnostics.converged) {
    throw ConvergenceError("build_map: series did not converge within " +
                               std::to_string(options.n_max) + " terms (last term magnitude " +
                               std::to_string(out.diagnostics.last_term_magnitude) + ")",
                           std::move(out));
  }
  return out;
}

Superoperator MemoryKernel::laplace(double s) const {
  Superoperator v = laplace_eval(regular, s).value;
  if (singular) v += *singular;
  return v;
}

namespace {

void check_kernel(const MemoryKernel& kernel, const TimeGrid& grid) {
  if (!(kernel.grid() == grid)) throw InvalidArgument("propagate_with_kernel: grid mismatch");
  if (kernel.singular && kernel.singular->dim() != kernel.dim()) {
    throw InvalidArgument("propagate_with_kernel: singular part dimension mismatch");
  }
}

}  // namespace

SuperoperatorFamily propagate_with_kernel(const MemoryKernel& kernel, const TimeGrid& grid,
                                          Order order) {
  check_kernel(kernel, grid);
  const int d = kernel.dim();
  const auto n = static_cast<Eigen::Index>(d) * d;
  const auto count = static_cast<Eigen::Index>(grid.size());
  const double dt = grid.dt;
  const bool left = order == Order::left;
  const auto km = kernel.regular.matrices();
  const Mat s0 = kernel.singular ? kernel.singular->matrix() : Mat::Zero(n, n);
  const Mat id = Mat::Identity(n, n);
  const Mat a = s0 + 0.5 * dt * km[0];
  const Mat sys = id - 0.5 * dt * a;
  const Eigen::PartialPivLU<Mat> lu(left ? sys : Mat(sys.transpose()));

  // kernel samples packed in reverse order, K_M first
  Mat kpack = left ? Mat(n, n * count) : Mat(n * count, n);
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto& kk = km[static_cast<std::size_t>(count - 1 - i)];
    if (left) kpack.middleCols(i * n, n) = kk;
    else kpack.middleRows(i * n, n) = kk;
  }
  Mat lpack = left ? Mat(n * count, n) : Mat(n, n * count);

  std::vector<Mat> lam(static_cast<std::size_t>(count));
  lam[0] = id;
  if (left) lpack.topRows(n) = id;
  else lpack.leftCols(n) = id;

  // history(m) = dt (K_m L_0 / 2 + sum_{j=1}^{m-1} K_{m-j} L_j), products mirrored for right
  const auto history = [&](Eigen::Index m) {
    const auto& km_m = km[static_cast<std::size_t>(m)];
    Mat h = 0.5 * km_m;
    if (m > 1) {
      const auto width = n * (m - 1);
      if (left) h.noalias() += kpack.middleCols(n * (count - m), width) * lpack.middleRows(n, width);
      else h.noalias() += lpack.middleCols(n, width) * kpack.middleRows(n * (count - m), width);
    }
    return Mat(dt * h);
  };

  Mat f_prev = s0;  // F_0 = S0 Lambda_0
  for (Eigen::Index k = 0; k + 1 < count; ++k) {
    const Mat h_next = history(k + 1);
    const Mat rhs = lam[static_cast<std::size_t>(k)] + 0.5 * dt * (f_prev + h_next);
    Mat next = left ? Mat(lu.solve(rhs)) : Mat(lu.solve(rhs.transpose()).transpose());
    f_prev = (left ? Mat(a * next) : Mat(next * a)) + h_next;
    lam[static_cast<std::size_t>(k + 1)] = next;
    if (left) lpack.middleRows(n * (k + 1), n) = next;
    else lpack.middleCols(n * (k + 1), n) = next;
  }
  return SuperoperatorFamily::from_matrices(grid, std::move(lam));
}

SuperoperatorFamily propagate_with_kernel_serial(const MemoryKernel& kernel, const TimeGrid& grid,
                                                 Order order) {
  check_kernel(kernel, grid);
  const int d = kernel.dim();
  const auto n = static_cast<Eigen::Index>(d) * d;
  const std::size_t count = grid.size();
  const double dt = grid.dt;
  const bool left = order == Order::left;
  const auto km = kernel.regular.matrices();
  const Mat s0 = kernel.singular ? kernel.singular->matrix() : Mat::Zero(n, n);
  const auto mul = [&](const Mat& x, const Mat& y) -> Mat { return left ? Mat(x * y) : Mat(y * x); };
  const Mat a = s0 + 0.5 * dt * km[0];
  const Mat sys_inv = (Mat::Identity(n, n) - 0.5 * dt * a).inverse();

  std::vector<Mat> lam(count);
  lam[0] = Mat::Identity(n, n);
  Mat f_prev = s0;
  for (std::size_t k = 0; k + 1 < count; ++k) {
    const std::size_t m = k + 1;
    Mat h = 0.5 * km[m];  // Lambda_0 = 1
    for (std::size_t j = 1; j < m; ++j) h += mul(km[m - j], lam[j]);
    h *= dt;
    const Mat rhs = lam[k] + 0.5 * dt * (f_prev + h);
    lam[m] = left ? Mat(sys_inv * rhs) : Mat(rhs * sys_inv);
    f_prev = mul(a, lam[m]) + h;
  }
  return SuperoperatorFamily::from_matrices(grid, std::move(lam));
}

ResidualReport verify_master_equation(const SuperoperatorFamily& lambda, const MemoryKernel& kernel,
                                      Order order) {
  if (!(kernel.grid() == lambda.grid())) throw InvalidArgument("verify_master_equation: grid mismatch");
  const bool left = order == Order::left;
  const auto dl = differentiate(lambda);
  const auto memory = left ? convolve(kernel.regular, lambda) : convolve(lambda, kernel.regular);
  ResidualReport rep;
  rep.dt = lambda.grid().dt;
  for (std::size_t k = 0; k < lambda.size(); ++k) {
    Mat r = dl[k].matrix() - memory[k].matrix();
    if (kernel.singular) {
      r -= left ? Mat(kernel.singular->matrix() * lambda[k].matrix())
                : Mat(lambda[k].matrix() * kernel.singular->matrix());
    }
    const double v = max_abs(r);
    if (v > rep.max_residual) {
      rep.max_residual = v;
      rep.worst_index = static_cast<int>(k);
    }
  }
  const auto d3 = differentiate(differentiate(dl));
  double m3 = 0.0;
  for (std::size_t k = 0; k < d3.size(); ++k) m3 = std::max(m3, max_abs(d3[k].matrix()));
  rep.scale = 1.0 + m3;
  return rep;
}

}  // namespace smq
