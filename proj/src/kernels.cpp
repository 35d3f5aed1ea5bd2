#include "smq/kernels.hpp"

#include <complex>
#include <stdexcept>

#include <omp.h>

#include "smq/error.hpp"

namespace smq::kernels {

namespace {

template <class Scalar>
Eigen::Index check_family(std::span<const Matrix<Scalar>> a, std::span<const Matrix<Scalar>> b) {
  if (a.size() != b.size() || a.empty()) throw InvalidArgument("kernel: family length mismatch");
  const auto n = a.front().rows();
  for (const auto& m : a)
    if (m.rows() != n || m.cols() != n) throw InvalidArgument("kernel: sample shape mismatch");
  for (const auto& m : b)
    if (m.rows() != n || m.cols() != n) throw InvalidArgument("kernel: sample shape mismatch");
  return n;
}

// [m_0 m_1 ... m_M]
template <class Scalar>
Matrix<Scalar> pack_horizontal(std::span<const Matrix<Scalar>> m, bool reversed) {
  const auto n = m.front().rows();
  const auto count = static_cast<Eigen::Index>(m.size());
  Matrix<Scalar> out(n, n * count);
  for (Eigen::Index i = 0; i < count; ++i)
    out.middleCols(i * n, n) = m[static_cast<std::size_t>(reversed ? count - 1 - i : i)];
  return out;
}

// [m_M; ...; m_1; m_0] when reversed
template <class Scalar>
Matrix<Scalar> pack_vertical(std::span<const Matrix<Scalar>> m, bool reversed) {
  const auto n = m.front().rows();
  const auto count = static_cast<Eigen::Index>(m.size());
  Matrix<Scalar> out(n * count, n);
  for (Eigen::Index i = 0; i < count; ++i)
    out.middleRows(i * n, n) = m[static_cast<std::size_t>(reversed ? count - 1 - i : i)];
  return out;
}

}  // namespace

int max_threads() {
  return omp_get_max_threads();
}

template <class Scalar>
std::vector<Matrix<Scalar>> convolve(std::span<const Matrix<Scalar>> a,
                                     std::span<const Matrix<Scalar>> b, double dt) {
  const auto n = check_family(a, b);
  const auto count = static_cast<Eigen::Index>(a.size());
  const Matrix<Scalar> ah = pack_horizontal(a, false);
  const Matrix<Scalar> bv = pack_vertical(b, true);
  std::vector<Matrix<Scalar>> out(a.size(), Matrix<Scalar>::Zero(n, n));

  // out[k] = dt * ([a_0..a_k] [b_k; ...; b_0] - (a_0 b_k + a_k b_0) / 2)
#pragma omp parallel for schedule(dynamic, 4)
  for (Eigen::Index k = 1; k < count; ++k) {
    const auto width = n * (k + 1);
    Matrix<Scalar> acc = ah.leftCols(width) * bv.bottomRows(width);
    acc.noalias() -= Scalar(0.5) * (a[0] * b[static_cast<std::size_t>(k)]);
    acc.noalias() -= Scalar(0.5) * (a[static_cast<std::size_t>(k)] * b[0]);
    out[static_cast<std::size_t>(k)] = Scalar(dt) * acc;
  }
  return out;
}

template <class Scalar>
std::vector<Matrix<Scalar>> convolve_serial(std::span<const Matrix<Scalar>> a,
                                            std::span<const Matrix<Scalar>> b, double dt) {
  const auto n = check_family(a, b);
  const std::size_t count = a.size();
  std::vector<Matrix<Scalar>> out(count, Matrix<Scalar>::Zero(n, n));
  for (std::size_t k = 1; k < count; ++k) {
    Matrix<Scalar> acc = Matrix<Scalar>::Zero(n, n);
    for (std::size_t j = 0; j <= k; ++j) {
      const double w = (j == 0 || j == k) ? 0.5 : 1.0;
      acc.noalias() += Scalar(w) * a[j].lazyProduct(b[k - j]);
    }
    out[k] = Scalar(dt) * acc;
  }
  return out;
}

template <class Scalar>
std::vector<Matrix<Scalar>> volterra_second_kind(std::span<const Matrix<Scalar>> b,
                                                 std::span<const Matrix<Scalar>> r, double dt,
                                                 Side side) {
  const auto n = check_family(b, r);
  const auto count = static_cast<Eigen::Index>(b.size());
  const Matrix<Scalar> id = Matrix<Scalar>::Identity(n, n);
  const Matrix<Scalar> diag = id + Scalar(0.5 * dt) * b[0];
  const Eigen::PartialPivLU<Matrix<Scalar>> lu(side == Side::left ? Matrix<Scalar>(diag.transpose())
                                                                  : diag);
  std::vector<Matrix<Scalar>> x(b.size());
  x[0] = r[0];

  if (side == Side::left) {
    // x_k diag = r_k - dt (x_0 b_k / 2 + sum_{j=1}^{k-1} x_j b_{k-j})
    const Matrix<Scalar> bv = pack_vertical(b, true);
    Matrix<Scalar> xh(n, n * count);
    xh.leftCols(n) = x[0];
    for (Eigen::Index k = 1; k < count; ++k) {
      Matrix<Scalar> rhs = r[static_cast<std::size_t>(k)] -
                           Scalar(0.5 * dt) * (x[0] * b[static_cast<std::size_t>(k)]);
      if (k > 1) {
        const auto width = n * (k - 1);
        rhs.noalias() -= Scalar(dt) * (xh.middleCols(n, width) *
                                       bv.middleRows(n * (count - k), width));
      }
      // x diag = rhs  <=>  diag^T x^T = rhs^T
      x[static_cast<std::size_t>(k)] = lu.solve(rhs.transpose()).transpose();
      xh.middleCols(n * k, n) = x[static_cast<std::size_t>(k)];
    }
  } else {
    const Matrix<Scalar> bh = pack_horizontal(b, true);
    Matrix<Scalar> xv(n * count, n);
    xv.topRows(n) = x[0];
    for (Eigen::Index k = 1; k < count; ++k) {
      Matrix<Scalar> rhs = r[static_cast<std::size_t>(k)] -
                           Scalar(0.5 * dt) * (b[static_cast<std::size_t>(k)] * x[0]);
      if (k > 1) {
        const auto width = n * (k - 1);
        rhs.noalias() -= Scalar(dt) * (bh.middleCols(n * (count - k), width) *
                                       xv.middleRows(n, width));
      }
      x[static_cast<std::size_t>(k)] = lu.solve(rhs);
      xv.middleRows(n * k, n) = x[static_cast<std::size_t>(k)];
    }
  }
  return x;
}

template <class Scalar>
std::vector<Matrix<Scalar>> volterra_second_kind_serial(std::span<const Matrix<Scalar>> b,
                                                        std::span<const Matrix<Scalar>> r,
                                                        double dt, Side side) {
  const auto n = check_family(b, r);
  const std::size_t count = b.size();
  const Matrix<Scalar> id = Matrix<Scalar>::Identity(n, n);
  const Matrix<Scalar> diag_inv = (id + Scalar(0.5 * dt) * b[0]).inverse();
  std::vector<Matrix<Scalar>> x(count);
  x[0] = r[0];
  for (std::size_t k = 1; k < count; ++k) {
    Matrix<Scalar> acc = Matrix<Scalar>::Zero(n, n);
    for (std::size_t j = 0; j < k; ++j) {
      const double w = j == 0 ? 0.5 : 1.0;
      acc += Scalar(w) * (side == Side::left ? Matrix<Scalar>(x[j] * b[k - j])
                                             : Matrix<Scalar>(b[k - j] * x[j]));
    }
    const Matrix<Scalar> rhs = r[k] - Scalar(dt) * acc;
    x[k] = side == Side::left ? Matrix<Scalar>(rhs * diag_inv) : Matrix<Scalar>(diag_inv * rhs);
  }
  return x;
}

#define SMQ_INSTANTIATE(S)                                                                     \
  template std::vector<Matrix<S>> convolve<S>(std::span<const Matrix<S>>,                      \
                                              std::span<const Matrix<S>>, double);             \
  template std::vector<Matrix<S>> convolve_serial<S>(std::span<const Matrix<S>>,               \
                                                     std::span<const Matrix<S>>, double);      \
  template std::vector<Matrix<S>> volterra_second_kind<S>(                                     \
      std::span<const Matrix<S>>, std::span<const Matrix<S>>, double, Side);                   \
  template std::vector<Matrix<S>> volterra_second_kind_serial<S>(                              \
      std::span<const Matrix<S>>, std::span<const Matrix<S>>, double, Side);

SMQ_INSTANTIATE(double)
SMQ_INSTANTIATE(std::complex<double>)

#undef SMQ_INSTANTIATE

}  // namespace smq::kernels
