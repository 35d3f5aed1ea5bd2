#pragma once

// Grid kernels shared by the time-series, classical and trajectory code.
//
// Each data-parallel kernel comes in two flavours: an OpenMP version used by
// the library and a plain serial reference kept for tests and benchmarks.
// Both produce identical results up to floating-point reassociation inside
// a single output sample; output samples never depend on thread count.

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace smq::kernels {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Trapezoidal convolution out[k] = dt * sum_{j=0..k} w_j a[j] b[k-j], w_0 = w_k = 1/2.
/// All samples must be square of one size; a and b must have equal length.
template <class Scalar>
std::vector<Matrix<Scalar>> convolve(std::span<const Matrix<Scalar>> a,
                                     std::span<const Matrix<Scalar>> b, double dt);

template <class Scalar>
std::vector<Matrix<Scalar>> convolve_serial(std::span<const Matrix<Scalar>> a,
                                            std::span<const Matrix<Scalar>> b, double dt);

enum class Side { left, right };

/// Second-kind Volterra equation on the grid, trapezoidal rule:
///   side == left :  x[k] + (x * b)[k] = r[k]
///   side == right:  x[k] + (b * x)[k] = r[k]
/// where * is the trapezoidal convolution above.
template <class Scalar>
std::vector<Matrix<Scalar>> volterra_second_kind(std::span<const Matrix<Scalar>> b,
                                                 std::span<const Matrix<Scalar>> r, double dt,
                                                 Side side);

template <class Scalar>
std::vector<Matrix<Scalar>> volterra_second_kind_serial(std::span<const Matrix<Scalar>> b,
                                                        std::span<const Matrix<Scalar>> r,
                                                        double dt, Side side);

/// Number of OpenMP threads the kernels will use.
int max_threads();

}  // namespace smq::kernels
