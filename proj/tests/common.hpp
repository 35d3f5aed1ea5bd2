#pragma once

#include <random>

#include "smq/linalg.hpp"

namespace smq::test {

inline Mat random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = {n(rng), n(rng)};
  return m;
}

inline Mat random_density(int d, std::mt19937_64& rng) {
  const Mat a = random_matrix(d, d, rng);
  const Mat rho = a * a.adjoint();
  return rho / rho.trace().real();
}

inline Mat random_hermitian(int d, std::mt19937_64& rng) {
  const Mat a = random_matrix(d, d, rng);
  return (a + a.adjoint()) / 2.0;
}

// Random CPTP map with `rank` Kraus operators: K_k = A_k S^{-1/2}, S = sum A^dag A.
inline Superoperator random_channel(int d, int rank, std::mt19937_64& rng) {
  std::vector<Mat> a;
  Mat s = Mat::Zero(d, d);
  for (int k = 0; k < rank; ++k) {
    a.push_back(random_matrix(d, d, rng));
    s += a.back().adjoint() * a.back();
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  const Mat inv_sqrt = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                       es.eigenvectors().adjoint();
  for (auto& k : a) k = k * inv_sqrt;
  return superop_from_kraus(std::span<const Mat>(a));
}

}  // namespace smq::test
