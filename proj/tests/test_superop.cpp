#include <doctest.h>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "common.hpp"
#include "smq/error.hpp"
#include "smq/linalg.hpp"

using namespace smq;

TEST_CASE("sandwich matches the Kronecker form of column-stacking vec") {
  std::mt19937_64 rng(1);
  for (int d : {1, 2, 3}) {
    const Mat a = test::random_matrix(d, d, rng), b = test::random_matrix(d, d, rng), x = test::random_matrix(d, d, rng);
    const Superoperator s = Superoperator::sandwich(a, b);
    CHECK(max_abs(s.apply(x) - a * x * b) < 1e-12);
    const Mat kron = Eigen::kroneckerProduct(Mat(b.transpose()), a);
    CHECK(max_abs(s.matrix() - kron) < 1e-14);
    CHECK(max_abs(unvec(vec(x), d) - x) == 0.0);
  }
}

TEST_CASE("composition and linear combinations act pointwise") {
  std::mt19937_64 rng(2);
  const Superoperator s1 = test::random_channel(2, 3, rng), s2 = test::random_channel(2, 2, rng);
  const Mat rho = test::random_density(2, rng);
  CHECK(max_abs((s1 * s2).apply(rho) - s1.apply(s2.apply(rho))) < 1e-12);
  CHECK(max_abs((s1 + s2 * 0.5).apply(rho) - (s1.apply(rho) + 0.5 * s2.apply(rho))) < 1e-12);
  CHECK(max_abs((s1 - s1).matrix()) == 0.0);
}

TEST_CASE("Choi matrix of the identity and of the transpose") {
  const Mat c = choi(Superoperator::identity(2));
  Mat expect = Mat::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) expect += Eigen::kroneckerProduct(matrix_unit(2, i, j), matrix_unit(2, i, j)).eval();
  CHECK(max_abs(c - expect) < 1e-15);
  CHECK(min_choi_eigenvalue(Superoperator::identity(2)) == doctest::Approx(0.0).epsilon(1e-12));

  Mat t = Mat::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) t += Superoperator::sandwich(matrix_unit(2, i, j), matrix_unit(2, i, j)).matrix();
  const Superoperator transpose(t);
  CHECK(max_abs(transpose.apply(pauli(2)) - pauli(2).transpose()) < 1e-15);
  CHECK(min_choi_eigenvalue(transpose) == doctest::Approx(-1.0));
  CHECK_FALSE(is_cp(transpose).cp);
}

TEST_CASE("dual is the Hilbert-Schmidt adjoint") {
  std::mt19937_64 rng(3);
  const Superoperator s = test::random_channel(3, 2, rng) * complex(0.3, 0.7);
  const Mat x = test::random_matrix(3, 3, rng), y = test::random_matrix(3, 3, rng);
  const complex lhs = (s.apply(x).adjoint() * y).trace();
  const complex rhs = (x.adjoint() * dual(s).apply(y)).trace();
  CHECK(std::abs(lhs - rhs) < 1e-12);
}

TEST_CASE("trace preservation and the induced trace norm") {
  std::mt19937_64 rng(4);
  const Superoperator ch = test::random_channel(3, 4, rng);
  CHECK(is_trace_preserving(ch));
  CHECK(trace_defect(ch) < 1e-12);
  CHECK(max_abs(dual_identity(ch) - Mat::Identity(3, 3)) < 1e-12);
  CHECK(cp_induced_trace_norm(ch * 0.25) == doctest::Approx(0.25));
  CHECK(is_trace_nonincreasing(ch * 0.9));
  CHECK_FALSE(is_trace_nonincreasing(ch * 1.1));
  CHECK(trace_defect(ch * 0.9) == doctest::Approx(0.1));
  CHECK_THROWS_AS(cp_induced_trace_norm(ch * -1.0), ValidationError);
}

TEST_CASE("amplitude damping from Kraus operators") {
  const double p = 0.3;
  Mat k0 = Mat::Zero(2, 2), k1 = Mat::Zero(2, 2);
  k0(0, 0) = 1.0;
  k0(1, 1) = std::sqrt(1.0 - p);
  k1(0, 1) = std::sqrt(p);
  const Superoperator ad = superop_from_kraus({k0, k1});
  const Mat out = ad.apply(basis_projector(2, 1));
  CHECK(out(0, 0).real() == doctest::Approx(p));
  CHECK(out(1, 1).real() == doctest::Approx(1.0 - p));
  CHECK(is_cp(ad).cp);
}

TEST_CASE("expm agrees with Eigen's matrix exponential") {
  std::mt19937_64 rng(5);
  for (double scale : {1e-3, 0.5, 3.0, 40.0}) {
    const Mat a = test::random_matrix(4, 4, rng) * scale;
    const Mat oracle = a.exp();
    CHECK(max_abs(expm(a) - oracle) <= 1e-12 * std::max(1.0, max_abs(oracle)));
  }
  CHECK(max_abs(expm(Mat::Zero(3, 3)) - Mat::Identity(3, 3)) < 1e-15);
}

TEST_CASE("commutator generator exponentiates to unitary conjugation") {
  std::mt19937_64 rng(6);
  const Mat h = test::random_hermitian(3, rng);
  const Mat rho = test::random_density(3, rng);
  const Mat u = herm_unitary(h, 0.7);
  CHECK(max_abs(u * u.adjoint() - Mat::Identity(3, 3)) < 1e-12);
  CHECK(max_abs(expm(commutator_generator(h) * 0.7).apply(rho) - u * rho * u.adjoint()) < 1e-12);
  CHECK(max_abs(anticommutator_half(h).apply(rho) - (h * rho + rho * h) / 2.0) < 1e-14);
}

TEST_CASE("Hermitian matrix functions") {
  std::mt19937_64 rng(7);
  const Mat a = test::random_matrix(3, 3, rng);
  const Mat psd = a * a.adjoint();
  const Mat r = herm_sqrt(psd);
  CHECK(max_abs(r * r - psd) < 1e-12);
  CHECK(max_abs(herm_pinv_sqrt(psd) * r - Mat::Identity(3, 3)) < 1e-10);
  CHECK(min_eigenvalue(psd) > 0.0);
  CHECK(max_eigenvalue(psd) >= min_eigenvalue(psd));
  CHECK(max_abs(herm_exp(psd, -0.4) - Mat(psd * -0.4).exp()) < 1e-12);
  CHECK_THROWS_AS(herm_sqrt(-psd), ValidationError);

  Mat singular = Mat::Zero(2, 2);
  singular(0, 0) = 4.0;
  const Mat pinv = herm_pinv_sqrt(singular, 1e-10);
  CHECK(pinv(0, 0).real() == doctest::Approx(0.5));
  CHECK(pinv(1, 1) == complex(0.0));
}

TEST_CASE("Pauli matrices") {
  for (int a = 1; a <= 3; ++a) {
    CHECK(max_abs(pauli(a) * pauli(a) - Mat::Identity(2, 2)) == 0.0);
    CHECK(is_hermitian(pauli(a)));
  }
  CHECK(max_abs(pauli(1) * pauli(2) - complex(0.0, 1.0) * pauli(3)) == 0.0);
}
