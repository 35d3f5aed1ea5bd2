#include "smq/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

#include "smq/error.hpp"

namespace smq {

namespace {

int dim_from_super(Eigen::Index n) {
  const auto d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (d < 1 || static_cast<Eigen::Index>(d) * d != n) {
    throw InvalidArgument("superoperator size " + std::to_string(n) + " is not a perfect square");
  }
  return d;
}

}  // namespace

Vec vec(const Mat& x) {
  return Eigen::Map<const Vec>(x.data(), x.size());
}

Mat unvec(const Vec& v, int d) {
  if (v.size() != static_cast<Eigen::Index>(d) * d) {
    throw InvalidArgument("unvec: size mismatch");
  }
  return Eigen::Map<const Mat>(v.data(), d, d);
}

double max_abs(const Mat& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

bool is_hermitian(const Mat& a, double tol) {
  return a.rows() == a.cols() && max_abs(a - a.adjoint()) <= tol;
}

Mat hermitian_part(const Mat& a) {
  return 0.5 * (a + a.adjoint());
}

Superoperator::Superoperator(Mat m) : mat_(std::move(m)) {
  if (mat_.rows() != mat_.cols()) {
    throw InvalidArgument("superoperator matrix must be square");
  }
  dim_ = dim_from_super(mat_.rows());
}

Superoperator Superoperator::identity(int d) {
  return Superoperator(Mat::Identity(d * d, d * d));
}

Superoperator Superoperator::zero(int d) {
  return Superoperator(Mat::Zero(d * d, d * d));
}

Superoperator Superoperator::sandwich(const Mat& a, const Mat& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw InvalidArgument("sandwich: operands must be square and of equal size");
  }
  return Superoperator(Eigen::kroneckerProduct(b.transpose(), a).eval());
}

Superoperator Superoperator::conjugation(const Mat& a) {
  return sandwich(a, a.adjoint());
}

Mat Superoperator::apply(const Mat& rho) const {
  if (rho.rows() != dim_ || rho.cols() != dim_) {
    throw InvalidArgument("apply: operand dimension mismatch");
  }
  return unvec(mat_ * vec(rho), dim_);
}

Superoperator Superoperator::operator*(const Superoperator& rhs) const {
  if (dim_ != rhs.dim_) throw InvalidArgument("composition: dimension mismatch");
  return Superoperator(mat_ * rhs.mat_);
}

Superoperator Superoperator::operator+(const Superoperator& rhs) const {
  if (dim_ != rhs.dim_) throw InvalidArgument("sum: dimension mismatch");
  return Superoperator(mat_ + rhs.mat_);
}

Superoperator Superoperator::operator-(const Superoperator& rhs) const {
  if (dim_ != rhs.dim_) throw InvalidArgument("difference: dimension mismatch");
  return Superoperator(mat_ - rhs.mat_);
}

Superoperator& Superoperator::operator+=(const Superoperator& rhs) {
  if (dim_ != rhs.dim_) throw InvalidArgument("sum: dimension mismatch");
  mat_ += rhs.mat_;
  return *this;
}

Superoperator Superoperator::operator*(complex s) const {
  return Superoperator(mat_ * s);
}

Superoperator Superoperator::operator*(double s) const {
  return Superoperator(mat_ * s);
}

Superoperator superop_from_kraus(std::span<const Mat> kraus) {
  if (kraus.empty()) throw InvalidArgument("superop_from_kraus: no Kraus operators");
  const auto d = kraus.front().rows();
  if (d < 2) throw InvalidArgument("superop_from_kraus: dimension must be >= 2");
  Mat acc = Mat::Zero(d * d, d * d);
  for (const auto& a : kraus) {
    if (a.rows() != d || a.cols() != d) {
      throw InvalidArgument("superop_from_kraus: Kraus operators must share one square shape");
    }
    acc += Eigen::kroneckerProduct(a.conjugate(), a);
  }
  return Superoperator(std::move(acc));
}

Superoperator superop_from_kraus(std::initializer_list<Mat> kraus) {
  return superop_from_kraus(std::span<const Mat>(kraus.begin(), kraus.size()));
}

Superoperator commutator_generator(const Mat& h) {
  const auto d = h.rows();
  const Mat id = Mat::Identity(d, d);
  return Superoperator::sandwich(h, id) * complex(0, -1) +
         Superoperator::sandwich(id, h) * complex(0, 1);
}

Superoperator anticommutator_half(const Mat& a) {
  const auto d = a.rows();
  const Mat id = Mat::Identity(d, d);
  return (Superoperator::sandwich(a, id) + Superoperator::sandwich(id, a)) * 0.5;
}

Mat choi(const Superoperator& s) {
  const int d = s.dim();
  const Mat& m = s.matrix();
  Mat c(d * d, d * d);
  for (int a = 0; a < d; ++a)
    for (int i = 0; i < d; ++i)
      for (int b = 0; b < d; ++b)
        for (int j = 0; j < d; ++j) c(a * d + i, b * d + j) = m(a + b * d, i + j * d);
  return c;
}

double min_choi_eigenvalue(const Superoperator& s) {
  return min_eigenvalue(hermitian_part(choi(s)));
}

CpCheck is_cp(const Superoperator& s, double tol) {
  const double m = min_choi_eigenvalue(s);
  return {m >= -tol, m};
}

Superoperator dual(const Superoperator& s) {
  return Superoperator(s.matrix().adjoint());
}

Mat dual_identity(const Superoperator& s) {
  const int d = s.dim();
  return unvec(s.matrix().adjoint() * vec(Mat::Identity(d, d)), d);
}

bool is_trace_preserving(const Superoperator& s, double tol) {
  return max_abs(dual_identity(s) - Mat::Identity(s.dim(), s.dim())) <= tol;
}

bool is_trace_nonincreasing(const Superoperator& s, double tol) {
  const Mat gap = Mat::Identity(s.dim(), s.dim()) - dual_identity(s);
  return min_eigenvalue(hermitian_part(gap)) >= -tol;
}

double trace_defect(const Superoperator& s) {
  // Tr S[E_ij] - delta_ij = conj(dual(S)[1])_ij - delta_ij
  return max_abs(dual_identity(s) - Mat::Identity(s.dim(), s.dim()));
}

double cp_induced_trace_norm(const Superoperator& s, double cp_tol) {
  const auto check = is_cp(s, cp_tol);
  if (!check.cp) {
    throw ValidationError("cp_induced_trace_norm: map is not CP (min Choi eigenvalue " +
                          std::to_string(check.min_eigenvalue) +
                          "); the dual(S)[1] formula only holds for CP maps");
  }
  return max_eigenvalue(hermitian_part(dual_identity(s)));
}

HermEig herm_eig(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(a));
  return {es.eigenvalues(), es.eigenvectors()};
}

double min_eigenvalue(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

Mat herm_sqrt(const Mat& a, double psd_tol) {
  auto [vals, vecs] = herm_eig(a);
  if (vals.minCoeff() < -psd_tol) {
    throw ValidationError("herm_sqrt: operator is not positive semidefinite (min eigenvalue " +
                          std::to_string(vals.minCoeff()) + ")");
  }
  const RVec r = vals.cwiseMax(0.0).cwiseSqrt();
  return vecs * r.cast<complex>().asDiagonal() * vecs.adjoint();
}

Mat herm_pinv_sqrt(const Mat& a, double eps) {
  auto [vals, vecs] = herm_eig(a);
  RVec r(vals.size());
  for (Eigen::Index i = 0; i < vals.size(); ++i) r(i) = vals(i) > eps ? 1.0 / std::sqrt(vals(i)) : 0.0;
  return vecs * r.cast<complex>().asDiagonal() * vecs.adjoint();
}

Mat herm_unitary(const Mat& h, double t) {
  auto [vals, vecs] = herm_eig(h);
  Vec phase(vals.size());
  for (Eigen::Index i = 0; i < vals.size(); ++i) phase(i) = std::exp(complex(0, -vals(i) * t));
  return vecs * phase.asDiagonal() * vecs.adjoint();
}

Mat herm_exp(const Mat& a, double c) {
  auto [vals, vecs] = herm_eig(a);
  const RVec e = (vals * c).array().exp();
  return vecs * e.cast<complex>().asDiagonal() * vecs.adjoint();
}

Mat expm(const Mat& a) {
  if (a.rows() != a.cols()) throw InvalidArgument("expm: matrix must be square");
  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;
  const auto n = a.rows();
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm1 > theta13) s = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  const Mat as = a / std::ldexp(1.0, s);
  const Mat id = Mat::Identity(n, n);
  const Mat a2 = as * as;
  const Mat a4 = a2 * a2;
  const Mat a6 = a4 * a2;
  const Mat u = as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                      b[3] * a2 + b[1] * id);
  const Mat v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 +
                b[0] * id;
  Mat r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < s; ++k) r = r * r;
  return r;
}

Mat pauli(int alpha) {
  Mat m = Mat::Zero(2, 2);
  switch (alpha) {
    case 0: m << 1, 0, 0, 1; break;
    case 1: m << 0, 1, 1, 0; break;
    case 2: m << 0, complex(0, -1), complex(0, 1), 0; break;
    case 3: m << 1, 0, 0, -1; break;
    default: throw InvalidArgument("pauli: index must be 0..3");
  }
  return m;
}

Mat basis_projector(int d, int i) {
  return matrix_unit(d, i, i);
}

Mat matrix_unit(int d, int i, int j) {
  Mat m = Mat::Zero(d, d);
  m(i, j) = 1.0;
  return m;
}

}  // namespace smq
