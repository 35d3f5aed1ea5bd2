#pragma once

// Dense operator / superoperator algebra.
//
// Conventions (fixed throughout the library):
//  * vec() is column stacking, so vec(A X B) = (B^T (x) A) vec(X).
//  * A superoperator on d x d matrices is the d^2 x d^2 matrix acting on vec().
//  * choi(S) = sum_ij S[|i><j|] (x) |i><j|, the unnormalized reference.

#include <complex>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace smq {

using complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

Vec vec(const Mat& x);
Mat unvec(const Vec& v, int d);

/// Max-abs entry.
double max_abs(const Mat& a);
bool is_hermitian(const Mat& a, double tol = 1e-12);
Mat hermitian_part(const Mat& a);

/// Linear map on d x d matrices, stored as its d^2 x d^2 representation.
class Superoperator {
 public:
  Superoperator() = default;
  explicit Superoperator(Mat m);

  static Superoperator identity(int d);
  static Superoperator zero(int d);
  /// rho -> a rho b
  static Superoperator sandwich(const Mat& a, const Mat& b);
  /// rho -> a rho a^dagger
  static Superoperator conjugation(const Mat& a);

  int dim() const { return dim_; }
  const Mat& matrix() const { return mat_; }

  Mat apply(const Mat& rho) const;

  Superoperator operator*(const Superoperator& rhs) const;  // composition
  Superoperator operator+(const Superoperator& rhs) const;
  Superoperator operator-(const Superoperator& rhs) const;
  Superoperator& operator+=(const Superoperator& rhs);
  Superoperator operator*(complex s) const;
  Superoperator operator*(double s) const;

 private:
  int dim_ = 0;
  Mat mat_;
};

inline Superoperator operator*(double s, const Superoperator& a) { return a * s; }
inline Superoperator operator*(complex s, const Superoperator& a) { return a * s; }

/// rho -> sum_k A_k rho A_k^dagger.
Superoperator superop_from_kraus(std::span<const Mat> kraus);
Superoperator superop_from_kraus(std::initializer_list<Mat> kraus);

/// rho -> -i[h, rho]
Superoperator commutator_generator(const Mat& h);
/// rho -> (a rho + rho a) / 2
Superoperator anticommutator_half(const Mat& a);

Mat choi(const Superoperator& s);

struct CpCheck {
  bool cp = false;
  double min_eigenvalue = 0.0;
};
CpCheck is_cp(const Superoperator& s, double tol = 1e-10);
double min_choi_eigenvalue(const Superoperator& s);

/// Hilbert-Schmidt adjoint.
Superoperator dual(const Superoperator& s);

/// dual(s)[1]
Mat dual_identity(const Superoperator& s);
bool is_trace_preserving(const Superoperator& s, double tol = 1e-10);
bool is_trace_nonincreasing(const Superoperator& s, double tol = 1e-10);
/// max_rho |Tr S[rho] - Tr rho| over the matrix-unit basis.
double trace_defect(const Superoperator& s);

/// Trace-norm induced norm of a CP map: largest eigenvalue of dual(s)[1].
/// Throws ValidationError when s is not CP within `cp_tol`.
double cp_induced_trace_norm(const Superoperator& s, double cp_tol = 1e-10);

// Hermitian matrix functions via the eigendecomposition.
struct HermEig {
  RVec values;
  Mat vectors;
};
HermEig herm_eig(const Mat& a);
double min_eigenvalue(const Mat& a);
double max_eigenvalue(const Mat& a);

/// sqrt of a PSD matrix; eigenvalues in [-psd_tol, 0) are clipped to zero.
/// Throws ValidationError for eigenvalues below -psd_tol.
Mat herm_sqrt(const Mat& a, double psd_tol = 1e-12);
/// Inverse square root on eigenvalues > eps, zero on the rest.
Mat herm_pinv_sqrt(const Mat& a, double eps = 1e-12);
/// exp(-i h t) for Hermitian h.
Mat herm_unitary(const Mat& h, double t);
/// exp(c a) for Hermitian a and real c.
Mat herm_exp(const Mat& a, double c);

/// General matrix exponential: Pade(13) with scaling and squaring.
Mat expm(const Mat& a);
inline Superoperator expm(const Superoperator& s) { return Superoperator(expm(s.matrix())); }

// Standard single-qubit operators.
Mat pauli(int alpha);  // 0 = I, 1 = X, 2 = Y, 3 = Z
Mat basis_projector(int d, int i);
Mat matrix_unit(int d, int i, int j);

}  // namespace smq
