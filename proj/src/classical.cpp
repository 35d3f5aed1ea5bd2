#include "smq/classical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "smq/error.hpp"
#include "smq/kernels.hpp"

namespace smq {

namespace {

std::vector<RMat> derivative(const std::vector<RMat>& a, double h) {
  const std::size_t m = a.size() - 1;
  std::vector<RMat> out(a.size());
  out[0] = (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * h);
  for (std::size_t k = 1; k < m; ++k) out[k] = (a[k + 1] - a[k - 1]) / (2.0 * h);
  out[m] = (3.0 * a[m] - 4.0 * a[m - 1] + a[m - 2]) / (2.0 * h);
  return out;
}

void finish(StochasticMatrixFamily& s) {
  s.max_column_defect = 0.0;
  s.min_entry = std::numeric_limits<double>::infinity();
  for (const auto& m : s.t) {
    s.max_column_defect = std::max(s.max_column_defect, (m.colwise().sum().array() - 1.0).abs().maxCoeff());
    s.min_entry = std::min(s.min_entry, m.minCoeff());
  }
}

}  // namespace

SemiMarkovMatrix SemiMarkovMatrix::validate(TimeGrid grid, std::vector<RMat> q, double tol) {
  if (q.size() != grid.size()) throw InvalidArgument("semi-Markov matrix: sample count mismatch");
  const auto n = q.front().rows();
  if (n < 1 || q.front().cols() != n) throw InvalidArgument("semi-Markov matrix: samples must be square");
  RVec mass = RVec::Zero(n);
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q[k].rows() != n || q[k].cols() != n) throw InvalidArgument("semi-Markov matrix: size mismatch");
    if (!q[k].allFinite()) throw InvalidArgument("semi-Markov matrix: non-finite entry");
    if (q[k].minCoeff() < -tol) {
      std::ostringstream os;
      os << "semi-Markov matrix: negative entry at t=" << grid.time(static_cast<int>(k));
      throw ValidationError(os.str());
    }
    const double w = (k == 0 || k + 1 == q.size()) ? 0.5 : 1.0;
    mass += w * grid.dt * q[k].colwise().sum().transpose();
  }
  if (mass.maxCoeff() > 1.0 + tol + 10.0 * grid.dt * grid.dt) {
    std::ostringstream os;
    os << "semi-Markov matrix: column mass " << mass.maxCoeff() << " exceeds 1";
    throw ValidationError(os.str());
  }
  return SemiMarkovMatrix{grid, std::move(q)};
}

SemiMarkovMatrix ClassicalMarkovModel::semi_markov(const TimeGrid& grid) const {
  const auto n = pi.rows();
  if (pi.cols() != n || rates.size() != n) throw InvalidArgument("Markov model: size mismatch");
  if (pi.minCoeff() < 0.0 || ((pi.colwise().sum().array() - 1.0).abs() > 1e-12).any()) {
    throw InvalidArgument("Markov model: pi must be column stochastic");
  }
  if (rates.minCoeff() <= 0.0) throw InvalidArgument("Markov model: rates must be positive");
  std::vector<RMat> q;
  q.reserve(grid.size());
  for (int k = 0; k <= grid.steps; ++k) {
    const RVec f = (rates.array() * (-rates.array() * grid.time(k)).exp()).matrix();
    q.push_back(pi * f.asDiagonal());
  }
  return SemiMarkovMatrix::validate(grid, std::move(q));
}

RMat ClassicalMarkovModel::generator() const {
  RMat w = pi * rates.asDiagonal();
  w.diagonal() -= rates;
  return w;
}

WaitingSurvival classical_waiting_and_survival(const SemiMarkovMatrix& q, double tol) {
  WaitingSurvival out;
  const auto n = q.states();
  const double dt = q.grid.dt;
  out.f.reserve(q.q.size());
  out.g.reserve(q.q.size());
  for (const auto& qk : q.q) out.f.push_back(qk.colwise().sum().transpose());
  out.g.push_back(RVec::Ones(n));
  for (std::size_t k = 1; k < q.q.size(); ++k) {
    RVec next = out.g.back() - 0.5 * dt * (out.f[k - 1] + out.f[k]);
    if (next.minCoeff() < -(tol + 10.0 * dt * dt)) {
      std::ostringstream os;
      os << "classical survival probability negative at t=" << q.grid.time(static_cast<int>(k));
      throw ValidationError(os.str());
    }
    out.g.push_back(std::move(next));
  }
  out.defect = out.g.back();
  return out;
}

StochasticMatrixFamily stochastic_propagator(const SemiMarkovMatrix& q, double tail_tol, int n_max) {
  if (n_max < 1) throw InvalidArgument("stochastic_propagator: n_max must be >= 1");
  const auto ws = classical_waiting_and_survival(q);
  const double dt = q.grid.dt;
  std::vector<RMat> term(q.q.size());
  for (std::size_t k = 0; k < term.size(); ++k) term[k] = ws.g[k].asDiagonal();
  std::vector<RMat> sum = term;
  StochasticMatrixFamily out;
  out.grid = q.grid;
  bool converged = false;
  for (int i = 1; i <= n_max; ++i) {
    term = kernels::convolve<double>(std::span<const RMat>(term), std::span<const RMat>(q.q), dt);
    double mag = 0.0;
    for (std::size_t k = 0; k < sum.size(); ++k) {
      sum[k] += term[k];
      mag = std::max(mag, term[k].colwise().sum().cwiseAbs().maxCoeff());
    }
    out.terms = i;
    if (mag < tail_tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error("stochastic_propagator: series did not converge within " + std::to_string(n_max) + " terms");
  }
  out.t = std::move(sum);
  finish(out);
  return out;
}

RMat classical_kernel_laplace(const SemiMarkovMatrix& q, double s) {
  if (!(s > 0.0)) throw InvalidArgument("classical_kernel_laplace: s must be positive");
  const auto ws = classical_waiting_and_survival(q);
  const auto n = q.states();
  RMat qt = RMat::Zero(n, n);
  RVec gt = RVec::Zero(n);
  const auto& grid = q.grid;
  for (int k = 0; k <= grid.steps; ++k) {
    const double w = (k == 0 || k == grid.steps ? 0.5 : 1.0) * grid.dt * std::exp(-s * grid.time(k));
    qt += w * q.q[static_cast<std::size_t>(k)];
    gt += w * ws.g[static_cast<std::size_t>(k)];
  }
  if (gt.minCoeff() <= 0.0) throw ValidationError("classical_kernel_laplace: vanishing g~(s)");
  return qt * gt.cwiseInverse().asDiagonal();
}

ClassicalRates classical_rates(const SemiMarkovMatrix& q) {
  // w = delta(t) q(0) + v with v + v * diag(dg/dt) = dq/dt - q(0) diag(dg/dt)
  const auto ws = classical_waiting_and_survival(q);
  const double dt = q.grid.dt;
  std::vector<RMat> gm(ws.g.size());
  for (std::size_t k = 0; k < gm.size(); ++k) gm[k] = ws.g[k].asDiagonal();
  const auto dg = derivative(gm, dt);
  const auto dq = derivative(q.q, dt);
  ClassicalRates out;
  out.singular = q.q[0];
  std::vector<RMat> r(dq.size());
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = dq[k] - out.singular * dg[k];
  out.regular = kernels::volterra_second_kind<double>(std::span<const RMat>(dg), std::span<const RMat>(r), dt,
                                                      kernels::Side::left);
  return out;
}

ResidualReport verify_classical_master_equation(const StochasticMatrixFamily& t, const SemiMarkovMatrix& q) {
  if (!(t.grid == q.grid)) throw InvalidArgument("verify_classical_master_equation: grid mismatch");
  const auto rates = classical_rates(q);
  // gain minus loss: K = w - diag(column sums of w)
  const auto to_kernel = [](const RMat& w) {
    RMat k = w;
    k.diagonal() -= w.colwise().sum().transpose();
    return k;
  };
  const RMat k0 = to_kernel(rates.singular);
  std::vector<RMat> kr(rates.regular.size());
  for (std::size_t k = 0; k < kr.size(); ++k) kr[k] = to_kernel(rates.regular[k]);
  const double dt = t.grid.dt;
  const auto memory = kernels::convolve<double>(std::span<const RMat>(kr), std::span<const RMat>(t.t), dt);
  const auto dtm = derivative(t.t, dt);
  ResidualReport rep;
  rep.dt = dt;
  for (std::size_t k = 0; k < t.t.size(); ++k) {
    const double v = (dtm[k] - k0 * t.t[k] - memory[k]).cwiseAbs().maxCoeff();
    if (v > rep.max_residual) {
      rep.max_residual = v;
      rep.worst_index = static_cast<int>(k);
    }
  }
  const auto d3 = derivative(derivative(dtm, dt), dt);
  double m3 = 0.0;
  for (const auto& m : d3) m3 = std::max(m3, m.cwiseAbs().maxCoeff());
  rep.scale = 1.0 + m3;
  return rep;
}

SemiMarkovMap embed_commutative(const SemiMarkovMatrix& q) {
  const int d = q.states();
  const auto idx = [d](int i) { return static_cast<Eigen::Index>(i + i * d); };
  std::vector<Superoperator> out;
  out.reserve(q.q.size());
  for (const auto& qk : q.q) {
    Mat m = Mat::Zero(d * d, d * d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(idx(i), idx(j)) = qk(i, j);
    out.emplace_back(std::move(m));
  }
  return SemiMarkovMap::validate(SuperoperatorFamily(q.grid, std::move(out)));
}

StochasticMatrixFamily extract_diagonal(const SuperoperatorFamily& lambda) {
  const int d = lambda.dim();
  StochasticMatrixFamily out;
  out.grid = lambda.grid();
  out.t.reserve(lambda.size());
  for (const auto& s : lambda.values()) {
    const Mat& m = s.matrix();
    RMat t(d, d);
    for (int j = 0; j < d; ++j) {
      const auto col = static_cast<Eigen::Index>(j + j * d);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
          const complex v = m(a + b * d, col);
          if (a == b) {
            t(a, j) = v.real();
            out.off_diagonal_leak = std::max(out.off_diagonal_leak, std::abs(v.imag()));
          } else {
            out.off_diagonal_leak = std::max(out.off_diagonal_leak, std::abs(v));
          }
        }
    }
    out.t.push_back(std::move(t));
  }
  finish(out);
  return out;
}

}  // namespace smq
