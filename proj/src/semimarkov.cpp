#include "smq/semimarkov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "smq/error.hpp"
#include "smq/kernels.hpp"

namespace smq {

namespace {

std::string at_time(const char* what, double t, double value) {
  std::ostringstream os;
  os << what << " at t=" << t << " (" << value << ")";
  return os.str();
}

void require_compatible(const SuperoperatorFamily& a, const SuperoperatorFamily& b, const char* who) {
  if (!(a.grid() == b.grid())) throw InvalidArgument(std::string(who) + ": grid mismatch");
  if (a.dim() != b.dim()) throw InvalidArgument(std::string(who) + ": dimension mismatch");
}

// Throws unless every sample is CPTP within tol.
void require_channels(const SuperoperatorFamily& s, double tol, const char* who) {
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double t = s.grid().time(static_cast<int>(k));
    const double mc = min_choi_eigenvalue(s[k]);
    if (mc < -tol) throw ValidationError(at_time((std::string(who) + " is not CP").c_str(), t, mc));
    const double td = trace_defect(s[k]);
    if (td > tol) {
      throw ValidationError(at_time((std::string(who) + " is not trace preserving").c_str(), t, td));
    }
  }
}

Superoperator z_part(const Superoperator& w) { return anticommutator_half(dual_identity(w)); }

}  // namespace

SemiMarkovMap SemiMarkovMap::validate(SuperoperatorFamily q, double tol) {
  if (q.size() == 0) throw InvalidArgument("semi-Markov map: empty family");
  SemiMarkovMap out;
  out.min_choi = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double mc = min_choi_eigenvalue(q[k]);
    out.min_choi = std::min(out.min_choi, mc);
    if (mc < -tol) {
      throw ValidationError(at_time("semi-Markov map: Q_t is not CP", q.grid().time(static_cast<int>(k)), mc));
    }
  }
  const double dt = q.grid().dt;
  const double psd_tol = tol + 10.0 * dt * dt;
  const int d = q.dim();
  Mat cum = Mat::Zero(d, d);
  Mat prev = dual_identity(q[0]);
  for (std::size_t k = 1; k < q.size(); ++k) {
    const Mat f = dual_identity(q[k]);
    cum += 0.5 * dt * (prev + f);
    prev = f;
    const double deficit = min_eigenvalue(hermitian_part(Mat::Identity(d, d) - cum));
    if (deficit < -psd_tol) {
      throw ValidationError(at_time("semi-Markov map: int_0^t Q^dagger[1] exceeds 1",
                                    q.grid().time(static_cast<int>(k)), deficit));
    }
  }
  out.integrated_excess = max_eigenvalue(hermitian_part(cum)) - 1.0;
  out.q = std::move(q);
  out.validated = true;
  return out;
}

OperatorFamily waiting_time_operator(const SemiMarkovMap& q) {
  std::vector<Mat> f;
  f.reserve(q.q.size());
  for (const auto& s : q.q.values()) {
    Mat m = hermitian_part(dual_identity(s));
    if (min_eigenvalue(m) < -1e-10) throw ValidationError("waiting-time operator is not PSD: Q is not CP");
    f.push_back(std::move(m));
  }
  return OperatorFamily(q.grid(), std::move(f));
}

OperatorFamily survival_operator(const OperatorFamily& f, double psd_tol) {
  const double dt = f.grid().dt;
  const int d = f.dim();
  std::vector<Mat> g;
  g.reserve(f.size());
  g.push_back(Mat::Identity(d, d));
  for (std::size_t k = 1; k < f.size(); ++k) {
    Mat next = g.back() - 0.5 * dt * (f[k - 1] + f[k]);
    next = hermitian_part(next);
    const double m = min_eigenvalue(next);
    if (m < -psd_tol) {
      throw ValidationError(at_time("survival operator loses positivity", f.grid().time(static_cast<int>(k)), m));
    }
    g.push_back(std::move(next));
  }
  return OperatorFamily(f.grid(), std::move(g));
}

SuperoperatorFamily canonical_N(const OperatorFamily& g, double psd_tol) {
  std::vector<Superoperator> n;
  n.reserve(g.size());
  for (const auto& gk : g.values()) n.push_back(Superoperator::conjugation(herm_sqrt(gk, psd_tol)));
  return SuperoperatorFamily(g.grid(), std::move(n));
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::canonical: return "canonical";
    case Provenance::gauged: return "gauged";
    case Provenance::collision: return "collision";
    case Provenance::markov: return "markov";
  }
  return "unknown";
}

double normalization_residual(const SuperoperatorFamily& n, const SuperoperatorFamily& q) {
  require_compatible(n, q, "normalization_residual");
  const auto dn = differentiate(n);
  double r = 0.0;
  for (std::size_t k = 0; k < n.size(); ++k) {
    r = std::max(r, max_abs(dual_identity(q[k]) + dual_identity(dn[k])));
  }
  return r;
}

LegitimatePair make_pair(SuperoperatorFamily n, SemiMarkovMap q, Provenance provenance,
                         std::string detail, double tol) {
  require_compatible(n, q.q, "legitimate pair");
  if (!q.validated) q = SemiMarkovMap::validate(std::move(q.q), tol);
  if (max_abs(n[0].matrix() - Superoperator::identity(n.dim()).matrix()) > 1e-12) {
    throw ValidationError("legitimate pair: N_0 is not the identity map");
  }
  for (std::size_t k = 0; k < n.size(); ++k) {
    const double mc = min_choi_eigenvalue(n[k]);
    if (mc < -tol) {
      throw ValidationError(at_time("legitimate pair: N_t is not CP", n.grid().time(static_cast<int>(k)), mc));
    }
  }
  const double dt = n.grid().dt;
  const double res = normalization_residual(n, q.q);
  if (res > 10.0 * dt * dt + tol) {
    std::ostringstream os;
    os << "legitimate pair: normalization residual " << res << " exceeds 10 dt^2 = " << 10.0 * dt * dt;
    throw ValidationError(os.str());
  }
  LegitimatePair p;
  p.n = std::move(n);
  p.q = std::move(q);
  p.provenance = provenance;
  p.detail = std::move(detail);
  p.normalization_residual = res;
  return p;
}

LegitimatePair canonical_pair(const SemiMarkovMap& q) {
  const double dt = q.grid().dt;
  const auto g = survival_operator(waiting_time_operator(q), 1e-10 + 10.0 * dt * dt);
  return make_pair(canonical_N(g, 1e-10 + 10.0 * dt * dt), q, Provenance::canonical);
}

LegitimatePair gauge_transform(const LegitimatePair& pair, const SuperoperatorFamily& g,
                               const SuperoperatorFamily& f, double tol) {
  require_compatible(pair.n, g, "gauge_transform");
  require_compatible(pair.n, f, "gauge_transform");
  if (max_abs(g[0].matrix() - Superoperator::identity(g.dim()).matrix()) > tol) {
    throw ValidationError("gauge_transform: G_0 is not the identity map");
  }
  require_channels(g, tol, "gauge_transform: G_t");
  require_channels(f, tol, "gauge_transform: F_t");
  auto q = SemiMarkovMap::validate(compose(f, pair.q.q), tol);
  return make_pair(compose(g, pair.n), std::move(q), Provenance::gauged,
                   pair.detail.empty() ? std::string("gauge of ") + to_string(pair.provenance)
                                       : pair.detail,
                   tol);
}

LegitimatePair collision_pair(const WaitingDensity& f, const SuperoperatorFamily& g,
                              const SuperoperatorFamily& channel, double tol) {
  require_compatible(g, channel, "collision_pair");
  const auto& grid = g.grid();
  if (max_abs(g[0].matrix() - Superoperator::identity(g.dim()).matrix()) > tol) {
    throw ValidationError("collision_pair: G_0 is not the identity map");
  }
  require_channels(g, tol, "collision_pair: G_t");
  require_channels(channel, tol, "collision_pair: F_t");
  const auto fs = f.sample(grid);
  const auto cum = cumulative_integral(fs, grid.dt);
  std::vector<Superoperator> n, q;
  n.reserve(grid.size());
  q.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    n.push_back(g[k] * (1.0 - cum[k]));
    q.push_back(channel[k] * fs[k]);
  }
  auto qm = SemiMarkovMap::validate(SuperoperatorFamily(grid, std::move(q)), tol);
  return make_pair(SuperoperatorFamily(grid, std::move(n)), std::move(qm), Provenance::collision,
                   f.describe(), tol);
}

namespace {

void check_markov_inputs(const Superoperator& phi, const Mat& gamma, double tol) {
  if (gamma.rows() != phi.dim() || gamma.cols() != phi.dim()) {
    throw InvalidArgument("markov_pair: Gamma dimension does not match the channel");
  }
  if (!is_hermitian(gamma, 1e-12)) throw InvalidArgument("markov_pair: Gamma is not Hermitian");
  const double m = min_eigenvalue(gamma);
  if (m < -1e-12) throw ValidationError(at_time("markov_pair: Gamma is not PSD", 0.0, m));
  if (min_choi_eigenvalue(phi) < -tol) throw ValidationError("markov_pair: Phi is not CP");
  if (trace_defect(phi) > tol) throw ValidationError("markov_pair: Phi is not trace preserving");
}

MarkovPair assemble_markov(const Superoperator& phi, const Mat& gamma, const Mat& h,
                           const TimeGrid& grid, double tol, bool coherent) {
  const Mat sg = herm_sqrt(gamma);
  const Superoperator w = phi * Superoperator::conjugation(sg);
  if (max_abs(dual_identity(w) - gamma) > 1e-10 * std::max(1.0, max_abs(gamma))) {
    throw ValidationError("markov_pair: W^dagger[1] != Gamma");
  }
  // Q_t = W o U_t o N_t with N_t = e^{-Gamma t/2} . e^{-Gamma t/2}; U_t = 1 when H = 0
  auto qf = SuperoperatorFamily::generate(grid, [&](double t) {
    Superoperator nt = Superoperator::conjugation(herm_exp(gamma, -0.5 * t));
    if (coherent) nt = Superoperator::conjugation(herm_unitary(h, t)) * nt;
    return w * nt;
  });
  auto q = SemiMarkovMap::validate(std::move(qf), tol);
  const double psd_tol = tol + 10.0 * grid.dt * grid.dt;
  auto n = canonical_N(survival_operator(waiting_time_operator(q), psd_tol), psd_tol);
  if (coherent) {
    n = compose(SuperoperatorFamily::generate(
                    grid, [&](double t) { return Superoperator::conjugation(herm_unitary(h, t)); }),
                n);
  }
  Superoperator gen = w - anticommutator_half(gamma);
  if (coherent) gen += commutator_generator(h);
  MarkovPair out{make_pair(std::move(n), std::move(q), Provenance::markov,
                           coherent ? "markov with hamiltonian" : "markov", tol),
                 w, gen};
  return out;
}

}  // namespace

MarkovPair markov_pair(const Superoperator& phi, const Mat& gamma, const TimeGrid& grid, double tol) {
  check_markov_inputs(phi, gamma, tol);
  return assemble_markov(phi, gamma, Mat(), grid, tol, false);
}

MarkovPair hamiltonian_markov_pair(const Superoperator& phi, const Mat& gamma, const Mat& h,
                                   const TimeGrid& grid, double tol) {
  check_markov_inputs(phi, gamma, tol);
  if (h.rows() != gamma.rows() || h.cols() != gamma.cols()) {
    throw InvalidArgument("hamiltonian_markov_pair: H dimension mismatch");
  }
  if (!is_hermitian(h, 1e-12)) throw InvalidArgument("hamiltonian_markov_pair: H is not Hermitian");
  const double comm = max_abs(h * gamma - gamma * h);
  if (comm > 1e-12) {
    std::ostringstream os;
    os << "hamiltonian_markov_pair: [H, Gamma] != 0 (max entry " << comm << ")";
    throw ValidationError(os.str());
  }
  return assemble_markov(phi, gamma, h, grid, tol, true);
}

Superoperator RateMap::laplace(double s) const { return singular + laplace_eval(regular, s).value; }

RateMap rate_map_W(const SuperoperatorFamily& n, const SuperoperatorFamily& q) {
  require_compatible(n, q, "rate_map_W");
  const double dt = n.grid().dt;
  const auto dn = differentiate(n).matrices();
  const auto dq = differentiate(q).matrices();
  const Mat q0 = q[0].matrix();
  std::vector<Mat> r(dn.size());
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = dq[k] - q0 * dn[k];
  auto v = kernels::volterra_second_kind<complex>(std::span<const Mat>(dn), std::span<const Mat>(r), dt,
                                                  kernels::Side::left);
  RateMap w;
  w.singular = q[0];
  w.regular = SuperoperatorFamily::from_matrices(n.grid(), std::move(v));
  w.min_choi_regular = check_family(w.regular).min_choi;
  return w;
}

RateMap rate_map_W(const SemiMarkovMap& q, const OperatorFamily& g, double eps) {
  if (!(g.grid() == q.grid())) throw InvalidArgument("rate_map_W: grid mismatch");
  std::size_t thin = 0;
  for (const auto& gk : g.values()) {
    const auto e = herm_eig(gk).values;
    if (e.minCoeff() < eps * std::max(e.maxCoeff(), 0.0)) ++thin;
  }
  const double psd_tol = 1e-10 + 10.0 * g.grid().dt * g.grid().dt;
  RateMap w = rate_map_W(canonical_N(g, psd_tol), q.q);
  w.singular_fraction = static_cast<double>(thin) / static_cast<double>(g.size());
  if (thin > 0) {
    std::ostringstream os;
    os << "survival operator is numerically singular on " << 100.0 * w.singular_fraction
       << "% of the grid; W is dominated by regularization there";
    w.warnings.push_back(os.str());
  }
  return w;
}

MemoryKernel kernel_from_rate_map(const RateMap& w) {
  MemoryKernel k;
  k.singular = w.singular - z_part(w.singular);
  std::vector<Superoperator> reg;
  reg.reserve(w.regular.size());
  for (const auto& v : w.regular.values()) reg.push_back(v - z_part(v));
  k.regular = SuperoperatorFamily(w.regular.grid(), std::move(reg));
  return k;
}

MemoryKernel pair_kernel(const LegitimatePair& pair, Order order) {
  const auto& grid = pair.grid();
  const auto dn = differentiate(pair.n).matrices();
  const auto ddn = second_derivative(pair.n).matrices();
  const auto dq = differentiate(pair.q.q).matrices();
  const Mat s0 = pair.q.q[0].matrix() + dn[0];
  const bool left = order == Order::left;
  std::vector<Mat> r(dn.size());
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = dq[k] + ddn[k] - (left ? Mat(s0 * dn[k]) : Mat(dn[k] * s0));
  auto v = kernels::volterra_second_kind<complex>(std::span<const Mat>(dn), std::span<const Mat>(r), grid.dt,
                                                  left ? kernels::Side::left : kernels::Side::right);
  // the exact kernel annihilates the trace; drop the finite-difference drift
  MemoryKernel k;
  const Superoperator s0k(s0);
  k.singular = s0k - z_part(s0k);
  std::vector<Superoperator> reg;
  reg.reserve(v.size());
  for (auto& m : v) {
    const Superoperator x(std::move(m));
    reg.push_back(x - z_part(x));
  }
  k.regular = SuperoperatorFamily(grid, std::move(reg));
  return k;
}

KernelLaplace kernel_laplace(const LegitimatePair& pair, double s, Order order) {
  const Mat nt = laplace_eval(pair.n, s).value.matrix();
  const Mat qt = laplace_eval(pair.q.q, s).value.matrix();
  const auto sv = Eigen::JacobiSVD<Mat>(nt).singularValues();
  KernelLaplace out;
  out.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(out.condition < 1e12)) {
    std::ostringstream os;
    os << "kernel_laplace: Laplace transform of N is singular at s=" << s << " (condition " << out.condition << ")";
    throw ValidationError(os.str());
  }
  const Mat id = Mat::Identity(nt.rows(), nt.cols());
  const Mat a = qt - id;
  Mat k = order == Order::left ? Mat(Eigen::PartialPivLU<Mat>(nt.transpose()).solve(a.transpose()).transpose())
                               : Mat(Eigen::PartialPivLU<Mat>(nt).solve(a));
  k += s * id;
  out.value = Superoperator(std::move(k));
  return out;
}

Recognition recognize_generalized_semi_markov(const LegitimatePair& pair, double tol, double eps) {
  const double dt = pair.grid().dt;
  const auto g = survival_operator(waiting_time_operator(pair.q), 1e-10 + 10.0 * dt * dt);
  Recognition rec;
  rec.min_choi = std::numeric_limits<double>::infinity();
  std::vector<Superoperator> gs;
  gs.reserve(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto e = herm_eig(g[k]).values;
    const double cut = eps * std::max(e.maxCoeff(), 0.0);
    if (e.minCoeff() <= cut) rec.regularized = true;
    Superoperator gk = pair.n[k] * Superoperator::conjugation(herm_pinv_sqrt(g[k], cut));
    rec.min_choi = std::min(rec.min_choi, min_choi_eigenvalue(gk));
    rec.max_trace_defect = std::max(rec.max_trace_defect, trace_defect(gk));
    gs.push_back(std::move(gk));
  }
  rec.identity_defect = max_abs(gs[0].matrix() - Superoperator::identity(pair.dim()).matrix());
  rec.generalized = rec.min_choi >= -tol && rec.max_trace_defect <= tol && rec.identity_defect <= tol;
  rec.g = SuperoperatorFamily(g.grid(), std::move(gs));
  return rec;
}

SemiMarkovMap convex_mix(const std::vector<SemiMarkovMap>& maps, const std::vector<double>& p) {
  if (maps.empty() || maps.size() != p.size()) throw InvalidArgument("convex_mix: weight count mismatch");
  double total = 0.0;
  for (double w : p) {
    if (w < 0.0 || !std::isfinite(w)) throw InvalidArgument("convex_mix: weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("convex_mix: weights must sum to 1");
  SuperoperatorFamily acc = maps[0].q * p[0];
  for (std::size_t i = 1; i < maps.size(); ++i) {
    require_compatible(acc, maps[i].q, "convex_mix");
    acc = acc + maps[i].q * p[i];
  }
  return SemiMarkovMap::validate(std::move(acc));
}

}  // namespace smq
