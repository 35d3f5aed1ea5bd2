#include "smq/models.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "smq/error.hpp"

namespace smq::models {

namespace {

const complex I1{0.0, 1.0};

void check_mixture(std::size_t n, const std::vector<double>& p, const std::vector<WaitingDensity>& f,
                   const char* who) {
  if (p.size() != n || f.size() != n) {
    throw InvalidArgument(std::string(who) + ": expected " + std::to_string(n) + " weights and densities");
  }
  double total = 0.0;
  for (double w : p) {
    if (w < 0.0 || !std::isfinite(w)) throw InvalidArgument(std::string(who) + ": negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument(std::string(who) + ": weights must sum to 1");
}

}  // namespace

std::vector<Mat> pauli_matrices() { return {pauli(0), pauli(1), pauli(2), pauli(3)}; }

std::vector<Mat> weyl_matrices(int d) {
  if (d < 2) throw InvalidArgument("weyl_matrices: d must be >= 2");
  // omega^{d-j} is stored as conj(omega^j) so that the table is exactly conjugate-symmetric
  std::vector<complex> omega(static_cast<std::size_t>(d));
  for (int j = 0; 2 * j <= d; ++j) {
    omega[static_cast<std::size_t>(j)] = j == 0       ? complex{1.0, 0.0}
                                         : 2 * j == d ? complex{-1.0, 0.0}
                                                      : std::polar(1.0, 2.0 * std::numbers::pi * j / d);
    if (j > 0 && 2 * j != d) omega[static_cast<std::size_t>(d - j)] = std::conj(omega[static_cast<std::size_t>(j)]);
  }
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(d * d));
  for (int k = 0; k < d; ++k)
    for (int l = 0; l < d; ++l) {
      Mat u = Mat::Zero(d, d);
      for (int m = 0; m < d; ++m) u(m, (m + l) % d) = omega[static_cast<std::size_t>((m * k) % d)];
      out.push_back(std::move(u));
    }
  return out;
}

std::vector<Mat> gellmann_matrices() {
  std::vector<Mat> l(9, Mat::Zero(3, 3));
  l[0] = Mat::Identity(3, 3);
  l[1](0, 1) = l[1](1, 0) = 1.0;
  l[2](0, 1) = -I1;
  l[2](1, 0) = I1;
  l[3](0, 0) = 1.0;
  l[3](1, 1) = -1.0;
  l[4](0, 2) = l[4](2, 0) = 1.0;
  l[5](0, 2) = -I1;
  l[5](2, 0) = I1;
  l[6](1, 2) = l[6](2, 1) = 1.0;
  l[7](1, 2) = -I1;
  l[7](2, 1) = I1;
  const double s = 1.0 / std::sqrt(3.0);
  l[8](0, 0) = l[8](1, 1) = s;
  l[8](2, 2) = -2.0 * s;
  return l;
}

SemiMarkovMap operator_mixture_semimarkov(const std::vector<Mat>& ops, const std::vector<double>& p,
                                          const std::vector<WaitingDensity>& f, const TimeGrid& grid) {
  check_mixture(ops.size(), p, f, "semi-Markov mixture");
  std::vector<Superoperator> conj;
  conj.reserve(ops.size());
  for (const auto& a : ops) conj.push_back(Superoperator::conjugation(a));
  std::vector<std::vector<double>> samples;
  samples.reserve(f.size());
  for (const auto& w : f) samples.push_back(w.sample(grid));
  const int d = static_cast<int>(ops.front().rows());
  std::vector<Superoperator> q;
  q.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Superoperator acc = Superoperator::zero(d);
    for (std::size_t a = 0; a < ops.size(); ++a) {
      if (p[a] != 0.0) acc += conj[a] * (p[a] * samples[a][k]);
    }
    q.push_back(std::move(acc));
  }
  return SemiMarkovMap::validate(SuperoperatorFamily(grid, std::move(q)));
}

SemiMarkovMap pauli_semimarkov(const std::vector<double>& p, const std::vector<WaitingDensity>& f,
                               const TimeGrid& grid) {
  return operator_mixture_semimarkov(pauli_matrices(), p, f, grid);
}

SemiMarkovMap weyl_semimarkov(int d, const std::vector<double>& p, const std::vector<WaitingDensity>& f,
                              const TimeGrid& grid) {
  return operator_mixture_semimarkov(weyl_matrices(d), p, f, grid);
}

SemiMarkovMap gellmann_semimarkov(const std::vector<double>& p, const std::vector<WaitingDensity>& f,
                                  const TimeGrid& grid) {
  return operator_mixture_semimarkov(gellmann_matrices(), p, f, grid);
}

Superoperator dissipator(const Mat& a) {
  return Superoperator::conjugation(a) - anticommutator_half(a.adjoint() * a);
}

Superoperator gksl_superoperator(const GKSLGenerator& gen) {
  if (gen.ops.size() != gen.rates.size()) throw InvalidArgument("GKSL generator: ops and rates differ in length");
  const auto d = gen.h_eff.rows();
  if (d < 1 || gen.h_eff.cols() != d) throw InvalidArgument("GKSL generator: H_eff must be square");
  if (!is_hermitian(gen.h_eff, 1e-12)) throw InvalidArgument("GKSL generator: H_eff is not Hermitian");
  Superoperator l = commutator_generator(gen.h_eff);
  for (std::size_t a = 0; a < gen.ops.size(); ++a) {
    if (gen.rates[a] < 0.0) throw InvalidArgument("GKSL generator: negative rate");
    if (gen.ops[a].rows() != d || gen.ops[a].cols() != d) {
      throw InvalidArgument("GKSL generator: noise operator dimension mismatch");
    }
    l += dissipator(gen.ops[a]) * gen.rates[a];
  }
  return l;
}

const char* to_string(ProbeKind kind) {
  return kind == ProbeKind::barnett_stenholm ? "barnett_stenholm" : "lidar_shabani";
}

MemoryKernel probe_kernel(ProbeKind kind, const WaitingDensity& k, const GKSLGenerator& gen, const TimeGrid& grid) {
  const Superoperator l = gksl_superoperator(gen);
  const auto ks = k.sample(grid);
  MemoryKernel out;
  std::vector<Superoperator> reg;
  reg.reserve(grid.size());
  for (int i = 0; i <= grid.steps; ++i) {
    const double kv = ks[static_cast<std::size_t>(i)];
    if (kind == ProbeKind::barnett_stenholm) reg.push_back(l * kv);
    else reg.push_back((l * expm(l * grid.time(i))) * kv);
  }
  out.regular = SuperoperatorFamily(grid, std::move(reg));
  return out;
}

GKSLGenerator damped_qubit(double damping, double omega) {
  Mat lower = Mat::Zero(2, 2);
  lower(0, 1) = 1.0;
  return GKSLGenerator{omega * pauli(3), {lower}, {damping}};
}

std::vector<ProbePoint> probe_scan(ProbeKind kind, int memory_shape, const std::vector<double>& memory_rates,
                                   const std::vector<double>& damping_rates, double omega, const TimeGrid& grid) {
  std::vector<ProbePoint> pts;
  for (double g : memory_rates)
    for (double r : damping_rates) pts.push_back({g, r, 0.0, 0.0});
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pts.size()); ++i) {
    auto& pt = pts[static_cast<std::size_t>(i)];
    const auto kernel =
        probe_kernel(kind, WaitingDensity::erlang(memory_shape, pt.memory_rate), damped_qubit(pt.damping_rate, omega), grid);
    const auto lam = propagate_with_kernel(kernel, grid);
    const auto c = check_family(lam);
    pt.min_choi = c.min_choi;
    pt.time_of_min = grid.time(c.worst_choi_index);
  }
  return pts;
}

MixtureParams default_pauli() {
  return {{0.1, 0.4, 0.3, 0.2},
          {WaitingDensity::exponential(1.0), WaitingDensity::mixture({{0.5, 0.5}, {0.5, 2.0}}),
           WaitingDensity::exponential(1.5), WaitingDensity::exponential(0.8)}};
}

MixtureParams default_weyl3() {
  MixtureParams m;
  double total = 0.0;
  for (int a = 0; a < 9; ++a) total += 1.0 + 0.1 * a;
  for (int a = 0; a < 9; ++a) {
    m.p.push_back((1.0 + 0.1 * a) / total);
    m.f.push_back(WaitingDensity::exponential(0.5 + 0.1 * a));
  }
  return m;
}

MixtureParams default_gellmann() {
  MixtureParams m;
  for (int a = 0; a < 9; ++a) {
    m.p.push_back(1.0 / 9.0);
    m.f.push_back(WaitingDensity::exponential(0.5 + 0.15 * a));
  }
  return m;
}

Superoperator default_collision_gauge_generator() {
  Mat lower = Mat::Zero(2, 2);
  lower(0, 1) = 1.0;
  return gksl_superoperator(GKSLGenerator{0.8 * pauli(1), {lower}, {0.3}});
}

Superoperator default_collision_channel() {
  return Superoperator::conjugation(std::sqrt(0.7) * pauli(1)) + Superoperator::conjugation(std::sqrt(0.3) * pauli(3));
}

WaitingDensity default_collision_density() { return WaitingDensity::mixture({{0.6, 1.0}, {0.4, 2.5}}); }

LegitimatePair default_collision_pair(const TimeGrid& grid) {
  const Superoperator lg = default_collision_gauge_generator();
  const auto g = SuperoperatorFamily::generate(grid, [&](double t) { return expm(lg * t); });
  const auto f = SuperoperatorFamily::constant(grid, default_collision_channel());
  return collision_pair(default_collision_density(), g, f);
}

MarkovParams default_markov() {
  Mat k0 = Mat::Zero(2, 2), k1 = Mat::Zero(2, 2);
  k0(0, 0) = 1.0;
  k0(1, 1) = std::sqrt(0.4);
  k1(0, 1) = std::sqrt(0.6);
  Mat gamma(2, 2);
  gamma << 1.0, 0.3, 0.3, 0.6;
  return {superop_from_kraus({k0, k1}), gamma};
}

MarkovParams scalar_markov(double gamma) {
  return {Superoperator::conjugation(pauli(1)), gamma * Mat::Identity(2, 2)};
}

}  // namespace smq::models
