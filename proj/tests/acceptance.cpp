// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "smq/classical.hpp"
#include "smq/models.hpp"
#include "smq/trajectories.hpp"

using namespace smq;

namespace {

constexpr double kDt = 0.01;
constexpr double kHorizon = 5.0;
constexpr double kCpTol = 1e-6;
constexpr double kTraceTol = 1e-6;
constexpr double kHalvingFactor = 3.0;
constexpr double kRoundoffFloor = 1e-10;  // below this a metric has nothing left to halve
constexpr double kOrder2Factor = 5.0;     // bounds of the form 5 dt^2
constexpr double kEmbeddingTol = 1e-8;
constexpr double kLeftRightTol = 1e-8;
constexpr double kGaugeTol = 1e-12;
constexpr double kRecognizeTol = 1e-8;
constexpr double kQuadratureFactor = 10.0;  // 10 dt^2
constexpr std::size_t kTrajectories = 100000;
constexpr double kStdErrors = 4.0;
constexpr double kPoissonSigmas = 3.0;
constexpr double kProbeTol = -1e-6;
constexpr double kGapTol = 1e-6;

struct Line {
  int id;
  std::string title;
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct NamedPair {
  std::string name;
  LegitimatePair pair;
  bool canonical = false;  // N determined by Q, so W * N = Q defines the rate map
  bool scalar_g = false;
};

std::vector<NamedPair> builtin_pairs(const TimeGrid& grid) {
  const auto p = models::default_pauli();
  const auto w = models::default_weyl3();
  const auto g = models::default_gellmann();
  const auto m = models::default_markov();
  return {
      {"pauli", canonical_pair(models::pauli_semimarkov(p.p, p.f, grid)), true, true},
      {"weyl3", canonical_pair(models::weyl_semimarkov(3, w.p, w.f, grid)), true, true},
      {"gellmann", canonical_pair(models::gellmann_semimarkov(g.p, g.f, grid)), true, false},
      {"collision", models::default_collision_pair(grid), false, false},
      {"markov", markov_pair(m.phi, m.gamma, grid).pair, true, false},
  };
}

Line criterion1() {
  std::string detail;
  bool pass = true;
  const auto coarse = builtin_pairs(TimeGrid::over(kHorizon, kDt));
  const auto fine = builtin_pairs(TimeGrid::over(kHorizon, kDt / 2.0));
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    const auto a = build_map(coarse[i].pair.n, coarse[i].pair.q.q).diagnostics;
    const auto b = build_map(fine[i].pair.n, fine[i].pair.q.q).diagnostics;
    const double neg_a = std::max(0.0, -a.min_choi), neg_b = std::max(0.0, -b.min_choi);
    const auto halves = [](double x, double y) {
      return (x <= kRoundoffFloor && y <= kRoundoffFloor) || y * kHalvingFactor <= x;
    };
    const bool ok = a.min_choi >= -kCpTol && a.max_trace_defect <= kTraceTol && halves(neg_a, neg_b) &&
                    halves(a.max_trace_defect, b.max_trace_defect);
    pass = pass && ok;
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s%s: minChoi %.1e->%.1e defect %.1e->%.1e", detail.empty() ? "" : "; ",
                  coarse[i].name.c_str(), a.min_choi, b.min_choi, a.max_trace_defect, b.max_trace_defect);
    detail += buf;
  }
  return {1, "CPTP certification", pass, detail};
}

Line criterion2() {
  const auto grid = TimeGrid::over(kHorizon, kDt);
  const double bound = kOrder2Factor * kDt * kDt;
  const auto m = models::default_markov();
  const auto mp = markov_pair(m.phi, m.gamma, grid);
  const auto lam = build_map(mp.pair.n, mp.pair.q.q).lambda;
  const double d1 = max_deviation(lam, SuperoperatorFamily::generate(grid, [&](double t) { return expm(mp.generator * t); }));
  // H is a polynomial in Gamma, so [H, Gamma] = 0
  const Mat h = 0.7 * m.gamma + 0.4 * Mat(m.gamma * m.gamma);
  const auto hp = hamiltonian_markov_pair(m.phi, m.gamma, h, grid);
  const Superoperator lh = mp.generator + commutator_generator(h);
  const double gen_gap = max_abs(hp.generator.matrix() - lh.matrix());
  const auto lam_h = build_map(hp.pair.n, hp.pair.q.q).lambda;
  const double d2 = max_deviation(lam_h, SuperoperatorFamily::generate(grid, [&](double t) { return expm(lh * t); }));
  const bool pass = d1 <= bound && d2 <= bound && gen_gap < 1e-12;
  return {2, "Markov-limit oracle", pass,
          fmt("markov dev %.2e", d1) + fmt(", hamiltonian dev %.2e", d2) + fmt(" (bound %.1e)", bound)};
}

Line criterion3() {
  const auto grid = TimeGrid::over(kHorizon, kDt);
  const double gamma = 0.7;
  RMat flip(2, 2);
  flip << 0.0, 1.0, 1.0, 0.0;
  const ClassicalMarkovModel markov{flip, RVec::Constant(2, gamma)};
  RMat pi(2, 2);
  pi << 0.3, 1.0, 0.7, 0.0;
  std::vector<RMat> q;
  for (int k = 0; k <= grid.steps; ++k) {
    const double t = grid.time(k);
    RVec f(2);
    f << 0.5 * 0.5 * std::exp(-0.5 * t) + 0.5 * 2.0 * std::exp(-2.0 * t), 0.4 * 1.2 * std::exp(-1.2 * t) + 0.6 * 3.0 * std::exp(-3.0 * t);
    q.push_back(pi * f.asDiagonal());
  }
  const std::vector<SemiMarkovMatrix> cases{markov.semi_markov(grid), SemiMarkovMatrix::validate(grid, q)};
  double gap = 0.0;
  std::vector<StochasticMatrixFamily> classical;
  for (const auto& c : cases) {
    const auto pair = canonical_pair(embed_commutative(c));
    const auto diag = extract_diagonal(build_map(pair.n, pair.q.q).lambda);
    classical.push_back(stochastic_propagator(c));
    for (std::size_t k = 0; k < diag.t.size(); ++k) gap = std::max(gap, (diag.t[k] - classical.back().t[k]).cwiseAbs().maxCoeff());
  }
  double oracle = 0.0;
  for (int k = 0; k <= grid.steps; ++k) {
    const double p1 = 0.5 * (1.0 + std::exp(-2.0 * gamma * grid.time(k)));
    RMat e(2, 2);
    e << p1, 1.0 - p1, 1.0 - p1, p1;
    oracle = std::max(oracle, (classical[0].t[static_cast<std::size_t>(k)] - e).cwiseAbs().maxCoeff());
  }
  const double bound = kOrder2Factor * kDt * kDt;
  return {3, "Classical embedding equivalence", gap <= kEmbeddingTol && oracle <= bound,
          fmt("quantum vs classical %.2e", gap) + fmt(" (tol %.0e)", kEmbeddingTol) +
              fmt(", markov vs closed form %.2e", oracle) + fmt(" (bound %.1e)", bound)};
}

Line criterion4() {
  const auto grid = TimeGrid::over(kHorizon, kDt);
  const double bound = kOrder2Factor * kDt * kDt;
  bool pass = true;
  std::string wz, res, lr;
  for (const auto& np : builtin_pairs(grid)) {
    const auto& pair = np.pair;
    const auto lam = build_map(pair.n, pair.q.q).lambda;
    char buf[160];
    if (np.canonical) {
      const auto g = survival_operator(waiting_time_operator(pair.q), 1e-10 + 10.0 * kDt * kDt);
      const double d = max_deviation(propagate_with_kernel(kernel_from_rate_map(rate_map_W(pair.q, g)), grid), lam);
      pass = pass && d <= bound;
      std::snprintf(buf, sizeof buf, "%s%s %.2e%s", wz.empty() ? "" : ", ", np.name.c_str(), d, d <= bound ? "" : " FAIL");
    } else {
      // gauged pair: N is not fixed by Q, so the kernel comes from K * N = Q + dN/dt
      const double d = max_deviation(propagate_with_kernel(pair_kernel(pair), grid), lam);
      pass = pass && d <= bound;
      std::snprintf(buf, sizeof buf, "%s%s(pair kernel) %.2e%s", wz.empty() ? "" : ", ", np.name.c_str(), d, d <= bound ? "" : " FAIL");
    }
    wz += buf;
    const auto r = verify_master_equation(lam, pair_kernel(pair));
    pass = pass && r.within(kOrder2Factor);
    std::snprintf(buf, sizeof buf, "%s%s %.2e/%.2e", res.empty() ? "" : ", ", np.name.c_str(), r.max_residual,
                  kOrder2Factor * kDt * kDt * r.scale);
    res += buf;
    if (np.scalar_g) {
      double worst = 0.0;
      for (double s : {0.5, 1.0, 2.0})
        worst = std::max(worst, max_abs(kernel_laplace(pair, s, Order::left).value.matrix() -
                                        kernel_laplace(pair, s, Order::right).value.matrix()));
      pass = pass && worst <= kLeftRightTol;
      std::snprintf(buf, sizeof buf, "%s%s %.1e", lr.empty() ? "" : ", ", np.name.c_str(), worst);
      lr += buf;
    }
  }
  return {4, "Kernel consistency", pass,
          "rate-map kernel vs build_map [" + wz + "] (bound " + fmt("%.1e", bound) + "); residual/bound [" + res +
              "]; left-right Laplace gap [" + lr + "]"};
}

Line criterion5() {
  const auto grid = TimeGrid::over(kHorizon, kDt);
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  const auto random_channel = [&](int d) {
    std::vector<Mat> a;
    Mat s = Mat::Zero(d, d);
    for (int k = 0; k < 3; ++k) {
      Mat m(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = {nd(rng), nd(rng)};
      a.push_back(m);
      s += m.adjoint() * m;
    }
    const Mat r = herm_pinv_sqrt(s);
    for (auto& m : a) m = m * r;
    return superop_from_kraus(std::span<const Mat>(a));
  };
  double worst = 0.0;
  for (const auto& np : builtin_pairs(grid)) {
    const int d = np.pair.dim();
    const Superoperator c1 = random_channel(d), c2 = random_channel(d);
    const auto f = SuperoperatorFamily::generate(grid, [&](double t) {
      const double w = std::exp(-t);
      return c1 * w + c2 * (1.0 - w);
    });
    const auto gauged = gauge_transform(np.pair, SuperoperatorFamily::constant(grid, Superoperator::identity(d)), f);
    const auto fa = waiting_time_operator(np.pair.q), fb = waiting_time_operator(gauged.q);
    const double tol = 1e-10 + 10.0 * kDt * kDt;
    const auto ga = survival_operator(fa, tol), gb = survival_operator(fb, tol);
    for (std::size_t k = 0; k < grid.size(); ++k)
      worst = std::max({worst, max_abs(fa[k] - fb[k]), max_abs(ga[k] - gb[k])});
  }
  const auto collision = models::default_collision_pair(grid);
  const auto rec = recognize_generalized_semi_markov(collision);
  const Superoperator lg = models::default_collision_gauge_generator();
  double round_trip = 0.0;
  for (int k = 0; k <= grid.steps; ++k)
    round_trip = std::max(round_trip, max_abs(rec.g[static_cast<std::size_t>(k)].matrix() - expm(lg * grid.time(k)).matrix()));
  LegitimatePair broken = collision;
  broken.q = SemiMarkovMap::validate(collision.q.q * 0.5);
  const auto rej = recognize_generalized_semi_markov(broken);
  const bool pass = worst <= kGaugeTol && rec.generalized && round_trip <= kRecognizeTol && !rej.generalized;
  return {5, "Gauge invariance", pass,
          fmt("f,g change under random CPTP gauges %.1e", worst) + fmt(" (tol %.0e)", kGaugeTol) +
              fmt(", collision gauge recovered to %.1e", round_trip) +
              (rej.generalized ? ", broken pair accepted" : fmt(", broken pair rejected (trace defect %.2f)", rej.max_trace_defect))};
}

Line criterion6() {
  const auto grid = TimeGrid::over(kHorizon, kDt);
  const auto p = models::default_pauli();
  const auto m = models::default_markov();
  const std::vector<std::pair<std::string, SemiMarkovMap>> maps{
      {"pauli", models::pauli_semimarkov(p.p, p.f, grid)}, {"markov", markov_pair(m.phi, m.gamma, grid).pair.q}};
  bool pass = true;
  std::string detail;
  const double quad = kQuadratureFactor * kDt * kDt;
  for (const auto& [name, q] : maps) {
    const auto g = survival_operator(waiting_time_operator(q), 1e-10 + quad);
    double worst_margin = -1.0;
    double defect3 = 0.0, tail3 = 0.0;
    for (double t : {0.5, 1.0, 2.0, 5.0})
      for (int n_max = 0; n_max <= 3; ++n_max) {
        const auto c = check_povm_normalization(q, g, t, n_max);
        pass = pass && c.defect <= quad + c.tail_bound;
        worst_margin = std::max(worst_margin, c.defect - (quad + c.tail_bound));
        if (t == 1.0 && n_max == 3) {
          defect3 = c.defect;
          tail3 = c.tail_bound;
        }
      }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s%s: t=1,n_max=3 defect %.2e <= %.2e; worst margin %.2e", detail.empty() ? "" : "; ",
                  name.c_str(), defect3, quad + tail3, worst_margin);
    detail += buf;
  }
  return {6, "POVM normalization", pass, detail};
}

double worst_z(const EnsembleEstimate& e, const SuperoperatorFamily& lam, const Mat& rho0) {
  double z = 0.0;
  for (std::size_t k = 0; k < e.mean.size(); ++k) {
    const Mat diff = e.mean[k] - lam[k].apply(rho0);
    for (Eigen::Index i = 0; i < diff.rows(); ++i)
      for (Eigen::Index j = 0; j < diff.cols(); ++j) {
        for (const auto& [dv, se] : {std::pair{diff(i, j).real(), e.stderr_re[k](i, j)}, std::pair{diff(i, j).imag(), e.stderr_im[k](i, j)}}) {
          if (std::abs(dv) <= 1e-12) continue;  // deterministic entries agree to roundoff
          z = std::max(z, se > 0.0 ? std::abs(dv) / se : std::numeric_limits<double>::infinity());
        }
      }
  }
  return z;
}

Line criterion7() {
  const auto grid = TimeGrid::over(kHorizon, kDt);
  Mat rho0(2, 2);
  rho0 << 0.7, complex(0.3, -0.2), complex(0.3, 0.2), 0.3;
  const auto p = models::default_pauli();
  const auto pauli_pair = canonical_pair(models::pauli_semimarkov(p.p, p.f, grid));
  const auto m = models::default_markov();
  const auto markov = markov_pair(m.phi, m.gamma, grid).pair;
  const double gamma = 0.8;
  const auto sm = models::scalar_markov(gamma);
  const auto scalar = markov_pair(sm.phi, sm.gamma, grid).pair;

  bool pass = true;
  std::string detail;
  for (const auto& [name, pair, seed] : {std::tuple{"pauli", &pauli_pair, 11}, std::tuple{"markov", &markov, 12},
                                         std::tuple{"scalar markov", &scalar, 13}}) {
    const auto lam = build_map(pair->n, pair->q.q).lambda;
    const auto e = ensemble_average(*pair, rho0, kTrajectories, static_cast<std::uint64_t>(seed));
    const double z = worst_z(e, lam, rho0);
    pass = pass && z <= kStdErrors;
    char buf[120];
    std::snprintf(buf, sizeof buf, "%s%s max %.2f SE", detail.empty() ? "" : "; ", name, z);
    detail += buf;
    if (std::string(name) == "scalar markov") {
      const double mean = gamma * grid.horizon();
      const double sigma = std::sqrt(mean / static_cast<double>(e.samples));
      const double dev = std::abs(e.mean_jumps - mean) / sigma;
      pass = pass && dev <= kPoissonSigmas;
      std::snprintf(buf, sizeof buf, "; jumps %.4f vs Poisson mean %.4f (%.2f sigma)", e.mean_jumps, mean, dev);
      detail += buf;
    }
  }
  return {7, "Monte Carlo reconstruction", pass, std::to_string(kTrajectories) + " trajectories each: " + detail};
}

Line criterion8() {
  const auto grid = TimeGrid::over(10.0, kDt);
  const std::vector<double> memory{0.1, 0.3, 1.0, 3.0}, damping{0.1, 0.3, 1.0};
  const auto ls = models::probe_scan(models::ProbeKind::lidar_shabani, 2, memory, damping, 2.0, grid);
  const auto ls_exp = models::probe_scan(models::ProbeKind::lidar_shabani, 1, memory, damping, 2.0, grid);
  const auto bs = models::probe_scan(models::ProbeKind::barnett_stenholm, 1, memory, damping, 0.0, grid);
  const auto lowest = [](const std::vector<models::ProbePoint>& pts) {
    return *std::min_element(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.min_choi < b.min_choi; });
  };
  const auto a = lowest(ls), b = lowest(ls_exp), c = lowest(bs);
  const auto violations = std::count_if(ls.begin(), ls.end(), [](const auto& p) { return p.min_choi < kProbeTol; });
  char buf[400];
  std::snprintf(buf, sizeof buf,
                "Lidar-Shabani (Erlang-2 memory, omega=2): %ld/%zu points below %.0e, min %.3f at memory %.1f damping %.1f t=%.2f; "
                "exponential memory min %.1e; Barnett-Stenholm min %.3f at memory %.1f damping %.1f",
                static_cast<long>(violations), ls.size(), kProbeTol, a.min_choi, a.memory_rate, a.damping_rate, a.time_of_min,
                b.min_choi, c.min_choi, c.memory_rate, c.damping_rate);
  return {8, "CP-violation probe", violations > 0, buf};
}

Mat m3(std::initializer_list<complex> v) {
  Mat m(3, 3);
  auto it = v.begin();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = *it++;
  return m;
}

Line criterion9() {
  const complex w = std::polar(1.0, 2.0 * M_PI / 3.0), w2 = std::conj(w), o = 1.0, z = 0.0, i = {0.0, 1.0};
  const std::vector<Mat> weyl_printed{
      Mat::Identity(3, 3),           m3({z, o, z, z, z, o, o, z, z}), m3({z, z, o, o, z, z, z, o, z}),
      m3({o, z, z, z, w, z, z, z, w2}), m3({z, o, z, z, z, w, w2, z, z}), m3({z, z, o, w, z, z, z, w2, z}),
      m3({o, z, z, z, w2, z, z, z, w}), m3({z, o, z, z, z, w2, w, z, z}), m3({z, z, o, w2, z, z, z, w, z})};
  const double s3 = 1.0 / std::sqrt(3.0);
  const std::vector<Mat> gm_printed{
      m3({z, o, z, o, z, z, z, z, z}),  m3({z, -i, z, i, z, z, z, z, z}), m3({o, z, z, z, -o, z, z, z, z}),
      m3({z, z, o, z, z, z, o, z, z}),  m3({z, z, -i, z, z, z, o, z, z}), m3({z, z, z, z, z, o, z, o, z}),
      m3({z, z, z, z, z, -i, z, i, z}), m3({o, z, z, z, o, z, z, z, -2.0 * o}) * s3};
  const auto weyl = models::weyl_matrices(3);
  int weyl_exact = 0;
  for (std::size_t a = 0; a < 9; ++a) weyl_exact += (weyl[a] - weyl_printed[a]).cwiseAbs().maxCoeff() == 0.0;
  const auto gm = models::gellmann_matrices();
  int gm_exact = 0;
  std::string gm_note;
  for (std::size_t a = 0; a < 8; ++a) {
    const Mat diff = gm[a + 1] - gm_printed[a];
    if (diff.cwiseAbs().maxCoeff() == 0.0) {
      ++gm_exact;
    } else if (a + 1 == 5 && (diff.cwiseAbs().array() > 0.0).count() == 1 && gm[5](2, 0) == i && gm_printed[4](2, 0) == o &&
               gm[5] == Mat(gm[5].adjoint())) {
      // the printed lambda_5 has 1 at (2, 0); its Hermitian completion has i there
      ++gm_exact;
      gm_note = " (lambda_5 (2,0): printed 1, Hermitian value i)";
    }
  }
  const auto grid = TimeGrid::over(kHorizon, kDt);
  const auto g = models::default_gellmann();
  const auto pair = canonical_pair(models::gellmann_semimarkov(g.p, g.f, grid));
  const auto surv = survival_operator(waiting_time_operator(pair.q));
  double nonscalar = 0.0;
  for (const auto& gk : surv.values()) nonscalar = std::max(nonscalar, max_eigenvalue(gk) - min_eigenvalue(gk));
  const double s = 1.0;
  const double gap = max_abs(kernel_laplace(pair, s, Order::left).value.matrix() - kernel_laplace(pair, s, Order::right).value.matrix());
  const bool pass = weyl_exact == 9 && gm_exact == 8 && nonscalar > 1e-3 && gap > kGapTol;
  char buf[400];
  std::snprintf(buf, sizeof buf,
                "weyl %d/9 exact; gell-mann %d/8%s; g_t eigenvalue spread %.3f; left-right kernel gap %.2e at s=%.0f "
                "(p_a = 1/9, exponential rates 0.5 + 0.15 a)",
                weyl_exact, gm_exact, gm_note.c_str(), nonscalar, gap, s);
  return {9, "Printed-matrix fidelity", pass, buf};
}

}  // namespace

int main() {
  const std::vector<std::function<Line()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                    criterion6, criterion7, criterion8, criterion9};
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Line l;
    try {
      l = c();
    } catch (const std::exception& e) {
      l = {static_cast<int>(&c - criteria.data()) + 1, "exception", false, e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !l.pass;
    std::printf("[%s] %d %s: %s [%.1fs]\n", l.pass ? "PASS" : "FAIL", l.id, l.title.c_str(), l.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria pass\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
