#include "smq/trajectories.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "smq/error.hpp"

namespace smq {

namespace {

void require_ordered(double t, std::span<const double> times) {
  double prev = 0.0;
  for (double s : times) {
    if (!(s >= prev)) throw InvalidArgument("povm_density: jump times must be ordered and nonnegative");
    prev = s;
  }
  if (prev > t) throw InvalidArgument("povm_density: jump time beyond t");
}

Mat apply_dual(const Superoperator& s, const Mat& x) {
  return unvec(s.matrix().adjoint() * vec(x), s.dim());
}

OperatorFamily survival_of(const SemiMarkovMap& q) {
  const double dt = q.grid().dt;
  return survival_operator(waiting_time_operator(q), 1e-10 + 10.0 * dt * dt);
}

}  // namespace

Mat povm_density(const SemiMarkovMap& q, const OperatorFamily& g, double t, std::span<const double> times) {
  if (!(g.grid() == q.grid())) throw InvalidArgument("povm_density: grid mismatch");
  require_ordered(t, times);
  const auto& grid = q.grid();
  const double last = times.empty() ? 0.0 : times.back();
  Mat x = g[static_cast<std::size_t>(grid.nearest(t - last))];
  for (std::size_t i = times.size(); i-- > 0;) {
    const double delay = times[i] - (i == 0 ? 0.0 : times[i - 1]);
    x = apply_dual(q.q[static_cast<std::size_t>(grid.nearest(delay))], x);
  }
  return hermitian_part(x);
}

PovmNormalization check_povm_normalization(const SemiMarkovMap& q, const OperatorFamily& g, double t,
                                           int n_max) {
  if (!(g.grid() == q.grid())) throw InvalidArgument("check_povm_normalization: grid mismatch");
  if (n_max < 0) throw InvalidArgument("check_povm_normalization: n_max must be >= 0");
  const auto& grid = q.grid();
  const int kt = grid.nearest(t);
  if (std::abs(grid.time(kt) - t) > 1e-9 * grid.dt) {
    throw InvalidArgument("check_povm_normalization: t must lie on the grid");
  }
  const int d = q.dim();
  const double dt = grid.dt;
  const auto count = static_cast<std::size_t>(kt) + 1;
  std::vector<Mat> duals(count);
  for (std::size_t j = 0; j < count; ++j) duals[j] = q.q[j].matrix().adjoint();

  std::vector<Vec> x(count);
  for (std::size_t k = 0; k < count; ++k) x[k] = vec(g[k]);
  PovmNormalization out;
  out.orders.push_back(g[count - 1]);
  Vec total = x[count - 1];
  for (int n = 1; n <= n_max; ++n) {
    std::vector<Vec> next(count, Vec::Zero(d * d));
    for (std::size_t k = 1; k < count; ++k) {
      Vec acc = Vec::Zero(d * d);
      for (std::size_t j = 0; j <= k; ++j) {
        const double w = (j == 0 || j == k) ? 0.5 : 1.0;
        acc.noalias() += w * (duals[j] * x[k - j]);
      }
      next[k] = dt * acc;
    }
    x = std::move(next);
    out.orders.push_back(unvec(x[count - 1], d));
    total += x[count - 1];
  }
  out.defect = max_abs(unvec(total, d) - Mat::Identity(d, d));
  const double c = std::clamp(1.0 - min_eigenvalue(g[count - 1]), 0.0, 1.0);
  out.tail_bound = std::pow(c, n_max + 1);
  return out;
}

double jump_probability_density(const LegitimatePair& pair, const Mat& rho0, double t,
                                std::span<const double> times) {
  const Mat p = povm_density(pair.q, survival_of(pair.q), t, times);
  return std::max(0.0, (rho0 * p).trace().real());
}

std::uint64_t trajectory_seed(std::uint64_t seed, std::uint64_t id) {
  // splitmix64 finalizer over a counter derived from (seed, id)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

struct Sampler {
  TimeGrid grid;
  int d = 0;
  std::vector<Mat> g;  // survival operator samples
  std::vector<Mat> q;  // superoperator matrices
  std::vector<Mat> n;

  explicit Sampler(const LegitimatePair& pair) : grid(pair.grid()), d(pair.dim()) {
    const auto gs = survival_of(pair.q);
    g = gs.values();
    q = pair.q.q.matrices();
    n = pair.n.matrices();
  }

  // Linear interpolation of a sampled family applied to v.
  void interp_apply(const std::vector<Mat>& fam, double t, const Vec& v, Vec& out) const {
    const double x = std::clamp(t / grid.dt, 0.0, static_cast<double>(grid.steps));
    auto k = static_cast<std::size_t>(x);
    if (k >= static_cast<std::size_t>(grid.steps)) k = static_cast<std::size_t>(grid.steps) - 1;
    const double theta = x - static_cast<double>(k);
    out.noalias() = (1.0 - theta) * (fam[k] * v);
    out.noalias() += theta * (fam[k + 1] * v);
  }

  double survival(double t, const Mat& sigma) const {
    const double x = std::clamp(t / grid.dt, 0.0, static_cast<double>(grid.steps));
    auto k = static_cast<std::size_t>(x);
    if (k >= static_cast<std::size_t>(grid.steps)) k = static_cast<std::size_t>(grid.steps) - 1;
    const double theta = x - static_cast<double>(k);
    return (1.0 - theta) * (g[k] * sigma).trace().real() + theta * (g[k + 1] * sigma).trace().real();
  }

  // Runs one trajectory; when `nodes` is set, stores the conditional state at
  // every grid node of [0, horizon].
  Trajectory run(const Mat& rho0, double horizon, std::uint64_t seed, std::vector<Vec>* nodes,
                 bool keep_states) const {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Trajectory tr;
    Mat sigma = rho0 / rho0.trace().real();
    double elapsed = 0.0;
    int next_node = 0;
    const int last_node = std::min(grid.steps, static_cast<int>(std::floor(horizon / grid.dt + 1e-9)));
    Vec v(d * d), tmp(d * d);
    std::vector<double> cdf;

    const auto record_until = [&](double until, bool inclusive) {
      if (!nodes) return;
      v = vec(sigma);
      while (next_node <= last_node) {
        const double tk = grid.time(next_node);
        if (inclusive ? tk > until + 1e-12 : tk >= until) break;
        interp_apply(n, tk - elapsed, v, tmp);
        const double tr_ = unvec(tmp, d).trace().real();
        (*nodes)[static_cast<std::size_t>(next_node)] = tr_ > 0.0 ? Vec(tmp / tr_) : v;
        ++next_node;
      }
    };

    while (true) {
      const double remaining = horizon - elapsed;
      const int steps = std::min(grid.steps, static_cast<int>(std::floor(remaining / grid.dt)));
      cdf.assign(static_cast<std::size_t>(steps) + 1, 0.0);
      double running = 0.0;
      for (int j = 0; j <= steps; ++j) {
        running = std::max(running, 1.0 - (g[static_cast<std::size_t>(j)] * sigma).trace().real());
        cdf[static_cast<std::size_t>(j)] = running;
      }
      const double c_end = std::max(running, 1.0 - survival(remaining, sigma));
      const double u = uniform(rng);
      if (u >= c_end) {
        record_until(horizon, true);
        tr.log_weight += std::log(std::max(1.0 - c_end, std::numeric_limits<double>::min()));
        v = vec(sigma);
        interp_apply(n, remaining, v, tmp);
        const double t_ = unvec(tmp, d).trace().real();
        tr.final_state = unvec(t_ > 0.0 ? Vec(tmp / t_) : v, d);
        break;
      }
      // first node with cdf > u, then linear interpolation inside the cell
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      double tau;
      if (it == cdf.end()) {
        const double t0 = grid.time(steps);
        const double c0 = cdf.back();
        tau = c_end > c0 ? t0 + (remaining - t0) * (u - c0) / (c_end - c0) : remaining;
      } else {
        const auto j = static_cast<int>(it - cdf.begin());
        const double c1 = *it;
        const double c0 = cdf[static_cast<std::size_t>(j - 1)];
        tau = grid.time(j - 1) + grid.dt * (c1 > c0 ? (u - c0) / (c1 - c0) : 1.0);
      }
      tau = std::clamp(tau, 0.0, remaining);

      record_until(elapsed + tau, false);
      v = vec(sigma);
      interp_apply(q, tau, v, tmp);
      Mat jumped = unvec(tmp, d);
      const double p = jumped.trace().real();
      elapsed += tau;
      tr.jump_times.push_back(elapsed);
      if (p > 0.0) {
        tr.log_weight += std::log(p);
        sigma = hermitian_part(jumped / p);
      } else {
        ++tr.clipped;
      }
      if (keep_states) tr.states.push_back(sigma);
    }
    return tr;
  }
};

constexpr std::size_t kBlock = 512;

struct BlockSum {
  std::vector<Vec> sum;
  std::vector<RVec> sq_re, sq_im;
  std::vector<std::size_t> hist;
  long clipped = 0;
};

BlockSum run_block(const Sampler& s, const Mat& rho0, std::size_t begin, std::size_t end, std::uint64_t seed) {
  const auto count = s.grid.size();
  const auto n2 = static_cast<Eigen::Index>(s.d) * s.d;
  BlockSum b;
  b.sum.assign(count, Vec::Zero(n2));
  b.sq_re.assign(count, RVec::Zero(n2));
  b.sq_im.assign(count, RVec::Zero(n2));
  std::vector<Vec> nodes(count, Vec::Zero(n2));
  for (std::size_t id = begin; id < end; ++id) {
    const auto tr = s.run(rho0, s.grid.horizon(), trajectory_seed(seed, id), &nodes, false);
    for (std::size_t k = 0; k < count; ++k) {
      b.sum[k] += nodes[k];
      b.sq_re[k] += nodes[k].real().cwiseAbs2();
      b.sq_im[k] += nodes[k].imag().cwiseAbs2();
    }
    const auto j = static_cast<std::size_t>(tr.jump_count());
    if (b.hist.size() <= j) b.hist.resize(j + 1, 0);
    ++b.hist[j];
    b.clipped += tr.clipped;
  }
  return b;
}

EnsembleEstimate reduce(const Sampler& s, std::vector<BlockSum>& blocks, std::size_t samples) {
  const auto count = s.grid.size();
  const auto n2 = static_cast<Eigen::Index>(s.d) * s.d;
  std::vector<Vec> sum(count, Vec::Zero(n2));
  std::vector<RVec> sq_re(count, RVec::Zero(n2)), sq_im(count, RVec::Zero(n2));
  EnsembleEstimate e;
  for (auto& b : blocks) {
    for (std::size_t k = 0; k < count; ++k) {
      sum[k] += b.sum[k];
      sq_re[k] += b.sq_re[k];
      sq_im[k] += b.sq_im[k];
    }
    if (e.jump_histogram.size() < b.hist.size()) e.jump_histogram.resize(b.hist.size(), 0);
    for (std::size_t j = 0; j < b.hist.size(); ++j) e.jump_histogram[j] += b.hist[j];
    e.clipped += b.clipped;
  }
  const double n = static_cast<double>(samples);
  e.grid = s.grid;
  e.samples = samples;
  for (std::size_t k = 0; k < count; ++k) {
    const Vec mean = sum[k] / n;
    const auto se = [&](const RVec& sq, const RVec& m) {
      RVec var = (sq / n - m.cwiseAbs2()).cwiseMax(0.0);
      if (samples > 1) var *= n / (n - 1.0);
      return RVec((var / n).cwiseSqrt());
    };
    e.mean.push_back(unvec(mean, s.d));
    const RVec re = mean.real(), im = mean.imag();
    e.stderr_re.push_back(Eigen::Map<const RMat>(se(sq_re[k], re).data(), s.d, s.d));
    e.stderr_im.push_back(Eigen::Map<const RMat>(se(sq_im[k], im).data(), s.d, s.d));
  }
  double jumps = 0.0;
  for (std::size_t j = 0; j < e.jump_histogram.size(); ++j) jumps += static_cast<double>(j * e.jump_histogram[j]);
  e.mean_jumps = jumps / n;
  return e;
}

void check_state(const Mat& rho0, int d) {
  if (rho0.rows() != d || rho0.cols() != d) throw InvalidArgument("initial state dimension mismatch");
  if (!is_hermitian(rho0, 1e-12) || std::abs(rho0.trace().real() - 1.0) > 1e-12 ||
      min_eigenvalue(rho0) < -1e-12) {
    throw InvalidArgument("initial state is not a density matrix");
  }
}

}  // namespace

Trajectory sample_trajectory(const LegitimatePair& pair, const Mat& rho0, double horizon, std::uint64_t seed) {
  check_state(rho0, pair.dim());
  if (!(horizon >= 0.0) || horizon > pair.grid().horizon() + 1e-12) {
    throw InvalidArgument("sample_trajectory: horizon outside the grid");
  }
  const Sampler s(pair);
  return s.run(rho0, horizon, seed, nullptr, true);
}

EnsembleEstimate ensemble_average(const LegitimatePair& pair, const Mat& rho0, std::size_t samples,
                                  std::uint64_t seed) {
  check_state(rho0, pair.dim());
  if (samples < 1) throw InvalidArgument("ensemble_average: samples must be >= 1");
  const Sampler s(pair);
  const std::size_t nblocks = (samples + kBlock - 1) / kBlock;
  std::vector<BlockSum> blocks(nblocks);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nblocks); ++b) {
    const auto begin = static_cast<std::size_t>(b) * kBlock;
    blocks[static_cast<std::size_t>(b)] = run_block(s, rho0, begin, std::min(samples, begin + kBlock), seed);
  }
  return reduce(s, blocks, samples);
}

EnsembleEstimate ensemble_average_serial(const LegitimatePair& pair, const Mat& rho0, std::size_t samples,
                                         std::uint64_t seed) {
  check_state(rho0, pair.dim());
  if (samples < 1) throw InvalidArgument("ensemble_average: samples must be >= 1");
  const Sampler s(pair);
  std::vector<BlockSum> blocks;
  for (std::size_t begin = 0; begin < samples; begin += kBlock) {
    blocks.push_back(run_block(s, rho0, begin, std::min(samples, begin + kBlock), seed));
  }
  return reduce(s, blocks, samples);
}

}  // namespace smq
