#pragma once

// Jump unraveling of a legitimate pair: POVM densities, trajectory sampling
// and ensemble reconstruction of the dynamical map.

#include <cstdint>
#include <span>
#include <vector>

#include "smq/semimarkov.hpp"

namespace smq {

/// P^n(t; t_n..t_1) = Q^dag_{t_1} Q^dag_{t_2-t_1} ... Q^dag_{t_n-t_{n-1}} [g_{t-t_n}],
/// with Q and g read at the nearest grid node. Tr(rho P^n) is the trace of the
/// unnormalized state N_{t-t_n} Q_{t_n-t_{n-1}} ... Q_{t_1}[rho].
Mat povm_density(const SemiMarkovMap& q, const OperatorFamily& g, double t, std::span<const double> times);

struct PovmNormalization {
  double defect = 0.0;      // |sum_n int P^n - 1|_max
  double tail_bound = 0.0;  // (1 - lambda_min(g_t))^{n_max + 1}
  std::vector<Mat> orders;  // int P^n for n = 0..n_max
};
/// Nested integrals evaluated recursively: X^0 = g, X^n = Q^dag * X^{n-1}.
PovmNormalization check_povm_normalization(const SemiMarkovMap& q, const OperatorFamily& g, double t,
                                           int n_max);

double jump_probability_density(const LegitimatePair& pair, const Mat& rho0, double t,
                                std::span<const double> times);

struct Trajectory {
  std::vector<double> jump_times;
  std::vector<Mat> states;  // normalized conditional state right after each jump
  Mat final_state;
  double log_weight = 0.0;  // log p^n(T; t_n..t_1)
  int clipped = 0;          // negative density values clipped to zero

  int jump_count() const { return static_cast<int>(jump_times.size()); }
};

/// Reproducible per-trajectory generator seed.
std::uint64_t trajectory_seed(std::uint64_t seed, std::uint64_t id);

/// Samples one trajectory on [0, horizon]. Jump delays invert the survival
/// CDF 1 - Tr(g_tau sigma) by linear interpolation between grid nodes; Q and
/// N are interpolated linearly off the grid.
Trajectory sample_trajectory(const LegitimatePair& pair, const Mat& rho0, double horizon, std::uint64_t seed);

struct EnsembleEstimate {
  TimeGrid grid;
  std::vector<Mat> mean;
  std::vector<RMat> stderr_re;
  std::vector<RMat> stderr_im;
  std::size_t samples = 0;
  std::vector<std::size_t> jump_histogram;
  double mean_jumps = 0.0;
  long clipped = 0;
};

/// Unweighted average of the conditional states at every grid node; the
/// result does not depend on the number of threads.
EnsembleEstimate ensemble_average(const LegitimatePair& pair, const Mat& rho0, std::size_t samples,
                                  std::uint64_t seed);
EnsembleEstimate ensemble_average_serial(const LegitimatePair& pair, const Mat& rho0, std::size_t samples,
                                         std::uint64_t seed);

}  // namespace smq
