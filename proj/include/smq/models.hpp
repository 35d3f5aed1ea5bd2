#pragma once

// Built-in semi-Markov maps, GKSL generators and probe kernels.

#include <string>
#include <vector>

#include "smq/semimarkov.hpp"
#include "smq/timeseries.hpp"
#include "smq/waiting.hpp"

namespace smq::models {

/// I, sigma_x, sigma_y, sigma_z
std::vector<Mat> pauli_matrices();
/// U_{kl} = sum_m omega^{mk} |m><m+l|, listed by alpha = l + k d.
std::vector<Mat> weyl_matrices(int d);
/// lambda_0 = I followed by the eight Gell-Mann matrices.
std::vector<Mat> gellmann_matrices();

/// Q_t[rho] = sum_a p_a f_a(t) A_a rho A_a^dagger
SemiMarkovMap operator_mixture_semimarkov(const std::vector<Mat>& ops, const std::vector<double>& p,
                                          const std::vector<WaitingDensity>& f, const TimeGrid& grid);
SemiMarkovMap pauli_semimarkov(const std::vector<double>& p, const std::vector<WaitingDensity>& f,
                               const TimeGrid& grid);
SemiMarkovMap weyl_semimarkov(int d, const std::vector<double>& p, const std::vector<WaitingDensity>& f,
                              const TimeGrid& grid);
/// Admissibility is the positivity of g_t on the grid, checked directly.
SemiMarkovMap gellmann_semimarkov(const std::vector<double>& p, const std::vector<WaitingDensity>& f,
                                  const TimeGrid& grid);

struct GKSLGenerator {
  Mat h_eff;
  std::vector<Mat> ops;
  std::vector<double> rates;
};
Superoperator gksl_superoperator(const GKSLGenerator& gen);
/// rho -> a rho a^dag - {a^dag a, rho} / 2
Superoperator dissipator(const Mat& a);

enum class ProbeKind { barnett_stenholm, lidar_shabani };
const char* to_string(ProbeKind kind);

/// barnett_stenholm: K_t = k(t) L;  lidar_shabani: K_t = k(t) L e^{L t}.
MemoryKernel probe_kernel(ProbeKind kind, const WaitingDensity& k, const GKSLGenerator& gen,
                          const TimeGrid& grid);

/// Amplitude damping at `damping` plus a drive omega sigma_z on a qubit.
GKSLGenerator damped_qubit(double damping, double omega);

struct ProbePoint {
  double memory_rate = 0.0;
  double damping_rate = 0.0;
  double min_choi = 0.0;
  double time_of_min = 0.0;
};
/// Propagates the probe kernel for every (memory rate, damping rate) pair.
/// Memory is Erlang with the given shape (1 = exponential).
std::vector<ProbePoint> probe_scan(ProbeKind kind, int memory_shape, const std::vector<double>& memory_rates,
                                   const std::vector<double>& damping_rates, double omega, const TimeGrid& grid);

// Default parameter sets used by the tests and the CLI.
struct MixtureParams {
  std::vector<double> p;
  std::vector<WaitingDensity> f;
};
MixtureParams default_pauli();
MixtureParams default_weyl3();
MixtureParams default_gellmann();

LegitimatePair default_collision_pair(const TimeGrid& grid);
/// Generator of the collision gauge G_t = exp(t L_G).
Superoperator default_collision_gauge_generator();
Superoperator default_collision_channel();
WaitingDensity default_collision_density();

struct MarkovParams {
  Superoperator phi;
  Mat gamma;
};
MarkovParams default_markov();
/// Gamma = gamma 1, Phi = sigma_x conjugation.
MarkovParams scalar_markov(double gamma);

}  // namespace smq::models
