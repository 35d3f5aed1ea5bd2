#pragma once

// Quantum semi-Markov maps and legitimate pairs {N_t, Q_t}.

#include <optional>
#include <string>
#include <vector>

#include "smq/grid.hpp"
#include "smq/timeseries.hpp"
#include "smq/waiting.hpp"

namespace smq {

/// CP family Q_t with int_0^t Q^dagger[1] <= 1 on the grid.
struct SemiMarkovMap {
  SuperoperatorFamily q;
  bool validated = false;
  /// lambda_max(int_0^T Q^dagger[1]) - 1
  double integrated_excess = 0.0;
  double min_choi = 0.0;

  const TimeGrid& grid() const { return q.grid(); }
  int dim() const { return q.dim(); }

  /// Checks CP at every sample (min Choi eigenvalue >= -tol) and positivity of
  /// the survival operator. The survival check allows the trapezoidal error
  /// 10 dt^2 on top of tol. Throws ValidationError.
  static SemiMarkovMap validate(SuperoperatorFamily q, double tol = 1e-10);
};

/// f_t = Q_t^dagger[1]
OperatorFamily waiting_time_operator(const SemiMarkovMap& q);
/// g_t = 1 - int_0^t f (trapezoidal). Throws ValidationError when some g_t
/// has an eigenvalue below -psd_tol.
OperatorFamily survival_operator(const OperatorFamily& f, double psd_tol = 1e-10);
/// N_t[rho] = sqrt(g_t) rho sqrt(g_t)
SuperoperatorFamily canonical_N(const OperatorFamily& g, double psd_tol = 1e-10);

enum class Provenance { canonical, gauged, collision, markov };
const char* to_string(Provenance p);

struct LegitimatePair {
  SuperoperatorFamily n;
  SemiMarkovMap q;
  Provenance provenance = Provenance::canonical;
  std::string detail;
  /// max over grid and matrix units of |Tr(Q_t[rho] + dN_t/dt[rho])|
  double normalization_residual = 0.0;

  const TimeGrid& grid() const { return n.grid(); }
  int dim() const { return n.dim(); }
};

/// Bundles and validates: N_0 = 1, N_t CP, normalization residual <= 10 dt^2.
LegitimatePair make_pair(SuperoperatorFamily n, SemiMarkovMap q, Provenance provenance,
                         std::string detail = {}, double tol = 1e-10);
double normalization_residual(const SuperoperatorFamily& n, const SuperoperatorFamily& q);

/// {canonical_N(g), Q} with g the survival operator of Q.
LegitimatePair canonical_pair(const SemiMarkovMap& q);

/// {G_t N_t, F_t Q_t}; G must be a dynamical map and every F_t a channel.
LegitimatePair gauge_transform(const LegitimatePair& pair, const SuperoperatorFamily& g,
                               const SuperoperatorFamily& f, double tol = 1e-10);

/// {g(t) G_t, f(t) F_t}, with g from trapezoidal integration of f.
LegitimatePair collision_pair(const WaitingDensity& f, const SuperoperatorFamily& g,
                              const SuperoperatorFamily& channel, double tol = 1e-10);

struct MarkovPair {
  LegitimatePair pair;
  /// W[rho] = Phi[sqrt(Gamma) rho sqrt(Gamma)]
  Superoperator w;
  /// W - {Gamma, .}/2, plus -i[H, .] for the Hamiltonian variant
  Superoperator generator;
};

/// Q_t[rho] = Phi[sqrt(f_t) rho sqrt(f_t)], f_t = Gamma e^{-Gamma t}.
MarkovPair markov_pair(const Superoperator& phi, const Mat& gamma, const TimeGrid& grid,
                       double tol = 1e-10);
/// Markov pair with a coherent part generated by H, [H, Gamma] = 0 required.
/// The pair is {G_t N_t, W G_t N_t} with G_t = e^{-iHt} . e^{iHt}.
MarkovPair hamiltonian_markov_pair(const Superoperator& phi, const Mat& gamma, const Mat& h,
                                   const TimeGrid& grid, double tol = 1e-10);

/// W = delta(t) singular + regular, defined by W * N = Q.
struct RateMap {
  Superoperator singular;
  SuperoperatorFamily regular;
  double min_choi_regular = 0.0;
  /// Fraction of the grid where g_t is below eps relative to its largest eigenvalue.
  double singular_fraction = 0.0;
  std::vector<std::string> warnings;

  /// Laplace transform: singular + int e^{-st} regular.
  Superoperator laplace(double s) const;
};
RateMap rate_map_W(const SemiMarkovMap& q, const OperatorFamily& g, double eps = 1e-10);
RateMap rate_map_W(const SuperoperatorFamily& n, const SuperoperatorFamily& q);

/// K = W - Z with Z[rho] = (W^dagger[1] rho + rho W^dagger[1]) / 2, applied to
/// both the singular and the regular part.
MemoryKernel kernel_from_rate_map(const RateMap& w);

/// Kernel of the pair's master equation, from K * N = Q + dN/dt (left) or
/// N * K = Q + dN/dt (right).
MemoryKernel pair_kernel(const LegitimatePair& pair, Order order = Order::left);

struct KernelLaplace {
  Superoperator value;
  /// 2-norm condition number of the Laplace transform of N.
  double condition = 0.0;
};
/// left: (Q~ - 1) N~^{-1} + s, right: N~^{-1} (Q~ - 1) + s.
KernelLaplace kernel_laplace(const LegitimatePair& pair, double s, Order order = Order::left);

struct Recognition {
  bool generalized = false;
  SuperoperatorFamily g;
  double max_trace_defect = 0.0;
  double min_choi = 0.0;
  double identity_defect = 0.0;  // |G_0 - 1|_max
  bool regularized = false;
};
/// G_t = N_t o (g_t^{-1/2} . g_t^{-1/2}); generalized iff every G_t is CPTP.
Recognition recognize_generalized_semi_markov(const LegitimatePair& pair, double tol = 1e-8,
                                              double eps = 1e-10);

SemiMarkovMap convex_mix(const std::vector<SemiMarkovMap>& maps, const std::vector<double>& p);

}  // namespace smq
