#pragma once

// Classical semi-Markov processes and their commutative embedding.

#include <vector>

#include "smq/grid.hpp"
#include "smq/semimarkov.hpp"
#include "smq/timeseries.hpp"

namespace smq {

/// q_ij(t) >= 0: density of a jump j -> i after waiting time t.
struct SemiMarkovMatrix {
  TimeGrid grid;
  std::vector<RMat> q;

  int states() const { return q.empty() ? 0 : static_cast<int>(q.front().rows()); }
  /// Nonnegativity and column integrability sum_i int_0^T q_ij <= 1 + tol.
  static SemiMarkovMatrix validate(TimeGrid grid, std::vector<RMat> q, double tol = 1e-10);
};

/// Jump-chain probabilities pi (columns sum to 1) with exponential waiting rates.
struct ClassicalMarkovModel {
  RMat pi;
  RVec rates;

  SemiMarkovMatrix semi_markov(const TimeGrid& grid) const;
  /// w - diag(rates), w_ij = pi_ij rates_j
  RMat generator() const;
};

struct WaitingSurvival {
  std::vector<RVec> f;  // per grid point, per state
  std::vector<RVec> g;
  /// 1 - sum_i int_0^T q_ij per state: the transient mass.
  RVec defect;
};
WaitingSurvival classical_waiting_and_survival(const SemiMarkovMatrix& q, double tol = 1e-10);

struct StochasticMatrixFamily {
  TimeGrid grid;
  std::vector<RMat> t;
  double max_column_defect = 0.0;
  double min_entry = 0.0;
  /// Largest coherence or imaginary part produced from a diagonal input, when
  /// extracted from a quantum map; zero for classical constructions.
  double off_diagonal_leak = 0.0;
  int terms = 0;
};

/// T = n + n*q + n*q*q + ..., n = diag(g_j).
StochasticMatrixFamily stochastic_propagator(const SemiMarkovMatrix& q, double tail_tol = 1e-10,
                                             int n_max = 64);

/// w~_ij(s) = q~_ij(s) / g~_j(s)
RMat classical_kernel_laplace(const SemiMarkovMatrix& q, double s);

/// w(t) = delta(t) singular + regular, from the column equations w_ij * g_j = q_ij.
struct ClassicalRates {
  RMat singular;
  std::vector<RMat> regular;
};
ClassicalRates classical_rates(const SemiMarkovMatrix& q);

/// Residual of dp/dt = sum_j w_ij * p_j - (sum_j w_ji) * p_i, checked on T.
ResidualReport verify_classical_master_equation(const StochasticMatrixFamily& t, const SemiMarkovMatrix& q);

/// Q_t[rho] = sum_ij q_ij(t) |i><j| rho |j><i|
SemiMarkovMap embed_commutative(const SemiMarkovMatrix& q);

/// T_ij(t) = <i| Lambda_t[|j><j|] |i>
StochasticMatrixFamily extract_diagonal(const SuperoperatorFamily& lambda);

}  // namespace smq
