#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "rsgame/discounted.hpp"
#include "rsgame/generator.hpp"
#include "rsgame/model.hpp"

// Ergodic (long-run average) risk-sensitive criterion. For a fixed profile
// the value rho solves the multiplicative Poisson equation
//   theta rho psi = (Q + theta diag(r)) psi,  psi > 0,  psi(i0) = 1,
// i.e. theta rho is the principal eigenvalue of the Metzler matrix
// A = Q + theta diag(r).

namespace rsgame {

struct PerronOptions {
  double tol = 1e-11;          // residual target ||A psi - lambda psi||_inf
  long max_iterations = 4'000'000;
  int i0 = -1;                 // normalization state; -1: certificate i0 or 0
};

struct PerronResult {
  double lambda = 0.0;  // theta * rho
  double rho = 0.0;
  std::vector<double> psi;  // positive, psi[i0] = 1
  double residual = 0.0;
  long iterations = 0;
};

// Principal eigenpair by power iteration on I + hA with
// h = 1 / (2 (M + theta ||r||_inf + 1)). Requires the induced chain to be
// irreducible (checked by graph reachability).
PerronResult perron_value(const GameModel& model,
                          const StationaryProfile& profile, int player,
                          double theta, const PerronOptions& opts = {});

struct ErgodicCtmdpResult {
  double rho = 0.0;
  double lambda = 0.0;
  std::vector<double> psi;
  std::vector<int> policy;  // pure own action per state
  double bellman_residual = 0.0;
  int rounds = 0;
  bool used_enumeration = false;
};

struct ErgodicCtmdpOptions {
  PerronOptions perron = {};
  double improve_tol = 1e-12;
  double residual_tol = 1e-8;
  int max_rounds = 1000;
  // policy-iteration cycles fall back to enumeration up to this many policies
  long enumeration_cap = 4096;
};

// One player's optimal ergodic response against a fixed opponent column,
// by policy iteration over pure stationary policies.
ErgodicCtmdpResult solve_ergodic_ctmdp(const GameModel& model, int player,
                                       const PolicyColumn& opp, double theta,
                                       const ErgodicCtmdpOptions& opts = {});

struct ErgodicNashTraceRow {
  int round = 0;
  double policy_change = 0.0;
  double gap1 = 0.0;
  double gap2 = 0.0;
};

struct ErgodicSolution {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double rho1 = 0.0;
  double rho2 = 0.0;
  std::vector<double> psi1;
  std::vector<double> psi2;
  StationaryProfile profile;
  double gap1 = 0.0;
  double gap2 = 0.0;
  // residuals of the coupled optimality system: min-Hamiltonian line and
  // fixed-profile line, per player
  double residual_min1 = 0.0;
  double residual_min2 = 0.0;
  double residual_eval1 = 0.0;
  double residual_eval2 = 0.0;
  bool certified = false;
  int rounds = 0;
  std::vector<ErgodicNashTraceRow> trace;
  void write_trace_csv(std::ostream& os) const;
};

struct ErgodicNashOptions {
  double tol_gap = 1e-6;
  double residual_tol = 1e-8;
  int max_rounds = 500;
  double support_tol = 1e-2;  // incumbent weight counted as support
  int threads = 1;
  PerronOptions perron = {};
};

// Damped best-response iteration (averaging weights 1/(t+1), so round 0
// replaces the uniform start with the pure best-response pair). Each round
// also certifies the current best-response pair, and a support-restricted
// indifference candidate built from the incumbent, so pure and bimatrix-style
// mixed equilibria finish in a handful of rounds. Whatever profile is
// returned as certified has both Nash gaps <= tol_gap and coupled residuals
// <= residual_tol; otherwise the result is flagged non-certified.
ErgodicSolution solve_nash_ergodic(const GameModel& model, double theta1,
                                   double theta2,
                                   const ErgodicNashOptions& opts = {});

// Zeroes both players' costs at states with index >= n (rates untouched).
GameModel truncate_costs(const GameModel& model, int n);

struct DiscountTraceRow {
  double alpha = 0.0;
  double g = 0.0;                // theta (alpha phi + theta alpha dphi/dtheta)
  std::vector<double> psibar;    // psi / psi(i0) at theta
};

struct DiscountTrace {
  double theta = 0.0;
  int player = 1;
  int i0 = 0;
  double rho_reference = 0.0;        // ergodic solve at the same data
  double theta_rho_reference = 0.0;
  std::vector<DiscountTraceRow> rows;
  void write_csv(std::ostream& os) const;
};

// Solves the discounted equation for each alpha in the (strictly decreasing)
// list and reports the vanishing-discount diagnostic g_alpha(theta, i0) with
// the theta-derivative taken by central differences on the grid, plus the
// normalized eigenfunction approximations.
DiscountTrace vanishing_discount_probe(const GameModel& model, double theta,
                                       int player, const PolicyColumn& opp,
                                       const std::vector<double>& alpha_list,
                                       const GridSpec& grid = {},
                                       int i0 = -1);

std::vector<double> default_probe_alphas();

}  // namespace rsgame
