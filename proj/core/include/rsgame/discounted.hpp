#pragma once

#include <iosfwd>
#include <vector>

#include "rsgame/generator.hpp"
#include "rsgame/model.hpp"

// Discounted risk-sensitive criterion. The certainty-equivalent transform
// psi(theta, i) = E_i[ exp(theta int_0^inf e^{-alpha t} r dt) ] solves an ODE
// in the risk level theta:
//   alpha theta dpsi/dtheta = min_u [ Pi_{u,opp} psi + theta r psi ],
//   psi(0, .) = 1,
// integrated on a uniform theta-grid after seeding the first node from the
// risk-neutral limit alpha phi = min_u [ Pi phi + r ].

namespace rsgame {

struct GridSpec {
  int steps = 256;  // number of intervals; nodes = steps + 1 including 0

  void validate() const {
    if (steps < 16) throw model_error("grid must have at least 16 steps");
  }
};

struct ValueCurve {
  int player = 1;
  double alpha = 0.0;
  std::vector<double> grid;                    // theta nodes, grid[0] == 0
  std::vector<std::vector<double>> psi;        // [node][state]
  std::vector<std::vector<double>> phi;        // log psi / theta; node 0 holds the limit
  std::vector<std::vector<int>> minimizer;     // [node][state]; empty for evaluations

  int n_nodes() const { return static_cast<int>(grid.size()); }
  int n_states() const { return psi.empty() ? 0 : static_cast<int>(psi[0].size()); }
  double theta_max() const { return grid.back(); }
  // psi at the last node
  const std::vector<double>& terminal_psi() const { return psi.back(); }
  // recorded minimizing selectors as a theta-indexed pure policy (nodes > 0)
  EventuallyStationaryPolicy minimizer_policy(const GameModel& model) const;
  void write_csv(std::ostream& os) const;
};

struct RiskNeutralResult {
  std::vector<double> phi;
  double residual = 0.0;
  long iterations = 0;
};

struct RiskNeutralOptions {
  double tol = 1e-12;
  long max_iterations = 20'000'000;
};

// Value iteration (with uniformization) for the risk-neutral discounted
// equation alpha phi = min_u [ Pi_{u,opp} phi + r(i,u,opp) ].
RiskNeutralResult solve_risk_neutral_discounted(
    const GameModel& model, int player, const PolicyColumn& opp, double alpha,
    const RiskNeutralOptions& opts = {});

// Fixed-profile variant: alpha phi = Pi_{v1,v2} phi + r_k(i,v1,v2).
RiskNeutralResult risk_neutral_evaluate(const GameModel& model,
                                        const PolicyColumn& v1,
                                        const PolicyColumn& v2, int player,
                                        double alpha,
                                        const RiskNeutralOptions& opts = {});

// Optimal response curve of one player against a fixed (possibly
// theta-indexed) opponent policy. Classical fixed-step RK4 on the uniform
// grid; steps near theta = 0 are internally subdivided by a deterministic
// stiffness rule so the integration stays in the stable region. Records the
// minimizing pure action at every node. Throws solver_error if the computed
// curve leaves the envelope 1 <= psi <= exp(theta ||r|| / alpha) by more
// than 1e-6.
ValueCurve solve_discounted_hjb(const GameModel& model, int player,
                                const EventuallyStationaryPolicy& opp,
                                double alpha, double theta_max,
                                const GridSpec& grid = {});

// Cost curve of player k when both players follow the given policies; same
// integrator without the min. Each policy is consulted at its owner's own
// decaying risk level, i.e. at the integration variable rescaled by the
// ratio of the final levels.
ValueCurve evaluate_discounted_profile(const GameModel& model,
                                       const EventuallyStationaryPolicy& pol1,
                                       const EventuallyStationaryPolicy& pol2,
                                       double alpha, double theta_max,
                                       int player, const GridSpec& grid = {});

}  // namespace rsgame
