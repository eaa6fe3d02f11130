#pragma once

#include <iosfwd>
#include <vector>

#include "rsgame/discounted.hpp"
#include "rsgame/model.hpp"

// Nash equilibria in eventually stationary strategies for the discounted
// criterion. A profile is certified when neither player can lower any
// component of their own value vector at their risk level by more than
// tol_gap through a unilateral deviation.

namespace rsgame {

struct DiscountedNashTraceRow {
  int round = 0;
  double policy_change = 0.0;  // max |weight delta| against previous incumbent
  double gap1 = 0.0;
  double gap2 = 0.0;
};

struct DiscountedSolution {
  double alpha = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  EventuallyStationaryPolicy pol1;
  EventuallyStationaryPolicy pol2;
  ValueCurve curve1;  // profile value for player 1 on [0, theta1]
  ValueCurve curve2;
  double gap1 = 0.0;  // max_i psi_k(theta_k, i) - psi_k^br(theta_k, i)
  double gap2 = 0.0;
  bool certified = false;
  int rounds = 0;
  std::vector<DiscountedNashTraceRow> trace;
  void write_trace_csv(std::ostream& os) const;
};

struct DiscountedNashOptions {
  double tol_gap = 1e-4;
  int max_rounds = 200;
  double support_tol = 1e-2;
  int threads = 1;
  GridSpec grid = {};
  // refuse models without an additive transition/cost decomposition
  bool strict_arat = false;
  RiskNeutralOptions risk_neutral = {};
};

// Pure theta-indexed best response of one player: solves the player's HJB
// minimization against the fixed opponent policy and extracts the recorded
// minimizers.
EventuallyStationaryPolicy best_response_discounted(
    const GameModel& model, int player, const EventuallyStationaryPolicy& opp,
    double alpha, double theta_player, const GridSpec& grid = {});

// Nash gaps of a given profile (player 1 first). Positive values mean the
// player can improve by deviating.
std::pair<double, double> nash_gap_discounted(
    const GameModel& model, const EventuallyStationaryPolicy& pol1,
    const EventuallyStationaryPolicy& pol2, double alpha, double theta1,
    double theta2, const GridSpec& grid = {});

// Damped best-response iteration with per-round certification of the
// best-response pair and of a support-restricted indifference candidate, as
// in the ergodic solver.
DiscountedSolution solve_nash_discounted(const GameModel& model, double alpha,
                                         double theta1, double theta2,
                                         const DiscountedNashOptions& opts = {});

}  // namespace rsgame
