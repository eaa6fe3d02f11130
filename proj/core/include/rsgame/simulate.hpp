#pragma once

#include <cstdint>
#include <vector>

#include "rsgame/model.hpp"

// Monte Carlo cross-checks. Paths are simulated on the jump chain induced by
// the mixed transition rates of the active strategy pair; costs enter through
// the mixed cost rates, so actions themselves are never sampled. Strategies
// indexed by the decaying parameter theta_k e^{-alpha t} are handled exactly:
// the holding-time exponential is resampled whenever the decay curve crosses
// a policy grid node (memorylessness makes that resampling exact), and each
// constant segment contributes its closed-form discounted cost integral.
//
// Estimators are bitwise deterministic for a fixed seed regardless of the
// thread count: each path owns a counter-based RNG stream derived from
// (seed, path index), per-path functionals are written into preallocated
// slots, and the final reduction is sequential.

namespace rsgame {

// SplitMix64-style counter generator; one instance per (seed, stream) pair.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);
  std::uint64_t next_u64();
  double uniform();              // [0, 1)
  double exponential(double rate);
  // index into w (size n, nonnegative, sum total > 0) by inverse CDF
  int pick(const double* w, int n, double total);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct McOptions {
  long paths = 10'000;
  double horizon = 50.0;
  std::uint64_t seed = 1;
  int threads = 1;
  int start_state = 0;
};

// threads >= 1 is used as given; otherwise RSGAME_THREADS, then the hardware
// count, then 1.
int resolve_threads(int requested);

struct McEstimate {
  double value = 0.0;
  double se = 0.0;
  long paths = 0;
};

struct DiscountedMcResult {
  McEstimate phi1;  // mean of exp(theta_1 * discounted cost integral)
  McEstimate phi2;
  // absolute truncation-bias bounds: phi_k * (exp(theta_k ||r_k|| e^{-aT}/a) - 1)
  double bias_bound1 = 0.0;
  double bias_bound2 = 0.0;
};

DiscountedMcResult estimate_discounted_cost(const GameModel& model,
                                            const EventuallyStationaryPolicy& pol1,
                                            const EventuallyStationaryPolicy& pol2,
                                            double alpha, double theta1,
                                            double theta2,
                                            const McOptions& opts = {});

struct ErgodicMcResult {
  McEstimate rho1;  // (1/(theta_1 T)) log mean exp(theta_1 * cost integral)
  McEstimate rho2;  // delta-method standard errors
};

ErgodicMcResult estimate_ergodic_cost(const GameModel& model,
                                      const StationaryProfile& profile,
                                      double theta1, double theta2,
                                      const McOptions& opts = {});

struct HittingMcResult {
  McEstimate moment;  // mean of exp(delta * first entry time into target)
  double censored_fraction = 0.0;  // paths still outside at the horizon
  bool reliable = false;           // censored_fraction <= 1%
};

// Censored paths contribute exp(delta * horizon), an underestimate, so the
// result is only flagged reliable when censoring is negligible.
HittingMcResult estimate_hitting_exponential(const GameModel& model,
                                             const StationaryProfile& profile,
                                             double delta,
                                             const std::vector<int>& target,
                                             const McOptions& opts = {});

struct DriftMcResult {
  McEstimate weighted;  // mean of exp(theta * cost integral) * W(Y_T)
  McEstimate plain;     // mean of exp(theta * cost integral)
};

DriftMcResult estimate_weighted_terminal(const GameModel& model,
                                         const StationaryProfile& profile,
                                         int player, double theta,
                                         const std::vector<double>& W,
                                         const McOptions& opts = {});

}  // namespace rsgame
