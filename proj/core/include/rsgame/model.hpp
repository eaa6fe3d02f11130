#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Two-player continuous-time stochastic game on a finite state space.
// Both players pick actions from finite sets; transition rates and running
// costs are bilinear in the two mixed actions. Costs are nonnegative, rate
// rows are conservative.

namespace rsgame {

struct model_error : std::runtime_error {
  explicit model_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure inside a solver (non-convergence, envelope violation,
// reducible chain, ...). Distinct from model_error so callers can tell bad
// input apart from a solve that did not finish.
struct solver_error : std::runtime_error {
  explicit solver_error(const std::string& what) : std::runtime_error(what) {}
};

// Probability vector over one player's action set.
struct MixedAction {
  std::vector<double> w;

  static MixedAction pure(int n_actions, int a);
  static MixedAction uniform(int n_actions);
  bool is_pure(double tol = 1e-12) const;
  void validate(int n_actions, double tol = 1e-9) const;
};

// One mixed action per state, for each player.
struct StationaryProfile {
  std::vector<MixedAction> p1;
  std::vector<MixedAction> p2;
};

// Single player's half of a stationary profile.
using PolicyColumn = std::vector<MixedAction>;

// theta-indexed Markov policy: piecewise-constant selector on a grid of
// risk levels in (0, Theta]. At play time the action at time t is the
// selector at theta * exp(-alpha t), looked up with the left-node rule
// (largest node <= value, clamped to the first node below the grid).
struct EventuallyStationaryPolicy {
  std::vector<double> grid;                    // strictly increasing, > 0
  std::vector<std::vector<MixedAction>> at;    // [node][state]

  static EventuallyStationaryPolicy stationary(const PolicyColumn& col,
                                               double theta_max);
  const MixedAction& lookup(double theta, int state) const;
  int lookup_node(double theta) const;
  void validate(int n_states, int n_actions) const;
};

struct RiskParams {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double Theta = 0.0;   // common upper bound, thetas lie in (0, Theta)
  double alpha = 0.0;   // discount rate, > 0

  double theta(int player) const { return player == 1 ? theta1 : theta2; }
  void validate() const;
};

// Foster-Lyapunov certificate for the ergodic criterion:
//   Pi_v W(i) <= -2 delta W(i) + b 1_C(i)  for every pure action pair v.
struct LyapunovCertificate {
  std::vector<double> W;
  double b = 0.0;
  double delta = 0.0;
  std::vector<int> C;
  int i0 = 0;

  bool in_C(int state) const;
  // C0 = { j : W(j) >= 1 + b/delta }, always contains i0 for a valid cert.
  std::vector<int> derived_C0() const;
  void validate(int n_states) const;
};

// Controlled transition rates pi[i][j][u1][u2], stored flat.
struct RatesKernel {
  int n_states = 0;
  int n_u1 = 0;
  int n_u2 = 0;
  std::vector<double> pi;
  double M = 0.0;  // sup over (i,u1,u2) of -pi_ii

  double at(int i, int j, int u1, int u2) const {
    return pi[((static_cast<std::size_t>(i) * n_states + j) * n_u1 + u1) * n_u2 + u2];
  }
  double& at(int i, int j, int u1, int u2) {
    return pi[((static_cast<std::size_t>(i) * n_states + j) * n_u1 + u1) * n_u2 + u2];
  }
  // Mixed rate from i to j under (v1, v2).
  double mixed(int i, int j, const MixedAction& v1, const MixedAction& v2) const;
  void validate(double tol = 1e-12) const;
  void compute_M();
};

// Running cost r[i][u1][u2] for one player, nonnegative.
struct CostKernel {
  int n_states = 0;
  int n_u1 = 0;
  int n_u2 = 0;
  std::vector<double> r;
  double sup_norm = 0.0;

  double at(int i, int u1, int u2) const {
    return r[(static_cast<std::size_t>(i) * n_u1 + u1) * n_u2 + u2];
  }
  double& at(int i, int u1, int u2) {
    return r[(static_cast<std::size_t>(i) * n_u1 + u1) * n_u2 + u2];
  }
  double mixed(int i, const MixedAction& v1, const MixedAction& v2) const;
  void validate() const;
  void compute_sup();
};

// Additive (player-separable) decomposition of rates and costs:
//   pi_ij(u1,u2) = pi1_ij(u1) + pi2_ij(u2),  r_k(i,u1,u2) = rk1(i,u1) + rk2(i,u2).
// Gauge: the player-2 parts vanish at action index 0 of U2.
struct AratDecomposition {
  std::vector<double> rates1;  // [i][j][u1]
  std::vector<double> rates2;  // [i][j][u2]
  std::vector<double> cost11;  // [i][u1]
  std::vector<double> cost12;  // [i][u2]
  std::vector<double> cost21;  // [i][u1]
  std::vector<double> cost22;  // [i][u2]
};

struct GameModel {
  int n_states = 0;
  std::vector<std::string> actions1;
  std::vector<std::string> actions2;
  RatesKernel rates;
  CostKernel cost1;
  CostKernel cost2;
  std::optional<AratDecomposition> arat;
  std::optional<LyapunovCertificate> lyapunov;

  int n_u1() const { return static_cast<int>(actions1.size()); }
  int n_u2() const { return static_cast<int>(actions2.size()); }
  const CostKernel& cost(int player) const { return player == 1 ? cost1 : cost2; }
  int n_own_actions(int player) const { return player == 1 ? n_u1() : n_u2(); }
  int n_opp_actions(int player) const { return player == 1 ? n_u2() : n_u1(); }
  void validate(double tol = 1e-12) const;
};

GameModel load_model(const std::string& json_text, double tol = 1e-12);
GameModel load_model_file(const std::string& path, double tol = 1e-12);
std::string model_to_json(const GameModel& model);

// Strategy profile file: either {"type": "stationary", "p1": [[w...]...],
// "p2": [...]} with one weight vector per state, or
// {"type": "eventually_stationary", "p1": {"grid": [...], "at":
// [[[w...]...]...]}, "p2": {...}} with selectors indexed [node][state].
struct LoadedProfile {
  bool is_stationary = false;
  StationaryProfile stationary;            // filled when is_stationary
  EventuallyStationaryPolicy p1, p2;       // filled otherwise

  // view as theta-indexed policies; stationary columns are lifted with the
  // given final levels
  std::pair<EventuallyStationaryPolicy, EventuallyStationaryPolicy> as_policies(
      double theta1, double theta2) const;
};

LoadedProfile load_profile(const std::string& json_text, const GameModel& model);
LoadedProfile load_profile_file(const std::string& path, const GameModel& model);
std::string profile_to_json(const StationaryProfile& profile);
std::string profile_to_json(const EventuallyStationaryPolicy& p1,
                            const EventuallyStationaryPolicy& p2);
// one player's theta-indexed policy alone, as the {"grid", "at"} object
std::string policy_to_json(const EventuallyStationaryPolicy& p);

struct AratReport {
  bool decomposable = false;
  double max_residual = 0.0;  // worst absolute reassembly defect
  std::optional<AratDecomposition> decomposition;
};

// Tests whether rates and costs split additively across the players.
// A decomposition is always constructed from the gauge; the report is
// decomposable iff its reassembly residual is within tol.
AratReport check_arat(const GameModel& model, double tol = 1e-10);

struct LyapunovReport {
  bool holds = false;
  double worst_margin = 0.0;  // min over (i,u1,u2) of rhs - Pi_v W(i)
  int worst_state = -1;
  int worst_u1 = -1;
  int worst_u2 = -1;
  std::vector<int> C0;
};

// Checks the drift inequality over all pure action pairs (sufficient for all
// mixed pairs by bilinearity) and validates the certificate's shape.
LyapunovReport check_lyapunov(const GameModel& model,
                              const LyapunovCertificate& cert,
                              double tol = 1e-12);

struct SmallCostReport {
  bool holds = false;
  double slack1 = 0.0;  // delta - theta1 * ||r1||
  double slack2 = 0.0;
};

SmallCostReport check_small_cost(const GameModel& model, double theta1,
                                 double theta2,
                                 const LyapunovCertificate& cert);

}  // namespace rsgame
