#include "rsgame/discounted.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace rsgame {

EventuallyStationaryPolicy ValueCurve::minimizer_policy(
    const GameModel& model) const {
  if (minimizer.empty())
    throw model_error("curve carries no minimizing selectors");
  EventuallyStationaryPolicy p;
  int n_own = model.n_own_actions(player);
  for (int m = 1; m < n_nodes(); ++m) {
    p.grid.push_back(grid[m]);
    std::vector<MixedAction> col;
    col.reserve(n_states());
    for (int i = 0; i < n_states(); ++i)
      col.push_back(MixedAction::pure(n_own, minimizer[m][i]));
    p.at.push_back(std::move(col));
  }
  return p;
}

namespace {

void write_g17(std::ostream& os, double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  os << buf;
}

}  // namespace

void ValueCurve::write_csv(std::ostream& os) const {
  os << "theta,state,psi,phi,minimizer\n";
  for (int m = 0; m < n_nodes(); ++m)
    for (int i = 0; i < n_states(); ++i) {
      write_g17(os, grid[m]);
      os << ',' << i << ',';
      write_g17(os, psi[m][i]);
      os << ',';
      write_g17(os, phi[m][i]);
      os << ',' << (minimizer.empty() ? -1 : minimizer[m][i]) << '\n';
    }
}

namespace {

// One value-iteration pass; H(i) = min (or fixed mix) Hamiltonian at phi.
template <typename Ham>
RiskNeutralResult value_iterate(const GameModel& model, double alpha,
                                const RiskNeutralOptions& opts, Ham&& ham) {
  const int n = model.n_states;
  const double lambda = model.rates.M;
  std::vector<double> phi(n, 0.0), next(n, 0.0), h(n, 0.0);
  RiskNeutralResult res;
  const double eps = std::numeric_limits<double>::epsilon();
  for (long it = 0; it < opts.max_iterations; ++it) {
    double sup_phi = 0.0;
    for (int i = 0; i < n; ++i) {
      h[i] = ham(i, phi);
      next[i] = (h[i] + lambda * phi[i]) / (alpha + lambda);
      sup_phi = std::max(sup_phi, std::abs(next[i]));
    }
    double resid = 0.0;
    for (int i = 0; i < n; ++i)
      resid = std::max(resid, std::abs(alpha * phi[i] - h[i]));
    phi.swap(next);
    res.iterations = it + 1;
    res.residual = resid;
    // 1e-12 target with a floor at the precision attainable in doubles
    double floor = 32.0 * eps * (lambda + alpha) * std::max(1.0, sup_phi);
    if (resid <= std::max(opts.tol, floor)) {
      res.phi = phi;
      return res;
    }
  }
  throw solver_error(
      "risk-neutral value iteration did not converge (alpha too small for "
      "the iteration scheme); residual=" +
      std::to_string(res.residual));
}

}  // namespace

RiskNeutralResult solve_risk_neutral_discounted(const GameModel& model,
                                                int player,
                                                const PolicyColumn& opp,
                                                double alpha,
                                                const RiskNeutralOptions& opts) {
  if (!(alpha > 0.0)) throw model_error("alpha must be > 0");
  return value_iterate(model, alpha, opts,
                       [&](int i, const std::vector<double>& f) {
                         return hamiltonian_min(model, player, i, opp[i], f,
                                                1.0, 1.0)
                             .value;
                       });
}

RiskNeutralResult risk_neutral_evaluate(const GameModel& model,
                                        const PolicyColumn& v1,
                                        const PolicyColumn& v2, int player,
                                        double alpha,
                                        const RiskNeutralOptions& opts) {
  if (!(alpha > 0.0)) throw model_error("alpha must be > 0");
  const PolicyColumn& own = player == 1 ? v1 : v2;
  const PolicyColumn& opp = player == 1 ? v2 : v1;
  return value_iterate(model, alpha, opts,
                       [&](int i, const std::vector<double>& f) {
                         return hamiltonian_at(model, player, i, own[i],
                                               opp[i], f, 1.0, 1.0);
                       });
}

namespace {

struct OdeProblem {
  const GameModel& model;
  int player;
  double alpha;
  double sup_r;
  // fills dpsi and, when record is non-null, the minimizing actions
  virtual void rhs(double theta, const std::vector<double>& psi,
                   std::vector<double>& dpsi, std::vector<int>* record) const = 0;
  OdeProblem(const GameModel& m, int pl, double a)
      : model(m), player(pl), alpha(a), sup_r(m.cost(pl).sup_norm) {}
  virtual ~OdeProblem() = default;
};

// Policies are indexed by their owner's decaying risk level. Both levels
// decay at the same exponential rate, so when the integration variable for
// this player sits at theta, a policy whose final level is pol.grid.back()
// must be consulted at theta * (pol.grid.back() / theta_max). The ratio is
// snapped to 1 when the levels agree up to rounding.
double level_ratio(const EventuallyStationaryPolicy& pol, double theta_max) {
  const double r = pol.grid.back() / theta_max;
  return std::abs(r - 1.0) <= 1e-9 ? 1.0 : r;
}

struct MinProblem : OdeProblem {
  const EventuallyStationaryPolicy& opp;
  double opp_scale;
  MinProblem(const GameModel& m, int pl, double a,
             const EventuallyStationaryPolicy& o, double theta_max)
      : OdeProblem(m, pl, a), opp(o), opp_scale(level_ratio(o, theta_max)) {}
  void rhs(double theta, const std::vector<double>& psi,
           std::vector<double>& dpsi, std::vector<int>* record) const override {
    int node = opp.lookup_node(theta * opp_scale);
    for (int i = 0; i < model.n_states; ++i) {
      HamiltonianMin hm = hamiltonian_min(model, player, i, opp.at[node][i],
                                          psi, theta, psi[i]);
      dpsi[i] = hm.value / (alpha * theta);
      if (record) (*record)[i] = hm.action;
    }
  }
};

struct EvalProblem : OdeProblem {
  const EventuallyStationaryPolicy& pol1;
  const EventuallyStationaryPolicy& pol2;
  double scale1;
  double scale2;
  EvalProblem(const GameModel& m, int pl, double a,
              const EventuallyStationaryPolicy& p1,
              const EventuallyStationaryPolicy& p2, double theta_max)
      : OdeProblem(m, pl, a),
        pol1(p1),
        pol2(p2),
        scale1(level_ratio(p1, theta_max)),
        scale2(level_ratio(p2, theta_max)) {}
  void rhs(double theta, const std::vector<double>& psi,
           std::vector<double>& dpsi, std::vector<int>* record) const override {
    (void)record;
    int m1 = pol1.lookup_node(theta * scale1);
    int m2 = pol2.lookup_node(theta * scale2);
    for (int i = 0; i < model.n_states; ++i) {
      const MixedAction& own =
          player == 1 ? pol1.at[m1][i] : pol2.at[m2][i];
      const MixedAction& opp =
          player == 1 ? pol2.at[m2][i] : pol1.at[m1][i];
      dpsi[i] = hamiltonian_at(model, player, i, own, opp, psi, theta,
                               psi[i]) /
                (alpha * theta);
    }
  }
};

// classical RK4 from theta to theta + h
void rk4_step(const OdeProblem& prob, double theta, double h,
              std::vector<double>& psi, std::vector<double>& k1,
              std::vector<double>& k2, std::vector<double>& k3,
              std::vector<double>& k4, std::vector<double>& tmp) {
  const int n = static_cast<int>(psi.size());
  prob.rhs(theta, psi, k1, nullptr);
  for (int i = 0; i < n; ++i) tmp[i] = psi[i] + 0.5 * h * k1[i];
  prob.rhs(theta + 0.5 * h, tmp, k2, nullptr);
  for (int i = 0; i < n; ++i) tmp[i] = psi[i] + 0.5 * h * k2[i];
  prob.rhs(theta + 0.5 * h, tmp, k3, nullptr);
  for (int i = 0; i < n; ++i) tmp[i] = psi[i] + h * k3[i];
  prob.rhs(theta + h, tmp, k4, nullptr);
  for (int i = 0; i < n; ++i)
    psi[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

ValueCurve integrate_curve(const OdeProblem& prob, double theta_max,
                           const GridSpec& grid, bool record_min,
                           const std::vector<double>& phi0) {
  grid.validate();
  if (!(theta_max > 0.0)) throw model_error("theta_max must be > 0");
  const int n = prob.model.n_states;
  const int N = grid.steps;
  const double h = theta_max / N;

  ValueCurve curve;
  curve.player = prob.player;
  curve.alpha = prob.alpha;
  curve.grid.resize(N + 1);
  curve.psi.assign(N + 1, std::vector<double>(n, 1.0));
  curve.phi.assign(N + 1, phi0);
  if (record_min) curve.minimizer.assign(N + 1, std::vector<int>(n, 0));
  for (int m = 0; m <= N; ++m) curve.grid[m] = h * m;

  // seed the first positive node from the risk-neutral limit
  std::vector<double> psi(n);
  for (int i = 0; i < n; ++i) psi[i] = std::exp(h * phi0[i]);
  curve.psi[1] = psi;

  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n), dpsi(n);
  const double env_tol = 1e-6;
  const double z_max = 1.25;  // RK4 accuracy/stability budget per substep

  auto check_envelope = [&](int node) {
    double bound = std::exp(curve.grid[node] * prob.sup_r / prob.alpha);
    for (int i = 0; i < n; ++i) {
      double v = curve.psi[node][i];
      if (v < 1.0 - env_tol * (1.0 + bound) ||
          v > bound + env_tol * (1.0 + bound))
        throw solver_error("envelope violation at theta=" +
                           std::to_string(curve.grid[node]) + " state " +
                           std::to_string(i) + " (step size too coarse)");
    }
  };

  auto record_node = [&](int node) {
    double theta = curve.grid[node];
    if (record_min) {
      std::vector<int> rec(n, 0);
      prob.rhs(theta, curve.psi[node], dpsi, &rec);
      curve.minimizer[node] = std::move(rec);
    }
    for (int i = 0; i < n; ++i)
      curve.phi[node][i] = std::log(curve.psi[node][i]) / theta;
    check_envelope(node);
  };

  record_node(1);
  for (int m = 1; m < N; ++m) {
    double theta = curve.grid[m];
    // deterministic stiffness rule: Jacobian scale (2M + theta ||r||)/(alpha theta)
    double lip = (2.0 * prob.model.rates.M + theta * prob.sup_r) /
                 (prob.alpha * theta);
    int sub = std::max(1, static_cast<int>(std::ceil(h * lip / z_max)));
    double hs = h / sub;
    for (int s = 0; s < sub; ++s)
      rk4_step(prob, theta + s * hs, hs, psi, k1, k2, k3, k4, tmp);
    curve.psi[m + 1] = psi;
    record_node(m + 1);
  }
  // node 0: psi = 1 exactly, phi holds the risk-neutral limit, and the
  // selector is the risk-neutral minimizer (the theta -> 0 limit)
  if (record_min) {
    const MinProblem& mp = static_cast<const MinProblem&>(prob);
    int node = mp.opp.lookup_node(0.0);
    for (int i = 0; i < n; ++i)
      curve.minimizer[0][i] =
          hamiltonian_min(prob.model, prob.player, i, mp.opp.at[node][i], phi0,
                          1.0, 1.0)
              .action;
  }
  return curve;
}

PolicyColumn column_at_origin(const EventuallyStationaryPolicy& pol) {
  return pol.at.front();
}

}  // namespace

ValueCurve solve_discounted_hjb(const GameModel& model, int player,
                                const EventuallyStationaryPolicy& opp,
                                double alpha, double theta_max,
                                const GridSpec& grid) {
  if (!(alpha > 0.0)) throw model_error("alpha must be > 0");
  opp.validate(model.n_states, model.n_opp_actions(player));
  RiskNeutralResult seed =
      solve_risk_neutral_discounted(model, player, column_at_origin(opp), alpha);
  MinProblem prob(model, player, alpha, opp, theta_max);
  return integrate_curve(prob, theta_max, grid, true, seed.phi);
}

ValueCurve evaluate_discounted_profile(const GameModel& model,
                                       const EventuallyStationaryPolicy& pol1,
                                       const EventuallyStationaryPolicy& pol2,
                                       double alpha, double theta_max,
                                       int player, const GridSpec& grid) {
  if (!(alpha > 0.0)) throw model_error("alpha must be > 0");
  pol1.validate(model.n_states, model.n_u1());
  pol2.validate(model.n_states, model.n_u2());
  RiskNeutralResult seed =
      risk_neutral_evaluate(model, column_at_origin(pol1),
                            column_at_origin(pol2), player, alpha);
  EvalProblem prob(model, player, alpha, pol1, pol2, theta_max);
  return integrate_curve(prob, theta_max, grid, false, seed.phi);
}

}  // namespace rsgame
