#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rsgame/discounted.hpp"
#include "rsgame/ergodic.hpp"
#include "rsgame/generator.hpp"
#include "rsgame/model.hpp"
#include "rsgame/nash_discounted.hpp"
#include "rsgame/simulate.hpp"

// Shared test fixtures and independent oracles. Oracles go through Eigen's
// dense solvers and touch only the raw kernel storage, not the library's own
// mixing or eigen routines.

namespace testsup {

using rsgame::CounterRng;
using rsgame::EventuallyStationaryPolicy;
using rsgame::GameModel;
using rsgame::LyapunovCertificate;
using rsgame::MixedAction;
using rsgame::PolicyColumn;
using rsgame::StationaryProfile;

// ---------------------------------------------------------------- builders

inline GameModel skeleton(int n, int nu1, int nu2) {
  GameModel m;
  m.n_states = n;
  for (int a = 0; a < nu1; ++a) m.actions1.push_back("a" + std::to_string(a));
  for (int b = 0; b < nu2; ++b) m.actions2.push_back("b" + std::to_string(b));
  m.rates.n_states = n;
  m.rates.n_u1 = nu1;
  m.rates.n_u2 = nu2;
  m.rates.pi.assign(static_cast<std::size_t>(n) * n * nu1 * nu2, 0.0);
  m.cost1.n_states = n;
  m.cost1.n_u1 = nu1;
  m.cost1.n_u2 = nu2;
  m.cost1.r.assign(static_cast<std::size_t>(n) * nu1 * nu2, 0.0);
  m.cost2 = m.cost1;
  return m;
}

// fills diagonals so every row is conservative, refreshes cached sups
inline GameModel finalize(GameModel m) {
  const int n = m.n_states;
  for (int i = 0; i < n; ++i)
    for (int u1 = 0; u1 < m.n_u1(); ++u1)
      for (int u2 = 0; u2 < m.n_u2(); ++u2) {
        double s = 0.0;
        for (int j = 0; j < n; ++j)
          if (j != i) s += m.rates.at(i, j, u1, u2);
        m.rates.at(i, i, u1, u2) = -s;
      }
  m.rates.compute_M();
  m.cost1.compute_sup();
  m.cost2.compute_sup();
  m.validate();
  return m;
}

// ---------------------------------------------------------------- fixtures

// Q = [[-1, 1], [1, -1]], r = (0, 1), one action each. At theta = 1 the
// principal eigenvalue of Q + diag(r) is (sqrt(5) - 1) / 2 with eigenvector
// (1, (1 + sqrt(5)) / 2) once psi(0) = 1.
inline GameModel golden_model() {
  GameModel m = skeleton(2, 1, 1);
  m.rates.at(0, 1, 0, 0) = 1.0;
  m.rates.at(1, 0, 0, 0) = 1.0;
  m.cost1.at(1, 0, 0) = 1.0;
  m.cost2.at(1, 0, 0) = 1.0;
  return finalize(std::move(m));
}

// single state, zero-sum costs; unique equilibrium (1/2, 1/2) with value 1/2
inline GameModel matching_pennies() {
  GameModel m = skeleton(1, 2, 2);
  for (int u1 = 0; u1 < 2; ++u1)
    for (int u2 = 0; u2 < 2; ++u2) {
      m.cost1.at(0, u1, u2) = u1 == u2 ? 0.0 : 1.0;
      m.cost2.at(0, u1, u2) = u1 == u2 ? 1.0 : 0.0;
    }
  return finalize(std::move(m));
}

// action-independent rates, own-action costs: the unique equilibrium is the
// pair of independent pointwise cost minimizers (a1 for player 1, b0 for 2)
inline GameModel decoupled_model() {
  GameModel m = skeleton(2, 2, 2);
  const double c1[2][2] = {{0.3, 0.1}, {0.6, 0.2}};   // [state][u1]
  const double c2[2][2] = {{0.25, 0.5}, {0.15, 0.4}}; // [state][u2]
  for (int u1 = 0; u1 < 2; ++u1)
    for (int u2 = 0; u2 < 2; ++u2) {
      m.rates.at(0, 1, u1, u2) = 1.2;
      m.rates.at(1, 0, u1, u2) = 0.8;
      for (int i = 0; i < 2; ++i) {
        m.cost1.at(i, u1, u2) = c1[i][u1];
        m.cost2.at(i, u1, u2) = c2[i][u2];
      }
    }
  return finalize(std::move(m));
}

// two states, mild action-dependent rates, identically zero costs
inline GameModel zero_cost_model() {
  GameModel m = skeleton(2, 2, 2);
  for (int u1 = 0; u1 < 2; ++u1)
    for (int u2 = 0; u2 < 2; ++u2) {
      m.rates.at(0, 1, u1, u2) = 0.8 + 0.1 * u1 + 0.1 * u2;
      m.rates.at(1, 0, u1, u2) = 1.1 + 0.2 * u1 + 0.1 * u2;
    }
  return finalize(std::move(m));
}

// 4-state birth/death-like game with additive (player-separable) rates and
// costs and a Foster-Lyapunov certificate: W = (3, 4, 9, 12), b = 2,
// delta = 0.25, C = {0, 1}, C0 = {2, 3}, i0 = 3. theta = 0.2 keeps
// delta - theta ||r_k|| positive for both players.
inline GameModel chase_model() {
  GameModel m = skeleton(4, 2, 2);
  struct Edge {
    int i, j;
    double base, g1, g2;
  };
  const Edge edges[] = {
      {0, 1, 0.30, 0.05, 0.05}, {1, 0, 2.70, 0.30, 0.30},
      {1, 2, 0.18, 0.02, 0.02}, {2, 3, 0.90, 0.10, 0.10},
      {2, 0, 1.80, 0.20, 0.20}, {3, 2, 2.20, 0.20, 0.20},
  };
  const double c1base[4] = {0.0, 0.10, 0.30, 0.50};
  const double c2base[4] = {0.0, 0.12, 0.28, 0.45};
  const double d11[4] = {0.0, 0.04, 0.04, 0.04};
  const double d12[4] = {0.0, 0.04, 0.04, 0.04};
  const double d21[4] = {0.0, 0.03, 0.03, 0.03};
  const double d22[4] = {0.0, 0.05, 0.05, 0.05};
  for (int u1 = 0; u1 < 2; ++u1)
    for (int u2 = 0; u2 < 2; ++u2) {
      for (const Edge& e : edges)
        m.rates.at(e.i, e.j, u1, u2) = e.base + e.g1 * u1 + e.g2 * u2;
      for (int i = 0; i < 4; ++i) {
        m.cost1.at(i, u1, u2) = c1base[i] + d11[i] * u1 + d12[i] * u2;
        m.cost2.at(i, u1, u2) = c2base[i] + d21[i] * u1 + d22[i] * u2;
      }
    }
  LyapunovCertificate cert;
  cert.W = {3.0, 4.0, 9.0, 12.0};
  cert.b = 2.0;
  cert.delta = 0.25;
  cert.C = {0, 1};
  cert.i0 = 3;
  m.lyapunov = cert;
  return finalize(std::move(m));
}

// ---------------------------------------------------------------- random

struct Rng {
  CounterRng inner;
  explicit Rng(std::uint64_t seed) : inner(seed, 0) {}
  double uniform(double lo, double hi) { return lo + (hi - lo) * inner.uniform(); }
  int index(int n) { return std::min(n - 1, static_cast<int>(inner.uniform() * n)); }
};

// every off-diagonal rate positive, so the chain is irreducible under any
// profile; costs uniform in [0, cost_hi]
inline GameModel random_model(std::uint64_t seed, int n, int nu1, int nu2,
                              double rate_lo = 0.1, double rate_hi = 0.6,
                              double cost_hi = 1.0) {
  Rng rng(seed);
  GameModel m = skeleton(n, nu1, nu2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int u1 = 0; u1 < nu1; ++u1)
        for (int u2 = 0; u2 < nu2; ++u2) {
          if (i != j) m.rates.at(i, j, u1, u2) = rng.uniform(rate_lo, rate_hi);
          if (j == 0) {
            m.cost1.at(i, u1, u2) = rng.uniform(0.0, cost_hi);
            m.cost2.at(i, u1, u2) = rng.uniform(0.0, cost_hi);
          }
        }
  return finalize(std::move(m));
}

// player-separable random game: rates and costs are sums of an own-action
// and an opponent-action part, the class the equilibrium solvers target
inline GameModel random_arat_model(std::uint64_t seed, int n, int nu1, int nu2,
                                   double rate_hi = 0.5, double cost_hi = 0.5) {
  Rng rng(seed);
  GameModel m = skeleton(n, nu1, nu2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double base = rng.uniform(0.1, 0.4);
      std::vector<double> c1(nu1), c2(nu2);
      for (double& v : c1) v = rng.uniform(0.0, rate_hi);
      for (double& v : c2) v = rng.uniform(0.0, rate_hi);
      for (int u1 = 0; u1 < nu1; ++u1)
        for (int u2 = 0; u2 < nu2; ++u2)
          m.rates.at(i, j, u1, u2) = base + c1[u1] + c2[u2];
    }
    std::vector<double> e1(nu1), f1(nu2), e2(nu1), f2(nu2);
    for (double& v : e1) v = rng.uniform(0.0, cost_hi);
    for (double& v : f1) v = rng.uniform(0.0, cost_hi);
    for (double& v : e2) v = rng.uniform(0.0, cost_hi);
    for (double& v : f2) v = rng.uniform(0.0, cost_hi);
    for (int u1 = 0; u1 < nu1; ++u1)
      for (int u2 = 0; u2 < nu2; ++u2) {
        m.cost1.at(i, u1, u2) = e1[u1] + f1[u2];
        m.cost2.at(i, u1, u2) = e2[u1] + f2[u2];
      }
  }
  return finalize(std::move(m));
}

inline MixedAction random_mixed(Rng& rng, int n_actions) {
  MixedAction v;
  v.w.resize(n_actions);
  double s = 0.0;
  for (double& w : v.w) {
    w = 0.05 + rng.inner.uniform();
    s += w;
  }
  for (double& w : v.w) w /= s;
  return v;
}

inline PolicyColumn uniform_column(const GameModel& m, int player) {
  return PolicyColumn(m.n_states, MixedAction::uniform(m.n_own_actions(player)));
}

inline PolicyColumn random_column(const GameModel& m, int player, std::uint64_t seed) {
  Rng rng(seed);
  PolicyColumn col;
  for (int i = 0; i < m.n_states; ++i)
    col.push_back(random_mixed(rng, m.n_own_actions(player)));
  return col;
}

inline PolicyColumn pure_column(const GameModel& m, int player,
                                const std::vector<int>& actions) {
  PolicyColumn col;
  for (int i = 0; i < m.n_states; ++i)
    col.push_back(MixedAction::pure(m.n_own_actions(player), actions[i]));
  return col;
}

inline PolicyColumn random_pure_column(const GameModel& m, int player, Rng& rng) {
  std::vector<int> acts(m.n_states);
  for (int& a : acts) a = rng.index(m.n_own_actions(player));
  return pure_column(m, player, acts);
}

inline StationaryProfile uniform_profile(const GameModel& m) {
  return {uniform_column(m, 1), uniform_column(m, 2)};
}

inline StationaryProfile random_profile(const GameModel& m, std::uint64_t seed) {
  return {random_column(m, 1, seed), random_column(m, 2, seed + 1)};
}

// ---------------------------------------------------------------- oracles

inline double mixed_rate_raw(const GameModel& m, int i, int j,
                             const MixedAction& v1, const MixedAction& v2) {
  double s = 0.0;
  for (int u1 = 0; u1 < m.n_u1(); ++u1)
    for (int u2 = 0; u2 < m.n_u2(); ++u2)
      s += v1.w[u1] * v2.w[u2] * m.rates.at(i, j, u1, u2);
  return s;
}

inline double mixed_cost_raw(const GameModel& m, int player, int i,
                             const MixedAction& v1, const MixedAction& v2) {
  double s = 0.0;
  for (int u1 = 0; u1 < m.n_u1(); ++u1)
    for (int u2 = 0; u2 < m.n_u2(); ++u2)
      s += v1.w[u1] * v2.w[u2] * m.cost(player).at(i, u1, u2);
  return s;
}

// dense Q-bar + theta diag(r-bar) straight from the kernels
inline Eigen::MatrixXd dense_mixed_matrix(const GameModel& m,
                                          const StationaryProfile& prof,
                                          int player, double theta) {
  const int n = m.n_states;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      A(i, j) = mixed_rate_raw(m, i, j, prof.p1[i], prof.p2[i]);
    A(i, i) += theta * mixed_cost_raw(m, player, i, prof.p1[i], prof.p2[i]);
  }
  return A;
}

struct EigenPair {
  double lambda = 0.0;
  Eigen::VectorXd v;
};

// eigenvalue of largest real part; eigenvector rescaled positive
inline EigenPair principal_eigenpair(const Eigen::MatrixXd& A) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  int best = 0;
  for (int k = 1; k < A.rows(); ++k)
    if (es.eigenvalues()(k).real() > es.eigenvalues()(best).real()) best = k;
  EigenPair out;
  out.lambda = es.eigenvalues()(best).real();
  out.v = es.eigenvectors().col(best).real();
  int imax = 0;
  for (int i = 1; i < out.v.size(); ++i)
    if (std::abs(out.v(i)) > std::abs(out.v(imax))) imax = i;
  if (out.v(imax) < 0.0) out.v = -out.v;
  return out;
}

inline double oracle_theta_rho(const GameModel& m, const StationaryProfile& prof,
                               int player, double theta) {
  return principal_eigenpair(dense_mixed_matrix(m, prof, player, theta)).lambda;
}

// phi = (alpha I - Q-bar)^{-1} r-bar for a fixed profile
inline Eigen::VectorXd oracle_risk_neutral(const GameModel& m,
                                           const StationaryProfile& prof,
                                           int player, double alpha) {
  const int n = m.n_states;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      A(i, j) = -mixed_rate_raw(m, i, j, prof.p1[i], prof.p2[i]);
    A(i, i) += alpha;
    r(i) = mixed_cost_raw(m, player, i, prof.p1[i], prof.p2[i]);
  }
  return A.fullPivLu().solve(r);
}

// iterates all pure own policies against the fixed opponent column
template <typename Fn>
inline void for_each_pure_policy(const GameModel& m, int player, Fn&& fn) {
  const int n = m.n_states;
  const int na = m.n_own_actions(player);
  std::vector<int> acts(n, 0);
  for (;;) {
    fn(const_cast<const std::vector<int>&>(acts));
    int k = 0;
    while (k < n && ++acts[k] == na) acts[k++] = 0;
    if (k == n) break;
  }
}

inline StationaryProfile own_opp_to_profile(const GameModel& m, int player,
                                            const PolicyColumn& own,
                                            const PolicyColumn& opp) {
  return player == 1 ? StationaryProfile{own, opp} : StationaryProfile{opp, own};
}

// enumeration floor for the one-player ergodic problem
inline double oracle_ctmdp_min_theta_rho(const GameModel& m, int player,
                                         const PolicyColumn& opp, double theta) {
  double best = std::numeric_limits<double>::infinity();
  for_each_pure_policy(m, player, [&](const std::vector<int>& acts) {
    const StationaryProfile prof =
        own_opp_to_profile(m, player, pure_column(m, player, acts), opp);
    best = std::min(best, oracle_theta_rho(m, prof, player, theta));
  });
  return best;
}

// componentwise enumeration floor for the risk-neutral discounted problem
inline Eigen::VectorXd oracle_risk_neutral_min(const GameModel& m, int player,
                                               const PolicyColumn& opp,
                                               double alpha) {
  Eigen::VectorXd best =
      Eigen::VectorXd::Constant(m.n_states, std::numeric_limits<double>::infinity());
  for_each_pure_policy(m, player, [&](const std::vector<int>& acts) {
    const StationaryProfile prof =
        own_opp_to_profile(m, player, pure_column(m, player, acts), opp);
    best = best.cwiseMin(oracle_risk_neutral(m, prof, player, alpha));
  });
  return best;
}

// ---------------------------------------------- bimatrix support enumeration

struct BimatrixEq {
  std::vector<double> x, y;  // mixed actions of players 1 and 2
  double v1 = 0.0, v2 = 0.0; // expected costs
};

namespace detail_sup {

inline void subsets(int n, int k, std::vector<std::vector<int>>& out) {
  std::vector<int> cur;
  struct Rec {
    int n, k;
    std::vector<std::vector<int>>& out;
    void go(std::vector<int>& cur, int start) {
      if (static_cast<int>(cur.size()) == k) {
        out.push_back(cur);
        return;
      }
      for (int i = start; i < n; ++i) {
        cur.push_back(i);
        go(cur, i + 1);
        cur.pop_back();
      }
    }
  } rec{n, k, out};
  rec.go(cur, 0);
}

}  // namespace detail_sup

// all equilibria with balanced supports of a two-player cost matrix game
// (both players minimize); enough for nondegenerate games
inline std::vector<BimatrixEq> bimatrix_equilibria(
    const std::vector<std::vector<double>>& A,
    const std::vector<std::vector<double>>& B, double tol = 1e-9) {
  const int n1 = static_cast<int>(A.size());
  const int n2 = static_cast<int>(A[0].size());
  std::vector<BimatrixEq> found;
  for (int k = 1; k <= std::min(n1, n2); ++k) {
    std::vector<std::vector<int>> s1s, s2s;
    detail_sup::subsets(n1, k, s1s);
    detail_sup::subsets(n2, k, s2s);
    for (const auto& S1 : s1s)
      for (const auto& S2 : s2s) {
        // y equalizes player 1 over S1; x equalizes player 2 over S2
        Eigen::MatrixXd My = Eigen::MatrixXd::Zero(k, k);
        Eigen::VectorXd by = Eigen::VectorXd::Zero(k);
        for (int r = 0; r + 1 < k; ++r)
          for (int c = 0; c < k; ++c)
            My(r, c) = A[S1[r]][S2[c]] - A[S1[r + 1]][S2[c]];
        My.row(k - 1).setOnes();
        by(k - 1) = 1.0;
        Eigen::FullPivLU<Eigen::MatrixXd> luy(My);
        if (!luy.isInvertible()) continue;
        Eigen::VectorXd ys = luy.solve(by);

        Eigen::MatrixXd Mx = Eigen::MatrixXd::Zero(k, k);
        Eigen::VectorXd bx = Eigen::VectorXd::Zero(k);
        for (int c = 0; c + 1 < k; ++c)
          for (int r = 0; r < k; ++r)
            Mx(c, r) = B[S1[r]][S2[c]] - B[S1[r]][S2[c + 1]];
        Mx.row(k - 1).setOnes();
        bx(k - 1) = 1.0;
        Eigen::FullPivLU<Eigen::MatrixXd> lux(Mx);
        if (!lux.isInvertible()) continue;
        Eigen::VectorXd xs = lux.solve(bx);

        if (xs.minCoeff() < -tol || ys.minCoeff() < -tol) continue;
        std::vector<double> x(n1, 0.0), y(n2, 0.0);
        for (int r = 0; r < k; ++r) x[S1[r]] = std::max(0.0, xs(r));
        for (int c = 0; c < k; ++c) y[S2[c]] = std::max(0.0, ys(c));

        // best-response check against all pure actions
        std::vector<double> Ay(n1, 0.0), xB(n2, 0.0);
        for (int r = 0; r < n1; ++r)
          for (int c = 0; c < n2; ++c) Ay[r] += A[r][c] * y[c];
        for (int c = 0; c < n2; ++c)
          for (int r = 0; r < n1; ++r) xB[c] += B[r][c] * x[r];
        double v1 = 0.0, v2 = 0.0;
        for (int r = 0; r < n1; ++r) v1 += x[r] * Ay[r];
        for (int c = 0; c < n2; ++c) v2 += y[c] * xB[c];
        const double m1 = *std::min_element(Ay.begin(), Ay.end());
        const double m2 = *std::min_element(xB.begin(), xB.end());
        if (v1 > m1 + 1e-8 || v2 > m2 + 1e-8) continue;
        found.push_back({x, y, v1, v2});
      }
  }
  return found;
}

// single-state cost tables of one player as a dense matrix [u1][u2]
inline std::vector<std::vector<double>> single_state_costs(const GameModel& m,
                                                           int player) {
  std::vector<std::vector<double>> t(m.n_u1(), std::vector<double>(m.n_u2()));
  for (int u1 = 0; u1 < m.n_u1(); ++u1)
    for (int u2 = 0; u2 < m.n_u2(); ++u2) t[u1][u2] = m.cost(player).at(0, u1, u2);
  return t;
}

// ---------------------------------------------------------------- misc

inline double max_abs_diff(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace testsup
