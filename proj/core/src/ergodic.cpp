#include "rsgame/ergodic.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <ostream>
#include <set>
#include <string>
#include <utility>

#include "nash_common.hpp"
#include "rsgame/report.hpp"

namespace rsgame {

namespace {

int resolve_i0(const GameModel& model, int requested) {
  if (requested >= 0) {
    if (requested >= model.n_states)
      throw model_error("normalization state out of range");
    return requested;
  }
  if (model.lyapunov) return model.lyapunov->i0;
  return 0;
}

struct MixedData {
  std::vector<double> q;  // row-major mixed rates, n x n
  std::vector<double> r;  // the player's mixed cost rate per state
};

MixedData build_mixed(const GameModel& model, const StationaryProfile& profile,
                      int player) {
  const int n = model.n_states;
  MixedData d;
  d.q.assign(static_cast<std::size_t>(n) * n, 0.0);
  d.r.assign(static_cast<std::size_t>(n), 0.0);
  const CostKernel& cost = model.cost(player);
  for (int i = 0; i < n; ++i) {
    const MixedAction& v1 = profile.p1[static_cast<std::size_t>(i)];
    const MixedAction& v2 = profile.p2[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j)
      if (j != i)
        d.q[static_cast<std::size_t>(i) * n + j] =
            model.rates.mixed(i, j, v1, v2);
    d.r[static_cast<std::size_t>(i)] = cost.mixed(i, v1, v2);
  }
  return d;
}

// (A x)(i) for A = Q + theta diag(r), written in the centered form so a
// constant vector maps to exactly theta r x
void apply_A(const MixedData& d, double theta, const std::vector<double>& x,
             std::vector<double>& out) {
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) {
    double acc = theta * d.r[static_cast<std::size_t>(i)] *
                 x[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j)
      if (j != i)
        acc += d.q[static_cast<std::size_t>(i) * n + j] *
               (x[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(i)]);
    out[static_cast<std::size_t>(i)] = acc;
  }
}

PolicyColumn dirac_column(const std::vector<int>& policy, int n_actions) {
  PolicyColumn col;
  col.reserve(policy.size());
  for (int a : policy) col.push_back(MixedAction::pure(n_actions, a));
  return col;
}

StationaryProfile own_opp_profile(const GameModel& model, int player,
                                  const PolicyColumn& own,
                                  const PolicyColumn& opp) {
  if (player == 1) return StationaryProfile{own, opp};
  return StationaryProfile{opp, own};
}

PolicyColumn uniform_column(int n_states, int n_actions) {
  return PolicyColumn(static_cast<std::size_t>(n_states),
                      MixedAction::uniform(n_actions));
}

}  // namespace

PerronResult perron_value(const GameModel& model,
                          const StationaryProfile& profile, int player,
                          double theta, const PerronOptions& opts) {
  if (!(theta > 0.0)) throw model_error("theta must be positive");
  const int n = model.n_states;
  const int i0 = resolve_i0(model, opts.i0);
  GeneratorMatrix gen = rate_matrix(model, profile);
  if (!gen.irreducible())
    throw solver_error("profile induces a reducible chain");
  MixedData d = build_mixed(model, profile, player);

  double sup_r = 0.0;
  for (double v : d.r) sup_r = std::max(sup_r, std::fabs(v));
  const double h = 1.0 / (2.0 * (model.rates.M + theta * sup_r + 1.0));

  PerronResult res;
  res.psi.assign(static_cast<std::size_t>(n), 1.0);
  std::vector<double> ax(static_cast<std::size_t>(n), 0.0);
  std::vector<double> hat(static_cast<std::size_t>(n), 0.0);
  for (long it = 1; it <= opts.max_iterations; ++it) {
    apply_A(d, theta, res.psi, ax);
    // Rayleigh estimate for B = I + hA, then the eigenvalue of A
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
      double bi = res.psi[static_cast<std::size_t>(i)] +
                  h * ax[static_cast<std::size_t>(i)];
      num += res.psi[static_cast<std::size_t>(i)] * bi;
      den += res.psi[static_cast<std::size_t>(i)] *
             res.psi[static_cast<std::size_t>(i)];
      hat[static_cast<std::size_t>(i)] = bi;
    }
    const double lambda = (num / den - 1.0) / h;
    double sup = 0.0;
    for (double v : hat) sup = std::max(sup, std::fabs(v));
    if (!(sup > 0.0) || !std::isfinite(sup))
      throw solver_error("power iteration collapsed");
    for (double& v : hat) v /= sup;
    res.psi = hat;
    res.iterations = it;

    const double base = res.psi[static_cast<std::size_t>(i0)];
    if (base > 1e-300) {
      std::vector<double> norm(res.psi);
      for (double& v : norm) v /= base;
      apply_A(d, theta, norm, ax);
      double resid = 0.0;
      for (int i = 0; i < n; ++i)
        resid = std::max(resid, std::fabs(ax[static_cast<std::size_t>(i)] -
                                          lambda *
                                              norm[static_cast<std::size_t>(i)]));
      if (resid <= opts.tol) {
        res.psi = std::move(norm);
        res.lambda = lambda;
        res.rho = lambda / theta;
        res.residual = resid;
        for (double v : res.psi)
          if (!(v > 0.0))
            throw solver_error("principal eigenvector not positive");
        return res;
      }
    }
  }
  throw solver_error("power iteration did not reach the residual target");
}

ErgodicCtmdpResult solve_ergodic_ctmdp(const GameModel& model, int player,
                                       const PolicyColumn& opp, double theta,
                                       const ErgodicCtmdpOptions& opts) {
  const int n = model.n_states;
  const int n_own = model.n_own_actions(player);
  if (static_cast<int>(opp.size()) != n)
    throw model_error("opponent column has wrong length");

  auto evaluate = [&](const std::vector<int>& policy) {
    return perron_value(model,
                        own_opp_profile(model, player,
                                        dirac_column(policy, n_own), opp),
                        player, theta, opts.perron);
  };

  auto enumerate_all = [&]() {
    ErgodicCtmdpResult best;
    std::vector<int> policy(static_cast<std::size_t>(n), 0);
    bool first = true;
    while (true) {
      PerronResult pv = evaluate(policy);
      if (first || pv.lambda < best.lambda) {
        best.lambda = pv.lambda;
        best.rho = pv.rho;
        best.psi = pv.psi;
        best.policy = policy;
        first = false;
      }
      int k = n - 1;
      while (k >= 0) {
        if (++policy[static_cast<std::size_t>(k)] < n_own) break;
        policy[static_cast<std::size_t>(k)] = 0;
        --k;
      }
      if (k < 0) break;
    }
    best.used_enumeration = true;
    return best;
  };

  long total = 1;
  bool enumerable = true;
  for (int i = 0; i < n; ++i) {
    total *= n_own;
    if (total > opts.enumeration_cap) {
      enumerable = false;
      break;
    }
  }

  std::vector<int> policy(static_cast<std::size_t>(n), 0);
  std::set<std::vector<int>> seen;
  ErgodicCtmdpResult res;
  for (int round = 1; round <= opts.max_rounds; ++round) {
    if (!seen.insert(policy).second) {
      if (!enumerable)
        throw solver_error("policy iteration cycled and the policy space is "
                           "too large to enumerate");
      res = enumerate_all();
      res.rounds = round;
      break;
    }
    PerronResult pv = evaluate(policy);
    bool changed = false;
    std::vector<int> next(policy);
    for (int i = 0; i < n; ++i) {
      HamiltonianMin hm =
          hamiltonian_min(model, player, i, opp[static_cast<std::size_t>(i)],
                          pv.psi, theta, pv.psi[static_cast<std::size_t>(i)]);
      double cur = hamiltonian_at(
          model, player, i,
          MixedAction::pure(n_own, policy[static_cast<std::size_t>(i)]),
          opp[static_cast<std::size_t>(i)], pv.psi, theta,
          pv.psi[static_cast<std::size_t>(i)]);
      if (hm.value <
          cur - opts.improve_tol * std::max(1.0, std::fabs(cur))) {
        next[static_cast<std::size_t>(i)] = hm.action;
        changed = true;
      }
    }
    if (!changed) {
      res.lambda = pv.lambda;
      res.rho = pv.rho;
      res.psi = pv.psi;
      res.policy = policy;
      res.rounds = round;
      break;
    }
    policy = std::move(next);
    if (round == opts.max_rounds)
      throw solver_error("policy iteration did not settle");
  }

  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    HamiltonianMin hm =
        hamiltonian_min(model, player, i, opp[static_cast<std::size_t>(i)],
                        res.psi, theta, res.psi[static_cast<std::size_t>(i)]);
    worst = std::max(worst, std::fabs(hm.value -
                                      res.lambda *
                                          res.psi[static_cast<std::size_t>(i)]));
  }
  res.bellman_residual = worst;
  if (worst > opts.residual_tol)
    throw solver_error("ergodic Bellman residual " + g17(worst) +
                       " above tolerance");
  return res;
}

namespace {

struct ErgodicCertification {
  PerronResult pv1, pv2;
  ErgodicCtmdpResult br1, br2;
  double gap1 = 0.0, gap2 = 0.0;
  double residual_min1 = 0.0, residual_min2 = 0.0;
  bool ok = false;
};

double min_hamiltonian_residual(const GameModel& model, int player,
                                const PolicyColumn& opp,
                                const PerronResult& pv, double theta) {
  double worst = 0.0;
  for (int i = 0; i < model.n_states; ++i) {
    HamiltonianMin hm =
        hamiltonian_min(model, player, i, opp[static_cast<std::size_t>(i)],
                        pv.psi, theta, pv.psi[static_cast<std::size_t>(i)]);
    worst = std::max(worst,
                     std::fabs(hm.value -
                               pv.lambda * pv.psi[static_cast<std::size_t>(i)]));
  }
  return worst;
}

ErgodicCertification certify_profile(const GameModel& model,
                                     const StationaryProfile& profile,
                                     double theta1, double theta2,
                                     const ErgodicNashOptions& opts) {
  ErgodicCertification c;
  ErgodicCtmdpOptions copts;
  copts.perron = opts.perron;
  copts.residual_tol = 1e-6;  // sanity only; the profile has its own gate
  auto side1 = [&]() {
    c.pv1 = perron_value(model, profile, 1, theta1, opts.perron);
    c.br1 = solve_ergodic_ctmdp(model, 1, profile.p2, theta1, copts);
  };
  auto side2 = [&]() {
    c.pv2 = perron_value(model, profile, 2, theta2, opts.perron);
    c.br2 = solve_ergodic_ctmdp(model, 2, profile.p1, theta2, copts);
  };
  if (opts.threads >= 2) {
    auto f = std::async(std::launch::async, side1);
    side2();
    f.get();
  } else {
    side1();
    side2();
  }
  c.gap1 = c.pv1.rho - c.br1.rho;
  c.gap2 = c.pv2.rho - c.br2.rho;
  c.residual_min1 = min_hamiltonian_residual(model, 1, profile.p2, c.pv1, theta1);
  c.residual_min2 = min_hamiltonian_residual(model, 2, profile.p1, c.pv2, theta2);
  c.ok = c.gap1 <= opts.tol_gap && c.gap2 <= opts.tol_gap &&
         c.residual_min1 <= opts.residual_tol &&
         c.residual_min2 <= opts.residual_tol;
  return c;
}

std::optional<StationaryProfile> equalizer_candidate(
    const GameModel& model, const StationaryProfile& incumbent,
    const std::vector<double>& psi1, const std::vector<double>& psi2,
    double theta1, double theta2, double support_tol) {
  const int n = model.n_states;
  StationaryProfile out;
  out.p1.resize(static_cast<std::size_t>(n));
  out.p2.resize(static_cast<std::size_t>(n));
  std::vector<double> a, b;
  for (int i = 0; i < n; ++i) {
    detail::local_tables(model, i, psi1, psi2, theta1, theta2, a, b);
    std::vector<int> s1 =
        detail::support_of(incumbent.p1[static_cast<std::size_t>(i)].w,
                           support_tol);
    std::vector<int> s2 =
        detail::support_of(incumbent.p2[static_cast<std::size_t>(i)].w,
                           support_tol);
    auto eq = detail::equalize_bimatrix(a, b, model.n_u1(), model.n_u2(), s1, s2);
    if (!eq) return std::nullopt;
    out.p1[static_cast<std::size_t>(i)].w = std::move(eq->first);
    out.p2[static_cast<std::size_t>(i)].w = std::move(eq->second);
  }
  return out;
}

double profile_change(const StationaryProfile& a, const StationaryProfile& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.p1.size(); ++i) {
    for (std::size_t u = 0; u < a.p1[i].w.size(); ++u)
      worst = std::max(worst, std::fabs(a.p1[i].w[u] - b.p1[i].w[u]));
    for (std::size_t u = 0; u < a.p2[i].w.size(); ++u)
      worst = std::max(worst, std::fabs(a.p2[i].w[u] - b.p2[i].w[u]));
  }
  return worst;
}

void fill_solution(ErgodicSolution& sol, const StationaryProfile& profile,
                   const ErgodicCertification& c) {
  sol.profile = profile;
  sol.rho1 = c.pv1.rho;
  sol.rho2 = c.pv2.rho;
  sol.psi1 = c.pv1.psi;
  sol.psi2 = c.pv2.psi;
  sol.gap1 = c.gap1;
  sol.gap2 = c.gap2;
  sol.residual_min1 = c.residual_min1;
  sol.residual_min2 = c.residual_min2;
  sol.residual_eval1 = c.pv1.residual;
  sol.residual_eval2 = c.pv2.residual;
  sol.certified = c.ok;
}

}  // namespace

ErgodicSolution solve_nash_ergodic(const GameModel& model, double theta1,
                                   double theta2,
                                   const ErgodicNashOptions& opts) {
  if (!(theta1 > 0.0) || !(theta2 > 0.0))
    throw model_error("theta must be positive");
  const int n = model.n_states;
  ErgodicSolution sol;
  sol.theta1 = theta1;
  sol.theta2 = theta2;

  StationaryProfile incumbent{uniform_column(n, model.n_u1()),
                              uniform_column(n, model.n_u2())};
  StationaryProfile prev = incumbent;

  for (int t = 0; t < opts.max_rounds; ++t) {
    ErgodicCertification c =
        certify_profile(model, incumbent, theta1, theta2, opts);
    sol.trace.push_back({t, t == 0 ? 0.0 : profile_change(incumbent, prev),
                         c.gap1, c.gap2});
    sol.rounds = t + 1;
    if (c.ok) {
      fill_solution(sol, incumbent, c);
      return sol;
    }

    StationaryProfile brpair{dirac_column(c.br1.policy, model.n_u1()),
                             dirac_column(c.br2.policy, model.n_u2())};
    ErgodicCertification cbr =
        certify_profile(model, brpair, theta1, theta2, opts);
    if (cbr.ok) {
      fill_solution(sol, brpair, cbr);
      return sol;
    }

    // support-restricted indifference candidate, refined a few times through
    // its own eigenvectors
    std::vector<double> psi1 = c.pv1.psi;
    std::vector<double> psi2 = c.pv2.psi;
    std::optional<StationaryProfile> cand;
    for (int inner = 0; inner < 3; ++inner) {
      cand = equalizer_candidate(model, incumbent, psi1, psi2, theta1, theta2,
                                 opts.support_tol);
      if (!cand) break;
      try {
        psi1 = perron_value(model, *cand, 1, theta1, opts.perron).psi;
        psi2 = perron_value(model, *cand, 2, theta2, opts.perron).psi;
      } catch (const solver_error&) {
        cand.reset();
        break;
      }
    }
    if (cand) {
      ErgodicCertification cp =
          certify_profile(model, *cand, theta1, theta2, opts);
      if (cp.ok) {
        fill_solution(sol, *cand, cp);
        return sol;
      }
    }

    prev = incumbent;
    const double lam = 1.0 / static_cast<double>(t + 1);
    for (int i = 0; i < n; ++i) {
      for (std::size_t u = 0; u < incumbent.p1[static_cast<std::size_t>(i)].w.size(); ++u)
        incumbent.p1[static_cast<std::size_t>(i)].w[u] =
            (1.0 - lam) * incumbent.p1[static_cast<std::size_t>(i)].w[u] +
            lam * brpair.p1[static_cast<std::size_t>(i)].w[u];
      for (std::size_t u = 0; u < incumbent.p2[static_cast<std::size_t>(i)].w.size(); ++u)
        incumbent.p2[static_cast<std::size_t>(i)].w[u] =
            (1.0 - lam) * incumbent.p2[static_cast<std::size_t>(i)].w[u] +
            lam * brpair.p2[static_cast<std::size_t>(i)].w[u];
    }
  }

  ErgodicCertification c = certify_profile(model, incumbent, theta1, theta2, opts);
  fill_solution(sol, incumbent, c);
  sol.certified = false;
  return sol;
}

void ErgodicSolution::write_trace_csv(std::ostream& os) const {
  os << "round,policy_change,gap1,gap2\n";
  for (const auto& row : trace) {
    os << row.round << ',';
    write_g17(os, row.policy_change);
    os << ',';
    write_g17(os, row.gap1);
    os << ',';
    write_g17(os, row.gap2);
    os << '\n';
  }
}

GameModel truncate_costs(const GameModel& model, int n) {
  if (n < 1 || n > model.n_states)
    throw model_error("truncation index out of range");
  GameModel out = model;
  for (int i = n; i < model.n_states; ++i)
    for (int u1 = 0; u1 < model.n_u1(); ++u1)
      for (int u2 = 0; u2 < model.n_u2(); ++u2) {
        const std::size_t idx =
            (static_cast<std::size_t>(i) * model.n_u1() + u1) * model.n_u2() +
            u2;
        out.cost1.r[idx] = 0.0;
        out.cost2.r[idx] = 0.0;
      }
  if (out.arat) {
    for (int i = n; i < model.n_states; ++i) {
      for (int u1 = 0; u1 < model.n_u1(); ++u1) {
        out.arat->cost11[static_cast<std::size_t>(i) * model.n_u1() + u1] = 0.0;
        out.arat->cost21[static_cast<std::size_t>(i) * model.n_u1() + u1] = 0.0;
      }
      for (int u2 = 0; u2 < model.n_u2(); ++u2) {
        out.arat->cost12[static_cast<std::size_t>(i) * model.n_u2() + u2] = 0.0;
        out.arat->cost22[static_cast<std::size_t>(i) * model.n_u2() + u2] = 0.0;
      }
    }
  }
  out.cost1.compute_sup();
  out.cost2.compute_sup();
  return out;
}

DiscountTrace vanishing_discount_probe(const GameModel& model, double theta,
                                       int player, const PolicyColumn& opp,
                                       const std::vector<double>& alpha_list,
                                       const GridSpec& grid, int i0) {
  if (!(theta > 0.0)) throw model_error("theta must be positive");
  if (alpha_list.empty()) throw model_error("empty alpha list");
  DiscountTrace tr;
  tr.theta = theta;
  tr.player = player;
  tr.i0 = resolve_i0(model, i0);

  ErgodicCtmdpResult ref = solve_ergodic_ctmdp(model, player, opp, theta);
  tr.rho_reference = ref.rho;
  tr.theta_rho_reference = ref.lambda;

  const double sup_r = model.cost(player).sup_norm;
  for (double alpha : alpha_list) {
    if (!(alpha > 0.0)) throw model_error("alpha must be positive");
    long steps = grid.steps;
    const long scaled =
        static_cast<long>(std::ceil(4.0 * theta * sup_r / alpha));
    steps = std::max(steps, scaled);
    // one extra node past theta so the derivative can be centered
    GridSpec ext{static_cast<int>(steps + 1)};
    const double h = theta / static_cast<double>(steps);
    const double theta_ext = h * static_cast<double>(steps + 1);
    EventuallyStationaryPolicy opp_pol =
        EventuallyStationaryPolicy::stationary(opp, theta_ext);
    ValueCurve curve =
        solve_discounted_hjb(model, player, opp_pol, alpha, theta_ext, ext);

    const std::size_t m = static_cast<std::size_t>(steps);
    const double phi_mid = curve.phi[m][static_cast<std::size_t>(tr.i0)];
    const double dphi =
        (curve.phi[m + 1][static_cast<std::size_t>(tr.i0)] -
         curve.phi[m - 1][static_cast<std::size_t>(tr.i0)]) /
        (2.0 * h);
    DiscountTraceRow row;
    row.alpha = alpha;
    row.g = theta * (alpha * phi_mid + theta * alpha * dphi);
    row.psibar.resize(static_cast<std::size_t>(model.n_states));
    const double base = curve.psi[m][static_cast<std::size_t>(tr.i0)];
    for (int s = 0; s < model.n_states; ++s)
      row.psibar[static_cast<std::size_t>(s)] =
          curve.psi[m][static_cast<std::size_t>(s)] / base;
    tr.rows.push_back(std::move(row));
  }
  return tr;
}

std::vector<double> default_probe_alphas() {
  std::vector<double> a;
  for (int k = 0; k <= 10; ++k) a.push_back(std::ldexp(1.0, -k));
  return a;
}

void DiscountTrace::write_csv(std::ostream& os) const {
  os << "alpha,g,abs_err";
  for (std::size_t s = 0; s < (rows.empty() ? 0 : rows[0].psibar.size()); ++s)
    os << ",psibar_" << s;
  os << '\n';
  for (const auto& row : rows) {
    write_g17(os, row.alpha);
    os << ',';
    write_g17(os, row.g);
    os << ',';
    write_g17(os, std::fabs(row.g - theta_rho_reference));
    for (double v : row.psibar) {
      os << ',';
      write_g17(os, v);
    }
    os << '\n';
  }
}

}  // namespace rsgame
