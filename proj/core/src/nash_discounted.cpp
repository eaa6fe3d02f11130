#include "rsgame/nash_discounted.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <ostream>
#include <utility>

#include "nash_common.hpp"
#include "rsgame/report.hpp"

namespace rsgame {

EventuallyStationaryPolicy best_response_discounted(
    const GameModel& model, int player, const EventuallyStationaryPolicy& opp,
    double alpha, double theta_player, const GridSpec& grid) {
  ValueCurve curve =
      solve_discounted_hjb(model, player, opp, alpha, theta_player, grid);
  return curve.minimizer_policy(model);
}

namespace {

EventuallyStationaryPolicy uniform_policy(const GameModel& model, int player,
                                          double theta_max, int steps) {
  EventuallyStationaryPolicy p;
  const int n_own = model.n_own_actions(player);
  const double h = theta_max / steps;
  for (int m = 1; m <= steps; ++m) {
    p.grid.push_back(h * m);
    p.at.emplace_back(static_cast<std::size_t>(model.n_states),
                      MixedAction::uniform(n_own));
  }
  return p;
}

struct Certification {
  ValueCurve ev1, ev2;    // profile values on [0, theta_k]
  ValueCurve br1, br2;    // best-response curves with recorded minimizers
  double gap1 = 0.0, gap2 = 0.0;
  bool ok = false;
};

double terminal_gap(const ValueCurve& ev, const ValueCurve& br) {
  double worst = -std::numeric_limits<double>::infinity();
  const auto& a = ev.psi.back();
  const auto& b = br.psi.back();
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, a[i] - b[i]);
  return worst;
}

Certification certify(const GameModel& model,
                      const EventuallyStationaryPolicy& pol1,
                      const EventuallyStationaryPolicy& pol2, double alpha,
                      double theta1, double theta2,
                      const DiscountedNashOptions& opts) {
  Certification c;
  auto side1 = [&]() {
    c.ev1 = evaluate_discounted_profile(model, pol1, pol2, alpha, theta1, 1,
                                        opts.grid);
    c.br1 = solve_discounted_hjb(model, 1, pol2, alpha, theta1, opts.grid);
  };
  auto side2 = [&]() {
    c.ev2 = evaluate_discounted_profile(model, pol1, pol2, alpha, theta2, 2,
                                        opts.grid);
    c.br2 = solve_discounted_hjb(model, 2, pol1, alpha, theta2, opts.grid);
  };
  if (opts.threads >= 2) {
    auto f = std::async(std::launch::async, side1);
    side2();
    f.get();
  } else {
    side1();
    side2();
  }
  c.gap1 = terminal_gap(c.ev1, c.br1);
  c.gap2 = terminal_gap(c.ev2, c.br2);
  c.ok = c.gap1 <= opts.tol_gap && c.gap2 <= opts.tol_gap;
  return c;
}

// Per node and state, remix both players inside the incumbent supports so
// the local tables built from the profile's own value curves are equalized.
std::optional<std::pair<EventuallyStationaryPolicy, EventuallyStationaryPolicy>>
equalizer_candidate(const GameModel& model,
                    const EventuallyStationaryPolicy& inc1,
                    const EventuallyStationaryPolicy& inc2,
                    const ValueCurve& ev1, const ValueCurve& ev2,
                    double support_tol) {
  EventuallyStationaryPolicy out1 = inc1;
  EventuallyStationaryPolicy out2 = inc2;
  const int pieces = static_cast<int>(inc1.grid.size());
  if (static_cast<int>(inc2.grid.size()) != pieces ||
      ev1.n_nodes() != pieces + 1 || ev2.n_nodes() != pieces + 1)
    return std::nullopt;
  std::vector<double> a, b;
  for (int m = 1; m <= pieces; ++m) {
    const double th1 = ev1.grid[static_cast<std::size_t>(m)];
    const double th2 = ev2.grid[static_cast<std::size_t>(m)];
    for (int i = 0; i < model.n_states; ++i) {
      detail::local_tables(model, i, ev1.psi[static_cast<std::size_t>(m)],
                           ev2.psi[static_cast<std::size_t>(m)], th1, th2, a,
                           b);
      std::vector<int> s1 = detail::support_of(
          inc1.at[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(i)]
              .w,
          support_tol);
      std::vector<int> s2 = detail::support_of(
          inc2.at[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(i)]
              .w,
          support_tol);
      auto eq =
          detail::equalize_bimatrix(a, b, model.n_u1(), model.n_u2(), s1, s2);
      if (!eq) return std::nullopt;
      out1.at[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(i)].w =
          std::move(eq->first);
      out2.at[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(i)].w =
          std::move(eq->second);
    }
  }
  return std::make_pair(std::move(out1), std::move(out2));
}

double policy_change(const EventuallyStationaryPolicy& a,
                     const EventuallyStationaryPolicy& b) {
  double worst = 0.0;
  for (std::size_t m = 0; m < a.at.size(); ++m)
    for (std::size_t i = 0; i < a.at[m].size(); ++i)
      for (std::size_t u = 0; u < a.at[m][i].w.size(); ++u)
        worst = std::max(worst, std::fabs(a.at[m][i].w[u] - b.at[m][i].w[u]));
  return worst;
}

void fill_solution(DiscountedSolution& sol,
                   const EventuallyStationaryPolicy& pol1,
                   const EventuallyStationaryPolicy& pol2, Certification&& c) {
  sol.pol1 = pol1;
  sol.pol2 = pol2;
  sol.curve1 = std::move(c.ev1);
  sol.curve2 = std::move(c.ev2);
  sol.gap1 = c.gap1;
  sol.gap2 = c.gap2;
  sol.certified = c.ok;
}

}  // namespace

std::pair<double, double> nash_gap_discounted(
    const GameModel& model, const EventuallyStationaryPolicy& pol1,
    const EventuallyStationaryPolicy& pol2, double alpha, double theta1,
    double theta2, const GridSpec& grid) {
  DiscountedNashOptions opts;
  opts.grid = grid;
  Certification c = certify(model, pol1, pol2, alpha, theta1, theta2, opts);
  return {c.gap1, c.gap2};
}

DiscountedSolution solve_nash_discounted(const GameModel& model, double alpha,
                                         double theta1, double theta2,
                                         const DiscountedNashOptions& opts) {
  if (!(alpha > 0.0)) throw model_error("alpha must be > 0");
  if (!(theta1 > 0.0) || !(theta2 > 0.0))
    throw model_error("theta must be positive");
  if (opts.strict_arat) {
    AratReport rep = check_arat(model);
    if (!rep.decomposable)
      throw model_error("model transitions/costs are not additively "
                        "decomposable (max residual " +
                        g17(rep.max_residual) + ")");
  }
  opts.grid.validate();

  DiscountedSolution sol;
  sol.alpha = alpha;
  sol.theta1 = theta1;
  sol.theta2 = theta2;

  EventuallyStationaryPolicy inc1 =
      uniform_policy(model, 1, theta1, opts.grid.steps);
  EventuallyStationaryPolicy inc2 =
      uniform_policy(model, 2, theta2, opts.grid.steps);
  EventuallyStationaryPolicy prev1 = inc1, prev2 = inc2;

  for (int t = 0; t < opts.max_rounds; ++t) {
    Certification c = certify(model, inc1, inc2, alpha, theta1, theta2, opts);
    sol.trace.push_back({t,
                         t == 0 ? 0.0
                                : std::max(policy_change(inc1, prev1),
                                           policy_change(inc2, prev2)),
                         c.gap1, c.gap2});
    sol.rounds = t + 1;
    if (c.ok) {
      fill_solution(sol, inc1, inc2, std::move(c));
      return sol;
    }

    EventuallyStationaryPolicy brp1 = c.br1.minimizer_policy(model);
    EventuallyStationaryPolicy brp2 = c.br2.minimizer_policy(model);
    Certification cbr =
        certify(model, brp1, brp2, alpha, theta1, theta2, opts);
    if (cbr.ok) {
      fill_solution(sol, brp1, brp2, std::move(cbr));
      return sol;
    }

    auto cand = equalizer_candidate(model, inc1, inc2, c.ev1, c.ev2,
                                    opts.support_tol);
    if (cand) {
      Certification cp = certify(model, cand->first, cand->second, alpha,
                                 theta1, theta2, opts);
      if (cp.ok) {
        fill_solution(sol, cand->first, cand->second, std::move(cp));
        return sol;
      }
    }

    prev1 = inc1;
    prev2 = inc2;
    const double lam = 1.0 / static_cast<double>(t + 1);
    for (std::size_t m = 0; m < inc1.at.size(); ++m)
      for (std::size_t i = 0; i < inc1.at[m].size(); ++i)
        for (std::size_t u = 0; u < inc1.at[m][i].w.size(); ++u)
          inc1.at[m][i].w[u] = (1.0 - lam) * inc1.at[m][i].w[u] +
                               lam * brp1.at[m][i].w[u];
    for (std::size_t m = 0; m < inc2.at.size(); ++m)
      for (std::size_t i = 0; i < inc2.at[m].size(); ++i)
        for (std::size_t u = 0; u < inc2.at[m][i].w.size(); ++u)
          inc2.at[m][i].w[u] = (1.0 - lam) * inc2.at[m][i].w[u] +
                               lam * brp2.at[m][i].w[u];
  }

  Certification c = certify(model, inc1, inc2, alpha, theta1, theta2, opts);
  fill_solution(sol, inc1, inc2, std::move(c));
  sol.certified = false;
  return sol;
}

void DiscountedSolution::write_trace_csv(std::ostream& os) const {
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

}  // namespace rsgame
