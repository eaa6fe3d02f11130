#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "rsgame/discounted.hpp"
#include "rsgame/generator.hpp"
#include "support.hpp"

using namespace rsgame;
using namespace testsup;

namespace {

EventuallyStationaryPolicy lift(const PolicyColumn& col, double theta) {
  return EventuallyStationaryPolicy::stationary(col, theta);
}

}  // namespace

TEST_SUITE("discounted") {

TEST_CASE("risk-neutral evaluation matches the dense linear solve") {
  const GameModel m = random_model(41, 4, 2, 3);
  const StationaryProfile prof = random_profile(m, 42);
  for (int player : {1, 2})
    for (double alpha : {0.5, 1.0}) {
      const RiskNeutralResult got =
          risk_neutral_evaluate(m, prof.p1, prof.p2, player, alpha);
      const Eigen::VectorXd want = oracle_risk_neutral(m, prof, player, alpha);
      for (int i = 0; i < m.n_states; ++i)
        CHECK(got.phi[i] == doctest::Approx(want(i)).epsilon(1e-10));
      CHECK(got.residual <= 1e-10);
    }
}

TEST_CASE("risk-neutral control attains the enumeration floor") {
  const GameModel m = random_model(43, 3, 2, 2);
  for (int player : {1, 2}) {
    const PolicyColumn opp = random_column(m, 3 - player, 44);
    const RiskNeutralResult got =
        solve_risk_neutral_discounted(m, player, opp, 0.8);
    const Eigen::VectorXd want = oracle_risk_neutral_min(m, player, opp, 0.8);
    for (int i = 0; i < m.n_states; ++i)
      CHECK(got.phi[i] == doctest::Approx(want(i)).epsilon(1e-8));
  }
}

TEST_CASE("risk-neutral iteration survives a small discount rate") {
  const GameModel m = random_model(45, 3, 1, 1);
  const double alpha = 1.0 / 64.0;
  const RiskNeutralResult got =
      solve_risk_neutral_discounted(m, 1, uniform_column(m, 2), alpha);
  const Eigen::VectorXd want =
      oracle_risk_neutral(m, uniform_profile(m), 1, alpha);
  for (int i = 0; i < m.n_states; ++i)
    CHECK(std::abs(got.phi[i] - want(i)) <= 1e-6 * (1.0 + std::abs(want(i))));
}

TEST_CASE("value curves respect the envelope and are nondecreasing") {
  for (std::uint64_t seed : {46ull, 47ull, 48ull}) {
    const GameModel m = random_model(seed, 4, 2, 2);
    for (double alpha : {0.5, 1.0}) {
      const ValueCurve c = solve_discounted_hjb(
          m, 1, lift(uniform_column(m, 1), 0.4), alpha, 0.4);
      const double sup_r = m.cost1.sup_norm;
      for (int k = 0; k < c.n_nodes(); ++k) {
        const double bound = std::exp(c.grid[k] * sup_r / alpha);
        for (int i = 0; i < c.n_states(); ++i) {
          CHECK(c.psi[k][i] >= 1.0 - 1e-9);
          CHECK(c.psi[k][i] <= bound + 1e-6);
          if (k > 0) CHECK(c.psi[k][i] >= c.psi[k - 1][i] - 1e-9);
        }
      }
      CHECK(c.grid.front() == 0.0);
      CHECK(c.theta_max() == 0.4);
      for (double p : c.psi[0]) CHECK(p == 1.0);
    }
  }
}

TEST_CASE("single-state curve reproduces the exponential closed form") {
  GameModel m = skeleton(1, 1, 1);
  m.cost1.at(0, 0, 0) = 0.6;
  m.cost2.at(0, 0, 0) = 0.6;
  const GameModel s = finalize(std::move(m));
  for (double alpha : {0.5, 1.0}) {
    const ValueCurve c =
        solve_discounted_hjb(s, 1, lift(uniform_column(s, 2), 0.5), alpha, 0.5);
    for (int k = 0; k < c.n_nodes(); ++k) {
      const double want = std::exp(c.grid[k] * 0.6 / alpha);
      CHECK(c.psi[k][0] == doctest::Approx(want).epsilon(1e-10));
    }
    // phi = log psi / theta collapses to the constant cost over discount rate
    CHECK(c.phi[0][0] == doctest::Approx(0.6 / alpha).epsilon(1e-10));
    CHECK(c.phi.back()[0] == doctest::Approx(0.6 / alpha).epsilon(1e-10));
  }
}

TEST_CASE("interior nodes satisfy the differential equation") {
  for (std::uint64_t seed : {49ull, 50ull}) {
    const GameModel m = random_model(seed, 3, 2, 2);
    const double alpha = seed == 49 ? 1.0 : 0.5;
    const EventuallyStationaryPolicy opp = lift(uniform_column(m, 1), 0.4);
    const ValueCurve c = solve_discounted_hjb(m, 1, opp, alpha, 0.4);
    const double h = c.grid[1] - c.grid[0];
    double sup = 0.0;
    for (const auto& row : c.psi)
      for (double v : row) sup = std::max(sup, v);
    for (int k = 1; k + 1 < c.n_nodes(); ++k) {
      const double theta = c.grid[k];
      for (int i = 0; i < c.n_states(); ++i) {
        const double lhs =
            alpha * theta * (c.psi[k + 1][i] - c.psi[k - 1][i]) / (2.0 * h);
        const double rhs = hamiltonian_min(m, 1, i, opp.lookup(theta, i),
                                           c.psi[k], theta, c.psi[k][i])
                               .value;
        CHECK(std::abs(lhs - rhs) <= 1e-6 * (1.0 + sup));
      }
    }
  }
}

TEST_CASE("evaluating the recorded minimizer reproduces the optimal curve") {
  const GameModel m = random_model(51, 3, 2, 2);
  const double alpha = 0.8, theta = 0.4;
  const EventuallyStationaryPolicy opp = lift(random_column(m, 2, 52), theta);
  const ValueCurve best = solve_discounted_hjb(m, 1, opp, alpha, theta);
  const ValueCurve eval = evaluate_discounted_profile(
      m, best.minimizer_policy(m), opp, alpha, theta, 1);
  for (int i = 0; i < m.n_states; ++i) {
    const double gap = eval.terminal_psi()[i] - best.terminal_psi()[i];
    CHECK(gap >= -1e-6);
    CHECK(gap <= 1e-3);
  }
}

TEST_CASE("opponent policies are read at the opponent's own risk level") {
  // exact invariance: doubling the opponent grid is a pure relabeling of the
  // same decay path, so the evaluated curve must be bit-identical
  const GameModel m = random_model(53, 3, 2, 2);
  const double alpha = 1.0, theta1 = 0.4;
  const EventuallyStationaryPolicy pol1 = lift(random_column(m, 1, 54), theta1);
  EventuallyStationaryPolicy pol2;
  pol2.grid = {0.0375, 0.075, 0.15};
  pol2.at = {random_column(m, 2, 55), random_column(m, 2, 56),
             random_column(m, 2, 57)};
  EventuallyStationaryPolicy doubled = pol2;
  for (double& g : doubled.grid) g *= 2.0;

  const ValueCurve a =
      evaluate_discounted_profile(m, pol1, pol2, alpha, theta1, 1);
  const ValueCurve b =
      evaluate_discounted_profile(m, pol1, doubled, alpha, theta1, 1);
  for (int k = 0; k < a.n_nodes(); ++k)
    for (int i = 0; i < a.n_states(); ++i)
      CHECK(a.psi[k][i] == b.psi[k][i]);
}

TEST_CASE("piecewise opponent switches at the rescaled level") {
  // single uncontrolled state; the opponent plays cost 0.2 below half its
  // final level and 0.7 above, so player 1 accumulates each rate on exactly
  // half of [0, theta1]
  GameModel m = skeleton(1, 1, 2);
  m.cost1.at(0, 0, 0) = 0.2;
  m.cost1.at(0, 0, 1) = 0.7;
  m.cost2.at(0, 0, 0) = 0.1;
  m.cost2.at(0, 0, 1) = 0.1;
  const GameModel s = finalize(std::move(m));

  const double theta1 = 0.4, theta2 = 0.25, alpha = 1.0;
  EventuallyStationaryPolicy pol2;
  pol2.grid = {theta2 / 4.0, theta2 / 2.0, theta2};
  pol2.at = {PolicyColumn{MixedAction::pure(2, 0)},
             PolicyColumn{MixedAction::pure(2, 1)},
             PolicyColumn{MixedAction::pure(2, 1)}};
  const ValueCurve c = evaluate_discounted_profile(
      s, lift(uniform_column(s, 1), theta1), pol2, alpha, theta1, 1);

  const double split = std::exp((0.2 + 0.7) * (theta1 / 2.0) / alpha);
  const double all_low = std::exp(0.2 * theta1 / alpha);
  const double all_high = std::exp(0.7 * theta1 / alpha);
  CHECK(std::abs(c.terminal_psi()[0] - split) <= 2e-3);
  CHECK(std::abs(c.terminal_psi()[0] - all_low) > 0.05);
  CHECK(std::abs(c.terminal_psi()[0] - all_high) > 0.05);
}

TEST_CASE("recorded minimizers form a valid policy with a risk-neutral head") {
  const GameModel m = random_model(58, 3, 3, 2);
  const EventuallyStationaryPolicy opp = lift(uniform_column(m, 2), 0.3);
  const ValueCurve c = solve_discounted_hjb(m, 1, opp, 1.0, 0.3);
  const EventuallyStationaryPolicy pol = c.minimizer_policy(m);
  pol.validate(m.n_states, m.n_u1());
  CHECK(static_cast<int>(pol.grid.size()) == c.n_nodes() - 1);
  CHECK(pol.grid.back() == c.theta_max());
  for (const auto& col : pol.at)
    for (const auto& v : col) CHECK(v.is_pure());
  // node 0 of the curve stores the risk-neutral minimizer
  const RiskNeutralResult rn = solve_risk_neutral_discounted(m, 1, uniform_column(m, 2), 1.0);
  for (int i = 0; i < m.n_states; ++i) {
    const HamiltonianMin hm = hamiltonian_min(
        m, 1, i, MixedAction::uniform(m.n_u2()), rn.phi, 1.0, 1.0);
    CHECK(c.minimizer[0][i] == hm.action);
  }
}

TEST_CASE("curve csv output is well formed") {
  const ValueCurve c = solve_discounted_hjb(
      golden_model(), 1, lift(uniform_column(golden_model(), 2), 0.2), 1.0,
      0.2, GridSpec{16});
  std::ostringstream os;
  c.write_csv(os);
  const std::string text = os.str();
  CHECK(text.find("theta,state,psi,phi,minimizer") == 0);
  // header + 17 nodes x 2 states in long format
  CHECK(std::count(text.begin(), text.end(), '\n') == 35);
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(GridSpec{8}.validate(), model_error);
  GridSpec{16}.validate();
}

}  // TEST_SUITE
