#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "rsgame/nash_discounted.hpp"
#include "support.hpp"

using namespace rsgame;
using namespace testsup;

TEST_SUITE("nash_discounted") {

TEST_CASE("decoupled game settles on the independent minimizers") {
  const GameModel m = decoupled_model();
  const DiscountedSolution sol = solve_nash_discounted(m, 1.0, 0.3, 0.4);
  CHECK(sol.certified);
  CHECK(sol.gap1 <= 1e-4);
  CHECK(sol.gap2 <= 1e-4);
  CHECK(sol.rounds <= 3);
  CHECK(sol.curve1.player == 1);
  CHECK(sol.curve2.player == 2);
  CHECK(sol.curve1.theta_max() == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(sol.curve2.theta_max() == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(sol.pol1.grid.back() == doctest::Approx(0.3).epsilon(1e-15));
  for (const auto& col : sol.pol1.at)
    for (const auto& v : col) CHECK(v.w[1] == doctest::Approx(1.0).epsilon(1e-9));
  for (const auto& col : sol.pol2.at)
    for (const auto& v : col) CHECK(v.w[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("matching pennies stays at the uniform mix") {
  const GameModel m = matching_pennies();
  const DiscountedSolution sol = solve_nash_discounted(m, 1.0, 0.4, 0.4);
  CHECK(sol.certified);
  CHECK(sol.gap1 <= 1e-4);
  CHECK(sol.gap2 <= 1e-4);
  for (const auto& col : sol.pol1.at)
    CHECK(std::abs(col[0].w[0] - 0.5) <= 1e-6);
  for (const auto& col : sol.pol2.at)
    CHECK(std::abs(col[0].w[0] - 0.5) <= 1e-6);
  // single state, constant mixed cost 1/2: psi has a closed form
  CHECK(sol.curve1.terminal_psi()[0] ==
        doctest::Approx(std::exp(0.4 * 0.5)).epsilon(1e-6));
  CHECK(sol.curve2.terminal_psi()[0] ==
        doctest::Approx(std::exp(0.4 * 0.5)).epsilon(1e-6));
}

TEST_CASE("reported gaps match an independent recomputation") {
  const GameModel m = decoupled_model();
  const DiscountedSolution sol = solve_nash_discounted(m, 0.9, 0.35, 0.25);
  const auto [g1, g2] =
      nash_gap_discounted(m, sol.pol1, sol.pol2, 0.9, 0.35, 0.25);
  CHECK(g1 == doctest::Approx(sol.gap1).epsilon(1e-12));
  CHECK(g2 == doctest::Approx(sol.gap2).epsilon(1e-12));
}

TEST_CASE("certified profiles resist pure unilateral deviations") {
  const GameModel m = random_model(71, 2, 2, 2, 0.2, 0.7, 0.8);
  const DiscountedSolution sol = solve_nash_discounted(m, 1.0, 0.3, 0.3);
  REQUIRE(sol.certified);
  Rng rng(72);
  for (int player : {1, 2}) {
    for (int trial = 0; trial < 6; ++trial) {
      const EventuallyStationaryPolicy dev = EventuallyStationaryPolicy::stationary(
          random_pure_column(m, player, rng), player == 1 ? 0.3 : 0.3);
      const ValueCurve devc = player == 1
          ? evaluate_discounted_profile(m, dev, sol.pol2, 1.0, 0.3, 1)
          : evaluate_discounted_profile(m, sol.pol1, dev, 1.0, 0.3, 2);
      const ValueCurve& own = player == 1 ? sol.curve1 : sol.curve2;
      for (int i = 0; i < m.n_states; ++i)
        CHECK(own.terminal_psi()[i] <= devc.terminal_psi()[i] + 2e-4);
    }
  }
}

TEST_CASE("additive-structure gate") {
  GameModel mult = skeleton(2, 2, 2);
  for (int u1 = 0; u1 < 2; ++u1)
    for (int u2 = 0; u2 < 2; ++u2) {
      mult.rates.at(0, 1, u1, u2) = 0.5 + 0.4 * u1 * u2;
      mult.rates.at(1, 0, u1, u2) = 1.0;
      mult.cost1.at(0, u1, u2) = 0.2;
      mult.cost2.at(1, u1, u2) = 0.2;
    }
  const GameModel bad = finalize(std::move(mult));
  DiscountedNashOptions strict;
  strict.strict_arat = true;
  CHECK_THROWS_AS(solve_nash_discounted(bad, 1.0, 0.2, 0.2, strict),
                  model_error);
  // the decomposable fixture passes the same gate
  const DiscountedSolution ok =
      solve_nash_discounted(chase_model(), 1.0, 0.2, 0.2, strict);
  CHECK(ok.certified);
  CHECK(ok.gap1 <= 1e-4);
  CHECK(ok.gap2 <= 1e-4);
}

TEST_CASE("best response helper equals the recorded minimizer") {
  const GameModel m = random_model(73, 3, 2, 2);
  const EventuallyStationaryPolicy opp =
      EventuallyStationaryPolicy::stationary(random_column(m, 2, 74), 0.3);
  const EventuallyStationaryPolicy br =
      best_response_discounted(m, 1, opp, 1.0, 0.3);
  const ValueCurve c = solve_discounted_hjb(m, 1, opp, 1.0, 0.3);
  const EventuallyStationaryPolicy want = c.minimizer_policy(m);
  REQUIRE(br.grid == want.grid);
  for (std::size_t k = 0; k < br.at.size(); ++k)
    for (int i = 0; i < m.n_states; ++i)
      CHECK(br.at[k][i].w == want.at[k][i].w);
}

TEST_CASE("trace output and thread invariance") {
  const GameModel m = decoupled_model();
  const DiscountedSolution sol = solve_nash_discounted(m, 1.0, 0.3, 0.3);
  std::ostringstream os;
  sol.write_trace_csv(os);
  CHECK(os.str().find("round,") == 0);
  CHECK(!sol.trace.empty());

  DiscountedNashOptions two;
  two.threads = 2;
  const DiscountedSolution par = solve_nash_discounted(m, 1.0, 0.3, 0.3, two);
  CHECK(par.gap1 == sol.gap1);
  CHECK(par.gap2 == sol.gap2);
  CHECK(par.rounds == sol.rounds);
}

}  // TEST_SUITE
