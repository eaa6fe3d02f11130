#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rsgame/discounted.hpp"
#include "rsgame/ergodic.hpp"
#include "rsgame/generator.hpp"
#include "rsgame/model.hpp"
#include "rsgame/nash_discounted.hpp"
#include "rsgame/report.hpp"
#include "rsgame/simulate.hpp"

#ifndef RSGAME_VERSION
#define RSGAME_VERSION "0.0.0"
#endif

namespace {

using nlohmann::ordered_json;
using namespace rsgame;

ordered_json make_envelope(const std::string& command,
                           const std::string& model_path, ordered_json params,
                           ordered_json results) {
  ordered_json j;
  j["tool"] = "rsgame";
  j["version"] = RSGAME_VERSION;
  j["command"] = command;
  j["model_file"] = model_path;
  j["model_hash"] = file_fnv1a64_hex(model_path);
  j["params"] = std::move(params);
  j["results"] = std::move(results);
  return j;
}

void emit(const ordered_json& report, const std::string& out) {
  const std::string text = report.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw model_error("cannot write report: " + out);
  f << text;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw model_error("cannot write file: " + path);
  f << text;
}

template <typename Writer>
void write_csv_file(const std::string& path, Writer&& writer) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw model_error("cannot write file: " + path);
  writer(f);
}

PolicyColumn uniform_column(const GameModel& model, int player) {
  return PolicyColumn(
      static_cast<std::size_t>(model.n_states),
      MixedAction::uniform(model.n_own_actions(player)));
}

ordered_json estimate_json(const McEstimate& e) {
  ordered_json j;
  j["value"] = e.value;
  j["se"] = e.se;
  j["paths"] = e.paths;
  return j;
}

struct CommonOpts {
  std::string model_path;
  std::string out;
  std::string csv;
};

// shared numbers all subcommand reports echo
ordered_json base_params(const CommonOpts& c) {
  ordered_json p;
  p["model"] = c.model_path;
  return p;
}

int run_validate(const CommonOpts& c, bool strict_arat, double theta1,
                 double theta2) {
  GameModel model = load_model_file(c.model_path);
  ordered_json params = base_params(c);
  params["strict_arat"] = strict_arat;
  params["theta1"] = theta1;
  params["theta2"] = theta2;

  bool all_ok = true;
  ordered_json res;
  res["valid"] = true;
  res["n_states"] = model.n_states;
  res["n_actions"] = {model.n_u1(), model.n_u2()};
  res["max_exit_rate"] = model.rates.M;
  res["cost_sup"] = {model.cost1.sup_norm, model.cost2.sup_norm};
  res["rates_conservative"] = true;  // enforced by the loader
  res["costs_nonnegative"] = true;

  AratReport arat = check_arat(model);
  res["arat"]["decomposable"] = arat.decomposable;
  res["arat"]["max_residual"] = arat.max_residual;
  if (strict_arat && !arat.decomposable) all_ok = false;

  if (model.lyapunov) {
    LyapunovReport rep = check_lyapunov(model, *model.lyapunov);
    res["lyapunov"]["present"] = true;
    res["lyapunov"]["holds"] = rep.holds;
    res["lyapunov"]["worst_margin"] = rep.worst_margin;
    res["lyapunov"]["worst_state"] = rep.worst_state;
    res["lyapunov"]["C0"] = rep.C0;
    if (!rep.holds) all_ok = false;
    if (theta1 > 0.0 && theta2 > 0.0) {
      SmallCostReport sc = check_small_cost(model, theta1, theta2,
                                            *model.lyapunov);
      res["small_cost"]["checked"] = true;
      res["small_cost"]["holds"] = sc.holds;
      res["small_cost"]["slack1"] = sc.slack1;
      res["small_cost"]["slack2"] = sc.slack2;
      if (!sc.holds) all_ok = false;
    } else {
      res["small_cost"]["checked"] = false;
    }
  } else {
    res["lyapunov"]["present"] = false;
  }
  res["all_checks_hold"] = all_ok;
  emit(make_envelope("validate", c.model_path, std::move(params),
                     std::move(res)),
       c.out);
  return all_ok ? 0 : 2;
}

int run_solve_ergodic(const CommonOpts& c, double theta1, double theta2,
                      double tol_gap, int max_rounds, int threads) {
  GameModel model = load_model_file(c.model_path);
  ErgodicNashOptions opts;
  opts.tol_gap = tol_gap;
  opts.max_rounds = max_rounds;
  opts.threads = resolve_threads(threads);
  ErgodicSolution sol = solve_nash_ergodic(model, theta1, theta2, opts);

  ordered_json params = base_params(c);
  params["theta1"] = theta1;
  params["theta2"] = theta2;
  params["tol_gap"] = tol_gap;
  params["max_rounds"] = max_rounds;

  ordered_json res;
  res["certified"] = sol.certified;
  res["rounds"] = sol.rounds;
  res["rho"] = {sol.rho1, sol.rho2};
  res["gap"] = {sol.gap1, sol.gap2};
  res["residual_min"] = {sol.residual_min1, sol.residual_min2};
  res["residual_eval"] = {sol.residual_eval1, sol.residual_eval2};
  res["psi1"] = sol.psi1;
  res["psi2"] = sol.psi2;
  res["profile"] = ordered_json::parse(profile_to_json(sol.profile));
  if (!c.csv.empty())
    write_csv_file(c.csv, [&](std::ostream& os) { sol.write_trace_csv(os); });
  emit(make_envelope("solve-ergodic", c.model_path, std::move(params),
                     std::move(res)),
       c.out);
  return sol.certified ? 0 : 2;
}

int run_solve_discounted(const CommonOpts& c, double alpha, double theta1,
                         double theta2, int grid, double tol_gap,
                         int max_rounds, int threads, bool strict_arat) {
  GameModel model = load_model_file(c.model_path);
  DiscountedNashOptions opts;
  opts.tol_gap = tol_gap;
  opts.max_rounds = max_rounds;
  opts.threads = resolve_threads(threads);
  opts.grid.steps = grid;
  opts.strict_arat = strict_arat;
  DiscountedSolution sol =
      solve_nash_discounted(model, alpha, theta1, theta2, opts);

  ordered_json params = base_params(c);
  params["alpha"] = alpha;
  params["theta1"] = theta1;
  params["theta2"] = theta2;
  params["grid"] = grid;
  params["tol_gap"] = tol_gap;
  params["max_rounds"] = max_rounds;
  params["strict_arat"] = strict_arat;

  ordered_json res;
  res["certified"] = sol.certified;
  res["rounds"] = sol.rounds;
  res["gap"] = {sol.gap1, sol.gap2};
  res["terminal_psi1"] = sol.curve1.terminal_psi();
  res["terminal_psi2"] = sol.curve2.terminal_psi();
  res["phi0_1"] = sol.curve1.phi.front();
  res["phi0_2"] = sol.curve2.phi.front();
  res["profile"] = ordered_json::parse(profile_to_json(sol.pol1, sol.pol2));
  if (!c.csv.empty()) {
    write_csv_file(c.csv + ".curve1.csv",
                   [&](std::ostream& os) { sol.curve1.write_csv(os); });
    write_csv_file(c.csv + ".curve2.csv",
                   [&](std::ostream& os) { sol.curve2.write_csv(os); });
    write_csv_file(c.csv + ".trace.csv",
                   [&](std::ostream& os) { sol.write_trace_csv(os); });
  }
  emit(make_envelope("solve-discounted", c.model_path, std::move(params),
                     std::move(res)),
       c.out);
  return sol.certified ? 0 : 2;
}

int run_best_response(const CommonOpts& c, const std::string& criterion,
                      int player, double theta, double alpha, int grid,
                      const std::string& opp_path) {
  GameModel model = load_model_file(c.model_path);
  std::optional<LoadedProfile> lp;
  if (!opp_path.empty()) lp = load_profile_file(opp_path, model);

  ordered_json params = base_params(c);
  params["criterion"] = criterion;
  params["player"] = player;
  params["theta"] = theta;
  params["opp"] = opp_path;

  if (criterion == "discounted") {
    params["alpha"] = alpha;
    params["grid"] = grid;
    EventuallyStationaryPolicy opp;
    if (!lp) {
      opp = EventuallyStationaryPolicy::stationary(
          uniform_column(model, player == 1 ? 2 : 1), theta);
    } else if (lp->is_stationary) {
      opp = EventuallyStationaryPolicy::stationary(
          player == 1 ? lp->stationary.p2 : lp->stationary.p1, theta);
    } else {
      opp = player == 1 ? lp->p2 : lp->p1;
    }
    GridSpec gs{grid};
    ValueCurve curve =
        solve_discounted_hjb(model, player, opp, alpha, theta, gs);
    ordered_json res;
    res["terminal_psi"] = curve.terminal_psi();
    res["phi0"] = curve.phi.front();
    res["policy"] =
        ordered_json::parse(policy_to_json(curve.minimizer_policy(model)));
    if (!c.csv.empty())
      write_csv_file(c.csv, [&](std::ostream& os) { curve.write_csv(os); });
    emit(make_envelope("best-response", c.model_path, std::move(params),
                       std::move(res)),
         c.out);
    return 0;
  }
  if (criterion == "ergodic") {
    PolicyColumn opp;
    if (!lp) {
      opp = uniform_column(model, player == 1 ? 2 : 1);
    } else if (lp->is_stationary) {
      opp = player == 1 ? lp->stationary.p2 : lp->stationary.p1;
    } else {
      throw model_error(
          "ergodic best response needs a stationary opponent profile");
    }
    ErgodicCtmdpResult res = solve_ergodic_ctmdp(model, player, opp, theta);
    ordered_json r;
    r["rho"] = res.rho;
    r["theta_rho"] = res.lambda;
    r["psi"] = res.psi;
    r["policy"] = res.policy;
    r["bellman_residual"] = res.bellman_residual;
    r["rounds"] = res.rounds;
    r["used_enumeration"] = res.used_enumeration;
    emit(make_envelope("best-response", c.model_path, std::move(params),
                       std::move(r)),
         c.out);
    return 0;
  }
  throw model_error("unknown criterion: " + criterion);
}

int run_probe(const CommonOpts& c, double theta, int player,
              const std::string& opp_path, std::vector<double> alphas,
              int grid, int i0) {
  GameModel model = load_model_file(c.model_path);
  PolicyColumn opp;
  if (opp_path.empty()) {
    opp = uniform_column(model, player == 1 ? 2 : 1);
  } else {
    LoadedProfile lp = load_profile_file(opp_path, model);
    if (!lp.is_stationary)
      throw model_error("the probe needs a stationary opponent profile");
    opp = player == 1 ? lp.stationary.p2 : lp.stationary.p1;
  }
  if (alphas.empty()) alphas = default_probe_alphas();
  GridSpec gs{grid};
  DiscountTrace tr =
      vanishing_discount_probe(model, theta, player, opp, alphas, gs, i0);

  ordered_json params = base_params(c);
  params["theta"] = theta;
  params["player"] = player;
  params["opp"] = opp_path;
  params["alphas"] = alphas;
  params["grid"] = grid;
  params["i0"] = i0;

  ordered_json res;
  res["i0"] = tr.i0;
  res["rho_reference"] = tr.rho_reference;
  res["theta_rho_reference"] = tr.theta_rho_reference;
  ordered_json rows = ordered_json::array();
  for (const auto& row : tr.rows) {
    ordered_json r;
    r["alpha"] = row.alpha;
    r["g"] = row.g;
    r["abs_err"] = std::fabs(row.g - tr.theta_rho_reference);
    r["psibar"] = row.psibar;
    rows.push_back(std::move(r));
  }
  res["rows"] = std::move(rows);
  if (!c.csv.empty())
    write_csv_file(c.csv, [&](std::ostream& os) { tr.write_csv(os); });
  emit(make_envelope("probe-vanishing-discount", c.model_path,
                     std::move(params), std::move(res)),
       c.out);
  return 0;
}

int run_simulate(const CommonOpts& c, const std::string& criterion,
                 const std::string& profile_path, double alpha, double theta1,
                 double theta2, double theta, int player, double delta,
                 const std::vector<int>& target, const McOptions& mc) {
  GameModel model = load_model_file(c.model_path);
  LoadedProfile lp = load_profile_file(profile_path, model);

  ordered_json params = base_params(c);
  params["criterion"] = criterion;
  params["profile"] = profile_path;
  params["paths"] = mc.paths;
  params["horizon"] = mc.horizon;
  params["seed"] = mc.seed;
  params["start"] = mc.start_state;

  ordered_json res;
  if (criterion == "discounted") {
    params["alpha"] = alpha;
    params["theta1"] = theta1;
    params["theta2"] = theta2;
    auto pols = lp.as_policies(theta1, theta2);
    DiscountedMcResult r = estimate_discounted_cost(
        model, pols.first, pols.second, alpha, theta1, theta2, mc);
    res["phi1"] = estimate_json(r.phi1);
    res["phi2"] = estimate_json(r.phi2);
    res["bias_bound"] = {r.bias_bound1, r.bias_bound2};
  } else if (criterion == "ergodic") {
    params["theta1"] = theta1;
    params["theta2"] = theta2;
    if (!lp.is_stationary)
      throw model_error("ergodic simulation needs a stationary profile");
    ErgodicMcResult r =
        estimate_ergodic_cost(model, lp.stationary, theta1, theta2, mc);
    res["rho1"] = estimate_json(r.rho1);
    res["rho2"] = estimate_json(r.rho2);
  } else if (criterion == "hitting") {
    params["delta"] = delta;
    params["target"] = target;
    if (!lp.is_stationary)
      throw model_error("hitting simulation needs a stationary profile");
    HittingMcResult r =
        estimate_hitting_exponential(model, lp.stationary, delta, target, mc);
    res["moment"] = estimate_json(r.moment);
    res["censored_fraction"] = r.censored_fraction;
    res["reliable"] = r.reliable;
  } else if (criterion == "drift") {
    params["player"] = player;
    params["theta"] = theta;
    if (!lp.is_stationary)
      throw model_error("drift simulation needs a stationary profile");
    if (!model.lyapunov)
      throw model_error("drift simulation needs a lyapunov block in the model");
    DriftMcResult r = estimate_weighted_terminal(
        model, lp.stationary, player, theta, model.lyapunov->W, mc);
    res["weighted"] = estimate_json(r.weighted);
    res["plain"] = estimate_json(r.plain);
    res["bound"] = (model.lyapunov->W[static_cast<std::size_t>(mc.start_state)] +
                    model.lyapunov->b * mc.horizon) *
                   r.plain.value;
  } else {
    throw model_error("unknown criterion: " + criterion);
  }
  emit(make_envelope("simulate", c.model_path, std::move(params),
                     std::move(res)),
       c.out);
  return 0;
}

int run_verify_nash(const CommonOpts& c, const std::string& criterion,
                    const std::string& profile_path, double theta1,
                    double theta2, double alpha, int grid, double tol_gap,
                    int threads) {
  GameModel model = load_model_file(c.model_path);
  LoadedProfile lp = load_profile_file(profile_path, model);

  ordered_json params = base_params(c);
  params["criterion"] = criterion;
  params["profile"] = profile_path;
  params["theta1"] = theta1;
  params["theta2"] = theta2;
  params["tol_gap"] = tol_gap;

  ordered_json res;
  bool certified = false;
  if (criterion == "ergodic") {
    if (!lp.is_stationary)
      throw model_error("ergodic verification needs a stationary profile");
    PerronResult pv1 = perron_value(model, lp.stationary, 1, theta1);
    PerronResult pv2 = perron_value(model, lp.stationary, 2, theta2);
    ErgodicCtmdpResult br1 =
        solve_ergodic_ctmdp(model, 1, lp.stationary.p2, theta1);
    ErgodicCtmdpResult br2 =
        solve_ergodic_ctmdp(model, 2, lp.stationary.p1, theta2);
    const double gap1 = pv1.rho - br1.rho;
    const double gap2 = pv2.rho - br2.rho;
    certified = gap1 <= tol_gap && gap2 <= tol_gap;
    res["rho"] = {pv1.rho, pv2.rho};
    res["rho_br"] = {br1.rho, br2.rho};
    res["gap"] = {gap1, gap2};
    res["residual_eval"] = {pv1.residual, pv2.residual};
  } else if (criterion == "discounted") {
    params["alpha"] = alpha;
    params["grid"] = grid;
    auto pols = lp.as_policies(theta1, theta2);
    GridSpec gs{grid};
    auto gaps = nash_gap_discounted(model, pols.first, pols.second, alpha,
                                    theta1, theta2, gs);
    certified = gaps.first <= tol_gap && gaps.second <= tol_gap;
    res["gap"] = {gaps.first, gaps.second};
  } else {
    throw model_error("unknown criterion: " + criterion);
  }
  (void)threads;
  res["tol_gap"] = tol_gap;
  res["certified"] = certified;
  emit(make_envelope("verify-nash", c.model_path, std::move(params),
                     std::move(res)),
       c.out);
  return certified ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risk-sensitive stochastic game solver"};
  app.require_subcommand(1);

  CommonOpts c;
  bool strict_arat = false;
  double theta1 = 0.0, theta2 = 0.0, theta = 0.0, alpha = 1.0;
  double tol_gap_ergodic = 1e-6, tol_gap_discounted = 1e-4, tol_gap = -1.0;
  int grid = 256, max_rounds = 500, threads = 0, player = 1, i0 = -1;
  double delta = 0.0;
  std::vector<int> target;
  std::vector<double> alphas;
  std::string criterion, profile_path, opp_path;
  McOptions mc;
  long seed = 1;

  auto add_common = [&](CLI::App* sub, bool with_csv = true) {
    sub->add_option("--model", c.model_path, "model JSON file")->required();
    sub->add_option("--out", c.out, "report path (default: stdout)");
    if (with_csv) sub->add_option("--csv", c.csv, "CSV table path/prefix");
  };

  CLI::App* validate = app.add_subcommand("validate", "structural checks");
  add_common(validate, false);
  validate->add_flag("--strict-arat", strict_arat,
                     "fail when not additively decomposable");
  validate->add_option("--theta1", theta1, "risk level of player 1");
  validate->add_option("--theta2", theta2, "risk level of player 2");

  CLI::App* erg = app.add_subcommand("solve-ergodic",
                                     "ergodic Nash equilibrium");
  add_common(erg);
  erg->add_option("--theta1", theta1)->required();
  erg->add_option("--theta2", theta2)->required();
  erg->add_option("--tol-gap", tol_gap, "certification gap tolerance");
  erg->add_option("--max-rounds", max_rounds);
  erg->add_option("--threads", threads);

  CLI::App* dis = app.add_subcommand("solve-discounted",
                                     "discounted Nash equilibrium");
  add_common(dis);
  dis->add_option("--alpha", alpha)->required();
  dis->add_option("--theta1", theta1)->required();
  dis->add_option("--theta2", theta2)->required();
  dis->add_option("--grid", grid, "theta grid steps");
  dis->add_option("--tol-gap", tol_gap);
  dis->add_option("--max-rounds", max_rounds);
  dis->add_option("--threads", threads);
  dis->add_flag("--strict-arat", strict_arat);

  CLI::App* br = app.add_subcommand("best-response", "single-agent solve");
  add_common(br);
  br->add_option("--criterion", criterion, "discounted|ergodic")->required();
  br->add_option("--player", player)->check(CLI::Range(1, 2));
  br->add_option("--theta", theta)->required();
  br->add_option("--alpha", alpha);
  br->add_option("--grid", grid);
  br->add_option("--opp", opp_path, "opponent profile JSON");

  CLI::App* probe = app.add_subcommand("probe-vanishing-discount",
                                       "discounted-to-ergodic diagnostic");
  add_common(probe);
  probe->add_option("--theta", theta)->required();
  probe->add_option("--player", player)->check(CLI::Range(1, 2));
  probe->add_option("--opp", opp_path);
  probe->add_option("--alphas", alphas)->delimiter(',');
  probe->add_option("--grid", grid);
  probe->add_option("--i0", i0, "normalization state");

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo cross-check");
  add_common(sim, false);
  sim->add_option("--criterion", criterion,
                  "discounted|ergodic|hitting|drift")
      ->required();
  sim->add_option("--profile", profile_path)->required();
  sim->add_option("--alpha", alpha);
  sim->add_option("--theta1", theta1);
  sim->add_option("--theta2", theta2);
  sim->add_option("--theta", theta);
  sim->add_option("--player", player)->check(CLI::Range(1, 2));
  sim->add_option("--delta", delta);
  sim->add_option("--target", target)->delimiter(',');
  sim->add_option("--paths", mc.paths);
  sim->add_option("--horizon", mc.horizon);
  sim->add_option("--seed", seed);
  sim->add_option("--threads", threads);
  sim->add_option("--start", mc.start_state);

  CLI::App* verify = app.add_subcommand("verify-nash",
                                        "gap certification of a profile");
  add_common(verify, false);
  verify->add_option("--criterion", criterion, "discounted|ergodic")
      ->required();
  verify->add_option("--profile", profile_path)->required();
  verify->add_option("--theta1", theta1)->required();
  verify->add_option("--theta2", theta2)->required();
  verify->add_option("--alpha", alpha);
  verify->add_option("--grid", grid);
  verify->add_option("--tol-gap", tol_gap);
  verify->add_option("--threads", threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(validate))
      return run_validate(c, strict_arat, theta1, theta2);
    if (app.got_subcommand(erg))
      return run_solve_ergodic(c, theta1, theta2,
                               tol_gap > 0 ? tol_gap : tol_gap_ergodic,
                               max_rounds, threads);
    if (app.got_subcommand(dis))
      return run_solve_discounted(c, alpha, theta1, theta2, grid,
                                  tol_gap > 0 ? tol_gap : tol_gap_discounted,
                                  max_rounds, threads, strict_arat);
    if (app.got_subcommand(br))
      return run_best_response(c, criterion, player, theta, alpha, grid,
                               opp_path);
    if (app.got_subcommand(probe))
      return run_probe(c, theta, player, opp_path, alphas, grid, i0);
    if (app.got_subcommand(sim)) {
      mc.seed = static_cast<std::uint64_t>(seed);
      mc.threads = threads;
      return run_simulate(c, criterion, profile_path, alpha, theta1, theta2,
                          theta, player, delta, target, mc);
    }
    if (app.got_subcommand(verify))
      return run_verify_nash(c, criterion, profile_path, theta1, theta2,
                             alpha, grid,
                             tol_gap > 0
                                 ? tol_gap
                                 : (criterion == "ergodic" ? tol_gap_ergodic
                                                           : tol_gap_discounted),
                             threads);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const model_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const solver_error& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
