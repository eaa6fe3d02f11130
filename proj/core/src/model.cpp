#include "rsgame/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace rsgame {

using nlohmann::json;

MixedAction MixedAction::pure(int n_actions, int a) {
  MixedAction v;
  v.w.assign(n_actions, 0.0);
  v.w[a] = 1.0;
  return v;
}

MixedAction MixedAction::uniform(int n_actions) {
  MixedAction v;
  v.w.assign(n_actions, 1.0 / n_actions);
  return v;
}

bool MixedAction::is_pure(double tol) const {
  for (double x : w)
    if (x > tol && x < 1.0 - tol) return false;
  return true;
}

void MixedAction::validate(int n_actions, double tol) const {
  if (static_cast<int>(w.size()) != n_actions)
    throw model_error("mixed action has wrong length");
  double s = 0.0;
  for (double x : w) {
    if (!std::isfinite(x) || x < -tol)
      throw model_error("mixed action weight out of range");
    s += x;
  }
  if (std::abs(s - 1.0) > tol)
    throw model_error("mixed action weights do not sum to 1");
}

EventuallyStationaryPolicy EventuallyStationaryPolicy::stationary(
    const PolicyColumn& col, double theta_max) {
  EventuallyStationaryPolicy p;
  p.grid = {theta_max};
  p.at = {col};
  return p;
}

int EventuallyStationaryPolicy::lookup_node(double theta) const {
  // left-node rule: largest node <= theta; below the grid, the first node.
  // The relative slack keeps rescaled lookups that hit a node up to rounding
  // on that node.
  const double t = theta * (1.0 + 1e-12);
  int lo = 0, hi = static_cast<int>(grid.size()) - 1, ans = 0;
  while (lo <= hi) {
    int mid = (lo + hi) / 2;
    if (grid[mid] <= t) {
      ans = mid;
      lo = mid + 1;
    } else {
      hi = mid - 1;
    }
  }
  return ans;
}

const MixedAction& EventuallyStationaryPolicy::lookup(double theta,
                                                      int state) const {
  return at[lookup_node(theta)][state];
}

void EventuallyStationaryPolicy::validate(int n_states, int n_actions) const {
  if (grid.empty() || grid.size() != at.size())
    throw model_error("policy grid/selector size mismatch");
  for (std::size_t m = 0; m < grid.size(); ++m) {
    if (!(grid[m] > 0.0)) throw model_error("policy grid node must be > 0");
    if (m > 0 && !(grid[m] > grid[m - 1]))
      throw model_error("policy grid not strictly increasing");
    if (static_cast<int>(at[m].size()) != n_states)
      throw model_error("policy selector has wrong state count");
    for (const auto& v : at[m]) v.validate(n_actions);
  }
}

void RiskParams::validate() const {
  if (!(alpha > 0.0)) throw model_error("alpha must be > 0");
  if (!(Theta > 0.0)) throw model_error("Theta must be > 0");
  if (!(theta1 > 0.0 && theta1 < Theta))
    throw model_error("theta1 must lie in (0, Theta)");
  if (!(theta2 > 0.0 && theta2 < Theta))
    throw model_error("theta2 must lie in (0, Theta)");
}

bool LyapunovCertificate::in_C(int state) const {
  return std::find(C.begin(), C.end(), state) != C.end();
}

std::vector<int> LyapunovCertificate::derived_C0() const {
  std::vector<int> out;
  double thr = 1.0 + b / delta;
  for (int i = 0; i < static_cast<int>(W.size()); ++i)
    if (W[i] >= thr) out.push_back(i);
  return out;
}

void LyapunovCertificate::validate(int n_states) const {
  if (static_cast<int>(W.size()) != n_states)
    throw model_error("certificate W has wrong length");
  if (!(b > 0.0) || !(delta > 0.0))
    throw model_error("certificate needs b > 0 and delta > 0");
  for (int i = 0; i < n_states; ++i)
    if (!std::isfinite(W[i]) || W[i] < 1.0)
      throw model_error("certificate requires W(i) >= 1 at state " +
                        std::to_string(i));
  if (i0 < 0 || i0 >= n_states)
    throw model_error("certificate reference state out of range");
  if (W[i0] < 1.0 + b / delta)
    throw model_error("certificate reference state fails W(i0) >= 1 + b/delta");
  for (int c : C)
    if (c < 0 || c >= n_states)
      throw model_error("certificate set C contains an invalid state");
  if (derived_C0().empty())
    throw model_error("certificate derived set C0 is empty");
}

double RatesKernel::mixed(int i, int j, const MixedAction& v1,
                          const MixedAction& v2) const {
  double s = 0.0;
  for (int a = 0; a < n_u1; ++a) {
    if (v1.w[a] == 0.0) continue;
    double inner = 0.0;
    for (int b = 0; b < n_u2; ++b) inner += v2.w[b] * at(i, j, a, b);
    s += v1.w[a] * inner;
  }
  return s;
}

void RatesKernel::validate(double tol) const {
  for (int i = 0; i < n_states; ++i)
    for (int u1 = 0; u1 < n_u1; ++u1)
      for (int u2 = 0; u2 < n_u2; ++u2) {
        double row = 0.0;
        for (int j = 0; j < n_states; ++j) {
          double q = at(i, j, u1, u2);
          if (!std::isfinite(q))
            throw model_error("non-finite rate at i=" + std::to_string(i) +
                              " j=" + std::to_string(j) +
                              " u1=" + std::to_string(u1) +
                              " u2=" + std::to_string(u2));
          if (j != i && q < 0.0)
            throw model_error("negative off-diagonal rate at i=" +
                              std::to_string(i) + " j=" + std::to_string(j) +
                              " u1=" + std::to_string(u1) +
                              " u2=" + std::to_string(u2));
          row += q;
        }
        if (std::abs(row) > tol)
          throw model_error("non-conservative row at i=" + std::to_string(i) +
                            " u1=" + std::to_string(u1) +
                            " u2=" + std::to_string(u2) +
                            " sum=" + std::to_string(row));
      }
}

void RatesKernel::compute_M() {
  M = 0.0;
  for (int i = 0; i < n_states; ++i)
    for (int u1 = 0; u1 < n_u1; ++u1)
      for (int u2 = 0; u2 < n_u2; ++u2) M = std::max(M, -at(i, i, u1, u2));
}

double CostKernel::mixed(int i, const MixedAction& v1,
                         const MixedAction& v2) const {
  double s = 0.0;
  for (int a = 0; a < n_u1; ++a) {
    if (v1.w[a] == 0.0) continue;
    double inner = 0.0;
    for (int b = 0; b < n_u2; ++b) inner += v2.w[b] * at(i, a, b);
    s += v1.w[a] * inner;
  }
  return s;
}

void CostKernel::validate() const {
  for (int i = 0; i < n_states; ++i)
    for (int u1 = 0; u1 < n_u1; ++u1)
      for (int u2 = 0; u2 < n_u2; ++u2) {
        double c = at(i, u1, u2);
        if (!std::isfinite(c) || c < 0.0)
          throw model_error("cost must be finite and >= 0 at i=" +
                            std::to_string(i) + " u1=" + std::to_string(u1) +
                            " u2=" + std::to_string(u2));
      }
}

void CostKernel::compute_sup() {
  sup_norm = 0.0;
  for (double c : r) sup_norm = std::max(sup_norm, c);
}

void GameModel::validate(double tol) const {
  if (n_states < 1) throw model_error("n_states must be >= 1");
  if (actions1.empty() || actions2.empty())
    throw model_error("both players need at least one action");
  rates.validate(tol);
  cost1.validate();
  cost2.validate();
  if (arat) {
    const AratDecomposition& d = *arat;
    int nu1 = n_u1(), nu2 = n_u2();
    for (int i = 0; i < n_states; ++i) {
      for (int j = 0; j < n_states; ++j)
        for (int u1 = 0; u1 < nu1; ++u1)
          for (int u2 = 0; u2 < nu2; ++u2) {
            double re = d.rates1[(static_cast<std::size_t>(i) * n_states + j) * nu1 + u1] +
                        d.rates2[(static_cast<std::size_t>(i) * n_states + j) * nu2 + u2];
            if (std::abs(re - rates.at(i, j, u1, u2)) > 1e-12)
              throw model_error("arat rates reassembly mismatch at i=" +
                                std::to_string(i) + " j=" + std::to_string(j));
          }
      for (int u1 = 0; u1 < nu1; ++u1)
        for (int u2 = 0; u2 < nu2; ++u2) {
          double c1 = d.cost11[static_cast<std::size_t>(i) * nu1 + u1] +
                      d.cost12[static_cast<std::size_t>(i) * nu2 + u2];
          double c2 = d.cost21[static_cast<std::size_t>(i) * nu1 + u1] +
                      d.cost22[static_cast<std::size_t>(i) * nu2 + u2];
          if (std::abs(c1 - cost1.at(i, u1, u2)) > 1e-12 ||
              std::abs(c2 - cost2.at(i, u1, u2)) > 1e-12)
            throw model_error("arat costs reassembly mismatch at i=" +
                              std::to_string(i));
        }
    }
  }
  if (lyapunov) lyapunov->validate(n_states);
}

namespace {

std::vector<double> parse_flat(const json& arr, const std::vector<int>& dims,
                               const char* what) {
  std::vector<double> out;
  std::size_t total = 1;
  for (int d : dims) total *= static_cast<std::size_t>(d);
  out.reserve(total);
  // recursive descent over nested arrays
  std::function<void(const json&, std::size_t)> walk = [&](const json& node,
                                                           std::size_t depth) {
    if (depth == dims.size()) {
      if (!node.is_number())
        throw model_error(std::string(what) + ": expected a number");
      out.push_back(node.get<double>());
      return;
    }
    if (!node.is_array() ||
        static_cast<int>(node.size()) != dims[depth])
      throw model_error(std::string(what) + ": wrong array shape at depth " +
                        std::to_string(depth));
    for (const auto& child : node) walk(child, depth + 1);
  };
  walk(arr, 0);
  return out;
}

json nest_flat(const std::vector<double>& flat, const std::vector<int>& dims,
               std::size_t& pos, std::size_t depth) {
  json node = json::array();
  if (depth == dims.size() - 1) {
    for (int k = 0; k < dims[depth]; ++k) node.push_back(flat[pos++]);
    return node;
  }
  for (int k = 0; k < dims[depth]; ++k)
    node.push_back(nest_flat(flat, dims, pos, depth + 1));
  return node;
}

json nest(const std::vector<double>& flat, const std::vector<int>& dims) {
  std::size_t pos = 0;
  return nest_flat(flat, dims, pos, 0);
}

}  // namespace

GameModel load_model(const std::string& json_text, double tol) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw model_error(std::string("model JSON parse failure: ") + e.what());
  }
  GameModel m;
  try {
    m.n_states = j.at("n_states").get<int>();
    const json& acts = j.at("actions");
    m.actions1 = acts.at("p1").get<std::vector<std::string>>();
    m.actions2 = acts.at("p2").get<std::vector<std::string>>();
    int n = m.n_states, nu1 = m.n_u1(), nu2 = m.n_u2();
    m.rates.n_states = n;
    m.rates.n_u1 = nu1;
    m.rates.n_u2 = nu2;
    m.rates.pi = parse_flat(j.at("rates"), {n, n, nu1, nu2}, "rates");
    m.cost1.n_states = m.cost2.n_states = n;
    m.cost1.n_u1 = m.cost2.n_u1 = nu1;
    m.cost1.n_u2 = m.cost2.n_u2 = nu2;
    m.cost1.r = parse_flat(j.at("costs").at("p1"), {n, nu1, nu2}, "costs.p1");
    m.cost2.r = parse_flat(j.at("costs").at("p2"), {n, nu1, nu2}, "costs.p2");
    if (j.contains("arat")) {
      AratDecomposition d;
      const json& a = j.at("arat");
      d.rates1 = parse_flat(a.at("rates_p1"), {n, n, nu1}, "arat.rates_p1");
      d.rates2 = parse_flat(a.at("rates_p2"), {n, n, nu2}, "arat.rates_p2");
      d.cost11 = parse_flat(a.at("costs_p1").at("u1"), {n, nu1}, "arat.costs_p1.u1");
      d.cost12 = parse_flat(a.at("costs_p1").at("u2"), {n, nu2}, "arat.costs_p1.u2");
      d.cost21 = parse_flat(a.at("costs_p2").at("u1"), {n, nu1}, "arat.costs_p2.u1");
      d.cost22 = parse_flat(a.at("costs_p2").at("u2"), {n, nu2}, "arat.costs_p2.u2");
      m.arat = std::move(d);
    }
    if (j.contains("lyapunov")) {
      LyapunovCertificate c;
      const json& l = j.at("lyapunov");
      c.W = l.at("W").get<std::vector<double>>();
      c.b = l.at("b").get<double>();
      c.delta = l.at("delta").get<double>();
      c.C = l.at("C").get<std::vector<int>>();
      c.i0 = l.at("i0").get<int>();
      m.lyapunov = std::move(c);
    }
  } catch (const json::exception& e) {
    throw model_error(std::string("model JSON field error: ") + e.what());
  }
  m.validate(tol);
  m.rates.compute_M();
  m.cost1.compute_sup();
  m.cost2.compute_sup();
  return m;
}

GameModel load_model_file(const std::string& path, double tol) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw model_error("cannot open model file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_model(buf.str(), tol);
}

std::string model_to_json(const GameModel& m) {
  int n = m.n_states, nu1 = m.n_u1(), nu2 = m.n_u2();
  nlohmann::ordered_json j;
  j["n_states"] = n;
  j["actions"]["p1"] = m.actions1;
  j["actions"]["p2"] = m.actions2;
  j["rates"] = nest(m.rates.pi, {n, n, nu1, nu2});
  j["costs"]["p1"] = nest(m.cost1.r, {n, nu1, nu2});
  j["costs"]["p2"] = nest(m.cost2.r, {n, nu1, nu2});
  if (m.arat) {
    j["arat"]["rates_p1"] = nest(m.arat->rates1, {n, n, nu1});
    j["arat"]["rates_p2"] = nest(m.arat->rates2, {n, n, nu2});
    j["arat"]["costs_p1"]["u1"] = nest(m.arat->cost11, {n, nu1});
    j["arat"]["costs_p1"]["u2"] = nest(m.arat->cost12, {n, nu2});
    j["arat"]["costs_p2"]["u1"] = nest(m.arat->cost21, {n, nu1});
    j["arat"]["costs_p2"]["u2"] = nest(m.arat->cost22, {n, nu2});
  }
  if (m.lyapunov) {
    j["lyapunov"]["W"] = m.lyapunov->W;
    j["lyapunov"]["b"] = m.lyapunov->b;
    j["lyapunov"]["delta"] = m.lyapunov->delta;
    j["lyapunov"]["C"] = m.lyapunov->C;
    j["lyapunov"]["i0"] = m.lyapunov->i0;
  }
  return j.dump(2);
}

namespace {

nlohmann::ordered_json column_to_json(const PolicyColumn& col) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& v : col) arr.push_back(v.w);
  return arr;
}

PolicyColumn column_from_json(const json& arr, int n_states, int n_actions,
                              const std::string& what) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != n_states)
    throw model_error(what + ": expected one weight vector per state");
  PolicyColumn col;
  col.reserve(arr.size());
  for (const auto& row : arr) {
    MixedAction v;
    v.w = row.get<std::vector<double>>();
    v.validate(n_actions);
    col.push_back(std::move(v));
  }
  return col;
}

EventuallyStationaryPolicy policy_from_json(const json& obj, int n_states,
                                            int n_actions,
                                            const std::string& what) {
  EventuallyStationaryPolicy p;
  p.grid = obj.at("grid").get<std::vector<double>>();
  const json& at = obj.at("at");
  if (!at.is_array() || at.size() != p.grid.size())
    throw model_error(what + ": grid/selector size mismatch");
  for (const auto& node : at)
    p.at.push_back(column_from_json(node, n_states, n_actions, what));
  p.validate(n_states, n_actions);
  return p;
}

nlohmann::ordered_json policy_to_json_obj(const EventuallyStationaryPolicy& p) {
  nlohmann::ordered_json obj;
  obj["grid"] = p.grid;
  nlohmann::ordered_json at = nlohmann::ordered_json::array();
  for (const auto& col : p.at) at.push_back(column_to_json(col));
  obj["at"] = std::move(at);
  return obj;
}

}  // namespace

std::pair<EventuallyStationaryPolicy, EventuallyStationaryPolicy>
LoadedProfile::as_policies(double theta1, double theta2) const {
  if (!is_stationary) return {p1, p2};
  return {EventuallyStationaryPolicy::stationary(stationary.p1, theta1),
          EventuallyStationaryPolicy::stationary(stationary.p2, theta2)};
}

LoadedProfile load_profile(const std::string& json_text,
                           const GameModel& model) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw model_error(std::string("profile JSON parse failure: ") + e.what());
  }
  LoadedProfile p;
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "stationary") {
      p.is_stationary = true;
      p.stationary.p1 =
          column_from_json(j.at("p1"), model.n_states, model.n_u1(), "p1");
      p.stationary.p2 =
          column_from_json(j.at("p2"), model.n_states, model.n_u2(), "p2");
    } else if (type == "eventually_stationary") {
      p.p1 = policy_from_json(j.at("p1"), model.n_states, model.n_u1(), "p1");
      p.p2 = policy_from_json(j.at("p2"), model.n_states, model.n_u2(), "p2");
    } else {
      throw model_error("unknown profile type: " + type);
    }
  } catch (const json::exception& e) {
    throw model_error(std::string("profile JSON field error: ") + e.what());
  }
  return p;
}

LoadedProfile load_profile_file(const std::string& path,
                                const GameModel& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw model_error("cannot open profile file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_profile(buf.str(), model);
}

std::string profile_to_json(const StationaryProfile& profile) {
  nlohmann::ordered_json j;
  j["type"] = "stationary";
  j["p1"] = column_to_json(profile.p1);
  j["p2"] = column_to_json(profile.p2);
  return j.dump(2);
}

std::string profile_to_json(const EventuallyStationaryPolicy& p1,
                            const EventuallyStationaryPolicy& p2) {
  nlohmann::ordered_json j;
  j["type"] = "eventually_stationary";
  j["p1"] = policy_to_json_obj(p1);
  j["p2"] = policy_to_json_obj(p2);
  return j.dump(2);
}

std::string policy_to_json(const EventuallyStationaryPolicy& p) {
  return policy_to_json_obj(p).dump(2);
}

AratReport check_arat(const GameModel& m, double tol) {
  int n = m.n_states, nu1 = m.n_u1(), nu2 = m.n_u2();
  AratDecomposition d;
  d.rates1.assign(static_cast<std::size_t>(n) * n * nu1, 0.0);
  d.rates2.assign(static_cast<std::size_t>(n) * n * nu2, 0.0);
  d.cost11.assign(static_cast<std::size_t>(n) * nu1, 0.0);
  d.cost12.assign(static_cast<std::size_t>(n) * nu2, 0.0);
  d.cost21.assign(static_cast<std::size_t>(n) * nu1, 0.0);
  d.cost22.assign(static_cast<std::size_t>(n) * nu2, 0.0);

  double worst = 0.0;
  // gauge: player-2 part vanishes at u2 = 0, so part1(u1) = T(u1, 0)
  // and part2(u2) = T(0, u2) - T(0, 0).
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int u1 = 0; u1 < nu1; ++u1)
        d.rates1[(static_cast<std::size_t>(i) * n + j) * nu1 + u1] =
            m.rates.at(i, j, u1, 0);
      for (int u2 = 0; u2 < nu2; ++u2)
        d.rates2[(static_cast<std::size_t>(i) * n + j) * nu2 + u2] =
            m.rates.at(i, j, 0, u2) - m.rates.at(i, j, 0, 0);
      for (int u1 = 0; u1 < nu1; ++u1)
        for (int u2 = 0; u2 < nu2; ++u2) {
          double re = d.rates1[(static_cast<std::size_t>(i) * n + j) * nu1 + u1] +
                      d.rates2[(static_cast<std::size_t>(i) * n + j) * nu2 + u2];
          worst = std::max(worst, std::abs(re - m.rates.at(i, j, u1, u2)));
        }
    }
    for (int u1 = 0; u1 < nu1; ++u1) {
      d.cost11[static_cast<std::size_t>(i) * nu1 + u1] = m.cost1.at(i, u1, 0);
      d.cost21[static_cast<std::size_t>(i) * nu1 + u1] = m.cost2.at(i, u1, 0);
    }
    for (int u2 = 0; u2 < nu2; ++u2) {
      d.cost12[static_cast<std::size_t>(i) * nu2 + u2] =
          m.cost1.at(i, 0, u2) - m.cost1.at(i, 0, 0);
      d.cost22[static_cast<std::size_t>(i) * nu2 + u2] =
          m.cost2.at(i, 0, u2) - m.cost2.at(i, 0, 0);
    }
    for (int u1 = 0; u1 < nu1; ++u1)
      for (int u2 = 0; u2 < nu2; ++u2) {
        double c1 = d.cost11[static_cast<std::size_t>(i) * nu1 + u1] +
                    d.cost12[static_cast<std::size_t>(i) * nu2 + u2];
        double c2 = d.cost21[static_cast<std::size_t>(i) * nu1 + u1] +
                    d.cost22[static_cast<std::size_t>(i) * nu2 + u2];
        worst = std::max(worst, std::abs(c1 - m.cost1.at(i, u1, u2)));
        worst = std::max(worst, std::abs(c2 - m.cost2.at(i, u1, u2)));
      }
  }

  AratReport rep;
  rep.max_residual = worst;
  rep.decomposable = worst <= tol;
  if (rep.decomposable) rep.decomposition = std::move(d);
  return rep;
}

LyapunovReport check_lyapunov(const GameModel& m,
                              const LyapunovCertificate& cert, double tol) {
  cert.validate(m.n_states);
  LyapunovReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m.n_states; ++i) {
    double rhs_base = -2.0 * cert.delta * cert.W[i] +
                      (cert.in_C(i) ? cert.b : 0.0);
    for (int u1 = 0; u1 < m.n_u1(); ++u1)
      for (int u2 = 0; u2 < m.n_u2(); ++u2) {
        double drift = 0.0;
        for (int j = 0; j < m.n_states; ++j)
          if (j != i) drift += m.rates.at(i, j, u1, u2) * (cert.W[j] - cert.W[i]);
        double margin = rhs_base - drift;
        if (margin < rep.worst_margin) {
          rep.worst_margin = margin;
          rep.worst_state = i;
          rep.worst_u1 = u1;
          rep.worst_u2 = u2;
        }
      }
  }
  rep.holds = rep.worst_margin >= -tol;
  rep.C0 = cert.derived_C0();
  return rep;
}

SmallCostReport check_small_cost(const GameModel& m, double theta1,
                                 double theta2,
                                 const LyapunovCertificate& cert) {
  SmallCostReport rep;
  rep.slack1 = cert.delta - theta1 * m.cost1.sup_norm;
  rep.slack2 = cert.delta - theta2 * m.cost2.sup_norm;
  rep.holds = rep.slack1 >= 0.0 && rep.slack2 >= 0.0;
  return rep;
}

}  // namespace rsgame
