#include "rsgame/generator.hpp"

#include <algorithm>
#include <cmath>

namespace rsgame {

double GeneratorMatrix::conservation_defect() const {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += at(i, j);
    worst = std::max(worst, std::abs(row));
  }
  return worst;
}

double GeneratorMatrix::max_exit_rate() const {
  double m = 0.0;
  for (int i = 0; i < n; ++i) m = std::max(m, -at(i, i));
  return m;
}

bool GeneratorMatrix::irreducible() const {
  if (n == 1) return true;
  auto reach = [&](bool transpose) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack = {0};
    seen[0] = 1;
    while (!stack.empty()) {
      int i = stack.back();
      stack.pop_back();
      for (int j = 0; j < n; ++j) {
        if (seen[j] || j == i) continue;
        double q = transpose ? at(j, i) : at(i, j);
        if (q > 0.0) {
          seen[j] = 1;
          stack.push_back(j);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  return reach(false) && reach(true);
}

GeneratorMatrix rate_matrix(const GameModel& model,
                            const StationaryProfile& profile) {
  GeneratorMatrix G;
  G.n = model.n_states;
  G.q.assign(static_cast<std::size_t>(G.n) * G.n, 0.0);
  for (int i = 0; i < G.n; ++i)
    for (int j = 0; j < G.n; ++j)
      G.at(i, j) = model.rates.mixed(i, j, profile.p1[i], profile.p2[i]);
  return G;
}

std::vector<double> apply_generator(const GeneratorMatrix& G,
                                    const std::vector<double>& f) {
  std::vector<double> out(G.n, 0.0);
  for (int i = 0; i < G.n; ++i) {
    double s = 0.0;
    for (int j = 0; j < G.n; ++j)
      if (j != i) s += G.at(i, j) * (f[j] - f[i]);
    out[i] = s;
  }
  return out;
}

namespace {

// Pi_{u_own, opp} f(i) + theta * r(i, u_own, opp) * weight for one pure own
// action, with the generator applied in centered form.
double hamiltonian_pure(const GameModel& m, int player, int i, int u_own,
                        const MixedAction& opp, const std::vector<double>& f,
                        double theta, double weight) {
  double drift = 0.0;
  double cost = 0.0;
  if (player == 1) {
    for (int j = 0; j < m.n_states; ++j) {
      if (j == i) continue;
      double q = 0.0;
      for (int b = 0; b < m.n_u2(); ++b)
        q += opp.w[b] * m.rates.at(i, j, u_own, b);
      drift += q * (f[j] - f[i]);
    }
    for (int b = 0; b < m.n_u2(); ++b)
      cost += opp.w[b] * m.cost1.at(i, u_own, b);
  } else {
    for (int j = 0; j < m.n_states; ++j) {
      if (j == i) continue;
      double q = 0.0;
      for (int a = 0; a < m.n_u1(); ++a)
        q += opp.w[a] * m.rates.at(i, j, a, u_own);
      drift += q * (f[j] - f[i]);
    }
    for (int a = 0; a < m.n_u1(); ++a)
      cost += opp.w[a] * m.cost2.at(i, a, u_own);
  }
  return drift + theta * cost * weight;
}

}  // namespace

HamiltonianMin hamiltonian_min(const GameModel& model, int player, int i,
                               const MixedAction& opp,
                               const std::vector<double>& f, double theta,
                               double weight) {
  HamiltonianMin best;
  int n_own = model.n_own_actions(player);
  for (int u = 0; u < n_own; ++u) {
    double v = hamiltonian_pure(model, player, i, u, opp, f, theta, weight);
    if (best.action < 0 || v < best.value) {
      best.value = v;
      best.action = u;
    }
  }
  return best;
}

double hamiltonian_at(const GameModel& model, int player, int i,
                      const MixedAction& own, const MixedAction& opp,
                      const std::vector<double>& f, double theta,
                      double weight) {
  double s = 0.0;
  int n_own = model.n_own_actions(player);
  for (int u = 0; u < n_own; ++u) {
    if (own.w[u] == 0.0) continue;
    s += own.w[u] * hamiltonian_pure(model, player, i, u, opp, f, theta, weight);
  }
  return s;
}

}  // namespace rsgame
