#pragma once

#include <vector>

#include "rsgame/model.hpp"

namespace rsgame {

// Dense infinitesimal generator of the chain induced by a stationary profile.
struct GeneratorMatrix {
  int n = 0;
  std::vector<double> q;  // row-major n x n

  double at(int i, int j) const { return q[static_cast<std::size_t>(i) * n + j]; }
  double& at(int i, int j) { return q[static_cast<std::size_t>(i) * n + j]; }
  // largest row-sum defect; 0 within 1e-10 for a valid generator
  double conservation_defect() const;
  double max_exit_rate() const;
  // true iff the positive-rate digraph is strongly connected
  bool irreducible() const;
};

GeneratorMatrix rate_matrix(const GameModel& model,
                            const StationaryProfile& profile);

// (G f)(i), accumulated as sum_j q_ij (f_j - f_i) so constants map to an
// exact zero vector.
std::vector<double> apply_generator(const GeneratorMatrix& G,
                                    const std::vector<double>& f);

struct HamiltonianMin {
  double value = 0.0;
  int action = -1;  // lowest minimizing own action index
};

// min over own pure actions u of
//   sum_j pi_ij(u, opp)(f_j - f_i) + theta * r_player(i, u, opp) * weight,
// with the opponent's mixed action fixed. Ties resolve to the lowest index.
HamiltonianMin hamiltonian_min(const GameModel& model, int player, int i,
                               const MixedAction& opp,
                               const std::vector<double>& f, double theta,
                               double weight);

// Same Hamiltonian evaluated at a fixed own mixed action instead of the min.
double hamiltonian_at(const GameModel& model, int player, int i,
                      const MixedAction& own, const MixedAction& opp,
                      const std::vector<double>& f, double theta,
                      double weight);

}  // namespace rsgame
