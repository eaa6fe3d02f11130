#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "rsgame/model.hpp"

// Internal helpers for the Nash solvers: a dense solver for the tiny
// indifference systems, the local payoff tables of one state, and the
// support-restricted equalizer for the resulting bimatrix game.

namespace rsgame::detail {

// Local payoff tables of state i given both players' value vectors: entry
// (u1, u2) is sum_{j != i} pi_ij (f_j - f_i) + theta r(i, u1, u2) f_i with
// each player's own f, theta and cost kernel.
inline void local_tables(const GameModel& model, int i,
                         const std::vector<double>& f1,
                         const std::vector<double>& f2, double theta1,
                         double theta2, std::vector<double>& a,
                         std::vector<double>& b) {
  const int n1 = model.n_u1();
  const int n2 = model.n_u2();
  a.assign(static_cast<std::size_t>(n1) * n2, 0.0);
  b.assign(static_cast<std::size_t>(n1) * n2, 0.0);
  for (int u1 = 0; u1 < n1; ++u1)
    for (int u2 = 0; u2 < n2; ++u2) {
      double acc1 = theta1 * model.cost1.at(i, u1, u2) *
                    f1[static_cast<std::size_t>(i)];
      double acc2 = theta2 * model.cost2.at(i, u1, u2) *
                    f2[static_cast<std::size_t>(i)];
      for (int j = 0; j < model.n_states; ++j)
        if (j != i) {
          double q = model.rates.at(i, j, u1, u2);
          acc1 += q * (f1[static_cast<std::size_t>(j)] -
                       f1[static_cast<std::size_t>(i)]);
          acc2 += q * (f2[static_cast<std::size_t>(j)] -
                       f2[static_cast<std::size_t>(i)]);
        }
      a[static_cast<std::size_t>(u1) * n2 + u2] = acc1;
      b[static_cast<std::size_t>(u1) * n2 + u2] = acc2;
    }
}

// Solves a (n x n) b = x in place by Gaussian elimination with partial
// pivoting; a is row-major and is destroyed. Returns false when the pivot
// collapses (singular system).
inline bool solve_dense(std::vector<double>& a, std::vector<double>& b,
                        int n) {
  for (int c = 0; c < n; ++c) {
    int piv = c;
    double best = std::fabs(a[static_cast<std::size_t>(c) * n + c]);
    for (int r = c + 1; r < n; ++r) {
      double v = std::fabs(a[static_cast<std::size_t>(r) * n + c]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (!(best > 1e-300)) return false;
    if (piv != c) {
      for (int j = 0; j < n; ++j)
        std::swap(a[static_cast<std::size_t>(piv) * n + j],
                  a[static_cast<std::size_t>(c) * n + j]);
      std::swap(b[piv], b[c]);
    }
    double d = a[static_cast<std::size_t>(c) * n + c];
    for (int r = c + 1; r < n; ++r) {
      double f = a[static_cast<std::size_t>(r) * n + c] / d;
      if (f == 0.0) continue;
      for (int j = c; j < n; ++j)
        a[static_cast<std::size_t>(r) * n + j] -=
            f * a[static_cast<std::size_t>(c) * n + j];
      b[r] -= f * b[c];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int j = r + 1; j < n; ++j)
      s -= a[static_cast<std::size_t>(r) * n + j] * b[j];
    b[r] = s / a[static_cast<std::size_t>(r) * n + r];
  }
  return true;
}

// Mixes supported(!) actions of both players so that, within each support,
// the opponent-facing payoff rows/columns are equalized. a and b are the two
// players' local tables indexed [u1 * n2 + u2]; s1, s2 are the support index
// sets. Returns full-length weight vectors, or nothing when the supports are
// unbalanced, the system is singular, or the solution leaves the simplex by
// more than slack.
inline std::optional<std::pair<std::vector<double>, std::vector<double>>>
equalize_bimatrix(const std::vector<double>& a, const std::vector<double>& b,
                  int n1, int n2, const std::vector<int>& s1,
                  const std::vector<int>& s2, double slack = 1e-7) {
  const int k1 = static_cast<int>(s1.size());
  const int k2 = static_cast<int>(s2.size());
  if (k1 < 1 || k2 < 1 || k1 != k2) return std::nullopt;
  std::vector<double> w1(static_cast<std::size_t>(n1), 0.0);
  std::vector<double> w2(static_cast<std::size_t>(n2), 0.0);
  if (k1 == 1) {
    w1[static_cast<std::size_t>(s1[0])] = 1.0;
    w2[static_cast<std::size_t>(s2[0])] = 1.0;
    return std::make_pair(std::move(w1), std::move(w2));
  }
  const int k = k1;
  // player 2's mix y equalizes player 1's supported rows of a
  std::vector<double> m(static_cast<std::size_t>(k) * k, 0.0);
  std::vector<double> rhs(static_cast<std::size_t>(k), 0.0);
  for (int r = 1; r < k; ++r)
    for (int c = 0; c < k; ++c)
      m[static_cast<std::size_t>(r - 1) * k + c] =
          a[static_cast<std::size_t>(s1[r]) * n2 + s2[c]] -
          a[static_cast<std::size_t>(s1[0]) * n2 + s2[c]];
  for (int c = 0; c < k; ++c) m[static_cast<std::size_t>(k - 1) * k + c] = 1.0;
  rhs[static_cast<std::size_t>(k - 1)] = 1.0;
  if (!solve_dense(m, rhs, k)) return std::nullopt;
  std::vector<double> y = rhs;

  // player 1's mix x equalizes player 2's supported columns of b
  std::fill(m.begin(), m.end(), 0.0);
  std::vector<double> rhs2(static_cast<std::size_t>(k), 0.0);
  for (int c = 1; c < k; ++c)
    for (int r = 0; r < k; ++r)
      m[static_cast<std::size_t>(c - 1) * k + r] =
          b[static_cast<std::size_t>(s1[r]) * n2 + s2[c]] -
          b[static_cast<std::size_t>(s1[r]) * n2 + s2[0]];
  for (int r = 0; r < k; ++r) m[static_cast<std::size_t>(k - 1) * k + r] = 1.0;
  rhs2[static_cast<std::size_t>(k - 1)] = 1.0;
  if (!solve_dense(m, rhs2, k)) return std::nullopt;
  std::vector<double> x = rhs2;

  for (double v : x)
    if (v < -slack || v > 1.0 + slack || !std::isfinite(v)) return std::nullopt;
  for (double v : y)
    if (v < -slack || v > 1.0 + slack || !std::isfinite(v)) return std::nullopt;
  double sx = 0.0, sy = 0.0;
  for (double& v : x) {
    v = std::max(v, 0.0);
    sx += v;
  }
  for (double& v : y) {
    v = std::max(v, 0.0);
    sy += v;
  }
  if (!(sx > 0.0) || !(sy > 0.0)) return std::nullopt;
  for (int r = 0; r < k; ++r)
    w1[static_cast<std::size_t>(s1[r])] = x[static_cast<std::size_t>(r)] / sx;
  for (int c = 0; c < k; ++c)
    w2[static_cast<std::size_t>(s2[c])] = y[static_cast<std::size_t>(c)] / sy;
  return std::make_pair(std::move(w1), std::move(w2));
}

// supported indices of a weight vector
inline std::vector<int> support_of(const std::vector<double>& w, double tol) {
  std::vector<int> s;
  for (int i = 0; i < static_cast<int>(w.size()); ++i)
    if (w[static_cast<std::size_t>(i)] >= tol) s.push_back(i);
  if (s.empty()) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(w.size()); ++i)
      if (w[static_cast<std::size_t>(i)] > w[static_cast<std::size_t>(best)])
        best = i;
    s.push_back(best);
  }
  return s;
}

}  // namespace rsgame::detail
