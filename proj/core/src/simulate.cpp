#include "rsgame/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>
#include <vector>

namespace rsgame {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(seed + kGamma * (stream + 1))) {}

std::uint64_t CounterRng::next_u64() { return mix64(key_ + kGamma * ++counter_); }

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::exponential(double rate) {
  if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
  return -std::log1p(-uniform()) / rate;
}

int CounterRng::pick(const double* w, int n, double total) {
  double u = uniform() * total;
  double acc = 0.0;
  int last = -1;
  for (int k = 0; k < n; ++k) {
    if (!(w[k] > 0.0)) continue;
    last = k;
    acc += w[k];
    if (u < acc) return k;
  }
  return last;
}

int resolve_threads(int requested) {
  if (requested >= 1) return requested;
  if (const char* env = std::getenv("RSGAME_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc >= 1 ? static_cast<int>(hc) : 1;
}

namespace {

// contiguous path blocks per thread; the per-path writer owns slot p, so the
// later sequential reduction is independent of the partitioning
template <typename PerPath>
void run_paths(long paths, int threads, PerPath&& per_path) {
  threads = static_cast<int>(std::max<long>(1, std::min<long>(threads, paths)));
  if (threads == 1) {
    for (long p = 0; p < paths; ++p) per_path(p);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int k = 0; k < threads; ++k) {
    const long lo = paths * k / threads;
    const long hi = paths * (k + 1) / threads;
    pool.emplace_back([lo, hi, &per_path]() {
      for (long p = lo; p < hi; ++p) per_path(p);
    });
  }
  for (auto& th : pool) th.join();
}

McEstimate mean_se(const std::vector<double>& x) {
  McEstimate e;
  e.paths = static_cast<long>(x.size());
  double s = 0.0;
  for (double v : x) s += v;
  e.value = s / static_cast<double>(x.size());
  double q = 0.0;
  for (double v : x) q += (v - e.value) * (v - e.value);
  const double n = static_cast<double>(x.size());
  e.se = n > 1.5 ? std::sqrt(q / (n - 1.0) / n) : 0.0;
  return e;
}

void check_common(const GameModel& model, const McOptions& opts) {
  if (opts.paths < 2) throw model_error("need at least 2 paths");
  if (!(opts.horizon > 0.0)) throw model_error("horizon must be > 0");
  if (opts.start_state < 0 || opts.start_state >= model.n_states)
    throw model_error("start state out of range");
}

// time at which the decaying level theta_k e^{-alpha t} leaves policy piece m
double piece_end(const EventuallyStationaryPolicy& pol, int m, double theta_k,
                 double alpha) {
  if (m <= 0) return std::numeric_limits<double>::infinity();
  return std::log(theta_k / pol.grid[static_cast<std::size_t>(m)]) / alpha;
}

struct PieceTracker {
  const EventuallyStationaryPolicy& pol;
  double theta_k;
  double alpha;
  int m;
  double t_end;

  PieceTracker(const EventuallyStationaryPolicy& p, double th, double a)
      : pol(p), theta_k(th), alpha(a), m(p.lookup_node(th)) {
    t_end = piece_end(pol, m, theta_k, alpha);
    advance_past(0.0);
  }
  void advance_past(double t) {
    while (t_end <= t) {
      --m;
      t_end = piece_end(pol, m, theta_k, alpha);
    }
  }
};

// one discounted path; returns the two discounted cost integrals on [0, T]
void discounted_path(const GameModel& model,
                     const EventuallyStationaryPolicy& pol1,
                     const EventuallyStationaryPolicy& pol2, double alpha,
                     double theta1, double theta2, double T, int start,
                     CounterRng& rng, double& out1, double& out2) {
  const int n = model.n_states;
  std::vector<double> row(static_cast<std::size_t>(n), 0.0);
  PieceTracker tr1(pol1, theta1, alpha);
  PieceTracker tr2(pol2, theta2, alpha);
  int i = start;
  double t = 0.0;
  out1 = 0.0;
  out2 = 0.0;
  while (t < T) {
    const MixedAction& v1 =
        pol1.at[static_cast<std::size_t>(tr1.m)][static_cast<std::size_t>(i)];
    const MixedAction& v2 =
        pol2.at[static_cast<std::size_t>(tr2.m)][static_cast<std::size_t>(i)];
    double lam = 0.0;
    for (int j = 0; j < n; ++j) {
      row[static_cast<std::size_t>(j)] =
          j == i ? 0.0 : model.rates.mixed(i, j, v1, v2);
      lam += row[static_cast<std::size_t>(j)];
    }
    const double r1 = model.cost1.mixed(i, v1, v2);
    const double r2 = model.cost2.mixed(i, v1, v2);
    const double t_jump = t + rng.exponential(lam);
    const double t_next = std::min({t_jump, tr1.t_end, tr2.t_end, T});
    const double w =
        (std::exp(-alpha * t) - std::exp(-alpha * t_next)) / alpha;
    out1 += r1 * w;
    out2 += r2 * w;
    if (t_next >= T) break;
    t = t_next;
    if (t_jump <= tr1.t_end && t_jump <= tr2.t_end) {
      i = rng.pick(row.data(), n, lam);
    } else {
      // policy grid crossing: the elapsed holding time is discarded and the
      // exponential resampled next round, which is exact by memorylessness
      tr1.advance_past(t);
      tr2.advance_past(t);
    }
  }
}

// mixed rates and costs of a fixed stationary profile
struct StationaryCache {
  int n = 0;
  std::vector<double> lam;   // exit rate per state
  std::vector<double> rows;  // n x n jump rates, diagonal zero
  std::vector<double> r1, r2;

  StationaryCache(const GameModel& model, const StationaryProfile& profile) {
    n = model.n_states;
    lam.assign(static_cast<std::size_t>(n), 0.0);
    rows.assign(static_cast<std::size_t>(n) * n, 0.0);
    r1.assign(static_cast<std::size_t>(n), 0.0);
    r2.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      const MixedAction& v1 = profile.p1[static_cast<std::size_t>(i)];
      const MixedAction& v2 = profile.p2[static_cast<std::size_t>(i)];
      for (int j = 0; j < n; ++j)
        if (j != i) {
          double q = model.rates.mixed(i, j, v1, v2);
          rows[static_cast<std::size_t>(i) * n + j] = q;
          lam[static_cast<std::size_t>(i)] += q;
        }
      r1[static_cast<std::size_t>(i)] = model.cost1.mixed(i, v1, v2);
      r2[static_cast<std::size_t>(i)] = model.cost2.mixed(i, v1, v2);
    }
  }
};

}  // namespace

DiscountedMcResult estimate_discounted_cost(const GameModel& model,
                                            const EventuallyStationaryPolicy& pol1,
                                            const EventuallyStationaryPolicy& pol2,
                                            double alpha, double theta1,
                                            double theta2,
                                            const McOptions& opts) {
  if (!(alpha > 0.0)) throw model_error("alpha must be > 0");
  if (!(theta1 > 0.0) || !(theta2 > 0.0))
    throw model_error("theta must be positive");
  check_common(model, opts);
  pol1.validate(model.n_states, model.n_u1());
  pol2.validate(model.n_states, model.n_u2());

  std::vector<double> x1(static_cast<std::size_t>(opts.paths));
  std::vector<double> x2(static_cast<std::size_t>(opts.paths));
  run_paths(opts.paths, resolve_threads(opts.threads), [&](long p) {
    CounterRng rng(opts.seed, static_cast<std::uint64_t>(p));
    double i1 = 0.0, i2 = 0.0;
    discounted_path(model, pol1, pol2, alpha, theta1, theta2, opts.horizon,
                    opts.start_state, rng, i1, i2);
    x1[static_cast<std::size_t>(p)] = std::exp(theta1 * i1);
    x2[static_cast<std::size_t>(p)] = std::exp(theta2 * i2);
  });

  DiscountedMcResult res;
  res.phi1 = mean_se(x1);
  res.phi2 = mean_se(x2);
  const double tail = std::exp(-alpha * opts.horizon) / alpha;
  res.bias_bound1 =
      res.phi1.value * (std::exp(theta1 * model.cost1.sup_norm * tail) - 1.0);
  res.bias_bound2 =
      res.phi2.value * (std::exp(theta2 * model.cost2.sup_norm * tail) - 1.0);
  return res;
}

namespace {

McEstimate log_mean_exp_rate(const std::vector<double>& expo, double theta,
                             double T) {
  // value = log(mean exp(expo)) / (theta T), se by the delta method
  McEstimate e;
  e.paths = static_cast<long>(expo.size());
  double m = -std::numeric_limits<double>::infinity();
  for (double v : expo) m = std::max(m, v);
  std::vector<double> shifted(expo.size());
  for (std::size_t p = 0; p < expo.size(); ++p)
    shifted[p] = std::exp(expo[p] - m);
  McEstimate inner = mean_se(shifted);
  e.value = (m + std::log(inner.value)) / (theta * T);
  e.se = inner.se / inner.value / (theta * T);
  return e;
}

}  // namespace

ErgodicMcResult estimate_ergodic_cost(const GameModel& model,
                                      const StationaryProfile& profile,
                                      double theta1, double theta2,
                                      const McOptions& opts) {
  if (!(theta1 > 0.0) || !(theta2 > 0.0))
    throw model_error("theta must be positive");
  check_common(model, opts);
  StationaryCache cache(model, profile);

  std::vector<double> e1(static_cast<std::size_t>(opts.paths));
  std::vector<double> e2(static_cast<std::size_t>(opts.paths));
  const double T = opts.horizon;
  run_paths(opts.paths, resolve_threads(opts.threads), [&](long p) {
    CounterRng rng(opts.seed, static_cast<std::uint64_t>(p));
    int i = opts.start_state;
    double t = 0.0, i1 = 0.0, i2 = 0.0;
    while (t < T) {
      const double t_jump =
          t + rng.exponential(cache.lam[static_cast<std::size_t>(i)]);
      const double t_next = std::min(t_jump, T);
      i1 += cache.r1[static_cast<std::size_t>(i)] * (t_next - t);
      i2 += cache.r2[static_cast<std::size_t>(i)] * (t_next - t);
      if (t_next >= T) break;
      t = t_next;
      i = rng.pick(&cache.rows[static_cast<std::size_t>(i) * cache.n], cache.n,
                   cache.lam[static_cast<std::size_t>(i)]);
    }
    e1[static_cast<std::size_t>(p)] = theta1 * i1;
    e2[static_cast<std::size_t>(p)] = theta2 * i2;
  });

  ErgodicMcResult res;
  res.rho1 = log_mean_exp_rate(e1, theta1, T);
  res.rho2 = log_mean_exp_rate(e2, theta2, T);
  return res;
}

HittingMcResult estimate_hitting_exponential(const GameModel& model,
                                             const StationaryProfile& profile,
                                             double delta,
                                             const std::vector<int>& target,
                                             const McOptions& opts) {
  if (!(delta >= 0.0)) throw model_error("delta must be >= 0");
  if (target.empty()) throw model_error("empty target set");
  check_common(model, opts);
  std::vector<char> in_target(static_cast<std::size_t>(model.n_states), 0);
  for (int s : target) {
    if (s < 0 || s >= model.n_states)
      throw model_error("target state out of range");
    in_target[static_cast<std::size_t>(s)] = 1;
  }
  StationaryCache cache(model, profile);

  std::vector<double> x(static_cast<std::size_t>(opts.paths));
  std::vector<char> cens(static_cast<std::size_t>(opts.paths), 0);
  const double T = opts.horizon;
  run_paths(opts.paths, resolve_threads(opts.threads), [&](long p) {
    CounterRng rng(opts.seed, static_cast<std::uint64_t>(p));
    int i = opts.start_state;
    double t = 0.0;
    while (!in_target[static_cast<std::size_t>(i)]) {
      t += rng.exponential(cache.lam[static_cast<std::size_t>(i)]);
      if (t >= T) break;
      i = rng.pick(&cache.rows[static_cast<std::size_t>(i) * cache.n], cache.n,
                   cache.lam[static_cast<std::size_t>(i)]);
    }
    if (in_target[static_cast<std::size_t>(i)] && t < T) {
      x[static_cast<std::size_t>(p)] = std::exp(delta * t);
    } else {
      x[static_cast<std::size_t>(p)] = std::exp(delta * T);
      cens[static_cast<std::size_t>(p)] = 1;
    }
  });

  HittingMcResult res;
  res.moment = mean_se(x);
  long c = 0;
  for (char v : cens) c += v;
  res.censored_fraction =
      static_cast<double>(c) / static_cast<double>(opts.paths);
  res.reliable = res.censored_fraction <= 0.01;
  return res;
}

DriftMcResult estimate_weighted_terminal(const GameModel& model,
                                         const StationaryProfile& profile,
                                         int player, double theta,
                                         const std::vector<double>& W,
                                         const McOptions& opts) {
  if (!(theta > 0.0)) throw model_error("theta must be positive");
  if (static_cast<int>(W.size()) != model.n_states)
    throw model_error("weight vector has wrong length");
  check_common(model, opts);
  StationaryCache cache(model, profile);
  const std::vector<double>& r = player == 1 ? cache.r1 : cache.r2;

  std::vector<double> a(static_cast<std::size_t>(opts.paths));
  std::vector<double> b(static_cast<std::size_t>(opts.paths));
  const double T = opts.horizon;
  run_paths(opts.paths, resolve_threads(opts.threads), [&](long p) {
    CounterRng rng(opts.seed, static_cast<std::uint64_t>(p));
    int i = opts.start_state;
    double t = 0.0, integral = 0.0;
    while (t < T) {
      const double t_jump =
          t + rng.exponential(cache.lam[static_cast<std::size_t>(i)]);
      const double t_next = std::min(t_jump, T);
      integral += r[static_cast<std::size_t>(i)] * (t_next - t);
      if (t_next >= T) break;
      t = t_next;
      i = rng.pick(&cache.rows[static_cast<std::size_t>(i) * cache.n], cache.n,
                   cache.lam[static_cast<std::size_t>(i)]);
    }
    const double g = std::exp(theta * integral);
    a[static_cast<std::size_t>(p)] = g * W[static_cast<std::size_t>(i)];
    b[static_cast<std::size_t>(p)] = g;
  });

  DriftMcResult res;
  res.weighted = mean_se(a);
  res.plain = mean_se(b);
  return res;
}

}  // namespace rsgame
