#pragma once

// Stochastic simulation of the promoter/mRNA process (Gillespie SSA and exact
// PDMP paths) and the truncated master-equation stationary solve.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "multistate/errors.hpp"
#include "multistate/exact.hpp"
#include "multistate/inactive.hpp"
#include "multistate/linalg.hpp"
#include "multistate/model.hpp"
#include "multistate/rng.hpp"
#include "multistate/special.hpp"

namespace multistate {

/// Piecewise description of one trajectory on [0, t_end]. Interval j is
/// [jump_times[j], jump_times[j+1]) (the last one ends at t_end) with promoter
/// state promoter_states[j]. For SSA paths levels[j] is the mRNA count on the
/// interval; for PDMP paths levels[j] is Y at the interval start and, for the
/// multivariate sampler, anchors[j] is X there.
struct PathSample {
  std::vector<double> jump_times;
  std::vector<std::size_t> promoter_states;  // 1-based
  std::vector<double> levels;
  std::vector<std::vector<double>> anchors;
  double t_end = 0.0;

  std::size_t interval_at(double t) const {
    const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    return it == jump_times.begin() ? 0 : static_cast<std::size_t>(it - jump_times.begin()) - 1;
  }
};

/// Terminal values of an ensemble. `samples` holds M (SSA) or Y (PDMP);
/// `histogram[v]` counts cells whose sample rounds down to v.
struct EnsembleResult {
  std::uint64_t seed = 0;
  std::size_t n_cells = 0;
  double t_end = 0.0;
  std::vector<std::size_t> states;
  std::vector<double> samples;
  std::vector<std::size_t> histogram;

  std::vector<double> empirical_pmf() const {
    std::vector<double> p(histogram.size());
    for (std::size_t v = 0; v < histogram.size(); ++v)
      p[v] = static_cast<double>(histogram[v]) / static_cast<double>(n_cells);
    return p;
  }
};

struct SimulationOptions {
  std::size_t initial_state = 1;
  double initial_level = 0.0;  // M0 for the SSA, Y0 for the PDMP ensemble
  std::size_t threads = 0;     // 0: hardware concurrency
};

namespace detail {

/// Runs body(i) for i in [0, count) on a fixed partition of indices, so the
/// results do not depend on the number of threads.
template <typename Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  std::size_t workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(1, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Jump chain of the promoter: outgoing targets and cumulative rates per state.
struct JumpChain {
  std::vector<std::vector<std::size_t>> targets;  // 1-based
  std::vector<std::vector<double>> cumulative;
  std::vector<double> exit;

  explicit JumpChain(const PromoterModel& m) : targets(m.n + 1), cumulative(m.n + 1), exit(m.n + 1, 0.0) {
    for (const auto& [key, r] : m.rates) {
      exit[key.first] += r;
      targets[key.first].push_back(key.second);
      cumulative[key.first].push_back(exit[key.first]);
    }
  }

  std::size_t next(std::size_t from, double u) const {
    const auto& c = cumulative[from];
    const double x = u * exit[from];
    const auto it = std::upper_bound(c.begin(), c.end(), x);
    return targets[from][std::min<std::size_t>(static_cast<std::size_t>(it - c.begin()), c.size() - 1)];
  }
};

/// Promoter path on [0, t_end]: jump times (starting with 0) and states.
inline void promoter_path(const JumpChain& chain, std::size_t start, double t_end, Xoshiro256pp& rng,
                          std::vector<double>& times, std::vector<std::size_t>& states) {
  double t = 0.0;
  std::size_t e = start;
  times.assign(1, 0.0);
  states.assign(1, e);
  while (true) {
    if (chain.exit[e] == 0.0) break;
    t += -std::log(rng.uniform_open()) / chain.exit[e];
    if (t >= t_end) break;
    e = chain.next(e, rng.uniform_open());
    times.push_back(t);
    states.push_back(e);
  }
}

inline void check_state(const PromoterModel& m, std::size_t s) {
  if (s < 1 || s > m.n) throw ValidationError("initial state " + std::to_string(s) + " out of range");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gillespie SSA

/// One SSA trajectory (direct method) of the normalized model. With
/// `record_path` the full path is returned; otherwise only the terminal
/// interval is kept.
inline PathSample ssa_path(const PromoterModel& model, double t_end, Xoshiro256pp& rng, std::size_t initial_state = 1,
                           std::size_t initial_m = 0, bool record_path = true) {
  const PromoterModel m = normalize(model);
  detail::check_state(m, initial_state);
  const detail::JumpChain chain(m);
  PathSample path;
  path.t_end = t_end;
  double t = 0.0;
  std::size_t e = initial_state, count = initial_m;
  auto record = [&] {
    if (!record_path) {
      path.jump_times.assign(1, t);
      path.promoter_states.assign(1, e);
      path.levels.assign(1, static_cast<double>(count));
      return;
    }
    path.jump_times.push_back(t);
    path.promoter_states.push_back(e);
    path.levels.push_back(static_cast<double>(count));
  };
  record();
  while (true) {
    const double switch_rate = chain.exit[e];
    const double create = m.creation[e - 1];
    const double degrade = static_cast<double>(count);
    const double total = switch_rate + create + degrade;
    if (total == 0.0) break;
    t += -std::log(rng.uniform_open()) / total;
    if (t >= t_end) break;
    const double pick = rng.uniform_open() * total;
    if (pick < switch_rate) {
      e = chain.next(e, pick / switch_rate);
    } else if (pick < switch_rate + create) {
      ++count;
    } else {
      --count;
    }
    record();
  }
  return path;
}

/// Terminal (E, M) of `n_cells` independent SSA runs; cell c uses the
/// stream stream_rng(seed, c).
inline EnsembleResult ssa_ensemble(const PromoterModel& model, double t_end, std::size_t n_cells, std::uint64_t seed,
                                   const SimulationOptions& opt = {}) {
  validate(model);
  if (!(t_end > 0.0)) throw ValidationError("t_end must be positive");
  if (opt.initial_level < 0.0 || opt.initial_level != std::floor(opt.initial_level))
    throw ValidationError("initial mRNA count must be a nonnegative integer");
  EnsembleResult r{seed, n_cells, t_end, std::vector<std::size_t>(n_cells), std::vector<double>(n_cells), {}};
  detail::parallel_for(n_cells, opt.threads, [&](std::size_t c) {
    Xoshiro256pp rng = stream_rng(seed, c);
    const auto p = ssa_path(model, t_end, rng, opt.initial_state, static_cast<std::size_t>(opt.initial_level), false);
    r.states[c] = p.promoter_states.back();
    r.samples[c] = p.levels.back();
  });
  for (double v : r.samples) {
    const auto k = static_cast<std::size_t>(v);
    if (k >= r.histogram.size()) r.histogram.resize(k + 1, 0);
    ++r.histogram[k];
  }
  return r;
}

// ---------------------------------------------------------------------------
// PDMP samplers

/// Y with dY/dt = u(E) - Y along a promoter path, in normalized time. The
/// path is determined by (seed, initial state) alone, so it matches
/// multivariate_pdmp_path for the same arguments.
inline PathSample pdmp_path(const PromoterModel& model, std::span<const double> u, double y0, double t_end,
                            std::uint64_t seed, std::size_t initial_state = 1) {
  const PromoterModel m = normalize(model);
  detail::check_state(m, initial_state);
  if (u.size() != m.n) throw ValidationError("u must have one entry per promoter state");
  Xoshiro256pp rng = stream_rng(seed, 0);
  PathSample p;
  p.t_end = t_end;
  detail::promoter_path(detail::JumpChain(m), initial_state, t_end, rng, p.jump_times, p.promoter_states);
  double y = y0;
  p.levels.push_back(y);
  for (std::size_t j = 1; j < p.jump_times.size(); ++j) {
    const double target = u[p.promoter_states[j - 1] - 1];
    y = target + (y - target) * std::exp(-(p.jump_times[j] - p.jump_times[j - 1]));
    p.levels.push_back(y);
  }
  return p;
}

/// Y at time t of a path from pdmp_path.
inline double pdmp_value(const PathSample& p, std::span<const double> u, double t) {
  const std::size_t j = p.interval_at(t);
  const double target = u[p.promoter_states[j] - 1];
  return target + (p.levels[j] - target) * std::exp(-(t - p.jump_times[j]));
}

/// Simplex-valued X: while E = i, X_j decays as exp(-t) for j != i and X_i
/// takes up the rest.
inline PathSample multivariate_pdmp_path(const PromoterModel& model, std::span<const double> x0, double t_end,
                                         std::uint64_t seed, std::size_t initial_state = 1) {
  const PromoterModel m = normalize(model);
  detail::check_state(m, initial_state);
  if (x0.size() != m.n) throw ValidationError("x0 must have one entry per promoter state");
  double s = 0.0;
  for (double v : x0) {
    if (v < 0.0) throw ValidationError("x0 must lie in the simplex");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-12) throw ValidationError("x0 must sum to 1");
  Xoshiro256pp rng = stream_rng(seed, 0);
  PathSample p;
  p.t_end = t_end;
  detail::promoter_path(detail::JumpChain(m), initial_state, t_end, rng, p.jump_times, p.promoter_states);
  std::vector<double> x(x0.begin(), x0.end());
  p.anchors.push_back(x);
  for (std::size_t j = 1; j < p.jump_times.size(); ++j) {
    const std::size_t i = p.promoter_states[j - 1] - 1;
    const double decay = std::exp(-(p.jump_times[j] - p.jump_times[j - 1]));
    double rest = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k)
      if (k != i) rest += x[k] *= decay;
    x[i] = 1.0 - rest;
    p.anchors.push_back(x);
  }
  return p;
}

/// X at time t of a path from multivariate_pdmp_path.
inline std::vector<double> multivariate_pdmp_value(const PathSample& p, double t) {
  const std::size_t j = p.interval_at(t);
  const std::size_t i = p.promoter_states[j] - 1;
  const double decay = std::exp(-(t - p.jump_times[j]));
  std::vector<double> x = p.anchors[j];
  double rest = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (k != i) rest += x[k] *= decay;
  x[i] = 1.0 - rest;
  return x;
}

/// Terminal (E, Y) of independent PDMP runs with u = the model's creation
/// rates (normalized); histogram bins are unit intervals of Y.
inline EnsembleResult pdmp_ensemble(const PromoterModel& model, double t_end, std::size_t n_cells, std::uint64_t seed,
                                    const SimulationOptions& opt = {}) {
  validate(model);
  if (!(t_end > 0.0)) throw ValidationError("t_end must be positive");
  const PromoterModel m = normalize(model);
  detail::check_state(m, opt.initial_state);
  const detail::JumpChain chain(m);
  EnsembleResult r{seed, n_cells, t_end, std::vector<std::size_t>(n_cells), std::vector<double>(n_cells), {}};
  detail::parallel_for(n_cells, opt.threads, [&](std::size_t c) {
    Xoshiro256pp rng = stream_rng(seed, c);
    std::vector<double> times;
    std::vector<std::size_t> states;
    detail::promoter_path(chain, opt.initial_state, t_end, rng, times, states);
    double y = opt.initial_level;
    times.push_back(t_end);
    for (std::size_t j = 0; j + 1 < times.size(); ++j) {
      const double target = m.creation[states[j] - 1];
      y = target + (y - target) * std::exp(-(times[j + 1] - times[j]));
    }
    r.states[c] = states.back();
    r.samples[c] = y;
  });
  for (double v : r.samples) {
    const auto k = static_cast<std::size_t>(std::max(0.0, std::floor(v)));
    if (k >= r.histogram.size()) r.histogram.resize(k + 1, 0);
    ++r.histogram[k];
  }
  return r;
}

// ---------------------------------------------------------------------------
// Truncated master equation

/// Stationary law of the truncated jump process on {1..n} x {0..K}.
struct MasterSolution {
  Pmf marginal;
  std::vector<std::vector<double>> joint;  // joint[i][k], i 0-based
  double residual = 0.0;                   // ||A p||_1 of the assembled operator
};

namespace detail {

/// Compressed-row generator transpose of the truncated process, unknown
/// (i, k) at index k*n + i. Creation is switched off at level K.
struct MasterOperator {
  std::size_t n = 0, levels = 0;
  std::vector<std::size_t> row_start;
  std::vector<std::size_t> col;
  std::vector<double> val;

  MasterOperator(const PromoterModel& m, std::size_t k_max) : n(m.n), levels(k_max + 1) {
    const RealMatrix h = build_generators(m).h;
    const std::size_t size = n * levels;
    row_start.reserve(size + 1);
    row_start.push_back(0);
    for (std::size_t k = 0; k < levels; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        // inflow into (i, k)
        if (k > 0 && m.creation[i] > 0.0) push((k - 1) * n + i, m.creation[i]);
        for (std::size_t j = 0; j < n; ++j) {
          double v = h(i, j);
          if (j == i) v -= static_cast<double>(k) + (k + 1 < levels ? m.creation[i] : 0.0);
          if (v != 0.0) push(k * n + j, v);
        }
        if (k + 1 < levels) push((k + 1) * n + i, static_cast<double>(k + 1));
        row_start.push_back(col.size());
      }
    }
  }

  double residual(std::span<const double> p) const {
    double r = 0.0;
    for (std::size_t row = 0; row + 1 < row_start.size(); ++row) {
      double s = 0.0;
      for (std::size_t q = row_start[row]; q < row_start[row + 1]; ++q) s += val[q] * p[col[q]];
      r += std::abs(s);
    }
    return r;
  }

 private:
  void push(std::size_t c, double v) {
    col.push_back(c);
    val.push_back(v);
  }
};

}  // namespace detail

/// Solves the truncated master equation by block elimination over mRNA
/// levels: p_k = S_k p_{k-1} with S_K = -D_K^-1 U and
/// S_k = -(D_k + L_{k+1} S_{k+1})^-1 U, then p_0 spans the null space of
/// D_0 + L_1 S_1. Levels are carried with separate log scales so that no
/// intermediate over- or underflows. Without `k_max`, K starts at
/// nu + 12 sqrt(nu) + 30 (nu the largest normalized creation rate) and grows
/// until the Poisson(nu) tail bound on the truncated mass is below 1e-12.
inline MasterSolution master_stationary(const PromoterModel& model, std::optional<std::size_t> k_max = {}) {
  validate(model);
  const PromoterModel m = normalize(model);
  const std::size_t n = m.n;
  const double nu = *std::max_element(m.creation.begin(), m.creation.end());
  std::size_t big_k = k_max.value_or(static_cast<std::size_t>(std::ceil(nu + 12.0 * std::sqrt(nu) + 30.0)));
  if (!k_max)
    while (poisson_upper_tail(big_k, nu) > 1e-12) big_k += 10;
  const RealMatrix h = build_generators(m).h;

  auto diag_block = [&](std::size_t k) {
    RealMatrix d = h;
    for (std::size_t i = 0; i < n; ++i) d(i, i) -= static_cast<double>(k) + (k < big_k ? m.creation[i] : 0.0);
    return d;
  };
  // S_k for k = 1..K (index k)
  std::vector<RealMatrix> s(big_k + 1);
  for (std::size_t k = big_k; k >= 1; --k) {
    RealMatrix a = diag_block(k);
    if (k < big_k) a += s[k + 1] * static_cast<double>(k + 1);
    LuDecomposition<double> lu(a);
    if (lu.singular(1e-15)) throw Singularity("master_stationary: singular level block at k = " + std::to_string(k));
    RealMatrix sk(n, n);
    std::vector<double> rhs(n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) rhs[i] = i == j ? -m.creation[j] : 0.0;
      const auto x = lu.solve(rhs);
      for (std::size_t i = 0; i < n; ++i) sk(i, j) = x[i];
    }
    s[k] = std::move(sk);
  }
  RealMatrix a0 = diag_block(0);
  if (big_k >= 1) a0 += s[1];
  // a0 has zero column sums up to rounding: the total flux balance of level 0.
  std::vector<std::vector<double>> level(big_k + 1);
  std::vector<double> log_scale(big_k + 1, 0.0);
  level[0] = null_vector(a0);
  for (std::size_t k = 1; k <= big_k; ++k) {
    auto v = s[k] * std::span<const double>(level[k - 1]);
    double t = 0.0;
    for (double& x : v) {
      x = std::max(0.0, x);
      t += x;
    }
    log_scale[k] = log_scale[k - 1];
    if (t > 0.0) {
      for (double& x : v) x /= t;
      log_scale[k] += std::log(t);
    }
    level[k] = std::move(v);
  }
  const double top = *std::max_element(log_scale.begin(), log_scale.end());
  KahanAccumulator<double> total;
  for (std::size_t k = 0; k <= big_k; ++k) {
    const double f = std::exp(log_scale[k] - top);
    for (double& x : level[k]) {
      x *= f;
      total.add(x);
    }
  }
  const double z = total.value();
  MasterSolution out;
  out.joint.assign(n, std::vector<double>(big_k + 1, 0.0));
  out.marginal.method = PmfMethod::oracle;
  out.marginal.values.assign(big_k + 1, 0.0);
  std::vector<double> flat(n * (big_k + 1));
  for (std::size_t k = 0; k <= big_k; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const double v = level[k][i] / z;
      out.joint[i][k] = v;
      out.marginal.values[k] += v;
      flat[k * n + i] = v;
    }
  out.residual = detail::MasterOperator(m, big_k).residual(flat);
  const double scale = nu + static_cast<double>(big_k) + 1.0;
  if (out.residual > 1e-10 * scale)
    throw CrossCheckFailure("master_stationary: residual " + std::to_string(out.residual) + " of the truncated operator");
  out.marginal.truncation_bound = poisson_upper_tail(big_k, nu);
  out.marginal.error_bound = out.residual;
  detail::finish_pmf(out.marginal, 1e-8);
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics

/// Total variation distance 1/2 sum |p - q|, shorter input padded with zeros.
inline double tv_distance(std::span<const double> p, std::span<const double> q) {
  const std::size_t n = std::max(p.size(), q.size());
  KahanAccumulator<double> s;
  for (std::size_t k = 0; k < n; ++k) s.add(std::abs((k < p.size() ? p[k] : 0.0) - (k < q.size() ? q[k] : 0.0)));
  return 0.5 * s.value();
}
inline double tv_distance(const Pmf& p, const Pmf& q) { return tv_distance(p.values, q.values); }
inline double tv_distance(const EnsembleResult& e, const Pmf& q) { return tv_distance(e.empirical_pmf(), q.values); }

/// Simulated inactive periods: start from the exit distribution of the
/// active state and run the jump chain until it returns (model time units).
struct FirstPassageSample {
  std::vector<double> times;
  double mean = 0.0;
  double std_error = 0.0;

  /// Counts of times in [edges[b], edges[b+1]).
  std::vector<std::size_t> histogram(std::span<const double> edges) const {
    std::vector<std::size_t> h(edges.size() > 0 ? edges.size() - 1 : 0, 0);
    for (double t : times) {
      const auto it = std::upper_bound(edges.begin(), edges.end(), t);
      if (it == edges.begin() || it == edges.end()) continue;
      ++h[static_cast<std::size_t>(it - edges.begin()) - 1];
    }
    return h;
  }
};

inline FirstPassageSample first_passage_mc(const PromoterModel& model, StateIndex active, std::size_t n_runs,
                                           std::uint64_t seed, std::size_t threads = 0) {
  const PeriodLaw law = period_law(model, active);
  const detail::JumpChain chain(model);
  std::vector<double> cumulative_pi;
  double acc = 0.0;
  for (double p : law.pi0) cumulative_pi.push_back(acc += p);
  FirstPassageSample out;
  out.times.resize(n_runs);
  constexpr std::size_t block = 4096;
  const std::size_t blocks = (n_runs + block - 1) / block;
  detail::parallel_for(blocks, threads, [&](std::size_t b) {
    Xoshiro256pp rng = stream_rng(seed, b);
    for (std::size_t r = b * block; r < std::min(n_runs, (b + 1) * block); ++r) {
      const double u = rng.uniform_open() * acc;
      std::size_t e = static_cast<std::size_t>(std::upper_bound(cumulative_pi.begin(), cumulative_pi.end(), u) -
                                               cumulative_pi.begin()) + 1;
      e = std::min(e, law.pi0.size());
      double t = 0.0;
      while (e != active.value) {
        t += -std::log(rng.uniform_open()) / chain.exit[e];
        e = chain.next(e, rng.uniform_open());
      }
      out.times[r] = t;
    }
  });
  KahanAccumulator<double> s, s2;
  for (double t : out.times) {
    s.add(t);
    s2.add(t * t);
  }
  const double nr = static_cast<double>(n_runs);
  out.mean = s.value() / nr;
  const double var = std::max(0.0, s2.value() / nr - out.mean * out.mean);
  out.std_error = std::sqrt(var / std::max(1.0, nr - 1.0));
  return out;
}

}  // namespace multistate
