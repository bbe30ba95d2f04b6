#pragma once

// Exact stationary laws: moments, Laplace transform and mixing density of X1,
// the mRNA pmf of a refractory promoter, the Dirichlet hierarchical model and
// the Laplace recursion for general creation vectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "multistate/density.hpp"
#include "multistate/errors.hpp"
#include "multistate/linalg.hpp"
#include "multistate/model.hpp"
#include "multistate/quadrature.hpp"
#include "multistate/rng.hpp"
#include "multistate/special.hpp"
#include "multistate/spectra.hpp"

namespace multistate {

enum class PmfMethod { series, quadrature, oracle, monte_carlo };

inline const char* to_string(PmfMethod m) {
  switch (m) {
    case PmfMethod::series: return "series";
    case PmfMethod::quadrature: return "quadrature";
    case PmfMethod::oracle: return "oracle";
    case PmfMethod::monte_carlo: return "monte_carlo";
  }
  return "unknown";
}

/// Probabilities p(0..K) of the mRNA count.
struct Pmf {
  std::vector<double> values;
  double truncation_bound = 0.0;  // bound on the mass above K
  PmfMethod method = PmfMethod::series;
  double error_bound = 0.0;         // bound on sum_k |error of p(k)|
  std::vector<double> std_errors;   // per-k standard errors (Monte Carlo only)

  std::size_t size() const { return values.size(); }
  double sum() const {
    KahanAccumulator<double> s;
    for (double v : values) s.add(v);
    return s.value();
  }
  double mean() const {
    KahanAccumulator<double> s;
    for (std::size_t k = 0; k < values.size(); ++k) s.add(static_cast<double>(k) * values[k]);
    return s.value();
  }
};

namespace detail {

/// Checks the pmf invariants and clamps tiny negative values to zero.
inline void finish_pmf(Pmf& p, double normalization_tol) {
  for (std::size_t k = 0; k < p.values.size(); ++k) {
    if (p.values[k] < -1e-14)
      throw CrossCheckFailure("pmf value p(" + std::to_string(k) + ") = " + std::to_string(p.values[k]) + " is negative");
    p.values[k] = std::max(0.0, p.values[k]);
  }
  const double total = p.sum() + p.truncation_bound;
  if (std::abs(total - 1.0) > normalization_tol)
    throw CrossCheckFailure("pmf mass plus truncation bound is " + std::to_string(total));
}

inline std::size_t default_truncation(double nu) {
  return static_cast<std::size_t>(std::ceil(nu + 10.0 * std::sqrt(nu) + 20.0));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Moments and Laplace transform of X1

/// E[X1^k] = (a)_k / (b)_k with a = a^(active).
inline double x1_moments(const SpectralData& spec, StateIndex active, std::size_t k) {
  return pochhammer_ratio(spec.a_params(active), spec.b_params(), k);
}

/// Density of X1 discretized as a weighted point set: Gauss-Legendre nodes
/// on panels between the given bin edges (refined to `max_panel`), graded
/// geometrically towards both endpoints down to `x_lo`, plus point masses at
/// 0 and 1 for the power-law remainders.
struct DensityMeasure {
  std::vector<double> x;
  std::vector<double> mass;         // quadrature weight times density
  std::vector<std::size_t> bin;     // index of the edge interval holding each node
  double mass_at_zero = 0.0;        // assigned to the first bin
  double mass_at_one = 0.0;         // assigned to the last bin
  double density_error = 0.0;       // sum of weight times density error estimate
  std::size_t bins = 0;

  template <typename Kernel>
  double integrate(Kernel&& kernel) const {
    KahanAccumulator<double> s;
    s.add(mass_at_zero * kernel(0.0));
    s.add(mass_at_one * kernel(1.0));
    for (std::size_t i = 0; i < x.size(); ++i) s.add(mass[i] * kernel(x[i]));
    return s.value();
  }
  double total() const {
    return integrate([](double) { return 1.0; });
  }
  std::vector<double> bin_masses() const {
    std::vector<double> out(bins, 0.0);
    out.front() += mass_at_zero;
    out.back() += mass_at_one;
    for (std::size_t i = 0; i < x.size(); ++i) out[bin[i]] += mass[i];
    return out;
  }
};

inline DensityMeasure discretize_density(const DensityEvaluator& eval, std::span<const double> edges,
                                         double max_panel = 1.0 / 64.0, std::size_t order = 8, double x_lo = 1e-14) {
  if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0)
    throw ValidationError("density bin edges must start at 0 and end at 1");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw ValidationError("density bin edges must be strictly increasing");
  const auto& gl = quad::GaussLegendre::of(order);
  DensityMeasure m;
  m.bins = edges.size() - 1;
  std::vector<double> weights;
  auto add_panel = [&](double lo, double hi, std::size_t b) {
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      m.x.push_back(c + h * gl.nodes[q]);
      weights.push_back(h * gl.weights[q]);
      m.bin.push_back(b);
    }
  };
  const std::size_t last = m.bins - 1;
  double inner_lo = edges[1], inner_hi = edges[last];
  if (m.bins == 1) inner_lo = inner_hi = std::min(0.5, max_panel);
  double zero_edge = inner_lo;
  for (double hi = inner_lo; hi / 2.0 >= x_lo; hi /= 2.0) {
    add_panel(hi / 2.0, hi, 0);
    zero_edge = hi / 2.0;
  }
  for (std::size_t b = (m.bins == 1 ? 0 : 1); b < (m.bins == 1 ? 1 : last); ++b) {
    const double lo = m.bins == 1 ? inner_lo : edges[b];
    const double hi = m.bins == 1 ? 1.0 - inner_lo : edges[b + 1];
    const auto pieces = static_cast<std::size_t>(std::ceil((hi - lo) / max_panel));
    for (std::size_t j = 0; j < pieces; ++j)
      add_panel(lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(pieces),
                lo + (hi - lo) * static_cast<double>(j + 1) / static_cast<double>(pieces), b);
  }
  const double top_gap = m.bins == 1 ? inner_lo : 1.0 - inner_hi;
  double one_gap = top_gap;
  for (double g = top_gap; g / 2.0 >= x_lo; g /= 2.0) {
    add_panel(1.0 - g, 1.0 - g / 2.0, last);
    one_gap = g / 2.0;
  }

  const auto values = eval.evaluate(m.x);
  m.mass.resize(m.x.size());
  for (std::size_t i = 0; i < m.x.size(); ++i) {
    if (values[i].value < -1e-10)
      throw CrossCheckFailure("density evaluated to " + std::to_string(values[i].value) + " at x = " + std::to_string(m.x[i]));
    m.mass[i] = weights[i] * std::max(0.0, values[i].value);
    m.density_error += weights[i] * values[i].error;
  }
  const ActiveParams& p = eval.params();
  double a_min = std::numeric_limits<double>::infinity();
  for (const auto& z : p.a) a_min = std::min(a_min, z.real());
  const auto f0 = eval(zero_edge), f1 = eval(1.0 - one_gap);
  m.mass_at_zero = zero_edge * std::max(0.0, f0.value) / a_min;
  m.mass_at_one = one_gap * std::max(0.0, f1.value) / p.delta;
  return m;
}

/// Edges (k - 1/2)/nu clipped to [0,1]: bin k collects the mass that
/// rounds to k counts at scale nu.
inline std::vector<double> count_bin_edges(double nu) {
  std::vector<double> e{0.0};
  for (std::size_t k = 0;; ++k) {
    const double x = (static_cast<double>(k) + 0.5) / nu;
    if (x >= 1.0) break;
    e.push_back(x);
  }
  e.push_back(1.0);
  return e;
}

/// E[exp(s X1)] = NFN[(a);(b);s]; falls back to quadrature against the
/// density when the series cancels too strongly.
inline double x1_laplace(const SpectralData& spec, StateIndex active, double s) {
  const ParamVector a = spec.a_params(active), b = spec.b_params();
  try {
    const auto r = hyp_pfq(a, b, s, 1e-15);
    if (r.abs_error_bound <= 1e-12 * std::abs(r.value)) return r.value;
  } catch (const NoConvergence&) {
  }
  const DensityEvaluator eval(spec, active);
  const double scale = std::max(64.0, std::abs(s));
  const auto measure = discretize_density(eval, count_bin_edges(scale), 1.0 / 64.0);
  return measure.integrate([s](double x) { return std::exp(s * x); });
}

// ---------------------------------------------------------------------------
// mRNA pmf

namespace detail {

/// p(k) = integral of Poisson(k; nu x) against the discretized density.
inline Pmf pmf_by_quadrature(const DensityEvaluator& eval, double nu, std::size_t k_max) {
  const auto measure = discretize_density(eval, count_bin_edges(nu));
  Pmf p;
  p.method = PmfMethod::quadrature;
  std::vector<KahanAccumulator<double>> acc(k_max + 1);
  auto add_atom = [&](double lambda, double weight) {
    if (weight == 0.0) return;
    for_each_poisson(lambda, k_max, [&](std::size_t k, double q) { acc[k].add(weight * q); }, 1e-30);
  };
  add_atom(0.0, measure.mass_at_zero);
  add_atom(nu, measure.mass_at_one);
  for (std::size_t i = 0; i < measure.x.size(); ++i) add_atom(nu * measure.x[i], measure.mass[i]);
  p.values.resize(k_max + 1);
  for (std::size_t k = 0; k <= k_max; ++k) p.values[k] = acc[k].value();
  const double total = measure.total();
  p.error_bound = measure.density_error + std::abs(1.0 - total);
  return p;
}

}  // namespace detail

/// Stationary mRNA pmf for a refractory promoter with active state `active`
/// and (normalized) creation rate nu:
///   p(k) = nu^k/k! (a)_k/(b)_k NFN[(a+k);(b+k);-nu].
/// When any term of the series cannot be summed accurately the whole pmf is
/// computed as the Poisson mixture integral against the density of X1.
inline Pmf mrna_pmf(const SpectralData& spec, StateIndex active, double nu, std::optional<std::size_t> k_max = {}) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw ValidationError("nu must be positive and finite");
  const ParamVector a = spec.a_params(active), b = spec.b_params();
  std::size_t big_k = k_max.value_or(detail::default_truncation(nu));
  if (!k_max)
    while (poisson_upper_tail(big_k, nu) > 1e-10) big_k += static_cast<std::size_t>(std::ceil(std::sqrt(nu))) + 1;

  Pmf p;
  p.method = PmfMethod::series;
  p.values.resize(big_k + 1);
  bool series_ok = true;
  double log_pref = 0.0;  // log(nu^k/k! (a)_k/(b)_k)
  for (std::size_t k = 0; k <= big_k && series_ok; ++k) {
    if (k > 0) {
      const double r = shifted_ratio(a, b, static_cast<double>(k - 1));
      log_pref += std::log(nu) - std::log(static_cast<double>(k)) + std::log(r);
    }
    const double pref = std::exp(log_pref);
    if (pref == 0.0) {
      p.values[k] = 0.0;
      continue;
    }
    const double target = std::clamp(1e-13 / pref, 1e-16, 1e-3);
    try {
      const auto f = hyp_pfq(a.shifted(static_cast<double>(k)), b.shifted(static_cast<double>(k)), -nu, target);
      if (pref * f.abs_error_bound > 1e-12) {
        series_ok = false;
      } else {
        p.values[k] = pref * f.value;
        p.error_bound += pref * f.abs_error_bound;
      }
    } catch (const NoConvergence&) {
      series_ok = false;
    }
  }
  if (!series_ok) {
    const DensityEvaluator eval(spec, active);
    p = detail::pmf_by_quadrature(eval, nu, big_k);
  }
  p.truncation_bound = std::min(poisson_upper_tail(big_k, nu), std::max(0.0, 1.0 - p.sum()) + p.error_bound);
  detail::finish_pmf(p, 1e-8);
  return p;
}

/// Comparison of the pmf with the scaled density: `max_pointwise` is
/// max_k |f(k/nu)/nu - p(k)| over 1 <= k < nu and `total_variation` is the
/// distance between p and the density mass of the bins [(k-1/2)/nu, (k+1/2)/nu].
struct PostWidderReport {
  double max_pointwise = 0.0;
  double total_variation = 0.0;
  std::vector<double> binned_density;
};

inline PostWidderReport post_widder_check(const SpectralData& spec, StateIndex active, double nu,
                                          std::optional<std::size_t> k_max = {}) {
  const Pmf p = mrna_pmf(spec, active, nu, k_max);
  const DensityEvaluator eval(spec, active);
  const auto measure = discretize_density(eval, count_bin_edges(nu));
  PostWidderReport r;
  r.binned_density = measure.bin_masses();
  const std::size_t n = std::max(p.values.size(), r.binned_density.size());
  double tv = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double pk = k < p.values.size() ? p.values[k] : 0.0;
    const double qk = k < r.binned_density.size() ? r.binned_density[k] : 0.0;
    tv += std::abs(pk - qk);
  }
  r.total_variation = 0.5 * tv;
  for (std::size_t k = 1; k < p.values.size() && static_cast<double>(k) < nu; ++k) {
    const double f = eval(static_cast<double>(k) / nu).value / nu;
    r.max_pointwise = std::max(r.max_pointwise, std::abs(f - p.values[k]));
  }
  return r;
}

// ---------------------------------------------------------------------------
// General creation vectors

/// Power-series coefficients of the joint Laplace transform
/// phi(s) = sum_k c_k(s), c_0 = P_E, c_k = (kI - H)^-1 D(s) c_{k-1}.
struct LaplaceSeries {
  std::vector<std::vector<double>> coefficients;
  std::vector<double> argument;
  std::vector<double> partial_sums;
  double tail_estimate = 0.0;

  double total() const {
    KahanAccumulator<double> s;
    for (double v : partial_sums) s.add(v);
    return s.value();
  }
};

/// Runs the recursion for k = 1..k_max. Without `k_max` it stops once the
/// coefficients have decayed below 1e-17 of the partial sums.
inline LaplaceSeries general_laplace(const PromoterModel& model, std::span<const double> s,
                                     std::optional<std::size_t> k_max = {}) {
  const PromoterModel m = normalize(model);
  if (s.size() != m.n) throw ValidationError("Laplace argument must have one entry per promoter state");
  const RealMatrix h = build_generators(m).h;
  LaplaceSeries out;
  out.argument.assign(s.begin(), s.end());
  out.coefficients.push_back(null_vector(h));
  out.partial_sums = out.coefficients.back();
  const std::size_t cap = k_max.value_or(100'000);
  auto norm = [](const std::vector<double>& v) {
    double t = 0.0;
    for (double x : v) t += std::abs(x);
    return t;
  };
  double prev = norm(out.coefficients.back());
  double ratio = 1.0;
  for (std::size_t k = 1; k <= cap; ++k) {
    RealMatrix a = h;
    a *= -1.0;
    for (std::size_t i = 0; i < m.n; ++i) a(i, i) += static_cast<double>(k);
    std::vector<double> rhs(m.n);
    for (std::size_t i = 0; i < m.n; ++i) rhs[i] = s[i] * out.coefficients.back()[i];
    auto c = solve(a, rhs);
    for (std::size_t i = 0; i < m.n; ++i) out.partial_sums[i] += c[i];
    const double cur = norm(c);
    ratio = prev > 0.0 ? cur / prev : 0.0;
    prev = cur;
    out.coefficients.push_back(std::move(c));
    if (!k_max && cur <= 1e-17 * std::max(1.0, norm(out.partial_sums)) && ratio < 1.0) break;
  }
  out.tail_estimate = ratio < 1.0 ? prev * ratio / (1.0 - ratio) : std::numeric_limits<double>::infinity();
  return out;
}

// ---------------------------------------------------------------------------
// Dirichlet promoters

struct DirichletOptions {
  std::optional<std::size_t> k_max;
  std::size_t samples = 1'000'000;  // Monte Carlo, n > 3
  std::uint64_t seed = 0x5eedULL;
  std::size_t order = 8;             // Gauss-Legendre order per panel, n <= 3
};

namespace detail {

/// Beta(p, q) measure on (0,1) as nodes and weights: graded panels near both
/// endpoints plus point masses for the power-law remainders.
inline void beta_rule(double p, double q, double max_panel, std::size_t order, std::vector<double>& xs,
                      std::vector<double>& ws) {
  const auto& gl = quad::GaussLegendre::of(order);
  const double log_b = std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q);
  auto dens = [&](double x) { return std::exp((p - 1.0) * std::log(x) + (q - 1.0) * std::log1p(-x) - log_b); };
  xs.clear();
  ws.clear();
  auto add_panel = [&](double lo, double hi) {
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double x = c + h * gl.nodes[i];
      xs.push_back(x);
      ws.push_back(h * gl.weights[i] * dens(x));
    }
  };
  constexpr double x_lo = 1e-14;
  const double edge = std::min(0.25, max_panel);
  double lo_edge = edge;
  for (double hi = edge; hi / 2.0 >= x_lo; hi /= 2.0) {
    add_panel(hi / 2.0, hi);
    lo_edge = hi / 2.0;
  }
  const auto pieces = static_cast<std::size_t>(std::ceil((1.0 - 2.0 * edge) / max_panel));
  for (std::size_t j = 0; j < pieces; ++j)
    add_panel(edge + (1.0 - 2.0 * edge) * static_cast<double>(j) / static_cast<double>(pieces),
              edge + (1.0 - 2.0 * edge) * static_cast<double>(j + 1) / static_cast<double>(pieces));
  double hi_gap = edge;
  for (double g = edge; g / 2.0 >= x_lo; g /= 2.0) {
    add_panel(1.0 - g, 1.0 - g / 2.0);
    hi_gap = g / 2.0;
  }
  xs.push_back(0.0);
  ws.push_back(std::exp(p * std::log(lo_edge) - log_b) / p);
  xs.push_back(1.0);
  ws.push_back(std::exp(q * std::log(hi_gap) - log_b) / q);
}

}  // namespace detail

/// Pmf of M for X ~ Dirichlet(alpha), M | X ~ Poisson(u . X): tensor
/// quadrature over stick-breaking Beta coordinates for n <= 3, Rao-Blackwellized
/// Monte Carlo (averaging the Poisson pmf over Dirichlet draws) for n > 3.
inline Pmf dirichlet_exact(std::span<const double> alpha, std::span<const double> u, const DirichletOptions& opt = {}) {
  const std::size_t n = alpha.size();
  if (n == 0 || u.size() != n) throw ValidationError("alpha and u must be nonempty and of equal length");
  for (double x : alpha)
    if (!(x > 0.0)) throw ValidationError("Dirichlet parameters must be positive");
  for (double x : u)
    if (!(x >= 0.0)) throw ValidationError("creation rates must be nonnegative");
  const double u_max = *std::max_element(u.begin(), u.end());
  std::size_t big_k = opt.k_max.value_or(detail::default_truncation(u_max));
  Pmf p;
  std::vector<KahanAccumulator<double>> acc(big_k + 1);
  auto add = [&](double lambda, double w) {
    if (w == 0.0) return;
    for_each_poisson(lambda, big_k, [&](std::size_t k, double q) { acc[k].add(w * q); }, 1e-30);
  };
  const double max_panel = std::min(1.0 / 32.0, 1.0 / std::max(1.0, u_max));
  if (n == 1) {
    add(u[0], 1.0);
    p.method = PmfMethod::quadrature;
  } else if (n <= 3) {
    p.method = PmfMethod::quadrature;
    const double rest = std::accumulate(alpha.begin() + 1, alpha.end(), 0.0);
    std::vector<double> x1, w1;
    detail::beta_rule(alpha[0], rest, max_panel, opt.order, x1, w1);
    if (n == 2) {
      for (std::size_t i = 0; i < x1.size(); ++i) add(u[1] + (u[0] - u[1]) * x1[i], w1[i]);
    } else {
      std::vector<double> x2, w2;
      detail::beta_rule(alpha[1], alpha[2], max_panel, opt.order, x2, w2);
      for (std::size_t i = 0; i < x1.size(); ++i)
        for (std::size_t j = 0; j < x2.size(); ++j) {
          const double rem = 1.0 - x1[i];
          add(u[0] * x1[i] + rem * (u[1] * x2[j] + u[2] * (1.0 - x2[j])), w1[i] * w2[j]);
        }
    }
  } else {
    p.method = PmfMethod::monte_carlo;
    std::vector<KahanAccumulator<double>> sq(big_k + 1);
    Xoshiro256pp rng = stream_rng(opt.seed, 0);
    std::vector<std::gamma_distribution<double>> gammas;
    for (double a : alpha) gammas.emplace_back(a, 1.0);
    std::vector<double> g(n);
    for (std::size_t s = 0; s < opt.samples; ++s) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += g[i] = gammas[i](rng);
      double lambda = 0.0;
      for (std::size_t i = 0; i < n; ++i) lambda += u[i] * g[i] / total;
      for_each_poisson(lambda, big_k, [&](std::size_t k, double q) {
        acc[k].add(q);
        sq[k].add(q * q);
      }, 1e-30);
    }
    const double ns = static_cast<double>(opt.samples);
    p.std_errors.resize(big_k + 1);
    for (std::size_t k = 0; k <= big_k; ++k) {
      const double mean = acc[k].value() / ns;
      const double var = std::max(0.0, sq[k].value() / ns - mean * mean);
      p.std_errors[k] = std::sqrt(var / std::max(1.0, ns - 1.0));
      acc[k] = KahanAccumulator<double>();
      acc[k].add(mean);
    }
  }
  p.values.resize(big_k + 1);
  for (std::size_t k = 0; k <= big_k; ++k) p.values[k] = acc[k].value();
  if (p.method == PmfMethod::monte_carlo) {
    for (double se : p.std_errors) p.error_bound += 3.0 * se;
  } else {
    p.error_bound = 1e-12;
  }
  p.truncation_bound = std::min(poisson_upper_tail(big_k, u_max), std::max(0.0, 1.0 - p.sum()) + p.error_bound);
  detail::finish_pmf(p, p.method == PmfMethod::monte_carlo ? 1e-6 : 1e-8);
  return p;
}

}  // namespace multistate
