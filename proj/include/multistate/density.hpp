#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <exception>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "multistate/errors.hpp"
#include "multistate/quadrature.hpp"
#include "multistate/special.hpp"
#include "multistate/spectra.hpp"

namespace multistate {

enum class DensityMethod { residue_series, hyp2f1_n3, mellin_quadrature, endpoint_asymptotic };

inline const char* to_string(DensityMethod m) {
  switch (m) {
    case DensityMethod::residue_series: return "residue_series";
    case DensityMethod::hyp2f1_n3: return "hyp2f1_n3";
    case DensityMethod::mellin_quadrature: return "mellin_quadrature";
    case DensityMethod::endpoint_asymptotic: return "endpoint_asymptotic";
  }
  return "unknown";
}

struct DensityPoint {
  double value = 0.0;
  double error = 0.0;  // estimated absolute error
  DensityMethod method = DensityMethod::residue_series;
};

/// Density of X1 sampled on a grid in (0,1).
struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> errors;
  std::vector<DensityMethod> methods;  // per point
  DensityMethod method = DensityMethod::residue_series;  // the most frequent per-point method
};

/// Parameters of the X1 law for one active state: moments (a)_k/(b)_k.
struct ActiveParams {
  std::vector<cplx> a;
  std::vector<cplx> b;
  double delta = 0.0;     // sum(b) - sum(a), the exit rate of the active state
  double log_norm = 0.0;  // log prod Gamma(b_i)/Gamma(a_i)
  std::size_t size() const { return a.size(); }
};

inline ActiveParams make_active_params(std::vector<cplx> a, std::vector<cplx> b) {
  if (a.size() != b.size() || a.empty()) throw ValidationError("parameter vectors a and b must have equal nonzero length");
  ActiveParams p{std::move(a), std::move(b), 0.0, 0.0};
  cplx d = 0.0, ln = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    d += p.b[i] - p.a[i];
    ln += log_gamma(p.b[i]) - log_gamma(p.a[i]);
  }
  p.delta = d.real();
  p.log_norm = ln.real();
  return p;
}

inline ActiveParams active_params(const SpectralData& spec, StateIndex active) {
  return make_active_params(spec.a_of(active), spec.b);
}

/// min over i != j of the distance from a_i - a_j to the nearest integer.
inline double min_integer_separation(const std::vector<cplx>& a) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const cplx d = a[i] - a[j];
      best = std::min(best, std::abs(d - std::round(d.real())));
    }
  return best;
}

// ---------------------------------------------------------------------------
// Individual evaluation methods

/// N = 1: Beta(a, b - a).
inline DensityPoint density_beta(const ActiveParams& p, double x) {
  const double a = p.a[0].real();
  const double v = std::exp(p.log_norm - std::lgamma(p.delta) + (a - 1.0) * std::log(x) + (p.delta - 1.0) * std::log1p(-x));
  return {v, 8.0 * std::numeric_limits<double>::epsilon() * v, DensityMethod::residue_series};
}

/// Residue expansion with simple poles:
/// f(x) = (1/A) sum_i B_i x^(a_i - 1) NF(N-1)[(1 + a_i - b); (1 + a_i - a_j)_{j != i}; x].
/// Throws NoConvergence when the terms cancel too strongly or the inner series is too slow.
inline DensityPoint density_residue(const ActiveParams& p, double x, std::size_t max_terms = 200'000) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const std::size_t n = p.size();
  const double lx = std::log(x);
  cplx total = 0.0;
  double abs_total = 0.0, err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const cplx ai = p.a[i];
    cplx log_term = p.log_norm + (ai - 1.0) * lx;
    bool vanishes = false;
    for (std::size_t j = 0; j < n; ++j) {
      const auto r = log_rgamma(p.b[j] - ai);
      if (!r) {
        vanishes = true;
        break;
      }
      log_term += *r;
      if (j != i) {
        if (detail::is_nonpositive_integer(p.a[j] - ai))
          throw NoConvergence("residue series: coinciding poles (a_i - a_j is an integer)");
        log_term += log_gamma(p.a[j] - ai);
      }
    }
    if (vanishes) continue;
    std::vector<cplx> num(n), den;
    for (std::size_t j = 0; j < n; ++j) num[j] = 1.0 + ai - p.b[j];
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) den.push_back(1.0 + ai - p.a[j]);
    SeriesOptions opt;
    opt.target_abs_err = 1e-15;
    opt.max_terms = max_terms;
    opt.cancellation_limit = 1e10;
    const auto series = hyp_pfq_complex(num, den, x, opt);
    const cplx pref = std::exp(log_term);
    const cplx term = pref * series.value;
    total += term;
    abs_total += std::abs(term);
    err += std::abs(pref) * series.abs_error_bound;
  }
  const double value = total.real();
  err += 4.0 * eps * static_cast<double>(n) * abs_total;
  if (abs_total > 1e8 * std::abs(value) || std::abs(total.imag()) > 1e-8 * abs_total + 1e-300)
    throw NoConvergence("residue series: cancellation between pole contributions");
  return {value, err, DensityMethod::residue_series};
}

/// Residue series continued to parameters with integer-spaced a: the a are
/// spread apart by +-t times their rank among the distinct real parts, the
/// symmetric average removes the odd orders in t, and one Richardson step on
/// t and t/2 removes the t^2 term. Conjugate pairs move together.
inline DensityPoint density_residue_limit(const ActiveParams& p, double x, double t = 0.05) {
  std::vector<double> re;
  for (const auto& z : p.a) re.push_back(z.real());
  std::sort(re.begin(), re.end());
  re.erase(std::unique(re.begin(), re.end()), re.end());
  auto shifted = [&](double h) {
    std::vector<cplx> a = p.a;
    for (auto& z : a) {
      const auto rank = std::lower_bound(re.begin(), re.end(), z.real()) - re.begin();
      z += h * static_cast<double>(rank);
    }
    return density_residue(make_active_params(std::move(a), p.b), x);
  };
  auto symmetric = [&](double h) {
    const auto up = shifted(h), down = shifted(-h);
    return std::pair{0.5 * (up.value + down.value), 0.5 * (up.error + down.error)};
  };
  const auto [g1, e1] = symmetric(t);
  const auto [g2, e2] = symmetric(t / 2.0);
  const auto [g4, e4] = symmetric(t / 4.0);
  const double r1 = (4.0 * g2 - g1) / 3.0, r2 = (4.0 * g4 - g2) / 3.0;
  const double value = (16.0 * r2 - r1) / 15.0;
  const double err = std::abs(value - r2) + (64.0 * e4 + 20.0 * e2 + e1) / 45.0;
  return {value, err, DensityMethod::residue_series};
}

/// n = 3 (two parameters each):
/// f(x) = Gamma(b1)Gamma(b2)/(Gamma(a1)Gamma(a2)Gamma(delta)) x^(a1-1) (1-x)^(delta-1) 2F1[b1-a2, b2-a2; delta; 1-x]
/// with a1 <= a2, so the series converges at 1 - x -> 1 as fast as possible.
inline DensityPoint density_hyp2f1(const ActiveParams& p, double x, std::size_t max_terms = 200'000) {
  if (p.size() != 2) throw ValidationError("the 2F1 density formula needs exactly two parameters");
  if (p.a[0].imag() != 0.0 || p.a[1].imag() != 0.0) throw ValidationError("the 2F1 density formula needs real a");
  const double a1 = std::min(p.a[0].real(), p.a[1].real());
  const double a2 = std::max(p.a[0].real(), p.a[1].real());
  SeriesOptions opt;
  opt.max_terms = max_terms;
  const ParamVector num(std::vector<cplx>{p.b[0] - a2, p.b[1] - a2});
  const ParamVector den{p.delta};
  const auto series = hyp_pfq(num, den, 1.0 - x, 1e-15, opt);
  const double pref =
      std::exp(p.log_norm - std::lgamma(p.delta) + (a1 - 1.0) * std::log(x) + (p.delta - 1.0) * std::log1p(-x));
  const double value = pref * series.value;
  const double err = pref * series.abs_error_bound + 8.0 * std::numeric_limits<double>::epsilon() * std::abs(value);
  return {value, err, DensityMethod::hyp2f1_n3};
}

/// Leading behaviour at x -> 1: prod Gamma(b)/Gamma(a) (1-x)^(delta-1) / Gamma(delta).
inline DensityPoint density_near_one(const ActiveParams& p, double x) {
  const double v = std::exp(p.log_norm - std::lgamma(p.delta) + (p.delta - 1.0) * std::log1p(-x));
  // relative correction is O((1 - x) * parameter scale)
  double scale = 0.0;
  for (const auto& z : p.b) scale += std::abs(z);
  return {v, v * (1.0 - x) * (scale + 1.0), DensityMethod::endpoint_asymptotic};
}

/// Numerical inversion of the Mellin transform
///   f(x) = (1/2 pi i) C int prod Gamma(a + z)/Gamma(b + z) x^(-z-1) dz,  C = prod Gamma(b)/Gamma(a),
/// along a vertical line Re z = c right of every pole. Conjugate symmetry
/// reduces it to (C/pi) Re int_0^inf. The points x are grouped into tiers by
/// L = -ln x (ratio sqrt 2 between tiers); each tier uses the contour through
/// the real saddle point of the integrand at its representative L, and its
/// Gamma values are tabulated once, so each x only costs a weighted sum.
class MellinInverter {
 public:
  explicit MellinInverter(ActiveParams p) : p_(std::move(p)) {
    double amin = std::numeric_limits<double>::infinity();
    for (const auto& z : p_.a) amin = std::min(amin, z.real());
    a_min_ = amin;
    margin_ = std::min(0.5, amin / 2.0);
    for (const auto& z : p_.a) param_scale_ = std::max(param_scale_, std::abs(z));
    for (const auto& z : p_.b) param_scale_ = std::max(param_scale_, std::abs(z));
  }
  MellinInverter(const MellinInverter&) = delete;
  MellinInverter& operator=(const MellinInverter&) = delete;

  /// The tail of the inversion integral decays like y^-delta; below delta = 2
  /// it cannot be truncated at working precision in reasonable time.
  bool available() const { return p_.delta > 2.0; }

  DensityPoint operator()(double x) const {
    if (!available())
      throw DensityUnavailable("Mellin inversion needs delta > 2 (delta = " + std::to_string(p_.delta) + ")");
    const double big_l = -std::log(x);
    int t = static_cast<int>(std::ceil(2.0 * std::log2(big_l)));
    t = std::max(t, kMinTier);
    if (t > kMaxTier) throw DensityUnavailable("Mellin inversion: x too close to 0");
    const Tier& tier = get_tier(t);
    if (!tier.ok) throw DensityUnavailable(tier.failure);
    cplx total = 0.0;
    double err = 0.0;
    for (std::size_t pi = 0; pi + 1 < tier.panel_start.size(); ++pi) {
      cplx k = 0.0, g = 0.0;
      for (std::size_t q = tier.panel_start[pi]; q < tier.panel_start[pi + 1]; ++q) {
        const auto& nd = tier.nodes[q];
        const cplx v = nd.g * std::polar(1.0, nd.y * big_l);
        k += nd.wk * v;
        g += nd.wg * v;
      }
      total += k;
      err += std::abs(k - g);
    }
    const double outer = std::exp(tier.log_offset + (tier.c + 1.0) * big_l) / std::numbers::pi;
    const double value = outer * total.real();
    const double scale = outer * tier.abs_integral;
    err = outer * (err + tier.tail) + 64.0 * std::numeric_limits<double>::epsilon() * scale;
    if (!std::isfinite(value) || err > 1e-9 * std::abs(value) + 1e-12) {
      throw DensityUnavailable("Mellin inversion: achieved error " + std::to_string(err) + " at x = " +
                               std::to_string(x) + " (value " + std::to_string(value) + ")");
    }
    return {value, err, DensityMethod::mellin_quadrature};
  }

 private:
  static constexpr int kMinTier = -14;  // L <= 2^-7
  static constexpr int kMaxTier = 20;   // L <= 2^10
  static constexpr int kTiers = kMaxTier - kMinTier + 1;

  struct Node {
    double y;
    double wk;  // Kronrod weight times half-width
    double wg;  // Gauss weight times half-width (0 for Kronrod-only nodes)
    cplx g;     // C prod Gamma(a + z)/Gamma(b + z) at z = c + iy, divided by exp(log_offset)
  };
  struct Tier {
    double c = 0.0;
    double log_offset = 0.0;
    std::vector<Node> nodes;
    std::vector<std::size_t> panel_start;
    double abs_integral = 0.0;
    double tail = 0.0;
    bool ok = false;
    std::string failure;
  };

  cplx log_integrand(double c, double y) const {
    const cplx z(c, y);
    cplx s = p_.log_norm;
    for (std::size_t i = 0; i < p_.size(); ++i) s += log_gamma(p_.a[i] + z) - log_gamma(p_.b[i] + z);
    return s;
  }

  /// Minimizes log|integrand| on the real axis: Re log G(c) + (c + 1) L.
  double saddle(double big_l) const {
    auto phi = [&](double c) { return log_integrand(c, 0.0).real() + (c + 1.0) * big_l; };
    const double c_min = -a_min_ + std::min(margin_, 0.25 / big_l);
    double lo = c_min, hi = c_min + std::max(50.0, 8.0 * p_.delta / big_l);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = phi(x1), f2 = phi(x2);
    for (int it = 0; it < 80 && hi - lo > 1e-6 * (1.0 + std::abs(lo)); ++it) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = phi(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = phi(x2);
      }
    }
    return std::max(c_min, 0.5 * (lo + hi));
  }

  const Tier& get_tier(int t) const {
    const std::size_t idx = static_cast<std::size_t>(t - kMinTier);
    std::call_once(once_[idx], [&] { build(t, tiers_[idx]); });
    return tiers_[idx];
  }

  void build(int t, Tier& tier) const {
    using GK = quad::GaussKronrod15;
    const double big_l = std::exp2(0.5 * t);
    tier.c = saddle(big_l);
    tier.log_offset = log_integrand(tier.c, 0.0).real();
    const double shift = tier.c + a_min_;  // distance from the contour to the poles
    const double hmax = 2.0 / big_l;
    const double growth = 2.0 * (p_.delta + 2.0 * static_cast<double>(p_.size()));
    const double y_min_tail = 4.0 * (param_scale_ + std::abs(tier.c)) + 10.0;
    constexpr std::size_t panel_cap = 50'000;
    double y = 0.0;
    while (true) {
      const double width = std::min(hmax, (0.5 * shift + y) / growth);
      const double center = y + width / 2.0, half = width / 2.0;
      tier.panel_start.push_back(tier.nodes.size());
      auto push = [&](double yy, double wk, double wg) {
        const cplx g = std::exp(log_integrand(tier.c, yy) - tier.log_offset);
        tier.nodes.push_back({yy, wk * half, wg * half, g});
        tier.abs_integral += wk * half * std::abs(g);
      };
      push(center, GK::wgk[7], GK::wg[3]);
      for (int j = 0; j < 7; ++j) {
        const double wg = (j % 2 == 1) ? GK::wg[j / 2] : 0.0;
        push(center - half * GK::xgk[j], GK::wgk[j], wg);
        push(center + half * GK::xgk[j], GK::wgk[j], wg);
      }
      y += width;
      if (y >= y_min_tail) {
        const double tail = std::exp(log_integrand(tier.c, y).real() - tier.log_offset) * y / (p_.delta - 1.0);
        if (tail <= 1e-15 * tier.abs_integral) {
          tier.tail = tail;
          break;
        }
      }
      if (tier.panel_start.size() > panel_cap) {
        tier.failure = "Mellin inversion: integrand decays too slowly (delta = " + std::to_string(p_.delta) + ")";
        tier.panel_start.push_back(tier.nodes.size());
        return;
      }
    }
    tier.panel_start.push_back(tier.nodes.size());
    tier.ok = true;
  }

  ActiveParams p_;
  double margin_ = 0.5;
  double a_min_ = 0.0;
  double param_scale_ = 0.0;
  mutable std::array<std::once_flag, kTiers> once_;
  mutable std::array<Tier, kTiers> tiers_;
};

// ---------------------------------------------------------------------------
// Method selection and caching

/// Evaluates the density of X1 point by point, choosing the first method that
/// meets its error target: closed-form Beta (N = 1), residue series (pole
/// separation > 0.05), the 2F1 formula (N = 2, x >= 1e-3), Mellin inversion,
/// and finally the endpoint asymptotic for 1 - x <= 1e-8. Results are cached;
/// concurrent readers are safe.
class DensityEvaluator {
 public:
  static constexpr double kSeparationThreshold = 0.05;

  explicit DensityEvaluator(ActiveParams p)
      : p_(std::move(p)), separation_(min_integer_separation(p_.a)), mellin_(std::make_unique<MellinInverter>(p_)) {}
  DensityEvaluator(const SpectralData& spec, StateIndex active) : DensityEvaluator(active_params(spec, active)) {}

  const ActiveParams& params() const { return p_; }
  double separation() const { return separation_; }

  DensityPoint operator()(double x) const {
    {
      std::shared_lock lock(mu_);
      auto it = cache_.find(x);
      if (it != cache_.end()) return it->second;
    }
    const DensityPoint v = compute(x);
    std::unique_lock lock(mu_);
    cache_.emplace(x, v);
    return v;
  }

  /// Evaluates many points, in parallel when the hardware allows it.
  std::vector<DensityPoint> evaluate(std::span<const double> xs) const {
    std::vector<DensityPoint> out(xs.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), xs.size() / 64));
    if (workers <= 1) {
      for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (*this)(xs[i]);
      return out;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < xs.size(); i += workers) out[i] = (*this)(xs[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    return out;
  }

  DensityPoint residue(double x) const {
    if (p_.size() == 1) return density_beta(p_, x);
    return density_residue(p_, x);
  }
  DensityPoint hyp2f1(double x) const { return density_hyp2f1(p_, x); }
  DensityPoint mellin(double x) const { return (*mellin_)(x); }
  bool mellin_available() const { return mellin_->available(); }

 private:
  DensityPoint compute(double x) const {
    if (!(x > 0.0 && x < 1.0)) throw ValidationError("density grid points must lie in (0,1), got " + std::to_string(x));
    if (p_.size() == 1) return density_beta(p_, x);
    std::string reasons;
    auto accept = [](const DensityPoint& d) { return d.error <= 1e-9 * std::abs(d.value) + 1e-12; };
    if (separation_ > kSeparationThreshold) {
      try {
        const auto d = density_residue(p_, x);
        if (accept(d)) return d;
        reasons += " residue: error " + std::to_string(d.error) + ";";
      } catch (const Error& e) {
        reasons += std::string(" residue: ") + e.what() + ";";
      }
    }
    if (p_.size() == 2 && x >= 1e-3) {
      try {
        const auto d = density_hyp2f1(p_, x);
        if (accept(d)) return d;
        reasons += " 2F1: error " + std::to_string(d.error) + ";";
      } catch (const Error& e) {
        reasons += std::string(" 2F1: ") + e.what() + ";";
      }
    }
    if (mellin_->available()) {
      try {
        return (*mellin_)(x);
      } catch (const Error& e) {
        reasons += std::string(" mellin: ") + e.what() + ";";
      }
    }
    if (separation_ <= kSeparationThreshold) {
      try {
        const auto d = density_residue_limit(p_, x);
        if (accept(d)) return d;
        reasons += " residue limit: error " + std::to_string(d.error) + ";";
      } catch (const Error& e) {
        reasons += std::string(" residue limit: ") + e.what() + ";";
      }
    }
    if (1.0 - x <= 1e-8) return density_near_one(p_, x);
    throw DensityUnavailable("no density method met its error target at x = " + std::to_string(x) + ":" + reasons);
  }

  ActiveParams p_;
  double separation_;
  std::unique_ptr<MellinInverter> mellin_;
  mutable std::shared_mutex mu_;
  mutable std::unordered_map<double, DensityPoint> cache_;
};

/// Density of X1 for the given active state on `grid` (points in (0,1)).
inline DensityCurve x1_density(const DensityEvaluator& eval, std::span<const double> grid) {
  DensityCurve c;
  c.grid.assign(grid.begin(), grid.end());
  for (std::size_t i = 1; i < c.grid.size(); ++i)
    if (!(c.grid[i] > c.grid[i - 1])) throw ValidationError("density grid must be strictly increasing");
  const auto pts = eval.evaluate(grid);
  std::map<DensityMethod, std::size_t> counts;
  for (const auto& d : pts) {
    if (d.value < -1e-10) {
      throw CrossCheckFailure("density evaluated to " + std::to_string(d.value) + " (method " + to_string(d.method) + ")");
    }
    c.values.push_back(std::max(0.0, d.value));
    c.errors.push_back(d.error);
    c.methods.push_back(d.method);
    ++counts[d.method];
  }
  std::size_t best = 0;
  for (const auto& [m, k] : counts)
    if (k > best) best = k, c.method = m;
  return c;
}

inline DensityCurve x1_density(const SpectralData& spec, StateIndex active, std::span<const double> grid) {
  return x1_density(DensityEvaluator(spec, active), grid);
}

}  // namespace multistate
