#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "multistate/errors.hpp"

namespace multistate {

using cplx = std::complex<double>;

/// Compensated (Neumaier) summation; works for real and complex values.
template <typename Value>
class KahanAccumulator {
 public:
  void add(Value v) {
    if constexpr (std::is_same_v<Value, cplx>) {
      re_.add(v.real());
      im_.add(v.imag());
    } else {
      const Value t = sum_ + v;
      if (std::abs(sum_) >= std::abs(v))
        compensation_ += (sum_ - t) + v;
      else
        compensation_ += (v - t) + sum_;
      sum_ = t;
    }
  }
  KahanAccumulator& operator+=(Value v) {
    add(v);
    return *this;
  }
  Value value() const {
    if constexpr (std::is_same_v<Value, cplx>)
      return {re_.value(), im_.value()};
    else
      return sum_ + compensation_;
  }

 private:
  struct Empty {};
  using Part = std::conditional_t<std::is_same_v<Value, cplx>, KahanAccumulator<double>, Empty>;
  Value sum_{};
  Value compensation_{};
  [[no_unique_address]] Part re_{};
  [[no_unique_address]] Part im_{};
};

// ---------------------------------------------------------------------------
// Gamma function for complex arguments

namespace detail {

inline cplx log_sin_pi(cplx z) {
  constexpr double pi = std::numbers::pi;
  const cplx i(0.0, 1.0);
  if (z.imag() > 20.0) return -i * pi * z + std::log(std::exp(2.0 * i * pi * z) - 1.0) - std::log(2.0 * i);
  if (z.imag() < -20.0) return i * pi * z + std::log(1.0 - std::exp(-2.0 * i * pi * z)) - std::log(2.0 * i);
  return std::log(std::sin(pi * z));
}

inline bool is_nonpositive_integer(cplx z) {
  const double r = std::round(z.real());
  return r <= 0.0 && std::abs(z.imag()) <= 1e-13 * std::max(1.0, std::abs(r)) &&
         std::abs(z.real() - r) <= 1e-13 * std::max(1.0, std::abs(r));
}

}  // namespace detail

/// log Γ(z) on the principal-ish branch (only exp() of it is meaningful).
/// Reflection for Re z < 1/2, upward recurrence and Stirling's series otherwise.
inline cplx log_gamma(cplx z) {
  constexpr double pi = std::numbers::pi;
  if (detail::is_nonpositive_integer(z)) throw UndefinedPochhammer("log_gamma: pole at nonpositive integer");
  if (z.real() < 0.5) return std::log(pi) - detail::log_sin_pi(z) - log_gamma(1.0 - z);
  cplx shift = 0.0;
  while (std::abs(z) < 15.0) {
    shift += std::log(z);
    z += 1.0;
  }
  static constexpr double coeff[] = {1.0 / 12.0,   -1.0 / 360.0,        1.0 / 1260.0, -1.0 / 1680.0,
                                     1.0 / 1188.0, -691.0 / 360360.0,   1.0 / 156.0,  -3617.0 / 122400.0};
  const cplx inv = 1.0 / z;
  const cplx inv2 = inv * inv;
  cplx series = 0.0;
  cplx power = inv;
  for (double c : coeff) {
    series += c * power;
    power *= inv2;
  }
  return (z - 0.5) * std::log(z) - z + 0.5 * std::log(2.0 * pi) + series - shift;
}

/// log(1/Γ(z)), or nullopt where 1/Γ vanishes (z a nonpositive integer).
inline std::optional<cplx> log_rgamma(cplx z) {
  if (detail::is_nonpositive_integer(z)) return std::nullopt;
  return -log_gamma(z);
}

// ---------------------------------------------------------------------------
// Parameter vectors closed under conjugation

/// Complex parameters closed under conjugation, stored in canonical order
/// (by real part, then |imaginary part|) with each conjugate pair adjacent.
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(std::initializer_list<double> real_values) {
    for (double x : real_values) groups_.push_back({cplx(x, 0.0), false});
  }
  explicit ParamVector(std::vector<cplx> values) {
    std::sort(values.begin(), values.end(), [](cplx l, cplx r) {
      if (l.real() != r.real()) return l.real() < r.real();
      if (std::abs(l.imag()) != std::abs(r.imag())) return std::abs(l.imag()) < std::abs(r.imag());
      return l.imag() < r.imag();
    });
    std::vector<bool> used(values.size(), false);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (used[i]) continue;
      used[i] = true;
      const cplx z = values[i];
      if (z.imag() == 0.0) {
        groups_.push_back({z, false});
        continue;
      }
      std::size_t partner = values.size();
      for (std::size_t j = i + 1; j < values.size(); ++j) {
        if (!used[j] && std::abs(values[j] - std::conj(z)) <= 1e-13 * std::abs(z)) {
          partner = j;
          break;
        }
      }
      if (partner == values.size())
        throw ValidationError("parameter vector is not closed under conjugation");
      used[partner] = true;
      // representative with positive imaginary part
      const cplx avg = 0.5 * (z + std::conj(values[partner]));
      groups_.push_back({cplx(avg.real(), std::abs(avg.imag())), true});
    }
  }

  std::size_t size() const {
    std::size_t s = 0;
    for (const auto& g : groups_) s += g.paired ? 2 : 1;
    return s;
  }

  /// Entries with each pair expanded as (conj z, z).
  std::vector<cplx> values() const {
    std::vector<cplx> out;
    for (const auto& g : groups_) {
      if (g.paired) out.push_back(std::conj(g.value));
      out.push_back(g.value);
    }
    return out;
  }

  /// ∏ (p + shift) over all entries, evaluated pairwise so each factor is real.
  double shifted_product(double shift) const {
    double prod = 1.0;
    for (const auto& g : groups_) {
      const double re = g.value.real() + shift;
      if (g.paired)
        prod *= re * re + g.value.imag() * g.value.imag();
      else
        prod *= re;
    }
    return prod;
  }

  /// True when some entry + shift is zero.
  bool hits_zero(double shift) const {
    for (const auto& g : groups_)
      if (!g.paired && g.value.real() + shift == 0.0) return true;
    return false;
  }

  /// Per-factor ratio ∏ (a+shift)/(b+shift) interleaving numerator and denominator groups.
  friend double shifted_ratio(const ParamVector& a, const ParamVector& b, double shift) {
    double r = 1.0;
    const std::size_t ng = std::max(a.groups_.size(), b.groups_.size());
    for (std::size_t g = 0; g < ng; ++g) {
      if (g < a.groups_.size()) r *= a.factor(g, shift);
      if (g < b.groups_.size()) r /= b.factor(g, shift);
    }
    return r;
  }

  ParamVector shifted(double s) const {
    ParamVector out = *this;
    for (auto& g : out.groups_) g.value += s;
    return out;
  }

  double min_real() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& g : groups_) m = std::min(m, g.value.real());
    return m;
  }

 private:
  struct Group {
    cplx value;
    bool paired;
  };

  double factor(std::size_t g, double shift) const {
    const auto& gr = groups_[g];
    const double re = gr.value.real() + shift;
    return gr.paired ? re * re + gr.value.imag() * gr.value.imag() : re;
  }

  std::vector<Group> groups_;
};

/// (a)_k / (b)_k = ∏_i ∏_{m<k} (a_i+m)/(b_i+m), computed iteratively.
inline double pochhammer_ratio(const ParamVector& a, const ParamVector& b, std::size_t k) {
  double r = 1.0;
  for (std::size_t m = 0; m < k; ++m) {
    const double shift = static_cast<double>(m);
    if (b.hits_zero(shift))
      throw UndefinedPochhammer("pochhammer_ratio: denominator parameter hits " + std::to_string(-m));
    r *= shifted_ratio(a, b, shift);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Generalized hypergeometric series

struct SeriesValue {
  double value = 0.0;
  double abs_error_bound = 0.0;
  std::size_t terms_used = 0;
};

template <typename T>
struct SeriesResult {
  T value{};
  double abs_error_bound = 0.0;
  std::size_t terms_used = 0;
};

struct SeriesOptions {
  double target_abs_err = 1e-15;
  std::size_t max_terms = 1'000'000;
  /// Largest allowed ratio between the biggest partial sum and the result.
  double cancellation_limit = 1e12;
};

namespace detail {

/// Sums t_0 = 1, t_{k+1} = t_k · ratio(k) with compensated accumulation.
/// `limit_ratio` is lim |ratio(k)| (0 for entire series). The tail is bounded
/// geometrically once the ratio has been below one and monotone for five terms.
template <typename T, typename RatioFn>
SeriesResult<T> sum_hypergeometric(RatioFn&& ratio, double limit_ratio, const SeriesOptions& opt) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  KahanAccumulator<T> acc;
  T term = T{1};
  double abs_weighted = 0.0;  // Σ (k+2)|t_k|, drives the rounding estimate
  double max_partial = 0.0;
  double ratios[5] = {0, 0, 0, 0, 0};
  std::size_t good_run = 0;
  for (std::size_t k = 0; k < opt.max_terms; ++k) {
    acc.add(term);
    const double mag = std::abs(term);
    abs_weighted += static_cast<double>(k + 2) * mag;
    max_partial = std::max(max_partial, std::abs(acc.value()));
    const T r = ratio(k);
    const double rmag = std::abs(r);
    const T next = term * r;

    const double rounding = 2.0 * eps * abs_weighted;
    auto finish = [&](double tail) {
      SeriesResult<T> out{acc.value(), tail + rounding, k + 1};
      const double scale = std::max(std::abs(out.value), opt.target_abs_err);
      if (max_partial > opt.cancellation_limit * scale) {
        throw NoConvergence("hypergeometric series: cancellation (max partial sum " + std::to_string(max_partial) +
                            ", result " + std::to_string(std::abs(out.value)) + ", rounding bound " +
                            std::to_string(rounding) + ")");
      }
      return out;
    };

    if (next == T{}) return finish(0.0);  // terminating series

    ratios[k % 5] = rmag;
    good_run = rmag < 1.0 ? good_run + 1 : 0;
    if (good_run >= 5) {
      bool nonincreasing = true, nondecreasing = true;
      for (std::size_t j = 1; j < 5; ++j) {
        const double prev = ratios[(k + 5 - j) % 5];
        const double cur = ratios[(k + 6 - j) % 5];
        if (cur > prev) nonincreasing = false;
        if (cur < prev) nondecreasing = false;
      }
      if (nonincreasing || nondecreasing) {
        const double rho = std::max(rmag, limit_ratio);
        if (rho < 1.0) {
          const double tail = mag * rho / (1.0 - rho);
          if (tail <= 0.5 * opt.target_abs_err || tail < 1e-3 * rounding) return finish(tail);
        }
      }
    }
    term = next;
    if (!std::isfinite(std::abs(term))) throw NoConvergence("hypergeometric series: term overflow");
  }
  throw NoConvergence("hypergeometric series: term cap of " + std::to_string(opt.max_terms) + " reached");
}

}  // namespace detail

/// pFq[(a);(b);x] = Σ (a)_k/(b)_k x^k/k! for conjugation-closed parameter vectors.
inline SeriesValue hyp_pfq(const ParamVector& a, const ParamVector& b, double x, double target_abs_err,
                           SeriesOptions opt = {}) {
  const std::size_t p = a.size(), q = b.size();
  bool terminating = false;
  for (const auto& z : a.values())
    if (detail::is_nonpositive_integer(z)) terminating = true;
  if (!terminating) {
    if (p > q + 1 && x != 0.0) throw DivergentSeries("hyp_pfq: numerator count exceeds denominator count + 1");
    if (p == q + 1 && std::abs(x) >= 1.0) throw DivergentSeries("hyp_pfq: |x| >= 1 with p = q + 1");
  }
  opt.target_abs_err = target_abs_err;
  const double limit = (p == q + 1) ? std::abs(x) : 0.0;
  auto ratio = [&](std::size_t k) {
    const double shift = static_cast<double>(k);
    if (b.hits_zero(shift)) throw UndefinedPochhammer("hyp_pfq: denominator parameter hits a nonpositive integer");
    return shifted_ratio(a, b, shift) * x / (shift + 1.0);
  };
  const auto r = detail::sum_hypergeometric<double>(ratio, limit, opt);
  return {r.value, r.abs_error_bound, r.terms_used};
}

/// pFq with arbitrary complex parameters (no conjugation structure); used for
/// the inner series of the residue expansion.
inline SeriesResult<cplx> hyp_pfq_complex(const std::vector<cplx>& a, const std::vector<cplx>& b, double x,
                                          SeriesOptions opt) {
  const std::size_t p = a.size(), q = b.size();
  bool terminating = false;
  for (const auto& z : a)
    if (detail::is_nonpositive_integer(z)) terminating = true;
  if (!terminating) {
    if (p > q + 1 && x != 0.0) throw DivergentSeries("hyp_pfq: numerator count exceeds denominator count + 1");
    if (p == q + 1 && std::abs(x) >= 1.0) throw DivergentSeries("hyp_pfq: |x| >= 1 with p = q + 1");
  }
  const double limit = (p == q + 1) ? std::abs(x) : 0.0;
  auto ratio = [&](std::size_t k) {
    const double shift = static_cast<double>(k);
    cplx r = x / (shift + 1.0);
    for (const auto& z : a) r *= (z + shift);
    for (const auto& z : b) {
      const cplx d = z + shift;
      if (d == 0.0) throw UndefinedPochhammer("hyp_pfq: denominator parameter hits a nonpositive integer");
      r /= d;
    }
    return r;
  };
  return detail::sum_hypergeometric<cplx>(ratio, limit, opt);
}

}  // namespace multistate

namespace multistate {

/// Poisson(k; lambda) evaluated in log space.
inline double poisson_pmf(std::size_t k, double lambda) {
  if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
  const double kk = static_cast<double>(k);
  return std::exp(kk * std::log(lambda) - lambda - std::lgamma(kk + 1.0));
}

/// Calls visit(k, Poisson(k; lambda)) for every k <= k_max whose probability
/// exceeds `floor`, recursing outward from the mode.
template <typename Visit>
void for_each_poisson(double lambda, std::size_t k_max, Visit&& visit, double floor = 1e-300) {
  if (lambda <= 0.0) {
    visit(std::size_t{0}, 1.0);
    return;
  }
  const std::size_t mode = std::min(k_max, static_cast<std::size_t>(std::floor(lambda)));
  const double pm = poisson_pmf(mode, lambda);
  double p = pm;
  for (std::size_t k = mode;; --k) {
    if (p < floor) break;
    visit(k, p);
    if (k == 0) break;
    p *= static_cast<double>(k) / lambda;
  }
  p = pm;
  for (std::size_t k = mode + 1; k <= k_max; ++k) {
    p *= lambda / static_cast<double>(k);
    if (p < floor) break;
    visit(k, p);
  }
}

/// P(Poisson(lambda) > k).
inline double poisson_upper_tail(std::size_t k, double lambda) {
  if (lambda <= 0.0) return 0.0;
  if (static_cast<double>(k) < lambda) {
    double below = 0.0;
    for_each_poisson(lambda, k, [&](std::size_t, double p) { below += p; }, 0.0);
    return std::max(0.0, 1.0 - below);
  }
  double tail = 0.0;
  double p = poisson_pmf(k + 1, lambda);
  for (std::size_t j = k + 1; p > 0.0; ++j) {
    tail += p;
    if (p < 1e-18 * tail) break;
    p *= lambda / static_cast<double>(j + 1);
  }
  return tail;
}

}  // namespace multistate
