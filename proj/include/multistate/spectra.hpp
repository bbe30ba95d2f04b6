#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <sstream>
#include <utility>
#include <vector>

#include "multistate/errors.hpp"
#include "multistate/linalg.hpp"
#include "multistate/model.hpp"
#include "multistate/special.hpp"

namespace multistate {

/// Index pairs (lower, upper) of conjugate partners inside one sorted vector.
using ConjugatePairing = std::vector<std::pair<std::size_t, std::size_t>>;

/// Spectral parameters of a promoter: b holds the nonzero eigenvalues of -H,
/// a[i] the eigenvalues of -H with row and column i removed (0-based i here,
/// state i+1). Vectors are sorted by (Re, |Im|, Im), so conjugates are adjacent.
struct SpectralData {
  std::vector<cplx> b;
  std::vector<std::vector<cplx>> a;
  ConjugatePairing b_pairing;
  std::vector<ConjugatePairing> a_pairing;
  double b_residual = 0.0;
  std::vector<double> a_residuals;
  RealMatrix h;  // generator transpose of the normalized model

  std::size_t n() const { return a.size(); }
  const std::vector<cplx>& a_of(StateIndex i) const { return a.at(i.zero_based()); }
  ParamVector b_params() const { return ParamVector(b); }
  ParamVector a_params(StateIndex i) const { return ParamVector(a_of(i)); }
};

namespace detail {

inline void sort_spectrum(std::vector<cplx>& v) {
  std::sort(v.begin(), v.end(), [](cplx l, cplx r) {
    if (l.real() != r.real()) return l.real() < r.real();
    if (std::abs(l.imag()) != std::abs(r.imag())) return std::abs(l.imag()) < std::abs(r.imag());
    return l.imag() < r.imag();
  });
}

inline ConjugatePairing pairing_of(const std::vector<cplx>& v) {
  ConjugatePairing out;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if (v[i].imag() < 0.0 && v[i + 1] == std::conj(v[i])) {
      out.emplace_back(i, i + 1);
      ++i;
    }
  }
  return out;
}

inline std::string format_values(const std::vector<cplx>& v) {
  std::ostringstream os;
  os.precision(6);
  for (const auto& z : v) os << " (" << z.real() << "," << z.imag() << ")";
  return os.str();
}

inline void require_positive_real_parts(const std::vector<cplx>& v, const std::string& what) {
  for (const auto& z : v)
    if (!(z.real() > 0.0)) throw SpectralViolation(what + " has an eigenvalue with nonpositive real part:" + format_values(v));
}

}  // namespace detail

/// Computes b and every a^(i). The model is normalized first (d0 = 1).
inline SpectralData promoter_spectrum(const PromoterModel& model) {
  const PromoterModel m = normalize(model);
  const std::size_t n = m.n;
  SpectralData s;
  s.h = build_generators(m).h;
  RealMatrix neg_h = s.h;
  neg_h *= -1.0;

  EigenResult full = eigenvalues(neg_h);
  double radius = 0.0;
  for (const auto& z : full.values) radius = std::max(radius, std::abs(z));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t l, std::size_t r) { return std::abs(full.values[l]) < std::abs(full.values[r]); });
  const double smallest = std::abs(full.values[order[0]]);
  const double next = std::abs(full.values[order[1]]);
  if (smallest > 1e-8 * radius)
    throw SpectralViolation("-H has no eigenvalue near zero:" + detail::format_values(full.values));
  if (!(next > 1e-6 * radius))
    throw SpectralViolation("zero eigenvalue of -H is not simple:" + detail::format_values(full.values));
  for (std::size_t k = 1; k < n; ++k) s.b.push_back(full.values[order[k]]);
  detail::sort_spectrum(s.b);
  s.b_pairing = detail::pairing_of(s.b);
  s.b_residual = full.residual_bound;
  detail::require_positive_real_parts(s.b, "-H");

  for (std::size_t i = 0; i < n; ++i) {
    EigenResult sub = eigenvalues(neg_h.without(i));
    detail::sort_spectrum(sub.values);
    detail::require_positive_real_parts(sub.values, "-H_{" + std::to_string(i + 1) + "}");
    s.a_pairing.push_back(detail::pairing_of(sub.values));
    s.a_residuals.push_back(sub.residual_bound);
    s.a.push_back(std::move(sub.values));
  }

  // Sum of principal minors equals the product of the nonzero eigenvalues.
  const double prod_b = s.b_params().shifted_product(0.0);
  double sum_a = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum_a += ParamVector(s.a[i]).shifted_product(0.0);
  if (std::abs(prod_b - sum_a) > 1e-8 * std::abs(prod_b)) {
    throw SpectralViolation("product of b (" + std::to_string(prod_b) + ") differs from sum of products of a (" +
                            std::to_string(sum_a) + ")");
  }
  return s;
}

/// P_E(i) = prod_k a^i_k / b_k, cross-checked against a direct null-vector solve.
inline std::vector<double> stationary_promoter(const SpectralData& spec) {
  const ParamVector b = spec.b_params();
  std::vector<double> p(spec.n());
  double total = 0.0;
  for (std::size_t i = 0; i < spec.n(); ++i) {
    p[i] = shifted_ratio(ParamVector(spec.a[i]), b, 0.0);
    if (!(p[i] > 0.0)) throw CrossCheckFailure("stationary probability of state " + std::to_string(i + 1) + " is not positive");
    total += p[i];
  }
  if (std::abs(total - 1.0) > 1e-10)
    throw CrossCheckFailure("stationary probabilities sum to " + std::to_string(total));
  const std::vector<double> direct = null_vector(spec.h);
  for (std::size_t i = 0; i < spec.n(); ++i) {
    if (std::abs(direct[i] - p[i]) > 1e-8) {
      throw CrossCheckFailure("stationary probability of state " + std::to_string(i + 1) + ": spectral " +
                              std::to_string(p[i]) + " vs null vector " + std::to_string(direct[i]));
    }
  }
  return p;
}

}  // namespace multistate
