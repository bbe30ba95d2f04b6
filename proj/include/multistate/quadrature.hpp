#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <queue>
#include <vector>

#include "multistate/errors.hpp"

namespace multistate::quad {

struct Result {
  double value = 0.0;
  double abs_error = 0.0;
  std::size_t evaluations = 0;
};

/// 15-point Kronrod extension of the 7-point Gauss rule.
struct GaussKronrod15 {
  static constexpr double xgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
  static constexpr double wgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr double wg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                   0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

  /// Integral over [a,b] with the QUADPACK error estimate.
  template <typename F>
  static Result apply(F&& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double resg = fc * wg[3];
    double resk = fc * wgk[7];
    double fv1[7], fv2[7];
    for (int j = 0; j < 7; ++j) {
      const double dx = half * xgk[j];
      fv1[j] = f(center - dx);
      fv2[j] = f(center + dx);
      resk += wgk[j] * (fv1[j] + fv2[j]);
      if (j % 2 == 1) resg += wg[j / 2] * (fv1[j] + fv2[j]);
    }
    const double reskh = 0.5 * resk;
    double resasc = wgk[7] * std::abs(fc - reskh);
    for (int j = 0; j < 7; ++j) resasc += wgk[j] * (std::abs(fv1[j] - reskh) + std::abs(fv2[j] - reskh));
    resasc *= std::abs(half);
    double err = std::abs((resk - resg) * half);
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    return {resk * half, err, 15};
  }
};

/// Globally adaptive bisection with the 15-point Kronrod rule. Stops when the
/// summed error estimate is below max(abs_tol, rel_tol·|I|); throws
/// NoConvergence when `max_intervals` is exhausted.
template <typename F>
Result adaptive(F&& f, double a, double b, double abs_tol, double rel_tol = 0.0, std::size_t max_intervals = 2000) {
  struct Piece {
    double a, b;
    Result r;
    bool operator<(const Piece& o) const { return r.abs_error < o.r.abs_error; }
  };
  std::priority_queue<Piece> heap;
  Result first = GaussKronrod15::apply(f, a, b);
  heap.push({a, b, first});
  double total = first.value, err = first.abs_error;
  std::size_t evals = first.evaluations;
  while (err > std::max(abs_tol, rel_tol * std::abs(total))) {
    if (heap.size() >= max_intervals) {
      throw NoConvergence("adaptive quadrature: interval cap reached with error estimate " + std::to_string(err));
    }
    Piece p = heap.top();
    heap.pop();
    const double mid = 0.5 * (p.a + p.b);
    if (!(mid > p.a && mid < p.b)) {
      throw NoConvergence("adaptive quadrature: interval cannot be subdivided further (error estimate " +
                          std::to_string(err) + ")");
    }
    Result l = GaussKronrod15::apply(f, p.a, mid);
    Result r = GaussKronrod15::apply(f, mid, p.b);
    evals += 30;
    total += l.value + r.value - p.r.value;
    err += l.abs_error + r.abs_error - p.r.abs_error;
    heap.push({p.a, mid, l});
    heap.push({mid, p.b, r});
  }
  // Re-sum to remove drift from the incremental updates.
  total = 0.0;
  err = 0.0;
  while (!heap.empty()) {
    total += heap.top().r.value;
    err += heap.top().r.abs_error;
    heap.pop();
  }
  return {total, err, evals};
}

/// Gauss-Legendre nodes and weights on [-1,1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(std::size_t n) : nodes(n), weights(n) {
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (std::size_t k = 2; k <= n; ++k) {
          const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
          p0 = p1;
          p1 = pk;
        }
        dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[i] = -x;
      nodes[n - 1 - i] = x;
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      weights[i] = weights[n - 1 - i] = w;
    }
  }

  /// Shared instance for a given order.
  static const GaussLegendre& of(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, GaussLegendre> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, GaussLegendre(n)).first;
    return it->second;
  }

  template <typename F>
  double integrate(F&& f, double a, double b) const {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(c + h * nodes[i]);
    return s * h;
  }
};

}  // namespace multistate::quad
