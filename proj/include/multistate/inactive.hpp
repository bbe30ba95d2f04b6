#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "multistate/errors.hpp"
#include "multistate/linalg.hpp"
#include "multistate/model.hpp"

namespace multistate {

/// Active and inactive period laws of a refractory promoter. The active
/// sojourn is Exp(lambda_active); the inactive period starts from pi0 (the
/// exit distribution of the active state) and ends on return to it.
struct PeriodLaw {
  StateIndex active;
  double lambda_active = 0.0;
  std::vector<double> pi0;
  RealMatrix htilde;  // H with the active column zeroed
};

/// Builds the period law in the model's own time units.
inline PeriodLaw period_law(const PromoterModel& model, StateIndex active) {
  validate(model);
  if (active.value < 1 || active.value > model.n) throw ValidationError("active state out of range");
  PeriodLaw law;
  law.active = active;
  law.lambda_active = model.exit_rate(active.value);
  if (!(law.lambda_active > 0.0)) throw ValidationError("active state has no outgoing transitions");
  law.pi0.assign(model.n, 0.0);
  for (std::size_t j = 1; j <= model.n; ++j)
    if (j != active.value) law.pi0[j - 1] = model.rate(active.value, j) / law.lambda_active;
  law.htilde = build_generators(model).h;
  for (std::size_t i = 0; i < model.n; ++i) law.htilde(i, active.zero_based()) = 0.0;
  return law;
}

/// Uses the model's unique active state.
inline PeriodLaw period_law(const PromoterModel& model) {
  const auto cls = classify(model);
  if (!cls.refractory()) throw ValidationError("model is not refractory (needs exactly one state with u > 0)");
  return period_law(model, *cls.refractory_active);
}

inline double t1_density(const PeriodLaw& law, double t) {
  if (t < 0.0) throw ValidationError("t must be nonnegative");
  return law.lambda_active * std::exp(-law.lambda_active * t);
}

/// P(T0 <= t) = [exp(t H~) pi0]_active.
inline double t0_cdf(const PeriodLaw& law, double t) {
  if (t < 0.0) throw ValidationError("t must be nonnegative");
  return expm_apply(law.htilde, t, law.pi0)[law.active.zero_based()];
}

/// f_T0(t) = [H~ exp(t H~) pi0]_active.
inline double t0_density(const PeriodLaw& law, double t) {
  if (t < 0.0) throw ValidationError("t must be nonnegative");
  const auto v = expm_apply(law.htilde, t, law.pi0);
  const auto row = law.htilde.row(law.active.zero_based());
  double s = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) s += row[j] * v[j];
  return s;
}

/// E[T0] from the mean first-passage system on the inactive states:
/// -Q_II m = 1, E[T0] = pi0 . m.
inline double t0_mean(const PeriodLaw& law) {
  const std::size_t n = law.pi0.size(), act = law.active.zero_based();
  if (n == 1) return 0.0;
  RealMatrix a(n - 1, n - 1);
  auto idx = [act](std::size_t i) { return i < act ? i : i + 1; };
  for (std::size_t r = 0; r < n - 1; ++r)
    for (std::size_t c = 0; c < n - 1; ++c) a(r, c) = -law.htilde(idx(c), idx(r));  // Q = H^T
  const auto m = solve(a, std::vector<double>(n - 1, 1.0));
  double mean = 0.0;
  for (std::size_t r = 0; r < n - 1; ++r) mean += law.pi0[idx(r)] * m[r];
  return mean;
}

}  // namespace multistate
