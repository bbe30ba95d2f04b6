#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "multistate/errors.hpp"
#include "multistate/linalg.hpp"

namespace multistate {

/// 1-based promoter state index.
struct StateIndex {
  std::size_t value = 1;
  constexpr std::size_t zero_based() const noexcept { return value - 1; }
  friend constexpr bool operator==(StateIndex, StateIndex) = default;
  friend constexpr auto operator<=>(StateIndex, StateIndex) = default;
};

/// Promoter with `n` states, switching rates r(i,j), creation rates u and
/// degradation rate d0. Zero rates are not stored.
struct PromoterModel {
  std::size_t n = 0;
  std::map<std::pair<std::size_t, std::size_t>, double> rates;  // 1-based (from, to)
  std::vector<double> creation;
  double degradation = 1.0;
  /// Factor by which rates were divided in normalize() (the original d0);
  /// normalized time t corresponds to t / time_scale in original units.
  double time_scale = 1.0;

  double rate(std::size_t from, std::size_t to) const {
    auto it = rates.find({from, to});
    return it == rates.end() ? 0.0 : it->second;
  }

  /// Total exit rate of state i (1-based).
  double exit_rate(std::size_t i) const {
    double s = 0.0;
    for (const auto& [key, r] : rates)
      if (key.first == i) s += r;
    return s;
  }

  void set_rate(std::size_t from, std::size_t to, double r) {
    if (r == 0.0)
      rates.erase({from, to});
    else
      rates[{from, to}] = r;
  }
};

struct GeneratorPair {
  RealMatrix q;  // rows sum to zero
  RealMatrix h;  // q transposed; columns sum to zero
};

struct ModelClass {
  std::optional<StateIndex> refractory_active;  // set iff exactly one u_i > 0
  std::optional<std::vector<double>> dirichlet_alpha;  // set iff r(i,j) = alpha_j for all i != j
  bool general_multi_active = false;  // more than one u_i > 0

  bool refractory() const { return refractory_active.has_value(); }
  bool dirichlet() const { return dirichlet_alpha.has_value(); }
};

namespace detail {

inline std::vector<bool> reachable(const PromoterModel& m, std::size_t start, bool forward) {
  std::vector<bool> seen(m.n + 1, false);
  std::vector<std::size_t> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (const auto& [key, r] : m.rates) {
      if (!(r > 0.0)) continue;
      const auto [from, to] = key;
      const std::size_t src = forward ? from : to;
      const std::size_t dst = forward ? to : from;
      if (src == v && !seen[dst]) {
        seen[dst] = true;
        stack.push_back(dst);
      }
    }
  }
  return seen;
}

}  // namespace detail

/// Checks rate signs, dimensions and strong connectivity of the transition graph.
inline void validate(const PromoterModel& m) {
  if (m.n < 2) throw ValidationError("model must have n >= 2 promoter states, got " + std::to_string(m.n));
  if (m.creation.size() != m.n) {
    throw ValidationError("creation_rates has " + std::to_string(m.creation.size()) + " entries, expected " +
                          std::to_string(m.n));
  }
  for (std::size_t i = 0; i < m.n; ++i) {
    if (!std::isfinite(m.creation[i]) || m.creation[i] < 0.0)
      throw ValidationError("creation rate of state " + std::to_string(i + 1) + " must be finite and >= 0");
  }
  if (!std::isfinite(m.degradation) || !(m.degradation > 0.0))
    throw ValidationError("degradation_rate must be finite and > 0");
  for (const auto& [key, r] : m.rates) {
    const auto [from, to] = key;
    if (from < 1 || from > m.n || to < 1 || to > m.n)
      throw ValidationError("transition (" + std::to_string(from) + "," + std::to_string(to) + ") is out of range");
    if (from == to) throw ValidationError("self transition on state " + std::to_string(from));
    if (!std::isfinite(r) || r < 0.0)
      throw ValidationError("rate of transition (" + std::to_string(from) + "," + std::to_string(to) +
                            ") must be finite and >= 0");
  }
  // Forward and reverse reachability from state 1.
  const auto fwd = detail::reachable(m, 1, true);
  const auto bwd = detail::reachable(m, 1, false);
  for (std::size_t i = 2; i <= m.n; ++i) {
    if (!fwd[i])
      throw NotIrreducible("state " + std::to_string(i) + " is unreachable from state 1");
    if (!bwd[i])
      throw NotIrreducible("state 1 is unreachable from state " + std::to_string(i));
  }
}

/// Parses and validates a model document:
/// {"n": int, "transitions": [{"from","to","rate"}...], "creation_rates": [...], "degradation_rate": x}
inline PromoterModel parse_model(const std::string& text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("model document must be a JSON object");
  for (const char* field : {"n", "transitions", "creation_rates", "degradation_rate"}) {
    if (!doc.contains(field)) throw ValidationError(std::string("missing field '") + field + "'");
  }
  const auto& jn = doc["n"];
  if (!jn.is_number_integer()) throw SchemaError("'n' must be an integer");
  if (jn.get<long long>() < 2) throw ValidationError("model must have n >= 2 promoter states");
  if (!doc["transitions"].is_array()) throw SchemaError("'transitions' must be an array");
  if (!doc["creation_rates"].is_array()) throw SchemaError("'creation_rates' must be an array");
  if (!doc["degradation_rate"].is_number()) throw SchemaError("'degradation_rate' must be a number");

  PromoterModel m;
  m.n = jn.get<std::size_t>();
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& t : doc["transitions"]) {
    if (!t.is_object()) throw SchemaError("each transition must be an object");
    for (const char* field : {"from", "to", "rate"}) {
      if (!t.contains(field)) throw ValidationError(std::string("transition is missing field '") + field + "'");
    }
    if (!t["from"].is_number_integer() || !t["to"].is_number_integer())
      throw SchemaError("transition 'from'/'to' must be integers");
    if (!t["rate"].is_number()) throw SchemaError("transition 'rate' must be a number");
    const long long from = t["from"].get<long long>();
    const long long to = t["to"].get<long long>();
    if (from < 1 || to < 1 || static_cast<std::size_t>(from) > m.n || static_cast<std::size_t>(to) > m.n)
      throw ValidationError("transition (" + std::to_string(from) + "," + std::to_string(to) + ") is out of range");
    const auto key = std::make_pair(static_cast<std::size_t>(from), static_cast<std::size_t>(to));
    if (!seen.insert(key).second)
      throw SchemaError("duplicate transition (" + std::to_string(from) + "," + std::to_string(to) + ")");
    const double r = t["rate"].get<double>();
    if (r < 0.0) {
      throw ValidationError("rate of transition (" + std::to_string(from) + "," + std::to_string(to) +
                            ") is negative");
    }
    if (r > 0.0) m.rates[key] = r;
  }
  for (const auto& c : doc["creation_rates"]) {
    if (!c.is_number()) throw SchemaError("creation rates must be numbers");
    m.creation.push_back(c.get<double>());
  }
  m.degradation = doc["degradation_rate"].get<double>();
  validate(m);
  return m;
}

inline nlohmann::json to_json(const PromoterModel& m) {
  nlohmann::json doc;
  doc["n"] = m.n;
  doc["transitions"] = nlohmann::json::array();
  for (const auto& [key, r] : m.rates)
    doc["transitions"].push_back({{"from", key.first}, {"to", key.second}, {"rate", r}});
  doc["creation_rates"] = m.creation;
  doc["degradation_rate"] = m.degradation;
  return doc;
}

/// Divides every rate by d0 so that d0 = 1. The original d0 is kept in time_scale.
inline PromoterModel normalize(const PromoterModel& m) {
  PromoterModel out = m;
  const double d = m.degradation;
  for (auto& [key, r] : out.rates) r /= d;
  for (auto& u : out.creation) u /= d;
  out.degradation = 1.0;
  out.time_scale = m.time_scale * d;
  return out;
}

inline GeneratorPair build_generators(const PromoterModel& m) {
  GeneratorPair g{RealMatrix(m.n, m.n), RealMatrix(m.n, m.n)};
  for (const auto& [key, r] : m.rates) g.q(key.first - 1, key.second - 1) = r;
  for (std::size_t i = 0; i < m.n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.n; ++j)
      if (j != i) s += g.q(i, j);
    g.q(i, i) = -s;
  }
  g.h = g.q.transpose();
  return g;
}

inline ModelClass classify(const PromoterModel& m) {
  ModelClass c;
  std::size_t active_count = 0;
  for (std::size_t i = 0; i < m.n; ++i) {
    if (m.creation[i] > 0.0) {
      ++active_count;
      c.refractory_active = StateIndex{i + 1};
    }
  }
  if (active_count != 1) c.refractory_active.reset();
  c.general_multi_active = active_count > 1;

  std::vector<double> alpha(m.n, 0.0);
  bool dirichlet = true;
  for (std::size_t j = 1; j <= m.n && dirichlet; ++j) {
    const std::size_t ref = j == 1 ? 2 : 1;
    const double a = m.rate(ref, j);
    if (!(a > 0.0)) {
      dirichlet = false;
      break;
    }
    for (std::size_t i = 1; i <= m.n; ++i) {
      if (i == j) continue;
      if (std::abs(m.rate(i, j) - a) > 1e-12 * a) {
        dirichlet = false;
        break;
      }
    }
    alpha[j - 1] = a;
  }
  if (dirichlet) c.dirichlet_alpha = alpha;
  return c;
}

/// Relabels states: new state perm[i] (1-based) is old state i+1.
inline PromoterModel permute_states(const PromoterModel& m, const std::vector<std::size_t>& perm) {
  PromoterModel out = m;
  out.rates.clear();
  for (const auto& [key, r] : m.rates) out.rates[{perm[key.first - 1], perm[key.second - 1]}] = r;
  for (std::size_t i = 0; i < m.n; ++i) out.creation[perm[i] - 1] = m.creation[i];
  return out;
}

}  // namespace multistate
