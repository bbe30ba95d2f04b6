// multistate: command-line front end.
//
// Exit codes: 0 success, 1 invalid input, 2 numerical failure. Errors are
// reported on stderr as {"error": kind, "message": text}.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "multistate/multistate.hpp"

namespace {

using multistate::PromoterModel;
using multistate::StateIndex;
using nlohmann::json;

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

PromoterModel load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw multistate::ValidationError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return multistate::parse_model(ss.str());
}

json complex_list(const std::vector<multistate::cplx>& v) {
  json out = json::array();
  for (const auto& z : v) out.push_back({z.real(), z.imag()});
  return out;
}

json spectrum_json(const multistate::SpectralData& s) {
  json doc;
  doc["b"] = complex_list(s.b);
  doc["a_by_state"] = json::array();
  for (const auto& a : s.a) doc["a_by_state"].push_back(complex_list(a));
  doc["stationary_promoter"] = multistate::stationary_promoter(s);
  doc["b_residual"] = s.b_residual;
  doc["a_residuals"] = s.a_residuals;
  return doc;
}

/// Writes to the file named by `path`, or stdout when empty.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw multistate::ValidationError("cannot open output file '" + path + "'");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void write_sidecar(const std::string& out, const std::string& sidecar, const json& meta) {
  std::string path = sidecar;
  if (path.empty() && !out.empty()) path = out + ".json";
  if (path.empty()) {
    std::cerr << meta.dump() << "\n";
    return;
  }
  std::ofstream f(path);
  if (!f) throw multistate::ValidationError("cannot open sidecar file '" + path + "'");
  f << meta.dump(2) << "\n";
}

StateIndex active_state(const PromoterModel& m, std::optional<std::size_t> requested) {
  if (requested) {
    if (*requested < 1 || *requested > m.n) throw multistate::ValidationError("--active is out of range");
    return StateIndex{*requested};
  }
  const auto cls = multistate::classify(m);
  if (!cls.refractory()) throw multistate::ValidationError("model is not refractory; pass --active");
  return *cls.refractory_active;
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t points, bool open) {
  std::vector<double> g;
  for (std::size_t i = 0; i < points; ++i) {
    const double f = open ? (static_cast<double>(i) + 0.5) / static_cast<double>(points)
                          : (points == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(points - 1));
    g.push_back(lo + (hi - lo) * f);
  }
  return g;
}

/// Exact stationary mRNA pmf: series/quadrature for refractory models,
/// the Dirichlet mixture for Dirichlet promoters, and the truncated master
/// equation otherwise.
multistate::Pmf exact_pmf(const PromoterModel& model, std::optional<std::size_t> k_max, json& meta) {
  const PromoterModel m = multistate::normalize(model);
  const auto cls = multistate::classify(m);
  if (cls.refractory()) {
    const auto spec = multistate::promoter_spectrum(m);
    const StateIndex act = *cls.refractory_active;
    meta["active"] = act.value;
    meta["a"] = complex_list(spec.a_of(act));
    meta["b"] = complex_list(spec.b);
    meta["nu"] = m.creation[act.zero_based()];
    return multistate::mrna_pmf(spec, act, m.creation[act.zero_based()], k_max);
  }
  if (cls.dirichlet()) {
    meta["alpha"] = *cls.dirichlet_alpha;
    multistate::DirichletOptions opt;
    opt.k_max = k_max;
    return multistate::dirichlet_exact(*cls.dirichlet_alpha, m.creation, opt);
  }
  return multistate::master_stationary(m, k_max).marginal;
}

double expected_mean(const PromoterModel& model) {
  const PromoterModel m = multistate::normalize(model);
  const auto p = multistate::null_vector(multistate::build_generators(m).h);
  double mean = 0.0;
  for (std::size_t i = 0; i < m.n; ++i) mean += m.creation[i] * p[i];
  return mean;
}

/// Mean total variation distance between a pmf and the histogram of `n`
/// independent draws from it, from the normal approximation of the counts.
double sampling_tv(const std::vector<double>& p, std::size_t n) {
  double s = 0.0;
  for (double q : p) s += std::sqrt(q * (1.0 - q));
  return 0.5 * s * std::sqrt(2.0 / (std::numbers::pi * static_cast<double>(n)));
}

int report_error(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stationary mRNA distributions of multistate promoter models"};
  app.require_subcommand(1);
  std::string model_path, out_path, sidecar_path, format = "csv";
  auto common = [&](CLI::App* c, bool with_out) {
    c->add_option("--model", model_path, "model JSON file")->required();
    if (with_out) {
      c->add_option("--out", out_path, "output file (default stdout)");
      c->add_option("--sidecar", sidecar_path, "JSON metadata file (default <out>.json, or stderr)");
      c->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    }
  };

  auto* validate_cmd = app.add_subcommand("validate", "check a model file");
  common(validate_cmd, false);

  auto* spectrum_cmd = app.add_subcommand("spectrum", "spectral parameters a and b");
  common(spectrum_cmd, false);
  spectrum_cmd->add_option("--out", out_path, "output file (default stdout)");

  std::optional<double> nu;
  std::optional<std::size_t> k_max, active;
  auto* pmf_cmd = app.add_subcommand("pmf", "stationary mRNA pmf");
  common(pmf_cmd, true);
  pmf_cmd->add_option("--nu", nu, "creation rate of the active state (default: from the model)");
  pmf_cmd->add_option("--k-max", k_max, "largest count (default: automatic)");
  pmf_cmd->add_option("--active", active, "active state (default: the unique state with u > 0)");

  std::vector<double> grid;
  std::size_t points = 200;
  auto* density_cmd = app.add_subcommand("density", "density of X1 for the active state");
  common(density_cmd, true);
  density_cmd->add_option("--grid", grid, "points in (0,1)")->delimiter(',');
  density_cmd->add_option("--points", points, "number of midpoints of a uniform grid when --grid is absent");
  density_cmd->add_option("--active", active, "active state");

  double t_max = 5.0;
  auto* inactive_cmd = app.add_subcommand("inactive-period", "active and inactive period laws");
  common(inactive_cmd, true);
  inactive_cmd->add_option("--grid", grid, "times t >= 0")->delimiter(',');
  inactive_cmd->add_option("--t-max", t_max, "largest time of the default grid");
  inactive_cmd->add_option("--points", points, "points of the default grid");
  inactive_cmd->add_option("--active", active, "active state");

  double t_end = 10.0;
  std::size_t cells = 10'000;
  std::uint64_t seed = 1;
  auto simulation_options = [&](CLI::App* c) {
    c->add_option("--t-end", t_end, "simulated time in units of 1/d0")->check(CLI::PositiveNumber);
    c->add_option("--cells", cells, "number of independent cells");
    c->add_option("--seed", seed, "random seed");
  };
  auto* ssa_cmd = app.add_subcommand("simulate-ssa", "Gillespie simulation of (E, M)");
  common(ssa_cmd, true);
  simulation_options(ssa_cmd);
  auto* pdmp_cmd = app.add_subcommand("simulate-pdmp", "PDMP simulation of (E, Y)");
  common(pdmp_cmd, true);
  simulation_options(pdmp_cmd);

  auto* verify_cmd = app.add_subcommand("verify", "exact pmf vs SSA vs master equation");
  common(verify_cmd, false);
  verify_cmd->add_option("--out", out_path, "report file (default stdout)");
  simulation_options(verify_cmd);
  cells = 10'000;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("UsageError", e.what(), 1);
  }

  try {
    const PromoterModel model = load(model_path);

    if (*validate_cmd) {
      const auto cls = multistate::classify(model);
      json doc{{"valid", true}, {"n", model.n}, {"refractory", cls.refractory()}, {"dirichlet", cls.dirichlet()}};
      if (cls.refractory()) doc["active"] = cls.refractory_active->value;
      std::cout << doc.dump() << "\n";
      return 0;
    }

    if (*spectrum_cmd) {
      const auto spec = multistate::promoter_spectrum(model);
      json doc = spectrum_json(spec);
      const auto cls = multistate::classify(model);
      if (cls.refractory()) {
        doc["active"] = cls.refractory_active->value;
        doc["a"] = complex_list(spec.a_of(*cls.refractory_active));
      }
      Sink sink(out_path);
      sink.stream() << doc.dump() << "\n";
      return 0;
    }

    if (*pmf_cmd) {
      PromoterModel m = multistate::normalize(model);
      json meta;
      multistate::Pmf p;
      if (nu || active) {
        const StateIndex act = active_state(m, active);
        const double v = nu ? *nu / model.degradation : m.creation[act.zero_based()];
        const auto spec = multistate::promoter_spectrum(m);
        meta["active"] = act.value;
        meta["nu"] = v;
        meta["a"] = complex_list(spec.a_of(act));
        meta["b"] = complex_list(spec.b);
        p = multistate::mrna_pmf(spec, act, v, k_max);
      } else {
        p = exact_pmf(m, k_max, meta);
      }
      meta["method"] = multistate::to_string(p.method);
      meta["error_bound"] = p.error_bound;
      meta["truncation_bound"] = p.truncation_bound;
      meta["mean"] = p.mean();
      Sink sink(out_path);
      if (format == "json") {
        meta["probability"] = p.values;
        sink.stream() << meta.dump() << "\n";
        return 0;
      }
      sink.stream() << "k,probability\n";
      for (std::size_t k = 0; k < p.values.size(); ++k) sink.stream() << k << "," << num(p.values[k]) << "\n";
      write_sidecar(out_path, sidecar_path, meta);
      return 0;
    }

    if (*density_cmd) {
      const PromoterModel m = multistate::normalize(model);
      const StateIndex act = active_state(m, active);
      const auto spec = multistate::promoter_spectrum(m);
      if (grid.empty()) grid = uniform_grid(0.0, 1.0, points, true);
      const auto curve = multistate::x1_density(spec, act, grid);
      double err = 0.0;
      for (double e : curve.errors) err = std::max(err, e);
      json meta{{"method", multistate::to_string(curve.method)},
                {"error_bound", err},
                {"active", act.value},
                {"a", complex_list(spec.a_of(act))},
                {"b", complex_list(spec.b)}};
      Sink sink(out_path);
      if (format == "json") {
        meta["x"] = curve.grid;
        meta["density"] = curve.values;
        sink.stream() << meta.dump() << "\n";
        return 0;
      }
      sink.stream() << "x,density\n";
      for (std::size_t i = 0; i < curve.grid.size(); ++i)
        sink.stream() << num(curve.grid[i]) << "," << num(curve.values[i]) << "\n";
      write_sidecar(out_path, sidecar_path, meta);
      return 0;
    }

    if (*inactive_cmd) {
      const StateIndex act = active_state(model, active);
      const auto law = multistate::period_law(model, act);
      if (grid.empty()) grid = uniform_grid(0.0, t_max, points, false);
      json meta{{"lambda_active", law.lambda_active}, {"mean", multistate::t0_mean(law)}, {"active", act.value}};
      std::vector<double> dens, cdf;
      for (double t : grid) {
        dens.push_back(multistate::t0_density(law, t));
        cdf.push_back(multistate::t0_cdf(law, t));
      }
      Sink sink(out_path);
      if (format == "json") {
        meta["t"] = grid;
        meta["density"] = dens;
        meta["cdf"] = cdf;
        sink.stream() << meta.dump() << "\n";
        return 0;
      }
      sink.stream() << "t,density,cdf\n";
      for (std::size_t i = 0; i < grid.size(); ++i)
        sink.stream() << num(grid[i]) << "," << num(dens[i]) << "," << num(cdf[i]) << "\n";
      write_sidecar(out_path, sidecar_path, meta);
      return 0;
    }

    if (ssa_cmd->parsed() || pdmp_cmd->parsed()) {
      const bool ssa = ssa_cmd->parsed();
      const auto r = ssa ? multistate::ssa_ensemble(model, t_end, cells, seed)
                         : multistate::pdmp_ensemble(model, t_end, cells, seed);
      Sink sink(out_path);
      sink.stream() << (ssa ? "cell,E,M\n" : "cell,E,Y\n");
      for (std::size_t c = 0; c < r.n_cells; ++c)
        sink.stream() << c << "," << r.states[c] << "," << (ssa ? std::to_string(static_cast<long long>(r.samples[c]))
                                                                 : num(r.samples[c]))
                      << "\n";
      double mean = 0.0;
      for (double v : r.samples) mean += v;
      mean /= static_cast<double>(std::max<std::size_t>(1, r.n_cells));
      write_sidecar(out_path, sidecar_path,
                    json{{"seed", seed}, {"cells", cells}, {"t_end", t_end}, {"sample_mean", mean},
                         {"method", ssa ? "ssa" : "pdmp"}});
      return 0;
    }

    if (*verify_cmd) {
      json meta;
      const auto exact = exact_pmf(model, std::nullopt, meta);
      const auto oracle = multistate::master_stationary(model);
      const auto ensemble = multistate::ssa_ensemble(model, t_end, cells, seed);
      const double tv_ssa = multistate::tv_distance(ensemble, exact);
      const double tv_oracle = multistate::tv_distance(oracle.marginal, exact);
      const double target = expected_mean(model);
      const double gap = std::abs(exact.mean() - target) / std::max(1e-300, target);
      const double noise = sampling_tv(exact.values, cells);
      const double oracle_tol = exact.method == multistate::PmfMethod::monte_carlo ? 1e-2 : 1e-8;
      const bool pass = tv_ssa <= 2.0 * noise + 0.01 && tv_oracle <= oracle_tol && gap <= 1e-6;
      json report{{"tv_ssa", tv_ssa},
                  {"tv_ssa_sampling_level", noise},
                  {"tv_oracle", tv_oracle},
                  {"mean_identity_gap", gap},
                  {"exact_method", multistate::to_string(exact.method)},
                  {"cells", cells},
                  {"seed", seed},
                  {"t_end", t_end},
                  {"pass", pass}};
      Sink sink(out_path);
      sink.stream() << report.dump() << "\n";
      return pass ? 0 : 2;
    }
  } catch (const multistate::Error& e) {
    return report_error(e.kind(), e.what(), e.category() == multistate::ErrorCategory::input ? 1 : 2);
  } catch (const std::exception& e) {
    return report_error("InternalError", e.what(), 2);
  }
  return 0;
}
