#include <gtest/gtest.h>

#include <cmath>

#include "multistate/inactive.hpp"
#include "multistate/quadrature.hpp"
#include "multistate/simulate.hpp"
#include "test_support.hpp"

using namespace multistate;
using testing_support::load_model;

namespace {

double gamma_pdf(double t, double shape, double rate) {
  return std::exp(shape * std::log(rate) + (shape - 1.0) * std::log(t) - rate * t - std::lgamma(shape));
}

}  // namespace

TEST(PeriodLaw, Structure) {
  const auto m = load_model("fig5");
  const auto law = period_law(m);
  EXPECT_EQ(law.active, StateIndex{1});
  EXPECT_DOUBLE_EQ(law.lambda_active, 12.0);
  EXPECT_EQ(law.pi0[0], 0.0);
  EXPECT_NEAR(law.pi0[1] + law.pi0[3], 1.0, 1e-15);
  const auto h = build_generators(m).h;
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t j = 0; j < m.n; ++j) EXPECT_EQ(law.htilde(i, j), j == 0 ? 0.0 : h(i, j));
  EXPECT_THROW(period_law(load_model("fig1")), ValidationError);
}

TEST(ActivePeriod, Exponential) {
  const auto law = period_law(load_model("fig4_n5"));
  EXPECT_DOUBLE_EQ(t1_density(law, 0.0), 10.0);
  for (double t : {0.1, 0.5, 2.0}) EXPECT_NEAR(t1_density(law, t), 10.0 * std::exp(-10.0 * t), 1e-15);
  const auto r = quad::adaptive([&](double t) { return t1_density(law, t); }, 0.0, 10.0, 1e-14);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
}

TEST(InactivePeriod, TwoStateExponential) {
  const auto law = period_law(load_model("twostate"));
  for (double t : {0.0, 0.3, 1.0, 4.0}) EXPECT_NEAR(t0_density(law, t), 2.0 * std::exp(-2.0 * t), 1e-14);
  EXPECT_NEAR(t0_mean(law), 0.5, 1e-15);
}

TEST(InactivePeriod, CyclesAreGamma) {
  for (int n : {1, 2, 5, 10}) {
    const auto law = period_law(load_model(("fig4_n" + std::to_string(n)).c_str()));
    for (int k = 1; k <= 40; ++k) {
      const double t = 0.05 * k;
      EXPECT_NEAR(t0_density(law, t), gamma_pdf(t, n, 2.0 * n), 1e-10) << "N=" << n << " t=" << t;
    }
    EXPECT_NEAR(t0_mean(law), 0.5, 1e-13);
  }
}

TEST(InactivePeriod, CdfProperties) {
  for (const char* name : {"fig5", "fig6", "sec54", "fig4_n5"}) {
    const auto law = period_law(load_model(name));
    const double mean = t0_mean(law);
    EXPECT_EQ(t0_cdf(law, 0.0), 0.0);
    EXPECT_NEAR(t0_cdf(law, 50.0 * mean), 1.0, 1e-6) << name;
    EXPECT_NEAR(t0_cdf(law, 500.0 * mean), 1.0, 1e-12) << name;
    double prev = 0.0;
    for (int k = 1; k <= 60; ++k) {
      const double t = mean * 0.1 * k;
      const double c = t0_cdf(law, t);
      EXPECT_GE(c, prev - 1e-15);
      prev = c;
      EXPECT_GE(t0_density(law, t), -1e-14);
      const double h = 1e-5;
      const double fd = (t0_cdf(law, t + h) - t0_cdf(law, t - h)) / (2.0 * h);
      EXPECT_NEAR(fd, t0_density(law, t), 1e-6) << name << " t=" << t;
    }
  }
}

TEST(InactivePeriod, MeanMatchesQuadrature) {
  for (const char* name : {"fig5", "fig6", "sec54", "fig4_n10"}) {
    const auto law = period_law(load_model(name));
    const double mean = t0_mean(law);
    const auto r = quad::adaptive([&](double t) { return t * t0_density(law, t); }, 0.0, 80.0 * mean, 1e-13, 1e-12, 20000);
    EXPECT_NEAR(r.value, mean, 1e-8) << name;
  }
}

TEST(InactivePeriod, Fig5IsBimodalAndMatchesSimulation) {
  const auto m = load_model("fig5");
  const auto law = period_law(m);
  int maxima = 0;
  double prev2 = t0_density(law, 0.0), prev = t0_density(law, 0.01);
  for (int k = 2; k <= 600; ++k) {
    const double cur = t0_density(law, 0.01 * k);
    if (prev > prev2 && prev > cur) ++maxima;
    prev2 = prev;
    prev = cur;
  }
  EXPECT_EQ(maxima, 2);

  const std::size_t runs = 1'000'000;
  const auto fp = first_passage_mc(m, StateIndex{1}, runs, 99);
  std::vector<double> edges;
  for (int k = 0; k <= 30; ++k) edges.push_back(0.1 * k);
  const auto hist = fp.histogram(edges);
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    const double p = t0_cdf(law, edges[b + 1]) - t0_cdf(law, edges[b]);
    const double p_hat = static_cast<double>(hist[b]) / runs;
    const double se = std::sqrt(p * (1.0 - p) / runs);
    EXPECT_LE(std::abs(p_hat - p), 3.0 * se + 1e-12) << "bin " << b;
  }
}

TEST(InactivePeriod, Fig6MeanMatchesSimulation) {
  const auto m = load_model("fig6");
  const auto fp = first_passage_mc(m, StateIndex{1}, 200'000, 3);
  EXPECT_NEAR(fp.mean, t0_mean(period_law(m)), 3.0 * fp.std_error);
}
