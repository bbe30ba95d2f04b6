#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "multistate/linalg.hpp"
#include "multistate/model.hpp"
#include "test_support.hpp"

using namespace multistate;

namespace {

RealMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  RealMatrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& r : rows) {
    std::size_t j = 0;
    for (double x : r) m(i, j++) = x;
    ++i;
  }
  return m;
}

std::vector<double> sorted_real(const std::vector<cplx>& v) {
  std::vector<double> out;
  for (const auto& z : v) out.push_back(z.real());
  std::sort(out.begin(), out.end());
  return out;
}

// Characteristic polynomial coefficients via Faddeev-LeVerrier (independent of QR).
std::vector<double> charpoly(const RealMatrix& a) {
  const std::size_t n = a.rows();
  std::vector<double> c(n + 1, 0.0);
  c[n] = 1.0;
  RealMatrix m(n, n);
  for (std::size_t k = 1; k <= n; ++k) {
    RealMatrix mk = a * m;
    for (std::size_t i = 0; i < n; ++i) mk(i, i) += c[n - k + 1];
    m = mk;
    RealMatrix am = a * m;
    double tr = 0.0;
    for (std::size_t i = 0; i < n; ++i) tr += am(i, i);
    c[n - k] = -tr / static_cast<double>(k);
  }
  return c;  // c[0] + c[1] λ + ... + λ^n
}

cplx eval_poly(const std::vector<double>& c, cplx z) {
  cplx s = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) s = s * z + c[k];
  return s;
}

double gamma_cdf(int shape, double rate, double t) {
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < shape; ++k) {
    term *= rate * t / k;
    sum += term;
  }
  return 1.0 - std::exp(-rate * t) * sum;
}

}  // namespace

TEST(Eigenvalues, TwoByTwoGenerator) {
  const auto r = eigenvalues(from_rows({{-1, 2}, {1, -2}}));
  const auto v = sorted_real(r.values);
  EXPECT_NEAR(v[0], -3.0, 1e-14);
  EXPECT_NEAR(v[1], 0.0, 1e-14);
  EXPECT_LT(r.residual_bound, 1e-12);
}

TEST(Eigenvalues, Sec54Generator) {
  const auto h = build_generators(testing_support::load_model("sec54")).h;
  const auto v = sorted_real(eigenvalues(h).values);
  EXPECT_NEAR(v[0], -9.0, 1e-12);
  EXPECT_NEAR(v[1], -6.0, 1e-12);
  EXPECT_NEAR(v[2], 0.0, 1e-12);
  const auto sub = sorted_real(eigenvalues(h.without(0)).values);
  EXPECT_NEAR(sub[0], -4.0, 1e-12);
  EXPECT_NEAR(sub[1], -1.0, 1e-12);
}

TEST(Eigenvalues, TraceAndCharacteristicPolynomial) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (std::size_t n = 1; n <= 9; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      RealMatrix m(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = g(rng);
      const auto r = eigenvalues(m);
      ASSERT_EQ(r.values.size(), n);
      cplx sum = 0.0;
      for (const auto& z : r.values) sum += z;
      double tr = 0.0;
      for (std::size_t i = 0; i < n; ++i) tr += m(i, i);
      EXPECT_NEAR(sum.real(), tr, 1e-10 * std::max(1.0, m.norm_inf()));
      EXPECT_EQ(sum.imag(), 0.0);
      const auto c = charpoly(m);
      for (const auto& z : r.values) {
        double scale = 0.0;
        for (std::size_t k = 0; k < c.size(); ++k) scale += std::abs(c[k]) * std::pow(std::abs(z), double(k));
        EXPECT_LT(std::abs(eval_poly(c, z)), 1e-9 * scale);
      }
      EXPECT_LT(r.residual_bound, 1e-8 * std::max(1.0, m.norm_inf()));
    }
  }
}

TEST(Eigenvalues, ConjugateClosureIsExact) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = testing_support::random_model(rng, 2 + trial % 7);
    auto v = eigenvalues(build_generators(m).h).values;
    for (const auto& z : v) {
      if (z.imag() == 0.0) continue;
      EXPECT_NE(std::find(v.begin(), v.end(), std::conj(z)), v.end());
    }
  }
}

TEST(Eigenvalues, ProductOfNonzeroEqualsSumOfPrincipalMinors) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = testing_support::random_model(rng, 2 + trial % 7);
    RealMatrix neg = build_generators(m).h;
    neg *= -1.0;
    auto v = eigenvalues(neg).values;
    std::sort(v.begin(), v.end(), [](cplx l, cplx r) { return std::abs(l) < std::abs(r); });
    cplx prod = 1.0;
    for (std::size_t k = 1; k < v.size(); ++k) prod *= v[k];
    double minors = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) minors += det(neg.without(i));
    EXPECT_NEAR(prod.real(), minors, 1e-9 * std::abs(minors));
  }
}

TEST(Expm, ZeroTimeAndScalar) {
  const auto m = from_rows({{-2}});
  EXPECT_EQ(expm_apply(m, 0.0, std::vector<double>{1.0})[0], 1.0);
  EXPECT_NEAR(expm_apply(m, 1.0, std::vector<double>{1.0})[0], std::exp(-2.0), 1e-15);
}

TEST(Expm, GammaCdfFromInactiveCycle) {
  // H with the first column zeroed for the N = 2 irreversible cycle.
  auto h = build_generators(testing_support::load_model("fig4_n2")).h;
  for (std::size_t i = 0; i < 3; ++i) h(i, 0) = 0.0;
  for (double t : {0.25, 0.5, 1.0}) {
    const auto y = expm_apply(h, t, std::vector<double>{0, 1, 0});
    EXPECT_NEAR(y[0], gamma_cdf(2, 4.0, t), 1e-13) << t;
  }
}

TEST(Expm, ProbabilityPreservation) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const auto m = testing_support::random_model(rng, 2 + trial % 7);
    const auto h = build_generators(m).h;
    std::vector<double> v(m.n, 0.0);
    v[trial % m.n] = 1.0;
    for (double t : {0.01, 1.0, 30.0}) {
      const auto y = expm_apply(h, t, v);
      double s = 0.0;
      for (double x : y) {
        EXPECT_GE(x, -1e-13);
        s += x;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Expm, LargeNormAccuracy) {
  // ||t m|| = 1000: compare against a diagonalizable 2x2 in closed form.
  const auto m = from_rows({{-1, 2}, {1, -2}});
  const auto y = expm_apply(m, 333.0, std::vector<double>{1, 0});
  EXPECT_NEAR(y[0], 2.0 / 3.0 + std::exp(-999.0) / 3.0, 1e-13);
  EXPECT_NEAR(y[1], 1.0 / 3.0, 1e-13);
}

TEST(NullVector, Examples) {
  const auto p = null_vector(from_rows({{-1, 2}, {1, -2}}));
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
  const auto q = null_vector(build_generators(testing_support::load_model("sec54")).h);
  EXPECT_NEAR(q[0], 2.0 / 27.0, 1e-14);
  const auto d = null_vector(build_generators(testing_support::load_model("fig1")).h);
  EXPECT_NEAR(d[0], 2.0 / 3.5, 1e-14);
  EXPECT_NEAR(d[1], 1.0 / 3.5, 1e-14);
  EXPECT_NEAR(d[2], 0.5 / 3.5, 1e-14);
}

TEST(NullVector, ResidualOnRandomModels) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const auto h = build_generators(testing_support::random_model(rng, 2 + trial % 7)).h;
    const auto p = null_vector(h);
    EXPECT_LE(max_abs(h * p), 1e-12);
  }
}

TEST(NullVector, ReducibleIsSingular) {
  // Two disconnected two-state blocks: the zero eigenvalue is double.
  const auto h = from_rows({{-1, 1, 0, 0}, {1, -1, 0, 0}, {0, 0, -1, 1}, {0, 0, 1, -1}});
  EXPECT_THROW(null_vector(h), Singularity);
}

TEST(DetSolve, Examples) {
  EXPECT_EQ(det(RealMatrix::identity(3)), 1.0);
  EXPECT_EQ(det(from_rows({{0, 1}, {1, 0}})), -1.0);
  const auto h1 = build_generators(testing_support::load_model("sec54")).h.without(0);
  RealMatrix k_minus = RealMatrix::identity(2);
  k_minus -= h1;
  EXPECT_NEAR(det(k_minus), 10.0, 1e-13);
  EXPECT_THROW(solve(from_rows({{1, 2}, {2, 4}}), std::vector<double>{1, 1}), Singularity);
}

TEST(DetSolve, FirstLaplaceCoefficientTwoState) {
  // c1 = (I - H)^{-1} D(s) c0 with s = (s1, 0), c0 = (2/3, 1/3).
  const auto h = from_rows({{-1, 2}, {1, -2}});
  const double s1 = -0.7;
  RealMatrix a = RealMatrix::identity(2);
  a -= h;
  const auto c1 = solve(a, std::vector<double>{s1 * 2.0 / 3.0, 0.0});
  // (I - H) = [[2,-2],[-1,3]], det 4: inverse [[3,2],[1,2]]/4
  EXPECT_NEAR(c1[0], 3.0 / 4.0 * s1 * 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(c1[1], 1.0 / 4.0 * s1 * 2.0 / 3.0, 1e-15);
  const auto r = a * c1;
  EXPECT_LE(std::abs(r[0] - s1 * 2.0 / 3.0), 1e-12 * std::abs(s1));
}
