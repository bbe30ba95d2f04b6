#include <gtest/gtest.h>

#include "multistate/model.hpp"
#include "test_support.hpp"

using namespace multistate;
using testing_support::load_model;

TEST(ParseModel, TwoStateFixture) {
  const auto m = load_model("twostate");
  EXPECT_EQ(m.n, 2u);
  EXPECT_DOUBLE_EQ(m.rate(1, 2), 1.0);
  EXPECT_DOUBLE_EQ(m.rate(2, 1), 2.0);
  EXPECT_DOUBLE_EQ(m.degradation, 1.0);
}

TEST(ParseModel, Fig1Fixture) {
  const auto m = load_model("fig1");
  EXPECT_EQ(m.n, 3u);
  EXPECT_EQ(m.creation, (std::vector<double>{0, 50, 100}));
  EXPECT_DOUBLE_EQ(m.rate(3, 1), 2.0);
  EXPECT_DOUBLE_EQ(m.rate(2, 3), 0.5);
}

TEST(ParseModel, BrokenCycleIsNotIrreducible) {
  try {
    load_model("broken");
    FAIL() << "expected NotIrreducible";
  } catch (const NotIrreducible& e) {
    EXPECT_NE(std::string(e.what()).find("state 1 is unreachable"), std::string::npos) << e.what();
    EXPECT_EQ(e.category(), ErrorCategory::input);
  }
}

TEST(ParseModel, SchemaAndValidationErrors) {
  EXPECT_THROW(parse_model("{not json"), SchemaError);
  EXPECT_THROW(parse_model("[]"), SchemaError);
  EXPECT_THROW(parse_model(R"({"n":2,"transitions":[],"creation_rates":[1,0]})"), ValidationError);
  EXPECT_THROW(parse_model(R"({"n":1,"transitions":[],"creation_rates":[1],"degradation_rate":1})"), ValidationError);
  EXPECT_THROW(parse_model(R"({"n":2,"transitions":[{"from":1,"to":2,"rate":-1},{"from":2,"to":1,"rate":1}],
                              "creation_rates":[1,0],"degradation_rate":1})"),
               ValidationError);
  EXPECT_THROW(parse_model(R"({"n":2,"transitions":[{"from":1,"to":2,"rate":1},{"from":1,"to":2,"rate":2},
                              {"from":2,"to":1,"rate":1}],"creation_rates":[1,0],"degradation_rate":1})"),
               SchemaError);
  EXPECT_THROW(parse_model(R"({"n":2,"transitions":[{"from":1,"to":3,"rate":1}],"creation_rates":[1,0],
                              "degradation_rate":1})"),
               ValidationError);
  EXPECT_THROW(parse_model(R"({"n":"2","transitions":[],"creation_rates":[1,0],"degradation_rate":1})"), SchemaError);
}

TEST(Normalize, DividesByDegradation) {
  auto m = parse_model(R"({"n":2,"transitions":[{"from":1,"to":2,"rate":2},{"from":2,"to":1,"rate":4}],
                           "creation_rates":[10,0],"degradation_rate":2})");
  const auto z = normalize(m);
  EXPECT_DOUBLE_EQ(z.rate(1, 2), 1.0);
  EXPECT_DOUBLE_EQ(z.rate(2, 1), 2.0);
  EXPECT_EQ(z.creation, (std::vector<double>{5, 0}));
  EXPECT_DOUBLE_EQ(z.degradation, 1.0);
  EXPECT_DOUBLE_EQ(z.time_scale, 2.0);

  const auto zz = normalize(z);
  EXPECT_EQ(zz.rates, z.rates);
  EXPECT_EQ(zz.creation, z.creation);
  EXPECT_EQ(zz.time_scale, z.time_scale);
}

TEST(Normalize, UnitDegradationIsIdentity) {
  const auto m = load_model("sec54");
  const auto z = normalize(m);
  EXPECT_EQ(z.rates, m.rates);
  EXPECT_EQ(z.creation, m.creation);
}

TEST(BuildGenerators, TwoState) {
  const auto g = build_generators(load_model("twostate"));
  EXPECT_EQ(g.q(0, 0), -1.0);
  EXPECT_EQ(g.q(0, 1), 1.0);
  EXPECT_EQ(g.q(1, 0), 2.0);
  EXPECT_EQ(g.q(1, 1), -2.0);
  EXPECT_EQ(g.h(0, 1), 2.0);
  EXPECT_EQ(g.h(1, 0), 1.0);
}

TEST(BuildGenerators, Sec54MatchesTranspose) {
  const auto g = build_generators(load_model("sec54"));
  const double expected[3][3] = {{-10, 0, 2}, {10, -2, 1}, {0, 2, -3}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(g.h(i, j), expected[i][j]);
}

TEST(BuildGenerators, ZeroRowAndColumnSumsForRandomModels) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = testing_support::random_model(rng, 2 + trial % 7);
    const auto g = build_generators(m);
    for (std::size_t i = 0; i < m.n; ++i) {
      double row = 0.0, col = 0.0;
      for (std::size_t j = 0; j < m.n; ++j) {
        row += g.q(i, j);
        col += g.h(j, i);
      }
      EXPECT_NEAR(row, 0.0, 1e-13);
      EXPECT_NEAR(col, 0.0, 1e-13);
    }
  }
}

TEST(Classify, Fig1IsDirichletNotRefractory) {
  const auto c = classify(load_model("fig1"));
  ASSERT_TRUE(c.dirichlet());
  EXPECT_EQ(*c.dirichlet_alpha, (std::vector<double>{2, 1, 0.5}));
  EXPECT_FALSE(c.refractory());
  EXPECT_TRUE(c.general_multi_active);
}

TEST(Classify, Sec54IsRefractoryWithActiveState1) {
  const auto c = classify(load_model("sec54"));
  ASSERT_TRUE(c.refractory());
  EXPECT_EQ(c.refractory_active->value, 1u);
  EXPECT_FALSE(c.dirichlet());
}

TEST(Classify, TwoActiveStatesIsGeneral) {
  auto m = load_model("fig1");
  m.creation = {5, 7, 0};
  const auto c = classify(m);
  EXPECT_TRUE(c.general_multi_active);
  EXPECT_FALSE(c.refractory());
}

TEST(Classify, TwoStateIsBothRefractoryAndDirichlet) {
  const auto c = classify(load_model("twostate"));
  EXPECT_TRUE(c.refractory());
  ASSERT_TRUE(c.dirichlet());
  EXPECT_EQ(*c.dirichlet_alpha, (std::vector<double>{2, 1}));
}

TEST(Classify, StableUnderRelabeling) {
  auto m = load_model("fig1");
  m.creation = {0, 0, 100};
  const std::vector<std::size_t> perm{3, 1, 2};  // old 1 -> new 3, old 2 -> new 1, old 3 -> new 2
  const auto p = permute_states(m, perm);
  const auto c0 = classify(m), c1 = classify(p);
  ASSERT_TRUE(c0.refractory() && c1.refractory());
  EXPECT_EQ(c1.refractory_active->value, perm[c0.refractory_active->value - 1]);
  ASSERT_TRUE(c1.dirichlet());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ((*c1.dirichlet_alpha)[perm[i] - 1], (*c0.dirichlet_alpha)[i]);
}

TEST(ToJson, RoundTrip) {
  const auto m = load_model("fig5");
  const auto back = parse_model(to_json(m).dump());
  EXPECT_EQ(back.rates, m.rates);
  EXPECT_EQ(back.creation, m.creation);
}
