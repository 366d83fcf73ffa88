#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "support.hpp"
#include "taxometer/kendall.hpp"

namespace tx = taxometer;

TEST(Kendall, PerfectAndReversedRankings) {
  const std::vector<double> x{1, 2, 3}, up{10, 20, 30}, down{3, 2, 1};
  EXPECT_EQ(tx::kendall_tau_b(x, up).tau, 1.0);
  EXPECT_EQ(tx::kendall_tau_b(x, down).tau, -1.0);
}

TEST(Kendall, TiedExampleMatchesPairCounting) {
  const std::vector<double> x{1, 1, 2, 3}, y{1, 2, 2, 3};
  const auto o = tx::testing::oracle_kendall(x, y);
  const auto c = tx::kendall_counts(x, y);
  EXPECT_EQ(c.concordant_minus_discordant, o.concordant - o.discordant);
  EXPECT_EQ(c.tied_x, o.tied_x);
  EXPECT_EQ(c.tied_y, o.tied_y);
  EXPECT_EQ(c.tied_xy, o.tied_xy);
  EXPECT_DOUBLE_EQ(tx::kendall_tau_b(x, y).tau, o.tau_b());
  EXPECT_DOUBLE_EQ(tx::kendall_tau_b(x, y).tau, 0.8);
}

TEST(Kendall, PValueMatchesReferenceImplementation) {
  // Frozen from scipy.stats.kendalltau(method="asymptotic").
  const std::vector<double> x{1, 1, 2, 3, 4, 5, 5, 6, 7, 8}, y{2, 1, 2, 4, 3, 6, 5, 5, 9, 7};
  const auto r = tx::kendall_tau_b(x, y);
  EXPECT_NEAR(r.tau, 0.8139534883720931, 1e-12);
  EXPECT_NEAR(r.p_value, 0.001469449864818364, 1e-9);
  EXPECT_EQ(r.stars, "**");
  EXPECT_EQ(r.n, 10u);

  const std::vector<double> a{1, 1, 2, 3}, b{1, 2, 2, 3};
  EXPECT_NEAR(tx::kendall_tau_b(a, b).p_value, 0.12597116307723114, 1e-9);
}

TEST(Kendall, MatchesQuadraticCountingOnRandomTiedData) {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 300; ++round) {
    const std::size_t n = 2 + rng() % 150;
    const int levels = 1 + static_cast<int>(rng() % 12);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng() % levels);
      y[i] = static_cast<double>(rng() % (levels + 3));
    }
    const auto o = tx::testing::oracle_kendall(x, y);
    const auto c = tx::kendall_counts(x, y);
    ASSERT_EQ(c.concordant_minus_discordant, o.concordant - o.discordant);
    ASSERT_EQ(c.tied_x, o.tied_x);
    ASSERT_EQ(c.tied_y, o.tied_y);
    ASSERT_EQ(c.tied_xy, o.tied_xy);
    if (o.tied_x == o.n0 || o.tied_y == o.n0) {
      EXPECT_THROW(tx::kendall_tau_b(x, y), tx::DegenerateInputError);
      continue;
    }
    const auto r = tx::kendall_tau_b(x, y);
    ASSERT_NEAR(r.tau, o.tau_b(), 1e-12);
    ASSERT_GE(r.p_value, 0.0);
    ASSERT_LE(r.p_value, 1.0);
    ASSERT_EQ(r.stars, tx::significance_stars(r.p_value));
  }
}

TEST(Kendall, SymmetricInArguments) {
  std::mt19937_64 rng(2);
  std::vector<double> x(60), y(60);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<double>(rng() % 7);
    y[i] = x[i] + static_cast<double>(rng() % 5);
  }
  const auto a = tx::kendall_tau_b(x, y), b = tx::kendall_tau_b(y, x);
  EXPECT_NEAR(a.tau, b.tau, 1e-15);
  EXPECT_NEAR(a.p_value, b.p_value, 1e-15);
}

TEST(Kendall, DegenerateInputs) {
  const std::vector<double> one{1}, two{1, 2}, flat{5, 5, 5}, three{1, 2, 3};
  EXPECT_THROW(tx::kendall_tau_b(one, one), tx::DegenerateInputError);
  EXPECT_THROW(tx::kendall_tau_b(two, three), tx::DegenerateInputError);
  EXPECT_THROW(tx::kendall_tau_b(flat, three), tx::DegenerateInputError);
  EXPECT_THROW(tx::kendall_tau_b(three, flat), tx::DegenerateInputError);
  const std::vector<double> nan{1, std::nan(""), 3};
  EXPECT_THROW(tx::kendall_tau_b(nan, three), tx::DegenerateInputError);
}

TEST(Kendall, Stars) {
  EXPECT_EQ(tx::significance_stars(0.0005), "***");
  EXPECT_EQ(tx::significance_stars(0.001), "**");
  EXPECT_EQ(tx::significance_stars(0.009), "**");
  EXPECT_EQ(tx::significance_stars(0.01), "*");
  EXPECT_EQ(tx::significance_stars(0.049), "*");
  EXPECT_EQ(tx::significance_stars(0.05), "");
}
