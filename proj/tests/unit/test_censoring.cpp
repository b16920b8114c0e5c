#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cvc/censoring.hpp"
#include "cvc/error.hpp"

using namespace cvc;

namespace {

std::vector<CensoredSample> make(std::vector<double> u, std::vector<int> delta) {
  std::vector<CensoredSample> out;
  for (std::size_t i = 0; i < u.size(); ++i) out.push_back({u[i], delta[i] == 1});
  return out;
}

}  // namespace

TEST(KaplanMeier, NoCensoringGivesZeroCdf) {
  const auto g = fit_censoring_cdf(make({1, 2, 3}, {1, 1, 1}), 0.99);
  EXPECT_TRUE(g.empty());
  EXPECT_EQ(g(10.0), 0.0);
}

TEST(KaplanMeier, ThreeSampleHandComputation) {
  const double cap = 0.9;
  const auto g = fit_censoring_cdf(make({1, 2, 3}, {0, 1, 0}), cap);
  ASSERT_EQ(g.jump_times().size(), 2u);
  EXPECT_EQ(g.jump_times()[0], 1.0);
  EXPECT_EQ(g.jump_times()[1], 3.0);
  EXPECT_NEAR(g.cdf_values()[0], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(g.cdf_values()[1], cap);
}

TEST(KaplanMeier, SingleCensoredSample) {
  const auto g = fit_censoring_cdf(make({5}, {0}), 0.75);
  ASSERT_EQ(g.jump_times().size(), 1u);
  EXPECT_EQ(g.jump_times()[0], 5.0);
  EXPECT_EQ(g.cdf_values()[0], 0.75);
}

TEST(KaplanMeier, ObservedEventsLeaveRiskSetFirstAtTies) {
  // At t = 1 the event leaves first: 1 censoring among 2 at risk.
  const auto g = fit_censoring_cdf(make({1, 1, 2}, {1, 0, 0}), 0.999);
  EXPECT_NEAR(g(1.0), 0.5, 1e-15);
  EXPECT_NEAR(g(2.0), 0.999, 1e-15);
}

TEST(KaplanMeier, RightContinuous) {
  const auto g = fit_censoring_cdf(make({1, 2, 3}, {0, 1, 0}), 0.9);
  EXPECT_EQ(g(0.999), 0.0);
  EXPECT_NEAR(g(1.0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(g(2.999), 1.0 / 3.0, 1e-15);
}

TEST(KaplanMeier, Errors) {
  EXPECT_THROW(fit_censoring_cdf({}, 0.5), InputError);
  try {
    fit_censoring_cdf({}, 0.5);
  } catch (const InputError& e) {
    EXPECT_STREQ(e.what(), "no samples");
  }
  for (double cap : {0.0, 1.0, 1.5, -0.1}) {
    try {
      fit_censoring_cdf(make({1}, {0}), cap);
      FAIL() << "cap " << cap;
    } catch (const InputError& e) {
      EXPECT_STREQ(e.what(), "invalid cap");
    }
  }
}

TEST(KaplanMeier, ValuesNonDecreasingAndCapped) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.4);
  std::vector<CensoredSample> s;
  for (int i = 0; i < 500; ++i) s.push_back({normal(rng), !coin(rng)});
  const double cap = default_cdf_cap(s.size());
  const auto g = fit_censoring_cdf(s, cap);
  for (std::size_t k = 1; k < g.cdf_values().size(); ++k) {
    EXPECT_GE(g.cdf_values()[k], g.cdf_values()[k - 1]);
    EXPECT_GT(g.jump_times()[k], g.jump_times()[k - 1]);
  }
  for (double v : g.cdf_values()) EXPECT_LE(v, cap);
}

TEST(CensoringCdf, RejectsMalformedSteps) {
  EXPECT_THROW(CensoringCdf({1, 1}, {0.1, 0.2}, 0.9), InputError);
  EXPECT_THROW(CensoringCdf({1, 2}, {0.3, 0.2}, 0.9), InputError);
  EXPECT_THROW(CensoringCdf({1}, {0.1, 0.2}, 0.9), InputError);
  EXPECT_THROW(CensoringCdf({1}, {0.1}, 1.0), InputError);
}

TEST(SyntheticFirst, Examples) {
  const CensoringCdf zero({}, {}, 0.5);
  EXPECT_DOUBLE_EQ(synthetic_first(7.5, zero), 7.5);
  const CensoringCdf half({0.0}, {0.5}, 0.9);
  EXPECT_NEAR(synthetic_first(2.0, half), 4.0, 1e-14);
  const CensoringCdf two({1.0, 3.0}, {0.25, 0.5}, 0.9);
  EXPECT_NEAR(synthetic_first(4.0, two), 4.0 + 2.0 / 3.0 + 1.0, 1e-14);
  EXPECT_NEAR(synthetic_first(4.0, two), 5.6667, 5e-5);
}

TEST(SyntheticSecond, Examples) {
  const CensoringCdf zero({}, {}, 0.5);
  EXPECT_DOUBLE_EQ(synthetic_second(3.0, zero), 9.0);
  const CensoringCdf at0({0.0}, {0.5}, 0.9);
  EXPECT_NEAR(synthetic_second(2.0, at0), 8.0, 1e-14);
  const CensoringCdf at1({1.0}, {0.5}, 0.9);
  EXPECT_NEAR(synthetic_second(2.0, at1), 7.0, 1e-14);
}

TEST(BuildSynthetic, Examples) {
  const CensoringCdf zero({}, {}, 0.5);
  const auto s1 = build_synthetic(make({1, 2}, {1, 1}), zero);
  EXPECT_EQ(s1.y1, Eigen::Vector2d(1, 2));
  EXPECT_EQ(s1.y2, Eigen::Vector2d(1, 4));
  EXPECT_EQ(s1.d, Eigen::Vector2d(0, 0));

  const CensoringCdf half({0.0}, {0.5}, 0.9);
  const auto s2 = build_synthetic(make({2, 2}, {1, 0}), half);
  EXPECT_NEAR(s2.y1(0), 4.0, 1e-14);
  EXPECT_NEAR(s2.y1(1), 4.0, 1e-14);
  EXPECT_NEAR(s2.y2(0), 8.0, 1e-14);
  EXPECT_NEAR(s2.d(0), -8.0, 1e-13);
  EXPECT_NEAR(s2.d(1), -8.0, 1e-13);
  EXPECT_THROW(build_synthetic({}, half), InputError);
}

TEST(BuildSynthetic, DiagonalIdentityIsExact) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.3);
  std::vector<CensoredSample> s;
  for (int i = 0; i < 300; ++i) s.push_back({normal(rng), !coin(rng)});
  const auto g = fit_censoring_cdf(s, default_cdf_cap(s.size()));
  const auto syn = build_synthetic(s, g);
  for (Eigen::Index i = 0; i < syn.size(); ++i) {
    EXPECT_EQ(syn.d(i), syn.y2(i) - syn.y1(i) * syn.y1(i));
  }
}

TEST(BuildSynthetic, UncensoredReducesToRawMoments) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal;
  std::vector<CensoredSample> s;
  for (int i = 0; i < 100; ++i) s.push_back({normal(rng), true});
  const auto syn = build_synthetic(s, fit_censoring_cdf(s, 0.99));
  for (Eigen::Index i = 0; i < syn.size(); ++i) {
    EXPECT_EQ(syn.y1(i), s[static_cast<std::size_t>(i)].u);
    EXPECT_EQ(syn.y2(i), s[static_cast<std::size_t>(i)].u * s[static_cast<std::size_t>(i)].u);
    EXPECT_EQ(syn.d(i), 0.0);
  }
}

TEST(BuildSynthetic, MonteCarloMomentMatchingWithKaplanMeier) {
  // y ~ N(0,1), r ~ N(mu, 1) with P(y > r) = 0.2.
  const int n = 50000;
  const double mu = 1.1902321;  // -sqrt(2) * Phi^-1(0.2)
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  std::vector<CensoredSample> s(n);
  double my = 0.0, my2 = 0.0;
  for (auto& x : s) {
    const double y = normal(rng), r = mu + normal(rng);
    x = {std::min(y, r), y <= r};
    my += y;
    my2 += y * y;
  }
  my /= n;
  my2 /= n;
  const auto syn = build_synthetic(s, fit_censoring_cdf(s, default_cdf_cap(n)));
  EXPECT_LT(std::abs(syn.y1.mean() - my), 0.02);
  EXPECT_LT(std::abs(syn.y2.mean() - my2), 0.05);
}

TEST(SyntheticProperties, RaisingCapLeavesEarlySubjectsUnchanged) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  std::vector<CensoredSample> s;
  for (int i = 0; i < 200; ++i) s.push_back({normal(rng), !coin(rng)});
  const auto lo = fit_censoring_cdf(s, 0.9);
  const auto hi = fit_censoring_cdf(s, 0.999);
  const auto& v = lo.cdf_values();
  const auto first_capped = std::find(v.begin(), v.end(), 0.9) - v.begin();
  ASSERT_LT(first_capped, static_cast<std::ptrdiff_t>(v.size()));
  const double capped_at = lo.jump_times()[static_cast<std::size_t>(first_capped)];
  for (const auto& x : s) {
    if (x.u < capped_at) {
      EXPECT_EQ(synthetic_first(x.u, lo), synthetic_first(x.u, hi));
    }
  }
}

TEST(SyntheticProperties, AgreesWithQuadratureOnRandomSteps) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int jumps = 1 + static_cast<int>(unif(rng) * 8);
    std::vector<double> t, v;
    double at = -3.0 + unif(rng), level = 0.0;
    for (int k = 0; k < jumps; ++k) {
      at += 0.05 + unif(rng);
      level = std::min(0.95, level + 0.5 * unif(rng) * (1.0 - level));
      t.push_back(at);
      v.push_back(level);
    }
    const CensoringCdf g(t, v, 0.97);
    const double u = t.front() - 0.5 + (t.back() - t.front() + 1.5) * unif(rng);

    double q1 = 0.0, q2 = 0.0;
    std::vector<double> edges = t;
    edges.push_back(std::max(u, t.back()) + 1.0);
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
      const double a = edges[k], b = std::min(edges[k + 1], u);
      if (b <= a) break;
      const double gv = g(0.5 * (a + b));
      auto f1 = [&](double) { return gv / (1.0 - gv); };
      auto f2 = [&](double x) { return 2.0 * x * gv / (1.0 - gv); };
      q1 += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f1, a, b);
      q2 += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f2, a, b);
    }
    EXPECT_NEAR(synthetic_first(u, g), u + q1, 1e-10);
    EXPECT_NEAR(synthetic_second(u, g), u * u + q2, 1e-10);
  }
}

TEST(CensoringRate, CountsCensored) {
  EXPECT_DOUBLE_EQ(censoring_rate(make({1, 2, 3, 4}, {0, 1, 1, 0})), 0.5);
  EXPECT_DOUBLE_EQ(censoring_rate({}), 0.0);
}
