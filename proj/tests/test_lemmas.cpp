#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "planar_mk/lemmas.hpp"

using namespace planar_mk;

TEST(Lemma1, ConstantIsExactAtEveryStep)
{
  const auto r = lemma1_checker([](double, double) { return 1.0; }, 0.3, 0.7, default_eps_sequence());
  for (double v : r.values)
    EXPECT_NEAR(v, 1.0, 1e-15);
  EXPECT_TRUE(std::isnan(r.observed_order));
}

TEST(Lemma1, LinearAtTheOriginIsFirstOrder)
{
  const auto r = lemma1_checker([](double x, double y) { return x + y; }, 0.0, 0.0, default_eps_sequence());
  for (std::size_t k = 0; k < r.steps.size(); ++k)
    EXPECT_NEAR(r.values[k], r.steps[k], 1e-15);
  EXPECT_NEAR(r.extrapolated, 0.0, 1e-12);
  EXPECT_NEAR(r.observed_order, 1.0, 1e-6);
}

TEST(Lemma1, SmoothFunctionExtrapolates)
{
  std::vector<double> eps;
  for (double e = 1e-2; e > 0.9e-4; e /= 2.0)
    eps.push_back(e);
  const auto r = lemma1_checker([](double x, double y) { return std::sin(x) * std::cos(y); }, 0.3, 0.7, eps);
  EXPECT_NEAR(r.extrapolated, std::sin(0.3) * std::cos(0.7), 1e-6);
  EXPECT_NEAR(r.observed_order, 1.0, 0.3);
}

TEST(Lemma1, RejectsBadSequences)
{
  auto one = [](double, double) { return 1.0; };
  EXPECT_THROW(lemma1_checker(one, 0, 0, {1e-2}), InvalidInput);
  EXPECT_THROW(lemma1_checker(one, 0, 0, {1e-2, 2e-2}), InvalidInput);
  EXPECT_THROW(lemma1_checker(one, 0, 0, {1e-2, -1e-3}), InvalidInput);
}

TEST(Lemma2, BilinearQuotientIsOne)
{
  const auto r = lemma2_checker([](double x, double y) { return x * y; }, 0.3, 0.4);
  for (double v : r.values)
    EXPECT_NEAR(v, 1.0, 1e-8);
  EXPECT_NEAR(r.reference, 1.0, 1e-8);
}

TEST(Lemma2, MixedDerivativeOfSquares)
{
  const auto r = lemma2_checker([](double x, double y) { return x * x * y * y; }, 0.5, 0.5);
  EXPECT_NEAR(r.extrapolated, 1.0, 1e-4);
  EXPECT_NEAR(r.observed_order, 1.0, 0.3);
}

TEST(Lemma2, Exponential)
{
  const auto r = lemma2_checker([](double x, double y) { return std::exp(x + 2.0 * y); }, 0.2, 0.1);
  EXPECT_NEAR(r.extrapolated, 2.0 * std::exp(0.4), 1e-4);
  EXPECT_NEAR(r.reference, 2.0 * std::exp(0.4), 1e-6);
}

TEST(Lemma2, RejectsBadSchedules)
{
  auto one = [](double, double) { return 1.0; };
  Lemma2Schedule s;
  s.theta = 1.5;
  EXPECT_THROW(lemma2_checker(one, 0, 0, s), InvalidInput);
  s = Lemma2Schedule{};
  s.levels = 1;
  EXPECT_THROW(lemma2_checker(one, 0, 0, s), InvalidInput);
}

TEST(LemmaCases, AllPassTheirVerdicts)
{
  for (const auto& c : lemma1_cases())
    EXPECT_TRUE(judge(c, lemma1_checker(c.beta, c.a, c.b, default_eps_sequence())).pass) << c.name;
  for (const auto& c : lemma2_cases())
    EXPECT_TRUE(judge(c, lemma2_checker(c.beta, c.a, c.b)).pass) << c.name;
}

TEST(LemmaCases, WrongLimitFails)
{
  auto c = lemma1_cases()[2];
  c.limit += 1e-3;
  EXPECT_FALSE(judge(c, lemma1_checker(c.beta, c.a, c.b, default_eps_sequence())).pass);
}
