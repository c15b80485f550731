#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "instances.hpp"
#include "planar_mk/measures.hpp"
#include "planar_mk/rng.hpp"

using namespace planar_mk;

namespace {

DiscreteDensity1D uniform_1d(double lo, double hi, std::size_t n)
{
  return DiscreteDensity1D(Grid1D::uniform(lo, hi, n), std::vector<double>(n, 1.0 / (hi - lo)));
}

} // namespace

TEST(Grid1D, RejectsNonIncreasingEdges)
{
  EXPECT_THROW(Grid1D({0.0, 1.0, 1.0}), InvalidInput);
  EXPECT_THROW(Grid1D({0.0}), InvalidInput);
  EXPECT_THROW(Grid1D::uniform(1.0, 0.0, 4), InvalidInput);
}

TEST(Grid1D, LocateClampsToTheEnds)
{
  auto g = Grid1D::uniform(0.0, 1.0, 4);
  EXPECT_EQ(g.locate(-3.0), 0u);
  EXPECT_EQ(g.locate(0.3), 1u);
  EXPECT_EQ(g.locate(0.5), 2u);
  EXPECT_EQ(g.locate(7.0), 3u);
  EXPECT_DOUBLE_EQ(g.center(1), 0.375);
  EXPECT_TRUE(g.is_uniform());
  EXPECT_FALSE(Grid1D({0.0, 0.1, 1.0}).is_uniform());
}

TEST(DiscreteDensity, ValidatingConstructorChecksMass)
{
  EXPECT_THROW(DiscreteDensity1D(Grid1D::uniform(0, 1, 2), {0.5, 0.5}), InvalidInput);
  EXPECT_THROW(DiscreteDensity1D(Grid1D::uniform(0, 1, 2), {-1.0, 3.0}), InvalidInput);
  EXPECT_NO_THROW(DiscreteDensity1D(Grid1D::uniform(0, 1, 2), {1.0, 1.0}));
}

TEST(DiscreteDensity, NormalizationFloorsAndRecordsTheCorrection)
{
  auto d = DiscreteDensity1D::normalized(Grid1D::uniform(0, 2, 4), {0.0, 1.0, 1.0, 2.0});
  EXPECT_EQ(d.normalization().floored_cells, 1u);
  EXPECT_DOUBLE_EQ(d.normalization().raw_mass, 2.0);
  double mass = 0.0;
  for (double m : d.masses())
    mass += m;
  EXPECT_NEAR(mass, 1.0, 1e-15);
  EXPECT_GT(d.value(0), 0.0);
  EXPECT_THROW(DiscreteDensity1D::normalized(Grid1D::uniform(0, 1, 2), {0.0, 0.0}, 0.0), InvalidInput);
}

TEST(BuildCdf, TwoEqualCells)
{
  auto F = build_cdf(uniform_1d(0.0, 1.0, 2));
  ASSERT_EQ(F.levels().size(), 3u);
  EXPECT_DOUBLE_EQ(F.levels()[0], 0.0);
  EXPECT_DOUBLE_EQ(F.levels()[1], 0.5);
  EXPECT_DOUBLE_EQ(F.levels()[2], 1.0);
}

TEST(BuildCdf, SingleCell)
{
  auto F = build_cdf(uniform_1d(0.0, 1.0, 1));
  ASSERT_EQ(F.levels().size(), 2u);
  EXPECT_EQ(F.levels()[0], 0.0);
  EXPECT_EQ(F.levels()[1], 1.0);
}

TEST(BuildCdf, LinearDensityPrefixSums)
{
  // f(x) = 2x sampled at the midpoints 1/8, 3/8, 5/8, 7/8: masses 1:3:5:7 of 16
  auto g = Grid1D::uniform(0.0, 1.0, 4);
  std::vector<double> v;
  for (double c : g.centers())
    v.push_back(2.0 * c);
  auto F = build_cdf(DiscreteDensity1D::normalized(g, v));
  const double want[] = {0.0, 1.0 / 16, 4.0 / 16, 9.0 / 16, 1.0};
  for (int k = 0; k < 5; ++k)
    EXPECT_NEAR(F.levels()[k], want[k], 1e-15);
  EXPECT_EQ(F.levels().back(), 1.0);
}

TEST(Quantile, LeftContinuousAtAnAtom)
{
  const std::vector<double> pos = {0.0, 1.0};
  const std::vector<double> mass = {0.5, 0.5};
  auto F = CDF1D::from_atoms(pos, mass);
  EXPECT_EQ(F.quantile(0.5), 0.0);
  EXPECT_EQ(F.quantile(0.500001), 1.0);
  EXPECT_EQ(F.quantile(1.0), 1.0);
  EXPECT_EQ(F(0.0), 0.5);
  EXPECT_EQ(F(-1e-300), 0.0);
}

TEST(Quantile, IdentityOnUniform)
{
  auto F = build_cdf(uniform_1d(0.0, 1.0, 10));
  EXPECT_NEAR(F.quantile(0.25), 0.25, 1e-15);
  EXPECT_NEAR(F.quantile(0.9), 0.9, 1e-15);
}

TEST(Quantile, SquareRootForLinearDensity)
{
  for (std::size_t n : {16u, 64u, 256u}) {
    auto g = Grid1D::uniform(0.0, 1.0, n);
    std::vector<double> v;
    for (double c : g.centers())
      v.push_back(2.0 * c);
    auto F = build_cdf(DiscreteDensity1D::normalized(g, v));
    EXPECT_NEAR(F.quantile(0.25), 0.5, 1.0 / static_cast<double>(n));
  }
}

TEST(Quantile, DomainErrors)
{
  auto F = build_cdf(uniform_1d(0.0, 1.0, 3));
  EXPECT_THROW(F.quantile(0.0), DomainError);
  EXPECT_THROW(F.quantile(-0.1), DomainError);
  EXPECT_THROW(F.quantile(1.0000001), DomainError);
  EXPECT_NO_THROW(F.quantile(1.0));
}

TEST(Quantile, MonotoneAndRoundTrips)
{
  Xoshiro256StarStar rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng.below(30);
    std::vector<double> v(n);
    for (double& x : v)
      x = 0.05 + rng.uniform();
    auto g = Grid1D::uniform(-1.0, 2.0, n);
    auto F = build_cdf(DiscreteDensity1D::normalized(g, v));
    double prev = -1e300;
    for (int k = 1; k <= 1000; ++k) {
      const double q = F.quantile(k / 1000.0);
      EXPECT_GE(q, prev);
      prev = q;
    }
    for (int k = 0; k < 50; ++k) {
      const double x = rng.uniform(g.lower() + 1e-9, g.upper());
      EXPECT_LE(std::abs(F.quantile(F(x)) - x), 2.0 * g.width(0));
      EXPECT_NEAR(F(F.quantile(F(x))), F(x), 1e-12);
    }
  }
}

TEST(W2Squared, KnownValues)
{
  auto F = build_cdf(uniform_1d(0.0, 1.0, 8));
  EXPECT_EQ(w2_squared_1d(F, F, 1000), 0.0);

  const std::vector<double> one = {1.0};
  const std::vector<double> at0 = {0.0};
  const std::vector<double> at1 = {1.0};
  EXPECT_DOUBLE_EQ(w2_squared_1d(CDF1D::from_atoms(at0, one), CDF1D::from_atoms(at1, one), 10), 1.0);

  const std::vector<double> third(3, 1.0 / 3.0);
  const std::vector<double> a = {0.0, 1.0, 2.0};
  const std::vector<double> b = {1.0, 2.0, 3.0};
  EXPECT_NEAR(w2_squared_1d(CDF1D::from_atoms(a, third), CDF1D::from_atoms(b, third), 3000), 1.0, 1e-12);
  EXPECT_THROW(w2_squared_1d(F, F, 1), InvalidInput);
}

TEST(W2Squared, NonnegativeAndSymmetric)
{
  Xoshiro256StarStar rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> u(12);
    std::vector<double> w(12);
    for (std::size_t k = 0; k < 12; ++k) {
      u[k] = 0.1 + rng.uniform();
      w[k] = 0.1 + rng.uniform();
    }
    auto F = build_cdf(DiscreteDensity1D::normalized(Grid1D::uniform(0, 1, 12), u));
    auto G = build_cdf(DiscreteDensity1D::normalized(Grid1D::uniform(0, 1, 12), w));
    const double fg = w2_squared_1d(F, G, 4000);
    EXPECT_GT(fg, 0.0);
    EXPECT_EQ(fg, w2_squared_1d(G, F, 4000));
  }
}

TEST(Marginals, ProductDensity)
{
  auto gx = Grid1D::uniform(0, 1, 3);
  auto gy = Grid1D::uniform(0, 2, 2);
  const std::vector<double> u = {0.5, 1.0, 1.5};
  const std::vector<double> v = {0.25, 0.75};
  GridField vals(3, 2);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      vals(i, j) = u[i] * v[j];
  auto [fx, fy] = marginals_2d(DiscreteDensity2D(gx, gy, vals));
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_NEAR(fx.value(i), u[i], 1e-15);
  for (std::size_t j = 0; j < 2; ++j)
    EXPECT_NEAR(fy.value(j), v[j], 1e-15);
}

TEST(Marginals, TwoByTwoHandSums)
{
  auto unit = Grid1D::uniform(0, 2, 2);
  auto [a, b] = marginals_2d(DiscreteDensity2D(unit, unit, GridField(2, 2, {0.25, 0.25, 0.25, 0.25})));
  EXPECT_DOUBLE_EQ(a.value(0), 0.5);
  EXPECT_DOUBLE_EQ(b.value(1), 0.5);

  auto [r, c] = marginals_2d(DiscreteDensity2D(unit, unit, GridField(2, 2, {0.4, 0.1, 0.2, 0.3})));
  EXPECT_NEAR(r.value(0), 0.5, 1e-15);
  EXPECT_NEAR(r.value(1), 0.5, 1e-15);
  EXPECT_NEAR(c.value(0), 0.6, 1e-15);
  EXPECT_NEAR(c.value(1), 0.4, 1e-15);
}

TEST(Marginals, SumToOne)
{
  auto d = planar_mk::testing::random_density(7, 5, 42);
  auto [fx, fy] = marginals_2d(d);
  double sx = 0.0;
  double sy = 0.0;
  for (double m : fx.masses())
    sx += m;
  for (double m : fy.masses())
    sy += m;
  EXPECT_NEAR(sx, 1.0, 1e-12);
  EXPECT_NEAR(sy, 1.0, 1e-12);
}
