#pragma once

// Test densities shared by the unit and acceptance suites.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>

#include "planar_mk/grid_field.hpp"
#include "planar_mk/measures.hpp"
#include "planar_mk/rng.hpp"

namespace planar_mk::testing {

using Profile = std::function<double(double, double)>;

/// Density proportional to the profile sampled at cell centers of the unit box.
inline DiscreteDensity2D sampled(std::size_t n, const Profile& profile, double lo = 0.0, double hi = 1.0)
{
  auto gx = Grid1D::uniform(lo, hi, n);
  auto gy = Grid1D::uniform(lo, hi, n);
  GridField v(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      v(i, j) = profile(gx.center(i), gy.center(j));
  return DiscreteDensity2D::normalized(gx, gy, std::move(v));
}

inline double bump(double t, double mu, double sigma)
{
  const double z = (t - mu) / sigma;
  return std::exp(-0.5 * z * z);
}

/// Correlated Gaussian-like blob on the unit box.
inline Profile correlated_blob(double mx, double my, double sx, double sy, double rho)
{
  return [=](double x, double y) {
    const double u = (x - mx) / sx;
    const double w = (y - my) / sy;
    return std::exp(-0.5 * (u * u - 2.0 * rho * u * w + w * w) / (1.0 - rho * rho)) + 0.05;
  };
}

/// Separable Gaussian-like profile.
inline Profile product_blob(double mx, double my, double sx, double sy)
{
  return [=](double x, double y) { return (bump(x, mx, sx) + 0.05) * (bump(y, my, sy) + 0.05); };
}

/// Strictly positive random density with values in [0.2, 1.2).
inline DiscreteDensity2D random_density(std::size_t nx, std::size_t ny, std::uint64_t seed)
{
  Xoshiro256StarStar rng(seed);
  GridField v(nx, ny);
  for (double& x : v.values())
    x = 0.2 + rng.uniform();
  return DiscreteDensity2D::normalized(Grid1D::uniform(0.0, 1.0, nx), Grid1D::uniform(0.0, 1.0, ny), std::move(v));
}

} // namespace planar_mk::testing
