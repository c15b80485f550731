#pragma once

// Piecewise-constant probability densities on rectangular grids, their
// cumulative distribution functions and left-continuous quantiles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "planar_mk/errors.hpp"
#include "planar_mk/grid_field.hpp"

namespace planar_mk {

/// Smallest density value kept after preprocessing.
inline constexpr double kDensityFloor = 1e-10;

/// Tolerance on the total mass of a validated density.
inline constexpr double kMassTolerance = 1e-12;

/// Cell edges of a 1D grid. `edges().size() == cells() + 1`.
class Grid1D
{
public:
  explicit Grid1D(std::vector<double> edges)
    : edges_(std::move(edges))
  {
    if (edges_.size() < 2)
      throw InvalidInput("Grid1D needs at least two nodes");
    for (std::size_t k = 0; k + 1 < edges_.size(); ++k) {
      if (!(edges_[k + 1] > edges_[k]) || !std::isfinite(edges_[k + 1]) || !std::isfinite(edges_[k]))
        throw InvalidInput("Grid1D nodes must be finite and strictly increasing");
    }
  }

  static Grid1D uniform(double lower, double upper, std::size_t cells)
  {
    if (cells == 0)
      throw InvalidInput("Grid1D::uniform needs at least one cell");
    if (!(upper > lower))
      throw InvalidInput("Grid1D::uniform needs max > min");
    std::vector<double> edges(cells + 1);
    const double width = (upper - lower) / static_cast<double>(cells);
    for (std::size_t k = 0; k <= cells; ++k)
      edges[k] = lower + width * static_cast<double>(k);
    edges.back() = upper;
    return Grid1D(std::move(edges));
  }

  std::size_t cells() const noexcept { return edges_.size() - 1; }
  std::span<const double> edges() const noexcept { return edges_; }
  double lower() const noexcept { return edges_.front(); }
  double upper() const noexcept { return edges_.back(); }
  double edge(std::size_t k) const noexcept { return edges_[k]; }
  double width(std::size_t i) const noexcept { return edges_[i + 1] - edges_[i]; }
  double center(std::size_t i) const noexcept { return 0.5 * (edges_[i] + edges_[i + 1]); }

  std::vector<double> centers() const
  {
    std::vector<double> c(cells());
    for (std::size_t i = 0; i < c.size(); ++i)
      c[i] = center(i);
    return c;
  }

  /// Index of the cell containing x; points outside the grid clamp to the end cells.
  std::size_t locate(double x) const noexcept
  {
    auto it = std::upper_bound(edges_.begin() + 1, edges_.end() - 1, x);
    return static_cast<std::size_t>(it - (edges_.begin() + 1));
  }

  bool is_uniform(double rel_tol = 1e-9) const noexcept
  {
    const double w0 = width(0);
    for (std::size_t i = 1; i < cells(); ++i) {
      if (std::abs(width(i) - w0) > rel_tol * w0)
        return false;
    }
    return true;
  }

  bool operator==(const Grid1D&) const = default;

private:
  std::vector<double> edges_;
};

/// What preprocessing did to a density on ingestion.
struct NormalizationReport
{
  double raw_mass = 1.0;          ///< mass before flooring and rescaling
  double scale = 1.0;             ///< factor applied after flooring
  std::size_t floored_cells = 0;  ///< cells raised to the floor
};

namespace detail {

inline NormalizationReport floor_and_normalize(std::span<double> values,
                                               std::span<const double> weights,
                                               double floor)
{
  NormalizationReport report;
  double raw = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k]) || values[k] < 0.0)
      throw InvalidInput("density values must be finite and nonnegative");
    raw += values[k] * weights[k];
  }
  report.raw_mass = raw;
  for (double& v : values) {
    if (v < floor) {
      v = floor;
      ++report.floored_cells;
    }
  }
  double mass = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k)
    mass += values[k] * weights[k];
  if (!(mass > 0.0))
    throw InvalidInput("density has zero total mass");
  report.scale = 1.0 / mass;
  for (double& v : values)
    v *= report.scale;
  return report;
}

inline void check_normalized(std::span<const double> values, std::span<const double> weights)
{
  double mass = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k]) || values[k] < 0.0)
      throw InvalidInput("density values must be finite and nonnegative");
    mass += values[k] * weights[k];
  }
  if (std::abs(mass - 1.0) > kMassTolerance)
    throw InvalidInput("density mass " + std::to_string(mass) + " differs from 1");
}

} // namespace detail

/// Piecewise-constant density on a Grid1D.
class DiscreteDensity1D
{
public:
  /// Validating constructor: values must already integrate to 1.
  DiscreteDensity1D(Grid1D grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values))
  {
    if (values_.size() != grid_.cells())
      throw InvalidInput("DiscreteDensity1D: value count does not match grid");
    detail::check_normalized(values_, widths());
  }

  /// Floors every value at `floor` and rescales to unit mass.
  static DiscreteDensity1D normalized(Grid1D grid, std::vector<double> values,
                                      double floor = kDensityFloor)
  {
    if (values.size() != grid.cells())
      throw InvalidInput("DiscreteDensity1D: value count does not match grid");
    std::vector<double> w(grid.cells());
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = grid.width(i);
    auto report = detail::floor_and_normalize(values, w, floor);
    DiscreteDensity1D d(std::move(grid), std::move(values));
    d.report_ = report;
    return d;
  }

  const Grid1D& grid() const noexcept { return grid_; }
  std::size_t cells() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double value(std::size_t i) const noexcept { return values_[i]; }
  double mass(std::size_t i) const noexcept { return values_[i] * grid_.width(i); }
  const NormalizationReport& normalization() const noexcept { return report_; }

  std::vector<double> masses() const
  {
    std::vector<double> m(cells());
    for (std::size_t i = 0; i < m.size(); ++i)
      m[i] = mass(i);
    return m;
  }

private:
  std::vector<double> widths() const
  {
    std::vector<double> w(grid_.cells());
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = grid_.width(i);
    return w;
  }

  Grid1D grid_;
  std::vector<double> values_;
  NormalizationReport report_;
};

/// Piecewise-constant density on a product grid; values(i, j) lives on
/// x-cell i and y-cell j.
class DiscreteDensity2D
{
public:
  DiscreteDensity2D(Grid1D grid_x, Grid1D grid_y, GridField values)
    : grid_x_(std::move(grid_x)), grid_y_(std::move(grid_y)), values_(std::move(values))
  {
    check_shape();
    detail::check_normalized(values_.values(), areas());
  }

  static DiscreteDensity2D normalized(Grid1D grid_x, Grid1D grid_y, GridField values,
                                      double floor = kDensityFloor)
  {
    if (values.nx() != grid_x.cells() || values.ny() != grid_y.cells())
      throw InvalidInput("DiscreteDensity2D: value shape does not match grids");
    std::vector<double> a(values.size());
    for (std::size_t i = 0; i < values.nx(); ++i)
      for (std::size_t j = 0; j < values.ny(); ++j)
        a[i * values.ny() + j] = grid_x.width(i) * grid_y.width(j);
    auto report = detail::floor_and_normalize(values.values(), a, floor);
    DiscreteDensity2D d(std::move(grid_x), std::move(grid_y), std::move(values));
    d.report_ = report;
    return d;
  }

  const Grid1D& grid_x() const noexcept { return grid_x_; }
  const Grid1D& grid_y() const noexcept { return grid_y_; }
  std::size_t nx() const noexcept { return values_.nx(); }
  std::size_t ny() const noexcept { return values_.ny(); }
  const GridField& values() const noexcept { return values_; }
  double value(std::size_t i, std::size_t j) const noexcept { return values_(i, j); }
  double area(std::size_t i, std::size_t j) const noexcept { return grid_x_.width(i) * grid_y_.width(j); }
  double mass(std::size_t i, std::size_t j) const noexcept { return values_(i, j) * area(i, j); }
  const NormalizationReport& normalization() const noexcept { return report_; }

  GridField masses() const
  {
    GridField m(nx(), ny());
    for (std::size_t i = 0; i < nx(); ++i)
      for (std::size_t j = 0; j < ny(); ++j)
        m(i, j) = mass(i, j);
    return m;
  }

private:
  void check_shape() const
  {
    if (values_.nx() != grid_x_.cells() || values_.ny() != grid_y_.cells())
      throw InvalidInput("DiscreteDensity2D: value shape does not match grids");
  }

  std::vector<double> areas() const
  {
    std::vector<double> a(values_.size());
    for (std::size_t i = 0; i < nx(); ++i)
      for (std::size_t j = 0; j < ny(); ++j)
        a[i * ny() + j] = area(i, j);
    return a;
  }

  Grid1D grid_x_;
  Grid1D grid_y_;
  GridField values_;
  NormalizationReport report_;
};

/// Piecewise-linear CDF through (knots[k], cum[k]). Repeated knots encode
/// atoms: the CDF jumps there and is right-continuous.
class CDF1D
{
public:
  CDF1D(std::vector<double> knots, std::vector<double> cum)
    : knots_(std::move(knots)), cum_(std::move(cum))
  {
    if (knots_.size() < 2 || knots_.size() != cum_.size())
      throw InvalidInput("CDF1D needs matching knot and level arrays of length >= 2");
    for (std::size_t k = 0; k + 1 < knots_.size(); ++k) {
      if (knots_[k + 1] < knots_[k])
        throw InvalidInput("CDF1D knots must be nondecreasing");
      if (cum_[k + 1] < cum_[k])
        throw InvalidInput("CDF1D levels must be nondecreasing");
    }
    if (cum_.front() != 0.0 || cum_.back() != 1.0)
      throw InvalidInput("CDF1D levels must run from 0 to 1");
  }

  /// CDF of a discrete law with the given sorted atoms and masses.
  static CDF1D from_atoms(std::span<const double> positions, std::span<const double> masses)
  {
    if (positions.empty() || positions.size() != masses.size())
      throw InvalidInput("from_atoms: need matching nonempty positions and masses");
    double total = 0.0;
    for (std::size_t k = 0; k < masses.size(); ++k) {
      if (masses[k] < 0.0)
        throw InvalidInput("from_atoms: negative mass");
      if (k > 0 && positions[k] < positions[k - 1])
        throw InvalidInput("from_atoms: positions must be sorted");
      total += masses[k];
    }
    if (!(total > 0.0))
      throw InvalidInput("from_atoms: zero total mass");
    std::vector<double> knots;
    std::vector<double> cum;
    knots.reserve(2 * positions.size());
    cum.reserve(2 * positions.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < positions.size(); ++k) {
      knots.push_back(positions[k]);
      cum.push_back(acc / total);
      acc += masses[k];
      knots.push_back(positions[k]);
      cum.push_back(k + 1 == positions.size() ? 1.0 : std::min(1.0, acc / total));
    }
    return CDF1D(std::move(knots), std::move(cum));
  }

  std::span<const double> knots() const noexcept { return knots_; }
  std::span<const double> levels() const noexcept { return cum_; }

  double operator()(double x) const noexcept
  {
    if (x < knots_.front())
      return 0.0;
    if (x >= knots_.back())
      return 1.0;
    auto k = static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin()) - 1;
    const double dx = knots_[k + 1] - knots_[k];
    if (dx <= 0.0)
      return cum_[k + 1];
    return cum_[k] + (cum_[k + 1] - cum_[k]) * (x - knots_[k]) / dx;
  }

  /// Left-continuous inverse inf{x : F(x) >= t}, linear inside cells.
  double quantile(double t) const
  {
    if (!(t > 0.0 && t <= 1.0))
      throw DomainError("quantile level must lie in (0,1]");
    return segment_quantile(t).first;
  }

  /// Quantile together with its derivative in t (0 on atoms).
  std::pair<double, double> quantile_and_slope(double t) const
  {
    if (!(t > 0.0 && t <= 1.0))
      throw DomainError("quantile level must lie in (0,1]");
    return segment_quantile(t);
  }

  /// Quantile with the level clamped into [0,1]; t <= 0 maps to the
  /// lowest point of the support.
  std::pair<double, double> clamped_quantile_and_slope(double t) const noexcept
  {
    if (t <= 0.0) {
      auto k = first_rising();
      return {knots_[k - 1], slope(k)};
    }
    return segment_quantile(std::min(t, 1.0));
  }

private:
  std::size_t first_rising() const noexcept
  {
    std::size_t k = 1;
    while (k + 1 < cum_.size() && cum_[k] <= 0.0)
      ++k;
    return k;
  }

  double slope(std::size_t k) const noexcept
  {
    const double dc = cum_[k] - cum_[k - 1];
    return dc > 0.0 ? (knots_[k] - knots_[k - 1]) / dc : 0.0;
  }

  std::pair<double, double> segment_quantile(double t) const noexcept
  {
    auto k = static_cast<std::size_t>(std::lower_bound(cum_.begin() + 1, cum_.end(), t) - cum_.begin());
    k = std::min(k, cum_.size() - 1);
    const double c0 = cum_[k - 1];
    const double c1 = cum_[k];
    const double x0 = knots_[k - 1];
    const double x1 = knots_[k];
    if (x1 == x0 || c1 <= c0)
      return {x1, 0.0};
    const double s = (x1 - x0) / (c1 - c0);
    return {x0 + (t - c0) * s, s};
  }

  std::vector<double> knots_;
  std::vector<double> cum_;
};

/// CDF of a piecewise-constant density from cell-mass prefix sums.
inline CDF1D build_cdf_from_masses(const Grid1D& grid, std::span<const double> masses)
{
  if (masses.size() != grid.cells())
    throw InvalidInput("build_cdf: mass count does not match grid");
  std::vector<double> knots(grid.edges().begin(), grid.edges().end());
  std::vector<double> cum(knots.size(), 0.0);
  double total = 0.0;
  for (double m : masses) {
    if (!(m >= 0.0))
      throw InvalidInput("build_cdf: negative mass");
    total += m;
  }
  if (!(total > 0.0))
    throw InvalidInput("build_cdf: zero total mass");
  double acc = 0.0;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    acc += masses[i];
    cum[i + 1] = std::min(1.0, acc / total);
  }
  cum.back() = 1.0;
  return CDF1D(std::move(knots), std::move(cum));
}

inline CDF1D build_cdf(const DiscreteDensity1D& d)
{
  return build_cdf_from_masses(d.grid(), d.masses());
}

/// Midpoint rule for the integral over (0,1) of (F^-1(t) - G^-1(t))^2.
inline double w2_squared_1d(const CDF1D& F, const CDF1D& G, std::size_t n_quad)
{
  if (n_quad < 2)
    throw InvalidInput("w2_squared_1d needs at least two quadrature points");
  const double dt = 1.0 / static_cast<double>(n_quad);
  double sum = 0.0;
  for (std::size_t k = 0; k < n_quad; ++k) {
    const double t = (static_cast<double>(k) + 0.5) * dt;
    const double d = F.quantile(t) - G.quantile(t);
    sum += d * d;
  }
  return sum * dt;
}

/// Row and column marginals (x-marginal first).
inline std::pair<DiscreteDensity1D, DiscreteDensity1D> marginals_2d(const DiscreteDensity2D& d)
{
  std::vector<double> fx(d.nx(), 0.0);
  std::vector<double> fy(d.ny(), 0.0);
  for (std::size_t i = 0; i < d.nx(); ++i) {
    for (std::size_t j = 0; j < d.ny(); ++j) {
      fx[i] += d.value(i, j) * d.grid_y().width(j);
      fy[j] += d.value(i, j) * d.grid_x().width(i);
    }
  }
  return {DiscreteDensity1D(d.grid_x(), std::move(fx)), DiscreteDensity1D(d.grid_y(), std::move(fy))};
}

} // namespace planar_mk
