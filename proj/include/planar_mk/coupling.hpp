#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "planar_mk/errors.hpp"
#include "planar_mk/measures.hpp"

namespace planar_mk {

/// L1 tolerance on the marginals of a coupling in the transportation polytope.
inline constexpr double kFeasibilityTolerance = 1e-9;

/// Row and column L1 deviations of a mass grid from target marginal masses.
struct MarginalErrors
{
  double row = 0.0;
  double col = 0.0;

  double max() const noexcept { return std::max(row, col); }
};

inline MarginalErrors marginal_errors(const GridField& masses, std::span<const double> row_target,
                                      std::span<const double> col_target)
{
  MarginalErrors e;
  std::vector<double> cols(masses.ny(), 0.0);
  for (std::size_t i = 0; i < masses.nx(); ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < masses.ny(); ++j) {
      r += masses(i, j);
      cols[j] += masses(i, j);
    }
    e.row += std::abs(r - row_target[i]);
  }
  for (std::size_t j = 0; j < masses.ny(); ++j)
    e.col += std::abs(cols[j] - col_target[j]);
  return e;
}

/// Joint density of (X1, Y2) whose marginals are the x-marginal of f and
/// the y-marginal of f~, i.e. a point of the transportation polytope.
class CouplingDensity
{
public:
  CouplingDensity(DiscreteDensity2D density, DiscreteDensity1D row_target, DiscreteDensity1D col_target)
    : density_(std::move(density)), row_target_(std::move(row_target)), col_target_(std::move(col_target))
  {
    if (!(density_.grid_x() == row_target_.grid()) || !(density_.grid_y() == col_target_.grid()))
      throw InvalidInput("CouplingDensity: grids of the density and its target marginals differ");
    for (double v : density_.values().values()) {
      if (!(v > 0.0))
        throw InvalidInput("CouplingDensity: values must be strictly positive");
    }
    errors_ = planar_mk::marginal_errors(density_.masses(), row_target_.masses(), col_target_.masses());
    if (errors_.max() >= kFeasibilityTolerance)
      throw MarginalMismatch("CouplingDensity: marginals outside the transportation polytope", errors_.max());
  }

  /// Builds a coupling from cell masses on the marginals' grids.
  static CouplingDensity from_masses(const GridField& masses, DiscreteDensity1D row_target,
                                     DiscreteDensity1D col_target)
  {
    Grid1D gx = row_target.grid();
    Grid1D gy = col_target.grid();
    GridField values(masses.nx(), masses.ny());
    for (std::size_t i = 0; i < masses.nx(); ++i)
      for (std::size_t j = 0; j < masses.ny(); ++j)
        values(i, j) = masses(i, j) / (gx.width(i) * gy.width(j));
    DiscreteDensity2D d(std::move(gx), std::move(gy), std::move(values));
    return CouplingDensity(std::move(d), std::move(row_target), std::move(col_target));
  }

  /// The independent coupling f1 (x) f2.
  static CouplingDensity independent(DiscreteDensity1D row_target, DiscreteDensity1D col_target)
  {
    GridField values(row_target.cells(), col_target.cells());
    for (std::size_t i = 0; i < values.nx(); ++i)
      for (std::size_t j = 0; j < values.ny(); ++j)
        values(i, j) = row_target.value(i) * col_target.value(j);
    DiscreteDensity2D d(row_target.grid(), col_target.grid(), std::move(values));
    return CouplingDensity(std::move(d), std::move(row_target), std::move(col_target));
  }

  const DiscreteDensity2D& density() const noexcept { return density_; }
  const DiscreteDensity1D& row_target() const noexcept { return row_target_; }
  const DiscreteDensity1D& col_target() const noexcept { return col_target_; }
  const MarginalErrors& marginal_errors() const noexcept { return errors_; }
  GridField masses() const { return density_.masses(); }
  std::size_t nx() const noexcept { return density_.nx(); }
  std::size_t ny() const noexcept { return density_.ny(); }

private:
  DiscreteDensity2D density_;
  DiscreteDensity1D row_target_;
  DiscreteDensity1D col_target_;
  MarginalErrors errors_;
};

} // namespace planar_mk
