#pragma once

// Conditional CDFs and quantiles of planar densities, the transport maps
//   g(x, y) = G(x, F_{Y2|X1}(y | x))     h(x, y) = G~(F_{X1|Y2}(x | y), y)
// built from a coupling p of (X1, Y2), the pushforward check that
// (X1, g(X1, Y2)) ~ f and (h(X1, Y2), Y2) ~ f~, and the coupling cost of the
// reconstructed pair.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "planar_mk/coupling.hpp"
#include "planar_mk/errors.hpp"
#include "planar_mk/grid_field.hpp"
#include "planar_mk/measures.hpp"

namespace planar_mk {

/// Which variable a conditional law is conditioned on.
enum class Axis
{
  x,  ///< condition on the first coordinate; the CDF runs along y
  y,  ///< condition on the second coordinate; the CDF runs along x
};

/// CDF of one slice of d, normalized by the slice mass.
inline CDF1D conditional_cdf(const DiscreteDensity2D& d, Axis condition_axis, std::size_t cell_index)
{
  if (condition_axis == Axis::x) {
    if (cell_index >= d.nx())
      throw InvalidInput("conditional_cdf: x cell index out of range");
    std::vector<double> slice(d.ny());
    for (std::size_t j = 0; j < d.ny(); ++j)
      slice[j] = d.mass(cell_index, j);
    return build_cdf_from_masses(d.grid_y(), slice);
  }
  if (cell_index >= d.ny())
    throw InvalidInput("conditional_cdf: y cell index out of range");
  std::vector<double> slice(d.nx());
  for (std::size_t i = 0; i < d.nx(); ++i)
    slice[i] = d.mass(i, cell_index);
  return build_cdf_from_masses(d.grid_x(), slice);
}

/// One conditional quantile table per conditioning cell.
struct ConditionalQuantileField
{
  Axis axis;
  std::vector<CDF1D> tables;

  double operator()(std::size_t cell, double t) const { return tables.at(cell).quantile(t); }
};

inline ConditionalQuantileField conditional_quantile_field(const DiscreteDensity2D& d, Axis axis)
{
  ConditionalQuantileField field{axis, {}};
  const std::size_t n = axis == Axis::x ? d.nx() : d.ny();
  field.tables.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    field.tables.push_back(conditional_cdf(d, axis, k));
  return field;
}

namespace detail {

inline void check_marginal(std::span<const double> have, std::span<const double> want, const char* what)
{
  if (have.size() != want.size())
    throw InvalidInput(std::string(what) + ": grid sizes differ");
  double dev = 0.0;
  for (std::size_t k = 0; k < have.size(); ++k)
    dev += std::abs(have[k] - want[k]);
  if (dev > kFeasibilityTolerance)
    throw MarginalMismatch(what, dev);
}

inline std::vector<double> row_masses(const DiscreteDensity2D& d)
{
  std::vector<double> r(d.nx(), 0.0);
  for (std::size_t i = 0; i < d.nx(); ++i)
    for (std::size_t j = 0; j < d.ny(); ++j)
      r[i] += d.mass(i, j);
  return r;
}

inline std::vector<double> col_masses(const DiscreteDensity2D& d)
{
  std::vector<double> c(d.ny(), 0.0);
  for (std::size_t i = 0; i < d.nx(); ++i)
    for (std::size_t j = 0; j < d.ny(); ++j)
      c[j] += d.mass(i, j);
  return c;
}

/// Levels clamp into (0,1]; rounding can push a centered level a hair past 1.
inline double level(double t) noexcept
{
  return std::clamp(t, std::numeric_limits<double>::min(), 1.0);
}

} // namespace detail

/// g on the cell centers of p's grid.
inline GridField build_g_map(const DiscreteDensity2D& f, const CouplingDensity& p)
{
  const auto& pd = p.density();
  if (!(pd.grid_x() == f.grid_x()))
    throw InvalidInput("build_g_map: coupling and f must share the x grid");
  detail::check_marginal(detail::row_masses(pd), detail::row_masses(f),
                         "build_g_map: x-marginal of p differs from that of f");
  const auto G = conditional_quantile_field(f, Axis::x);
  GridField g(pd.nx(), pd.ny());
  for (std::size_t i = 0; i < pd.nx(); ++i) {
    const CDF1D F_y_given_x = conditional_cdf(pd, Axis::x, i);
    for (std::size_t j = 0; j < pd.ny(); ++j)
      g(i, j) = G(i, detail::level(F_y_given_x(pd.grid_y().center(j))));
  }
  return g;
}

/// h on the cell centers of p's grid.
inline GridField build_h_map(const DiscreteDensity2D& f_tilde, const CouplingDensity& p)
{
  const auto& pd = p.density();
  if (!(pd.grid_y() == f_tilde.grid_y()))
    throw InvalidInput("build_h_map: coupling and f~ must share the y grid");
  detail::check_marginal(detail::col_masses(pd), detail::col_masses(f_tilde),
                         "build_h_map: y-marginal of p differs from that of f~");
  const auto Gt = conditional_quantile_field(f_tilde, Axis::y);
  GridField h(pd.nx(), pd.ny());
  for (std::size_t j = 0; j < pd.ny(); ++j) {
    const CDF1D F_x_given_y = conditional_cdf(pd, Axis::y, j);
    for (std::size_t i = 0; i < pd.nx(); ++i)
      h(i, j) = Gt(j, detail::level(F_x_given_y(pd.grid_x().center(i))));
  }
  return h;
}

/// g and h together with the coupling they were built from.
struct TransportMapPair
{
  GridField g_values;
  GridField h_values;
  CouplingDensity source_coupling;
};

inline TransportMapPair build_maps(const DiscreteDensity2D& f, const DiscreteDensity2D& f_tilde,
                                   const CouplingDensity& p)
{
  return TransportMapPair{build_g_map(f, p), build_h_map(f_tilde, p), p};
}

/// How the pushforward check bins mass onto the target grid.
enum class Deposit
{
  /// Spread each source cell's mass uniformly over its image interval,
  /// bounded by midpoints between neighbouring map values.
  interval,
  /// Put each source cell's mass into the target cell containing its image.
  nearest_cell,
};

struct PushforwardReport
{
  double max_deviation = 0.0;  ///< max over target cells of |binned - target| mass
  double l1_deviation = 0.0;   ///< sum over target cells of |binned - target| mass
  GridField binned;            ///< pushed-forward masses on the target grid
};

namespace detail {

inline void deposit_slice(std::span<const double> mass, std::span<const double> image, const Grid1D& target,
                          Deposit mode, std::span<double> out)
{
  const std::size_t n = mass.size();
  if (mode == Deposit::nearest_cell) {
    for (std::size_t l = 0; l < n; ++l)
      out[target.locate(image[l])] += mass[l];
    return;
  }
  for (std::size_t l = 0; l < n; ++l) {
    double lo = l == 0 ? target.lower() : 0.5 * (image[l - 1] + image[l]);
    double hi = l + 1 == n ? target.upper() : 0.5 * (image[l] + image[l + 1]);
    lo = std::clamp(lo, target.lower(), target.upper());
    hi = std::clamp(hi, target.lower(), target.upper());
    if (!(hi > lo)) {
      out[target.locate(image[l])] += mass[l];
      continue;
    }
    const std::size_t k0 = target.locate(lo);
    const std::size_t k1 = target.locate(hi);
    for (std::size_t k = k0; k <= k1; ++k) {
      const double overlap = std::min(hi, target.edge(k + 1)) - std::max(lo, target.edge(k));
      if (overlap > 0.0)
        out[k] += mass[l] * overlap / (hi - lo);
    }
  }
}

} // namespace detail

/// Law of (X1, g(X1, Y2)) for (X1, Y2) ~ p, binned onto f's grid and compared with f.
/// With axis == Axis::y the roles swap: law of (h(X1, Y2), Y2) compared with f~.
inline PushforwardReport pushforward_check(const DiscreteDensity2D& target, const CouplingDensity& p,
                                           const GridField& map, Axis axis = Axis::x,
                                           Deposit mode = Deposit::interval)
{
  const auto& pd = p.density();
  if (map.nx() != pd.nx() || map.ny() != pd.ny())
    throw InvalidInput("pushforward_check: map and coupling shapes differ");
  PushforwardReport rep{0.0, 0.0, GridField(target.nx(), target.ny())};
  const GridField pm = pd.masses();
  if (axis == Axis::x) {
    if (!(pd.grid_x() == target.grid_x()))
      throw InvalidInput("pushforward_check: coupling and target must share the x grid");
    std::vector<double> out(target.ny());
    std::vector<double> img(pd.ny());
    for (std::size_t i = 0; i < pd.nx(); ++i) {
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t j = 0; j < pd.ny(); ++j)
        img[j] = map(i, j);
      detail::deposit_slice(pm.row(i), img, target.grid_y(), mode, out);
      for (std::size_t k = 0; k < target.ny(); ++k)
        rep.binned(i, k) = out[k];
    }
  } else {
    if (!(pd.grid_y() == target.grid_y()))
      throw InvalidInput("pushforward_check: coupling and target must share the y grid");
    std::vector<double> out(target.nx());
    std::vector<double> img(pd.nx());
    std::vector<double> mass(pd.nx());
    for (std::size_t j = 0; j < pd.ny(); ++j) {
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t i = 0; i < pd.nx(); ++i) {
        img[i] = map(i, j);
        mass[i] = pm(i, j);
      }
      detail::deposit_slice(mass, img, target.grid_x(), mode, out);
      for (std::size_t k = 0; k < target.nx(); ++k)
        rep.binned(k, j) = out[k];
    }
  }
  for (std::size_t i = 0; i < target.nx(); ++i) {
    for (std::size_t j = 0; j < target.ny(); ++j) {
      const double dev = std::abs(rep.binned(i, j) - target.mass(i, j));
      rep.max_deviation = std::max(rep.max_deviation, dev);
      rep.l1_deviation += dev;
    }
  }
  return rep;
}

struct CouplingCost
{
  double total = 0.0;
  double term_x = 0.0;  ///< E (X1 - h(X1, Y2))^2
  double term_y = 0.0;  ///< E (Y2 - g(X1, Y2))^2
};

/// E|X^ - Y^|^2 for X^ = (X1, g), Y^ = (h, Y2) with (X1, Y2) ~ p, by the midpoint rule.
inline CouplingCost coupling_cost(const DiscreteDensity2D& f, const DiscreteDensity2D& f_tilde,
                                  const CouplingDensity& p, const GridField& g, const GridField& h)
{
  const auto& pd = p.density();
  if (!(pd.grid_x() == f.grid_x()) || !(pd.grid_y() == f_tilde.grid_y()))
    throw InvalidInput("coupling_cost: coupling grid must be f's x grid by f~'s y grid");
  if (g.nx() != pd.nx() || g.ny() != pd.ny() || h.nx() != pd.nx() || h.ny() != pd.ny())
    throw InvalidInput("coupling_cost: map shapes differ from the coupling");
  CouplingCost c;
  for (std::size_t i = 0; i < pd.nx(); ++i) {
    const double x = pd.grid_x().center(i);
    for (std::size_t j = 0; j < pd.ny(); ++j) {
      const double y = pd.grid_y().center(j);
      const double m = pd.mass(i, j);
      c.term_y += m * (y - g(i, j)) * (y - g(i, j));
      c.term_x += m * (x - h(i, j)) * (x - h(i, j));
    }
  }
  c.total = c.term_x + c.term_y;
  return c;
}

inline CouplingCost coupling_cost(const DiscreteDensity2D& f, const DiscreteDensity2D& f_tilde,
                                  const TransportMapPair& maps)
{
  return coupling_cost(f, f_tilde, maps.source_coupling, maps.g_values, maps.h_values);
}

} // namespace planar_mk
