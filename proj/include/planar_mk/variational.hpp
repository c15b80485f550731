#pragma once

// First-order calculus of the reduced objective L over the transportation
// polytope: the value, the first-variation kernels phi and psi, their
// closed-form cross derivatives phi_y = 2(y - g) and psi_x = 2(x - h), and
// the Euler-Lagrange residual
//
//   d/dx G(x, H_x / f1) + d/dy G~(H_y / f2, y)
//
// with H(x, y) the cumulative distribution of the coupling.

#include <cmath>
#include <cstddef>
#include <vector>

#include "planar_mk/coupling.hpp"
#include "planar_mk/errors.hpp"
#include "planar_mk/grid_field.hpp"
#include "planar_mk/measures.hpp"
#include "planar_mk/reduced_functional.hpp"
#include "planar_mk/reduction.hpp"

namespace planar_mk {

/// Reduced problem for (f, f~) after checking that p lies in its polytope.
inline ReducedFunctional checked_problem(const DiscreteDensity2D& f, const DiscreteDensity2D& f_tilde,
                                         const CouplingDensity& p, Quadrature quadrature = Quadrature::exact)
{
  const auto& pd = p.density();
  if (!(pd.grid_x() == f.grid_x()) || !(pd.grid_y() == f_tilde.grid_y()))
    throw InvalidInput("coupling grid must be f's x grid by f~'s y grid");
  ReducedFunctional problem(f, f_tilde, quadrature);
  const auto errs = marginal_errors(pd.masses(), problem.row_mass(), problem.col_mass());
  if (errs.max() > kFeasibilityTolerance)
    throw MarginalMismatch("coupling is not feasible for (f, f~)", errs.max());
  return problem;
}

inline double evaluate_L(const DiscreteDensity2D& f, const DiscreteDensity2D& f_tilde, const CouplingDensity& p,
                         Quadrature quadrature = Quadrature::exact)
{
  return checked_problem(f, f_tilde, p, quadrature).value(p.masses());
}

struct FirstVariation
{
  GridField phi;
  GridField psi;
};

/// phi and psi in mass coordinates: dL = sum (phi + psi) dm.
inline FirstVariation first_variation(const DiscreteDensity2D& f, const DiscreteDensity2D& f_tilde,
                                      const CouplingDensity& p, Quadrature quadrature = Quadrature::exact)
{
  auto [phi, psi] = checked_problem(f, f_tilde, p, quadrature).first_variation(p.masses());
  return {std::move(phi), std::move(psi)};
}

struct CrossDerivatives
{
  GridField phi_y;  ///< 2 (y - g)
  GridField psi_x;  ///< 2 (x - h)
};

inline CrossDerivatives simplified_cross_derivatives(const DiscreteDensity2D& f, const DiscreteDensity2D& f_tilde,
                                                     const CouplingDensity& p)
{
  const auto problem = checked_problem(f, f_tilde, p);
  const auto mp = problem.maps(p.masses());
  CrossDerivatives out{GridField(p.nx(), p.ny()), GridField(p.nx(), p.ny())};
  for (std::size_t i = 0; i < p.nx(); ++i) {
    for (std::size_t j = 0; j < p.ny(); ++j) {
      out.phi_y(i, j) = 2.0 * (problem.grid_y().center(j) - mp.g(i, j));
      out.psi_x(i, j) = 2.0 * (problem.grid_x().center(i) - mp.h(i, j));
    }
  }
  return out;
}

/// H(x, y) on the grid nodes: mass of p below and to the left of node (a, b).
class CumulativeH
{
public:
  explicit CumulativeH(const DiscreteDensity2D& p)
    : nx_(p.nx()), ny_(p.ny()), values_((p.nx() + 1) * (p.ny() + 1), 0.0)
  {
    for (std::size_t a = 1; a <= nx_; ++a) {
      double row = 0.0;
      for (std::size_t b = 1; b <= ny_; ++b) {
        row += p.mass(a - 1, b - 1);
        at(a, b) = at(a - 1, b) + row;
      }
    }
  }

  std::size_t nodes_x() const noexcept { return nx_ + 1; }
  std::size_t nodes_y() const noexcept { return ny_ + 1; }
  double operator()(std::size_t a, std::size_t b) const noexcept { return values_[a * (ny_ + 1) + b]; }

private:
  double& at(std::size_t a, std::size_t b) noexcept { return values_[a * (ny_ + 1) + b]; }

  std::size_t nx_;
  std::size_t ny_;
  std::vector<double> values_;
};

struct EulerLagrangeResidual
{
  GridField bracket_x;  ///< G(x, H_x / f1) at cell centers
  GridField bracket_y;  ///< G~(H_y / f2, y) at cell centers
  GridField residual;   ///< d/dx bracket_x + d/dy bracket_y
  double interior_l2 = 0.0;
  /// max |H - cumulative marginal| along the upper and right edges
  double boundary_deviation = 0.0;
};

namespace detail {

inline double center_derivative(const Grid1D& g, std::size_t k, double lo_val, double mid_val, double hi_val,
                                bool has_lo, bool has_hi)
{
  if (has_lo && has_hi)
    return (hi_val - lo_val) / (g.center(k + 1) - g.center(k - 1));
  if (has_hi)
    return (hi_val - mid_val) / (g.center(k + 1) - g.center(k));
  return (mid_val - lo_val) / (g.center(k) - g.center(k - 1));
}

} // namespace detail

inline EulerLagrangeResidual euler_lagrange_residual(const DiscreteDensity2D& f, const DiscreteDensity2D& f_tilde,
                                                     const CouplingDensity& p)
{
  const auto problem = checked_problem(f, f_tilde, p);
  const auto& pd = p.density();
  const std::size_t nx = pd.nx();
  const std::size_t ny = pd.ny();
  if (nx < 2 || ny < 2)
    throw InvalidInput("euler_lagrange_residual needs at least two cells per axis");
  const Grid1D& gx = pd.grid_x();
  const Grid1D& gy = pd.grid_y();
  const CumulativeH H(pd);

  EulerLagrangeResidual out{GridField(nx, ny), GridField(nx, ny), GridField(nx, ny), 0.0, 0.0};
  for (std::size_t i = 0; i < nx; ++i) {
    // row density f1 of the target marginal
    const double f1 = problem.row_mass()[i] / gx.width(i);
    for (std::size_t j = 0; j < ny; ++j) {
      const double Hx = ((H(i + 1, j) + H(i + 1, j + 1)) - (H(i, j) + H(i, j + 1))) / (2.0 * gx.width(i));
      out.bracket_x(i, j) = problem.g_tables()[i].clamped_quantile_and_slope(Hx / f1).first;
    }
  }
  for (std::size_t j = 0; j < ny; ++j) {
    const double f2 = problem.col_mass()[j] / gy.width(j);
    for (std::size_t i = 0; i < nx; ++i) {
      const double Hy = ((H(i, j + 1) + H(i + 1, j + 1)) - (H(i, j) + H(i + 1, j))) / (2.0 * gy.width(j));
      out.bracket_y(i, j) = problem.h_tables()[j].clamped_quantile_and_slope(Hy / f2).first;
    }
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      const double dx = detail::center_derivative(
          gx, i, i > 0 ? out.bracket_x(i - 1, j) : 0.0, out.bracket_x(i, j),
          i + 1 < nx ? out.bracket_x(i + 1, j) : 0.0, i > 0, i + 1 < nx);
      const double dy = detail::center_derivative(
          gy, j, j > 0 ? out.bracket_y(i, j - 1) : 0.0, out.bracket_y(i, j),
          j + 1 < ny ? out.bracket_y(i, j + 1) : 0.0, j > 0, j + 1 < ny);
      out.residual(i, j) = dx + dy;
      if (i > 0 && j > 0 && i + 1 < nx && j + 1 < ny)
        sum += out.residual(i, j) * out.residual(i, j) * pd.area(i, j);
    }
  }
  out.interior_l2 = std::sqrt(sum);

  double cum = 0.0;
  for (std::size_t a = 0; a <= nx; ++a) {
    out.boundary_deviation = std::max(out.boundary_deviation, std::abs(H(a, 0)));
    out.boundary_deviation = std::max(out.boundary_deviation, std::abs(H(a, ny) - cum));
    if (a < nx)
      cum += problem.row_mass()[a];
  }
  cum = 0.0;
  for (std::size_t b = 0; b <= ny; ++b) {
    out.boundary_deviation = std::max(out.boundary_deviation, std::abs(H(0, b)));
    out.boundary_deviation = std::max(out.boundary_deviation, std::abs(H(nx, b) - cum));
    if (b < ny)
      cum += problem.col_mass()[b];
  }
  return out;
}

/// Everything the first-order analysis knows about one coupling.
struct VariationalState
{
  double L_value = 0.0;
  GridField phi;
  GridField psi;
  GridField grad;  ///< phi + psi
  GridField el_residual;
  double el_residual_norm = 0.0;
};

inline VariationalState variational_state(const DiscreteDensity2D& f, const DiscreteDensity2D& f_tilde,
                                          const CouplingDensity& p, Quadrature quadrature = Quadrature::exact)
{
  const auto problem = checked_problem(f, f_tilde, p, quadrature);
  const GridField m = p.masses();
  auto [phi, psi] = problem.first_variation(m);
  GridField grad = phi;
  for (std::size_t k = 0; k < grad.size(); ++k)
    grad.values()[k] += psi.values()[k];
  auto el = euler_lagrange_residual(f, f_tilde, p);
  return VariationalState{problem.value(m), std::move(phi), std::move(psi), std::move(grad),
                          std::move(el.residual), el.interior_l2};
}

/// sum (phi + psi) eta area: the directional derivative of L along a
/// density perturbation eta.
inline double pair_with_direction(const GridField& kernel, const GridField& eta, const Grid1D& gx, const Grid1D& gy)
{
  double s = 0.0;
  for (std::size_t i = 0; i < kernel.nx(); ++i)
    for (std::size_t j = 0; j < kernel.ny(); ++j)
      s += kernel(i, j) * eta(i, j) * gx.width(i) * gy.width(j);
  return s;
}

} // namespace planar_mk
