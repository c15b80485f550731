#pragma once

// The reduced objective L(p) over joint densities p of (X1, Y2), on cell
// masses m(i,j) = p(i,j) * area(i,j).
//
// Quadrature::exact integrates the piecewise-constant p exactly. Within an
// x-cell i the level t = F_{Y2|X1}(y) runs over (0,1) and y = Y_i(t) is the
// piecewise-linear quantile of the slice, so
//
//   L = sum_i M_i int_0^1 (Y_i(t) - G_i(t))^2 dt + sum_j M~_j int_0^1 (X_j(t) - G~_j(t))^2 dt,
//
// a sum of one-dimensional squared quantile distances between the slices of
// p and the conditionals of f and f~.
//
// Quadrature::midpoint samples each cell once, at its center level:
//
//   L = sum_ij m_ij (y_j - g_ij)^2 + m_ij (x_i - h_ij)^2
//   g_ij = G_i(C_ij),   C_ij = (sum_{l<j} m_il + m_ij / 2) / sum_l m_il
//   h_ij = G~_j(D_ij),  D_ij = (sum_{k<i} m_kj + m_ij / 2) / sum_k m_kj
//
// and its first variation is
//
//   phi_ij = (y_j - g_ij)^2 + (1/M_i) (sum_{l>j} T_il + T_ij / 2),
//   T_il   = -2 m_il (y_l - g_il) G_i'(C_il),
//
// with psi symmetric. The midpoint sum drops the spread of y - G(t) across a
// cell, which rewards concentrating each slice in few cells; its minimizers
// are rough and undercut the exact value.
//
// G_i is the conditional quantile of X2 given X1 in x-cell i under f and
// G~_j the conditional quantile of Y1 given Y2 in y-cell j under f~. In both
// modes phi and psi are the exact gradient in mass coordinates, defined up to
// functions of x alone and of y alone, which pair to zero with every
// marginal-preserving perturbation.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "planar_mk/errors.hpp"
#include "planar_mk/grid_field.hpp"
#include "planar_mk/measures.hpp"

namespace planar_mk {

/// How L integrates over each cell.
enum class Quadrature
{
  /// One point per cell: the conditional level at the cell center.
  midpoint,
  /// Exact integral for piecewise-constant p: per slice, the squared distance
  /// between two piecewise-linear quantile functions integrated over (0,1).
  exact,
};

namespace detail {

/// Integral over (0,1) of (Y(t) - G(t))^2, with Y the quantile function of
/// the piecewise-constant slice `mass` on `edges` and G the quantile of
/// `target`. When dlevel is given it receives dI/dc_k, with c_k the slice CDF
/// at edge k (entries 0 and n stay unused).
inline double slice_quantile_gap(std::span<const double> mass, std::span<const double> edges, const CDF1D& target,
                                 std::vector<double>* dlevel)
{
  const std::size_t n = mass.size();
  double total = 0.0;
  for (double v : mass)
    total += v;
  std::vector<double> c(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    c[k + 1] = c[k] + mass[k] / total;
  c[n] = 1.0;
  if (dlevel)
    dlevel->assign(n + 1, 0.0);

  const auto tk = target.knots();
  const auto tl = target.levels();
  const std::size_t last = tl.size() - 1;
  auto target_at = [&](std::size_t b, double t) {
    const double dl = tl[b] - tl[b - 1];
    if (!(dl > 0.0))
      return tk[b];
    return tk[b - 1] + (t - tl[b - 1]) / dl * (tk[b] - tk[b - 1]);
  };

  double integral = 0.0;
  double t = 0.0;
  std::size_t b = 1;
  for (std::size_t s = 0; s < n;) {
    if (c[s + 1] <= t) {
      ++s;
      continue;
    }
    while (b < last && tl[b] <= t)
      ++b;
    // both level arrays end at exactly 1, so t < c[s+1] <= 1 keeps tl[b] > t
    const double t_end = std::min(c[s + 1], tl[b]);
    const double dlen = c[s + 1] - c[s];
    const double w = edges[s + 1] - edges[s];
    const double u0 = (t - c[s]) / dlen;
    const double u1 = (t_end - c[s]) / dlen;
    const double d0 = edges[s] + u0 * w - target_at(b, t);
    const double d1 = edges[s] + u1 * w - target_at(b, t_end);
    integral += (t_end - t) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
    if (dlevel) {
      const double du = u1 - u0;
      const double du_weighted = du / 6.0 * (2.0 * d0 * u0 + d0 * u1 + d1 * u0 + 2.0 * d1 * u1);
      const double d_plain = 0.5 * du * (d0 + d1);
      (*dlevel)[s + 1] -= 2.0 * w * du_weighted;
      (*dlevel)[s] -= 2.0 * w * (d_plain - du_weighted);
    }
    t = t_end;
  }
  return integral;
}

/// Slice contribution M * I and its gradient in the slice masses.
inline double exact_slice_term(std::span<const double> mass, std::span<const double> edges, const CDF1D& target,
                               std::span<double> grad)
{
  const std::size_t n = mass.size();
  double total = 0.0;
  for (double v : mass)
    total += v;
  std::vector<double> dlevel;
  const double I = slice_quantile_gap(mass, edges, target, grad.empty() ? nullptr : &dlevel);
  if (!grad.empty()) {
    // c_k = S_k / M, so dc_k/dm_l = ([l < k] - c_k) / M and L = M I.
    double shift = 0.0;
    double acc = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      acc += mass[k - 1];
      shift += dlevel[k] * (acc / total);
    }
    double tail = 0.0;
    for (std::size_t l = n; l-- > 0;) {
      grad[l] = I + tail - shift;
      if (l >= 1)
        tail += dlevel[l];
    }
  }
  return total * I;
}

} // namespace detail

/// Maps g, h and the conditional levels/quantile slopes they were built from.
struct ReducedMaps
{
  GridField g;        ///< G_i(C_ij), in f's y coordinates
  GridField h;        ///< G~_j(D_ij), in f~'s x coordinates
  GridField level_y;  ///< C_ij
  GridField level_x;  ///< D_ij
  GridField slope_g;  ///< dG_i/dt at C_ij
  GridField slope_h;  ///< dG~_j/dt at D_ij
};

class ReducedFunctional
{
public:
  /// p lives on f.grid_x() by f_tilde.grid_y().
  ReducedFunctional(const DiscreteDensity2D& f, const DiscreteDensity2D& f_tilde,
                    Quadrature quadrature = Quadrature::midpoint)
    : grid_x_(f.grid_x()), grid_y_(f_tilde.grid_y()), quadrature_(quadrature)
  {
    const std::size_t nx = f.nx();
    const std::size_t ny = f_tilde.ny();
    row_mass_.assign(nx, 0.0);
    col_mass_.assign(ny, 0.0);
    g_tables_.reserve(nx);
    std::vector<double> slice(f.ny());
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < f.ny(); ++j) {
        slice[j] = f.mass(i, j);
        row_mass_[i] += slice[j];
      }
      g_tables_.push_back(build_cdf_from_masses(f.grid_y(), slice));
    }
    h_tables_.reserve(ny);
    slice.assign(f_tilde.nx(), 0.0);
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < f_tilde.nx(); ++i) {
        slice[i] = f_tilde.mass(i, j);
        col_mass_[j] += slice[i];
      }
      h_tables_.push_back(build_cdf_from_masses(f_tilde.grid_x(), slice));
    }
    x_.resize(nx);
    y_.resize(ny);
    for (std::size_t i = 0; i < nx; ++i)
      x_[i] = grid_x_.center(i);
    for (std::size_t j = 0; j < ny; ++j)
      y_[j] = grid_y_.center(j);
  }

  const Grid1D& grid_x() const noexcept { return grid_x_; }
  const Grid1D& grid_y() const noexcept { return grid_y_; }
  std::size_t nx() const noexcept { return x_.size(); }
  std::size_t ny() const noexcept { return y_.size(); }
  Quadrature quadrature() const noexcept { return quadrature_; }

  /// Target row masses (x-marginal of f) and column masses (y-marginal of f~).
  const std::vector<double>& row_mass() const noexcept { return row_mass_; }
  const std::vector<double>& col_mass() const noexcept { return col_mass_; }

  /// Conditional CDFs whose quantiles are G(x_i, .) and G~(., y_j).
  const std::vector<CDF1D>& g_tables() const noexcept { return g_tables_; }
  const std::vector<CDF1D>& h_tables() const noexcept { return h_tables_; }

  ReducedMaps maps(const GridField& m) const
  {
    check_shape(m);
    ReducedMaps out{GridField(nx(), ny()), GridField(nx(), ny()), GridField(nx(), ny()),
                    GridField(nx(), ny()), GridField(nx(), ny()), GridField(nx(), ny())};
    for (std::size_t i = 0; i < nx(); ++i) {
      const double total = row_sum(m, i);
      double acc = 0.0;
      for (std::size_t j = 0; j < ny(); ++j) {
        const double c = (acc + 0.5 * m(i, j)) / total;
        auto [q, s] = g_tables_[i].clamped_quantile_and_slope(c);
        out.level_y(i, j) = c;
        out.g(i, j) = q;
        out.slope_g(i, j) = std::min(s, 1.0 / kDensityFloor);
        acc += m(i, j);
      }
    }
    for (std::size_t j = 0; j < ny(); ++j) {
      const double total = col_sum(m, j);
      double acc = 0.0;
      for (std::size_t i = 0; i < nx(); ++i) {
        const double d = (acc + 0.5 * m(i, j)) / total;
        auto [q, s] = h_tables_[j].clamped_quantile_and_slope(d);
        out.level_x(i, j) = d;
        out.h(i, j) = q;
        out.slope_h(i, j) = std::min(s, 1.0 / kDensityFloor);
        acc += m(i, j);
      }
    }
    return out;
  }

  struct Terms
  {
    double x = 0.0;  ///< sum m (x - h)^2
    double y = 0.0;  ///< sum m (y - g)^2
    double total() const noexcept { return x + y; }
  };

  Terms terms(const GridField& m) const
  {
    check_shape(m);
    Terms t;
    for (std::size_t i = 0; i < nx(); ++i)
      t.y += row_term(m, i);
    for (std::size_t j = 0; j < ny(); ++j)
      t.x += col_term(m, j);
    return t;
  }

  /// sum_j m_ij (y_j - g_ij)^2 for one x-cell; depends on row i only.
  double row_term(const GridField& m, std::size_t i) const
  {
    if (quadrature_ == Quadrature::exact)
      return detail::exact_slice_term(m.row(i), grid_y_.edges(), g_tables_[i], {});
    const double total = row_sum(m, i);
    double acc = 0.0;
    double s = 0.0;
    for (std::size_t j = 0; j < ny(); ++j) {
      const double g = g_tables_[i].clamped_quantile_and_slope((acc + 0.5 * m(i, j)) / total).first;
      const double d = y_[j] - g;
      s += m(i, j) * d * d;
      acc += m(i, j);
    }
    return s;
  }

  /// sum_i m_ij (x_i - h_ij)^2 for one y-cell; depends on column j only.
  double col_term(const GridField& m, std::size_t j) const
  {
    if (quadrature_ == Quadrature::exact) {
      std::vector<double> col(nx());
      for (std::size_t i = 0; i < nx(); ++i)
        col[i] = m(i, j);
      return detail::exact_slice_term(col, grid_x_.edges(), h_tables_[j], {});
    }
    const double total = col_sum(m, j);
    double acc = 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < nx(); ++i) {
      const double h = h_tables_[j].clamped_quantile_and_slope((acc + 0.5 * m(i, j)) / total).first;
      const double d = x_[i] - h;
      s += m(i, j) * d * d;
      acc += m(i, j);
    }
    return s;
  }

  double value(const GridField& m) const { return terms(m).total(); }

  /// phi and psi at the masses m (see the header comment).
  std::pair<GridField, GridField> first_variation(const GridField& m) const
  {
    if (quadrature_ == Quadrature::exact)
      return exact_first_variation(m);
    return first_variation(m, maps(m));
  }

  std::pair<GridField, GridField> first_variation(const GridField& m, const ReducedMaps& mp) const
  {
    GridField phi(nx(), ny());
    GridField psi(nx(), ny());
    for (std::size_t i = 0; i < nx(); ++i) {
      const double total = row_sum(m, i);
      double tail = 0.0;
      for (std::size_t j = ny(); j-- > 0;) {
        const double d = y_[j] - mp.g(i, j);
        const double t = -2.0 * m(i, j) * d * mp.slope_g(i, j);
        phi(i, j) = d * d + (tail + 0.5 * t) / total;
        tail += t;
      }
    }
    for (std::size_t j = 0; j < ny(); ++j) {
      const double total = col_sum(m, j);
      double tail = 0.0;
      for (std::size_t i = nx(); i-- > 0;) {
        const double d = x_[i] - mp.h(i, j);
        const double t = -2.0 * m(i, j) * d * mp.slope_h(i, j);
        psi(i, j) = d * d + (tail + 0.5 * t) / total;
        tail += t;
      }
    }
    return {std::move(phi), std::move(psi)};
  }

  /// phi + psi, the gradient of value() along marginal-preserving directions.
  GridField gradient(const GridField& m) const
  {
    auto [phi, psi] = first_variation(m);
    for (std::size_t k = 0; k < phi.size(); ++k)
      phi.values()[k] += psi.values()[k];
    return phi;
  }

private:
  std::pair<GridField, GridField> exact_first_variation(const GridField& m) const
  {
    check_shape(m);
    GridField phi(nx(), ny());
    GridField psi(nx(), ny());
    for (std::size_t i = 0; i < nx(); ++i) {
      std::vector<double> grad(ny());
      detail::exact_slice_term(m.row(i), grid_y_.edges(), g_tables_[i], grad);
      for (std::size_t j = 0; j < ny(); ++j)
        phi(i, j) = grad[j];
    }
    std::vector<double> col(nx());
    std::vector<double> grad(nx());
    for (std::size_t j = 0; j < ny(); ++j) {
      for (std::size_t i = 0; i < nx(); ++i)
        col[i] = m(i, j);
      detail::exact_slice_term(col, grid_x_.edges(), h_tables_[j], grad);
      for (std::size_t i = 0; i < nx(); ++i)
        psi(i, j) = grad[i];
    }
    return {std::move(phi), std::move(psi)};
  }

  void check_shape(const GridField& m) const
  {
    if (m.nx() != nx() || m.ny() != ny())
      throw InvalidInput("coupling grid does not match the reduced problem");
  }

  static double row_sum(const GridField& m, std::size_t i) noexcept
  {
    double s = 0.0;
    for (double v : m.row(i))
      s += v;
    return s;
  }

  static double col_sum(const GridField& m, std::size_t j) noexcept
  {
    double s = 0.0;
    for (std::size_t i = 0; i < m.nx(); ++i)
      s += m(i, j);
    return s;
  }

  Grid1D grid_x_;
  Grid1D grid_y_;
  Quadrature quadrature_;
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> row_mass_;
  std::vector<double> col_mass_;
  std::vector<CDF1D> g_tables_;
  std::vector<CDF1D> h_tables_;
};

} // namespace planar_mk
