#pragma once

// Minimization of the reduced objective L over the transportation polytope.
//
// Iterates are cell masses with fixed row sums (x-marginal of f) and column
// sums (y-marginal of f~). Two schemes:
//   * projected gradient: the gradient phi + psi is double-centered onto the
//     zero-marginal subspace, a Barzilai-Borwein trial step is backtracked
//     until the Armijo condition holds, cells are clipped at the floor and
//     re-projected by IPFP when a step would leave the positive orthant;
//   * rectangle coordinate descent: exact line searches along the four-cell
//     +/- patterns (a,b), (a1,b1) vs (a1,b), (a,b1).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "planar_mk/coupling.hpp"
#include "planar_mk/errors.hpp"
#include "planar_mk/grid_field.hpp"
#include "planar_mk/measures.hpp"
#include "planar_mk/reduced_functional.hpp"
#include "planar_mk/rng.hpp"
#include "planar_mk/variational.hpp"

namespace planar_mk {

enum class InitKind
{
  independent,  ///< f1 (x) f2
  random,       ///< IPFP-projected random positive perturbation of f1 (x) f2
};

enum class Scheme
{
  projected_gradient,
  rectangle_cd,
};

struct SolverConfig
{
  InitKind init = InitKind::independent;
  Scheme scheme = Scheme::projected_gradient;
  Quadrature quadrature = Quadrature::exact;
  /// Stop when the double-centered gradient norm falls below this; a
  /// negative value means 1e-6 * (number of cells).
  double grad_tol = -1.0;
  std::size_t max_iters = 10'000;
  std::size_t multistart = 1;
  std::uint64_t seed = 0;
  double l_change_tol = 1e-12;
  double armijo = 1e-4;
  double backtrack = 0.5;
  /// Relative amplitude of the random perturbation used by random starts.
  double perturbation = 0.5;
  std::size_t threads = 1;
};

/// Termination causes recorded in reports.
namespace termination {
inline constexpr const char* grad_tol = "grad_tol";
inline constexpr const char* l_change = "l_change";
inline constexpr const char* max_iters = "max_iters";
inline constexpr const char* line_search = "line_search_stalled";
} // namespace termination

struct IpfpResult
{
  std::size_t iterations = 0;
  MarginalErrors residual;
};

/// Alternating row/column rescaling of masses in place until both marginal
/// L1 errors are below tol.
inline IpfpResult ipfp_masses(GridField& m, std::span<const double> row_target, std::span<const double> col_target,
                              std::size_t max_iters, double tol)
{
  IpfpResult r;
  std::vector<double> cols(m.ny());
  for (;;) {
    r.residual = marginal_errors(m, row_target, col_target);
    if (r.residual.row < tol && r.residual.col < tol)
      return r;
    if (r.iterations == max_iters)
      throw NonConvergence("IPFP did not reach the marginal tolerance", r.residual.max());
    ++r.iterations;
    for (std::size_t i = 0; i < m.nx(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m.ny(); ++j)
        s += m(i, j);
      const double scale = row_target[i] / s;
      for (std::size_t j = 0; j < m.ny(); ++j)
        m(i, j) *= scale;
    }
    std::fill(cols.begin(), cols.end(), 0.0);
    for (std::size_t i = 0; i < m.nx(); ++i)
      for (std::size_t j = 0; j < m.ny(); ++j)
        cols[j] += m(i, j);
    for (std::size_t i = 0; i < m.nx(); ++i)
      for (std::size_t j = 0; j < m.ny(); ++j)
        m(i, j) *= col_target[j] / cols[j];
  }
}

/// Projects a positive density grid onto the couplings of f1 and f2.
inline CouplingDensity ipfp_project(const GridField& raw, const DiscreteDensity1D& f1, const DiscreteDensity1D& f2,
                                    std::size_t max_iters = 10'000, double tol = 1e-12)
{
  if (raw.nx() != f1.cells() || raw.ny() != f2.cells())
    throw InvalidInput("ipfp_project: grid shape does not match the marginals");
  GridField m(raw.nx(), raw.ny());
  for (std::size_t i = 0; i < raw.nx(); ++i) {
    for (std::size_t j = 0; j < raw.ny(); ++j) {
      if (!(raw(i, j) > 0.0))
        throw InvalidInput("ipfp_project: raw grid must be strictly positive");
      m(i, j) = raw(i, j) * f1.grid().width(i) * f2.grid().width(j);
    }
  }
  ipfp_masses(m, f1.masses(), f2.masses(), max_iters, tol);
  return CouplingDensity::from_masses(m, f1, f2);
}

/// Density perturbation +1/area on (a,b), (a1,b1) and -1/area on (a1,b), (a,b1):
/// every row and column integrates to zero.
inline GridField feasible_direction(const Grid1D& gx, const Grid1D& gy, std::size_t a, std::size_t a1,
                                    std::size_t b, std::size_t b1)
{
  if (a == a1 || b == b1)
    throw InvalidInput("feasible_direction: degenerate rectangle");
  if (a >= gx.cells() || a1 >= gx.cells() || b >= gy.cells() || b1 >= gy.cells())
    throw InvalidInput("feasible_direction: rectangle outside the grid");
  GridField d(gx.cells(), gy.cells());
  d(a, b) = 1.0 / (gx.width(a) * gy.width(b));
  d(a1, b1) = 1.0 / (gx.width(a1) * gy.width(b1));
  d(a1, b) = -1.0 / (gx.width(a1) * gy.width(b));
  d(a, b1) = -1.0 / (gx.width(a) * gy.width(b1));
  return d;
}

/// The same pattern on unit cells.
inline GridField feasible_direction(std::size_t nx, std::size_t ny, std::size_t a, std::size_t a1, std::size_t b,
                                    std::size_t b1)
{
  return feasible_direction(Grid1D::uniform(0.0, static_cast<double>(nx), nx),
                            Grid1D::uniform(0.0, static_cast<double>(ny), ny), a, a1, b, b1);
}

/// Euclidean projection onto grids with zero row and column sums.
inline GridField double_center(const GridField& g)
{
  const std::size_t nx = g.nx();
  const std::size_t ny = g.ny();
  std::vector<double> r(nx, 0.0);
  std::vector<double> c(ny, 0.0);
  double all = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      r[i] += g(i, j);
      c[j] += g(i, j);
      all += g(i, j);
    }
  }
  for (auto& v : r)
    v /= static_cast<double>(ny);
  for (auto& v : c)
    v /= static_cast<double>(nx);
  all /= static_cast<double>(nx * ny);
  GridField out(nx, ny);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j)
      out(i, j) = g(i, j) - r[i] - c[j] + all;
  return out;
}

inline double l2_norm(const GridField& g)
{
  double s = 0.0;
  for (double v : g.values())
    s += v * v;
  return std::sqrt(s);
}

/// Outcome of one descent run from one starting point.
struct StartResult
{
  GridField masses;
  std::vector<double> L_trace;
  std::vector<double> grad_norm_trace;
  std::size_t iterations = 0;
  std::string termination_reason;
  double max_marginal_error = 0.0;  ///< over every accepted iterate
  double L_final = 0.0;
};

namespace detail {

struct DescentContext
{
  const ReducedFunctional& problem;
  const SolverConfig& config;
  double grad_tol;
  double floor_mass;  ///< smallest cell mass
};

inline double floor_mass_for(const ReducedFunctional& problem)
{
  double a = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < problem.nx(); ++i)
    for (std::size_t j = 0; j < problem.ny(); ++j)
      a = std::min(a, problem.grid_x().width(i) * problem.grid_y().width(j));
  return kDensityFloor * a;
}

/// Projected gradient with floor-active cells held fixed: cells at the floor
/// whose descent direction would push them lower are excluded and the rest is
/// projected onto zero row and column sums by alternating centering.
inline GridField free_projected_gradient(const GridField& G, const GridField& m, double floor_mass)
{
  GridField D = double_center(G);
  std::vector<char> active(m.size(), 0);
  bool any = false;
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (m.values()[k] <= 2.0 * floor_mass && D.values()[k] > 0.0) {
      active[k] = 1;
      any = true;
    }
  }
  if (!any)
    return D;
  const std::size_t nx = m.nx();
  const std::size_t ny = m.ny();
  double scale = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    D.values()[k] = active[k] ? 0.0 : G.values()[k];
    scale = std::max(scale, std::abs(D.values()[k]));
  }
  for (int sweep = 0; sweep < 10'000; ++sweep) {
    double worst = 0.0;
    for (std::size_t i = 0; i < nx; ++i) {
      double s = 0.0;
      std::size_t free = 0;
      for (std::size_t j = 0; j < ny; ++j) {
        if (!active[i * ny + j]) {
          s += D(i, j);
          ++free;
        }
      }
      worst = std::max(worst, std::abs(s));
      if (free > 0)
        for (std::size_t j = 0; j < ny; ++j)
          if (!active[i * ny + j])
            D(i, j) -= s / static_cast<double>(free);
    }
    for (std::size_t j = 0; j < ny; ++j) {
      double s = 0.0;
      std::size_t free = 0;
      for (std::size_t i = 0; i < nx; ++i) {
        if (!active[i * ny + j]) {
          s += D(i, j);
          ++free;
        }
      }
      worst = std::max(worst, std::abs(s));
      if (free > 0)
        for (std::size_t i = 0; i < nx; ++i)
          if (!active[i * ny + j])
            D(i, j) -= s / static_cast<double>(free);
    }
    if (worst <= 1e-15 * std::max(1.0, scale))
      break;
  }
  return D;
}

/// m + s d, clipped at the floor and re-projected when clipping was needed.
inline GridField trial_point(const DescentContext& ctx, const GridField& m, const GridField& d, double s)
{
  GridField t(m.nx(), m.ny());
  bool clipped = false;
  for (std::size_t k = 0; k < t.size(); ++k) {
    double v = m.values()[k] + s * d.values()[k];
    if (v < ctx.floor_mass) {
      v = ctx.floor_mass;
      clipped = true;
    }
    t.values()[k] = v;
  }
  if (clipped)
    ipfp_masses(t, ctx.problem.row_mass(), ctx.problem.col_mass(), 100'000, 1e-13);
  return t;
}

inline StartResult projected_gradient(const DescentContext& ctx, GridField m)
{
  const auto& problem = ctx.problem;
  const auto& cfg = ctx.config;
  StartResult out;
  double L = problem.value(m);
  out.max_marginal_error = marginal_errors(m, problem.row_mass(), problem.col_mass()).max();
  GridField prev_m;
  GridField prev_D;
  double step = 0.0;
  out.termination_reason = termination::max_iters;
  for (std::size_t it = 0;; ++it) {
    const GridField G = problem.gradient(m);
    const GridField D = free_projected_gradient(G, m, ctx.floor_mass);
    const double gnorm = l2_norm(D);
    out.L_trace.push_back(L);
    out.grad_norm_trace.push_back(gnorm);
    if (gnorm < ctx.grad_tol) {
      out.termination_reason = termination::grad_tol;
      break;
    }
    if (it == cfg.max_iters)
      break;

    // Barzilai-Borwein trial step, or a step moving the largest cell change
    // to a tenth of the mean cell mass on the first iteration.
    double trial = 0.0;
    if (it > 0) {
      double sy = 0.0;
      double ss = 0.0;
      for (std::size_t k = 0; k < m.size(); ++k) {
        const double dm = m.values()[k] - prev_m.values()[k];
        const double dg = D.values()[k] - prev_D.values()[k];
        ss += dm * dm;
        sy += dm * dg;
      }
      if (sy > 0.0)
        trial = ss / sy;
    }
    if (!(trial > 0.0) || !std::isfinite(trial)) {
      double dmax = 0.0;
      for (double v : D.values())
        dmax = std::max(dmax, std::abs(v));
      trial = step > 0.0 ? step : 0.1 / (static_cast<double>(m.size()) * dmax);
    }

    bool accepted = false;
    GridField next;
    double L_next = L;
    for (int bt = 0; bt < 80; ++bt, trial *= cfg.backtrack) {
      GridField d(m.nx(), m.ny());
      for (std::size_t k = 0; k < d.size(); ++k)
        d.values()[k] = -D.values()[k];
      next = trial_point(ctx, m, d, trial);
      L_next = problem.value(next);
      double decrease = 0.0;  // <G, next - m>, negative along descent
      for (std::size_t k = 0; k < m.size(); ++k)
        decrease += G.values()[k] * (next.values()[k] - m.values()[k]);
      if (L_next <= L + cfg.armijo * decrease && L_next <= L) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (it == 0)
        throw NoDescent("line search failed at the first iterate; gradient and objective disagree");
      out.termination_reason = termination::line_search;
      break;
    }
    prev_m = std::move(m);
    prev_D = D;
    m = std::move(next);
    step = trial;
    out.iterations = it + 1;
    out.max_marginal_error =
        std::max(out.max_marginal_error, marginal_errors(m, problem.row_mass(), problem.col_mass()).max());
    const double change = L - L_next;
    L = L_next;
    if (change < cfg.l_change_tol) {
      out.L_trace.push_back(L);
      out.grad_norm_trace.push_back(l2_norm(free_projected_gradient(problem.gradient(m), m, ctx.floor_mass)));
      out.termination_reason = termination::l_change;
      break;
    }
  }
  out.L_final = L;
  out.masses = std::move(m);
  return out;
}

/// Golden-section minimum of phi on [lo, hi]; returns (argmin, value).
template <typename Fn>
std::pair<double, double> golden_section(Fn&& phi, double lo, double hi, int iters)
{
  constexpr double r = 0.6180339887498949;
  double x1 = hi - r * (hi - lo);
  double x2 = lo + r * (hi - lo);
  double f1 = phi(x1);
  double f2 = phi(x2);
  for (int k = 0; k < iters; ++k) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - r * (hi - lo);
      f1 = phi(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + r * (hi - lo);
      f2 = phi(x2);
    }
  }
  return f1 <= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

inline StartResult rectangle_cd(const DescentContext& ctx, GridField m)
{
  const auto& problem = ctx.problem;
  const auto& cfg = ctx.config;
  const std::size_t nx = m.nx();
  const std::size_t ny = m.ny();
  StartResult out;
  double L = problem.value(m);
  out.max_marginal_error = marginal_errors(m, problem.row_mass(), problem.col_mass()).max();
  out.termination_reason = termination::max_iters;
  for (std::size_t sweep = 0;; ++sweep) {
    const double gnorm = l2_norm(free_projected_gradient(problem.gradient(m), m, ctx.floor_mass));
    out.L_trace.push_back(L);
    out.grad_norm_trace.push_back(gnorm);
    if (gnorm < ctx.grad_tol) {
      out.termination_reason = termination::grad_tol;
      break;
    }
    if (sweep == cfg.max_iters)
      break;
    const double L_start = L;
    for (std::size_t a = 0; a < nx; ++a) {
      for (std::size_t a1 = a + 1; a1 < nx; ++a1) {
        for (std::size_t b = 0; b < ny; ++b) {
          for (std::size_t b1 = b + 1; b1 < ny; ++b1) {
            // positive s moves mass onto (a,b), (a1,b1)
            const double hi = std::min(m(a1, b), m(a, b1)) - ctx.floor_mass;
            const double lo = -(std::min(m(a, b), m(a1, b1)) - ctx.floor_mass);
            if (!(hi > lo))
              continue;
            // only rows a, a1 and columns b, b1 change along the line
            auto local = [&](const GridField& t) {
              return problem.row_term(t, a) + problem.row_term(t, a1) + problem.col_term(t, b) +
                     problem.col_term(t, b1);
            };
            const double base = local(m);
            GridField t = m;
            auto along = [&](double s) {
              t(a, b) = m(a, b) + s;
              t(a1, b1) = m(a1, b1) + s;
              t(a1, b) = m(a1, b) - s;
              t(a, b1) = m(a, b1) - s;
              return local(t);
            };
            auto [s, Ls] = golden_section(along, lo, hi, 50);
            if (Ls < base) {
              m(a, b) += s;
              m(a1, b1) += s;
              m(a1, b) -= s;
              m(a, b1) -= s;
            }
          }
        }
      }
    }
    L = problem.value(m);
    out.iterations = sweep + 1;
    out.max_marginal_error =
        std::max(out.max_marginal_error, marginal_errors(m, problem.row_mass(), problem.col_mass()).max());
    if (L_start - L < cfg.l_change_tol) {
      out.L_trace.push_back(L);
      out.grad_norm_trace.push_back(l2_norm(free_projected_gradient(problem.gradient(m), m, ctx.floor_mass)));
      out.termination_reason = termination::l_change;
      break;
    }
  }
  out.L_final = L;
  out.masses = std::move(m);
  return out;
}

} // namespace detail

/// Descent from a given feasible starting mass grid.
inline StartResult descend(const ReducedFunctional& problem, const SolverConfig& config, GridField start)
{
  const double grad_tol =
      config.grad_tol >= 0.0 ? config.grad_tol : 1e-6 * static_cast<double>(problem.nx() * problem.ny());
  detail::DescentContext ctx{problem, config, grad_tol, detail::floor_mass_for(problem)};
  return config.scheme == Scheme::projected_gradient ? detail::projected_gradient(ctx, std::move(start))
                                                     : detail::rectangle_cd(ctx, std::move(start));
}

struct StartSummary
{
  double L_final = 0.0;
  std::size_t iterations = 0;
  std::string termination_reason;
};

struct SolveReport
{
  explicit SolveReport(CouplingDensity p) : p_star(std::move(p)) {}

  CouplingDensity p_star;
  std::vector<double> L_trace;
  std::vector<double> grad_norm_trace;
  double el_residual_final = 0.0;
  std::size_t iterations = 0;
  std::string termination_reason;
  double max_marginal_error = 0.0;  ///< worst marginal L1 error over all iterates of all starts
  std::size_t best_start = 0;
  std::vector<StartSummary> starts;
  /// Fraction of starts ending within 1e-3 of the best L.
  double multistart_agreement = 1.0;
  bool nonconvexity_flag = false;

  double L_final() const { return L_trace.empty() ? 0.0 : L_trace.back(); }
  bool converged() const { return termination_reason != termination::max_iters; }
};

/// Starting mass grids: the first follows config.init, the rest are random.
inline std::vector<GridField> starting_points(const ReducedFunctional& problem, const SolverConfig& config)
{
  Xoshiro256StarStar rng(config.seed);
  const auto& r = problem.row_mass();
  const auto& c = problem.col_mass();
  GridField indep(problem.nx(), problem.ny());
  for (std::size_t i = 0; i < indep.nx(); ++i)
    for (std::size_t j = 0; j < indep.ny(); ++j)
      indep(i, j) = r[i] * c[j];
  const std::size_t n = std::max<std::size_t>(1, config.multistart);
  std::vector<GridField> starts;
  starts.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    GridField m = indep;
    if (k > 0 || config.init == InitKind::random) {
      for (double& v : m.values())
        v *= 1.0 + config.perturbation * rng.uniform(-1.0, 1.0);
    }
    ipfp_masses(m, r, c, 100'000, 1e-13);
    starts.push_back(std::move(m));
  }
  return starts;
}

inline SolveReport solve(const DiscreteDensity2D& f, const DiscreteDensity2D& f_tilde, const SolverConfig& config = {})
{
  const ReducedFunctional problem(f, f_tilde, config.quadrature);
  auto starts = starting_points(problem, config);
  std::vector<StartResult> results(starts.size());
  const std::size_t threads = std::clamp<std::size_t>(config.threads, 1, starts.size());
  if (threads == 1) {
    for (std::size_t k = 0; k < starts.size(); ++k)
      results[k] = descend(problem, config, std::move(starts[k]));
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t k = t; k < starts.size(); k += threads)
            results[k] = descend(problem, config, std::move(starts[k]));
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool)
      th.join();
    for (auto& e : errors)
      if (e)
        std::rethrow_exception(e);
  }

  std::size_t best = 0;
  for (std::size_t k = 1; k < results.size(); ++k)
    if (results[k].L_final < results[best].L_final)
      best = k;

  auto [f1, unused_fx2] = marginals_2d(f);
  auto [unused_ft1, f2] = marginals_2d(f_tilde);
  auto p_star = CouplingDensity::from_masses(results[best].masses, f1, f2);
  SolveReport rep(std::move(p_star));
  rep.L_trace = results[best].L_trace;
  rep.grad_norm_trace = results[best].grad_norm_trace;
  rep.iterations = results[best].iterations;
  rep.termination_reason = results[best].termination_reason;
  rep.best_start = best;
  std::size_t agree = 0;
  for (const auto& r : results) {
    rep.max_marginal_error = std::max(rep.max_marginal_error, r.max_marginal_error);
    rep.starts.push_back({r.L_final, r.iterations, r.termination_reason});
    if (r.L_final - results[best].L_final <= 1e-3)
      ++agree;
  }
  rep.multistart_agreement = static_cast<double>(agree) / static_cast<double>(results.size());
  rep.nonconvexity_flag = rep.multistart_agreement < 0.8;
  if (rep.p_star.nx() >= 2 && rep.p_star.ny() >= 2)
    rep.el_residual_final = euler_lagrange_residual(f, f_tilde, rep.p_star).interior_l2;
  return rep;
}

} // namespace planar_mk
