#pragma once

// Numerical limit checkers for the two averaging lemmas behind the
// Euler-Lagrange equation:
//
//   (1/eps^2) int_[a,a+eps]x[b,b+eps] beta            -> beta(a, b)
//   (1/(eps^2 (a1-a)(b1-b))) int beta * eta_eps       -> beta_xy(a, b)
//
// where eta_eps is the four-square +/- indicator pattern at (a,b), (a1,b1)
// [+] and (a1,b), (a,b1) [-]. Each checker walks a decreasing step
// sequence, extrapolates the limit and estimates the convergence order.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "planar_mk/errors.hpp"

namespace planar_mk {

using ScalarField = std::function<double(double, double)>;

struct ConvergenceReport
{
  std::vector<double> steps;   ///< the step driving the limit, decreasing
  std::vector<double> values;  ///< the quotient at each step
  double extrapolated = 0.0;   ///< polynomial extrapolation of values to step 0
  double reference = 0.0;      ///< independent value of the limit
  double error = 0.0;          ///< |extrapolated - reference|
  /// Least-squares slope of log|value - reference| against log step; NaN
  /// when every value already matches the reference to rounding.
  double observed_order = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

// 5-point Gauss-Legendre on [-1, 1].
inline constexpr std::array<double, 5> kGaussNodes = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                                      0.5384693101056831, 0.9061798459386640};
inline constexpr std::array<double, 5> kGaussWeights = {0.2369268850561891, 0.4786286704993665,
                                                        0.5688888888888889, 0.4786286704993665,
                                                        0.2369268850561891};

/// Mean of beta over the square [x0, x0+eps] x [y0, y0+eps].
inline double square_mean(const ScalarField& beta, double x0, double y0, double eps)
{
  const double hx = 0.5 * eps;
  double s = 0.0;
  for (std::size_t p = 0; p < kGaussNodes.size(); ++p)
    for (std::size_t q = 0; q < kGaussNodes.size(); ++q)
      s += kGaussWeights[p] * kGaussWeights[q] * beta(x0 + hx * (1.0 + kGaussNodes[p]), y0 + hx * (1.0 + kGaussNodes[q]));
  return 0.25 * s;
}

/// Neville's scheme evaluated at 0.
inline double extrapolate_to_zero(const std::vector<double>& h, const std::vector<double>& v)
{
  std::vector<double> p = v;
  const std::size_t n = v.size();
  for (std::size_t k = 1; k < n; ++k)
    for (std::size_t i = 0; i + k < n; ++i)
      p[i] = (h[i + k] * p[i] - h[i] * p[i + 1]) / (h[i + k] - h[i]);
  return p[0];
}

inline double log_log_slope(const std::vector<double>& h, const std::vector<double>& v, double reference)
{
  const double noise = 1e-12 * std::max(1.0, std::abs(reference));
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double e = std::abs(v[k] - reference);
    if (e > noise) {
      lx.push_back(std::log(h[k]));
      ly.push_back(std::log(e));
    }
  }
  if (lx.size() < 2)
    return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= static_cast<double>(lx.size());
  my /= static_cast<double>(lx.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  return sxy / sxx;
}

inline ConvergenceReport finish_report(std::vector<double> steps, std::vector<double> values, double reference)
{
  ConvergenceReport r;
  r.extrapolated = extrapolate_to_zero(steps, values);
  r.reference = reference;
  r.error = std::abs(r.extrapolated - reference);
  r.observed_order = log_log_slope(steps, values, reference);
  r.steps = std::move(steps);
  r.values = std::move(values);
  return r;
}

} // namespace detail

/// Square averages of beta at (a, b) over the given eps sequence.
inline ConvergenceReport lemma1_checker(const ScalarField& beta, double a, double b,
                                        const std::vector<double>& eps_sequence)
{
  if (eps_sequence.size() < 2)
    throw InvalidInput("lemma1_checker needs at least two steps");
  std::vector<double> values;
  values.reserve(eps_sequence.size());
  for (std::size_t k = 0; k < eps_sequence.size(); ++k) {
    const double eps = eps_sequence[k];
    if (!(eps > 0.0) || (k > 0 && !(eps < eps_sequence[k - 1])))
      throw InvalidInput("lemma1_checker: eps sequence must be positive and decreasing");
    values.push_back(detail::square_mean(beta, a, b, eps));
  }
  return detail::finish_report(eps_sequence, std::move(values), beta(a, b));
}

/// Nested-limit schedule for the mixed-derivative quotient:
/// b1 - b = initial * ratio^k, a1 - a = theta (b1 - b), eps = theta (a1 - a).
struct Lemma2Schedule
{
  double theta = 0.1;
  double initial = 0.05;
  double ratio = 0.5;
  std::size_t levels = 6;
  double fd_step = 1e-4;  ///< step of the independent central-difference beta_xy
};

/// The eta_eps quotient at one (eps, a1, b1).
inline double lemma2_quotient(const ScalarField& beta, double a, double b, double a1, double b1, double eps)
{
  using detail::square_mean;
  // square means already carry the 1/eps^2
  const double s = (square_mean(beta, a, b, eps) + square_mean(beta, a1, b1, eps)) -
                   (square_mean(beta, a1, b, eps) + square_mean(beta, a, b1, eps));
  return s / ((a1 - a) * (b1 - b));
}

/// Central-difference beta_xy, independent of the eta_eps construction.
inline double finite_difference_beta_xy(const ScalarField& beta, double a, double b, double step)
{
  return (beta(a + step, b + step) - beta(a + step, b - step) - beta(a - step, b + step) +
          beta(a - step, b - step)) /
         (4.0 * step * step);
}

inline ConvergenceReport lemma2_checker(const ScalarField& beta, double a, double b,
                                        const Lemma2Schedule& schedule = {})
{
  if (schedule.levels < 2 || !(schedule.theta > 0.0 && schedule.theta < 1.0) ||
      !(schedule.ratio > 0.0 && schedule.ratio < 1.0) || !(schedule.initial > 0.0))
    throw InvalidInput("lemma2_checker: invalid schedule");
  std::vector<double> steps;
  std::vector<double> values;
  double db = schedule.initial;
  for (std::size_t k = 0; k < schedule.levels; ++k, db *= schedule.ratio) {
    const double da = schedule.theta * db;
    const double eps = schedule.theta * da;
    steps.push_back(db);
    values.push_back(lemma2_quotient(beta, a, b, a + da, b + db, eps));
  }
  return detail::finish_report(std::move(steps), std::move(values),
                               finite_difference_beta_xy(beta, a, b, schedule.fd_step));
}

/// A test function with its analytic limit and the convergence order the
/// quotients should show (NaN when every quotient is already exact).
struct LemmaCase
{
  std::string name;
  ScalarField beta;
  double a = 0.0;
  double b = 0.0;
  double limit = 0.0;
  double expected_order = std::numeric_limits<double>::quiet_NaN();
};

/// Square-average cases: the limit is beta(a, b) and the error is O(eps).
inline std::vector<LemmaCase> lemma1_cases()
{
  return {
      {"one", [](double, double) { return 1.0; }, 0.3, 0.7, 1.0, std::numeric_limits<double>::quiet_NaN()},
      {"x+y", [](double x, double y) { return x + y; }, 0.0, 0.0, 0.0, 1.0},
      {"sin(x)cos(y)", [](double x, double y) { return std::sin(x) * std::cos(y); }, 0.3, 0.7,
       std::sin(0.3) * std::cos(0.7), 1.0},
  };
}

/// Mixed-derivative cases: the limit is beta_xy(a, b) and the error is O(b1 - b).
inline std::vector<LemmaCase> lemma2_cases()
{
  return {
      {"xy", [](double x, double y) { return x * y; }, 0.3, 0.4, 1.0, std::numeric_limits<double>::quiet_NaN()},
      {"x^2 y^2", [](double x, double y) { return x * x * y * y; }, 0.5, 0.5, 1.0, 1.0},
      {"exp(x+2y)", [](double x, double y) { return std::exp(x + 2.0 * y); }, 0.2, 0.1, 2.0 * std::exp(0.4), 1.0},
  };
}

/// eps = 1e-2 / 2^k for k = 0..6.
inline std::vector<double> default_eps_sequence()
{
  std::vector<double> eps;
  for (int k = 0; k <= 6; ++k)
    eps.push_back(1e-2 * std::ldexp(1.0, -k));
  return eps;
}

struct LemmaVerdict
{
  double error = 0.0;  ///< |extrapolated - analytic limit|
  bool order_ok = false;
  bool pass = false;
};

/// Cases with a finite expected order must show it within order_tol; exact
/// cases have no order to measure, so every quotient must match the limit.
inline LemmaVerdict judge(const LemmaCase& c, const ConvergenceReport& r, double tol = 1e-4, double order_tol = 0.3)
{
  LemmaVerdict v;
  v.error = std::abs(r.extrapolated - c.limit);
  if (std::isnan(c.expected_order)) {
    double worst = 0.0;
    for (double x : r.values)
      worst = std::max(worst, std::abs(x - c.limit));
    v.order_ok = worst <= tol;
  } else {
    v.order_ok = std::abs(r.observed_order - c.expected_order) <= order_tol;
  }
  v.pass = v.error <= tol && v.order_ok;
  return v;
}

} // namespace planar_mk
