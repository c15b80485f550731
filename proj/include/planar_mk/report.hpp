#pragma once

// JSON for solver configs and run reports.
//
// Reports carry "schema": 1. Wall-clock numbers live only under the
// top-level "timing" key, so two runs with the same inputs and seed compare
// equal once that key is dropped.

#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "planar_mk/errors.hpp"
#include "planar_mk/optimizer.hpp"
#include "planar_mk/reduced_functional.hpp"

namespace planar_mk {

inline constexpr int kReportSchema = 1;

inline const char* to_string(InitKind k)
{
  return k == InitKind::independent ? "independent" : "random";
}

inline const char* to_string(Scheme s)
{
  return s == Scheme::projected_gradient ? "projected_gradient" : "rectangle_cd";
}

inline const char* to_string(Quadrature q)
{
  return q == Quadrature::exact ? "exact" : "midpoint";
}

namespace detail {

template <typename T>
T config_number(const nlohmann::json& v, const std::string& key)
{
  if (!v.is_number())
    throw ParseError("config key \"" + key + "\" must be a number");
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ParseError("config key \"" + key + "\" must be a nonnegative integer");
  }
  return v.get<T>();
}

} // namespace detail

/// Reads {init, scheme, quadrature, grad_tol, max_iters, multistart, seed,
/// l_change_tol, perturbation}; every key is optional, unknown keys are errors.
inline SolverConfig solver_config_from_json(const nlohmann::json& doc)
{
  if (!doc.is_object())
    throw ParseError("solver config must be a JSON object");
  SolverConfig c;
  for (const auto& [key, v] : doc.items()) {
    if (key == "init") {
      const auto s = v.is_string() ? v.get<std::string>() : std::string();
      if (s == "independent")
        c.init = InitKind::independent;
      else if (s == "random")
        c.init = InitKind::random;
      else
        throw ParseError("config key \"init\" must be \"independent\" or \"random\"");
    } else if (key == "scheme") {
      const auto s = v.is_string() ? v.get<std::string>() : std::string();
      if (s == "projected_gradient")
        c.scheme = Scheme::projected_gradient;
      else if (s == "rectangle_cd")
        c.scheme = Scheme::rectangle_cd;
      else
        throw ParseError("config key \"scheme\" must be \"projected_gradient\" or \"rectangle_cd\"");
    } else if (key == "quadrature") {
      const auto s = v.is_string() ? v.get<std::string>() : std::string();
      if (s == "exact")
        c.quadrature = Quadrature::exact;
      else if (s == "midpoint")
        c.quadrature = Quadrature::midpoint;
      else
        throw ParseError("config key \"quadrature\" must be \"exact\" or \"midpoint\"");
    } else if (key == "grad_tol") {
      c.grad_tol = detail::config_number<double>(v, key);
    } else if (key == "max_iters") {
      c.max_iters = detail::config_number<std::size_t>(v, key);
    } else if (key == "multistart") {
      c.multistart = detail::config_number<std::size_t>(v, key);
      if (c.multistart == 0)
        throw ParseError("config key \"multistart\" must be at least 1");
    } else if (key == "seed") {
      c.seed = detail::config_number<std::uint64_t>(v, key);
    } else if (key == "l_change_tol") {
      c.l_change_tol = detail::config_number<double>(v, key);
    } else if (key == "perturbation") {
      c.perturbation = detail::config_number<double>(v, key);
      if (!(c.perturbation >= 0.0 && c.perturbation < 1.0))
        throw ParseError("config key \"perturbation\" must lie in [0, 1)");
    } else {
      throw ParseError("unknown config key \"" + key + "\"");
    }
  }
  return c;
}

/// The effective settings; threads is left out because it never changes results.
inline nlohmann::json solver_config_to_json(const SolverConfig& c, std::size_t cells)
{
  return {{"init", to_string(c.init)},
          {"scheme", to_string(c.scheme)},
          {"quadrature", to_string(c.quadrature)},
          {"grad_tol", c.grad_tol >= 0.0 ? c.grad_tol : 1e-6 * static_cast<double>(cells)},
          {"max_iters", c.max_iters},
          {"multistart", c.multistart},
          {"seed", c.seed},
          {"l_change_tol", c.l_change_tol},
          {"perturbation", c.perturbation}};
}

/// NaN and infinities are not JSON; they become null.
inline nlohmann::json finite_or_null(double v)
{
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline nlohmann::json solve_report_json(const SolveReport& r, const SolverConfig& config)
{
  nlohmann::json starts = nlohmann::json::array();
  for (const auto& s : r.starts)
    starts.push_back({{"L_final", s.L_final}, {"iterations", s.iterations}, {"termination_reason", s.termination_reason}});
  const auto errs = r.p_star.marginal_errors();
  return {{"schema", kReportSchema},
          {"config", solver_config_to_json(config, r.p_star.nx() * r.p_star.ny())},
          {"grid", {{"nx", r.p_star.nx()}, {"ny", r.p_star.ny()}}},
          {"L_final", r.L_final()},
          {"L_trace", r.L_trace},
          {"grad_norm_trace", r.grad_norm_trace},
          {"iterations", r.iterations},
          {"termination_reason", r.termination_reason},
          {"converged", r.converged()},
          {"el_residual_interior_l2", finite_or_null(r.el_residual_final)},
          {"marginal_errors",
           {{"row_l1", errs.row}, {"col_l1", errs.col}, {"max_over_iterates", r.max_marginal_error}}},
          {"multistart",
           {{"starts", starts},
            {"best_start", r.best_start},
            {"agreement", r.multistart_agreement},
            {"nonconvexity_flag", r.nonconvexity_flag}}}};
}

} // namespace planar_mk
