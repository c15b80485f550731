// planar_mk: optimal planar couplings by dimension reduction.
//
// Exit codes: 0 ok, 1 bad input or I/O, 2 solver hit max_iters,
// 3 oracle size limit, 4 a comparison or check failed its tolerance.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "planar_mk.hpp"

using namespace planar_mk;
using nlohmann::json;

namespace {

enum Exit : int
{
  kOk = 0,
  kError = 1,
  kMaxIters = 2,
  kSizeLimit = 3,
  kCheckFailed = 4,
};

struct Options
{
  std::string input_f;
  std::string input_g;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
  std::string coupling_path;
  std::string instance_path;
  std::size_t subdivision = 1;
  std::size_t max_variables = kDefaultOracleVariableLimit;
};

std::size_t thread_budget()
{
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PLANAR_MK_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1)
      throw ParseError(std::string("PLANAR_MK_THREADS must be a positive integer, got \"") + env + "\"");
    n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
  }
  return n;
}

json read_json_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": JSON parse error: " + e.what());
  }
}

SolverConfig load_config(const Options& o)
{
  SolverConfig c = o.config_path.empty() ? SolverConfig{} : solver_config_from_json(read_json_file(o.config_path));
  if (o.seed)
    c.seed = *o.seed;
  c.threads = thread_budget();
  return c;
}

std::filesystem::path prepare_out_dir(const std::string& dir)
{
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec)
    throw ParseError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

void write_json(const std::filesystem::path& path, const json& doc)
{
  std::ofstream out(path);
  if (!out)
    throw ParseError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

void require_inputs(const Options& o)
{
  if (o.input_f.empty() || o.input_g.empty())
    throw ParseError("--input-f and --input-g are required");
}

double per_axis_w2_sum(const DiscreteDensity2D& f, const DiscreteDensity2D& ft)
{
  auto [f1, f2] = marginals_2d(f);
  auto [g1, g2] = marginals_2d(ft);
  constexpr std::size_t n_quad = 100'000;
  return w2_squared_1d(build_cdf(f1), build_cdf(g1), n_quad) + w2_squared_1d(build_cdf(f2), build_cdf(g2), n_quad);
}

CouplingDensity independent_coupling(const DiscreteDensity2D& f, const DiscreteDensity2D& ft)
{
  auto [f1, unused_f2] = marginals_2d(f);
  auto [unused_g1, g2] = marginals_2d(ft);
  return CouplingDensity::independent(std::move(f1), std::move(g2));
}

double elapsed_seconds(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_solve(const Options& o)
{
  require_inputs(o);
  const auto f = read_density_2d(o.input_f);
  const auto ft = read_density_2d(o.input_g);
  const SolverConfig config = load_config(o);
  const auto out = prepare_out_dir(o.out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  const SolveReport rep = solve(f, ft, config);
  const double solve_time = elapsed_seconds(t0);

  const auto& p = rep.p_star;
  const auto& gx = p.density().grid_x();
  const auto& gy = p.density().grid_y();
  const auto maps = build_maps(f, ft, p);
  const auto state = variational_state(f, ft, p, config.quadrature);
  write_grid_csv((out / "p_star.csv").string(), gx, gy, p.density().values());
  write_grid_csv((out / "g.csv").string(), gx, gy, maps.g_values);
  write_grid_csv((out / "h.csv").string(), gx, gy, maps.h_values);
  write_grid_csv((out / "gradient.csv").string(), gx, gy, state.grad);
  write_grid_csv((out / "el_residual.csv").string(), gx, gy, state.el_residual);

  json doc = solve_report_json(rep, config);
  doc["per_axis_w2_sum"] = per_axis_w2_sum(f, ft);
  if (p.nx() >= 2 && p.ny() >= 2)
    doc["el_residual_independent"] = euler_lagrange_residual(f, ft, independent_coupling(f, ft)).interior_l2;
  doc["pushforward_l1"] = {{"x", pushforward_check(f, p, maps.g_values, Axis::x).l1_deviation},
                           {"y", pushforward_check(ft, p, maps.h_values, Axis::y).l1_deviation}};
  doc["timing"] = {{"solve_seconds", solve_time}, {"total_seconds", elapsed_seconds(t0)}};
  write_json(out / "report.json", doc);

  std::cout << "L_final " << std::setprecision(10) << rep.L_final() << "  iterations " << rep.iterations
            << "  termination " << rep.termination_reason << '\n';
  return rep.converged() ? kOk : kMaxIters;
}

TransportInstance read_instance(const std::string& path)
{
  const json doc = read_json_file(path);
  auto numbers = [&](const char* key) {
    if (!doc.contains(key) || !doc[key].is_array())
      throw ParseError(path + ": \"" + key + "\" must be an array");
    std::vector<double> v;
    for (const auto& x : doc[key]) {
      if (!x.is_number())
        throw ParseError(path + ": \"" + key + "\" must hold numbers");
      v.push_back(x.get<double>());
    }
    return v;
  };
  TransportInstance inst{numbers("supply"), numbers("demand"), GridField()};
  if (!doc.contains("cost") || !doc["cost"].is_array() || doc["cost"].size() != inst.supply.size())
    throw ParseError(path + ": \"cost\" must have one row per supply");
  inst.cost = GridField(inst.supply.size(), inst.demand.size());
  for (std::size_t i = 0; i < inst.supply.size(); ++i) {
    const auto& row = doc["cost"][i];
    if (!row.is_array() || row.size() != inst.demand.size())
      throw ParseError(path + ": cost row " + std::to_string(i) + " must have one entry per demand");
    for (std::size_t j = 0; j < inst.demand.size(); ++j) {
      if (!row[j].is_number())
        throw ParseError(path + ": cost entries must be numbers");
      inst.cost(i, j) = row[j].get<double>();
    }
  }
  return inst;
}

int cmd_oracle(const Options& o)
{
  const auto out = prepare_out_dir(o.out_dir);
  json doc = {{"schema", kReportSchema}};
  const auto t0 = std::chrono::steady_clock::now();
  if (!o.instance_path.empty()) {
    const auto inst = read_instance(o.instance_path);
    if (inst.supply.size() * inst.demand.size() > o.max_variables)
      throw SizeLimitExceeded("instance has " + std::to_string(inst.supply.size() * inst.demand.size()) +
                              " LP variables, limit is " + std::to_string(o.max_variables));
    const auto plan = solve_lp(inst);
    doc["objective"] = plan.objective;
    doc["pivots"] = plan.pivots;
    doc["flows"] = json::array();
    for (std::size_t i = 0; i < plan.flows.nx(); ++i)
      doc["flows"].push_back(std::vector<double>(plan.flows.row(i).begin(), plan.flows.row(i).end()));
    std::cout << "objective " << std::setprecision(12) << plan.objective << '\n';
  } else {
    require_inputs(o);
    const auto f = read_density_2d(o.input_f);
    const auto ft = read_density_2d(o.input_g);
    const auto sol = solve_full_2d(f, ft, o.max_variables, o.subdivision);
    doc["objective"] = sol.cost;
    doc["pivots"] = sol.plan.pivots;
    doc["subdivision"] = o.subdivision;
    doc["variables"] = sol.source.mass.size() * sol.target.mass.size();
    doc["per_axis_w2_sum"] = per_axis_w2_sum(f, ft);
    std::ofstream plan(out / "oracle_plan.csv");
    plan << "source_x,source_y,target_x,target_y,mass\n" << std::setprecision(17);
    for (std::size_t a = 0; a < sol.plan.flows.nx(); ++a)
      for (std::size_t b = 0; b < sol.plan.flows.ny(); ++b)
        if (sol.plan.flows(a, b) > 0.0)
          plan << sol.source.x[a] << ',' << sol.source.y[a] << ',' << sol.target.x[b] << ',' << sol.target.y[b]
               << ',' << sol.plan.flows(a, b) << '\n';
    std::cout << "oracle optimum " << std::setprecision(12) << sol.cost << '\n';
  }
  doc["timing"] = {{"total_seconds", elapsed_seconds(t0)}};
  write_json(out / "oracle.json", doc);
  return kOk;
}

int cmd_check_el(const Options& o)
{
  require_inputs(o);
  const auto f = read_density_2d(o.input_f);
  const auto ft = read_density_2d(o.input_g);
  const auto out = prepare_out_dir(o.out_dir);
  auto p = independent_coupling(f, ft);
  if (!o.coupling_path.empty()) {
    const auto d = read_density_2d(o.coupling_path);
    p = CouplingDensity(d, p.row_target(), p.col_target());
  }
  const auto el = euler_lagrange_residual(f, ft, p);
  const auto& gx = p.density().grid_x();
  const auto& gy = p.density().grid_y();
  write_grid_csv((out / "el_residual.csv").string(), gx, gy, el.residual);
  write_grid_csv((out / "bracket_x.csv").string(), gx, gy, el.bracket_x);
  write_grid_csv((out / "bracket_y.csv").string(), gx, gy, el.bracket_y);
  json doc = {{"schema", kReportSchema},
              {"coupling", o.coupling_path.empty() ? "independent" : o.coupling_path},
              {"interior_l2", el.interior_l2},
              {"boundary_deviation", el.boundary_deviation},
              {"L", evaluate_L(f, ft, p)}};
  int code = kOk;
  if (o.tolerance) {
    doc["tolerance"] = *o.tolerance;
    if (!(el.interior_l2 <= *o.tolerance))
      code = kCheckFailed;
  }
  write_json(out / "el.json", doc);
  std::cout << "interior L2 residual " << std::setprecision(10) << el.interior_l2 << "  boundary deviation "
            << el.boundary_deviation << '\n';
  return code;
}

int cmd_check_lemmas(const Options& o)
{
  const double tol = o.tolerance.value_or(1e-4);
  json rows = json::array();
  bool all_ok = true;
  auto record = [&](const char* lemma, const LemmaCase& c, const ConvergenceReport& r) {
    const auto verdict = judge(c, r, tol);
    const double err = verdict.error;
    const bool ok = verdict.pass;
    all_ok = all_ok && ok;
    rows.push_back({{"lemma", lemma},
                    {"function", c.name},
                    {"a", c.a},
                    {"b", c.b},
                    {"analytic", c.limit},
                    {"extrapolated", r.extrapolated},
                    {"independent_reference", r.reference},
                    {"error", err},
                    {"observed_order", finite_or_null(r.observed_order)},
                    {"expected_order", finite_or_null(c.expected_order)},
                    {"steps", r.steps},
                    {"values", r.values},
                    {"pass", ok}});
    std::cout << std::left << std::setw(8) << lemma << std::setw(14) << c.name << " limit " << std::setw(14)
              << std::setprecision(10) << r.extrapolated << " error " << std::setw(12) << std::setprecision(3)
              << err << " order " << std::setw(8) << r.observed_order << (ok ? "PASS" : "FAIL") << '\n';
  };
  for (const auto& c : lemma1_cases())
    record("lemma1", c, lemma1_checker(c.beta, c.a, c.b, default_eps_sequence()));
  for (const auto& c : lemma2_cases())
    record("lemma2", c, lemma2_checker(c.beta, c.a, c.b));
  const auto out = prepare_out_dir(o.out_dir);
  write_json(out / "lemmas.json", {{"schema", kReportSchema}, {"tolerance", tol}, {"cases", rows}});
  return all_ok ? kOk : kCheckFailed;
}

int cmd_compare(const Options& o)
{
  require_inputs(o);
  const auto f = read_density_2d(o.input_f);
  const auto ft = read_density_2d(o.input_g);
  const std::size_t sub4 = o.subdivision * o.subdivision * o.subdivision * o.subdivision;
  const std::size_t vars = f.nx() * f.ny() * ft.nx() * ft.ny() * sub4;
  if (vars > o.max_variables)
    throw SizeLimitExceeded("oracle needs " + std::to_string(vars) + " LP variables for " +
                            std::to_string(f.nx()) + "x" + std::to_string(f.ny()) + " by " +
                            std::to_string(ft.nx()) + "x" + std::to_string(ft.ny()) + " grids, limit is " +
                            std::to_string(o.max_variables));
  const SolverConfig config = load_config(o);
  const double tol = o.tolerance.value_or(1e-3);
  const auto out = prepare_out_dir(o.out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  const SolveReport rep = solve(f, ft, config);
  const double solve_time = elapsed_seconds(t0);
  const auto t1 = std::chrono::steady_clock::now();
  const auto oracle = solve_full_2d(f, ft, o.max_variables, o.subdivision);
  const double oracle_time = elapsed_seconds(t1);

  const double gap = std::abs(rep.L_final() - oracle.cost);
  const bool ok = gap <= tol;
  {
    std::ofstream csv(out / "comparison.csv");
    csv << "L_p_star,oracle_optimum,gap,el_residual\n"
        << std::setprecision(17) << rep.L_final() << ',' << oracle.cost << ',' << gap << ',' << rep.el_residual_final
        << '\n';
  }
  write_json(out / "comparison.json",
             {{"schema", kReportSchema},
              {"config", solver_config_to_json(config, rep.p_star.nx() * rep.p_star.ny())},
              {"L_p_star", rep.L_final()},
              {"oracle_optimum", oracle.cost},
              {"oracle_subdivision", o.subdivision},
              {"gap", gap},
              {"tolerance", tol},
              {"pass", ok},
              {"el_residual", finite_or_null(rep.el_residual_final)},
              {"termination_reason", rep.termination_reason},
              {"timing", {{"solve_seconds", solve_time}, {"oracle_seconds", oracle_time}}}});
  std::cout << "L(p*) " << std::setprecision(10) << rep.L_final() << "  oracle " << oracle.cost << "  gap "
            << gap << (ok ? "  within " : "  exceeds ") << tol << '\n';
  return ok ? kOk : kCheckFailed;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Optimal quadratic-cost couplings of planar densities by dimension reduction"};
  app.require_subcommand(1);
  Options o;

  auto inputs = [&](CLI::App* sub) {
    sub->add_option("--input-f", o.input_f, "source density (JSON or CSV grid)");
    sub->add_option("--input-g", o.input_g, "target density (JSON or CSV grid)");
  };
  auto out_dir = [&](CLI::App* sub) { sub->add_option("--out-dir", o.out_dir, "directory for artifacts"); };
  auto solver = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "solver config JSON");
    sub->add_option("--seed", o.seed, "overrides the config seed");
  };
  auto oracle_limits = [&](CLI::App* sub) {
    sub->add_option("--subdivision", o.subdivision, "split each cell into k x k oracle atoms")->check(CLI::PositiveNumber);
    sub->add_option("--max-variables", o.max_variables, "oracle LP size limit");
  };

  auto* solve_cmd = app.add_subcommand("solve", "minimize L over the transportation polytope");
  inputs(solve_cmd);
  solver(solve_cmd);
  out_dir(solve_cmd);

  auto* oracle_cmd = app.add_subcommand("oracle", "exact LP on a transport instance or a density pair");
  inputs(oracle_cmd);
  oracle_cmd->add_option("--instance", o.instance_path, "JSON {supply, demand, cost}");
  oracle_limits(oracle_cmd);
  out_dir(oracle_cmd);

  auto* el_cmd = app.add_subcommand("check-el", "Euler-Lagrange residual of a coupling");
  inputs(el_cmd);
  el_cmd->add_option("--coupling", o.coupling_path, "coupling density (default: independent)");
  el_cmd->add_option("--tolerance", o.tolerance, "fail when the interior residual exceeds this");
  out_dir(el_cmd);

  auto* lemma_cmd = app.add_subcommand("check-lemmas", "numerical limits of the averaging lemmas");
  lemma_cmd->add_option("--tolerance", o.tolerance, "allowed error of the extrapolated limit (default 1e-4)");
  out_dir(lemma_cmd);

  auto* compare_cmd = app.add_subcommand("compare", "reduced optimum against the exact planar LP");
  inputs(compare_cmd);
  solver(compare_cmd);
  compare_cmd->add_option("--tolerance", o.tolerance, "allowed |L(p*) - oracle| (default 1e-3)");
  oracle_limits(compare_cmd);
  out_dir(compare_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kError;
  }

  try {
    if (*solve_cmd)
      return cmd_solve(o);
    if (*oracle_cmd)
      return cmd_oracle(o);
    if (*el_cmd)
      return cmd_check_el(o);
    if (*lemma_cmd)
      return cmd_check_lemmas(o);
    return cmd_compare(o);
  } catch (const SizeLimitExceeded& e) {
    std::cerr << "size limit: " << e.what() << '\n';
    return kSizeLimit;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
}
