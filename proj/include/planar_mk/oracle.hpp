#pragma once

// Exact discrete optimal transport by the transportation simplex
// (northwest-corner start, u-v potentials, Bland's rule), and the two
// ground truths built on it: the full four-index planar problem between
// cell-center atoms, and the comonotone (quantile) plan in 1D.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "planar_mk/errors.hpp"
#include "planar_mk/grid_field.hpp"
#include "planar_mk/measures.hpp"

namespace planar_mk {

struct TransportInstance
{
  std::vector<double> supply;
  std::vector<double> demand;
  GridField cost;  ///< supply.size() x demand.size()
};

struct TransportPlan
{
  GridField flows;
  double objective = 0.0;
  std::size_t pivots = 0;

  std::size_t positive_flows(double tol = 0.0) const
  {
    return static_cast<std::size_t>(
        std::count_if(flows.values().begin(), flows.values().end(), [tol](double v) { return v > tol; }));
  }
};

/// Balance tolerance on supplies and demands.
inline constexpr double kBalanceTolerance = 1e-12;

namespace detail {

/// Spanning-tree basis of a transportation problem. Nodes 0..m-1 are rows,
/// m..m+k-1 columns; every basic cell is a tree edge.
class TransportBasis
{
public:
  TransportBasis(std::size_t m, std::size_t k)
    : m_(m), k_(k)
  {
  }

  void add(std::size_t i, std::size_t j, double flow)
  {
    cells_.push_back({i, j});
    flow_.push_back(flow);
  }

  std::size_t size() const noexcept { return cells_.size(); }
  std::size_t row(std::size_t e) const noexcept { return cells_[e].first; }
  std::size_t col(std::size_t e) const noexcept { return cells_[e].second; }
  double& flow(std::size_t e) noexcept { return flow_[e]; }
  double flow(std::size_t e) const noexcept { return flow_[e]; }

  void replace(std::size_t e, std::size_t i, std::size_t j, double flow)
  {
    cells_[e] = {i, j};
    flow_[e] = flow;
  }

  /// adjacency: for each node, the incident basic cells
  std::vector<std::vector<std::size_t>> adjacency() const
  {
    std::vector<std::vector<std::size_t>> adj(m_ + k_);
    for (std::size_t e = 0; e < cells_.size(); ++e) {
      adj[cells_[e].first].push_back(e);
      adj[m_ + cells_[e].second].push_back(e);
    }
    return adj;
  }

  /// Dual potentials u_i + v_j = c_ij on basic cells, u_0 = 0.
  void potentials(const GridField& cost, std::vector<double>& u, std::vector<double>& v) const
  {
    const auto adj = adjacency();
    std::vector<char> seen(m_ + k_, 0);
    std::vector<double> pot(m_ + k_, 0.0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t e : adj[node]) {
        const std::size_t i = cells_[e].first;
        const std::size_t j = cells_[e].second;
        const std::size_t other = node < m_ ? m_ + j : i;
        if (seen[other])
          continue;
        seen[other] = 1;
        // u_i + v_j = c_ij
        pot[other] = cost(i, j) - pot[node];
        stack.push_back(other);
      }
    }
    u.assign(pot.begin(), pot.begin() + static_cast<std::ptrdiff_t>(m_));
    v.assign(pot.begin() + static_cast<std::ptrdiff_t>(m_), pot.end());
  }

  /// Basic cells on the tree path from row node i to column node j, in order.
  std::vector<std::size_t> path(std::size_t i, std::size_t j) const
  {
    const auto adj = adjacency();
    const std::size_t target = m_ + j;
    std::vector<std::ptrdiff_t> via(m_ + k_, -1);
    std::vector<char> seen(m_ + k_, 0);
    std::vector<std::size_t> queue{i};
    seen[i] = 1;
    for (std::size_t q = 0; q < queue.size() && !seen[target]; ++q) {
      const std::size_t node = queue[q];
      for (std::size_t e : adj[node]) {
        const std::size_t other = node < m_ ? m_ + cells_[e].second : cells_[e].first;
        if (seen[other])
          continue;
        seen[other] = 1;
        via[other] = static_cast<std::ptrdiff_t>(e);
        queue.push_back(other);
      }
    }
    std::vector<std::size_t> edges;
    for (std::size_t node = target; node != i;) {
      const auto e = static_cast<std::size_t>(via[node]);
      edges.push_back(e);
      node = node < m_ ? m_ + cells_[e].second : cells_[e].first;
    }
    std::reverse(edges.begin(), edges.end());
    return edges;
  }

  /// Flows for given supplies and demands, by peeling leaves of the tree.
  void solve_flows(std::vector<double> s, std::vector<double> d)
  {
    auto adj = adjacency();
    std::vector<std::size_t> degree(m_ + k_);
    for (std::size_t n = 0; n < degree.size(); ++n)
      degree[n] = adj[n].size();
    std::vector<char> done(cells_.size(), 0);
    std::vector<std::size_t> leaves;
    for (std::size_t n = 0; n < degree.size(); ++n)
      if (degree[n] == 1)
        leaves.push_back(n);
    while (!leaves.empty()) {
      const std::size_t node = leaves.back();
      leaves.pop_back();
      if (degree[node] != 1)
        continue;
      std::size_t e = 0;
      for (std::size_t c : adj[node])
        if (!done[c])
          e = c;
      const std::size_t i = cells_[e].first;
      const std::size_t j = cells_[e].second;
      const double x = node < m_ ? s[i] : d[j];
      flow_[e] = x;
      s[i] -= x;
      d[j] -= x;
      done[e] = 1;
      degree[m_ + j] -= 1;
      degree[i] -= 1;
      const std::size_t other = node < m_ ? m_ + j : i;
      if (degree[other] == 1)
        leaves.push_back(other);
    }
  }

private:
  std::size_t m_;
  std::size_t k_;
  std::vector<std::pair<std::size_t, std::size_t>> cells_;
  std::vector<double> flow_;
};

} // namespace detail

/// Optimal plan of a balanced transportation problem.
inline TransportPlan solve_lp(const TransportInstance& instance)
{
  const std::size_t m = instance.supply.size();
  const std::size_t k = instance.demand.size();
  if (m == 0 || k == 0)
    throw InvalidInput("solve_lp: empty supply or demand");
  if (instance.cost.nx() != m || instance.cost.ny() != k)
    throw InvalidInput("solve_lp: cost matrix shape does not match supply and demand");
  double total_s = 0.0;
  double total_d = 0.0;
  for (double s : instance.supply) {
    if (!(s >= 0.0))
      throw InvalidInput("solve_lp: negative supply");
    total_s += s;
  }
  for (double d : instance.demand) {
    if (!(d >= 0.0))
      throw InvalidInput("solve_lp: negative demand");
    total_d += d;
  }
  if (std::abs(total_s - total_d) > kBalanceTolerance * std::max(1.0, total_s))
    throw UnbalancedInstance("solve_lp: supply " + std::to_string(total_s) + " != demand " +
                             std::to_string(total_d));

  // Perturbed supplies keep every basis nondegenerate; removed after the solve.
  const double delta = 1e-13 * std::max(1.0, total_s);
  std::vector<double> s = instance.supply;
  std::vector<double> d = instance.demand;
  for (std::size_t i = 0; i < m; ++i)
    s[i] += delta * static_cast<double>(i + 1);
  d[k - 1] += delta * static_cast<double>(m * (m + 1) / 2) + (total_s - total_d);

  detail::TransportBasis basis(m, k);
  {
    std::vector<double> rs = s;
    std::vector<double> rd = d;
    std::size_t i = 0;
    std::size_t j = 0;
    for (;;) {
      const double q = std::min(rs[i], rd[j]);
      basis.add(i, j, q);
      rs[i] -= q;
      rd[j] -= q;
      if (i + 1 == m && j + 1 == k)
        break;
      if (j + 1 == k || (i + 1 < m && rs[i] <= rd[j]))
        ++i;
      else
        ++j;
    }
  }

  double cmax = 0.0;
  for (double c : instance.cost.values())
    cmax = std::max(cmax, std::abs(c));
  const double tol = 1e-12 * std::max(1.0, cmax);

  std::vector<char> is_basic(m * k, 0);
  for (std::size_t e = 0; e < basis.size(); ++e)
    is_basic[basis.row(e) * k + basis.col(e)] = 1;

  std::vector<double> u;
  std::vector<double> v;
  std::size_t pivots = 0;
  for (;;) {
    basis.potentials(instance.cost, u, v);
    // Bland: lowest-index improving cell enters
    std::size_t enter = m * k;
    for (std::size_t c = 0; c < m * k; ++c) {
      if (is_basic[c])
        continue;
      const std::size_t i = c / k;
      const std::size_t j = c % k;
      if (instance.cost(i, j) - u[i] - v[j] < -tol) {
        enter = c;
        break;
      }
    }
    if (enter == m * k)
      break;
    const std::size_t ei = enter / k;
    const std::size_t ej = enter % k;
    const auto cycle = basis.path(ei, ej);
    // Cells at even positions along the path from row ei lose flow.
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < cycle.size(); p += 2)
      theta = std::min(theta, basis.flow(cycle[p]));
    std::size_t leave = cycle.size();
    std::size_t leave_index = m * k;
    for (std::size_t p = 0; p < cycle.size(); p += 2) {
      const std::size_t e = cycle[p];
      const std::size_t idx = basis.row(e) * k + basis.col(e);
      if (basis.flow(e) == theta && idx < leave_index) {
        leave = p;
        leave_index = idx;
      }
    }
    for (std::size_t p = 0; p < cycle.size(); ++p)
      basis.flow(cycle[p]) += (p % 2 == 0) ? -theta : theta;
    const std::size_t le = cycle[leave];
    is_basic[leave_index] = 0;
    is_basic[enter] = 1;
    basis.replace(le, ei, ej, theta);
    ++pivots;
  }

  basis.solve_flows(instance.supply, instance.demand);
  TransportPlan plan{GridField(m, k), 0.0, pivots};
  for (std::size_t e = 0; e < basis.size(); ++e)
    plan.flows(basis.row(e), basis.col(e)) = std::max(0.0, basis.flow(e));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j)
      plan.objective += plan.flows(i, j) * instance.cost(i, j);
  return plan;
}

/// Largest number of LP variables solve_full_2d accepts by default.
inline constexpr std::size_t kDefaultOracleVariableLimit = 10'000;

/// Cell-center atoms of a planar density: (x, y, mass).
struct PlanarAtoms
{
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> mass;
};

/// Each cell split into k x k equal sub-cells with an atom at every
/// sub-cell center; k = 1 gives the cell-center atoms.
inline PlanarAtoms cell_atoms(const DiscreteDensity2D& d, std::size_t k)
{
  if (k == 0)
    throw InvalidInput("cell_atoms: subdivision must be positive");
  PlanarAtoms a;
  const double share = 1.0 / static_cast<double>(k * k);
  for (std::size_t i = 0; i < d.nx(); ++i) {
    for (std::size_t j = 0; j < d.ny(); ++j) {
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t q = 0; q < k; ++q) {
          a.x.push_back(d.grid_x().edge(i) + (static_cast<double>(p) + 0.5) / static_cast<double>(k) * d.grid_x().width(i));
          a.y.push_back(d.grid_y().edge(j) + (static_cast<double>(q) + 0.5) / static_cast<double>(k) * d.grid_y().width(j));
          a.mass.push_back(d.mass(i, j) * share);
        }
      }
    }
  }
  return a;
}

inline PlanarAtoms cell_center_atoms(const DiscreteDensity2D& d)
{
  return cell_atoms(d, 1);
}

struct FullPlanarSolution
{
  TransportPlan plan;
  PlanarAtoms source;
  PlanarAtoms target;
  double cost = 0.0;
};

/// The four-index problem between cell-center atoms with squared Euclidean cost.
inline FullPlanarSolution solve_full_2d(const DiscreteDensity2D& f, const DiscreteDensity2D& f_tilde,
                                        std::size_t variable_limit = kDefaultOracleVariableLimit,
                                        std::size_t subdivision = 1)
{
  const std::size_t k4 = subdivision * subdivision * subdivision * subdivision;
  const std::size_t vars = f.nx() * f.ny() * f_tilde.nx() * f_tilde.ny() * k4;
  if (vars > variable_limit)
    throw SizeLimitExceeded("solve_full_2d: " + std::to_string(vars) + " LP variables exceed the limit of " +
                            std::to_string(variable_limit));
  FullPlanarSolution sol{{}, cell_atoms(f, subdivision), cell_atoms(f_tilde, subdivision), 0.0};
  TransportInstance inst{sol.source.mass, sol.target.mass,
                         GridField(sol.source.mass.size(), sol.target.mass.size())};
  // Densities are normalized to 1e-12; absorb the rounding into the last demand.
  const double ds = std::accumulate(inst.supply.begin(), inst.supply.end(), 0.0);
  const double dd = std::accumulate(inst.demand.begin(), inst.demand.end(), 0.0);
  inst.demand.back() += ds - dd;
  for (std::size_t a = 0; a < inst.supply.size(); ++a) {
    for (std::size_t b = 0; b < inst.demand.size(); ++b) {
      const double dx = sol.source.x[a] - sol.target.x[b];
      const double dy = sol.source.y[a] - sol.target.y[b];
      inst.cost(a, b) = dx * dx + dy * dy;
    }
  }
  sol.plan = solve_lp(inst);
  sol.cost = sol.plan.objective;
  return sol;
}

/// Monotone rearrangement plan between sorted atoms; flows(i, j) pairs
/// source atom i with target atom j.
inline TransportPlan comonotone_plan_1d(std::span<const double> source_pos, std::span<const double> source_mass,
                                        std::span<const double> target_pos, std::span<const double> target_mass)
{
  const std::size_t m = source_pos.size();
  const std::size_t k = target_pos.size();
  if (m == 0 || k == 0 || source_mass.size() != m || target_mass.size() != k)
    throw InvalidInput("comonotone_plan_1d: need matching nonempty positions and masses");
  if (!std::is_sorted(source_pos.begin(), source_pos.end()) || !std::is_sorted(target_pos.begin(), target_pos.end()))
    throw InvalidInput("comonotone_plan_1d: atoms must be sorted");
  TransportPlan plan{GridField(m, k), 0.0, 0};
  std::size_t i = 0;
  std::size_t j = 0;
  double a = source_mass[0];
  double b = target_mass[0];
  while (i < m && j < k) {
    const double q = std::min(a, b);
    plan.flows(i, j) += q;
    a -= q;
    b -= q;
    // advance whichever side is exhausted; the last atom on each side takes the rest
    const bool next_i = a <= b && i + 1 < m;
    const bool next_j = b <= a && j + 1 < k;
    if (!next_i && !next_j)
      break;
    if (next_i)
      a = source_mass[++i];
    if (next_j)
      b = target_mass[++j];
  }
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      const double d = source_pos[r] - target_pos[c];
      plan.objective += plan.flows(r, c) * d * d;
    }
  }
  return plan;
}

} // namespace planar_mk
