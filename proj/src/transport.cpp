#include "mcmccert/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <queue>
#include <vector>

#include "mcmccert/errors.hpp"

namespace mcmccert {

namespace {

using int64 = std::int64_t;
constexpr double kScale = 281474976710656.0;  // 2^48
constexpr double kInf = std::numeric_limits<double>::infinity();

// Quantizes weights to integers summing exactly to `target`; the rounding
// residual is assigned to the heaviest atom.
std::vector<int64> quantize(const Eigen::VectorXd& w, int64 target) {
  std::vector<int64> q(static_cast<std::size_t>(w.size()));
  int64 total = 0;
  Eigen::Index heaviest = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    q[static_cast<std::size_t>(i)] = std::llround(w[i] * kScale);
    total += q[static_cast<std::size_t>(i)];
    if (w[i] > w[heaviest]) heaviest = i;
  }
  q[static_cast<std::size_t>(heaviest)] += target - total;
  if (q[static_cast<std::size_t>(heaviest)] < 0)
    throw Error("TransportSolveFailed", "mass quantization went negative");
  return q;
}

std::vector<int> merged_support(const FiniteDistribution& mu, const FiniteDistribution& nu) {
  std::vector<int> merged;
  merged.reserve(mu.support().size() + nu.support().size());
  std::set_union(mu.support().begin(), mu.support().end(), nu.support().begin(),
                 nu.support().end(), std::back_inserter(merged));
  return merged;
}

// --- successive shortest paths on the residual bipartite graph ---

struct FlowState {
  int m = 0, k = 0;
  std::vector<std::map<int, int64>> by_src;  // src -> {dst -> flow}
  std::vector<std::map<int, int64>> by_dst;  // dst -> {src -> flow}

  void add(int i, int j, int64 delta) {
    int64& f = by_src[static_cast<std::size_t>(i)][j];
    f += delta;
    if (f == 0)
      by_src[static_cast<std::size_t>(i)].erase(j);
    int64& g = by_dst[static_cast<std::size_t>(j)][i];
    g += delta;
    if (g == 0) by_dst[static_cast<std::size_t>(j)].erase(i);
  }
  int64 at(int i, int j) const {
    auto it = by_src[static_cast<std::size_t>(i)].find(j);
    return it == by_src[static_cast<std::size_t>(i)].end() ? 0 : it->second;
  }
};

}  // namespace

W1Result wasserstein1(const FiniteDistribution& mu, const FiniteDistribution& nu,
                      const FiniteMetricSpace& space, const W1Options& opts) {
  if (mu.size() == 0 || nu.size() == 0)
    throw Error("EmptyDistribution", "wasserstein1 needs nonempty supports");
  for (int p : mu.support())
    if (p < 0 || p >= space.size()) throw Error("PointOutOfRange", "mu leaves the space");
  for (int p : nu.support())
    if (p < 0 || p >= space.size()) throw Error("PointOutOfRange", "nu leaves the space");
  std::vector<int> merged = merged_support(mu, nu);
  if (merged.size() > opts.max_support)
    throw Error("SupportTooLarge", "combined support " + std::to_string(merged.size()) +
                                       " exceeds cap " + std::to_string(opts.max_support));

  // Mass shared at identical points stays in place (legitimate for a metric
  // cost: the optimal value depends only on mu - nu). Transport the residues.
  std::vector<int> src_pts, dst_pts;
  std::vector<double> src_mass, dst_mass;
  TransportPlan plan;
  for (int p : merged) {
    double wm = mu.weight_at(p);
    double wn = nu.weight_at(p);
    double common = std::min(wm, wn);
    if (common > 0.0 && opts.want_plan) plan.pairs.push_back({p, p, common});
    if (wm - common > 0.0) {
      src_pts.push_back(p);
      src_mass.push_back(wm - common);
    }
    if (wn - common > 0.0) {
      dst_pts.push_back(p);
      dst_mass.push_back(wn - common);
    }
  }

  const int m = static_cast<int>(src_pts.size());
  const int k = static_cast<int>(dst_pts.size());
  if (m == 0 || k == 0) {
    plan.cost = 0.0;
    return W1Result{0.0, std::move(plan)};
  }

  double residual_total = 0.0;
  for (double w : src_mass) residual_total += w;
  int64 target = std::llround(residual_total * kScale);
  if (target <= 0) {
    plan.cost = 0.0;
    return W1Result{0.0, std::move(plan)};
  }
  Eigen::VectorXd sm = Eigen::Map<Eigen::VectorXd>(src_mass.data(), m);
  Eigen::VectorXd dm = Eigen::Map<Eigen::VectorXd>(dst_mass.data(), k);
  std::vector<int64> supply = quantize(sm, target);
  std::vector<int64> demand = quantize(dm, target);

  auto cost = [&](int i, int j) { return space.dist(src_pts[static_cast<std::size_t>(i)], dst_pts[static_cast<std::size_t>(j)]); };

  FlowState flow;
  flow.m = m;
  flow.k = k;
  flow.by_src.resize(static_cast<std::size_t>(m));
  flow.by_dst.resize(static_cast<std::size_t>(k));

  const int nn = m + k;  // node ids: sources [0,m), sinks [m, m+k)
  std::vector<double> pot(static_cast<std::size_t>(nn), 0.0);
  std::vector<double> dist(static_cast<std::size_t>(nn));
  std::vector<int> parent(static_cast<std::size_t>(nn));
  std::vector<char> settled(static_cast<std::size_t>(nn));
  std::vector<int64> rs = supply, rd = demand;
  int64 remaining = target;

  long iterations = 0;
  const long max_iterations = 2000L * nn + 10000L;
  using Item = std::pair<double, int>;

  while (remaining > 0) {
    if (++iterations > max_iterations)
      throw Error("TransportSolveFailed", "augmentation limit exceeded");
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(settled.begin(), settled.end(), 0);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (int i = 0; i < m; ++i)
      if (rs[static_cast<std::size_t>(i)] > 0) {
        dist[static_cast<std::size_t>(i)] = 0.0;
        pq.emplace(0.0, i);
      }
    int target_sink = -1;
    while (!pq.empty()) {
      auto [d, u] = pq.top();
      pq.pop();
      if (settled[static_cast<std::size_t>(u)]) continue;
      settled[static_cast<std::size_t>(u)] = 1;
      if (u >= m && rd[static_cast<std::size_t>(u - m)] > 0) {
        target_sink = u - m;
        break;
      }
      if (u < m) {
        // forward arcs u -> every sink
        for (int j = 0; j < k; ++j) {
          int node = m + j;
          if (settled[static_cast<std::size_t>(node)]) continue;
          double rc = cost(u, j) + pot[static_cast<std::size_t>(u)] - pot[static_cast<std::size_t>(node)];
          if (rc < 0.0) rc = 0.0;  // float guard
          double nd = d + rc;
          if (nd < dist[static_cast<std::size_t>(node)]) {
            dist[static_cast<std::size_t>(node)] = nd;
            parent[static_cast<std::size_t>(node)] = u;
            pq.emplace(nd, node);
          }
        }
      } else {
        // backward arcs sink -> sources carrying flow
        int j = u - m;
        for (const auto& [i, f] : flow.by_dst[static_cast<std::size_t>(j)]) {
          if (f <= 0 || settled[static_cast<std::size_t>(i)]) continue;
          double rc = -cost(i, j) + pot[static_cast<std::size_t>(u)] - pot[static_cast<std::size_t>(i)];
          if (rc < 0.0) rc = 0.0;
          double nd = d + rc;
          if (nd < dist[static_cast<std::size_t>(i)]) {
            dist[static_cast<std::size_t>(i)] = nd;
            parent[static_cast<std::size_t>(i)] = u;
            pq.emplace(nd, i);
          }
        }
      }
    }
    if (target_sink < 0)
      throw Error("TransportSolveFailed", "no augmenting path found");

    double reached = dist[static_cast<std::size_t>(m + target_sink)];
    for (int v = 0; v < nn; ++v)
      pot[static_cast<std::size_t>(v)] += std::min(dist[static_cast<std::size_t>(v)], reached);

    // bottleneck along the parent chain
    int64 bottleneck = rd[static_cast<std::size_t>(target_sink)];
    int node = m + target_sink;
    while (parent[static_cast<std::size_t>(node)] >= 0) {
      int prev = parent[static_cast<std::size_t>(node)];
      if (node < m) {
        // backward arc (sink prev-m) -> (source node): capacity = flow
        bottleneck = std::min(bottleneck, flow.at(node, prev - m));
      }
      node = prev;
    }
    bottleneck = std::min(bottleneck, rs[static_cast<std::size_t>(node)]);
    if (bottleneck <= 0) throw Error("TransportSolveFailed", "zero bottleneck");

    int root = node;
    node = m + target_sink;
    while (parent[static_cast<std::size_t>(node)] >= 0) {
      int prev = parent[static_cast<std::size_t>(node)];
      if (node >= m)
        flow.add(prev, node - m, bottleneck);  // forward
      else
        flow.add(node, prev - m, -bottleneck);  // backward
      node = prev;
    }
    rs[static_cast<std::size_t>(root)] -= bottleneck;
    rd[static_cast<std::size_t>(target_sink)] -= bottleneck;
    remaining -= bottleneck;
  }

  double value = 0.0;
  for (int i = 0; i < m; ++i)
    for (const auto& [j, f] : flow.by_src[static_cast<std::size_t>(i)]) {
      double mass = static_cast<double>(f) / kScale;
      value += mass * cost(i, j);
      if (opts.want_plan && mass > 0.0)
        plan.pairs.push_back({src_pts[static_cast<std::size_t>(i)], dst_pts[static_cast<std::size_t>(j)], mass});
    }
  plan.cost = value;
  return W1Result{value, std::move(plan)};
}

// --- transportation simplex (u-v / MODI method) for the dual ---

namespace {

struct Cell {
  int i;
  int j;
  int64 mass;
};

struct Tableau {
  int m, k;
  const Eigen::MatrixXd& cost;
  std::vector<Cell> basis;  // always m + k - 1 cells forming a spanning tree

  std::vector<std::vector<int>> row_cells, col_cells;  // basis indices by row/col

  explicit Tableau(int m_, int k_, const Eigen::MatrixXd& c) : m(m_), k(k_), cost(c) {}

  void rebuild_adjacency() {
    row_cells.assign(static_cast<std::size_t>(m), {});
    col_cells.assign(static_cast<std::size_t>(k), {});
    for (std::size_t b = 0; b < basis.size(); ++b) {
      row_cells[static_cast<std::size_t>(basis[b].i)].push_back(static_cast<int>(b));
      col_cells[static_cast<std::size_t>(basis[b].j)].push_back(static_cast<int>(b));
    }
  }

  // Solves u_i + v_j = c_ij over the basis tree with u_0 = 0.
  void potentials(Eigen::VectorXd& u, Eigen::VectorXd& v) const {
    u.setConstant(m, kInf);
    v.setConstant(k, kInf);
    u[0] = 0.0;
    std::vector<int> stack = {0};  // row nodes 0..m-1, col nodes m..m+k-1
    while (!stack.empty()) {
      int node = stack.back();
      stack.pop_back();
      if (node < m) {
        for (int b : row_cells[static_cast<std::size_t>(node)]) {
          int j = basis[static_cast<std::size_t>(b)].j;
          if (v[j] == kInf) {
            v[j] = cost(node, j) - u[node];
            stack.push_back(m + j);
          }
        }
      } else {
        int j = node - m;
        for (int b : col_cells[static_cast<std::size_t>(j)]) {
          int i = basis[static_cast<std::size_t>(b)].i;
          if (u[i] == kInf) {
            u[i] = cost(i, j) - v[j];
            stack.push_back(i);
          }
        }
      }
    }
    if ((u.array() == kInf).any() || (v.array() == kInf).any())
      throw Error("TransportSolveFailed", "basis is not a spanning tree");
  }

  // Path of basis-cell indices between row node i0 and col node j0.
  std::vector<int> tree_path(int i0, int j0) const {
    const int nn = m + k;
    std::vector<int> parent_node(static_cast<std::size_t>(nn), -2);
    std::vector<int> parent_cell(static_cast<std::size_t>(nn), -1);
    std::vector<int> queue = {i0};
    parent_node[static_cast<std::size_t>(i0)] = -1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      int node = queue[head];
      auto visit = [&](int next, int via) {
        if (parent_node[static_cast<std::size_t>(next)] == -2) {
          parent_node[static_cast<std::size_t>(next)] = node;
          parent_cell[static_cast<std::size_t>(next)] = via;
          queue.push_back(next);
        }
      };
      if (node < m) {
        for (int b : row_cells[static_cast<std::size_t>(node)]) visit(m + basis[static_cast<std::size_t>(b)].j, b);
      } else {
        for (int b : col_cells[static_cast<std::size_t>(node - m)]) visit(basis[static_cast<std::size_t>(b)].i, b);
      }
    }
    std::vector<int> path;
    int node = m + j0;
    if (parent_node[static_cast<std::size_t>(node)] == -2)
      throw Error("TransportSolveFailed", "basis tree disconnected");
    while (parent_node[static_cast<std::size_t>(node)] != -1) {
      path.push_back(parent_cell[static_cast<std::size_t>(node)]);
      node = parent_node[static_cast<std::size_t>(node)];
    }
    return path;  // cells from j0 side back to i0
  }
};

}  // namespace

DualResult kantorovich_dual(const FiniteDistribution& mu, const FiniteDistribution& nu,
                            const FiniteMetricSpace& space, const DualOptions& opts) {
  if (mu.size() == 0 || nu.size() == 0)
    throw Error("EmptyDistribution", "kantorovich_dual needs nonempty supports");
  std::vector<int> merged = merged_support(mu, nu);
  if (merged.size() > opts.max_support)
    throw Error("SupportTooLarge", "combined support " + std::to_string(merged.size()) +
                                       " exceeds dual cap " + std::to_string(opts.max_support));
  const int m = static_cast<int>(mu.size());
  const int k = static_cast<int>(nu.size());

  Eigen::MatrixXd cost(m, k);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j)
      cost(i, j) = space.dist(mu.support()[static_cast<std::size_t>(i)], nu.support()[static_cast<std::size_t>(j)]);

  const int64 total = static_cast<int64>(kScale);
  std::vector<int64> supply = quantize(mu.weights(), total);
  std::vector<int64> demand = quantize(nu.weights(), total);

  Tableau tab(m, k, cost);
  {
    // northwest-corner initial basis: exactly m + k - 1 cells
    int i = 0, j = 0;
    int64 ra = supply[0], rb = demand[0];
    for (;;) {
      int64 alloc = std::min(ra, rb);
      tab.basis.push_back({i, j, alloc});
      if (i == m - 1 && j == k - 1) break;
      ra -= alloc;
      rb -= alloc;
      if (ra == 0 && i + 1 < m) {
        ++i;
        ra = supply[static_cast<std::size_t>(i)];
      } else if (j + 1 < k) {
        ++j;
        rb = demand[static_cast<std::size_t>(j)];
      } else {
        ++i;
        ra = supply[static_cast<std::size_t>(i)];
      }
    }
  }
  tab.rebuild_adjacency();

  const double cmax = std::max(1.0, cost.cwiseAbs().maxCoeff());
  const double enter_tol = 1e-11 * cmax;
  Eigen::VectorXd u(m), v(k);

  long pivots = 0;
  const long max_pivots = 200000;
  for (;;) {
    if (++pivots > max_pivots) throw Error("TransportSolveFailed", "pivot limit exceeded");
    tab.potentials(u, v);

    // Bland entering rule: first cell in row-major order with negative
    // reduced cost.
    int ei = -1, ej = -1;
    for (int i = 0; i < m && ei < 0; ++i)
      for (int j = 0; j < k; ++j) {
        if (cost(i, j) - u[i] - v[j] < -enter_tol) {
          bool basic = false;
          for (int b : tab.row_cells[static_cast<std::size_t>(i)])
            if (tab.basis[static_cast<std::size_t>(b)].j == j) {
              basic = true;
              break;
            }
          if (!basic) {
            ei = i;
            ej = j;
            break;
          }
        }
      }
    if (ei < 0) break;  // optimal

    std::vector<int> path = tab.tree_path(ei, ej);
    // Cycle = entering cell (+) then path cells with alternating signs.
    int64 delta = std::numeric_limits<int64>::max();
    int leaving = -1;
    for (std::size_t p = 0; p < path.size(); ++p) {
      if (p % 2 == 0) {  // negative positions
        const Cell& c = tab.basis[static_cast<std::size_t>(path[p])];
        if (c.mass < delta ||
            (c.mass == delta && leaving >= 0 &&
             std::pair(c.i, c.j) < std::pair(tab.basis[static_cast<std::size_t>(leaving)].i,
                                             tab.basis[static_cast<std::size_t>(leaving)].j))) {
          delta = c.mass;
          leaving = path[p];
        }
      }
    }
    if (leaving < 0) throw Error("TransportSolveFailed", "no leaving cell");
    for (std::size_t p = 0; p < path.size(); ++p) {
      Cell& c = tab.basis[static_cast<std::size_t>(path[p])];
      c.mass += (p % 2 == 0) ? -delta : delta;
    }
    Cell& out = tab.basis[static_cast<std::size_t>(leaving)];
    out = Cell{ei, ej, delta};
    tab.rebuild_adjacency();
  }

  // Safety: the potentials must be dual-feasible for the raw costs.
  const double feas_tol = 1e-7 * cmax;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j)
      if (u[i] + v[j] > cost(i, j) + feas_tol)
        throw Error("TransportSolveFailed", "dual potentials infeasible");

  // Fold (u, v) into one 1-Lipschitz potential via the c-transform
  // f(z) = min_j d(z, y_j) - v_j, evaluated on the combined support. By
  // construction f is 1-Lipschitz whatever the solver did, so mu(f) - nu(f)
  // is always a valid lower bound on W1; at the optimum it attains it.
  DualResult out;
  out.support = merged;
  out.potential.resize(static_cast<Eigen::Index>(merged.size()));
  for (std::size_t z = 0; z < merged.size(); ++z) {
    double best = kInf;
    for (int j = 0; j < k; ++j)
      best = std::min(best, space.dist(merged[z], nu.support()[static_cast<std::size_t>(j)]) - v[j]);
    out.potential[static_cast<Eigen::Index>(z)] = best;
  }
  auto f_at = [&](int point) {
    auto it = std::lower_bound(merged.begin(), merged.end(), point);
    return out.potential[static_cast<Eigen::Index>(it - merged.begin())];
  };
  double value = 0.0;
  for (std::size_t i = 0; i < mu.support().size(); ++i)
    value += mu.weights()[static_cast<Eigen::Index>(i)] * f_at(mu.support()[i]);
  for (std::size_t j = 0; j < nu.support().size(); ++j)
    value -= nu.weights()[static_cast<Eigen::Index>(j)] * f_at(nu.support()[j]);
  out.value = value;
  return out;
}

void check_transport_plan(const TransportPlan& plan, const FiniteDistribution& mu,
                          const FiniteDistribution& nu, const FiniteMetricSpace& space,
                          double tol) {
  std::map<int, double> row, col;
  double cost = 0.0;
  for (const auto& e : plan.pairs) {
    if (e.mass < -1e-14) throw Error("PlanInvalid", "negative mass in plan");
    double mass = std::max(e.mass, 0.0);
    row[e.src] += mass;
    col[e.dst] += mass;
    cost += mass * space.dist(e.src, e.dst);
  }
  for (std::size_t i = 0; i < mu.support().size(); ++i) {
    double got = row.count(mu.support()[i]) ? row[mu.support()[i]] : 0.0;
    if (std::abs(got - mu.weights()[static_cast<Eigen::Index>(i)]) > tol)
      throw Error("PlanInvalid", "row marginal mismatch at point " + std::to_string(mu.support()[i]));
    row.erase(mu.support()[i]);
  }
  for (auto& [p, w] : row)
    if (std::abs(w) > tol) throw Error("PlanInvalid", "spurious row mass at " + std::to_string(p));
  for (std::size_t j = 0; j < nu.support().size(); ++j) {
    double got = col.count(nu.support()[j]) ? col[nu.support()[j]] : 0.0;
    if (std::abs(got - nu.weights()[static_cast<Eigen::Index>(j)]) > tol)
      throw Error("PlanInvalid", "column marginal mismatch at point " + std::to_string(nu.support()[j]));
    col.erase(nu.support()[j]);
  }
  for (auto& [p, w] : col)
    if (std::abs(w) > tol) throw Error("PlanInvalid", "spurious column mass at " + std::to_string(p));
  if (std::abs(cost - plan.cost) > tol) throw Error("PlanInvalid", "cost mismatch");
}

}  // namespace mcmccert
