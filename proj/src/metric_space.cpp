#include "mcmccert/metric_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "mcmccert/errors.hpp"

namespace mcmccert {

FiniteMetricSpace::FiniteMetricSpace(int n, DistFn dist,
                                     std::vector<std::pair<int, int>> neighbor_pairs,
                                     std::vector<std::string> labels)
    : n_(n),
      dist_fn_(std::move(dist)),
      neighbor_pairs_(std::move(neighbor_pairs)),
      labels_(std::move(labels)) {
  if (n_ <= 0) throw Error("EmptySpace", "metric space needs at least one point");
  if (!dist_fn_) throw Error("MetricViolated", "distance callback is required");
  for (auto& [a, b] : neighbor_pairs_) {
    if (a < 0 || a >= n_ || b < 0 || b >= n_ || a == b)
      throw Error("MetricViolated", "neighbor pair out of range");
  }
  if (!labels_.empty() && static_cast<int>(labels_.size()) != n_)
    throw Error("MetricViolated", "label count must match point count");
  if (n_ <= kDenseCacheLimit) {
    cache_.resize(n_, n_);
    for (int i = 0; i < n_; ++i) {
      cache_(i, i) = dist_fn_(i, i);
      for (int j = i + 1; j < n_; ++j) {
        double d = dist_fn_(i, j);
        cache_(i, j) = d;
        cache_(j, i) = d;
      }
    }
    cached_ = true;
  }
}

const Eigen::MatrixXd& FiniteMetricSpace::dist_matrix() const {
  if (!cached_) throw Error("MetricViolated", "distance matrix not cached for this size");
  return cache_;
}

std::string FiniteMetricSpace::label(int i) const {
  if (!labels_.empty()) return labels_[static_cast<std::size_t>(i)];
  return "#" + std::to_string(i);
}

double FiniteMetricSpace::diameter() const {
  if (cached_) return cache_.maxCoeff();
  double best = 0.0;
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j) best = std::max(best, dist_fn_(i, j));
  return best;
}

void check_metric_axioms(const FiniteMetricSpace& space, RngStream& rng, int triples, double tol) {
  const int n = space.size();
  auto pick = [&] { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  for (int t = 0; t < triples; ++t) {
    int i = pick(), j = pick(), k = pick();
    double dii = space.dist(i, i);
    if (std::abs(dii) > tol) throw Error("MetricViolated", "nonzero self-distance", i, i);
    double dij = space.dist(i, j);
    double dji = space.dist(j, i);
    if (!(dij >= 0.0)) throw Error("MetricViolated", "negative distance", i, j);
    if (i != j && dij <= tol) throw Error("MetricViolated", "zero distance between distinct points", i, j);
    if (std::abs(dij - dji) > tol) throw Error("MetricViolated", "asymmetric distance", i, j);
    double dik = space.dist(i, k), dkj = space.dist(k, j);
    if (dij > dik + dkj + tol) throw Error("MetricViolated", "triangle inequality violated", i, j);
  }
}

void check_neighbor_generation(const FiniteMetricSpace& space, double tol) {
  if (!space.has_neighbor_pairs())
    throw Error("NeighborMetricMismatch", "space has no neighbor pairs");
  const int n = space.size();
  std::vector<std::vector<std::pair<int, double>>> adj(static_cast<std::size_t>(n));
  for (auto [a, b] : space.neighbor_pairs()) {
    double d = space.dist(a, b);
    adj[static_cast<std::size_t>(a)].emplace_back(b, d);
    adj[static_cast<std::size_t>(b)].emplace_back(a, d);
  }
  // Dijkstra from every source; spaces using this check are small.
  std::vector<double> sp(static_cast<std::size_t>(n));
  using Item = std::pair<double, int>;
  for (int src = 0; src < n; ++src) {
    std::fill(sp.begin(), sp.end(), std::numeric_limits<double>::infinity());
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    sp[static_cast<std::size_t>(src)] = 0.0;
    pq.emplace(0.0, src);
    while (!pq.empty()) {
      auto [d, u] = pq.top();
      pq.pop();
      if (d > sp[static_cast<std::size_t>(u)]) continue;
      for (auto [v, w] : adj[static_cast<std::size_t>(u)]) {
        double nd = d + w;
        if (nd < sp[static_cast<std::size_t>(v)]) {
          sp[static_cast<std::size_t>(v)] = nd;
          pq.emplace(nd, v);
        }
      }
    }
    for (int j = 0; j < n; ++j) {
      if (std::abs(sp[static_cast<std::size_t>(j)] - space.dist(src, j)) > tol)
        throw Error("NeighborMetricMismatch",
                    "shortest-path distance through neighbor pairs disagrees with dist", src, j);
    }
  }
}

FiniteMetricSpace make_trivial_metric_space(int n) {
  return FiniteMetricSpace(n, [](int i, int j) { return i == j ? 0.0 : 1.0; });
}

FiniteMetricSpace make_point_cloud_space(const Eigen::MatrixXd& pts) {
  const int n = static_cast<int>(pts.rows());
  Eigen::MatrixXd copy = pts;
  return FiniteMetricSpace(n, [copy](int i, int j) { return (copy.row(i) - copy.row(j)).norm(); });
}

}  // namespace mcmccert
