#include "mcmccert/distribution.hpp"

#include <algorithm>
#include <cmath>

#include "mcmccert/errors.hpp"

namespace mcmccert {

namespace {
constexpr double kNegMassTol = 1e-14;  // clamp threshold for tiny negatives
constexpr double kMassTol = 1e-9;      // constructor sanity on total mass
}  // namespace

FiniteDistribution::FiniteDistribution(std::vector<int> support, Eigen::VectorXd weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  if (support_.empty()) throw Error("EmptyDistribution", "distribution has empty support");
  if (static_cast<Eigen::Index>(support_.size()) != weights_.size())
    throw Error("EmptyDistribution", "support/weight length mismatch");
  // Sort by point index, carrying weights along.
  if (!std::is_sorted(support_.begin(), support_.end())) {
    std::vector<Eigen::Index> order(support_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return support_[static_cast<std::size_t>(a)] < support_[static_cast<std::size_t>(b)]; });
    std::vector<int> s(support_.size());
    Eigen::VectorXd w(weights_.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      s[i] = support_[static_cast<std::size_t>(order[i])];
      w[static_cast<Eigen::Index>(i)] = weights_[order[i]];
    }
    support_ = std::move(s);
    weights_ = std::move(w);
  }
  for (std::size_t i = 1; i < support_.size(); ++i)
    if (support_[i] == support_[i - 1])
      throw Error("EmptyDistribution", "duplicate support point " + std::to_string(support_[i]));
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    double w = weights_[i];
    if (w < -kNegMassTol) throw Error("EmptyDistribution", "negative weight");
    if (w < 0.0) weights_[i] = 0.0;
  }
  double total = weights_.sum();
  if (std::abs(total - 1.0) > kMassTol)
    throw Error("EmptyDistribution", "weights sum to " + std::to_string(total) + ", expected 1");
}

FiniteDistribution FiniteDistribution::delta(int point) {
  Eigen::VectorXd w(1);
  w << 1.0;
  return FiniteDistribution({point}, w);
}

FiniteDistribution FiniteDistribution::uniform(int n_points) {
  std::vector<int> support(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) support[static_cast<std::size_t>(i)] = i;
  return FiniteDistribution(std::move(support),
                            Eigen::VectorXd::Constant(n_points, 1.0 / n_points));
}

FiniteDistribution FiniteDistribution::from_dense(const Eigen::VectorXd& weights) {
  std::vector<int> support;
  std::vector<double> w;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) {
      support.push_back(static_cast<int>(i));
      w.push_back(weights[i]);
    }
  }
  Eigen::VectorXd wv = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  return FiniteDistribution(std::move(support), std::move(wv));
}

double FiniteDistribution::weight_at(int point) const {
  auto it = std::lower_bound(support_.begin(), support_.end(), point);
  if (it == support_.end() || *it != point) return 0.0;
  return weights_[static_cast<Eigen::Index>(it - support_.begin())];
}

Eigen::VectorXd FiniteDistribution::dense(int n_points) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_points);
  for (std::size_t i = 0; i < support_.size(); ++i)
    out[support_[i]] = weights_[static_cast<Eigen::Index>(i)];
  return out;
}

double FiniteDistribution::expectation(const Eigen::VectorXd& f) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < support_.size(); ++i)
    acc += weights_[static_cast<Eigen::Index>(i)] * f[support_[i]];
  return acc;
}

double total_variation(const FiniteDistribution& a, const FiniteDistribution& b) {
  // One merge pass over the two sorted supports.
  double acc = 0.0;
  std::size_t i = 0, j = 0;
  const auto& sa = a.support();
  const auto& sb = b.support();
  while (i < sa.size() || j < sb.size()) {
    if (j >= sb.size() || (i < sa.size() && sa[i] < sb[j])) {
      acc += std::abs(a.weights()[static_cast<Eigen::Index>(i)]);
      ++i;
    } else if (i >= sa.size() || sb[j] < sa[i]) {
      acc += std::abs(b.weights()[static_cast<Eigen::Index>(j)]);
      ++j;
    } else {
      acc += std::abs(a.weights()[static_cast<Eigen::Index>(i)] -
                      b.weights()[static_cast<Eigen::Index>(j)]);
      ++i;
      ++j;
    }
  }
  return 0.5 * acc;
}

}  // namespace mcmccert
