#include "mcmccert/kernel.hpp"

#include <cmath>

#include "mcmccert/errors.hpp"

namespace mcmccert {

namespace {

Eigen::VectorXd cumulative(const FiniteDistribution& d) {
  Eigen::VectorXd cdf(d.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    acc += d.weights()[i];
    cdf[i] = acc;
  }
  cdf[d.size() - 1] = 1.0;  // guard the top against rounding
  return cdf;
}

}  // namespace

MarkovKernel::MarkovKernel(MetricSpacePtr space, RowFn rows, std::string label)
    : space_(std::move(space)), row_fn_(std::move(rows)), label_(std::move(label)) {
  if (!space_) throw Error("EmptySpace", "kernel needs a metric space");
  if (!row_fn_) throw Error("ExactModeRequired", "row callback is required");
  const int n = space_->size();
  if (n <= kMaterializeLimit) {
    rows_.reserve(static_cast<std::size_t>(n));
    row_cdfs_.reserve(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x) {
      FiniteDistribution r = row_fn_(x);
      for (int p : r.support())
        if (p < 0 || p >= n)
          throw Error("ExactModeRequired",
                      "row " + std::to_string(x) + " leaves the space at point " + std::to_string(p));
      row_cdfs_.push_back(cumulative(r));
      rows_.push_back(std::move(r));
    }
  }
}

MarkovKernel::MarkovKernel(MetricSpacePtr space, StepFn step, std::string label)
    : space_(std::move(space)), step_fn_(std::move(step)), label_(std::move(label)) {
  if (!space_) throw Error("EmptySpace", "kernel needs a metric space");
  if (!step_fn_) throw Error("ExactModeRequired", "sampler callback is required");
}

void MarkovKernel::require_exact(const char* op) const {
  if (!exact())
    throw Error("ExactModeRequired", std::string(op) + " needs an exact-mode kernel");
}

const FiniteDistribution& MarkovKernel::materialized_row(int x) const {
  return rows_[static_cast<std::size_t>(x)];
}

FiniteDistribution MarkovKernel::row(int x) const {
  require_exact("row");
  if (!rows_.empty()) return materialized_row(x);
  return row_fn_(x);
}

int MarkovKernel::step(int x, RngStream& rng) const {
  if (step_fn_) return step_fn_(x, rng);
  require_exact("step");
  if (!rows_.empty()) {
    const FiniteDistribution& r = materialized_row(x);
    return r.support()[static_cast<std::size_t>(rng.categorical(row_cdfs_[static_cast<std::size_t>(x)]))];
  }
  FiniteDistribution r = row_fn_(x);
  return r.support()[static_cast<std::size_t>(rng.categorical(cumulative(r)))];
}

Eigen::VectorXd MarkovKernel::apply_to_function(const Eigen::VectorXd& f) const {
  require_exact("apply_to_function");
  const int n = space_->size();
  Eigen::VectorXd out(n);
  for (int x = 0; x < n; ++x) {
    const FiniteDistribution r = rows_.empty() ? row_fn_(x) : materialized_row(x);
    out[x] = r.expectation(f);
  }
  return out;
}

FiniteDistribution MarkovKernel::apply_to_distribution(const FiniteDistribution& mu) const {
  require_exact("apply_to_distribution");
  const int n = space_->size();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < mu.support().size(); ++i) {
    const int x = mu.support()[i];
    const double w = mu.weights()[static_cast<Eigen::Index>(i)];
    if (w == 0.0) continue;
    const FiniteDistribution r = rows_.empty() ? row_fn_(x) : materialized_row(x);
    for (std::size_t j = 0; j < r.support().size(); ++j)
      acc[r.support()[j]] += w * r.weights()[static_cast<Eigen::Index>(j)];
  }
  return FiniteDistribution::from_dense(acc);
}

Eigen::MatrixXd MarkovKernel::transition_matrix() const {
  require_exact("transition_matrix");
  const int n = space_->size();
  if (n > kMaterializeLimit)
    throw Error("SupportTooLarge", "dense transition matrix capped at " +
                                       std::to_string(kMaterializeLimit) + " states");
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    const FiniteDistribution r = rows_.empty() ? row_fn_(x) : materialized_row(x);
    for (std::size_t j = 0; j < r.support().size(); ++j)
      P(x, r.support()[j]) = r.weights()[static_cast<Eigen::Index>(j)];
  }
  return P;
}

FiniteDistribution iterate_kernel(const MarkovKernel& k, const FiniteDistribution& mu, long n) {
  if (!k.exact()) throw Error("ExactModeRequired", "iterate_kernel needs an exact-mode kernel");
  if (n < 0) throw Error("ExactModeRequired", "step count must be nonnegative");
  FiniteDistribution cur = mu;
  for (long s = 0; s < n; ++s) cur = k.apply_to_distribution(cur);
  return cur;
}

Eigen::VectorXd averaged_observable(const MarkovKernel& k, const Eigen::VectorXd& f, long n) {
  if (!k.exact()) throw Error("ExactModeRequired", "averaged_observable needs an exact-mode kernel");
  if (n < 0) throw Error("ExactModeRequired", "step count must be nonnegative");
  Eigen::VectorXd cur = f;
  for (long s = 0; s < n; ++s) cur = k.apply_to_function(cur);
  return cur;
}

void check_sampler_consistency(const MarkovKernel& k, int x, long n_samples, double delta,
                               RngStream& rng) {
  const FiniteDistribution exact = k.row(x);
  const int n = k.space().size();
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
  for (long s = 0; s < n_samples; ++s) counts[k.step(x, rng)] += 1.0;
  counts /= static_cast<double>(n_samples);
  double tv = total_variation(FiniteDistribution::from_dense(counts), exact);
  double budget = 3.0 * std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n_samples)));
  if (tv > budget)
    throw Error("SamplerInconsistent",
                "empirical law of step() deviates from row() in TV: " + std::to_string(tv) +
                    " > " + std::to_string(budget),
                x, x);
}

}  // namespace mcmccert
