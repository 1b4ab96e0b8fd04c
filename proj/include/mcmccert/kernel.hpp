#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mcmccert/distribution.hpp"
#include "mcmccert/metric_space.hpp"
#include "mcmccert/rng.hpp"

namespace mcmccert {

// Transition kernel of a Markov chain on a FiniteMetricSpace. Two faces:
//   exact mode   - row(x) yields P_x as a FiniteDistribution;
//   sampler mode - step(x, rng) draws the next state.
// Exact-mode kernels get a synthesized inverse-CDF sampler; chains may
// install a faster native one. Rows (and per-row CDFs for stepping) are
// materialized up to kMaterializeLimit states, computed on demand above.
// Immutable after construction; step() takes a caller-owned stream.
class MarkovKernel {
 public:
  using RowFn = std::function<FiniteDistribution(int)>;
  using StepFn = std::function<int(int, RngStream&)>;
  static constexpr int kMaterializeLimit = 4096;

  MarkovKernel(MetricSpacePtr space, RowFn rows, std::string label);
  // Sampler-only kernel.
  MarkovKernel(MetricSpacePtr space, StepFn step, std::string label);

  const FiniteMetricSpace& space() const { return *space_; }
  const MetricSpacePtr& space_ptr() const { return space_; }
  const std::string& label() const { return label_; }

  bool exact() const { return static_cast<bool>(row_fn_) || !rows_.empty(); }
  bool has_native_sampler() const { return static_cast<bool>(step_fn_); }

  FiniteDistribution row(int x) const;
  int step(int x, RngStream& rng) const;

  void set_sampler(StepFn step) { step_fn_ = std::move(step); }

  // (P f)(x) = sum_y P_x(y) f(y) for every x; f is a dense table.
  Eigen::VectorXd apply_to_function(const Eigen::VectorXd& f) const;
  // One step of the distribution: mu P.
  FiniteDistribution apply_to_distribution(const FiniteDistribution& mu) const;

  // Dense row-stochastic matrix (rows = P_x). Requires n <= kMaterializeLimit.
  Eigen::MatrixXd transition_matrix() const;

 private:
  void require_exact(const char* op) const;
  const FiniteDistribution& materialized_row(int x) const;

  MetricSpacePtr space_;
  RowFn row_fn_;
  StepFn step_fn_;
  std::string label_;
  std::vector<FiniteDistribution> rows_;     // materialized rows (may be empty)
  std::vector<Eigen::VectorXd> row_cdfs_;    // cumulative weights, aligned with rows_
};

// mu P^n. Exact mode only; n >= 0. Applies single steps sequentially, so
// splitting n = a + b reproduces the identical floating-point sequence.
FiniteDistribution iterate_kernel(const MarkovKernel& k, const FiniteDistribution& mu, long n);

// P^n f as a dense table over all points. Exact mode only; n >= 0.
Eigen::VectorXd averaged_observable(const MarkovKernel& k, const Eigen::VectorXd& f, long n);

// Empirical-vs-exact consistency of the sampler: draws n samples of step(x)
// and checks total variation against row(x) within 3 sqrt(ln(2/delta)/(2n)).
// Throws Error("SamplerInconsistent") on failure.
void check_sampler_consistency(const MarkovKernel& k, int x, long n_samples, double delta,
                               RngStream& rng);

}  // namespace mcmccert
