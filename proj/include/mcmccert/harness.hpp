#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcmccert/bounds.hpp"
#include "mcmccert/kernel.hpp"
#include "mcmccert/observable.hpp"
#include "mcmccert/parallel.hpp"
#include "mcmccert/rng.hpp"
#include "mcmccert/sampler_chain.hpp"

namespace mcmccert {

// Outcome of running `replicas` independent copies of the averaging plan.
// Replica i draws from the stream (seed, i), and every reduction follows
// replica order, so the result is bit-identical for any thread count.
struct EnsembleResult {
  long replicas = 0;
  long T = 0, T0 = 0;
  double lip_norm = 1.0;
  std::uint64_t seed = 0;
  double empirical_mean_of_means = 0.0;
  double empirical_variance = 0.0;  // sample variance of the replica means
  std::optional<double> empirical_bias;  // mean of means - pi(f), when pi(f) known
  double center = 0.0;              // deviations measured around this
  std::string center_source;        // "exact" | "empirical"
  std::vector<std::pair<double, double>> tail_freq;  // (radius, freq of |mean-center| >= r)
  std::vector<double> replica_means;
};

struct EnsembleOptions {
  std::vector<double> radii;            // tail radii (absolute units)
  std::optional<double> exact_center;   // E_x pihat(f) when known
  std::optional<double> exact_pi_f;     // pi(f) when known
  int threads = 1;
};

EnsembleResult run_ensemble(const MarkovKernel& k, const Observable& f, const RunPlan& plan,
                            long replicas, std::uint64_t seed, const EnsembleOptions& opts = {});

EnsembleResult run_ensemble(const SamplerChain& chain, const PointObservable& f,
                            const SamplerChain::Point& start, long T, long T0, long replicas,
                            std::uint64_t seed, const EnsembleOptions& opts = {});

// Exact first and second moments of pihat(f) for every starting point,
// propagated through function tables (never the joint T-step law):
//   E_x pihat = (1/T) sum_k P^k f(x),
//   E_x pihat^2 via P^i(f P^{j-i} f) recursions.
struct ExactMoments {
  Eigen::VectorXd mean_by_start;
  Eigen::VectorXd second_by_start;
  Eigen::VectorXd variance_by_start;
  double mean = 0.0;      // at the plan's start
  double variance = 0.0;  // at the plan's start
};
ExactMoments exact_moments(const MarkovKernel& k, const Observable& f, const RunPlan& plan);

constexpr int kOracleStateCap = 512;
constexpr long kOracleStepCap = 1000000;
constexpr double kOracleWorkCap = 1e7;  // (T+1) * |X| table entries

enum class Verdict { Sound, Vacuous, Violated };
const char* verdict_name(Verdict v);

struct CertificateCheck {
  std::string formula_id;
  std::string kind;
  Verdict verdict = Verdict::Sound;
  double bound = 0.0;
  double observed = 0.0;
  double slack = 0.0;
  std::string note;
};

struct ValidationReport {
  std::vector<CertificateCheck> checks;
  bool any_violated = false;
  long replicas = 0;
  std::uint64_t seed = 0;
};

// Compares each certificate against the exact oracle (when the chain fits
// the budget) and/or the simulation ensemble. SOUND: the measured value is
// below the bound within statistical slack. VACUOUS: the bound does not beat
// the trivial one. VIOLATED: hard failure; the caller should treat it as a
// bug.
ValidationReport validate_certificates(const MarkovKernel& k, const Observable& f,
                                       const RunPlan& plan,
                                       const std::vector<BoundCertificate>& certs, long replicas,
                                       std::uint64_t seed, int threads = 1);

}  // namespace mcmccert
