#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcmccert/distribution.hpp"
#include "mcmccert/kernel.hpp"
#include "mcmccert/observable.hpp"

namespace mcmccert {

enum class PairMode { AllPairs, NeighborPairs };

// Result of the contraction sweep: kappa = 1 - max_{(x,y)} W1(P_x,P_y)/d(x,y)
// over the scanned pair set, with the attaining pair as witness.
struct CurvatureReport {
  double kappa = 0.0;
  std::pair<int, int> witness_pair{-1, -1};
  PairMode mode = PairMode::AllPairs;
  std::vector<std::pair<int, int>> pairs;  // scanned pairs, fixed order
  Eigen::VectorXd ratios;                  // contraction ratio per scanned pair
};

// Lipschitz function S dominating sigma(x)^2 / (n_x kappa), as required by
// the S-form variance/concentration bounds. C = S.lip_norm. mean_value is
// E_pi S or an upper bound for it; `mean_source` records where it came from.
struct SFunctionSpec {
  enum class MeanSource { ExactStationary, OriginBound, Declared };
  Observable S;
  MeanSource mean_source = MeanSource::ExactStationary;
  double mean_value = 0.0;
  int origin = 0;  // the anchor point when mean_source == OriginBound
};

// Everything the bound formulas consume.
struct DiagnosticsBundle {
  std::string chain_label;
  double kappa = 0.0;
  std::pair<int, int> witness_pair{-1, -1};
  PairMode mode = PairMode::AllPairs;
  Eigen::VectorXd ecc;      // E(x)
  Eigen::VectorXd sigma2;   // sigma(x)^2
  Eigen::VectorXd n_lower;  // certified lower bound on n_x (>= 1)
  double sigma_inf = 0.0;
  std::optional<double> sup_ratio;  // sup_x sigma(x)^2/(n_x kappa); nullopt = unbounded
  std::optional<SFunctionSpec> s_spec;
  std::optional<FiniteDistribution> stationary;
};

// Exact best contraction constant over the pair set. All-pairs mode is
// capped at kAllPairsCap states; neighbor-pairs mode (exact on geodesic
// spaces) is required above. The per-pair W1 solves run in parallel; the
// reduction follows the fixed pair order, so results are schedule-independent.
// Throws Error("NonPositiveCurvature") with the witness pair when the max
// ratio reaches 1.
constexpr int kAllPairsCap = 2048;
CurvatureReport coarse_ricci(const MarkovKernel& k, PairMode mode = PairMode::AllPairs,
                             int threads = 1);

// E(x) = sum_y d(x,y) pi(y) for every x.
Eigen::VectorXd eccentricity(const MarkovKernel& k, const FiniteDistribution& pi);

enum class EccBoundKind { Diameter, Offset, Local };
struct EccAprioriOptions {
  EccBoundKind kind = EccBoundKind::Local;
  double kappa = 0.0;     // required by Local
  int origin = 0;         // required by Offset
  double ecc_origin = 0;  // E(origin), required by Offset
  long samples = 0;       // > 0: Monte Carlo for Local in sampler mode
  std::uint64_t seed = 0;
};
struct EccBound {
  double value = 0.0;
  double margin = 0.0;  // Monte Carlo confidence half-width (0 when exact)
};
// Upper bound on E(x): diam X, E(x0) + d(x,x0), or (1/kappa) * mean one-step
// displacement from x (the "local" bound; Monte Carlo in sampler mode).
EccBound eccentricity_apriori(const MarkovKernel& k, int x, const EccAprioriOptions& opts);

// sigma(x)^2 = 1/2 sum_{y,z} d(y,z)^2 P_x(y) P_x(z), exact.
double diffusion_constant(const MarkovKernel& k, int x);
// All points at once.
Eigen::VectorXd diffusion_constants(const MarkovKernel& k);

struct LocalDimension {
  enum class Kind { One, Declared };
  Kind kind = Kind::One;
  double value = 1.0;
};
// Certified lower bound on the local dimension n_x: 1 universally, or a
// caller-declared analytic value (validated to be >= 1).
double local_dimension_lower(const MarkovKernel& k, int x, const LocalDimension& mode);

// sigma_inf = 1/2 sup_x diam Supp P_x.
double granularity(const MarkovKernel& k);

// Invariant distribution. Solved directly (kernel of P^T - I) for
// |X| <= kDirectStationaryCap, by power iteration above; the result always
// satisfies ||pi P - pi||_TV <= 1e-12 or Error("StationarySolveFailed").
constexpr int kDirectStationaryCap = 4096;
FiniteDistribution stationary_dist(const MarkovKernel& k);

// Runs the full battery: stationary, curvature, eccentricity, diffusion,
// granularity, n_x = 1.
DiagnosticsBundle compute_diagnostics(const MarkovKernel& k, PairMode mode = PairMode::AllPairs,
                                      int threads = 1);

// Checks the S-function hypothesis: S >= sigma^2/(n kappa) at every point,
// the declared Lipschitz constant, and (for ExactStationary/OriginBound)
// that mean_value is consistent. Throws Error("SFunctionInvalid").
void validate_s_spec(const MarkovKernel& k, const DiagnosticsBundle& diag,
                     const SFunctionSpec& spec, double tol = 1e-10);

// sup_x sigma(x)^2 / (n_x kappa) from the bundle tables.
double sup_diffusion_ratio(const DiagnosticsBundle& diag);

}  // namespace mcmccert
