#pragma once

#include <Eigen/Core>
#include <optional>
#include <utility>
#include <vector>

#include "mcmccert/bounds.hpp"
#include "mcmccert/diagnostics.hpp"
#include "mcmccert/kernel.hpp"
#include "mcmccert/rng.hpp"

namespace mcmccert {

// Closed-form diagnostics a chain family ships with, used to cross-check the
// computed ones and to refine them (declared local dimension, S function).
struct AnalyticDiagnostics {
  std::optional<double> kappa;                  // exact curvature
  std::optional<double> kappa_lower;            // analytic lower bound
  std::optional<double> ecc_const;              // E(x) when constant over x
  std::optional<double> sigma_inf;
  std::optional<double> sigma2_const;           // exact sigma(x)^2 when constant
  std::optional<Eigen::VectorXd> sigma2_upper;  // per-point upper bound
  std::optional<Eigen::VectorXd> n_lower;       // declared local-dimension lower bounds
  std::optional<double> sup_ratio;              // declared sup sigma^2/(n kappa)
  std::optional<SFunctionSpec> s_spec;
  std::optional<FiniteDistribution> stationary;  // closed form
};

struct BuiltChain {
  MarkovKernel kernel;
  AnalyticDiagnostics analytic;
};

// Lazy random walk on {0,1}^n_bits with the Hamming metric:
// P_x(x) = 1/2, P_x(flip i) = 1/(2 n_bits). Exact mode up to 2^20 states.
BuiltChain hypercube(int n_bits);

// Single-site heat-bath dynamics for spins in {-1,+1}^V with energy
// U(s) = -sum_{edges} s(x)s(y) - h sum_x s(x) (each undirected edge once),
// metric = number of disagreeing sites. States are bitmasks (bit v set means
// spin +1 at vertex v). Exact mode caps at 16 vertices.
BuiltChain ising_heat_bath(const std::vector<std::pair<int, int>>& edges, int n_vertices,
                           double beta, double h);

// Gibbs measure exp(-beta U)/Z for the same energy.
FiniteDistribution gibbs_distribution(const std::vector<std::pair<int, int>>& edges,
                                      int n_vertices, double beta, double h);

// Birth-death chain on {0..d}: up (lambda/d)(1 - x/d), down (1 - lambda/d) x/d,
// stay with the rest; invariant law Binomial(d, lambda/d).
BuiltChain binomial_chain(int d, double lambda);

// The chain that jumps to the uniform distribution on m points in one step
// (trivial metric); curvature exactly 1.
BuiltChain uniform_reset(int m);

// Discrete-time view of the M/M/infty queue: the birth-death chain above,
// reinterpreted with time step t/steps and sped up by d. Evaluates the
// queue's limit tail bound and simulates the discretized time average for
// comparison.
struct MMInftyDiscretization {
  double lambda = 1.0;
  int d = 1;
  double t = 1.0;
  long steps = 1;
  BuiltChain chain;

  // 2 exp(-t r^2 / (16 (2 lambda + (lambda+x)/t))) below r_max,
  // 2 exp(-t r / 12) above, with r_max = (8 lambda t + 4 (lambda+x)) / (3t).
  double corollary_r_max(int start_x) const;
  BoundCertificate corollary_bound(int start_x, double r) const;

  // Riemann time average of f over [0, t]: `steps` grid points, advancing
  // the sped-up chain by Poisson(t d / steps) kernel steps between them.
  double simulate_time_average(int start_x, const Eigen::VectorXd& f, RngStream& rng) const;
};
MMInftyDiscretization mm_infty_discrete(double lambda, int d, double t, long steps);

// Computed diagnostics with the family's declared refinements folded in
// (declared n_x replaces the default 1 and sup_ratio is recomputed; the
// family S function is validated and attached).
DiagnosticsBundle diagnostics_with_analytic(const BuiltChain& chain,
                                            PairMode mode = PairMode::AllPairs, int threads = 1);

// Poisson sample by chunked inversion; exact for any mean >= 0.
long poisson_sample(RngStream& rng, double mean);

}  // namespace mcmccert
