#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mcmccert/diagnostics.hpp"
#include "mcmccert/distribution.hpp"
#include "mcmccert/kernel.hpp"

namespace mcmccert {

// An averaging run: T0 burn-in steps, then T averaged steps, started from a
// point or a distribution, for an observable of the given Lipschitz norm.
struct RunPlan {
  long T = 1;
  long T0 = 0;
  std::variant<int, FiniteDistribution> start = 0;
  double lip_norm = 1.0;
};

void validate_plan(const RunPlan& plan);  // throws Error("InvalidPlan")

// Evaluated bound with all inputs echoed. Immutable value object; fully
// serializable so a certificate can be audited downstream.
struct BoundCertificate {
  std::string kind;        // bias | variance | concentration | confidence_radius | mse
  std::string formula_id;  // which formula produced it (role-named)
  double value = 0.0;      // primary value; tail probabilities clamped to [0,1]
  double raw_value = 0.0;  // unclamped value (tail bounds can reach 2)
  double log_value = 0.0;  // log of raw_value for exponential-form bounds; NaN otherwise
  std::string regime;      // gaussian | exponential | n/a
  double r_max = 0.0;      // Gaussian window edge (normalized units); +inf allowed
  bool vacuous = false;
  long T = 0, T0 = 0;
  double kappa = 0.0, lip_norm = 0.0;
  std::vector<std::pair<std::string, double>> inputs;  // remaining inputs, ordered
};

// |E_x pihat(f) - pi(f)| <= (1-kappa)^(T0+1) / (kappa T) * E(x) * ||f||_Lip
BoundCertificate bias_bound(const RunPlan& plan, double kappa, double ecc_x);

// Var_x pihat(f) <= ||f||^2/(kappa T) * sup_ratio, times (1 + 1/(kappa T))
// when T0 > 0. sup_ratio = sup_x sigma(x)^2/(n_x kappa); nullopt means the
// sup is unbounded and the call fails with Error("UnboundedDiffusion").
BoundCertificate variance_bound_uniform(const RunPlan& plan, double kappa,
                                        std::optional<double> sup_ratio);

// The S-function variance bound:
//   T0 = 0 : ||f||^2/(kappa T) * (mean_S + C/(kappa T) * E(x))
//   T0 > 0 : ||f||^2/(kappa T) * ((1 + 1/(kappa T)) mean_S
//            + 2C(1-kappa)^T0/(kappa T) * E(x))
BoundCertificate variance_bound_s(const RunPlan& plan, double kappa, const SFunctionSpec& spec,
                                  double ecc_x);

// Tail bound for P(|pihat(f) - E_x pihat(f)| >= r) with absolute radius r:
//   V^2 = (1/(kappa T))(1 + T0/T) sup_ratio,  r_max = 4 V^2 kappa T/(3 sigma_inf)
//   2 exp(-rn^2/(16 V^2)) below r_max, 2 exp(-kappa T rn/(12 sigma_inf)) above,
// where rn = r / ||f||_Lip.
BoundCertificate concentration_uniform(const RunPlan& plan, double kappa,
                                       std::optional<double> sup_ratio, double sigma_inf,
                                       double r);

// Same with V_x^2 = (1/(kappa T))(1 + T0/T) mean_S + C E(x)/(kappa T)^2 and
// r_max = 4 V_x^2 kappa T / max{2C, 3 sigma_inf}; exponential branch
// 2 exp(-kappa T rn / (4 max{2C, 3 sigma_inf})).
BoundCertificate concentration_s(const RunPlan& plan, double kappa, const SFunctionSpec& spec,
                                 double ecc_x, double sigma_inf, double r);

enum class TailFamily { Uniform, WithS };

// Smallest absolute radius r with tail bound(r) <= alpha; the returned r is
// re-evaluated against the matching concentration bound before returning.
// alpha >= 2 is trivially satisfied: returns 0 flagged vacuous.
BoundCertificate confidence_radius(const RunPlan& plan, const DiagnosticsBundle& diag,
                                   double alpha, TailFamily which);

// bias^2 + variance; upper-bounds the mean squared error E_x |pihat - pi(f)|^2.
BoundCertificate mse_decomposition(const BoundCertificate& bias_cert,
                                   const BoundCertificate& variance_cert);

// Extra variance term for a mu-distributed starting point:
// (1-kappa)^(2(T0+1)) / (2 kappa^2 T^2) * spread * ||f||^2,
// spread = int int d(x,y)^2 mu(dx) mu(dy).
double random_start_variance(const RunPlan& plan, double kappa, double mu_spread);

// Pointwise right-hand side of the finite-time variance inequality:
// ||f||^2 sum_{k=0}^{N-1} (1-kappa)^(2(N-1-k)) P^k (sigma^2/n).
// Tests verify P^N(f^2) - (P^N f)^2 <= this, pointwise.
Eigen::VectorXd lemma_variance_rhs(const MarkovKernel& k, const Observable& f, long n_steps,
                                   const DiagnosticsBundle& diag);

// Pointwise right-hand side of the Laplace-transform inequality for a
// (2/(kappa T))-Lipschitz f and 0 < lambda < kappa T / max{4C, 6 sigma_inf}:
// exp{ lambda P^N f + (4 lambda^2/(kappa T^2)) sum_{k=0}^{N-1} P^k S }.
// Tests verify P^N(exp(lambda f)) <= this, pointwise.
Eigen::VectorXd lemma_laplace_rhs(const MarkovKernel& k, const Eigen::VectorXd& f_scaled,
                                  double lambda, long n_steps, const SFunctionSpec& spec,
                                  const DiagnosticsBundle& diag, const RunPlan& plan);

// b^e with integer exponent by repeated squaring; pow_int(0, 0) = 1.
double pow_int(double base, long exponent);

}  // namespace mcmccert
