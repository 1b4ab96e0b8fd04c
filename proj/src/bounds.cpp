#include "mcmccert/bounds.hpp"

#include <cmath>
#include <limits>

#include "mcmccert/errors.hpp"

namespace mcmccert {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_kappa(double kappa) {
  if (!(kappa > 0.0) || kappa > 1.0)
    throw Error("InvalidKappa", "kappa must lie in (0, 1], got " + std::to_string(kappa));
}

double require_ratio(const std::optional<double>& sup_ratio) {
  if (!sup_ratio || !std::isfinite(*sup_ratio))
    throw Error("UnboundedDiffusion", "sup of sigma^2/(n kappa) is not finite");
  if (*sup_ratio < 0.0) throw Error("UnboundedDiffusion", "negative diffusion ratio");
  return *sup_ratio;
}

int start_index_or(const RunPlan& plan, int fallback) {
  if (const int* p = std::get_if<int>(&plan.start)) return *p;
  return fallback;
}

BoundCertificate base_cert(std::string kind, std::string formula, const RunPlan& plan,
                           double kappa) {
  BoundCertificate cert;
  cert.kind = std::move(kind);
  cert.formula_id = std::move(formula);
  cert.regime = "n/a";
  cert.r_max = kInf;
  cert.log_value = kNaN;
  cert.T = plan.T;
  cert.T0 = plan.T0;
  cert.kappa = kappa;
  cert.lip_norm = plan.lip_norm;
  cert.inputs.emplace_back("start_index", start_index_or(plan, -1));
  return cert;
}

// Tail probability 2 e^{-x} in clamped/raw/log form.
void set_tail_value(BoundCertificate& cert, double exponent) {
  cert.log_value = std::log(2.0) - exponent;
  cert.raw_value = 2.0 * std::exp(-exponent);
  cert.value = std::min(cert.raw_value, 1.0);
}

struct TailConstants {
  double v2;        // V^2 (normalized units)
  double r_max;     // Gaussian window edge
  double exp_rate;  // exponential branch: 2 exp(-exp_rate * rn)
};

TailConstants uniform_tail_constants(const RunPlan& plan, double kappa, double sup_ratio,
                                     double sigma_inf) {
  if (!(sigma_inf > 0.0) || !std::isfinite(sigma_inf))
    throw Error("InvalidGranularity", "uniform tail bound needs finite sigma_inf > 0");
  double kt = kappa * static_cast<double>(plan.T);
  double v2 = (1.0 / kt) * (1.0 + static_cast<double>(plan.T0) / static_cast<double>(plan.T)) *
              sup_ratio;
  return TailConstants{v2, 4.0 * v2 * kt / (3.0 * sigma_inf), kt / (12.0 * sigma_inf)};
}

TailConstants s_tail_constants(const RunPlan& plan, double kappa, const SFunctionSpec& spec,
                               double ecc_x, double sigma_inf) {
  if (sigma_inf < 0.0 || !std::isfinite(sigma_inf))
    throw Error("InvalidGranularity", "sigma_inf must be finite and nonnegative");
  double c = spec.S.lip_norm;
  double denom = std::max(2.0 * c, 3.0 * sigma_inf);
  if (!(denom > 0.0))
    throw Error("InvalidGranularity", "need C > 0 or sigma_inf > 0 for the tail bound");
  double kt = kappa * static_cast<double>(plan.T);
  double v2 = (1.0 / kt) * (1.0 + static_cast<double>(plan.T0) / static_cast<double>(plan.T)) *
                  spec.mean_value +
              c * ecc_x / (kt * kt);
  return TailConstants{v2, 4.0 * v2 * kt / denom, kt / (4.0 * denom)};
}

BoundCertificate tail_certificate(std::string formula, const RunPlan& plan, double kappa,
                                  const TailConstants& tc, double r_abs) {
  if (!(r_abs > 0.0)) throw Error("InvalidRadius", "deviation radius must be positive");
  BoundCertificate cert = base_cert("concentration", std::move(formula), plan, kappa);
  double rn = r_abs / plan.lip_norm;
  cert.r_max = tc.r_max;
  cert.inputs.emplace_back("r_abs", r_abs);
  cert.inputs.emplace_back("r_normalized", rn);
  cert.inputs.emplace_back("v2", tc.v2);
  if (rn < tc.r_max) {
    cert.regime = "gaussian";
    set_tail_value(cert, rn * rn / (16.0 * tc.v2));
  } else {
    cert.regime = "exponential";
    set_tail_value(cert, tc.exp_rate * rn);
  }
  if (cert.value >= 1.0) cert.vacuous = true;
  return cert;
}

}  // namespace

void validate_plan(const RunPlan& plan) {
  if (plan.T < 1) throw Error("InvalidPlan", "T must be >= 1");
  if (plan.T0 < 0) throw Error("InvalidPlan", "T0 must be >= 0");
  if (!(plan.lip_norm > 0.0)) throw Error("InvalidPlan", "lip_norm must be positive");
}

double pow_int(double base, long exponent) {
  double result = 1.0, b = base;
  for (long e = exponent; e > 0; e >>= 1) {
    if (e & 1) result *= b;
    b *= b;
  }
  return result;
}

BoundCertificate bias_bound(const RunPlan& plan, double kappa, double ecc_x) {
  validate_plan(plan);
  check_kappa(kappa);
  BoundCertificate cert = base_cert("bias", "bias_geometric", plan, kappa);
  double kt = kappa * static_cast<double>(plan.T);
  cert.value = pow_int(1.0 - kappa, plan.T0 + 1) / kt * ecc_x * plan.lip_norm;
  cert.raw_value = cert.value;
  cert.log_value = static_cast<double>(plan.T0 + 1) * std::log1p(-kappa) - std::log(kt) +
                   std::log(ecc_x) + std::log(plan.lip_norm);
  cert.inputs.emplace_back("ecc_x", ecc_x);
  return cert;
}

BoundCertificate variance_bound_uniform(const RunPlan& plan, double kappa,
                                        std::optional<double> sup_ratio) {
  validate_plan(plan);
  check_kappa(kappa);
  double ratio = require_ratio(sup_ratio);
  BoundCertificate cert = base_cert("variance", "variance_uniform", plan, kappa);
  double kt = kappa * static_cast<double>(plan.T);
  double value = plan.lip_norm * plan.lip_norm / kt * ratio;
  if (plan.T0 > 0) value *= 1.0 + 1.0 / kt;
  cert.value = cert.raw_value = value;
  cert.inputs.emplace_back("sup_ratio", ratio);
  return cert;
}

BoundCertificate variance_bound_s(const RunPlan& plan, double kappa, const SFunctionSpec& spec,
                                  double ecc_x) {
  validate_plan(plan);
  check_kappa(kappa);
  BoundCertificate cert = base_cert("variance", "variance_lipschitz_s", plan, kappa);
  double kt = kappa * static_cast<double>(plan.T);
  double c = spec.S.lip_norm;
  double value;
  if (plan.T0 == 0) {
    value = plan.lip_norm * plan.lip_norm / kt * (spec.mean_value + c / kt * ecc_x);
  } else {
    value = plan.lip_norm * plan.lip_norm / kt *
            ((1.0 + 1.0 / kt) * spec.mean_value +
             2.0 * c * pow_int(1.0 - kappa, plan.T0) / kt * ecc_x);
  }
  cert.value = cert.raw_value = value;
  cert.inputs.emplace_back("mean_S", spec.mean_value);
  cert.inputs.emplace_back("mean_S_source", static_cast<double>(spec.mean_source));
  cert.inputs.emplace_back("C", c);
  cert.inputs.emplace_back("ecc_x", ecc_x);
  return cert;
}

BoundCertificate concentration_uniform(const RunPlan& plan, double kappa,
                                       std::optional<double> sup_ratio, double sigma_inf,
                                       double r) {
  validate_plan(plan);
  check_kappa(kappa);
  double ratio = require_ratio(sup_ratio);
  TailConstants tc = uniform_tail_constants(plan, kappa, ratio, sigma_inf);
  BoundCertificate cert = tail_certificate("concentration_uniform", plan, kappa, tc, r);
  cert.inputs.emplace_back("sup_ratio", ratio);
  cert.inputs.emplace_back("sigma_inf", sigma_inf);
  return cert;
}

BoundCertificate concentration_s(const RunPlan& plan, double kappa, const SFunctionSpec& spec,
                                 double ecc_x, double sigma_inf, double r) {
  validate_plan(plan);
  check_kappa(kappa);
  TailConstants tc = s_tail_constants(plan, kappa, spec, ecc_x, sigma_inf);
  BoundCertificate cert = tail_certificate("concentration_lipschitz_s", plan, kappa, tc, r);
  cert.inputs.emplace_back("mean_S", spec.mean_value);
  cert.inputs.emplace_back("mean_S_source", static_cast<double>(spec.mean_source));
  cert.inputs.emplace_back("C", spec.S.lip_norm);
  cert.inputs.emplace_back("ecc_x", ecc_x);
  cert.inputs.emplace_back("sigma_inf", sigma_inf);
  return cert;
}

BoundCertificate confidence_radius(const RunPlan& plan, const DiagnosticsBundle& diag,
                                   double alpha, TailFamily which) {
  validate_plan(plan);
  check_kappa(diag.kappa);
  if (!(alpha > 0.0)) throw Error("InvalidAlpha", "alpha must be positive");

  const bool with_s = which == TailFamily::WithS;
  if (with_s && !diag.s_spec)
    throw Error("MissingSFunction", "confidence radius with S needs an S function");

  BoundCertificate cert = base_cert(
      "confidence_radius", with_s ? "confidence_radius_s" : "confidence_radius_uniform", plan,
      diag.kappa);
  cert.inputs.emplace_back("alpha", alpha);
  if (alpha >= 2.0) {
    cert.value = cert.raw_value = 0.0;
    cert.vacuous = true;
    return cert;
  }

  int start = start_index_or(plan, 0);
  double ecc_x = diag.ecc.size() > 0 ? diag.ecc[start] : 0.0;
  TailConstants tc = with_s
                         ? s_tail_constants(plan, diag.kappa, *diag.s_spec, ecc_x, diag.sigma_inf)
                         : uniform_tail_constants(plan, diag.kappa, require_ratio(diag.sup_ratio),
                                                  diag.sigma_inf);
  double log_ratio = std::log(2.0 / alpha);
  double rn = std::sqrt(16.0 * tc.v2 * log_ratio);
  std::string regime = "gaussian";
  if (!(rn < tc.r_max)) {
    rn = std::max(log_ratio / tc.exp_rate, tc.r_max);
    regime = "exponential";
  }

  auto bound_at = [&](double r_abs) {
    return with_s ? concentration_s(plan, diag.kappa, *diag.s_spec, ecc_x, diag.sigma_inf, r_abs)
                  : concentration_uniform(plan, diag.kappa, diag.sup_ratio, diag.sigma_inf, r_abs);
  };

  // Guarantee bound(r) <= alpha after rounding; a couple of ulp bumps at most.
  double r_abs = rn * plan.lip_norm;
  if (r_abs <= 0.0) r_abs = std::numeric_limits<double>::min();
  BoundCertificate check = bound_at(r_abs);
  for (int i = 0; i < 100 && check.raw_value > alpha; ++i) {
    r_abs = std::nextafter(r_abs * (1.0 + 1e-15), kInf);
    check = bound_at(r_abs);
  }
  if (check.raw_value > alpha)
    throw Error("InvalidAlpha", "failed to certify the inverted radius");

  cert.regime = regime;
  cert.r_max = tc.r_max;
  cert.value = cert.raw_value = r_abs;
  cert.inputs.emplace_back("v2", tc.v2);
  cert.inputs.emplace_back("achieved_tail_bound", check.raw_value);
  return cert;
}

BoundCertificate mse_decomposition(const BoundCertificate& bias_cert,
                                   const BoundCertificate& variance_cert) {
  if (bias_cert.kind != "bias" || variance_cert.kind != "variance")
    throw Error("PlanMismatch", "mse needs a bias certificate and a variance certificate");
  if (bias_cert.T != variance_cert.T || bias_cert.T0 != variance_cert.T0 ||
      bias_cert.lip_norm != variance_cert.lip_norm || bias_cert.kappa != variance_cert.kappa)
    throw Error("PlanMismatch", "certificates were produced for different plans");
  BoundCertificate cert;
  cert.kind = "mse";
  cert.formula_id = "mse_decomposition";
  cert.regime = "n/a";
  cert.r_max = kInf;
  cert.log_value = kNaN;
  cert.T = bias_cert.T;
  cert.T0 = bias_cert.T0;
  cert.kappa = bias_cert.kappa;
  cert.lip_norm = bias_cert.lip_norm;
  cert.value = cert.raw_value = bias_cert.value * bias_cert.value + variance_cert.value;
  cert.inputs.emplace_back("bias_bound", bias_cert.value);
  cert.inputs.emplace_back("variance_bound", variance_cert.value);
  return cert;
}

double random_start_variance(const RunPlan& plan, double kappa, double mu_spread) {
  validate_plan(plan);
  check_kappa(kappa);
  if (mu_spread < 0.0) throw Error("InvalidPlan", "spread must be nonnegative");
  double kt = kappa * static_cast<double>(plan.T);
  return pow_int(1.0 - kappa, 2 * (plan.T0 + 1)) / (2.0 * kt * kt) * mu_spread * plan.lip_norm *
         plan.lip_norm;
}

Eigen::VectorXd lemma_variance_rhs(const MarkovKernel& k, const Observable& f, long n_steps,
                                   const DiagnosticsBundle& diag) {
  if (n_steps < 1) throw Error("InvalidPlan", "n_steps must be >= 1");
  check_kappa(diag.kappa);
  Eigen::VectorXd rate = diag.sigma2.array() / diag.n_lower.array();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(rate.size());
  Eigen::VectorXd cur = rate;  // P^j (sigma^2/n)
  for (long j = 0; j < n_steps; ++j) {
    total += pow_int(1.0 - diag.kappa, 2 * (n_steps - 1 - j)) * cur;
    if (j + 1 < n_steps) cur = k.apply_to_function(cur);
  }
  return f.lip_norm * f.lip_norm * total;
}

Eigen::VectorXd lemma_laplace_rhs(const MarkovKernel& k, const Eigen::VectorXd& f_scaled,
                                  double lambda, long n_steps, const SFunctionSpec& spec,
                                  const DiagnosticsBundle& diag, const RunPlan& plan) {
  if (n_steps < 1) throw Error("InvalidPlan", "n_steps must be >= 1");
  validate_plan(plan);
  check_kappa(diag.kappa);
  double kt = diag.kappa * static_cast<double>(plan.T);
  double c = spec.S.lip_norm;
  double limit = kt / std::max(4.0 * c, 6.0 * diag.sigma_inf);
  if (!(lambda > 0.0) || !(lambda < limit))
    throw Error("LambdaOutOfRange", "lambda must lie in (0, " + std::to_string(limit) + ")");
  double lip = lipschitz_seminorm(f_scaled, k.space());
  if (lip > 2.0 / kt * (1.0 + 1e-12))
    throw Error("LipschitzViolated", "f must be 2/(kappa T)-Lipschitz for the Laplace bound");

  Eigen::VectorXd pnf = averaged_observable(k, f_scaled, n_steps);
  Eigen::VectorXd s_sum = Eigen::VectorXd::Zero(f_scaled.size());
  Eigen::VectorXd cur = spec.S.values;
  for (long j = 0; j < n_steps; ++j) {
    s_sum += cur;
    if (j + 1 < n_steps) cur = k.apply_to_function(cur);
  }
  double coeff = 4.0 * lambda * lambda /
                 (diag.kappa * static_cast<double>(plan.T) * static_cast<double>(plan.T));
  return (lambda * pnf + coeff * s_sum).array().exp();
}

}  // namespace mcmccert
