#include "mcmccert/harness.hpp"

#include <algorithm>
#include <cmath>

#include "mcmccert/diagnostics.hpp"
#include "mcmccert/errors.hpp"

namespace mcmccert {

namespace {

// Shared ensemble core: fills replica means (slot per replica), then reduces
// sequentially in replica order.
template <class RunReplica>
EnsembleResult reduce_ensemble(long replicas, long T, long T0, double lip, std::uint64_t seed,
                               const EnsembleOptions& opts, RunReplica&& run_replica) {
  if (replicas < 1) throw Error("InvalidPlan", "need at least one replica");
  EnsembleResult result;
  result.replicas = replicas;
  result.T = T;
  result.T0 = T0;
  result.lip_norm = lip;
  result.seed = seed;
  result.replica_means.resize(static_cast<std::size_t>(replicas));
  parallel_for(static_cast<std::size_t>(replicas), opts.threads, [&](std::size_t i) {
    RngStream rng(seed, static_cast<std::uint64_t>(i));
    result.replica_means[i] = run_replica(rng);
  });

  double sum = 0.0;
  for (double m : result.replica_means) sum += m;
  double mean = sum / static_cast<double>(replicas);
  double ss = 0.0;
  for (double m : result.replica_means) ss += (m - mean) * (m - mean);
  result.empirical_mean_of_means = mean;
  result.empirical_variance = replicas > 1 ? ss / static_cast<double>(replicas - 1) : 0.0;
  if (opts.exact_pi_f) result.empirical_bias = mean - *opts.exact_pi_f;
  result.center = opts.exact_center.value_or(mean);
  result.center_source = opts.exact_center ? "exact" : "empirical";

  std::vector<double> radii = opts.radii;
  std::sort(radii.begin(), radii.end());
  for (double r : radii) {
    long hits = 0;
    for (double m : result.replica_means)
      if (std::abs(m - result.center) >= r) ++hits;
    result.tail_freq.emplace_back(r, static_cast<double>(hits) / static_cast<double>(replicas));
  }
  return result;
}

}  // namespace

EnsembleResult run_ensemble(const MarkovKernel& k, const Observable& f, const RunPlan& plan,
                            long replicas, std::uint64_t seed, const EnsembleOptions& opts) {
  validate_plan(plan);
  const Eigen::VectorXd& values = f.values;
  if (values.size() != k.space().size())
    throw Error("InvalidPlan", "observable table does not match the space");

  // Starting state per replica: fixed point, or inverse-CDF sample of the
  // start distribution from the replica's own stream.
  const FiniteDistribution* start_dist = std::get_if<FiniteDistribution>(&plan.start);
  Eigen::VectorXd start_cdf;
  if (start_dist) {
    start_cdf.resize(start_dist->size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < start_dist->size(); ++i) {
      acc += start_dist->weights()[i];
      start_cdf[i] = acc;
    }
    start_cdf[start_dist->size() - 1] = 1.0;
  }
  int start_point = start_dist ? 0 : std::get<int>(plan.start);

  return reduce_ensemble(
      replicas, plan.T, plan.T0, plan.lip_norm, seed, opts, [&](RngStream& rng) {
        int x = start_dist
                    ? start_dist->support()[static_cast<std::size_t>(rng.categorical(start_cdf))]
                    : start_point;
        for (long s = 0; s < plan.T0; ++s) x = k.step(x, rng);
        double acc = 0.0;
        for (long s = 0; s < plan.T; ++s) {
          x = k.step(x, rng);
          acc += values[x];
        }
        return acc / static_cast<double>(plan.T);
      });
}

EnsembleResult run_ensemble(const SamplerChain& chain, const PointObservable& f,
                            const SamplerChain::Point& start, long T, long T0, long replicas,
                            std::uint64_t seed, const EnsembleOptions& opts) {
  if (T < 1 || T0 < 0) throw Error("InvalidPlan", "need T >= 1 and T0 >= 0");
  return reduce_ensemble(replicas, T, T0, f.lip_norm, seed, opts, [&](RngStream& rng) {
    SamplerChain::Point x = start;
    for (long s = 0; s < T0; ++s) x = chain.step(x, rng);
    double acc = 0.0;
    for (long s = 0; s < T; ++s) {
      x = chain.step(x, rng);
      acc += f.f(x);
    }
    return acc / static_cast<double>(T);
  });
}

ExactMoments exact_moments(const MarkovKernel& k, const Observable& f, const RunPlan& plan) {
  validate_plan(plan);
  if (!k.exact()) throw Error("ExactModeRequired", "exact_moments needs an exact-mode kernel");
  const int n = k.space().size();
  if (n > kOracleStateCap)
    throw Error("OracleTooLarge", "exact oracle capped at " + std::to_string(kOracleStateCap) +
                                      " states");
  const long horizon = plan.T0 + plan.T;
  if (horizon > kOracleStepCap ||
      static_cast<double>(plan.T + 1) * n > kOracleWorkCap)
    throw Error("OracleTooLarge", "plan exceeds the oracle work budget");

  const Eigen::VectorXd& fv = f.values;

  // First moments: mean_by_start = (1/T) sum_{k=T0+1}^{T0+T} P^k f.
  // Store P^l f for l = 1..T-1; the backward pass below needs them.
  std::vector<Eigen::VectorXd> pf;
  pf.reserve(static_cast<std::size_t>(std::max<long>(plan.T - 1, 0)));
  Eigen::VectorXd mean_sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd second_sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd cur_f = fv;                        // P^l f
  Eigen::VectorXd cur_f2 = fv.array().square();     // P^l f^2
  for (long l = 1; l <= horizon; ++l) {
    cur_f = k.apply_to_function(cur_f);
    cur_f2 = k.apply_to_function(cur_f2);
    if (l <= plan.T - 1) pf.push_back(cur_f);
    if (l > plan.T0) {
      mean_sum += cur_f;
      second_sum += cur_f2;
    }
  }
  Eigen::VectorXd mean_by_start = mean_sum / static_cast<double>(plan.T);

  // Cross terms: sum_{T0 < i < j <= T0+T} E_x f(X_i) f(X_j)
  //   = sum_i P^i( f * G_{T0+T-i} )(x) with G_m = sum_{l=1}^m P^l f,
  // accumulated backward so each level costs one kernel application.
  Eigen::VectorXd cross = Eigen::VectorXd::Zero(n);
  if (plan.T >= 2) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);  // G_m, m = T0+T-i
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    for (long i = horizon - 1; i >= plan.T0 + 1; --i) {
      g += pf[static_cast<std::size_t>(horizon - i - 1)];  // adds P^{T0+T-i} f
      acc = fv.cwiseProduct(g) + k.apply_to_function(acc);
    }
    for (long l = 0; l < plan.T0 + 1; ++l) acc = k.apply_to_function(acc);
    cross = acc;
  }

  ExactMoments out;
  out.mean_by_start = mean_by_start;
  out.second_by_start =
      (second_sum + 2.0 * cross) / (static_cast<double>(plan.T) * static_cast<double>(plan.T));
  out.variance_by_start = out.second_by_start - mean_by_start.array().square().matrix();
  if (const FiniteDistribution* mu = std::get_if<FiniteDistribution>(&plan.start)) {
    out.mean = mu->expectation(out.mean_by_start);
    double second = mu->expectation(out.second_by_start);
    out.variance = second - out.mean * out.mean;
  } else {
    int x = std::get<int>(plan.start);
    out.mean = out.mean_by_start[x];
    out.variance = out.variance_by_start[x];
  }
  return out;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Sound: return "SOUND";
    case Verdict::Vacuous: return "VACUOUS";
    case Verdict::Violated: return "VIOLATED";
  }
  return "?";
}

ValidationReport validate_certificates(const MarkovKernel& k, const Observable& f,
                                       const RunPlan& plan,
                                       const std::vector<BoundCertificate>& certs, long replicas,
                                       std::uint64_t seed, int threads) {
  validate_plan(plan);
  ValidationReport report;
  report.replicas = replicas;
  report.seed = seed;

  const double diam = k.space().diameter();
  const double trivial_bias = f.lip_norm * diam;
  const double trivial_var = 0.25 * trivial_bias * trivial_bias;
  // Rounding floor of the moment oracle itself: T+T0 accumulations of
  // values up to ||f||_inf (squared for second moments).
  const double f_scale = std::max(1.0, f.values.cwiseAbs().maxCoeff());
  const double horizon_ops = static_cast<double>(plan.T0 + plan.T + 2);
  const double oracle_eps_bias = 1e-14 * horizon_ops * f_scale;
  const double oracle_eps_var = 1e-14 * horizon_ops * f_scale * f_scale;

  std::optional<ExactMoments> oracle;
  const long horizon = plan.T0 + plan.T;
  if (k.space().size() <= kOracleStateCap && horizon <= kOracleStepCap &&
      static_cast<double>(plan.T + 1) * k.space().size() <= kOracleWorkCap)
    oracle = exact_moments(k, f, plan);

  FiniteDistribution pi = stationary_dist(k);
  const double pi_f = pi.expectation(f.values);

  // Radii requested by the concentration certificates drive the ensemble.
  EnsembleOptions opts;
  opts.threads = threads;
  opts.exact_pi_f = pi_f;
  if (oracle) opts.exact_center = oracle->mean;
  for (const auto& cert : certs) {
    if (cert.kind == "concentration") {
      for (const auto& [key, val] : cert.inputs)
        if (key == "r_abs") opts.radii.push_back(val);
    } else if (cert.kind == "confidence_radius" && !cert.vacuous) {
      opts.radii.push_back(cert.value);
    }
  }
  std::optional<EnsembleResult> ensemble;
  if (replicas > 0) ensemble = run_ensemble(k, f, plan, replicas, seed, opts);

  auto tail_freq_at = [&](double r) -> std::optional<double> {
    if (!ensemble) return std::nullopt;
    for (const auto& [radius, freq] : ensemble->tail_freq)
      if (radius == r) return freq;
    return std::nullopt;
  };
  auto binom_slack = [&](double freq) {
    if (!ensemble) return 0.0;
    double nr = static_cast<double>(ensemble->replicas);
    return 3.0 * std::sqrt(std::max(freq * (1.0 - freq), 1.0 / nr) / nr);
  };

  for (const auto& cert : certs) {
    CertificateCheck check;
    check.formula_id = cert.formula_id;
    check.kind = cert.kind;
    check.bound = cert.value;

    if (cert.kind == "bias") {
      if (!oracle) {
        check.note = "no exact oracle within budget";
        check.verdict = Verdict::Vacuous;
      } else {
        check.observed = std::abs(oracle->mean - pi_f);
        check.slack = oracle_eps_bias;
        check.note = "exact bias";
        check.verdict = check.observed <= cert.value + check.slack
                            ? (cert.value >= trivial_bias ? Verdict::Vacuous : Verdict::Sound)
                            : Verdict::Violated;
      }
    } else if (cert.kind == "variance") {
      if (!oracle && !ensemble) {
        check.note = "no oracle or ensemble available";
        check.verdict = Verdict::Vacuous;
      } else {
        if (oracle) {
          check.observed = oracle->variance;
          check.slack = oracle_eps_var;
          check.note = "exact variance";
        } else {
          check.observed = ensemble->empirical_variance;
          check.slack =
              3.0 * ensemble->empirical_variance *
              std::sqrt(2.0 / std::max<double>(1.0, static_cast<double>(replicas) - 1.0));
          check.note = "empirical variance";
        }
        check.verdict = check.observed <= cert.value + check.slack
                            ? (cert.value >= trivial_var ? Verdict::Vacuous : Verdict::Sound)
                            : Verdict::Violated;
      }
    } else if (cert.kind == "concentration") {
      double r = 0.0;
      for (const auto& [key, val] : cert.inputs)
        if (key == "r_abs") r = val;
      auto freq = tail_freq_at(r);
      if (!freq) {
        check.note = "no ensemble";
        check.verdict = Verdict::Vacuous;
      } else {
        check.observed = *freq;
        check.slack = binom_slack(*freq);
        check.note = "tail frequency at r=" + std::to_string(r);
        check.verdict = check.observed <= cert.value + check.slack
                            ? (cert.value >= 1.0 ? Verdict::Vacuous : Verdict::Sound)
                            : Verdict::Violated;
      }
    } else if (cert.kind == "confidence_radius") {
      double alpha = 0.0;
      for (const auto& [key, val] : cert.inputs)
        if (key == "alpha") alpha = val;
      if (cert.vacuous) {
        check.verdict = Verdict::Vacuous;
        check.note = "vacuous radius";
      } else {
        auto freq = tail_freq_at(cert.value);
        if (!freq) {
          check.note = "no ensemble";
          check.verdict = Verdict::Vacuous;
        } else {
          check.observed = *freq;
          check.slack = binom_slack(*freq);
          check.note = "tail frequency at the returned radius vs alpha=" + std::to_string(alpha);
          check.verdict =
              check.observed <= alpha + check.slack ? Verdict::Sound : Verdict::Violated;
        }
      }
    } else if (cert.kind == "mse") {
      if (!oracle) {
        check.note = "no exact oracle within budget";
        check.verdict = Verdict::Vacuous;
      } else {
        double bias = oracle->mean - pi_f;
        check.observed = bias * bias + oracle->variance;
        check.slack = oracle_eps_var;
        check.note = "exact mean squared error";
        check.verdict =
            check.observed <= cert.value + check.slack ? Verdict::Sound : Verdict::Violated;
      }
    } else {
      check.note = "unrecognized certificate kind";
      check.verdict = Verdict::Vacuous;
    }
    if (check.verdict == Verdict::Violated) report.any_violated = true;
    report.checks.push_back(std::move(check));
  }
  return report;
}

}  // namespace mcmccert
