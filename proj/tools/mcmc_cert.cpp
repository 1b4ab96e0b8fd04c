// mcmc-cert: curvature diagnostics, error-bound certificates and empirical
// validation for Markov chains described by JSON spec files.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mcmccert/errors.hpp"
#include "mcmccert/json_io.hpp"
#include "mcmccert/transport.hpp"

namespace mc = mcmccert;

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("MCMC_CERT_SEED")) return std::strtoull(env, nullptr, 10);
  return 12345;
}

mc::PairMode parse_pairs(const std::string& mode) {
  if (mode == "all") return mc::PairMode::AllPairs;
  if (mode == "neighbors") return mc::PairMode::NeighborPairs;
  throw mc::Error("SchemaViolation", "--pairs must be all or neighbors");
}

const mc::BuiltChain& require_finite(const mc::ParsedChain& chain, const char* what) {
  if (const mc::BuiltChain* c = chain.finite()) return *c;
  throw mc::Error("ExactModeRequired", std::string(what) + " needs an exact-mode (finite) chain");
}

mc::RunPlan make_plan(long T, long T0, double lip, int start) {
  mc::RunPlan plan;
  plan.T = T;
  plan.T0 = T0;
  plan.lip_norm = lip;
  plan.start = start;
  mc::validate_plan(plan);
  return plan;
}

std::vector<mc::BoundCertificate> build_certificates(const mc::DiagnosticsBundle& diag,
                                                     const mc::RunPlan& plan, int start,
                                                     std::optional<double> radius,
                                                     std::optional<double> alpha,
                                                     const std::string& which) {
  std::vector<mc::BoundCertificate> certs;
  double ecc_x = diag.ecc[start];
  bool uniform = which == "uniform" || which == "both";
  bool with_s = (which == "s" || which == "both") && diag.s_spec.has_value();

  certs.push_back(mc::bias_bound(plan, diag.kappa, ecc_x));
  if (uniform) certs.push_back(mc::variance_bound_uniform(plan, diag.kappa, diag.sup_ratio));
  if (with_s) certs.push_back(mc::variance_bound_s(plan, diag.kappa, *diag.s_spec, ecc_x));
  if (radius) {
    if (uniform)
      certs.push_back(mc::concentration_uniform(plan, diag.kappa, diag.sup_ratio, diag.sigma_inf,
                                                *radius));
    if (with_s)
      certs.push_back(
          mc::concentration_s(plan, diag.kappa, *diag.s_spec, ecc_x, diag.sigma_inf, *radius));
  }
  if (alpha) {
    if (uniform)
      certs.push_back(mc::confidence_radius(plan, diag, *alpha, mc::TailFamily::Uniform));
    if (with_s) certs.push_back(mc::confidence_radius(plan, diag, *alpha, mc::TailFamily::WithS));
  }
  if (certs.size() >= 2 && certs[1].kind == "variance")
    certs.push_back(mc::mse_decomposition(certs[0], certs[1]));
  return certs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coarse-curvature diagnostics and certified MCMC error bounds"};
  app.require_subcommand(1);
  app.fallthrough();  // --seed / --threads may follow the subcommand
  int threads = 1;
  std::optional<std::uint64_t> seed_flag;
  app.add_option("--threads", threads, "worker threads for sweeps and ensembles");
  app.add_option("--seed", seed_flag, "base RNG seed (falls back to MCMC_CERT_SEED)");

  // --- diagnose ---
  auto* diagnose = app.add_subcommand("diagnose", "compute the diagnostics bundle");
  std::string diag_chain, diag_out, diag_pairs = "all";
  diagnose->add_option("--chain", diag_chain, "chain spec file")->required();
  diagnose->add_option("--pairs", diag_pairs, "pair set: all | neighbors");
  diagnose->add_option("--out", diag_out, "output report path")->required();

  // --- bound ---
  auto* bound = app.add_subcommand("bound", "evaluate bound certificates");
  std::string bound_chain, bound_out, bound_which = "both", bound_pairs = "all";
  long bound_T = 0, bound_T0 = 0;
  double bound_lip = 1.0;
  int bound_start = 0;
  std::optional<double> bound_r, bound_alpha;
  bound->add_option("--chain", bound_chain)->required();
  bound->add_option("--T", bound_T, "averaging steps")->required();
  bound->add_option("--T0", bound_T0, "burn-in steps");
  bound->add_option("--lip", bound_lip, "Lipschitz norm of the observable")->required();
  bound->add_option("--start", bound_start, "starting state index");
  bound->add_option("--r", bound_r, "deviation radius for tail bounds");
  bound->add_option("--alpha", bound_alpha, "tail probability to invert");
  bound->add_option("--which", bound_which, "bound family: uniform | s | both");
  bound->add_option("--pairs", bound_pairs, "pair set: all | neighbors");
  bound->add_option("--out", bound_out)->required();

  // --- simulate ---
  auto* simulate = app.add_subcommand("simulate", "run a replica ensemble");
  std::string sim_chain, sim_obs, sim_out, sim_csv;
  long sim_T = 0, sim_T0 = 0, sim_replicas = 1000;
  int sim_start = 0;
  std::vector<double> sim_radii;
  simulate->add_option("--chain", sim_chain)->required();
  simulate->add_option("--obs", sim_obs, "observable spec file")->required();
  simulate->add_option("--T", sim_T)->required();
  simulate->add_option("--T0", sim_T0);
  simulate->add_option("--replicas", sim_replicas);
  simulate->add_option("--start", sim_start);
  simulate->add_option("--radii", sim_radii, "tail radii")->delimiter(',');
  simulate->add_option("--out", sim_out)->required();
  simulate->add_option("--csv", sim_csv, "also write tail curve CSV");

  // --- validate ---
  auto* validate = app.add_subcommand("validate", "check certificates against reality");
  std::string val_chain, val_obs, val_out, val_csv, val_pairs = "all";
  long val_T = 0, val_T0 = 0, val_replicas = 10000;
  int val_start = 0;
  std::optional<double> val_alpha;
  std::vector<double> val_radii;
  validate->add_option("--chain", val_chain)->required();
  validate->add_option("--obs", val_obs)->required();
  validate->add_option("--T", val_T)->required();
  validate->add_option("--T0", val_T0);
  validate->add_option("--replicas", val_replicas);
  validate->add_option("--start", val_start);
  validate->add_option("--r", val_radii, "tail radii to certify")->delimiter(',');
  validate->add_option("--alpha", val_alpha, "tail probability to invert and certify");
  validate->add_option("--pairs", val_pairs, "pair set: all | neighbors");
  validate->add_option("--out", val_out)->required();
  validate->add_option("--csv", val_csv, "tail curve CSV");

  // --- w1 ---
  auto* w1 = app.add_subcommand("w1", "exact W1 between two point-cloud distributions");
  std::string w1_mu, w1_nu, w1_metric = "euclidean", w1_out;
  w1->add_option("--mu", w1_mu)->required();
  w1->add_option("--nu", w1_nu)->required();
  w1->add_option("--metric", w1_metric, "euclidean | l1 | trivial");
  w1->add_option("--out", w1_out, "optional JSON output");

  CLI11_PARSE(app, argc, argv);
  std::uint64_t seed = resolve_seed(seed_flag);

  try {
    if (*diagnose) {
      mc::ParsedChain chain = mc::load_chain_spec(diag_chain);
      const mc::BuiltChain& finite = require_finite(chain, "diagnose");
      mc::DiagnosticsBundle diag =
          mc::diagnostics_with_analytic(finite, parse_pairs(diag_pairs), threads);
      mc::write_file_atomic(diag_out, mc::to_json(diag).dump(2) + "\n");
      std::cout << "chain      " << diag.chain_label << "\n"
                << "kappa      " << fmt(diag.kappa) << "\n"
                << "witness    (" << diag.witness_pair.first << ", " << diag.witness_pair.second
                << ")\n"
                << "sigma_inf  " << fmt(diag.sigma_inf) << "\n"
                << "sup_ratio  " << (diag.sup_ratio ? fmt(*diag.sup_ratio) : "unbounded") << "\n"
                << "report     " << diag_out << "\n";
      return 0;
    }
    if (*bound) {
      mc::ParsedChain chain = mc::load_chain_spec(bound_chain);
      const mc::BuiltChain& finite = require_finite(chain, "bound");
      mc::DiagnosticsBundle diag =
          mc::diagnostics_with_analytic(finite, parse_pairs(bound_pairs), threads);
      if (bound_start < 0 || bound_start >= finite.kernel.space().size())
        throw mc::Error("SchemaViolation", "/start: state index out of range");
      mc::RunPlan plan = make_plan(bound_T, bound_T0, bound_lip, bound_start);
      auto certs = build_certificates(diag, plan, bound_start, bound_r, bound_alpha, bound_which);
      mc::Json out = mc::Json::array();
      for (const auto& cert : certs) out.push_back(mc::to_json(cert));
      mc::write_file_atomic(bound_out, out.dump(2) + "\n");
      for (const auto& cert : certs)
        std::cout << cert.formula_id << "  value " << fmt(cert.value)
                  << (cert.regime != "n/a" ? "  regime " + cert.regime : "")
                  << (cert.vacuous ? "  (vacuous)" : "") << "\n";
      std::cout << "certificates " << bound_out << "\n";
      return 0;
    }
    if (*simulate) {
      mc::ParsedChain chain = mc::load_chain_spec(sim_chain);
      mc::Json obs_spec = mc::Json::parse(mc::read_file(sim_obs));
      mc::EnsembleOptions opts;
      opts.threads = threads;
      opts.radii = sim_radii;
      mc::EnsembleResult result;
      if (const mc::BuiltChain* finite = chain.finite()) {
        mc::Observable obs = mc::builtin_observable(obs_spec, chain);
        mc::RunPlan plan = make_plan(sim_T, sim_T0, obs.lip_norm, sim_start);
        result = mc::run_ensemble(finite->kernel, obs, plan, sim_replicas, seed, opts);
      } else if (const mc::EulerChain* euler = std::get_if<mc::EulerChain>(&chain.chain)) {
        mc::PointObservable obs = mc::builtin_point_observable(obs_spec);
        Eigen::VectorXd start = Eigen::VectorXd::Zero(euler->dim);
        result = mc::run_ensemble(euler->chain, obs, start, sim_T, sim_T0, sim_replicas, seed,
                                  opts);
      } else {
        const auto& ss = std::get<mc::StateSpaceChain>(chain.chain);
        mc::PointObservable obs = mc::builtin_point_observable(obs_spec);
        Eigen::VectorXd start = Eigen::VectorXd::Zero(1);
        result = mc::run_ensemble(ss.chain, obs, start, sim_T, sim_T0, sim_replicas, seed, opts);
      }
      mc::write_file_atomic(sim_out, mc::to_json(result).dump(2) + "\n");
      if (!sim_csv.empty()) {
        std::ostringstream csv;
        csv << "radius,tail_freq\n";
        for (auto [r, freq] : result.tail_freq) csv << fmt(r) << "," << fmt(freq) << "\n";
        mc::write_file_atomic(sim_csv, csv.str());
      }
      std::cout << "mean of means " << fmt(result.empirical_mean_of_means) << "\n"
                << "variance      " << fmt(result.empirical_variance) << "\n"
                << "result        " << sim_out << "\n";
      return 0;
    }
    if (*validate) {
      mc::ParsedChain chain = mc::load_chain_spec(val_chain);
      const mc::BuiltChain& finite = require_finite(chain, "validate");
      mc::Json obs_spec = mc::Json::parse(mc::read_file(val_obs));
      mc::Observable obs = mc::builtin_observable(obs_spec, chain);
      mc::DiagnosticsBundle diag =
          mc::diagnostics_with_analytic(finite, parse_pairs(val_pairs), threads);
      if (val_start < 0 || val_start >= finite.kernel.space().size())
        throw mc::Error("SchemaViolation", "/start: state index out of range");
      mc::RunPlan plan = make_plan(val_T, val_T0, obs.lip_norm, val_start);
      std::vector<mc::BoundCertificate> certs =
          build_certificates(diag, plan, val_start, std::nullopt, val_alpha, "both");
      for (double r : val_radii) {
        certs.push_back(
            mc::concentration_uniform(plan, diag.kappa, diag.sup_ratio, diag.sigma_inf, r));
        if (diag.s_spec)
          certs.push_back(
              mc::concentration_s(plan, diag.kappa, *diag.s_spec, diag.ecc[val_start],
                                  diag.sigma_inf, r));
      }
      mc::ValidationReport report =
          mc::validate_certificates(finite.kernel, obs, plan, certs, val_replicas, seed, threads);
      mc::write_file_atomic(val_out, mc::to_json(report).dump(2) + "\n");
      if (!val_csv.empty()) {
        std::ostringstream csv;
        csv << "formula_id,radius,observed_freq,bound\n";
        for (std::size_t i = 0; i < report.checks.size(); ++i) {
          const auto& check = report.checks[i];
          if (check.kind != "concentration") continue;
          double r = 0.0;
          for (const auto& [key, val] : certs[i].inputs)
            if (key == "r_abs") r = val;
          csv << check.formula_id << "," << fmt(r) << "," << fmt(check.observed) << ","
              << fmt(check.bound) << "\n";
        }
        mc::write_file_atomic(val_csv, csv.str());
      }
      for (const auto& check : report.checks)
        std::cout << check.formula_id << "  " << mc::verdict_name(check.verdict) << "  bound "
                  << fmt(check.bound) << "  observed " << fmt(check.observed) << "\n";
      std::cout << "report " << val_out << "\n";
      return report.any_violated ? 3 : 0;
    }
    if (*w1) {
      mc::PointCloudDistribution a = mc::load_point_cloud(w1_mu);
      mc::PointCloudDistribution b = mc::load_point_cloud(w1_nu);
      if (a.points.cols() != b.points.cols())
        throw mc::Error("SchemaViolation", "/points: dimension mismatch between files");
      // Stack both clouds into one space; mu occupies the first rows.
      Eigen::MatrixXd pts(a.points.rows() + b.points.rows(), a.points.cols());
      pts << a.points, b.points;
      mc::FiniteMetricSpace::DistFn dist;
      if (w1_metric == "euclidean")
        dist = [pts](int i, int j) { return (pts.row(i) - pts.row(j)).norm(); };
      else if (w1_metric == "l1")
        dist = [pts](int i, int j) { return (pts.row(i) - pts.row(j)).cwiseAbs().sum(); };
      else if (w1_metric == "trivial")
        dist = [pts](int i, int j) { return pts.row(i) == pts.row(j) ? 0.0 : 1.0; };
      else
        throw mc::Error("SchemaViolation", "--metric must be euclidean, l1 or trivial");
      // Identical coordinates must collapse to one point for a valid metric.
      std::vector<int> id(static_cast<std::size_t>(pts.rows()));
      int n_unique = 0;
      for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        int found = -1;
        for (Eigen::Index j = 0; j < i; ++j)
          if (pts.row(i) == pts.row(j)) {
            found = id[static_cast<std::size_t>(j)];
            break;
          }
        id[static_cast<std::size_t>(i)] = found >= 0 ? found : n_unique++;
      }
      std::vector<Eigen::Index> rep(static_cast<std::size_t>(n_unique));
      for (Eigen::Index i = 0; i < pts.rows(); ++i)
        rep[static_cast<std::size_t>(id[static_cast<std::size_t>(i)])] = i;
      mc::FiniteMetricSpace space(
          n_unique,
          [dist, rep](int i, int j) {
            return dist(static_cast<int>(rep[static_cast<std::size_t>(i)]),
                        static_cast<int>(rep[static_cast<std::size_t>(j)]));
          });
      Eigen::VectorXd wa = Eigen::VectorXd::Zero(n_unique), wb = Eigen::VectorXd::Zero(n_unique);
      for (Eigen::Index i = 0; i < a.weights.size(); ++i)
        wa[id[static_cast<std::size_t>(i)]] += a.weights[i];
      for (Eigen::Index i = 0; i < b.weights.size(); ++i)
        wb[id[static_cast<std::size_t>(a.points.rows() + i)]] += b.weights[i];
      mc::FiniteDistribution mu = mc::FiniteDistribution::from_dense(wa);
      mc::FiniteDistribution nu = mc::FiniteDistribution::from_dense(wb);
      mc::W1Result result = mc::wasserstein1(mu, nu, space);
      std::cout << fmt(result.value) << "\n";
      if (!w1_out.empty()) {
        mc::Json out;
        out["schema"] = "v1";
        out["value"] = result.value;
        out["metric"] = w1_metric;
        mc::write_file_atomic(w1_out, out.dump(2) + "\n");
      }
      return 0;
    }
  } catch (const mc::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return err.code() == "NonPositiveCurvature" ? 2 : 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
