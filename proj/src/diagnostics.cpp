#include "mcmccert/diagnostics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mcmccert/errors.hpp"
#include "mcmccert/parallel.hpp"
#include "mcmccert/rng.hpp"
#include "mcmccert/transport.hpp"

namespace mcmccert {

namespace {

void require_exact(const MarkovKernel& k, const char* op) {
  if (!k.exact()) throw Error("ExactModeRequired", std::string(op) + " needs an exact-mode kernel");
}

}  // namespace

CurvatureReport coarse_ricci(const MarkovKernel& k, PairMode mode, int threads) {
  require_exact(k, "coarse_ricci");
  const FiniteMetricSpace& space = k.space();
  const int n = space.size();

  CurvatureReport report;
  report.mode = mode;
  if (mode == PairMode::AllPairs) {
    if (n > kAllPairsCap)
      throw Error("AllPairsCapExceeded",
                  "all-pairs sweep capped at " + std::to_string(kAllPairsCap) +
                      " states; use neighbor-pairs mode");
    report.pairs.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) report.pairs.emplace_back(i, j);
  } else {
    if (!space.has_neighbor_pairs())
      throw Error("NeighborPairsRequired", "neighbor-pairs mode needs declared neighbor pairs");
    report.pairs = space.neighbor_pairs();
  }

  const std::size_t np = report.pairs.size();
  report.ratios.resize(static_cast<Eigen::Index>(np));
  W1Options w1_opts;
  w1_opts.want_plan = false;
  parallel_for(np, threads, [&](std::size_t p) {
    auto [x, y] = report.pairs[p];
    double w1 = wasserstein1(k.row(x), k.row(y), space, w1_opts).value;
    report.ratios[static_cast<Eigen::Index>(p)] = w1 / space.dist(x, y);
  });

  // Deterministic reduction in pair order.
  double max_ratio = 0.0;
  std::pair<int, int> witness{-1, -1};
  for (std::size_t p = 0; p < np; ++p) {
    double r = report.ratios[static_cast<Eigen::Index>(p)];
    if (r > max_ratio) {
      max_ratio = r;
      witness = report.pairs[p];
    }
  }
  if (witness.first < 0) witness = report.pairs.empty() ? std::pair{0, 0} : report.pairs[0];
  if (max_ratio >= 1.0)
    throw Error("NonPositiveCurvature",
                "max contraction ratio " + std::to_string(max_ratio) + " at pair (" +
                    std::to_string(witness.first) + "," + std::to_string(witness.second) + ")",
                witness.first, witness.second);
  report.kappa = 1.0 - max_ratio;
  report.witness_pair = witness;
  return report;
}

Eigen::VectorXd eccentricity(const MarkovKernel& k, const FiniteDistribution& pi) {
  const FiniteMetricSpace& space = k.space();
  const int n = space.size();
  if (space.has_cached_matrix())
    return space.dist_matrix() * pi.dense(n);
  Eigen::VectorXd out(n);
  for (int x = 0; x < n; ++x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pi.support().size(); ++i)
      acc += pi.weights()[static_cast<Eigen::Index>(i)] * space.dist(x, pi.support()[i]);
    out[x] = acc;
  }
  return out;
}

EccBound eccentricity_apriori(const MarkovKernel& k, int x, const EccAprioriOptions& opts) {
  const FiniteMetricSpace& space = k.space();
  switch (opts.kind) {
    case EccBoundKind::Diameter:
      return {space.diameter(), 0.0};
    case EccBoundKind::Offset:
      return {opts.ecc_origin + space.dist(x, opts.origin), 0.0};
    case EccBoundKind::Local: {
      if (!(opts.kappa > 0.0) || opts.kappa > 1.0)
        throw Error("InvalidKappa", "local bound needs kappa in (0,1]");
      if (opts.samples > 0) {
        RngStream rng(opts.seed, 0x0ECCull);
        double sum = 0.0, sumsq = 0.0;
        for (long s = 0; s < opts.samples; ++s) {
          double d = space.dist(x, k.step(x, rng));
          sum += d;
          sumsq += d * d;
        }
        double nl = static_cast<double>(opts.samples);
        double mean = sum / nl;
        double var = std::max(0.0, sumsq / nl - mean * mean);
        double se = std::sqrt(var / nl);
        return {mean / opts.kappa, 3.0 * se / opts.kappa};
      }
      require_exact(k, "eccentricity_apriori(local)");
      const FiniteDistribution row = k.row(x);
      double acc = 0.0;
      for (std::size_t i = 0; i < row.support().size(); ++i)
        acc += row.weights()[static_cast<Eigen::Index>(i)] * space.dist(x, row.support()[i]);
      return {acc / opts.kappa, 0.0};
    }
  }
  throw Error("InvalidKappa", "unknown bound kind");
}

double diffusion_constant(const MarkovKernel& k, int x) {
  require_exact(k, "diffusion_constant");
  const FiniteMetricSpace& space = k.space();
  const FiniteDistribution row = k.row(x);
  const auto& sup = row.support();
  double acc = 0.0;
  for (std::size_t i = 0; i < sup.size(); ++i)
    for (std::size_t j = i + 1; j < sup.size(); ++j) {
      double d = space.dist(sup[i], sup[j]);
      acc += row.weights()[static_cast<Eigen::Index>(i)] *
             row.weights()[static_cast<Eigen::Index>(j)] * d * d;
    }
  return acc;  // the i<j sum carries the 1/2 of the symmetric double integral
}

Eigen::VectorXd diffusion_constants(const MarkovKernel& k) {
  const int n = k.space().size();
  Eigen::VectorXd out(n);
  for (int x = 0; x < n; ++x) out[x] = diffusion_constant(k, x);
  return out;
}

double local_dimension_lower(const MarkovKernel&, int, const LocalDimension& mode) {
  if (mode.kind == LocalDimension::Kind::One) return 1.0;
  if (!(mode.value >= 1.0))
    throw Error("InvalidDimension", "declared local dimension must be >= 1");
  return mode.value;
}

double granularity(const MarkovKernel& k) {
  require_exact(k, "granularity");
  const FiniteMetricSpace& space = k.space();
  const int n = space.size();
  double best = 0.0;
  for (int x = 0; x < n; ++x) {
    const FiniteDistribution row = k.row(x);
    const auto& sup = row.support();
    for (std::size_t i = 0; i < sup.size(); ++i)
      for (std::size_t j = i + 1; j < sup.size(); ++j)
        best = std::max(best, space.dist(sup[i], sup[j]));
  }
  return 0.5 * best;
}

namespace {

FiniteDistribution power_iteration_stationary(const MarkovKernel& k) {
  const int n = k.space().size();
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(n, 1.0 / n);
  Eigen::VectorXd next(n);
  const long cap = 2000000;
  for (long it = 0; it < cap; ++it) {
    next.setZero();
    for (int x = 0; x < n; ++x) {
      if (pi[x] == 0.0) continue;
      const FiniteDistribution row = k.row(x);
      for (std::size_t j = 0; j < row.support().size(); ++j)
        next[row.support()[j]] += pi[x] * row.weights()[static_cast<Eigen::Index>(j)];
    }
    double tv = 0.5 * (next - pi).cwiseAbs().sum();
    pi.swap(next);
    if (tv <= 1e-14) return FiniteDistribution::from_dense(pi / pi.sum());
  }
  throw Error("StationarySolveFailed", "power iteration did not converge");
}

}  // namespace

FiniteDistribution stationary_dist(const MarkovKernel& k) {
  require_exact(k, "stationary_dist");
  const int n = k.space().size();

  std::optional<FiniteDistribution> candidate;
  if (n <= kDirectStationaryCap) {
    Eigen::MatrixXd A = k.transition_matrix().transpose();
    A.diagonal().array() -= 1.0;  // pi is the kernel of P^T - I
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.dimensionOfKernel() == 1) {
      Eigen::VectorXd v = lu.kernel().col(0);
      double total = v.sum();
      if (std::abs(total) > 1e-12) {
        v /= total;
        if ((v.array() >= -1e-9).all()) {
          v = v.cwiseMax(0.0);
          v /= v.sum();
          candidate = FiniteDistribution::from_dense(v);
        }
      }
    }
  }
  if (!candidate) candidate = power_iteration_stationary(k);

  // Contract: ||pi P - pi||_TV <= 1e-12.
  FiniteDistribution next = k.apply_to_distribution(*candidate);
  double tv = total_variation(next, *candidate);
  if (tv > 1e-12) {
    // Polish by iterating; the chain contracts, so this can only help.
    for (int rounds = 0; rounds < 100000 && tv > 1e-13; ++rounds) {
      FiniteDistribution cur = std::move(next);
      next = k.apply_to_distribution(cur);
      tv = total_variation(next, cur);
      candidate = std::move(cur);
    }
    next = k.apply_to_distribution(*candidate);
    tv = total_variation(next, *candidate);
    if (tv > 1e-12)
      throw Error("StationarySolveFailed", "residual TV " + std::to_string(tv));
  }
  return *candidate;
}

DiagnosticsBundle compute_diagnostics(const MarkovKernel& k, PairMode mode, int threads) {
  DiagnosticsBundle diag;
  diag.chain_label = k.label();
  diag.stationary = stationary_dist(k);
  CurvatureReport curv = coarse_ricci(k, mode, threads);
  diag.kappa = curv.kappa;
  diag.witness_pair = curv.witness_pair;
  diag.mode = curv.mode;
  diag.ecc = eccentricity(k, *diag.stationary);
  diag.sigma2 = diffusion_constants(k);
  diag.n_lower = Eigen::VectorXd::Ones(k.space().size());
  diag.sigma_inf = granularity(k);
  diag.sup_ratio = sup_diffusion_ratio(diag);
  return diag;
}

double sup_diffusion_ratio(const DiagnosticsBundle& diag) {
  if (!(diag.kappa > 0.0)) throw Error("InvalidKappa", "kappa must be positive");
  return (diag.sigma2.array() / diag.n_lower.array()).maxCoeff() / diag.kappa;
}

void validate_s_spec(const MarkovKernel& k, const DiagnosticsBundle& diag,
                     const SFunctionSpec& spec, double tol) {
  const FiniteMetricSpace& space = k.space();
  if (spec.S.values.size() != space.size())
    throw Error("SFunctionInvalid", "S table size does not match the space");
  verify_lipschitz(spec.S, space, tol);
  for (int x = 0; x < space.size(); ++x) {
    double need = diag.sigma2[x] / (diag.n_lower[x] * diag.kappa);
    if (spec.S.values[x] < need - tol)
      throw Error("SFunctionInvalid",
                  "S(" + std::to_string(x) + ") = " + std::to_string(spec.S.values[x]) +
                      " below sigma^2/(n kappa) = " + std::to_string(need),
                  x, x);
  }
  if (diag.stationary) {
    double exact_mean = diag.stationary->expectation(spec.S.values);
    switch (spec.mean_source) {
      case SFunctionSpec::MeanSource::ExactStationary:
        if (std::abs(spec.mean_value - exact_mean) > 1e-9)
          throw Error("SFunctionInvalid", "declared exact mean of S is off by " +
                                              std::to_string(spec.mean_value - exact_mean));
        break;
      case SFunctionSpec::MeanSource::OriginBound: {
        double bound = spec.S.values[spec.origin] + spec.S.lip_norm * diag.ecc[spec.origin];
        if (std::abs(spec.mean_value - bound) > 1e-9)
          throw Error("SFunctionInvalid", "origin bound for mean of S is off");
        if (spec.mean_value < exact_mean - 1e-9)
          throw Error("SFunctionInvalid", "origin bound does not dominate the exact mean");
        break;
      }
      case SFunctionSpec::MeanSource::Declared:
        if (spec.mean_value < exact_mean - 1e-9)
          throw Error("SFunctionInvalid", "declared mean of S below the exact mean");
        break;
    }
  }
}

}  // namespace mcmccert
