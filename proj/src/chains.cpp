#include "mcmccert/chains.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <memory>
#include <string>

#include "mcmccert/errors.hpp"

namespace mcmccert {

namespace {

int hamming(int a, int b) { return std::popcount(static_cast<unsigned>(a ^ b)); }

std::vector<std::pair<int, int>> bitflip_neighbor_pairs(int n_bits) {
  const int n = 1 << n_bits;
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(n_bits) << (n_bits - 1));
  for (int x = 0; x < n; ++x)
    for (int b = 0; b < n_bits; ++b) {
      int y = x ^ (1 << b);
      if (y > x) pairs.emplace_back(x, y);
    }
  return pairs;
}

std::vector<std::string> bit_labels(int n_bits) {
  const int n = 1 << n_bits;
  if (n > FiniteMetricSpace::kDenseCacheLimit) return {};
  std::vector<std::string> labels(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) {
    std::string s(static_cast<std::size_t>(n_bits), '0');
    for (int b = 0; b < n_bits; ++b)
      if (x & (1 << (n_bits - 1 - b))) s[static_cast<std::size_t>(b)] = '1';
    labels[static_cast<std::size_t>(x)] = std::move(s);
  }
  return labels;
}

}  // namespace

BuiltChain hypercube(int n_bits) {
  if (n_bits < 1 || n_bits > 20)
    throw Error("InvalidParams", "hypercube needs 1 <= n_bits <= 20 in exact mode");
  const int n = 1 << n_bits;
  auto space = std::make_shared<FiniteMetricSpace>(
      n, [](int i, int j) { return static_cast<double>(hamming(i, j)); },
      bitflip_neighbor_pairs(n_bits), bit_labels(n_bits));

  const double stay = 0.5;
  const double flip = 0.5 / static_cast<double>(n_bits);
  auto rows = [n_bits, stay, flip](int x) {
    std::vector<int> support;
    support.reserve(static_cast<std::size_t>(n_bits) + 1);
    support.push_back(x);
    for (int b = 0; b < n_bits; ++b) support.push_back(x ^ (1 << b));
    std::sort(support.begin(), support.end());
    Eigen::VectorXd w(static_cast<Eigen::Index>(support.size()));
    for (std::size_t i = 0; i < support.size(); ++i)
      w[static_cast<Eigen::Index>(i)] = support[i] == x ? stay : flip;
    return FiniteDistribution(std::move(support), std::move(w));
  };
  MarkovKernel kernel(space, MarkovKernel::RowFn(rows),
                      "hypercube_" + std::to_string(n_bits));
  kernel.set_sampler([n_bits](int x, RngStream& rng) {
    int site = std::min(n_bits - 1, static_cast<int>(rng.uniform01() * n_bits));
    bool set = rng() >> 63;
    return set ? (x | (1 << site)) : (x & ~(1 << site));
  });

  AnalyticDiagnostics a;
  a.kappa = 1.0 / n_bits;
  a.ecc_const = 0.5 * n_bits;
  a.sigma_inf = n_bits >= 2 ? 1.0 : 0.5;
  a.sigma2_const = 0.75 - 0.5 / n_bits;  // two independent lazy flips
  // Per-point dimension refinement giving sigma^2 / n <= 1/2.
  double n_lo = std::max(1.0, 2.0 * *a.sigma2_const);
  a.n_lower = Eigen::VectorXd::Constant(n, n_lo);
  a.sup_ratio = (*a.sigma2_const / n_lo) * n_bits;
  Observable s_obs{Eigen::VectorXd::Constant(n, *a.sup_ratio), 0.0, "s_const"};
  a.s_spec = SFunctionSpec{std::move(s_obs), SFunctionSpec::MeanSource::ExactStationary,
                           *a.sup_ratio, 0};
  a.stationary = FiniteDistribution::uniform(n);
  return BuiltChain{std::move(kernel), std::move(a)};
}

FiniteDistribution gibbs_distribution(const std::vector<std::pair<int, int>>& edges,
                                      int n_vertices, double beta, double h) {
  const int n = 1 << n_vertices;
  Eigen::VectorXd energy(n);
  for (int s = 0; s < n; ++s) {
    auto spin = [s](int v) { return (s >> v) & 1 ? 1.0 : -1.0; };
    double u = 0.0;
    for (auto [a, b] : edges) u -= spin(a) * spin(b);
    for (int v = 0; v < n_vertices; ++v) u -= h * spin(v);
    energy[s] = u;
  }
  Eigen::VectorXd logw = -beta * energy.array();
  double shift = logw.maxCoeff();
  Eigen::VectorXd w = (logw.array() - shift).exp();
  return FiniteDistribution::from_dense(w / w.sum());
}

BuiltChain ising_heat_bath(const std::vector<std::pair<int, int>>& edges, int n_vertices,
                           double beta, double h) {
  if (n_vertices < 1 || n_vertices > 16)
    throw Error("InvalidParams", "heat bath exact mode caps at 16 vertices");
  if (beta < 0.0) throw Error("InvalidParams", "beta must be nonnegative");
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_vertices));
  for (auto [a, b] : edges) {
    if (a < 0 || a >= n_vertices || b < 0 || b >= n_vertices || a == b)
      throw Error("InvalidParams", "bad edge in graph");
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  const int n = 1 << n_vertices;
  auto space = std::make_shared<FiniteMetricSpace>(
      n, [](int i, int j) { return static_cast<double>(hamming(i, j)); },
      bitflip_neighbor_pairs(n_vertices));

  // s(x) = +1 with conditional probability 1 / (1 + exp(-2 beta (m + h))),
  // m = sum of neighboring spins.
  auto p_plus = [adj, beta, h](int state, int v) {
    double m = 0.0;
    for (int u : adj[static_cast<std::size_t>(v)]) m += (state >> u) & 1 ? 1.0 : -1.0;
    return 1.0 / (1.0 + std::exp(-2.0 * beta * (m + h)));
  };
  const double site_prob = 1.0 / n_vertices;
  auto rows = [n_vertices, site_prob, p_plus](int s) {
    std::map<int, double> acc;
    for (int v = 0; v < n_vertices; ++v) {
      double pp = p_plus(s, v);
      acc[s | (1 << v)] += site_prob * pp;
      acc[s & ~(1 << v)] += site_prob * (1.0 - pp);
    }
    std::vector<int> support;
    Eigen::VectorXd w(static_cast<Eigen::Index>(acc.size()));
    Eigen::Index i = 0;
    for (auto& [state, prob] : acc) {
      support.push_back(state);
      w[i++] = prob;
    }
    return FiniteDistribution(std::move(support), std::move(w));
  };
  MarkovKernel kernel(space, MarkovKernel::RowFn(rows),
                      "ising_heat_bath_" + std::to_string(n_vertices));
  kernel.set_sampler([n_vertices, p_plus](int s, RngStream& rng) {
    int v = std::min(n_vertices - 1, static_cast<int>(rng.uniform01() * n_vertices));
    return rng.uniform01() < p_plus(s, v) ? (s | (1 << v)) : (s & ~(1 << v));
  });

  int v_max = 0;
  for (auto& list : adj) v_max = std::max(v_max, static_cast<int>(list.size()));
  AnalyticDiagnostics a;
  a.kappa_lower = (1.0 - v_max * std::tanh(beta)) / n_vertices;
  a.sigma_inf = n_vertices >= 2 ? 1.0 : 0.5;
  a.stationary = gibbs_distribution(edges, n_vertices, beta, h);
  return BuiltChain{std::move(kernel), std::move(a)};
}

BuiltChain binomial_chain(int d, double lambda) {
  if (d < 1) throw Error("InvalidParams", "d must be >= 1");
  if (!(lambda > 0.0) || lambda >= d)
    throw Error("InvalidRate", "rate must satisfy 0 < lambda < d");
  const int n = d + 1;
  std::vector<std::pair<int, int>> neighbors;
  for (int x = 0; x + 1 <= d; ++x) neighbors.emplace_back(x, x + 1);
  auto space = std::make_shared<FiniteMetricSpace>(
      n, [](int i, int j) { return std::abs(static_cast<double>(i - j)); }, neighbors);

  const double dd = static_cast<double>(d);
  auto p_up = [lambda, dd](int x) { return lambda / dd * (1.0 - x / dd); };
  auto p_down = [lambda, dd](int x) { return (1.0 - lambda / dd) * (x / dd); };
  auto rows = [d, p_up, p_down](int x) {
    std::vector<int> support;
    std::vector<double> w;
    double up = p_up(x), down = p_down(x);
    if (x > 0 && down > 0.0) {
      support.push_back(x - 1);
      w.push_back(down);
    }
    support.push_back(x);
    w.push_back(1.0 - up - down);
    if (x < d && up > 0.0) {
      support.push_back(x + 1);
      w.push_back(up);
    }
    Eigen::VectorXd wv = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    return FiniteDistribution(std::move(support), std::move(wv));
  };
  MarkovKernel kernel(space, MarkovKernel::RowFn(rows),
                      "binomial_" + std::to_string(d));
  kernel.set_sampler([d, p_up, p_down](int x, RngStream& rng) {
    double u = rng.uniform01();
    double up = p_up(x);
    if (u < up) return std::min(x + 1, d);
    if (u < up + p_down(x)) return x - 1;
    return x;
  });

  AnalyticDiagnostics a;
  a.kappa = 1.0 / d;
  a.sigma_inf = d >= 2 ? 1.0 : 0.5;
  Eigen::VectorXd s2_upper(n);
  for (int x = 0; x <= d; ++x) s2_upper[x] = (lambda + x) / dd;
  a.sigma2_upper = s2_upper;
  // S(x) = lambda + x dominates sigma^2/(n kappa) = d sigma^2 <= lambda + x.
  Eigen::VectorXd s_vals(n);
  for (int x = 0; x <= d; ++x) s_vals[x] = lambda + x;
  Observable s_obs{std::move(s_vals), 1.0, "lambda_plus_x"};
  a.s_spec = SFunctionSpec{std::move(s_obs), SFunctionSpec::MeanSource::ExactStationary,
                           2.0 * lambda, 0};
  // Binomial(d, lambda/d) via log factorials.
  Eigen::VectorXd logw(n);
  auto lgamma1 = [](double z) { return std::lgamma(z + 1.0); };
  double p = lambda / dd;
  for (int x = 0; x <= d; ++x)
    logw[x] = lgamma1(dd) - lgamma1(x) - lgamma1(dd - x) + x * std::log(p) +
              (dd - x) * std::log1p(-p);
  Eigen::VectorXd w = (logw.array() - logw.maxCoeff()).exp();
  a.stationary = FiniteDistribution::from_dense(w / w.sum());
  return BuiltChain{std::move(kernel), std::move(a)};
}

BuiltChain uniform_reset(int m) {
  if (m < 1) throw Error("InvalidParams", "need at least one point");
  auto space = std::make_shared<FiniteMetricSpace>(make_trivial_metric_space(m));
  auto rows = [m](int) { return FiniteDistribution::uniform(m); };
  MarkovKernel kernel(space, MarkovKernel::RowFn(rows), "uniform_reset_" + std::to_string(m));
  kernel.set_sampler([m](int, RngStream& rng) {
    return std::min(m - 1, static_cast<int>(rng.uniform01() * m));
  });
  AnalyticDiagnostics a;
  a.kappa = 1.0;
  a.sigma_inf = m >= 2 ? 0.5 : 0.0;
  a.sigma2_const = 0.5 * (1.0 - 1.0 / m);
  a.stationary = FiniteDistribution::uniform(m);
  return BuiltChain{std::move(kernel), std::move(a)};
}

long poisson_sample(RngStream& rng, double mean) {
  if (!(mean >= 0.0)) throw Error("InvalidParams", "Poisson mean must be nonnegative");
  long total = 0;
  // Chunked Knuth inversion stays exact for any mean.
  while (mean > 0.0) {
    double chunk = std::min(mean, 16.0);
    mean -= chunk;
    double limit = std::exp(-chunk);
    double prod = rng.uniform01();
    while (prod > limit) {
      ++total;
      prod *= rng.uniform01();
    }
  }
  return total;
}

double MMInftyDiscretization::corollary_r_max(int start_x) const {
  return (8.0 * lambda * t + 4.0 * (lambda + start_x)) / (3.0 * t);
}

BoundCertificate MMInftyDiscretization::corollary_bound(int start_x, double r) const {
  if (!(r > 0.0)) throw Error("InvalidRadius", "deviation radius must be positive");
  BoundCertificate cert;
  cert.kind = "concentration";
  cert.formula_id = "mm_infty_corollary";
  cert.T = steps;
  cert.T0 = 0;
  cert.kappa = 1.0 / d;
  cert.lip_norm = 1.0;
  cert.r_max = corollary_r_max(start_x);
  double exponent;
  if (r < cert.r_max) {
    cert.regime = "gaussian";
    exponent = t * r * r / (16.0 * (2.0 * lambda + (lambda + start_x) / t));
  } else {
    cert.regime = "exponential";
    exponent = t * r / 12.0;
  }
  cert.log_value = std::log(2.0) - exponent;
  cert.raw_value = 2.0 * std::exp(-exponent);
  cert.value = std::min(cert.raw_value, 1.0);
  cert.vacuous = cert.value >= 1.0;
  cert.inputs.emplace_back("lambda", lambda);
  cert.inputs.emplace_back("t", t);
  cert.inputs.emplace_back("start_x", start_x);
  cert.inputs.emplace_back("r", r);
  return cert;
}

double MMInftyDiscretization::simulate_time_average(int start_x, const Eigen::VectorXd& f,
                                                    RngStream& rng) const {
  const double jumps_per_grid_step = t * d / static_cast<double>(steps);
  int x = start_x;
  double acc = 0.0;
  for (long g = 0; g < steps; ++g) {
    long jumps = poisson_sample(rng, jumps_per_grid_step);
    for (long j = 0; j < jumps; ++j) x = chain.kernel.step(x, rng);
    acc += f[x];
  }
  return acc / static_cast<double>(steps);
}

MMInftyDiscretization mm_infty_discrete(double lambda, int d, double t, long steps) {
  if (!(t > 0.0) || steps < 1) throw Error("InvalidParams", "need t > 0 and steps >= 1");
  return MMInftyDiscretization{lambda, d, t, steps, binomial_chain(d, lambda)};
}

DiagnosticsBundle diagnostics_with_analytic(const BuiltChain& chain, PairMode mode, int threads) {
  DiagnosticsBundle diag = compute_diagnostics(chain.kernel, mode, threads);
  if (chain.analytic.n_lower) {
    for (Eigen::Index i = 0; i < chain.analytic.n_lower->size(); ++i)
      local_dimension_lower(chain.kernel, static_cast<int>(i),
                            {LocalDimension::Kind::Declared, (*chain.analytic.n_lower)[i]});
    diag.n_lower = *chain.analytic.n_lower;
    diag.sup_ratio = sup_diffusion_ratio(diag);
  }
  if (chain.analytic.s_spec) {
    validate_s_spec(chain.kernel, diag, *chain.analytic.s_spec);
    diag.s_spec = chain.analytic.s_spec;
  }
  return diag;
}

}  // namespace mcmccert
