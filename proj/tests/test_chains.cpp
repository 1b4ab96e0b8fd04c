#include <doctest.h>

#include <Eigen/Core>
#include <cmath>

#include "mcmccert/bounds.hpp"
#include "mcmccert/chains.hpp"
#include "mcmccert/diagnostics.hpp"
#include "mcmccert/errors.hpp"
#include "mcmccert/harness.hpp"
#include "mcmccert/sampler_chain.hpp"
#include "test_helpers.hpp"

using namespace mcmccert;

TEST_CASE("hypercube family: analytic diagnostics agree with computed ones") {
  for (int n_bits : {2, 4, 6}) {
    BuiltChain cube = hypercube(n_bits);
    DiagnosticsBundle diag = compute_diagnostics(cube.kernel);
    CHECK(std::abs(diag.kappa - *cube.analytic.kappa) <= 1e-12);
    CHECK(diag.sigma_inf == doctest::Approx(*cube.analytic.sigma_inf));
    for (int x = 0; x < cube.kernel.space().size(); ++x) {
      CHECK(std::abs(diag.ecc[x] - *cube.analytic.ecc_const) <= 1e-12);
      CHECK(diag.sigma2[x] == doctest::Approx(*cube.analytic.sigma2_const).epsilon(1e-12));
    }
    CHECK(total_variation(*diag.stationary, *cube.analytic.stationary) <= 1e-10);
  }
}

TEST_CASE("hypercube parameter validation") {
  CHECK_THROWS_AS(hypercube(0), Error);
  CHECK_THROWS_AS(hypercube(21), Error);
}

TEST_CASE("binomial family: analytic diagnostics agree with computed ones") {
  for (auto [d, lambda] : {std::pair{5, 1.5}, std::pair{10, 2.5}, std::pair{20, 6.0}}) {
    BuiltChain chain = binomial_chain(d, lambda);
    DiagnosticsBundle diag = compute_diagnostics(chain.kernel);
    CHECK(std::abs(diag.kappa - *chain.analytic.kappa) <= 1e-12);
    CHECK(total_variation(*diag.stationary, *chain.analytic.stationary) <= 1e-10);
    for (int x = 0; x <= d; ++x)
      CHECK(diag.sigma2[x] <= (*chain.analytic.sigma2_upper)[x] + 1e-12);
    // The family S function passes validation with the computed diagnostics.
    validate_s_spec(chain.kernel, diag, *chain.analytic.s_spec);
  }
  CHECK_THROWS_WITH_AS(binomial_chain(5, 5.0), doctest::Contains("InvalidRate"), Error);
  CHECK_THROWS_WITH_AS(binomial_chain(5, -1.0), doctest::Contains("InvalidRate"), Error);
}

TEST_CASE("heat bath at zero temperature equals the lazy bit walk, pointwise") {
  std::vector<std::pair<int, int>> edges{{0, 1}, {1, 2}, {2, 3}, {3, 0}};
  BuiltChain ising = ising_heat_bath(edges, 4, 0.0, 0.0);
  BuiltChain cube = hypercube(4);
  const int n = 16;
  for (int s = 0; s < n; ++s) {
    FiniteDistribution a = ising.kernel.row(s);
    FiniteDistribution b = cube.kernel.row(s);
    REQUIRE(a.support() == b.support());
    for (Eigen::Index i = 0; i < a.size(); ++i)
      CHECK(a.weights()[i] == doctest::Approx(b.weights()[i]).epsilon(1e-14));
  }
}

TEST_CASE("heat bath curvature dominates the valency lower bound") {
  std::vector<std::pair<int, int>> edges{{0, 1}, {1, 2}, {2, 3}, {3, 0}};
  for (double beta : {0.1, 0.2}) {
    BuiltChain ising = ising_heat_bath(edges, 4, beta, 0.0);
    double kappa = coarse_ricci(ising.kernel).kappa;
    double lower = (1.0 - 2.0 * std::tanh(beta)) / 4.0;
    CHECK(*ising.analytic.kappa_lower == doctest::Approx(lower).epsilon(1e-14));
    CHECK(kappa >= lower - 1e-12);
  }
}

TEST_CASE("heat bath is stationary for the Gibbs law, including a field") {
  std::vector<std::pair<int, int>> edges{{0, 1}, {1, 2}, {2, 0}};
  BuiltChain ising = ising_heat_bath(edges, 3, 0.5, 0.3);
  FiniteDistribution pi = stationary_dist(ising.kernel);
  CHECK(total_variation(pi, *ising.analytic.stationary) <= 1e-10);

  // Detailed balance for the Gibbs law, checked row by row.
  const FiniteDistribution& gibbs = *ising.analytic.stationary;
  for (int s = 0; s < 8; ++s) {
    FiniteDistribution row = ising.kernel.row(s);
    for (std::size_t i = 0; i < row.support().size(); ++i) {
      int y = row.support()[i];
      if (y == s) continue;
      double forward = gibbs.weight_at(s) * row.weights()[static_cast<Eigen::Index>(i)];
      double backward = gibbs.weight_at(y) * ising.kernel.row(y).weight_at(s);
      CHECK(forward == doctest::Approx(backward).epsilon(1e-11));
    }
  }
}

TEST_CASE("queue adapter: frozen window edge and vacuous small radii") {
  MMInftyDiscretization mm = mm_infty_discrete(1.0, 100, 10.0, 200);
  CHECK(mm.corollary_r_max(0) == doctest::Approx(2.8).epsilon(1e-14));
  BoundCertificate tiny = mm.corollary_bound(0, 1e-12);
  CHECK(tiny.raw_value == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(tiny.value == 1.0);
  BoundCertificate gauss = mm.corollary_bound(0, 1.0);
  CHECK(gauss.regime == "gaussian");
  CHECK(gauss.raw_value ==
        doctest::Approx(2.0 * std::exp(-10.0 / (16.0 * (2.0 + 0.1)))).epsilon(1e-12));
  BoundCertificate expo = mm.corollary_bound(0, 5.0);
  CHECK(expo.regime == "exponential");
  CHECK(expo.raw_value == doctest::Approx(2.0 * std::exp(-10.0 * 5.0 / 12.0)).epsilon(1e-12));
}

TEST_CASE("queue adapter: discretized tails respect the limit bound as d refines") {
  const double lambda = 1.0, t = 4.0;
  const long steps = 64, replicas = 2000;
  const int start = 1;
  Eigen::VectorXd radii(3);
  radii << 1.0, 2.0, 3.0;
  std::vector<double> gaps;
  for (int d : {50, 100, 200}) {
    MMInftyDiscretization mm = mm_infty_discrete(lambda, d, t, steps);
    Eigen::VectorXd f(d + 1);
    for (int x = 0; x <= d; ++x) f[x] = x;  // 1-Lipschitz occupancy observable
    std::vector<double> means(static_cast<std::size_t>(replicas));
    for (long rep = 0; rep < replicas; ++rep) {
      RngStream rng(777, static_cast<std::uint64_t>(rep));
      means[static_cast<std::size_t>(rep)] = mm.simulate_time_average(start, f, rng);
    }
    double center = 0.0;
    for (double m : means) center += m;
    center /= static_cast<double>(replicas);
    for (Eigen::Index ri = 0; ri < radii.size(); ++ri) {
      double r = radii[ri];
      long hits = 0;
      for (double m : means)
        if (std::abs(m - center) >= r) ++hits;
      double freq = static_cast<double>(hits) / static_cast<double>(replicas);
      double bound = mm.corollary_bound(start, r).value;
      double se = std::sqrt(std::max(freq * (1.0 - freq), 1.0 / replicas) /
                            static_cast<double>(replicas));
      CHECK(freq <= bound + 3.0 * se);  // soundness at every refinement level
      if (ri == 0) gaps.push_back(bound - freq);
    }
  }
  // Qualitative refinement: the gap trend shows no significant reversal.
  double slack = 3.0 * std::sqrt(0.25 / static_cast<double>(replicas)) * 2.0;
  CHECK(gaps[1] >= gaps[0] - slack);
  CHECK(gaps[2] >= gaps[1] - slack);
}

TEST_CASE("poisson sampler has the right first two moments") {
  RngStream rng(88, 0);
  for (double mean : {0.3, 4.0, 25.0}) {
    const long n = 20000;
    double sum = 0.0, sumsq = 0.0;
    for (long i = 0; i < n; ++i) {
      double x = static_cast<double>(poisson_sample(rng, mean));
      sum += x;
      sumsq += x * x;
    }
    double avg = sum / n;
    double var = sumsq / n - avg * avg;
    double se = std::sqrt(mean / n);
    CHECK(std::abs(avg - mean) <= 4.0 * se);
    CHECK(std::abs(var - mean) <= 8.0 * se * std::sqrt(2.0 * mean + 1.0));
  }
}

TEST_CASE("ornstein-uhlenbeck synchronous coupling contracts by exactly 1 - dt") {
  for (double dt : {0.1, 0.01, 0.001}) {
    EulerChain ou = ornstein_uhlenbeck(2, dt);
    RngStream rng(91, 0);
    Eigen::VectorXd x(2), y(2);
    x << 1.0, -0.5;
    y << -2.0, 0.25;
    for (int trial = 0; trial < 10; ++trial) {
      auto [nx, ny] = ou.coupled_step(x, y, rng);
      double ratio = (nx - ny).norm() / (x - y).norm();
      CHECK(std::abs(ratio - (1.0 - dt)) <= 1e-12);
    }
  }
}

TEST_CASE("sampled-coupling curvature estimate recovers alpha dt") {
  for (double dt : {0.1, 0.01, 0.001}) {
    EulerChain ou = ornstein_uhlenbeck(1, dt);
    RngStream rng(92, 0);
    double ratio = synchronous_contraction_ratio(ou, rng, 8, 50);
    double kappa_est = 1.0 - ratio;
    CHECK(kappa_est >= ou.kappa_nominal * (1.0 - dt) - 1e-12);
    CHECK(kappa_est <= ou.kappa_nominal * (1.0 + dt) + 1e-12);
  }
}

TEST_CASE("euler chain exposes the analytic diffusion quantities") {
  EulerChain ou = ornstein_uhlenbeck(3, 0.05);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  CHECK(ou.sigma2(x) == doctest::Approx(2.0 * 0.05 * 3.0).epsilon(1e-13));  // 2 dt ||Id||_HS^2
  CHECK(ou.s_fn(x) == doctest::Approx(2.0).epsilon(1e-13));                 // 2/alpha * op^2
  CHECK(ou.n_lower(x) == doctest::Approx(3.0).epsilon(1e-13));              // HS^2/op^2 = dim
  CHECK(ou.sigma_inf == doctest::Approx(6.0 * std::sqrt(0.1)).epsilon(1e-13));
  CHECK(ou.s_lip == 0.0);

  // Rank-one diffusion has local dimension one.
  EulerChain rank1 = euler_sde(
      [](const Eigen::VectorXd& p) { return Eigen::VectorXd(-p); },
      [](const Eigen::VectorXd&) {
        Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(2, 2);
        rho(0, 0) = 1.0;
        return rho;
      },
      2, 0.05, 1.0, 1.0, 0.0);
  CHECK(rank1.n_lower(Eigen::VectorXd::Zero(2)) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("euler stability spot-check passes for OU and catches expanding drift") {
  EulerChain ou = ornstein_uhlenbeck(2, 0.05);
  RngStream rng(93, 0);
  check_euler_stability(ou, rng, 8, 500);

  CHECK_THROWS_WITH_AS(
      euler_sde([](const Eigen::VectorXd& p) { return Eigen::VectorXd(-p); },
                [](const Eigen::VectorXd&) { return Eigen::MatrixXd(
                    Eigen::MatrixXd::Identity(1, 1)); },
                1, 0.05, 0.0, 1.0, 0.0),
      doctest::Contains("StabilityViolated"), Error);

  EulerChain expanding = euler_sde(
      [](const Eigen::VectorXd& p) { return Eigen::VectorXd(p); },  // drift +x grows
      [](const Eigen::VectorXd&) { return Eigen::MatrixXd(Eigen::MatrixXd::Identity(1, 1)); },
      1, 0.05, 1.0, 1.0, 0.0);
  RngStream rng2(94, 0);
  CHECK_THROWS_WITH_AS(check_euler_stability(expanding, rng2, 8, 500),
                       doctest::Contains("StabilityViolated"), Error);
}

TEST_CASE("truncated innovations keep every euler step inside the granularity") {
  EulerChain ou = ornstein_uhlenbeck(1, 0.02, 3.0);
  RngStream rng(95, 0);
  Eigen::VectorXd x(1);
  x << 0.7;
  // One step from x lands within trunc_R sqrt(2 dt) of the drifted mean, so
  // two independent steps stay within 2 sigma_inf of each other.
  for (int i = 0; i < 500; ++i) {
    Eigen::VectorXd a = ou.chain.step(x, rng);
    Eigen::VectorXd b = ou.chain.step(x, rng);
    CHECK((a - b).norm() <= 2.0 * ou.sigma_inf + 1e-12);
  }
}

TEST_CASE("linear state-space model contracts at exactly its declared rate") {
  StateSpaceChain ss = linear_state_space(0.5, 1.0);
  CHECK(ss.kappa_lower == doctest::Approx(0.5));
  RngStream rng(96, 0);
  check_state_space_contraction(ss, rng, 8, 10000);
  Eigen::VectorXd x(1), y(1), w(1);
  x << 2.0;
  y << -1.0;
  w << 0.3;
  CHECK(ss.chain.dist(ss.transition(x, w), ss.transition(y, w)) ==
        doctest::Approx(0.5 * 3.0).epsilon(1e-14));
}

TEST_CASE("state-space S estimate matches the closed form for the linear model") {
  double r = 0.5, sd = 1.3;
  StateSpaceChain ss = linear_state_space(r, sd);
  RngStream rng(97, 0);
  Eigen::VectorXd x(1);
  x << 0.4;
  long draws = 40000;
  double est = ss.s_estimate(x, rng, draws);
  double exact = sd * sd / (1.0 - r);  // E|W1 - W2|^2 = 2 sd^2 over 2(1-r)
  CHECK(std::abs(est - exact) <= 5.0 * exact / std::sqrt(static_cast<double>(draws)) * 3.0);
  CHECK(ss.s_lip() == 0.0);
}

TEST_CASE("lying about the contraction rate is caught by sampling") {
  auto f = [](const Eigen::VectorXd& x, const Eigen::VectorXd& w) {
    return Eigen::VectorXd(0.8 * x + w);
  };
  auto noise = [](RngStream& rng) {
    Eigen::VectorXd w(1);
    w[0] = rng.normal();
    return w;
  };
  auto dist = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm(); };
  StateSpaceChain lying = state_space_model(f, noise, dist, 0.5, 0.0, "lying");
  RngStream rng(98, 0);
  CHECK_THROWS_WITH_AS(check_state_space_contraction(lying, rng, 8, 2000),
                       doctest::Contains("ContractionViolated"), Error);
  CHECK_THROWS_WITH_AS(state_space_model(f, noise, dist, 1.2, 0.0, "bad"),
                       doctest::Contains("ContractionViolated"), Error);
}

TEST_CASE("sampled-pair Lipschitz verification on continuous chains") {
  EulerChain ou = ornstein_uhlenbeck(2, 0.05);
  RngStream rng(99, 0);
  PointObservable honest{[](const Eigen::VectorXd& p) { return p[0]; }, 1.0, "coord0"};
  Eigen::VectorXd center = Eigen::VectorXd::Zero(2);
  verify_lipschitz_sampled(honest, ou.chain, center, 2.0, 200, rng);

  PointObservable lying{[](const Eigen::VectorXd& p) { return p[0]; }, 0.3, "coord0_lying"};
  CHECK_THROWS_WITH_AS(verify_lipschitz_sampled(lying, ou.chain, center, 2.0, 200, rng),
                       doctest::Contains("LipschitzViolated"), Error);
}

TEST_CASE("uniform reset family diagnostics") {
  BuiltChain reset = uniform_reset(8);
  DiagnosticsBundle diag = compute_diagnostics(reset.kernel);
  CHECK(diag.kappa == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(diag.sigma_inf == doctest::Approx(0.5));
  CHECK(diag.sigma2[0] == doctest::Approx(*reset.analytic.sigma2_const).epsilon(1e-13));
}
