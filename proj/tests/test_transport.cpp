#include <doctest.h>

#include <Eigen/Core>
#include <cmath>

#include "mcmccert/distribution.hpp"
#include "mcmccert/errors.hpp"
#include "mcmccert/metric_space.hpp"
#include "mcmccert/observable.hpp"
#include "mcmccert/transport.hpp"
#include "oracle_lp.hpp"
#include "test_helpers.hpp"

using namespace mcmccert;
using mcmccert::testing::random_distribution;
using mcmccert::testing::random_lipschitz;
using mcmccert::testing::random_point_space;
using mcmccert::testing::w1_coupling_lp;

namespace {

FiniteMetricSpace three_point_line() {
  // d(a,b) = 1, d(b,c) = 1, d(a,c) = 2
  return FiniteMetricSpace(3,
                           [](int i, int j) { return std::abs(static_cast<double>(i - j)); });
}

}  // namespace

TEST_CASE("identical distributions are at distance zero") {
  RngStream rng(21, 0);
  FiniteMetricSpace space = random_point_space(rng, 10);
  FiniteDistribution mu = random_distribution(rng, 10, 5);
  W1Result res = wasserstein1(mu, mu, space);
  CHECK(res.value == 0.0);
  check_transport_plan(res.plan, mu, mu, space);
  DualResult dual = kantorovich_dual(mu, mu, space);
  CHECK(std::abs(dual.value) <= 1e-12);
}

TEST_CASE("two deltas move along their distance") {
  RngStream rng(22, 0);
  FiniteMetricSpace space = random_point_space(rng, 6);
  W1Result res =
      wasserstein1(FiniteDistribution::delta(1), FiniteDistribution::delta(4), space);
  CHECK(res.value == doctest::Approx(space.dist(1, 4)).epsilon(1e-12));
  REQUIRE(res.plan.pairs.size() == 1);
  CHECK(res.plan.pairs[0].src == 1);
  CHECK(res.plan.pairs[0].dst == 4);
  CHECK(res.plan.pairs[0].mass == doctest::Approx(1.0).epsilon(1e-12));

  DualResult dual =
      kantorovich_dual(FiniteDistribution::delta(1), FiniteDistribution::delta(4), space);
  CHECK(dual.value == doctest::Approx(space.dist(1, 4)).epsilon(1e-9));
  // The c-transform potential is d(., y) up to an additive constant.
  double f1 = dual.potential[0], f4 = dual.potential[1];
  CHECK(f1 - f4 == doctest::Approx(space.dist(1, 4)).epsilon(1e-9));
}

TEST_CASE("three-point example from the coupling polytope") {
  FiniteMetricSpace space = three_point_line();
  Eigen::VectorXd wm(2), wn(2);
  wm << 0.5, 0.5;
  wn << 0.5, 0.5;
  FiniteDistribution mu({0, 1}, wm), nu({1, 2}, wn);
  W1Result res = wasserstein1(mu, nu, space);
  CHECK(res.value == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(w1_coupling_lp(mu, nu, space) == doctest::Approx(1.0).epsilon(1e-10));
  DualResult dual = kantorovich_dual(mu, nu, space);
  CHECK(dual.value == doctest::Approx(1.0).epsilon(1e-9));
  check_transport_plan(res.plan, mu, nu, space);
}

TEST_CASE("flow, dual and coupling-LP oracle agree on random instances") {
  RngStream rng(23, 0);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 5 + static_cast<int>(rng() % 6);
    FiniteMetricSpace space = trial % 4 == 0 ? make_trivial_metric_space(n)
                                             : random_point_space(rng, n);
    int sa = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(n - 1));
    int sb = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(n - 1));
    FiniteDistribution mu = random_distribution(rng, n, sa);
    FiniteDistribution nu = random_distribution(rng, n, sb);
    W1Result res = wasserstein1(mu, nu, space);
    double lp = w1_coupling_lp(mu, nu, space);
    DualResult dual = kantorovich_dual(mu, nu, space);
    CHECK(std::abs(res.value - lp) <= 1e-8);
    CHECK(std::abs(res.value - dual.value) <= 1e-8);
    CHECK(dual.value <= res.value + 1e-10);  // weak duality, certified side
    check_transport_plan(res.plan, mu, nu, space);
  }
}

TEST_CASE("any feasible plan costs at least the optimum") {
  RngStream rng(24, 0);
  FiniteMetricSpace space = random_point_space(rng, 8);
  FiniteDistribution mu = random_distribution(rng, 8, 4);
  FiniteDistribution nu = random_distribution(rng, 8, 5);
  double optimal = wasserstein1(mu, nu, space).value;
  // Product coupling is feasible and usually far from optimal.
  double product_cost = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    for (Eigen::Index j = 0; j < nu.size(); ++j)
      product_cost += mu.weights()[i] * nu.weights()[j] *
                      space.dist(mu.support()[static_cast<std::size_t>(i)],
                                 nu.support()[static_cast<std::size_t>(j)]);
  CHECK(optimal <= product_cost + 1e-12);
}

TEST_CASE("symmetry and the triangle inequality") {
  RngStream rng(25, 0);
  FiniteMetricSpace space = random_point_space(rng, 9);
  for (int trial = 0; trial < 10; ++trial) {
    FiniteDistribution a = random_distribution(rng, 9, 4);
    FiniteDistribution b = random_distribution(rng, 9, 4);
    FiniteDistribution c = random_distribution(rng, 9, 4);
    double ab = wasserstein1(a, b, space).value;
    double ba = wasserstein1(b, a, space).value;
    CHECK(ab == doctest::Approx(ba).epsilon(1e-10));
    double ac = wasserstein1(a, c, space).value;
    double cb = wasserstein1(c, b, space).value;
    CHECK(ab <= ac + cb + 1e-10);
  }
}

TEST_CASE("total-variation and Lipschitz-mean envelopes") {
  RngStream rng(26, 0);
  FiniteMetricSpace space = random_point_space(rng, 10);
  for (int trial = 0; trial < 10; ++trial) {
    FiniteDistribution mu = random_distribution(rng, 10, 5);
    FiniteDistribution nu = random_distribution(rng, 10, 6);
    double w1 = wasserstein1(mu, nu, space).value;
    CHECK(w1 <= total_variation(mu, nu) * space.diameter() + 1e-10);
    for (int k = 0; k < 4; ++k) {
      Observable f = random_lipschitz(rng, space, 1.0, "probe");
      verify_lipschitz(f, space, 1e-9);
      double means = std::abs(mu.expectation(f.values) - nu.expectation(f.values));
      CHECK(means <= w1 + 1e-10);
    }
  }
}

TEST_CASE("the trivial metric turns W1 into total variation") {
  RngStream rng(27, 0);
  FiniteMetricSpace space = make_trivial_metric_space(12);
  for (int trial = 0; trial < 10; ++trial) {
    FiniteDistribution mu = random_distribution(rng, 12, 6);
    FiniteDistribution nu = random_distribution(rng, 12, 7);
    CHECK(wasserstein1(mu, nu, space).value ==
          doctest::Approx(total_variation(mu, nu)).epsilon(1e-10));
  }
}

TEST_CASE("support caps and degenerate inputs raise typed errors") {
  RngStream rng(28, 0);
  FiniteMetricSpace space = random_point_space(rng, 30);
  FiniteDistribution mu = random_distribution(rng, 30, 20);
  FiniteDistribution nu = random_distribution(rng, 30, 20);
  W1Options tight;
  tight.max_support = 8;
  CHECK_THROWS_WITH_AS(wasserstein1(mu, nu, space, tight), doctest::Contains("SupportTooLarge"),
                       Error);
  DualOptions dual_tight;
  dual_tight.max_support = 8;
  CHECK_THROWS_WITH_AS(kantorovich_dual(mu, nu, space, dual_tight),
                       doctest::Contains("SupportTooLarge"), Error);
}

TEST_CASE("dual potential is 1-Lipschitz on the combined support") {
  RngStream rng(29, 0);
  FiniteMetricSpace space = random_point_space(rng, 9);
  FiniteDistribution mu = random_distribution(rng, 9, 4);
  FiniteDistribution nu = random_distribution(rng, 9, 5);
  DualResult dual = kantorovich_dual(mu, nu, space);
  for (std::size_t i = 0; i < dual.support.size(); ++i)
    for (std::size_t j = i + 1; j < dual.support.size(); ++j) {
      double gap = std::abs(dual.potential[static_cast<Eigen::Index>(i)] -
                            dual.potential[static_cast<Eigen::Index>(j)]);
      CHECK(gap <= space.dist(dual.support[i], dual.support[j]) + 1e-10);
    }
}

TEST_CASE("flow and dual stay consistent on larger supports") {
  RngStream rng(4242, 0);
  for (int trial = 0; trial < 12; ++trial) {
    int n = 80;
    FiniteMetricSpace space = trial % 3 == 0 ? make_trivial_metric_space(n)
                                             : random_point_space(rng, n, 3);
    int sa = 30 + static_cast<int>(rng() % 35);
    int sb = 30 + static_cast<int>(rng() % 35);
    FiniteDistribution mu = random_distribution(rng, n, sa);
    FiniteDistribution nu = random_distribution(rng, n, sb);
    W1Result res = wasserstein1(mu, nu, space);
    DualResult dual = kantorovich_dual(mu, nu, space);
    CHECK(std::abs(res.value - dual.value) <= 1e-8);
    check_transport_plan(res.plan, mu, nu, space);
  }
}

TEST_CASE("plans from overlapping supports keep shared mass in place") {
  FiniteMetricSpace space = three_point_line();
  Eigen::VectorXd wm(3), wn(3);
  wm << 0.2, 0.5, 0.3;
  wn << 0.1, 0.5, 0.4;
  FiniteDistribution mu({0, 1, 2}, wm), nu({0, 1, 2}, wn);
  W1Result res = wasserstein1(mu, nu, space);
  check_transport_plan(res.plan, mu, nu, space);
  // mu - nu = (0.1, 0, -0.1): optimal cost moves 0.1 across distance 2.
  CHECK(res.value == doctest::Approx(0.2).epsilon(1e-10));
  CHECK(res.value == doctest::Approx(w1_coupling_lp(mu, nu, space)).epsilon(1e-8));
}
