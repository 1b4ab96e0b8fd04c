#include "mcmccert/sampler_chain.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <sstream>

#include "mcmccert/errors.hpp"

namespace mcmccert {

namespace {

using Point = SamplerChain::Point;

Point truncated_gaussian(int dim, double radius, RngStream& rng) {
  // Rejection keeps the exact conditional law inside the ball.
  for (;;) {
    Point y(dim);
    for (int i = 0; i < dim; ++i) y[i] = rng.normal();
    if (y.norm() <= radius) return y;
  }
}

std::string point_str(const Point& p) {
  std::ostringstream os;
  os << "(" << p.transpose() << ")";
  return os.str();
}

}  // namespace

void verify_lipschitz_sampled(const PointObservable& obs, const SamplerChain& chain,
                              const Point& center, double scatter, int pairs, RngStream& rng,
                              double tol) {
  const auto dim = center.size();
  for (int p = 0; p < pairs; ++p) {
    Point x = center, y = center;
    for (Eigen::Index i = 0; i < dim; ++i) {
      x[i] += scatter * rng.normal();
      y[i] += scatter * rng.normal();
    }
    double d = chain.dist(x, y);
    if (d == 0.0) continue;
    if (std::abs(obs.f(x) - obs.f(y)) > obs.lip_norm * d + tol)
      throw Error("LipschitzViolated",
                  "observable '" + obs.name + "' exceeds declared norm at " + point_str(x));
  }
}

std::pair<Point, Point> EulerChain::coupled_step(const Point& x, const Point& y,
                                                 RngStream& rng) const {
  Point innovation = truncated_gaussian(dim, trunc_radius, rng);
  double scale = std::sqrt(2.0 * dt);
  Point nx = x + drift_(x) * dt + scale * (diffusion_(x) * innovation);
  Point ny = y + drift_(y) * dt + scale * (diffusion_(y) * innovation);
  return {std::move(nx), std::move(ny)};
}

EulerChain euler_sde(std::function<Point(const Point&)> drift,
                     std::function<Eigen::MatrixXd(const Point&)> diffusion, int dim, double dt,
                     double alpha, double sup_rho_op, double s_lip, double trunc_radius) {
  if (!(alpha > 0.0)) throw Error("StabilityViolated", "stability rate alpha must be positive");
  if (!(dt > 0.0) || dim < 1) throw Error("InvalidParams", "need dt > 0 and dim >= 1");
  EulerChain ec;
  ec.dim = dim;
  ec.dt = dt;
  ec.alpha = alpha;
  ec.trunc_radius = trunc_radius;
  ec.sup_rho_op = sup_rho_op;
  ec.sigma_inf = trunc_radius * std::sqrt(2.0 * dt) * sup_rho_op;
  ec.kappa_nominal = alpha * dt;
  ec.drift_ = drift;
  ec.diffusion_ = diffusion;
  ec.sigma2 = [diffusion, dt](const Point& x) {
    return 2.0 * dt * diffusion(x).squaredNorm();  // squaredNorm = Frobenius^2
  };
  ec.s_fn = [diffusion, alpha](const Point& x) {
    Eigen::MatrixXd rho = diffusion(x);
    double op = rho.jacobiSvd().singularValues()[0];
    return 2.0 / alpha * op * op;
  };
  ec.s_lip = s_lip;
  ec.n_lower = [diffusion](const Point& x) {
    Eigen::MatrixXd rho = diffusion(x);
    double op = rho.jacobiSvd().singularValues()[0];
    double hs2 = rho.squaredNorm();
    return op > 0.0 ? hs2 / (op * op) : 1.0;
  };
  ec.chain.dist = [](const Point& a, const Point& b) { return (a - b).norm(); };
  ec.chain.label = "euler_sde_dim" + std::to_string(dim);
  ec.chain.step = [drift, diffusion, dim, dt, trunc_radius](const Point& x, RngStream& rng) {
    Point innovation = truncated_gaussian(dim, trunc_radius, rng);
    return Point(x + drift(x) * dt + std::sqrt(2.0 * dt) * (diffusion(x) * innovation));
  };
  return ec;
}

EulerChain ornstein_uhlenbeck(int dim, double dt, double trunc_radius) {
  EulerChain ec = euler_sde([](const Point& x) { return Point(-x); },
                            [dim](const Point&) { return Eigen::MatrixXd(
                                Eigen::MatrixXd::Identity(dim, dim)); },
                            dim, dt, /*alpha=*/1.0, /*sup_rho_op=*/1.0, /*s_lip=*/0.0,
                            trunc_radius);
  ec.chain.label = "ornstein_uhlenbeck_dim" + std::to_string(dim);
  return ec;
}

void check_euler_stability(const EulerChain& chain, RngStream& rng, int n_pairs, int n_draws,
                           double pair_scatter) {
  const double target = 1.0 - chain.alpha * chain.dt / 2.0;
  for (int p = 0; p < n_pairs; ++p) {
    Point x(chain.dim), y(chain.dim);
    for (int i = 0; i < chain.dim; ++i) {
      x[i] = pair_scatter * rng.normal();
      y[i] = pair_scatter * rng.normal();
    }
    double d2 = (x - y).squaredNorm();
    if (d2 == 0.0) continue;
    double sum = 0.0, sumsq = 0.0;
    for (int s = 0; s < n_draws; ++s) {
      auto [nx, ny] = chain.coupled_step(x, y, rng);
      double v = (nx - ny).squaredNorm();
      sum += v;
      sumsq += v * v;
    }
    double nd = static_cast<double>(n_draws);
    double mean = sum / nd;
    double se = std::sqrt(std::max(0.0, sumsq / nd - mean * mean) / nd);
    if (mean > target * target * d2 + 3.0 * se)
      throw Error("StabilityViolated", "coupled pair " + point_str(x) + ", " + point_str(y) +
                                           " contracts at rate " + std::to_string(mean / d2) +
                                           " > " + std::to_string(target * target));
  }
}

double synchronous_contraction_ratio(const EulerChain& chain, RngStream& rng, int n_pairs,
                                     int n_draws, double pair_scatter) {
  double acc = 0.0;
  long count = 0;
  for (int p = 0; p < n_pairs; ++p) {
    Point x(chain.dim), y(chain.dim);
    for (int i = 0; i < chain.dim; ++i) {
      x[i] = pair_scatter * rng.normal();
      y[i] = pair_scatter * rng.normal();
    }
    double d = (x - y).norm();
    if (d == 0.0) continue;
    for (int s = 0; s < n_draws; ++s) {
      auto [nx, ny] = chain.coupled_step(x, y, rng);
      acc += (nx - ny).norm() / d;
      ++count;
    }
  }
  return count > 0 ? acc / static_cast<double>(count) : 0.0;
}

double StateSpaceChain::s_estimate(const Point& x, RngStream& rng, long draws) const {
  double acc = 0.0;
  for (long s = 0; s < draws; ++s) {
    Point a = transition(x, noise(rng));
    Point b = transition(x, noise(rng));
    double d = chain.dist(a, b);
    acc += d * d;
  }
  return acc / static_cast<double>(draws) / (2.0 * (1.0 - r_decl));
}

StateSpaceChain state_space_model(
    std::function<Point(const Point&, const Point&)> transition,
    std::function<Point(RngStream&)> noise,
    std::function<double(const Point&, const Point&)> dist, double r_decl, double l_decl,
    std::string label) {
  if (!(r_decl >= 0.0) || r_decl >= 1.0)
    throw Error("ContractionViolated", "declared contraction factor must lie in [0, 1)");
  StateSpaceChain sc;
  sc.r_decl = r_decl;
  sc.l_decl = l_decl;
  sc.kappa_lower = 1.0 - r_decl;
  sc.transition = transition;
  sc.noise = noise;
  sc.chain.dist = dist;
  sc.chain.label = std::move(label);
  sc.chain.step = [transition, noise](const Point& x, RngStream& rng) {
    return transition(x, noise(rng));
  };
  return sc;
}

StateSpaceChain linear_state_space(double r, double noise_sd) {
  auto f = [r](const Point& x, const Point& w) { return Point(r * x + w); };
  auto noise = [noise_sd](RngStream& rng) {
    Point w(1);
    w[0] = noise_sd * rng.normal();
    return w;
  };
  auto dist = [](const Point& a, const Point& b) { return (a - b).norm(); };
  // E d(F(x,W1),F(x,W2))^2 = 2 Var(W) is constant in x, so L = 0.
  return state_space_model(f, noise, dist, r, 0.0, "linear_state_space");
}

void check_state_space_contraction(const StateSpaceChain& chain, RngStream& rng, int n_pairs,
                                   long n_draws, double pair_scatter) {
  for (int p = 0; p < n_pairs; ++p) {
    Point probe = chain.noise(rng);
    const auto dim = probe.size();
    Point x(dim), y(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      x[i] = pair_scatter * rng.normal();
      y[i] = pair_scatter * rng.normal();
    }
    double d = chain.chain.dist(x, y);
    if (d == 0.0) continue;
    double sum = 0.0, sumsq = 0.0;
    for (long s = 0; s < n_draws; ++s) {
      Point w = chain.noise(rng);
      double v = chain.chain.dist(chain.transition(x, w), chain.transition(y, w)) / d;
      sum += v;
      sumsq += v * v;
    }
    double nd = static_cast<double>(n_draws);
    double mean = sum / nd;
    double se = std::sqrt(std::max(0.0, sumsq / nd - mean * mean) / nd);
    if (mean > chain.r_decl + 3.0 * se)
      throw Error("ContractionViolated",
                  "pair " + point_str(x) + ", " + point_str(y) + " contracts at sampled rate " +
                      std::to_string(mean) + " > declared " + std::to_string(chain.r_decl));
  }
}

}  // namespace mcmccert
