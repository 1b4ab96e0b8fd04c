#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <utility>

#include "mcmccert/rng.hpp"

namespace mcmccert {

// Chain on a continuous state space, known only through its sampler and the
// ground metric. Stepping takes a caller-owned stream, so replicas can run
// in parallel without shared state.
struct SamplerChain {
  using Point = Eigen::VectorXd;
  std::function<Point(const Point&, RngStream&)> step;
  std::function<double(const Point&, const Point&)> dist;
  std::string label;
};

// Observable on sampler-chain points with a declared Lipschitz norm.
struct PointObservable {
  std::function<double(const SamplerChain::Point&)> f;
  double lip_norm = 1.0;
  std::string name;
};

// Checks |f(x)-f(y)| <= lip_norm d(x,y) on sampled pairs around `center`.
// Throws Error("LipschitzViolated").
void verify_lipschitz_sampled(const PointObservable& obs, const SamplerChain& chain,
                              const SamplerChain::Point& center, double scatter, int pairs,
                              RngStream& rng, double tol = 1e-9);

// One explicit Euler step of dX = b(X) dt + sqrt(2) rho(X) dW with the
// Gaussian innovations conditioned on a ball of radius trunc_radius (keeps
// every step bounded so the granularity is finite).
struct EulerChain {
  using Point = SamplerChain::Point;
  SamplerChain chain;
  int dim = 1;
  double dt = 0.0;
  double alpha = 0.0;         // dissipativity rate
  double trunc_radius = 6.0;  // noise truncation, in standard deviations
  double sup_rho_op = 1.0;    // declared sup_x ||rho(x)||_op
  double sigma_inf = 0.0;     // trunc_radius sqrt(2 dt) sup_rho_op
  double kappa_nominal = 0.0; // alpha dt, the per-step contraction rate
  std::function<double(const Point&)> sigma2;  // 2 dt ||rho(x)||_HS^2
  std::function<double(const Point&)> s_fn;    // (2/alpha) ||rho(x)||_op^2
  double s_lip = 0.0;                          // declared Lipschitz norm of s_fn
  std::function<double(const Point&)> n_lower; // ||rho||_HS^2 / ||rho||_op^2

  // Synchronous coupling: both points advance with the same innovation.
  std::pair<Point, Point> coupled_step(const Point& x, const Point& y, RngStream& rng) const;

 private:
  friend EulerChain euler_sde(std::function<Point(const Point&)> drift,
                              std::function<Eigen::MatrixXd(const Point&)> diffusion, int dim,
                              double dt, double alpha, double sup_rho_op, double s_lip,
                              double trunc_radius);
  std::function<Point(const Point&)> drift_;
  std::function<Eigen::MatrixXd(const Point&)> diffusion_;
};

EulerChain euler_sde(std::function<EulerChain::Point(const EulerChain::Point&)> drift,
                     std::function<Eigen::MatrixXd(const EulerChain::Point&)> diffusion, int dim,
                     double dt, double alpha, double sup_rho_op, double s_lip,
                     double trunc_radius = 6.0);

// drift -x, identity diffusion, alpha = 1.
EulerChain ornstein_uhlenbeck(int dim, double dt, double trunc_radius = 6.0);

// Spot-checks the one-step mean-square contraction of synchronously coupled
// pairs: E d(X'(x), X'(y))^2 <= (1 - alpha dt / 2)^2 d(x,y)^2 within Monte
// Carlo slack. Throws Error("StabilityViolated") with the offending pair.
void check_euler_stability(const EulerChain& chain, RngStream& rng, int n_pairs = 16,
                           int n_draws = 2000, double pair_scatter = 2.0);

// Mean one-step contraction ratio of synchronously coupled pairs; the
// sampled-coupling curvature estimate is 1 minus this.
double synchronous_contraction_ratio(const EulerChain& chain, RngStream& rng, int n_pairs = 16,
                                     int n_draws = 200, double pair_scatter = 2.0);

// Noisy dynamical system X' = F(X, W) with declared mean contraction factor
// r < 1 and declared L2-Lipschitz constant of x -> E d(F(x,W1), F(x,W2))^2.
struct StateSpaceChain {
  using Point = SamplerChain::Point;
  SamplerChain chain;
  double r_decl = 0.0;
  double l_decl = 0.0;
  double kappa_lower = 0.0;  // 1 - r_decl
  std::function<Point(const Point&, const Point&)> transition;  // F
  std::function<Point(RngStream&)> noise;

  // Monte Carlo estimate of S(x) = E d(F(x,W1), F(x,W2))^2 / (2 (1-r)).
  double s_estimate(const Point& x, RngStream& rng, long draws) const;
  double s_lip() const { return l_decl / (2.0 * (1.0 - r_decl)); }
};

StateSpaceChain state_space_model(
    std::function<StateSpaceChain::Point(const StateSpaceChain::Point&,
                                         const StateSpaceChain::Point&)> transition,
    std::function<StateSpaceChain::Point(RngStream&)> noise,
    std::function<double(const StateSpaceChain::Point&, const StateSpaceChain::Point&)> dist,
    double r_decl, double l_decl, std::string label);

// Scalar linear model F(x, w) = r x + w with centered Gaussian noise.
StateSpaceChain linear_state_space(double r, double noise_sd);

// Checks sampled E d(F(x,W), F(y,W)) <= (r_decl + 3 SE) d(x,y) on random
// pairs. Throws Error("ContractionViolated") with the offending pair.
void check_state_space_contraction(const StateSpaceChain& chain, RngStream& rng,
                                   int n_pairs = 16, long n_draws = 10000,
                                   double pair_scatter = 2.0);

}  // namespace mcmccert
