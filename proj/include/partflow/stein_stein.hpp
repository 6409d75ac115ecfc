#pragma once

#include <cmath>
#include <string>

#include "partflow/model.hpp"
#include "partflow/random.hpp"

namespace partflow {

// Market and discretization constants for the Stein-Stein stochastic
// volatility model
//   dY = (mu - X^2/2) dt + X dB,   dX = kappa (theta - X) dt + sigma dW
// with independent Brownian motions and Y = log S.  The volatility X is an
// unconstrained Ornstein-Uhlenbeck process; negative excursions are allowed.
struct SteinSteinParams {
  double mu = 0.0;        // log-return drift (per year)
  double kappa = 0.0;     // volatility mean-reversion rate (per year)
  double theta = 0.0;     // long-run volatility level
  double sigma = 0.0;     // volatility of volatility (per year^1/2)
  double r = 0.0;         // risk-free rate (per year)
  double s0 = 0.0;        // initial asset price
  double strike = 0.0;    // call strike
  double maturity = 0.0;  // T in years
  double v0 = 0.0;        // initial volatility X_0
  double dividend = 0.0;  // continuous dividend yield (per year)
  int n_steps = 0;        // Euler steps over [0, T]
  double dt = 0.0;        // maturity / n_steps, derived
};

// Range-checks the fields and derives dt.  Throws ConfigError.
SteinSteinParams validate_params(SteinSteinParams p);

// Parses a JSON object with keys exactly
//   mu, kappa, theta, sigma, r, s0, strike, maturity, v0, dividend, n_steps;
// unknown or missing keys are rejected.  load_params reads the file at path.
SteinSteinParams parse_params(const std::string& json_text);
SteinSteinParams load_params(const std::string& path);

// Volatilities below this magnitude make the observation variance x^2 dt
// numerically degenerate.
inline constexpr double kDegenerateVolatility = 1e-10;

// One Euler-Maruyama step.  The return increment is driven by the
// previous-step volatility:
//   y' = y + (mu - x^2/2) dt + x sqrt(dt) eps
//   x' = x + kappa (theta - x) dt + sigma sqrt(dt) eta
StatePoint euler_step(const SteinSteinParams& p, StatePoint prev, double eps,
                      double eta) noexcept;

// log N(x_next; x_prev + kappa (theta - x_prev) dt, sigma^2 dt).
double transition_logdensity(const SteinSteinParams& p, double x_prev, double x_next);

// log-density of the next observation given the previous one and the hidden
// state: log N(y_obs; m, s) with m = y_prev + (mu - x_prev^2/2) dt and
// s = x_prev^2 dt.  Degenerate volatility returns the floor (or the ceiling
// clamp when y_obs hits the deterministic mean exactly); regular evaluations
// are floored at kLogDensityFloor so arithmetic stays finite.
double likelihood_logdensity(const SteinSteinParams& p, double x_prev, double y_prev,
                             double y_obs);

// d/dx and d^2/dx^2 of likelihood_logdensity in the hidden state.  With
// e = y_obs - m:
//   grad = -e/x + e^2/(x^3 dt) - 1/x
//   hess = 1/x^2 - dt + 3 e/x^2 - 3 e^2/(x^4 dt)
// Both throw DegenerateVolatilityError when |x_prev| < kDegenerateVolatility.
double loglik_gradient(const SteinSteinParams& p, double x_prev, double y_prev,
                       double y_obs);
double loglik_hessian(const SteinSteinParams& p, double x_prev, double y_prev,
                      double y_obs);

// Model adapter bundling the parameter set with the operations above.
struct SteinSteinModel {
  SteinSteinParams params;

  int dimension() const noexcept { return 1; }

  StatePoint initial_state() const {
    return {params.v0, std::log(params.s0)};
  }

  // Draw order: return shock first, then volatility shock.
  template <NoiseSource R>
  StatePoint step(const StatePoint& prev, R& rng) const {
    const double eps = rng.normal();
    const double eta = rng.normal();
    return euler_step(params, prev, eps, eta);
  }

  double likelihood_logdensity(double x_prev, double y_prev, double y_obs) const {
    return partflow::likelihood_logdensity(params, x_prev, y_prev, y_obs);
  }
  double loglik_gradient(double x_prev, double y_prev, double y_obs) const {
    return partflow::loglik_gradient(params, x_prev, y_prev, y_obs);
  }
  double loglik_hessian(double x_prev, double y_prev, double y_obs) const {
    return partflow::loglik_hessian(params, x_prev, y_prev, y_obs);
  }
};

static_assert(StateModel<SteinSteinModel>);

}  // namespace partflow
