#pragma once

#include <concepts>

#include "partflow/random.hpp"

namespace partflow {

// One (hidden, observed) coordinate pair of a scalar state-space model.
struct StatePoint {
  double x = 0.0;  // hidden state
  double y = 0.0;  // observed-process value carried by the particle
};

// Clamps applied to log-densities so degenerate evaluations stay finite.
inline constexpr double kLogDensityFloor = -1e10;
inline constexpr double kLogDensityCeil = 1e10;

// Scalar state-space model: forward sampling plus the log-likelihood of the
// next observation as a function of the hidden state, with its first and
// second derivatives in that state.  The derivative signature mirrors the
// likelihood's: (hidden state, previous observation, current observation).
template <class M, class R = RandomStream>
concept StateModel = NoiseSource<R> && requires(const M m, StatePoint s, double v, R& r) {
  { m.dimension() } -> std::convertible_to<int>;
  { m.initial_state() } -> std::same_as<StatePoint>;
  { m.step(s, r) } -> std::same_as<StatePoint>;
  { m.likelihood_logdensity(v, v, v) } -> std::convertible_to<double>;
  { m.loglik_gradient(v, v, v) } -> std::convertible_to<double>;
  { m.loglik_hessian(v, v, v) } -> std::convertible_to<double>;
};

}  // namespace partflow
