#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "partflow/errors.hpp"
#include "partflow/model.hpp"
#include "partflow/numerics.hpp"
#include "partflow/particle_filter.hpp"
#include "partflow/random.hpp"

namespace partflow {

enum class LambdaSpacing { uniform, geometric };

// Pseudo-time grid 0 = l_0 < l_1 < ... < l_K = 1 deforming the prior (l = 0)
// into the posterior (l = 1).
struct HomotopySchedule {
  std::vector<double> grid;
  LambdaSpacing spacing = LambdaSpacing::uniform;

  int n_lambda() const { return static_cast<int>(grid.size()) - 1; }
};

HomotopySchedule make_uniform_schedule(int n_lambda);
// Geometrically growing increments (finer steps near 0, where the prior
// dominates the combined curvature and the flow changes fastest).
HomotopySchedule make_geometric_schedule(int n_lambda, double ratio = 1.2);
void validate_schedule(const HomotopySchedule& sched);

// Floor applied to the sample covariance before inversion, so a degenerate
// cloud yields a huge (but finite) prior curvature and a near-zero flow.
inline constexpr double kCovarianceFloor = 1e-8;
// Combined curvatures at or below this magnitude count as singular.
inline constexpr double kSingularHessianTol = 1e-12;
// Regularization added to a singular curvature, relative to the prior term.
inline constexpr double kHessianRegularization = 1e-6;

// Prior log-density curvature estimated from the particle spread: -1/S with
// S the (floored) sample variance of the positions.
double prior_hessian_estimate(std::span<const double> positions);
double prior_hessian_estimate(std::span<const double> positions,
                              std::span<const double> weights);

// Deterministic flow velocity dX/dlambda = -grad_L / (prior_hessian +
// lambda * hess_L).  Throws SingularHessianError when the combined curvature
// is within kSingularHessianTol of zero.
double flow_velocity(double lambda, double prior_hessian, double grad_L, double hess_L);

struct TransportDiagnostics {
  long long regularized = 0;  // singular curvature repaired in place
  long long frozen = 0;       // particle skipped (non-finite velocity/derivative)
  long long clamped = 0;      // displacement cut to the trust region
};

// Moves the cloud through pseudo-time with explicit Euler steps, evaluating
// the likelihood derivatives at each particle's current position and lambda
// at the left endpoint of each increment.  The prior curvature is refreshed
// from the current (weighted) particle spread every lambda step unless
// refresh_covariance is false, in which case the initial estimate is reused.
// Weights are left untouched.
//
// Per-particle guards: a singular combined curvature is regularized by
// kHessianRegularization * |prior curvature|; a non-finite velocity or
// derivative freezes the particle for that step; displacements larger than
// one cloud standard deviation per lambda step are clamped to it (a trust
// region that is inactive for well-posed flows but stops near-singular
// curvature crossings from teleporting particles).
template <class M>
void transport_cloud(ParticleCloud& c, const M& model, double y_obs_prev, double y_obs,
                     const HomotopySchedule& sched, bool refresh_covariance = true,
                     TransportDiagnostics* diag = nullptr) {
  validate_schedule(sched);
  const std::size_t n = c.size();
  const auto w = normalize_log_weights(c.logw);

  double prior_hess = prior_hessian_estimate(c.x, w);
  for (int k = 0; k < sched.n_lambda(); ++k) {
    const double lambda = sched.grid[k];
    const double dl = sched.grid[k + 1] - sched.grid[k];
    if (refresh_covariance && k > 0) prior_hess = prior_hessian_estimate(c.x, w);
    const double step_cap = std::sqrt(-1.0 / prior_hess);

    for (std::size_t i = 0; i < n; ++i) {
      double grad, hess;
      try {
        grad = model.loglik_gradient(c.x[i], y_obs_prev, y_obs);
        hess = model.loglik_hessian(c.x[i], y_obs_prev, y_obs);
      } catch (const DegenerateVolatilityError&) {
        if (diag) ++diag->frozen;
        continue;
      }
      double denom = prior_hess + lambda * hess;
      if (std::fabs(denom) <= kSingularHessianTol) {
        denom -= kHessianRegularization * std::fabs(prior_hess);
        if (diag) ++diag->regularized;
      }
      double dx = -dl * grad / denom;
      if (!std::isfinite(dx)) {
        if (diag) ++diag->frozen;
        continue;
      }
      if (std::fabs(dx) > step_cap) {
        dx = std::copysign(step_cap, dx);
        if (diag) ++diag->clamped;
      }
      c.x[i] += dx;
    }
  }
}

// Homotopy-transport filter: mutate through the transition kernel, then
// transport the cloud to the per-step posterior.  Weights stay uniform
// throughout; transport replaces reweighting.
template <class M, NoiseSource R>
ParticleCloud homotopy_run(const M& model, const FilterConfig& cfg, double y0,
                           std::span<const double> observations,
                           const HomotopySchedule& sched, const R& rng,
                           bool refresh_covariance = true,
                           std::vector<double>* vol_trace = nullptr,
                           TransportDiagnostics* diag = nullptr) {
  validate_filter_config(cfg);
  ParticleCloud c = pf_init(model, cfg.n_particles);
  if (vol_trace) {
    vol_trace->clear();
    vol_trace->push_back(c.x.front());
  }
  double y_prev = y0;
  for (double y_obs : observations) {
    mutate_cloud(c, model, rng);
    transport_cloud(c, model, y_prev, y_obs, sched, refresh_covariance, diag);
    y_prev = y_obs;
    if (vol_trace) vol_trace->push_back(sample_mean(c.x));
  }
  return c;
}

// Homotopy-transport price: unweighted average of the discounted payoff over
// the transported particles' own terminal log-prices.
template <NoiseSource R = RandomStream>
double homotopy_price(const SteinSteinParams& params, const FilterConfig& cfg,
                      std::span<const double> y_path, const HomotopySchedule& sched,
                      const R& rng, bool refresh_covariance = true,
                      std::vector<double>* vol_trace = nullptr,
                      TransportDiagnostics* diag = nullptr) {
  if (y_path.size() != static_cast<std::size_t>(params.n_steps))
    throw ConfigError("homotopy_price: observation path length must equal n_steps");
  const SteinSteinModel model{params};
  const ParticleCloud c = homotopy_run(model, cfg, std::log(params.s0), y_path, sched,
                                       rng, refresh_covariance, vol_trace, diag);
  return weighted_discounted_payoff(params, c);
}

}  // namespace partflow
