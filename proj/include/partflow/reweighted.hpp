#pragma once

#include <limits>
#include <span>
#include <vector>

#include "partflow/errors.hpp"
#include "partflow/homotopy.hpp"
#include "partflow/model.hpp"
#include "partflow/particle_filter.hpp"
#include "partflow/random.hpp"

namespace partflow {

// Which weights price the terminal payoff in the reweighted-transport
// estimator: the weights after the final reweigh, or the previous step's
// weights paired with the final-step payoffs (the final resample is
// suppressed so slots stay aligned).
enum class RwEstimatorWeights { final_step, previous_step };

// One reweighted-transport step: mutate through the transition kernel,
// transport the cloud along the flow, then weight each transported particle
// by the likelihood evaluated at its transported position (the mutation
// proposal is the transition kernel itself, so the kernel ratio is 1 and the
// increment is the likelihood alone).  Resamples systematically when the
// effective sample size drops below the configured fraction of n.
template <class M, NoiseSource R>
void rw_step(ParticleCloud& c, const M& model, double y_obs_prev, double y_obs,
             const HomotopySchedule& sched, const FilterConfig& cfg, const R& rng,
             bool refresh_covariance = true, TransportDiagnostics* diag = nullptr,
             bool allow_resample = true) {
  mutate_cloud(c, model, rng);
  transport_cloud(c, model, y_obs_prev, y_obs, sched, refresh_covariance, diag);

  const std::size_t n = c.size();
  double max_inc = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double inc = model.likelihood_logdensity(c.x[i], y_obs_prev, y_obs);
    c.logw[i] += inc;
    if (inc > max_inc) max_inc = inc;
  }
  if (max_inc <= kLogDensityFloor)
    throw DegenerateWeightsError("rw_step: every likelihood underflowed to the floor");

  const auto w = renormalize_cloud(c);
  if (allow_resample &&
      effective_sample_size(w) < cfg.ess_threshold * static_cast<double>(n)) {
    const double u = rng.substream(resample_draw_key(c.t)).uniform();
    resample_cloud(c, u);
  }
}

// Runs reweighted transport over the observation sequence.  When weights_out
// is given it receives the normalized weights the estimator should pair with
// the terminal payoffs (per the weights convention).
template <class M, NoiseSource R>
ParticleCloud rw_run(const M& model, const FilterConfig& cfg, double y0,
                     std::span<const double> observations, const HomotopySchedule& sched,
                     const R& rng, bool refresh_covariance = true,
                     RwEstimatorWeights weights_mode = RwEstimatorWeights::final_step,
                     std::vector<double>* vol_trace = nullptr,
                     TransportDiagnostics* diag = nullptr,
                     std::vector<double>* weights_out = nullptr) {
  validate_filter_config(cfg);
  ParticleCloud c = pf_init(model, cfg.n_particles);
  if (vol_trace) {
    vol_trace->clear();
    vol_trace->push_back(c.x.front());
  }
  std::vector<double> snapshot;
  double y_prev = y0;
  for (std::size_t k = 0; k < observations.size(); ++k) {
    const bool last = (k + 1 == observations.size());
    const bool previous_mode = (weights_mode == RwEstimatorWeights::previous_step);
    if (last && previous_mode) snapshot = normalize_log_weights(c.logw);
    rw_step(c, model, y_prev, observations[k], sched, cfg, rng, refresh_covariance,
            diag, /*allow_resample=*/!(last && previous_mode));
    y_prev = observations[k];
    if (vol_trace) {
      const auto w = normalize_log_weights(c.logw);
      vol_trace->push_back(weighted_mean(c.x, w));
    }
  }
  if (weights_out) {
    *weights_out = snapshot.empty() ? normalize_log_weights(c.logw) : std::move(snapshot);
  }
  return c;
}

// Reweighted-transport price: weight-averaged discounted payoff over the
// transported particles' own terminal log-prices.
template <NoiseSource R = RandomStream>
double rw_price(const SteinSteinParams& params, const FilterConfig& cfg,
                std::span<const double> y_path, const HomotopySchedule& sched,
                const R& rng, bool refresh_covariance = true,
                RwEstimatorWeights weights_mode = RwEstimatorWeights::final_step,
                std::vector<double>* vol_trace = nullptr,
                TransportDiagnostics* diag = nullptr) {
  if (y_path.size() != static_cast<std::size_t>(params.n_steps))
    throw ConfigError("rw_price: observation path length must equal n_steps");
  const SteinSteinModel model{params};
  std::vector<double> weights;
  const ParticleCloud c = rw_run(model, cfg, std::log(params.s0), y_path, sched, rng,
                                 refresh_covariance, weights_mode, vol_trace, diag,
                                 &weights);
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    acc += weights[i] * discounted_call_payoff(params, c.y[i]);
  return acc;
}

}  // namespace partflow
