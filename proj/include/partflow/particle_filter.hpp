#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "partflow/errors.hpp"
#include "partflow/model.hpp"
#include "partflow/numerics.hpp"
#include "partflow/pricing.hpp"
#include "partflow/random.hpp"

namespace partflow {

// Positions, per-particle observed-process paths and normalized log-weights
// of n particles at one time index.
struct ParticleCloud {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> logw;
  int t = 0;

  std::size_t size() const { return x.size(); }
};

enum class ResampleScheme { systematic };

// Which weights price the terminal payoff in the particle filter: the
// normalized weights after the final step (uniform if that step resampled),
// or the pre-resampling weights (the final resample is suppressed).
enum class MaturityWeights { post_resample, pre_resample };

struct FilterConfig {
  std::size_t n_particles = 1000;
  double ess_threshold = 0.5;  // resample when ESS < threshold * n
  ResampleScheme resample_scheme = ResampleScheme::systematic;
  MaturityWeights maturity_weights = MaturityWeights::post_resample;
};

inline void validate_filter_config(const FilterConfig& cfg) {
  if (cfg.n_particles < 2) throw ConfigError("filter config: need at least 2 particles");
  if (!(cfg.ess_threshold > 0.0 && cfg.ess_threshold <= 1.0))
    throw ConfigError("filter config: ess_threshold must lie in (0, 1]");
}

// Substream keys: one child stream per (time step, particle slot) plus a
// dedicated slot for the resampling draw, so draw sequences are independent
// of evaluation order.
inline std::uint64_t particle_draw_key(int t, std::size_t i) {
  return (static_cast<std::uint64_t>(t) << 40) | static_cast<std::uint64_t>(i);
}
inline std::uint64_t resample_draw_key(int t) {
  return (static_cast<std::uint64_t>(t) << 40) | 0xffffffffffull;
}

// All particles start at the model's initial state with uniform weights
// (degenerate prior: the initial hidden state is known).
template <class M>
ParticleCloud pf_init(const M& model, std::size_t n) {
  if (n < 2) throw ConfigError("pf_init: need at least 2 particles");
  const StatePoint s0 = model.initial_state();
  ParticleCloud c;
  c.x.assign(n, s0.x);
  c.y.assign(n, s0.y);
  c.logw.assign(n, -std::log(static_cast<double>(n)));
  c.t = 0;
  return c;
}

// Advances every particle one step through the transition kernel, using the
// per-(step, slot) substreams of rng.
template <class M, NoiseSource R>
void mutate_cloud(ParticleCloud& c, const M& model, const R& rng) {
  const int t_next = c.t + 1;
  for (std::size_t i = 0; i < c.size(); ++i) {
    auto r = rng.substream(particle_draw_key(t_next, i));
    const StatePoint s = model.step(StatePoint{c.x[i], c.y[i]}, r);
    c.x[i] = s.x;
    c.y[i] = s.y;
  }
  c.t = t_next;
}

// Renormalizes cloud log-weights in place and returns the probabilities.
inline std::vector<double> renormalize_cloud(ParticleCloud& c) {
  auto w = normalize_log_weights(c.logw);
  for (std::size_t i = 0; i < w.size(); ++i) c.logw[i] = std::log(w[i]);
  return w;
}

// Systematic resample of the whole cloud; weights reset to uniform.
inline void resample_cloud(ParticleCloud& c, double u) {
  const auto w = normalize_log_weights(c.logw);
  const auto idx = systematic_resample(w, u, c.size());
  std::vector<double> nx(c.size()), ny(c.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    nx[j] = c.x[idx[j]];
    ny[j] = c.y[idx[j]];
  }
  c.x = std::move(nx);
  c.y = std::move(ny);
  c.logw.assign(c.size(), -std::log(static_cast<double>(c.size())));
}

// One bootstrap filter step: weight by the likelihood of y_obs evaluated at
// the pre-mutation states (the proposal is the transition kernel itself, so
// the kernel ratio collapses and the increment is the likelihood alone),
// mutate, renormalize, and resample when the effective sample size drops
// below the configured fraction of n.
template <class M, NoiseSource R>
void pf_step(ParticleCloud& c, const M& model, double y_obs_prev, double y_obs,
             const FilterConfig& cfg, const R& rng, bool allow_resample = true) {
  const std::size_t n = c.size();
  double max_inc = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double inc = model.likelihood_logdensity(c.x[i], y_obs_prev, y_obs);
    c.logw[i] += inc;
    if (inc > max_inc) max_inc = inc;
  }
  if (max_inc <= kLogDensityFloor)
    throw DegenerateWeightsError("pf_step: every likelihood underflowed to the floor");

  mutate_cloud(c, model, rng);

  const auto w = renormalize_cloud(c);
  if (allow_resample &&
      effective_sample_size(w) < cfg.ess_threshold * static_cast<double>(n)) {
    const double u = rng.substream(resample_draw_key(c.t)).uniform();
    resample_cloud(c, u);
  }
}

// Runs the filter over the observation sequence.  y0 is the observation the
// first likelihood conditions on; observations holds y_1..y_N.  When
// vol_trace is given it receives the weighted mean hidden state per step
// (N + 1 entries including the initial state).
template <class M, NoiseSource R>
ParticleCloud pf_run(const M& model, const FilterConfig& cfg, double y0,
                     std::span<const double> observations, const R& rng,
                     std::vector<double>* vol_trace = nullptr) {
  validate_filter_config(cfg);
  ParticleCloud c = pf_init(model, cfg.n_particles);
  if (vol_trace) {
    vol_trace->clear();
    vol_trace->push_back(c.x.front());
  }
  double y_prev = y0;
  for (std::size_t k = 0; k < observations.size(); ++k) {
    const bool last = (k + 1 == observations.size());
    const bool allow_resample =
        !(last && cfg.maturity_weights == MaturityWeights::pre_resample);
    pf_step(c, model, y_prev, observations[k], cfg, rng, allow_resample);
    y_prev = observations[k];
    if (vol_trace) {
      const auto w = normalize_log_weights(c.logw);
      vol_trace->push_back(weighted_mean(c.x, w));
    }
  }
  return c;
}

// Weight-averaged discounted call payoff over the particles' own terminal
// log-prices.
inline double weighted_discounted_payoff(const SteinSteinParams& params,
                                         const ParticleCloud& c) {
  const auto w = normalize_log_weights(c.logw);
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    acc += w[i] * discounted_call_payoff(params, c.y[i]);
  return acc;
}

// Bootstrap-particle-filter price: condition on the observed log-price path
// y_path (y_1..y_N) and average the discounted payoff under the terminal
// weights.
template <NoiseSource R = RandomStream>
double pf_price(const SteinSteinParams& params, const FilterConfig& cfg,
                std::span<const double> y_path, const R& rng,
                std::vector<double>* vol_trace = nullptr) {
  if (y_path.size() != static_cast<std::size_t>(params.n_steps))
    throw ConfigError("pf_price: observation path length must equal n_steps");
  const SteinSteinModel model{params};
  const ParticleCloud c =
      pf_run(model, cfg, std::log(params.s0), y_path, rng, vol_trace);
  return weighted_discounted_payoff(params, c);
}

}  // namespace partflow
