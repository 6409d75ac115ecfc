#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "partflow/homotopy.hpp"
#include "partflow/particle_filter.hpp"
#include "partflow/pricing.hpp"
#include "partflow/random.hpp"
#include "partflow/reweighted.hpp"
#include "partflow/stein_stein.hpp"

namespace partflow {

struct ExperimentConfig {
  SteinSteinParams params;
  std::vector<Method> methods;
  std::size_t n_particles = 20000;
  std::size_t n_replications = 20;
  std::uint64_t seed = 1;
  int lambda_steps = 20;
  LambdaSpacing lambda_spacing = LambdaSpacing::uniform;
  double ess_threshold = 0.5;
  double reference_price = 0.0;
  std::string output_dir;  // empty: keep results in memory only
  bool emit_paths = false;
  bool fixed_path = false;          // one market path shared by all replications
  bool freeze_covariance = false;   // transport reuses the lambda=0 spread estimate
  MaturityWeights pf_maturity_weights = MaturityWeights::post_resample;
  RwEstimatorWeights rw_estimator_weights = RwEstimatorWeights::final_step;
  int threads = 1;
};

// Reads the experiment configuration from a JSON file.  Recognized keys
// mirror the fields above ("params" is the nested model-parameter object);
// unknown keys are rejected.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);
void validate_experiment_config(const ExperimentConfig& cfg);

// One Euler-Maruyama trajectory of the hidden volatility and the log-price,
// including the initial point (length n_steps + 1).  Used as the synthetic
// "observed" market path the filters condition on; deterministic per stream.
struct MarketPath {
  std::vector<double> x;
  std::vector<double> y;
};
MarketPath generate_market_path(const SteinSteinParams& params, RandomStream rng);

// Plain Monte Carlo price: simulate n particle paths with no conditioning and
// average the discounted payoff.
template <NoiseSource R = RandomStream>
double mc_price(const SteinSteinParams& params, std::size_t n_particles, const R& rng,
                std::vector<double>* vol_trace = nullptr) {
  if (n_particles < 2) throw ConfigError("mc_price: need at least 2 particles");
  const SteinSteinModel model{params};
  ParticleCloud c = pf_init(model, n_particles);
  if (vol_trace) {
    vol_trace->clear();
    vol_trace->push_back(c.x.front());
  }
  for (int t = 0; t < params.n_steps; ++t) {
    mutate_cloud(c, model, rng);
    if (vol_trace) vol_trace->push_back(sample_mean(c.x));
  }
  double acc = 0.0;
  for (double y : c.y) acc += discounted_call_payoff(params, y);
  return acc / static_cast<double>(n_particles);
}

// Runs n_replications seeded replications of every configured method.  Each
// replication draws one market path shared by all methods (pairing the
// comparisons); every (method, replication) pair prices with an independent
// substream.  Replications may run on several threads; stream assignment is
// by replication index, so estimates are identical for any thread count.
// When output_dir is set, writes reports.csv, reports.json and (with
// emit_paths) per-method trace_<name>.csv files with the replication-0
// filtered volatility means.
std::vector<EstimatorReport> run_experiment(const ExperimentConfig& cfg);

}  // namespace partflow
