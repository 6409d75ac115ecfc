#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "partflow/errors.hpp"
#include "partflow/reweighted.hpp"
#include "partflow/stein_stein.hpp"
#include "support/linear_gaussian.hpp"

using namespace partflow;
using testsupport::LaggedGaussianModel;
using testsupport::ZeroNoise;

namespace {

SteinSteinParams benchmark_params(int n_steps = 16) {
  SteinSteinParams p;
  p.mu = 0.0953;
  p.kappa = 4.0;
  p.theta = 0.25;
  p.sigma = 0.2;
  p.r = 0.0953;
  p.s0 = 100.0;
  p.strike = 90.0;
  p.maturity = 0.5;
  p.v0 = 0.25;
  p.dividend = 0.0;
  p.n_steps = n_steps;
  return validate_params(p);
}

// Flat likelihood: transport has nothing to do (zero gradient) and every
// weight increment is identical, so reweighted transport must collapse to
// plain homotopy transport.
struct FlatLikelihoodModel {
  int dimension() const noexcept { return 1; }
  StatePoint initial_state() const { return {1.0, 0.0}; }
  template <NoiseSource R>
  StatePoint step(const StatePoint& prev, R& rng) const {
    return {prev.x + 0.1 * rng.normal(), prev.y};
  }
  double likelihood_logdensity(double, double, double) const { return -1.0; }
  double loglik_gradient(double, double, double) const { return 0.0; }
  double loglik_hessian(double, double, double) const { return -0.25; }
};
static_assert(StateModel<FlatLikelihoodModel>);

}  // namespace

TEST_CASE("flat likelihood reduces reweighted transport to plain transport") {
  const FlatLikelihoodModel model;
  FilterConfig cfg;
  cfg.n_particles = 64;
  cfg.ess_threshold = 1.0;  // uniform weights: ESS = n, so never resamples
  const RandomStream rng(61, 0);
  const std::vector<double> obs{0.4, 0.6, 0.2};
  const HomotopySchedule sched = make_uniform_schedule(8);

  std::vector<double> rw_weights;
  const ParticleCloud rw = rw_run(model, cfg, 0.0, obs, sched, rng, true,
                                  RwEstimatorWeights::final_step, nullptr, nullptr,
                                  &rw_weights);
  const ParticleCloud ht = homotopy_run(model, cfg, 0.0, obs, sched, rng);

  const auto ht_weights = normalize_log_weights(ht.logw);
  REQUIRE(rw.size() == ht.size());
  for (std::size_t i = 0; i < rw.size(); ++i) {
    CHECK(rw.x[i] == ht.x[i]);
    CHECK(rw.y[i] == ht.y[i]);
    CHECK(rw_weights[i] == ht_weights[i]);
  }
}

TEST_CASE("rw_step weights the transported positions by their likelihood") {
  const LaggedGaussianModel model;
  FilterConfig cfg;
  cfg.n_particles = 3;
  ParticleCloud c;
  c.x = {0.8, 1.0, 1.2};
  c.y = {0.0, 0.0, 0.0};
  c.logw.assign(3, -std::log(3.0));
  c.t = 0;

  const double z_obs = 1.1;
  const ZeroNoise z;
  const HomotopySchedule sched = make_uniform_schedule(4);
  rw_step(c, model, 0.0, z_obs, sched, cfg, z, true, nullptr,
          /*allow_resample=*/false);

  // Replay the step: deterministic mutation, transport, then reweigh at the
  // transported positions.
  ParticleCloud ref;
  ref.x = {0.8, 1.0, 1.2};
  ref.y = {0.0, 0.0, 0.0};
  ref.logw.assign(3, -std::log(3.0));
  ref.t = 0;
  mutate_cloud(ref, model, z);
  transport_cloud(ref, model, 0.0, z_obs, sched, true);
  std::vector<double> lik(3);
  for (int i = 0; i < 3; ++i) lik[i] = model.likelihood_logdensity(ref.x[i], 0.0, z_obs);
  const auto expected = normalize_log_weights(lik);

  for (int i = 0; i < 3; ++i) {
    CHECK(c.x[i] == ref.x[i]);
    CHECK(std::exp(c.logw[i]) == doctest::Approx(expected[i]).epsilon(1e-12));
  }
}

TEST_CASE("previous-step weights snapshot the pre-final distribution") {
  const LaggedGaussianModel model;
  FilterConfig cfg;
  cfg.n_particles = 128;
  cfg.ess_threshold = 0.01;  // ESS >= 1 always, so no resample ever fires and
                             // both weight conventions share one terminal cloud
  const RandomStream rng(67, 0);
  const std::vector<double> obs{1.2, 0.8};
  const HomotopySchedule sched = make_uniform_schedule(8);

  std::vector<double> w_final, w_prev;
  const ParticleCloud c_final = rw_run(model, cfg, 0.0, obs, sched, rng, true,
                                       RwEstimatorWeights::final_step, nullptr, nullptr,
                                       &w_final);
  const ParticleCloud c_prev = rw_run(model, cfg, 0.0, obs, sched, rng, true,
                                      RwEstimatorWeights::previous_step, nullptr,
                                      nullptr, &w_prev);

  // Replay the recursion by hand to pin what "previous step" means.
  ParticleCloud ref = pf_init(model, cfg.n_particles);
  rw_step(ref, model, 0.0, obs[0], sched, cfg, rng, true, nullptr, true);
  const auto snapshot = normalize_log_weights(ref.logw);
  rw_step(ref, model, obs[0], obs[1], sched, cfg, rng, true, nullptr,
          /*allow_resample=*/false);

  REQUIRE(w_prev.size() == snapshot.size());
  for (std::size_t i = 0; i < w_prev.size(); ++i) {
    CHECK(w_prev[i] == snapshot[i]);
    CHECK(c_prev.x[i] == ref.x[i]);
  }
  // The two conventions pair different weights with the same terminal cloud.
  bool any_differ = false;
  for (std::size_t i = 0; i < w_prev.size(); ++i)
    if (w_prev[i] != w_final[i]) any_differ = true;
  CHECK(any_differ);
  for (std::size_t i = 0; i < w_prev.size(); ++i) CHECK(c_final.x[i] == c_prev.x[i]);
}

TEST_CASE("rw_run resamples under the configured ESS trigger") {
  const LaggedGaussianModel model;
  FilterConfig cfg;
  cfg.n_particles = 64;
  cfg.ess_threshold = 1.0;  // any weight spread triggers a resample
  const RandomStream rng(71, 0);
  const std::vector<double> obs{1.2};
  const ParticleCloud c = rw_run(model, cfg, 0.0, obs, make_uniform_schedule(4), rng);
  for (double lw : c.logw) CHECK(lw == -std::log(64.0));
}

TEST_CASE("rw_price validates the path and propagates degeneracy") {
  const SteinSteinParams p = benchmark_params(8);
  FilterConfig cfg;
  cfg.n_particles = 32;
  const RandomStream rng(73, 0);
  const HomotopySchedule sched = make_uniform_schedule(4);

  CHECK_THROWS_AS(rw_price(p, cfg, std::vector<double>(3, 4.6), sched, rng), ConfigError);

  std::vector<double> absurd(8, std::log(100.0) + 40000.0);
  CHECK_THROWS_AS(rw_price(p, cfg, absurd, sched, rng), DegenerateWeightsError);
}

TEST_CASE("rw_price reproduces the zero-noise skeleton price") {
  const SteinSteinParams p = benchmark_params(16);
  FilterConfig cfg;
  cfg.n_particles = 8;
  const ZeroNoise z;

  std::vector<double> y_path;
  {
    const SteinSteinModel model{p};
    ZeroNoise zz;
    StatePoint s = model.initial_state();
    for (int t = 0; t < p.n_steps; ++t) {
      s = model.step(s, zz);
      y_path.push_back(s.y);
    }
  }
  const HomotopySchedule sched = make_uniform_schedule(8);
  const double rw = rw_price(p, cfg, y_path, sched, z);
  const double ht = homotopy_price(p, cfg, y_path, sched, z);
  CHECK(rw == doctest::Approx(12.637573894509917).epsilon(1e-6));
  CHECK(rw == ht);  // identical clouds and uniform weights in both estimators
}

TEST_CASE("rw_price on a simulated path lands near the true price scale") {
  const SteinSteinParams p = benchmark_params(64);
  const SteinSteinModel model{p};
  RandomStream path_rng(79, 5);
  std::vector<double> y_path;
  StatePoint s = model.initial_state();
  for (int t = 0; t < p.n_steps; ++t) {
    s = model.step(s, path_rng);
    y_path.push_back(s.y);
  }
  FilterConfig cfg;
  cfg.n_particles = 1000;
  const RandomStream rng(83, 0);
  TransportDiagnostics diag;
  const double price = rw_price(p, cfg, y_path, make_uniform_schedule(16), rng, true,
                                RwEstimatorWeights::final_step, nullptr, &diag);
  CHECK(std::isfinite(price));
  CHECK(price > 5.0);
  CHECK(price < 40.0);
}
