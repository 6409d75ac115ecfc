// Acceptance checks for the particle-transport pricing toolkit.  Each
// criterion prints exactly one [PASS]/[FAIL] gate line with its measured
// numbers; failures do not stop the remaining criteria, and the process exit
// code reflects whether every criterion passed.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "partflow/experiment.hpp"
#include "partflow/homotopy.hpp"
#include "partflow/numerics.hpp"
#include "partflow/particle_filter.hpp"
#include "partflow/pricing.hpp"
#include "partflow/random.hpp"
#include "partflow/statistics.hpp"
#include "partflow/stein_stein.hpp"
#include "support/linear_gaussian.hpp"

using namespace partflow;
using testsupport::SingleUpdateModel;
using testsupport::ZeroNoise;
using testsupport::kalman_update;

namespace {

// A failed requirement aborts the current criterion but not the suite.
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Always-on requirement: never compiled out in Release.
#define REQUIRE(cond, msg)                                      \
  do {                                                          \
    if (!(cond)) {                                              \
      std::ostringstream os_;                                   \
      os_ << msg;                                               \
      throw CheckFailure(os_.str());                            \
    }                                                           \
  } while (0)

void requireCloseAbsOrRel(const std::string& name, double a, double b, double absTol,
                          double relTol) {
  REQUIRE(std::isfinite(a) && std::isfinite(b), name << " non-finite: a=" << a
                                                     << " b=" << b);
  const double diff = std::fabs(a - b);
  const double denom = std::max(std::fabs(a), std::fabs(b));
  const double rel = denom > 0.0 ? diff / denom : diff;
  REQUIRE(diff <= absTol || rel <= relTol,
          name << ": a=" << a << " b=" << b << " diff=" << diff << " (absTol=" << absTol
               << ") rel=" << rel << " (relTol=" << relTol << ")");
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int pick_threads() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(std::min(hc, 8u));
}

SteinSteinParams pricing_params(int n_steps = 64) {
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

constexpr double kReferencePrice = 16.05;

ExperimentConfig pricing_experiment(std::size_t n_particles) {
  ExperimentConfig cfg;
  cfg.params = pricing_params();
  cfg.methods = {Method::mc, Method::pf, Method::homotopy, Method::rw_homotopy};
  cfg.n_particles = n_particles;
  cfg.n_replications = 20;
  cfg.seed = 20260815;
  cfg.lambda_steps = 20;
  cfg.lambda_spacing = LambdaSpacing::uniform;
  cfg.ess_threshold = 0.5;
  cfg.reference_price = kReferencePrice;
  cfg.threads = pick_threads();
  return cfg;
}

// The 5000-particle pricing run is shared by the mean-recovery and
// variance-ordering criteria; run it once.
const std::vector<EstimatorReport>& pricing_run_5000() {
  static const std::vector<EstimatorReport> reports =
      run_experiment(pricing_experiment(5000));
  return reports;
}

// ---------------------------------------------------------------------------
// 1. Transporting a Gaussian cloud through the full likelihood homotopy must
//    land on the conjugate-Gaussian (Kalman) posterior.
void criterionTransportMatchesKalman() {
  const auto t0 = Clock::now();
  const SingleUpdateModel model;
  RandomStream rng(4242, 0);

  ParticleCloud c = pf_init(model, 10000);
  mutate_cloud(c, model, rng);
  const double prior_mean = sample_mean(c.x);
  const double prior_var = sample_covariance(c.x);

  const double y_obs = 1.3;
  const auto oracle = kalman_update(prior_mean, prior_var, y_obs, model.obs_var);

  transport_cloud(c, model, 0.0, y_obs, make_uniform_schedule(128));
  const double post_mean = sample_mean(c.x);
  const double post_var = sample_covariance(c.x);

  std::cout << "  posterior mean " << post_mean << " vs oracle " << oracle.mean
            << " (diff " << std::fabs(post_mean - oracle.mean) << "), variance "
            << post_var << " vs " << oracle.var << "\n";
  REQUIRE(std::fabs(post_mean - oracle.mean) <= 1e-3,
          "transported mean " << post_mean << " vs Kalman " << oracle.mean
                              << " differs by more than 1e-3");
  requireCloseAbsOrRel("transported variance vs Kalman", post_var, oracle.var, 0.0,
                       0.02);
  const double secs = seconds_since(t0);
  REQUIRE(secs < 10.0, "took " << secs << "s, limit 10s");
}

// ---------------------------------------------------------------------------
// 2. Closed-form likelihood derivatives must match central finite differences
//    at random admissible states.
void criterionDerivativesMatchFiniteDifferences() {
  const auto t0 = Clock::now();
  const SteinSteinParams p = pricing_params();
  RandomStream rng(929, 0);

  for (int k = 0; k < 100; ++k) {
    const double mag = 0.1 + 0.9 * rng.uniform();
    const double x = rng.uniform() < 0.5 ? -mag : mag;
    const double y_prev = 4.0 + rng.uniform();
    const double z = -2.0 + 4.0 * rng.uniform();
    const double y_obs =
        y_prev + (p.mu - x * x / 2.0) * p.dt + x * std::sqrt(p.dt) * z;

    const auto f = [&](double v) { return likelihood_logdensity(p, v, y_prev, y_obs); };
    const double grad = loglik_gradient(p, x, y_prev, y_obs);
    const double hess = loglik_hessian(p, x, y_prev, y_obs);
    const double grad_fd =
        finite_difference(f, x, 1, 1e-5 * std::max(1.0, std::fabs(x)));
    const double hess_fd =
        finite_difference(f, x, 2, 5e-5 * std::max(0.1, std::fabs(x)));

    std::ostringstream at;
    at << "at x=" << x << " y_prev=" << y_prev << " y_obs=" << y_obs;
    requireCloseAbsOrRel("gradient vs finite difference " + at.str(), grad, grad_fd,
                         1e-6, 1e-4);
    requireCloseAbsOrRel("hessian vs finite difference " + at.str(), hess, hess_fd,
                         1e-6, 1e-4);
  }
  std::cout << "  100 random admissible states checked\n";
  const double secs = seconds_since(t0);
  REQUIRE(secs < 1.0, "took " << secs << "s, limit 1s");
}

// ---------------------------------------------------------------------------
// 3. Every estimator's 20-replication mean at 5000 particles must recover the
//    reference price within 0.5.
void criterionMeansRecoverReferencePrice() {
  const auto t0 = Clock::now();
  const auto& reports = pricing_run_5000();
  REQUIRE(reports.size() == 4, "expected 4 method reports, got " << reports.size());
  for (const auto& rep : reports) {
    std::cout << "  " << std::left << std::setw(12) << method_name(rep.method)
              << " mean " << rep.mean << "  st_dev " << rep.st_dev << "  ("
              << rep.m_s << " replications)\n";
    REQUIRE(rep.m_s == 20, method_name(rep.method) << ": only " << rep.m_s
                                                   << "/20 replications succeeded");
    REQUIRE(std::fabs(rep.mean - kReferencePrice) <= 0.5,
            method_name(rep.method) << " mean " << rep.mean << " misses reference "
                                    << kReferencePrice << " by more than 0.5");
  }
  const double secs = seconds_since(t0);
  REQUIRE(secs < 600.0, "took " << secs << "s, limit 600s");
}

// ---------------------------------------------------------------------------
// 4. Cross-replication variance ordering rw-homotopy < homotopy < pf < mc,
//    each adjacent pair asserted by a one-sided paired variance test at 95%;
//    pairs that fail at 5000 particles are retried at 20000 before the
//    criterion is declared failed.
void criterionVarianceOrdering() {
  const std::array<std::pair<Method, Method>, 3> pairs = {{
      {Method::rw_homotopy, Method::homotopy},
      {Method::homotopy, Method::pf},
      {Method::pf, Method::mc},
  }};

  const auto by_method = [](const std::vector<EstimatorReport>& reports) {
    std::map<Method, const EstimatorReport*> m;
    for (const auto& rep : reports) m[rep.method] = &rep;
    return m;
  };

  const auto small = by_method(pricing_run_5000());
  std::vector<std::string> failing;
  std::map<Method, const EstimatorReport*> large;
  std::vector<EstimatorReport> rerun;

  for (const auto& [lo, hi] : pairs) {
    const auto* a = small.at(lo);
    const auto* b = small.at(hi);
    auto test = paired_variance_less_test(a->estimates, b->estimates, 0.05);
    std::ostringstream line;
    line << method_name(lo) << " < " << method_name(hi) << ": st_dev " << a->st_dev
         << " vs " << b->st_dev << ", t=" << test.t_stat << ", p=" << test.p_value
         << (test.significant ? " (significant)" : " (not significant)");
    if (!test.significant) {
      if (rerun.empty()) rerun = run_experiment(pricing_experiment(20000));
      if (large.empty()) large = by_method(rerun);
      const auto* a2 = large.at(lo);
      const auto* b2 = large.at(hi);
      const auto retry = paired_variance_less_test(a2->estimates, b2->estimates, 0.05);
      line << "; at 20000: st_dev " << a2->st_dev << " vs " << b2->st_dev
           << ", t=" << retry.t_stat << ", p=" << retry.p_value
           << (retry.significant ? " (significant)" : " (not significant)");
      if (!retry.significant)
        failing.push_back(method_name(lo) + " < " + method_name(hi) +
                          " (p=" + std::to_string(retry.p_value) + " at 20000)");
    }
    std::cout << "  " << line.str() << "\n";
  }

  REQUIRE(failing.empty(), [&] {
    std::string msg = "variance ordering not established for ";
    for (std::size_t i = 0; i < failing.size(); ++i)
      msg += (i ? "; " : "") + failing[i];
    return msg;
  }());
}

// ---------------------------------------------------------------------------
// 5. Bootstrap filter invariants: normalized weights, effective-sample-size
//    bounds, exact uniformity after resampling, the bootstrap weight
//    identity, and unbiased systematic resampling.
void criterionFilterInvariants() {
  const auto t0 = Clock::now();
  const SteinSteinParams p = pricing_params(16);
  const SteinSteinModel model{p};
  const std::size_t n = 512;  // power of two: uniform-weight ESS is exact

  const MarketPath path = generate_market_path(p, RandomStream(515, 0));
  FilterConfig fc;
  fc.n_particles = n;
  fc.ess_threshold = 0.5;

  ParticleCloud c = pf_init(model, n);
  RandomStream rng(516, 1);
  double y_prev = path.y[0];
  for (int t = 1; t <= p.n_steps; ++t) {
    pf_step(c, model, y_prev, path.y[t], fc, rng);
    y_prev = path.y[t];

    double stored_sum = 0.0;
    for (double lw : c.logw) stored_sum += std::exp(lw);
    REQUIRE(std::fabs(stored_sum - 1.0) <= 1e-10,
            "step " << t << ": stored weights sum to " << stored_sum);

    const auto w = normalize_log_weights(c.logw);
    double sum = 0.0;
    for (double wi : w) sum += wi;
    REQUIRE(std::fabs(sum - 1.0) <= 1e-10, "step " << t << ": weights sum to " << sum);

    const double ess = effective_sample_size(w);
    REQUIRE(ess >= 1.0 - 1e-12 && ess <= static_cast<double>(n) * (1.0 + 1e-12),
            "step " << t << ": ESS " << ess << " outside [1, " << n << "]");
  }

  // Resampling resets the weights to exact uniformity.
  resample_cloud(c, 0.37);
  const double ess_direct = effective_sample_size(normalize_log_weights(c.logw));
  REQUIRE(ess_direct == static_cast<double>(n),
          "post-resample ESS " << ess_direct << " != " << n);

  // Same via the filter step with the resampling trigger always on.
  {
    FilterConfig always = fc;
    always.ess_threshold = 1.0;
    ParticleCloud c2 = pf_init(model, n);
    RandomStream rng2(517, 2);
    double yp = path.y[0];
    for (int t = 1; t <= 3; ++t) {
      pf_step(c2, model, yp, path.y[t], always, rng2);
      yp = path.y[t];
      const double ess = effective_sample_size(normalize_log_weights(c2.logw));
      REQUIRE(ess == static_cast<double>(n),
              "forced-resample step " << t << ": ESS " << ess << " != " << n);
    }
  }

  // Bootstrap weight identity: from uniform weights, one step must leave the
  // normalized weights proportional to the likelihood at the pre-mutation
  // states (the transition-kernel proposal cancels exactly).
  {
    ParticleCloud c3;
    c3.x = {0.8, 1.0, 1.2};
    const double y0 = std::log(p.s0);
    c3.y.assign(3, y0);
    c3.logw.assign(3, -std::log(3.0));
    c3.t = 0;
    const double y_next = y0 + 0.01;

    std::vector<double> loglik(3);
    for (std::size_t i = 0; i < 3; ++i)
      loglik[i] = model.likelihood_logdensity(c3.x[i], y0, y_next);
    const auto expected = normalize_log_weights(loglik);

    ZeroNoise zn;
    pf_step(c3, model, y0, y_next, fc, zn, /*allow_resample=*/false);
    const auto got = normalize_log_weights(c3.logw);
    for (std::size_t i = 0; i < 3; ++i)
      REQUIRE(std::fabs(got[i] - expected[i]) <= 1e-12,
              "bootstrap weight " << i << ": " << got[i] << " vs likelihood-only "
                                  << expected[i]);
  }

  // Systematic resampling is unbiased: averaged over an even grid of the
  // offset u, each ancestor's replication share matches its weight.
  {
    const std::vector<double> w = {0.05, 0.2, 0.3, 0.45};
    const std::size_t n_out = 40;
    const std::size_t n_grid = 1000;
    std::array<long, 4> counts{};
    for (std::size_t k = 0; k < n_grid; ++k) {
      const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(n_grid);
      for (std::size_t idx : systematic_resample(w, u, n_out)) ++counts[idx];
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double share =
          static_cast<double>(counts[j]) / static_cast<double>(n_grid * n_out);
      REQUIRE(std::fabs(share - w[j]) <= 1.0 / static_cast<double>(n_grid),
              "ancestor " << j << ": share " << share << " vs weight " << w[j]);
    }
  }

  std::cout << "  " << p.n_steps << " filter steps, forced resamples, weight "
            << "identity and u-grid resampling checked with n=" << n << "\n";
  const double secs = seconds_since(t0);
  REQUIRE(secs < 5.0, "took " << secs << "s, limit 5s");
}

// ---------------------------------------------------------------------------
// 6. Report statistics: the bias/spread decomposition closes, the figure of
//    merit is bit-exact and recomputable after serialization, and absolute
//    statistics scale with the prices while relative ones do not.
void criterionReportIdentities() {
  RandomStream rng(606, 0);
  for (int k = 0; k < 50; ++k) {
    const std::size_t m = 2 + static_cast<std::size_t>(rng.next_u64() % 39);
    std::vector<double> estimates(m);
    for (auto& e : estimates) e = 5.0 + 20.0 * rng.uniform();
    const double reference = 8.0 + 12.0 * rng.uniform();
    const double cpu = 0.1 + 9.9 * rng.uniform();

    const EstimatorReport rep = compute_report(estimates, reference, cpu);
    const double frac = static_cast<double>(m - 1) / static_cast<double>(m);
    const double radicand = rep.rmse * rep.rmse - frac * rep.st_dev * rep.st_dev;
    REQUIRE(std::fabs(rep.bias * rep.bias - std::max(0.0, radicand)) <= 1e-10,
            "bias decomposition off: bias^2=" << rep.bias * rep.bias
                                              << " radicand=" << radicand);
    if (radicand >= 0.0) {
      const double recomposed = rep.bias * rep.bias + frac * rep.st_dev * rep.st_dev;
      REQUIRE(std::fabs(rep.rmse * rep.rmse - recomposed) <= 1e-10,
              "rmse^2=" << rep.rmse * rep.rmse << " != bias^2 + (m-1)/m st_dev^2 = "
                        << recomposed);
    } else {
      REQUIRE(rep.bias == 0.0 && rep.noisy_bias,
              "negative radicand must clamp bias to 0 and set noisy_bias");
    }

    REQUIRE(rep.fom == 1.0 / (rep.rel_error * rep.rel_error * rep.cpu_seconds),
            "fom " << rep.fom << " is not bit-exactly 1/(rel_error^2 cpu)");

    const EstimatorReport back = report_from_csv_row(report_csv_row(rep));
    REQUIRE(back.fom == rep.fom && back.rel_error == rep.rel_error &&
                back.cpu_seconds == rep.cpu_seconds,
            "CSV round-trip changed fom/rel_error/cpu_seconds");
    REQUIRE(back.fom == 1.0 / (back.rel_error * back.rel_error * back.cpu_seconds),
            "fom not recomputable from the serialized row");

    // Doubling every price and the reference is exact in binary floating
    // point: absolute statistics double bitwise, relative ones are unchanged.
    std::vector<double> doubled(estimates);
    for (auto& e : doubled) e *= 2.0;
    const EstimatorReport rep2 = compute_report(doubled, 2.0 * reference, cpu);
    REQUIRE(rep2.mean == 2.0 * rep.mean && rep2.st_dev == 2.0 * rep.st_dev &&
                rep2.rmse == 2.0 * rep.rmse && rep2.bias == 2.0 * rep.bias,
            "absolute statistics must scale exactly with the prices");
    REQUIRE(rep2.rrmse == rep.rrmse && rep2.rrmse_ref == rep.rrmse_ref &&
                rep2.rel_error == rep.rel_error && rep2.fom == rep.fom &&
                rep2.noisy_bias == rep.noisy_bias,
            "relative statistics must be invariant under scaling");
  }
  std::cout << "  50 random reports: decomposition, bit-exact fom, CSV "
            << "recompute, dyadic scale invariance\n";
}

// ---------------------------------------------------------------------------
// 7. With the prior curvature frozen, the explicit Euler flow is first-order:
//    halving the pseudo-time step halves the mean error against the
//    conjugate-Gaussian posterior.
void criterionTransportConvergence() {
  const SingleUpdateModel model;
  RandomStream rng(71, 0);
  ParticleCloud base = pf_init(model, 4096);
  mutate_cloud(base, model, rng);

  const double prior_mean = sample_mean(base.x);
  const double prior_var = sample_covariance(base.x);
  const double y_obs = 1.3;
  const auto oracle = kalman_update(prior_mean, prior_var, y_obs, model.obs_var);

  const std::array<int, 4> levels = {16, 32, 64, 128};
  std::array<double, 4> errs{};
  for (std::size_t i = 0; i < levels.size(); ++i) {
    ParticleCloud c = base;
    transport_cloud(c, model, 0.0, y_obs, make_uniform_schedule(levels[i]),
                    /*refresh_covariance=*/false);
    errs[i] = std::fabs(sample_mean(c.x) - oracle.mean);
  }

  std::cout << "  mean errors";
  for (std::size_t i = 0; i < levels.size(); ++i)
    std::cout << "  K=" << levels[i] << ": " << errs[i];
  std::cout << "\n";
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
    REQUIRE(errs[i + 1] > 0.0, "error vanished at K=" << levels[i + 1]
                                                      << "; ratio undefined");
    const double ratio = errs[i] / errs[i + 1];
    REQUIRE(ratio >= 1.5 && ratio <= 2.5,
            "error ratio K=" << levels[i] << "/K=" << levels[i + 1] << " is " << ratio
                             << ", outside [1.5, 2.5]");
  }
}

// ---------------------------------------------------------------------------
// 8. The whole pipeline is deterministic in (config, seed) for any thread
//    count, and reports survive the CSV round-trip bit-for-bit.
void criterionDeterminismAndRoundTrip() {
  ExperimentConfig cfg;
  cfg.params = pricing_params(8);
  cfg.methods = {Method::mc, Method::pf, Method::homotopy, Method::rw_homotopy};
  cfg.n_particles = 64;
  cfg.n_replications = 3;
  cfg.seed = 2024;
  cfg.lambda_steps = 4;
  cfg.lambda_spacing = LambdaSpacing::uniform;
  cfg.ess_threshold = 0.5;
  cfg.reference_price = kReferencePrice;
  cfg.threads = 1;

  const auto first = run_experiment(cfg);
  const auto second = run_experiment(cfg);
  cfg.threads = 3;
  const auto threaded = run_experiment(cfg);

  REQUIRE(first.size() == second.size() && first.size() == threaded.size(),
          "report counts differ across reruns");
  for (std::size_t i = 0; i < first.size(); ++i) {
    for (const auto* other : {&second[i], &threaded[i]}) {
      REQUIRE(other->method == first[i].method, "method order changed");
      REQUIRE(other->estimates == first[i].estimates,
              method_name(first[i].method)
                  << ": estimates not bit-identical across reruns");
      REQUIRE(other->mean == first[i].mean && other->st_dev == first[i].st_dev,
              method_name(first[i].method) << ": statistics differ across reruns");
    }

    const EstimatorReport back = report_from_csv_row(report_csv_row(first[i]));
    REQUIRE(back.method == first[i].method && back.n_particles == first[i].n_particles &&
                back.n_steps == first[i].n_steps && back.m_s == first[i].m_s &&
                back.seed == first[i].seed,
            method_name(first[i].method) << ": CSV identity fields changed");
    REQUIRE(back.mean == first[i].mean && back.st_dev == first[i].st_dev &&
                back.rmse == first[i].rmse && back.bias == first[i].bias &&
                back.rrmse == first[i].rrmse && back.rel_error == first[i].rel_error &&
                back.cpu_seconds == first[i].cpu_seconds && back.fom == first[i].fom,
            method_name(first[i].method) << ": CSV numeric fields changed");
  }
  std::cout << "  3 runs (1 and 3 threads) bit-identical; " << first.size()
            << " reports round-tripped\n";
}

struct Criterion {
  const char* name;
  void (*fn)();
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"1: homotopy transport matches the Kalman posterior",
       &criterionTransportMatchesKalman},
      {"2: likelihood derivatives match finite differences",
       &criterionDerivativesMatchFiniteDifferences},
      {"3: estimator means recover the reference price",
       &criterionMeansRecoverReferencePrice},
      {"4: variance ordering rw-homotopy < homotopy < pf < mc",
       &criterionVarianceOrdering},
      {"5: particle-filter weight and resampling invariants",
       &criterionFilterInvariants},
      {"6: report statistics identities and scale consistency",
       &criterionReportIdentities},
      {"7: first-order convergence of the transport flow",
       &criterionTransportConvergence},
      {"8: determinism across reruns and thread counts",
       &criterionDeterminismAndRoundTrip},
  };

  int failures = 0;
  for (const auto& crit : criteria) {
    const auto t0 = Clock::now();
    try {
      crit.fn();
      std::cout << "[PASS] criterion " << crit.name << " (" << std::fixed
                << std::setprecision(2) << seconds_since(t0) << "s)\n"
                << std::defaultfloat << std::setprecision(6);
    } catch (const std::exception& e) {
      std::cout << "[FAIL] criterion " << crit.name << ": " << e.what() << "\n";
      ++failures;
    }
  }

  if (failures > 0) {
    std::cout << failures << " of " << std::size(criteria) << " criteria failed\n";
    return 1;
  }
  std::cout << "all " << std::size(criteria) << " criteria passed\n";
  return 0;
}
