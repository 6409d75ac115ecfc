#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "partflow/stein_stein.hpp"

namespace partflow {

enum class Method { mc, pf, homotopy, rw_homotopy };

// Canonical names: "mc", "pf", "homotopy", "rw-homotopy".
std::string method_name(Method m);
Method method_from_name(const std::string& name);  // throws ConfigError

// e^{-r T} max(exp(y_terminal) - K, 0).
double discounted_call_payoff(const SteinSteinParams& p, double y_terminal);

// Cross-replication error and efficiency statistics for one method.
//
// Conventions: st_dev uses divisor M_s - 1, rmse (against the reference
// price) uses divisor M_s, and bias comes from the exact decomposition
//   bias^2 = max(0, rmse^2 - ((M_s - 1) / M_s) st_dev^2),
// which keeps rmse^2 = bias^2 + ((M_s-1)/M_s) st_dev^2 as an identity.
// noisy_bias marks estimates whose bias is statistically indistinguishable
// from zero (rmse < st_dev, or a negative radicand clamped to zero).
// rrmse divides by the mean estimate; rrmse_ref divides by the reference.
// fom = 1 / (rel_error^2 * cpu_seconds), +inf when rel_error is zero.
struct EstimatorReport {
  Method method = Method::mc;
  std::size_t n_particles = 0;
  int n_steps = 0;
  std::size_t m_s = 0;
  double reference_price = 0.0;
  double mean = 0.0;
  double st_dev = 0.0;
  double rmse = 0.0;
  double bias = 0.0;
  double rrmse = 0.0;
  double rrmse_ref = 0.0;
  double rel_error = 0.0;  // st_dev / mean
  double cpu_seconds = 0.0;
  double fom = 0.0;
  std::uint64_t seed = 0;
  bool noisy_bias = false;
  bool fom_infinite = false;
  std::vector<double> estimates;
  std::vector<std::string> errors;  // per-replication failures, if any
  long long transport_regularized = 0;
  long long transport_frozen = 0;
  long long transport_clamped = 0;
};

// Fills the statistical fields from the replication estimates; identity
// fields (method, particle counts, seed) are the caller's to set.
EstimatorReport compute_report(std::span<const double> estimates, double reference,
                               double cpu_seconds);

// CSV serialization.  Doubles are printed with %.17g so rows round-trip
// bit-for-bit; an infinite fom serializes as "inf".
std::string report_csv_header();
std::string report_csv_row(const EstimatorReport& rep);
EstimatorReport report_from_csv_row(const std::string& row);

// Single-line JSON record carrying the CSV fields and the flags above;
// rrmse_ref is included only when it differs from rrmse by more than 0.1%.
std::string report_json_record(const EstimatorReport& rep);

}  // namespace partflow
