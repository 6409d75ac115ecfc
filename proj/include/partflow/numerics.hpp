#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace partflow {

// Log-density of N(mean, var) at x; var must be positive.
double gaussian_logpdf(double x, double mean, double var);

// Normalize nonnegative weights so they sum to one.
// Throws DegenerateWeightsError on an all-zero vector and NumericError on
// NaN/inf entries or negative entries.
std::vector<double> normalize_weights(std::span<const double> w);

// Normalize log-weights into probabilities using max-subtraction so that
// arbitrarily small log-weights never underflow the whole vector.
// -inf entries are admitted (zero weight); an all--inf vector is degenerate.
std::vector<double> normalize_log_weights(std::span<const double> logw);

// 1 / sum w_i^2 for a normalized weight vector; lies in [1, n].
double effective_sample_size(std::span<const double> w);

// Systematic resampling: walks the cumulative weights with the n_out evenly
// spaced points (j + u) / n_out, j = 0..n_out-1, so a single uniform draw u
// determines every ancestor index.  Expected replication count of particle i
// is n_out * w_i.
std::vector<std::size_t> systematic_resample(std::span<const double> w, double u,
                                             std::size_t n_out);

double sample_mean(std::span<const double> xs);
double weighted_mean(std::span<const double> xs, std::span<const double> w);

// Unbiased sample variance (divisor n-1).  The weighted overload expects
// normalized weights and applies the reliability-weights correction
// 1 / (1 - sum w_i^2); it returns 0 for a point-mass weight vector.
double sample_covariance(std::span<const double> xs);
double sample_covariance(std::span<const double> xs, std::span<const double> w);

// Central finite difference of first or second order with the given step.
// Throws NumericError if fn evaluates to a non-finite value.
double finite_difference(const std::function<double(double)>& fn, double x, int order,
                         double step);

}  // namespace partflow
