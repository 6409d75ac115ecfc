#include "partflow/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "partflow/errors.hpp"

namespace partflow {

double gaussian_logpdf(double x, double mean, double var) {
  if (!(var > 0.0)) throw NumericError("gaussian_logpdf: variance must be positive");
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - d * d / (2.0 * var);
}

std::vector<double> normalize_weights(std::span<const double> w) {
  if (w.empty()) throw DegenerateWeightsError("normalize_weights: empty weight vector");
  double sum = 0.0;
  for (double v : w) {
    if (!std::isfinite(v)) throw NumericError("normalize_weights: non-finite weight");
    if (v < 0.0) throw NumericError("normalize_weights: negative weight");
    sum += v;
  }
  if (sum <= 0.0) throw DegenerateWeightsError("normalize_weights: all weights are zero");
  std::vector<double> out(w.begin(), w.end());
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> normalize_log_weights(std::span<const double> logw) {
  if (logw.empty()) throw DegenerateWeightsError("normalize_log_weights: empty weight vector");
  double max_lw = -std::numeric_limits<double>::infinity();
  for (double v : logw) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw NumericError("normalize_log_weights: NaN/+inf log-weight");
    max_lw = std::max(max_lw, v);
  }
  if (max_lw == -std::numeric_limits<double>::infinity())
    throw DegenerateWeightsError("normalize_log_weights: all weights are zero");
  std::vector<double> out(logw.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    out[i] = std::exp(logw[i] - max_lw);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double effective_sample_size(std::span<const double> w) {
  double sq = 0.0;
  for (double v : w) sq += v * v;
  if (!(sq > 0.0)) throw DegenerateWeightsError("effective_sample_size: zero weights");
  return 1.0 / sq;
}

std::vector<std::size_t> systematic_resample(std::span<const double> w, double u,
                                             std::size_t n_out) {
  if (w.empty()) throw DegenerateWeightsError("systematic_resample: empty weights");
  if (!(u >= 0.0 && u < 1.0))
    throw std::invalid_argument("systematic_resample: u must lie in [0, 1)");
  double total = 0.0;
  for (double v : w) total += v;
  if (std::fabs(total - 1.0) > 1e-6)
    throw std::invalid_argument("systematic_resample: weights must be normalized");

  std::vector<std::size_t> idx(n_out);
  std::size_t i = 0;
  double cum = w[0];
  for (std::size_t j = 0; j < n_out; ++j) {
    const double p = (static_cast<double>(j) + u) / static_cast<double>(n_out);
    while (p >= cum && i + 1 < w.size()) {
      ++i;
      cum += w[i];
    }
    idx[j] = i;
  }
  return idx;
}

double sample_mean(std::span<const double> xs) {
  if (xs.empty()) throw InsufficientDataError("sample_mean: empty sample");
  double s = 0.0;
  for (double v : xs) s += v;
  return s / static_cast<double>(xs.size());
}

double weighted_mean(std::span<const double> xs, std::span<const double> w) {
  if (xs.size() != w.size())
    throw std::invalid_argument("weighted_mean: size mismatch");
  if (xs.empty()) throw InsufficientDataError("weighted_mean: empty sample");
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += w[i] * xs[i];
  return s;
}

double sample_covariance(std::span<const double> xs) {
  if (xs.size() < 2) throw InsufficientDataError("sample_covariance: need at least 2 points");
  const double mean = sample_mean(xs);
  double s = 0.0;
  for (double v : xs) {
    const double d = v - mean;
    s += d * d;
  }
  return s / static_cast<double>(xs.size() - 1);
}

double sample_covariance(std::span<const double> xs, std::span<const double> w) {
  if (xs.size() != w.size())
    throw std::invalid_argument("sample_covariance: size mismatch");
  if (xs.size() < 2) throw InsufficientDataError("sample_covariance: need at least 2 points");
  const double mean = weighted_mean(xs, w);
  double s = 0.0;
  double wsq = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - mean;
    s += w[i] * d * d;
    wsq += w[i] * w[i];
  }
  const double denom = 1.0 - wsq;
  if (denom <= 1e-12) return 0.0;  // point-mass weights: no measurable spread
  return s / denom;
}

double finite_difference(const std::function<double(double)>& fn, double x, int order,
                         double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_difference: step must be positive");
  auto eval = [&](double at) {
    const double v = fn(at);
    if (!std::isfinite(v)) throw NumericError("finite_difference: non-finite evaluation");
    return v;
  };
  if (order == 1) return (eval(x + step) - eval(x - step)) / (2.0 * step);
  if (order == 2) return (eval(x + step) - 2.0 * eval(x) + eval(x - step)) / (step * step);
  throw std::invalid_argument("finite_difference: order must be 1 or 2");
}

}  // namespace partflow
