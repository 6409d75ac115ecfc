#include "partflow/homotopy.hpp"

#include <cmath>

#include "partflow/errors.hpp"

namespace partflow {

HomotopySchedule make_uniform_schedule(int n_lambda) {
  if (n_lambda < 1) throw ConfigError("schedule: need at least 1 lambda step");
  HomotopySchedule s;
  s.spacing = LambdaSpacing::uniform;
  s.grid.resize(n_lambda + 1);
  for (int k = 0; k <= n_lambda; ++k)
    s.grid[k] = static_cast<double>(k) / static_cast<double>(n_lambda);
  s.grid.front() = 0.0;
  s.grid.back() = 1.0;
  return s;
}

HomotopySchedule make_geometric_schedule(int n_lambda, double ratio) {
  if (n_lambda < 1) throw ConfigError("schedule: need at least 1 lambda step");
  if (!(ratio > 1.0)) throw ConfigError("schedule: geometric ratio must exceed 1");
  HomotopySchedule s;
  s.spacing = LambdaSpacing::geometric;
  s.grid.resize(n_lambda + 1);
  // Increments d, d*ratio, ..., d*ratio^(K-1) summing to 1.
  const double d = (ratio - 1.0) / (std::pow(ratio, n_lambda) - 1.0);
  double cur = 0.0, inc = d;
  for (int k = 0; k < n_lambda; ++k) {
    s.grid[k] = cur;
    cur += inc;
    inc *= ratio;
  }
  s.grid[0] = 0.0;
  s.grid[n_lambda] = 1.0;
  return s;
}

void validate_schedule(const HomotopySchedule& sched) {
  if (sched.grid.size() < 2) throw ConfigError("schedule: grid needs at least 2 points");
  if (sched.grid.front() != 0.0 || sched.grid.back() != 1.0)
    throw ConfigError("schedule: endpoints must be exactly 0 and 1");
  for (std::size_t k = 1; k < sched.grid.size(); ++k)
    if (!(sched.grid[k] > sched.grid[k - 1]))
      throw ConfigError("schedule: grid must be strictly increasing");
}

double prior_hessian_estimate(std::span<const double> positions) {
  const double s = sample_covariance(positions);
  return -1.0 / (s > kCovarianceFloor ? s : kCovarianceFloor);
}

double prior_hessian_estimate(std::span<const double> positions,
                              std::span<const double> weights) {
  const double s = sample_covariance(positions, weights);
  return -1.0 / (s > kCovarianceFloor ? s : kCovarianceFloor);
}

double flow_velocity(double lambda, double prior_hessian, double grad_L, double hess_L) {
  const double denom = prior_hessian + lambda * hess_L;
  if (std::fabs(denom) <= kSingularHessianTol)
    throw SingularHessianError("flow_velocity: combined curvature is singular");
  return -grad_L / denom;
}

}  // namespace partflow
