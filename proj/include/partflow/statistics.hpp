#pragma once

#include <span>

namespace partflow {

// Regularized incomplete beta function I_x(a, b), evaluated with a Lentz
// continued fraction.
double incomplete_beta(double a, double b, double x);

// CDF and quantile of Student's t distribution with dof degrees of freedom.
double student_t_cdf(double t, double dof);
double student_t_quantile(double p, double dof);

struct PairedVarianceTest {
  double t_stat;
  double dof;
  double p_value;    // P(T <= t_stat) under equal variances
  bool significant;  // p_value < alpha
};

// One-sided Pitman-Morgan test of H1: var(x) < var(y) on paired samples.
// Uses the correlation of (x+y, x-y), whose covariance equals
// var(x) - var(y).  A component shared by both members of a pair drops out
// of the difference, so it cannot bias the sign of the comparison, but it
// still widens var(x+y) and costs power.
PairedVarianceTest paired_variance_less_test(std::span<const double> x,
                                             std::span<const double> y,
                                             double alpha = 0.05);

}  // namespace partflow
