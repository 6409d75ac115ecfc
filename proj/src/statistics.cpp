#include "partflow/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "partflow/errors.hpp"

namespace partflow {

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-15;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double f = d;
  for (int m = 1; m <= 500; ++m) {
    const double m2 = 2.0 * m;
    double num = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    f *= d * c;
    num = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::fabs(delta - 1.0) < eps) break;
  }
  return f;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("incomplete_beta: a, b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  // Use the symmetric continuation where the fraction converges fastest.
  if (x < (a + 1.0) / (a + b + 2.0))
    return std::exp(ln_front) * beta_continued_fraction(a, b, x) / a;
  return 1.0 - std::exp(ln_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("student_t_cdf: dof must be positive");
  if (t == 0.0) return 0.5;
  if (std::isinf(t)) return t > 0.0 ? 1.0 : 0.0;
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("student_t_quantile: dof must be positive");
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("student_t_quantile: p must lie in (0, 1)");
  double lo = -1e8;
  double hi = 1e8;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::fabs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, dof) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

PairedVarianceTest paired_variance_less_test(std::span<const double> x,
                                             std::span<const double> y, double alpha) {
  if (x.size() != y.size())
    throw std::invalid_argument("paired_variance_less_test: size mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw InsufficientDataError("paired_variance_less_test: need at least 3 pairs");

  double ms = 0.0, md = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ms += x[i] + y[i];
    md += x[i] - y[i];
  }
  ms /= static_cast<double>(n);
  md /= static_cast<double>(n);

  double css = 0.0, cdd = 0.0, csd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ds = (x[i] + y[i]) - ms;
    const double dd = (x[i] - y[i]) - md;
    css += ds * ds;
    cdd += dd * dd;
    csd += ds * dd;
  }

  PairedVarianceTest out{};
  out.dof = static_cast<double>(n - 2);
  if (css <= 0.0 || cdd <= 0.0) {
    // Degenerate pairing (e.g. identical samples): no evidence either way.
    out.t_stat = 0.0;
    out.p_value = 0.5;
    out.significant = false;
    return out;
  }
  double r = csd / std::sqrt(css * cdd);
  r = std::clamp(r, -1.0, 1.0);
  if (std::fabs(r) == 1.0) {
    out.t_stat = std::copysign(std::numeric_limits<double>::infinity(), r);
    out.p_value = r > 0.0 ? 1.0 : 0.0;
  } else {
    out.t_stat = r * std::sqrt(out.dof / (1.0 - r * r));
    out.p_value = student_t_cdf(out.t_stat, out.dof);
  }
  out.significant = out.p_value < alpha;
  return out;
}

}  // namespace partflow
