#include "partflow/stein_stein.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"
#include "partflow/errors.hpp"
#include "partflow/numerics.hpp"

namespace partflow {

SteinSteinParams validate_params(SteinSteinParams p) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid model parameters: ") + what);
  };
  require(std::isfinite(p.mu) && std::isfinite(p.kappa) && std::isfinite(p.theta) &&
              std::isfinite(p.sigma) && std::isfinite(p.r) && std::isfinite(p.s0) &&
              std::isfinite(p.strike) && std::isfinite(p.maturity) && std::isfinite(p.v0) &&
              std::isfinite(p.dividend),
          "all fields must be finite");
  require(p.sigma > 0.0, "sigma must be positive");
  require(p.strike > 0.0, "strike must be positive");
  require(p.s0 > 0.0, "s0 must be positive");
  require(p.maturity > 0.0, "maturity must be positive");
  require(p.n_steps >= 1, "n_steps must be at least 1");
  p.dt = p.maturity / static_cast<double>(p.n_steps);
  require(p.dt > 0.0, "dt must be positive");
  return p;
}

SteinSteinParams parse_params(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model parameters: JSON parse failure: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("model parameters: expected a JSON object");

  static const std::set<std::string> known = {"mu",     "kappa",    "theta", "sigma",
                                              "r",      "s0",       "strike", "maturity",
                                              "v0",     "dividend", "n_steps"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key()))
      throw ConfigError("model parameters: unknown key '" + item.key() + "'");
  }
  for (const auto& key : known) {
    if (!j.contains(key))
      throw ConfigError("model parameters: missing key '" + key + "'");
  }

  auto num = [&](const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError(std::string("model parameters: '") + key +
                                          "' must be a number");
    return v.get<double>();
  };

  SteinSteinParams p;
  p.mu = num("mu");
  p.kappa = num("kappa");
  p.theta = num("theta");
  p.sigma = num("sigma");
  p.r = num("r");
  p.s0 = num("s0");
  p.strike = num("strike");
  p.maturity = num("maturity");
  p.v0 = num("v0");
  p.dividend = num("dividend");
  const auto& steps = j.at("n_steps");
  if (!steps.is_number_integer())
    throw ConfigError("model parameters: 'n_steps' must be an integer");
  p.n_steps = steps.get<int>();
  return validate_params(p);
}

SteinSteinParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open parameter file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_params(buf.str());
}

StatePoint euler_step(const SteinSteinParams& p, StatePoint prev, double eps,
                      double eta) noexcept {
  const double sqrt_dt = std::sqrt(p.dt);
  StatePoint next;
  next.y = prev.y + (p.mu - 0.5 * prev.x * prev.x) * p.dt + prev.x * sqrt_dt * eps;
  next.x = prev.x + p.kappa * (p.theta - prev.x) * p.dt + p.sigma * sqrt_dt * eta;
  return next;
}

double transition_logdensity(const SteinSteinParams& p, double x_prev, double x_next) {
  const double mean = x_prev + p.kappa * (p.theta - x_prev) * p.dt;
  const double var = p.sigma * p.sigma * p.dt;
  return gaussian_logpdf(x_next, mean, var);
}

double likelihood_logdensity(const SteinSteinParams& p, double x_prev, double y_prev,
                             double y_obs) {
  const double m = y_prev + (p.mu - 0.5 * x_prev * x_prev) * p.dt;
  if (std::fabs(x_prev) < kDegenerateVolatility)
    return (y_obs == m) ? kLogDensityCeil : kLogDensityFloor;
  const double var = x_prev * x_prev * p.dt;
  const double e = y_obs - m;
  const double ll =
      -0.5 * std::log(2.0 * std::numbers::pi * var) - e * e / (2.0 * var);
  return std::max(ll, kLogDensityFloor);
}

double loglik_gradient(const SteinSteinParams& p, double x_prev, double y_prev,
                       double y_obs) {
  if (std::fabs(x_prev) < kDegenerateVolatility)
    throw DegenerateVolatilityError("loglik_gradient: volatility too close to zero");
  const double x = x_prev;
  const double m = y_prev + (p.mu - 0.5 * x * x) * p.dt;
  const double e = y_obs - m;
  return -e / x + e * e / (x * x * x * p.dt) - 1.0 / x;
}

double loglik_hessian(const SteinSteinParams& p, double x_prev, double y_prev,
                      double y_obs) {
  if (std::fabs(x_prev) < kDegenerateVolatility)
    throw DegenerateVolatilityError("loglik_hessian: volatility too close to zero");
  const double x = x_prev;
  const double x2 = x * x;
  const double m = y_prev + (p.mu - 0.5 * x2) * p.dt;
  const double e = y_obs - m;
  return 1.0 / x2 - p.dt + 3.0 * e / x2 - 3.0 * e * e / (x2 * x2 * p.dt);
}

}  // namespace partflow
