#include "partflow/pricing.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "partflow/errors.hpp"

namespace partflow {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, const char* what) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str()) throw ConfigError(std::string("CSV row: unparsable ") + what);
  return v;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::mc: return "mc";
    case Method::pf: return "pf";
    case Method::homotopy: return "homotopy";
    case Method::rw_homotopy: return "rw-homotopy";
  }
  throw ConfigError("method_name: unknown method enum");
}

Method method_from_name(const std::string& name) {
  if (name == "mc") return Method::mc;
  if (name == "pf") return Method::pf;
  if (name == "homotopy") return Method::homotopy;
  if (name == "rw-homotopy") return Method::rw_homotopy;
  throw ConfigError("unknown method '" + name +
                    "' (expected mc, pf, homotopy or rw-homotopy)");
}

double discounted_call_payoff(const SteinSteinParams& p, double y_terminal) {
  if (!std::isfinite(y_terminal))
    throw NumericError("discounted_call_payoff: non-finite terminal log-price");
  const double intrinsic = std::exp(y_terminal) - p.strike;
  return std::exp(-p.r * p.maturity) * (intrinsic > 0.0 ? intrinsic : 0.0);
}

EstimatorReport compute_report(std::span<const double> estimates, double reference,
                               double cpu_seconds) {
  const std::size_t m = estimates.size();
  if (m < 2) throw InsufficientDataError("compute_report: need at least 2 replications");
  if (!(cpu_seconds > 0.0))
    throw std::invalid_argument("compute_report: cpu_seconds must be positive");

  EstimatorReport rep;
  rep.m_s = m;
  rep.reference_price = reference;
  rep.cpu_seconds = cpu_seconds;
  rep.estimates.assign(estimates.begin(), estimates.end());

  double sum = 0.0;
  for (double v : estimates) sum += v;
  rep.mean = sum / static_cast<double>(m);

  double ss_dev = 0.0, ss_err = 0.0;
  for (double v : estimates) {
    const double d = v - rep.mean;
    const double e = v - reference;
    ss_dev += d * d;
    ss_err += e * e;
  }
  rep.st_dev = std::sqrt(ss_dev / static_cast<double>(m - 1));
  rep.rmse = std::sqrt(ss_err / static_cast<double>(m));

  const double frac = static_cast<double>(m - 1) / static_cast<double>(m);
  const double radicand = rep.rmse * rep.rmse - frac * rep.st_dev * rep.st_dev;
  rep.bias = std::sqrt(radicand > 0.0 ? radicand : 0.0);
  rep.noisy_bias = (rep.rmse < rep.st_dev) || (radicand < 0.0);

  rep.rrmse = rep.rmse / rep.mean;
  rep.rrmse_ref = rep.rmse / reference;
  rep.rel_error = rep.st_dev / rep.mean;
  if (rep.rel_error == 0.0) {
    rep.fom = std::numeric_limits<double>::infinity();
    rep.fom_infinite = true;
  } else {
    rep.fom = 1.0 / (rep.rel_error * rep.rel_error * rep.cpu_seconds);
    rep.fom_infinite = !std::isfinite(rep.fom);
  }
  return rep;
}

std::string report_csv_header() {
  return "method,n_particles,n_steps,m_s,mean,st_dev,rmse,bias,rrmse,rel_error,"
         "cpu_seconds,fom,seed";
}

std::string report_csv_row(const EstimatorReport& rep) {
  std::ostringstream out;
  out << method_name(rep.method) << ',' << rep.n_particles << ',' << rep.n_steps << ','
      << rep.m_s << ',' << fmt17(rep.mean) << ',' << fmt17(rep.st_dev) << ','
      << fmt17(rep.rmse) << ',' << fmt17(rep.bias) << ',' << fmt17(rep.rrmse) << ','
      << fmt17(rep.rel_error) << ',' << fmt17(rep.cpu_seconds) << ',' << fmt17(rep.fom)
      << ',' << rep.seed;
  return out.str();
}

EstimatorReport report_from_csv_row(const std::string& row) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : row) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  if (fields.size() != 13)
    throw ConfigError("CSV row: expected 13 fields, got " + std::to_string(fields.size()));

  EstimatorReport rep;
  rep.method = method_from_name(fields[0]);
  rep.n_particles = static_cast<std::size_t>(std::stoull(fields[1]));
  rep.n_steps = std::stoi(fields[2]);
  rep.m_s = static_cast<std::size_t>(std::stoull(fields[3]));
  rep.mean = parse_double(fields[4], "mean");
  rep.st_dev = parse_double(fields[5], "st_dev");
  rep.rmse = parse_double(fields[6], "rmse");
  rep.bias = parse_double(fields[7], "bias");
  rep.rrmse = parse_double(fields[8], "rrmse");
  rep.rel_error = parse_double(fields[9], "rel_error");
  rep.cpu_seconds = parse_double(fields[10], "cpu_seconds");
  rep.fom = parse_double(fields[11], "fom");
  rep.seed = std::stoull(fields[12]);
  rep.fom_infinite = std::isinf(rep.fom);
  return rep;
}

std::string report_json_record(const EstimatorReport& rep) {
  nlohmann::json j;
  j["method"] = method_name(rep.method);
  j["n_particles"] = rep.n_particles;
  j["n_steps"] = rep.n_steps;
  j["m_s"] = rep.m_s;
  j["mean"] = rep.mean;
  j["st_dev"] = rep.st_dev;
  j["rmse"] = rep.rmse;
  j["bias"] = rep.bias;
  j["rrmse"] = rep.rrmse;
  j["rel_error"] = rep.rel_error;
  j["cpu_seconds"] = rep.cpu_seconds;
  if (rep.fom_infinite)
    j["fom"] = "inf";
  else
    j["fom"] = rep.fom;
  j["seed"] = rep.seed;
  j["reference_price"] = rep.reference_price;
  if (rep.rrmse_ref != 0.0 &&
      std::fabs(rep.rrmse / rep.rrmse_ref - 1.0) > 1e-3)
    j["rrmse_ref"] = rep.rrmse_ref;
  if (rep.noisy_bias) j["noisy_bias"] = true;
  if (!rep.estimates.empty()) j["estimates"] = rep.estimates;
  if (!rep.errors.empty()) j["errors"] = rep.errors;
  if (rep.transport_regularized || rep.transport_frozen || rep.transport_clamped) {
    j["transport_diagnostics"] = {{"regularized", rep.transport_regularized},
                                  {"frozen", rep.transport_frozen},
                                  {"clamped", rep.transport_clamped}};
  }
  return j.dump();
}

}  // namespace partflow
