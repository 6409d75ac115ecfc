#include "partflow/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace partflow {

namespace {

// Stream-id layout under the experiment root stream: a tag byte in the top
// bits separates the market-path streams from the estimator streams, the
// method index sits above the replication index.
constexpr std::uint64_t kPathStreamTag = 0x11ull << 56;
constexpr std::uint64_t kEstimatorStreamTag = 0x22ull << 56;

std::uint64_t path_stream_key(std::size_t replication) {
  return kPathStreamTag | static_cast<std::uint64_t>(replication);
}

std::uint64_t estimator_stream_key(Method m, std::size_t replication) {
  return kEstimatorStreamTag | (static_cast<std::uint64_t>(m) << 40) |
         static_cast<std::uint64_t>(replication);
}

// Outcome of one (method, replication) pricing call.
struct RepResult {
  double estimate = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string error;
  double seconds = 0.0;
  TransportDiagnostics diag;
  std::vector<double> vol_trace;
};

RepResult run_one(const ExperimentConfig& cfg, const HomotopySchedule& sched, Method m,
                  std::size_t replication, const MarketPath& path,
                  const RandomStream& root, bool want_trace) {
  RepResult out;
  const RandomStream rng = root.substream(estimator_stream_key(m, replication));
  const std::span<const double> y_obs(path.y.data() + 1, path.y.size() - 1);

  FilterConfig fc;
  fc.n_particles = cfg.n_particles;
  fc.ess_threshold = cfg.ess_threshold;
  fc.maturity_weights = cfg.pf_maturity_weights;
  std::vector<double>* trace = want_trace ? &out.vol_trace : nullptr;

  const auto t0 = std::chrono::steady_clock::now();
  try {
    switch (m) {
      case Method::mc:
        out.estimate = mc_price(cfg.params, cfg.n_particles, rng, trace);
        break;
      case Method::pf:
        out.estimate = pf_price(cfg.params, fc, y_obs, rng, trace);
        break;
      case Method::homotopy:
        out.estimate = homotopy_price(cfg.params, fc, y_obs, sched, rng,
                                      !cfg.freeze_covariance, trace, &out.diag);
        break;
      case Method::rw_homotopy:
        out.estimate = rw_price(cfg.params, fc, y_obs, sched, rng, !cfg.freeze_covariance,
                                cfg.rw_estimator_weights, trace, &out.diag);
        break;
    }
    out.ok = std::isfinite(out.estimate);
    if (!out.ok) out.error = "non-finite estimate";
  } catch (const std::exception& ex) {
    out.error = ex.what();
  }
  const auto t1 = std::chrono::steady_clock::now();
  out.seconds = std::chrono::duration<double>(t1 - t0).count();
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open output file: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: JSON parse failure: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("experiment config: expected a JSON object");

  static const std::set<std::string> known = {
      "params",          "methods",       "n_particles",       "n_replications",
      "seed",            "lambda_steps",  "lambda_spacing",    "ess_threshold",
      "reference_price", "output_dir",    "emit_paths",        "fixed_path",
      "freeze_covariance", "pf_maturity_weights", "rw_estimator_weights", "threads"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key()))
      throw ConfigError("experiment config: unknown key '" + item.key() + "'");
  }
  if (!j.contains("params"))
    throw ConfigError("experiment config: missing key 'params'");

  auto uint_field = [&](const char* key, std::uint64_t& dst) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer() ||
        (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw ConfigError(std::string("experiment config: '") + key +
                        "' must be a non-negative integer");
    dst = v.get<std::uint64_t>();
  };
  auto int_field = [&](const char* key, int& dst) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer())
      throw ConfigError(std::string("experiment config: '") + key +
                        "' must be an integer");
    dst = v.get<int>();
  };
  auto bool_field = [&](const char* key, bool& dst) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_boolean())
      throw ConfigError(std::string("experiment config: '") + key + "' must be a boolean");
    dst = v.get<bool>();
  };

  ExperimentConfig cfg;
  cfg.params = parse_params(j.at("params").dump());
  cfg.methods = {Method::mc, Method::pf, Method::homotopy, Method::rw_homotopy};
  if (j.contains("methods")) {
    const auto& arr = j.at("methods");
    if (!arr.is_array())
      throw ConfigError("experiment config: 'methods' must be an array of names");
    cfg.methods.clear();
    for (const auto& v : arr) {
      if (!v.is_string())
        throw ConfigError("experiment config: 'methods' entries must be strings");
      const Method m = method_from_name(v.get<std::string>());
      if (std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end())
        throw ConfigError("experiment config: duplicate method '" + v.get<std::string>() +
                          "'");
      cfg.methods.push_back(m);
    }
  }

  std::uint64_t n_particles = cfg.n_particles;
  uint_field("n_particles", n_particles);
  cfg.n_particles = static_cast<std::size_t>(n_particles);
  std::uint64_t n_replications = cfg.n_replications;
  uint_field("n_replications", n_replications);
  cfg.n_replications = static_cast<std::size_t>(n_replications);
  uint_field("seed", cfg.seed);
  int_field("lambda_steps", cfg.lambda_steps);

  if (j.contains("lambda_spacing")) {
    const auto& v = j.at("lambda_spacing");
    if (!v.is_string())
      throw ConfigError("experiment config: 'lambda_spacing' must be a string");
    const std::string s = v.get<std::string>();
    if (s == "uniform") cfg.lambda_spacing = LambdaSpacing::uniform;
    else if (s == "geometric") cfg.lambda_spacing = LambdaSpacing::geometric;
    else
      throw ConfigError("experiment config: lambda_spacing '" + s +
                        "' (expected uniform or geometric)");
  }

  if (j.contains("ess_threshold")) {
    const auto& v = j.at("ess_threshold");
    if (!v.is_number())
      throw ConfigError("experiment config: 'ess_threshold' must be a number");
    cfg.ess_threshold = v.get<double>();
  }
  if (j.contains("reference_price")) {
    const auto& v = j.at("reference_price");
    if (!v.is_number())
      throw ConfigError("experiment config: 'reference_price' must be a number");
    cfg.reference_price = v.get<double>();
  }
  if (j.contains("output_dir")) {
    const auto& v = j.at("output_dir");
    if (!v.is_string())
      throw ConfigError("experiment config: 'output_dir' must be a string");
    cfg.output_dir = v.get<std::string>();
  }

  bool_field("emit_paths", cfg.emit_paths);
  bool_field("fixed_path", cfg.fixed_path);
  bool_field("freeze_covariance", cfg.freeze_covariance);

  if (j.contains("pf_maturity_weights")) {
    const auto& v = j.at("pf_maturity_weights");
    if (!v.is_string())
      throw ConfigError("experiment config: 'pf_maturity_weights' must be a string");
    const std::string s = v.get<std::string>();
    if (s == "post-resample") cfg.pf_maturity_weights = MaturityWeights::post_resample;
    else if (s == "pre-resample") cfg.pf_maturity_weights = MaturityWeights::pre_resample;
    else
      throw ConfigError("experiment config: pf_maturity_weights '" + s +
                        "' (expected post-resample or pre-resample)");
  }
  if (j.contains("rw_estimator_weights")) {
    const auto& v = j.at("rw_estimator_weights");
    if (!v.is_string())
      throw ConfigError("experiment config: 'rw_estimator_weights' must be a string");
    const std::string s = v.get<std::string>();
    if (s == "final-step") cfg.rw_estimator_weights = RwEstimatorWeights::final_step;
    else if (s == "previous-step")
      cfg.rw_estimator_weights = RwEstimatorWeights::previous_step;
    else
      throw ConfigError("experiment config: rw_estimator_weights '" + s +
                        "' (expected final-step or previous-step)");
  }
  int_field("threads", cfg.threads);

  validate_experiment_config(cfg);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

void validate_experiment_config(const ExperimentConfig& cfg) {
  validate_params(cfg.params);
  if (cfg.methods.empty()) throw ConfigError("experiment config: methods must be nonempty");
  for (std::size_t i = 0; i < cfg.methods.size(); ++i)
    for (std::size_t k = i + 1; k < cfg.methods.size(); ++k)
      if (cfg.methods[i] == cfg.methods[k])
        throw ConfigError("experiment config: duplicate method '" +
                          method_name(cfg.methods[i]) + "'");
  if (cfg.n_particles < 2)
    throw ConfigError("experiment config: n_particles must be at least 2");
  if (cfg.n_replications < 2)
    throw ConfigError("experiment config: n_replications must be at least 2");
  if (cfg.lambda_steps < 1)
    throw ConfigError("experiment config: lambda_steps must be at least 1");
  if (!(cfg.ess_threshold > 0.0 && cfg.ess_threshold <= 1.0))
    throw ConfigError("experiment config: ess_threshold must lie in (0, 1]");
  if (!(cfg.reference_price > 0.0))
    throw ConfigError("experiment config: reference_price must be positive");
  if (cfg.threads < 1) throw ConfigError("experiment config: threads must be at least 1");
}

MarketPath generate_market_path(const SteinSteinParams& params, RandomStream rng) {
  MarketPath path;
  path.x.reserve(static_cast<std::size_t>(params.n_steps) + 1);
  path.y.reserve(static_cast<std::size_t>(params.n_steps) + 1);
  StatePoint s{params.v0, std::log(params.s0)};
  path.x.push_back(s.x);
  path.y.push_back(s.y);
  for (int t = 0; t < params.n_steps; ++t) {
    const double eps = rng.normal();
    const double eta = rng.normal();
    s = euler_step(params, s, eps, eta);
    path.x.push_back(s.x);
    path.y.push_back(s.y);
  }
  return path;
}

std::vector<EstimatorReport> run_experiment(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.params = validate_params(cfg.params);
  validate_experiment_config(cfg);

  const RandomStream root(cfg.seed, 0);
  const HomotopySchedule sched = (cfg.lambda_spacing == LambdaSpacing::uniform)
                                     ? make_uniform_schedule(cfg.lambda_steps)
                                     : make_geometric_schedule(cfg.lambda_steps);

  const std::size_t reps = cfg.n_replications;
  std::vector<MarketPath> paths(reps);
  for (std::size_t l = 0; l < reps; ++l) {
    const std::size_t key_rep = cfg.fixed_path ? 0 : l;
    paths[l] = (cfg.fixed_path && l > 0)
                   ? paths[0]
                   : generate_market_path(cfg.params, root.substream(path_stream_key(key_rep)));
  }

  const std::size_t n_methods = cfg.methods.size();
  std::vector<std::vector<RepResult>> results(n_methods, std::vector<RepResult>(reps));

  // Replications are striped over threads; every (method, replication) slot
  // has a pre-assigned stream, so estimates do not depend on the stripe
  // width.  Within a replication the methods run sequentially.
  auto run_slice = [&](std::size_t first, std::size_t stride) {
    for (std::size_t l = first; l < reps; l += stride)
      for (std::size_t mi = 0; mi < n_methods; ++mi)
        results[mi][l] = run_one(cfg, sched, cfg.methods[mi], l, paths[l], root,
                                 cfg.emit_paths && l == 0);
  };
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), reps);
  if (n_threads <= 1) {
    run_slice(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t k = 0; k < n_threads; ++k)
      pool.emplace_back(run_slice, k, n_threads);
    for (auto& th : pool) th.join();
  }

  std::vector<EstimatorReport> reports;
  reports.reserve(n_methods);
  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    std::vector<double> estimates;
    std::vector<std::string> errors;
    double cpu = 0.0;
    TransportDiagnostics diag;
    for (std::size_t l = 0; l < reps; ++l) {
      const RepResult& rr = results[mi][l];
      if (rr.ok) {
        estimates.push_back(rr.estimate);
        cpu += rr.seconds;
      } else {
        errors.push_back("replication " + std::to_string(l) + ": " + rr.error);
      }
      diag.regularized += rr.diag.regularized;
      diag.frozen += rr.diag.frozen;
      diag.clamped += rr.diag.clamped;
    }

    EstimatorReport rep;
    if (estimates.size() >= 2) {
      rep = compute_report(estimates, cfg.reference_price,
                           std::max(cpu, 1e-9));
    } else {
      rep.m_s = estimates.size();
      rep.reference_price = cfg.reference_price;
      rep.estimates = estimates;
      rep.cpu_seconds = cpu;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rep.mean = rep.st_dev = rep.rmse = rep.bias = nan;
      rep.rrmse = rep.rrmse_ref = rep.rel_error = rep.fom = nan;
    }
    rep.method = cfg.methods[mi];
    rep.n_particles = cfg.n_particles;
    rep.n_steps = cfg.params.n_steps;
    rep.seed = cfg.seed;
    rep.errors = std::move(errors);
    rep.transport_regularized = diag.regularized;
    rep.transport_frozen = diag.frozen;
    rep.transport_clamped = diag.clamped;
    reports.push_back(std::move(rep));
  }

  if (!cfg.output_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " +
                          ec.message());

    std::ostringstream csv;
    csv << report_csv_header() << '\n';
    for (const auto& rep : reports) csv << report_csv_row(rep) << '\n';
    write_text_file(dir / "reports.csv", csv.str());

    std::ostringstream records;
    for (const auto& rep : reports) records << report_json_record(rep) << '\n';
    write_text_file(dir / "reports.json", records.str());

    if (cfg.emit_paths) {
      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        const auto& trace = results[mi][0].vol_trace;
        std::ostringstream out;
        out << "t,true_vol,filtered_vol_mean\n";
        char buf[40];
        for (std::size_t k = 0; k < trace.size() && k < paths[0].x.size(); ++k) {
          std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(k) * cfg.params.dt);
          out << buf << ',';
          std::snprintf(buf, sizeof(buf), "%.17g", paths[0].x[k]);
          out << buf << ',';
          std::snprintf(buf, sizeof(buf), "%.17g", trace[k]);
          out << buf << '\n';
        }
        write_text_file(dir / ("trace_" + method_name(cfg.methods[mi]) + ".csv"),
                        out.str());
      }
    }
  }

  return reports;
}

}  // namespace partflow
