#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "partflow/errors.hpp"
#include "partflow/experiment.hpp"

namespace {

std::string error_record(const std::string& kind, const std::string& message) {
  nlohmann::json j;
  j["error"] = kind;
  j["message"] = message;
  return j.dump();
}

int fail(const std::string& kind, const std::string& message) {
  std::fprintf(stderr, "%s\n", error_record(kind, message).c_str());
  return 1;
}

void print_summary(const std::vector<partflow::EstimatorReport>& reports) {
  std::printf("%-12s %11s %5s %12s %12s %12s %12s %12s %14s\n", "method", "n_particles",
              "m_s", "mean", "st_dev", "rmse", "bias", "cpu_s", "fom");
  for (const auto& rep : reports) {
    std::printf("%-12s %11zu %5zu %12.6f %12.6f %12.6f %12.6f %12.4f %14.3f\n",
                partflow::method_name(rep.method).c_str(), rep.n_particles, rep.m_s,
                rep.mean, rep.st_dev, rep.rmse, rep.bias, rep.cpu_seconds, rep.fom);
  }
  for (const auto& rep : reports) {
    for (const auto& err : rep.errors)
      std::fprintf(stderr, "warning: %s %s\n", partflow::method_name(rep.method).c_str(),
                   err.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle-filter and particle-flow option pricing benchmark"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run the configured pricing experiment");
  std::string config_path;
  std::vector<std::string> method_names;
  std::uint64_t particles = 0, replications = 0, seed = 0;
  int steps = 0, lambda_steps = 0, threads = 0;
  double ess_threshold = 0.0;
  bool fixed_path = false, emit_paths = false;
  std::string out_dir;

  run->add_option("--config", config_path, "Experiment config JSON file")->required();
  run->add_option("--method", method_names,
                  "Estimator to run, repeatable: mc, pf, homotopy, rw-homotopy");
  run->add_option("--particles", particles, "Particles per estimator");
  run->add_option("--steps", steps, "Euler time steps over [0, T]");
  run->add_option("--replications", replications, "Seeded replications per method");
  run->add_option("--seed", seed, "Root seed");
  run->add_option("--lambda-steps", lambda_steps, "Pseudo-time steps per transport");
  run->add_option("--ess-threshold", ess_threshold,
                  "Resample when ESS < threshold * n_particles");
  run->add_option("--threads", threads, "Worker threads over replications");
  run->add_flag("--fixed-path", fixed_path,
                "Share one market path across all replications");
  run->add_flag("--emit-paths", emit_paths, "Write per-method volatility trace CSVs");
  run->add_option("--out", out_dir, "Output directory for reports and traces");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "%s\n", error_record("cli", e.what()).c_str());
    return e.get_exit_code();
  }

  try {
    partflow::ExperimentConfig cfg = partflow::load_experiment_config(config_path);
    if (!method_names.empty()) {
      cfg.methods.clear();
      for (const auto& name : method_names)
        cfg.methods.push_back(partflow::method_from_name(name));
    }
    if (run->count("--particles")) cfg.n_particles = static_cast<std::size_t>(particles);
    if (run->count("--steps")) cfg.params.n_steps = steps;
    if (run->count("--replications"))
      cfg.n_replications = static_cast<std::size_t>(replications);
    if (run->count("--seed")) cfg.seed = seed;
    if (run->count("--lambda-steps")) cfg.lambda_steps = lambda_steps;
    if (run->count("--ess-threshold")) cfg.ess_threshold = ess_threshold;
    if (run->count("--threads")) cfg.threads = threads;
    if (fixed_path) cfg.fixed_path = true;
    if (emit_paths) cfg.emit_paths = true;
    if (run->count("--out")) cfg.output_dir = out_dir;

    const auto reports = partflow::run_experiment(cfg);
    print_summary(reports);
    if (!cfg.output_dir.empty())
      std::printf("reports written to %s\n", cfg.output_dir.c_str());

    for (const auto& rep : reports) {
      if (rep.m_s < 2)
        return fail("runtime", "method " + partflow::method_name(rep.method) +
                                   ": fewer than 2 replications succeeded");
    }
    return 0;
  } catch (const partflow::ConfigError& e) {
    return fail("config", e.what());
  } catch (const partflow::IoError& e) {
    return fail("io", e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
}
