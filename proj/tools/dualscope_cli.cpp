// Command-line front end: model analysis, trajectory simulation, duality
// identity checks, behavioral distinguishability runs, and reachable-span
// estimation.
//
// Exit codes: 0 ok (analyze: observable), 10 analyze: unobservable,
// 2 usage/validation error, 20 duality identity violation, 30 behavioral /
// algebraic verdict mismatch.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "dualscope/dualscope.hpp"

namespace ds = dualscope;

namespace {

void write_text(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ds::ConfigError("cannot open output file '" + out_path + "'");
  out << text;
}

int cmd_analyze(const std::string& model_path, double tol,
                const std::string& out_path) {
  const ds::Model model = ds::load_model(model_path);
  const ds::ObservabilityReport report = ds::analyze(model, tol);
  write_text(out_path, ds::report_to_json(report).dump(2) + "\n");
  return report.observable ? 0 : 10;
}

int cmd_simulate(const std::string& model_path, const std::string& mu_csv,
                 double T, double dt, int n_paths, uint64_t seed,
                 const std::string& prefix, int threads) {
  const ds::Model model = ds::load_model(model_path);
  if (n_paths < 1) throw ds::ConfigError("need at least one path");
  const ds::Vector mu_raw = ds::parse_vector(mu_csv);
  if (mu_raw.size() != model.d)
    throw ds::ConfigError("initial measure needs " + std::to_string(model.d) +
                          " entries");
  const ds::ProbabilityMeasure mu(mu_raw);
  const ds::TimeGrid grid = ds::TimeGrid::make(T, dt);

  std::vector<ds::PathBundle> bundles(n_paths);
  std::vector<ds::FilterTrajectory> filters(n_paths);
  ds::parallel_for(n_paths, threads, [&](int64_t p) {
    bundles[p] = ds::simulate_physical_path(model, mu, grid, seed, p);
    filters[p] = ds::propagate_zakai(model, mu.as_signed(), grid,
                                     bundles[p].dZ, ds::ZakaiMode::probability);
  });

  const std::string paths_file = prefix + "_paths.csv";
  const std::string filter_file = prefix + "_filter.csv";
  std::ofstream pout(paths_file, std::ios::binary);
  if (!pout) throw ds::ConfigError("cannot open '" + paths_file + "'");
  ds::write_paths_csv(pout, bundles);
  std::ofstream fout(filter_file, std::ios::binary);
  if (!fout) throw ds::ConfigError("cannot open '" + filter_file + "'");
  ds::write_filter_csv(fout, filters);
  std::cout << paths_file << "\n" << filter_file << "\n";
  return 0;
}

int cmd_duality(const std::string& model_path, const std::string& pi0_csv,
                const std::string& control_spec, double c, double T, double dt,
                int n_paths, uint64_t seed, const std::string& out_path,
                int threads) {
  const ds::Model model = ds::load_model(model_path);
  const ds::Vector pi0_raw = ds::parse_vector(pi0_csv);
  if (pi0_raw.size() != model.d)
    throw ds::ConfigError("pi0 needs " + std::to_string(model.d) + " entries");
  if (n_paths < 2) throw ds::ConfigError("need at least two paths");
  const ds::SignedMeasure pi0(pi0_raw);
  const ds::TimeGrid grid = ds::TimeGrid::make(T, dt);
  const ds::AdaptedControl control =
      ds::parse_control_spec(control_spec, grid, model.m);
  const ds::AdjointIdentityResult r =
      ds::verify_adjoint_identity(model, pi0, control, c, n_paths, seed,
                                  threads);
  write_text(out_path, ds::adjoint_to_json(r).dump(2) + "\n");
  return r.residual > 5.0 * r.std_err ? 20 : 0;
}

int cmd_distinguish(const std::string& model_path, const std::string& mu_csv,
                    const std::string& nu_csv, double T, double dt,
                    int n_paths, uint64_t seed, double eps_entropy,
                    double eps_sup, double tol, const std::string& out_path,
                    const std::string& trace_path, int threads) {
  const ds::Model model = ds::load_model(model_path);
  const ds::Vector mu_raw = ds::parse_vector(mu_csv);
  const ds::Vector nu_raw = ds::parse_vector(nu_csv);
  if (mu_raw.size() != model.d || nu_raw.size() != model.d)
    throw ds::ConfigError("measures need " + std::to_string(model.d) +
                          " entries");
  if (n_paths < 2) throw ds::ConfigError("need at least two paths");
  const ds::ProbabilityMeasure mu(mu_raw), nu(nu_raw);
  ds::DistinguishConfig config;
  config.grid = ds::TimeGrid::make(T, dt);
  config.n_paths = n_paths;
  config.seed = seed;
  config.eps_entropy = eps_entropy;
  config.eps_sup = eps_sup;
  config.algebraic_tol = tol;
  config.threads = threads;
  const ds::DistinguishabilityResult r = ds::distinguish(model, mu, nu, config);
  write_text(out_path, ds::distinguish_to_json(r).dump(2) + "\n");
  if (!trace_path.empty()) {
    std::ofstream tout(trace_path, std::ios::binary);
    if (!tout) throw ds::ConfigError("cannot open '" + trace_path + "'");
    ds::write_trace_csv(tout, config.grid, r.trace);
  }
  return r.mismatch ? 30 : 0;
}

int cmd_span(const std::string& model_path, int n_controls, int n_paths,
             double T, double dt, uint64_t seed, double tol,
             const std::string& out_path, int threads) {
  const ds::Model model = ds::load_model(model_path);
  if (n_paths < 2) throw ds::ConfigError("need at least two paths");
  const ds::TimeGrid grid = ds::TimeGrid::make(T, dt);
  const ds::SpanEstimate s = ds::empirical_reachable_span(
      model, n_controls, n_paths, seed, grid, tol, threads);
  write_text(out_path, ds::span_to_json(s).dump(2) + "\n");
  return 0;
}

struct AnalyzeOpts {
  std::string model, out;
  double tol = ds::kDefaultRankTol;
};

struct SimulateOpts {
  std::string model, mu, prefix = "dualscope";
  double T = 1.0, dt = 1e-3;
  int paths = 10, threads = 0;
  uint64_t seed = 12345;
};

struct DualityOpts {
  std::string model, pi0, control = "const:0.0", out;
  double c = 1.0, T = 1.0, dt = 1e-3;
  int paths = 20000, threads = 0;
  uint64_t seed = 12345;
};

struct DistinguishOpts {
  std::string model, mu, nu, out, trace;
  double T = 1.0, dt = 1e-4, eps_entropy = 1e-3, eps_sup = 1e-2;
  double tol = ds::kDefaultRankTol;
  int paths = 100, threads = 0;
  uint64_t seed = 12345;
};

struct SpanOpts {
  std::string model, out;
  int controls = 16, paths = 64000, threads = 0;
  double T = 0.3, dt = 1e-3, tol = ds::kDefaultRankTol;
  uint64_t seed = 12345;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dualscope: observability analysis for finite-state hidden "
               "Markov models"};
  app.require_subcommand(1);

  AnalyzeOpts an;
  auto* analyze = app.add_subcommand("analyze",
                                     "algebraic observability report");
  analyze->add_option("model", an.model, "model JSON file")->required();
  analyze->add_option("--tol", an.tol, "rank tolerance");
  analyze->add_option("--out", an.out, "report file (default stdout)");

  SimulateOpts si;
  auto* simulate = app.add_subcommand("simulate",
                                      "sample paths and filter trajectories");
  simulate->add_option("model", si.model, "model JSON file")->required();
  simulate->add_option("--mu", si.mu, "initial distribution")->required();
  simulate->add_option("--T", si.T, "horizon");
  simulate->add_option("--dt", si.dt, "time step");
  simulate->add_option("--paths", si.paths, "number of paths");
  simulate->add_option("--seed", si.seed, "master seed");
  simulate->add_option("--out", si.prefix, "output file prefix");
  simulate->add_option("--threads", si.threads, "worker threads (0 = auto)");

  DualityOpts du;
  auto* duality = app.add_subcommand("duality", "adjoint identity check");
  duality->add_option("model", du.model, "model JSON file")->required();
  duality->add_option("--pi0", du.pi0, "initial (signed) measure")->required();
  duality->add_option("--control", du.control,
                      "const:<values> or feedback:<file>");
  duality->add_option("--c", du.c, "terminal constant");
  duality->add_option("--T", du.T, "horizon");
  duality->add_option("--dt", du.dt, "time step");
  duality->add_option("--paths", du.paths, "Monte Carlo paths");
  duality->add_option("--seed", du.seed, "master seed");
  duality->add_option("--out", du.out, "result file (default stdout)");
  duality->add_option("--threads", du.threads, "worker threads (0 = auto)");

  DistinguishOpts di;
  auto* distinguish = app.add_subcommand("distinguish",
                                         "behavioral distinguishability");
  distinguish->add_option("model", di.model, "model JSON file")->required();
  distinguish->add_option("--mu", di.mu, "first prior")->required();
  distinguish->add_option("--nu", di.nu, "second prior")->required();
  distinguish->add_option("--T", di.T, "horizon");
  distinguish->add_option("--dt", di.dt, "time step");
  distinguish->add_option("--paths", di.paths, "Monte Carlo paths");
  distinguish->add_option("--seed", di.seed, "master seed");
  distinguish->add_option("--eps-entropy", di.eps_entropy,
                          "entropy threshold for the verdict");
  distinguish->add_option("--eps-sup", di.eps_sup, "sup-gap threshold");
  distinguish->add_option("--tol", di.tol, "algebraic rank tolerance");
  distinguish->add_option("--out", di.out, "result file (default stdout)");
  distinguish->add_option("--trace-csv", di.trace,
                          "optional discrepancy trace CSV");
  distinguish->add_option("--threads", di.threads,
                          "worker threads (0 = auto)");

  SpanOpts sp;
  auto* span = app.add_subcommand("span", "empirical reachable span");
  span->add_option("model", sp.model, "model JSON file")->required();
  span->add_option("--controls", sp.controls, "number of random controls");
  span->add_option("--paths", sp.paths, "Monte Carlo paths per control");
  span->add_option("--T", sp.T, "horizon");
  span->add_option("--dt", sp.dt, "time step");
  span->add_option("--seed", sp.seed, "master seed");
  span->add_option("--tol", sp.tol, "rank tolerance");
  span->add_option("--out", sp.out, "result file (default stdout)");
  span->add_option("--threads", sp.threads, "worker threads (0 = auto)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(analyze)) return cmd_analyze(an.model, an.tol, an.out);
    if (app.got_subcommand(simulate))
      return cmd_simulate(si.model, si.mu, si.T, si.dt, si.paths, si.seed,
                          si.prefix, si.threads);
    if (app.got_subcommand(duality))
      return cmd_duality(du.model, du.pi0, du.control, du.c, du.T, du.dt,
                         du.paths, du.seed, du.out, du.threads);
    if (app.got_subcommand(distinguish))
      return cmd_distinguish(di.model, di.mu, di.nu, di.T, di.dt, di.paths,
                             di.seed, di.eps_entropy, di.eps_sup, di.tol,
                             di.out, di.trace, di.threads);
    if (app.got_subcommand(span))
      return cmd_span(sp.model, sp.controls, sp.paths, sp.T, sp.dt, sp.seed,
                      sp.tol, sp.out, sp.threads);
  } catch (const ds::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
