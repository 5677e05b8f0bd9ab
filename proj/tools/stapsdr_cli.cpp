#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stapsdr/csvio.hpp"
#include "stapsdr/runner.hpp"

namespace {

using namespace stapsdr;

struct CommonFlags {
  double tol = 1e-7;
  int max_iters = 50000;
  std::string out_dir = "out";
  int workers = 1;
  unsigned long long seed = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--tol", flags.tol, "solver tolerance");
  cmd->add_option("--max-iters", flags.max_iters, "solver iteration cap");
  cmd->add_option("--out-dir", flags.out_dir, "artifact output directory");
  cmd->add_option("--workers", flags.workers, "sweep worker pool width");
  cmd->add_option("--seed", flags.seed, "seed for randomized property scenarios");
}

RunOptions to_run_options(const CommonFlags& flags) {
  RunOptions opts;
  opts.solver.tol = flags.tol;
  opts.solver.max_iters = flags.max_iters;
  opts.workers = flags.workers;
  opts.seed = flags.seed;
  return opts;
}

int cmd_solve(const std::string& scenario_path, const CommonFlags& flags) {
  ScenarioConfig cfg = load_scenario(scenario_path);
  RunOptions opts = to_run_options(flags);
  SolveArtifacts art = run_solve_command(cfg, opts, flags.out_dir);
  std::cout << "status=" << to_string(art.solution.status)
            << " objective=" << art.solution.objective << " lambda=" << art.solution.lambda
            << " iterations=" << art.solution.iterations
            << " kkt=" << (art.kkt.verdict ? "pass" : "fail") << "\n"
            << "artifacts in " << flags.out_dir << "\n";
  return art.solution.status == SolveStatus::infeasible ? 1 : 0;
}

int cmd_sweep(const std::string& spec_path, const CommonFlags& flags) {
  SweepSpec spec = load_sweep_spec(spec_path);
  RunOptions opts = to_run_options(flags);
  std::vector<SweepPointResult> results = run_sweep(spec, opts);
  int failures = 0;
  for (const auto& res : results) {
    std::cout << "value=" << res.value << " included=" << (res.included ? "yes" : "no");
    if (!res.reason.empty()) std::cout << " reason=" << res.reason;
    std::cout << "\n";
    if (!res.solved) ++failures;
  }
  std::cout << "summary: " << spec.outputs_dir << "/summary.csv\n";
  return failures == 0 ? 0 : 1;
}

int cmd_interference(const std::string& scenario_path, bool no_interferer,
                     const CommonFlags& flags) {
  ScenarioConfig cfg = load_scenario(scenario_path);
  RunOptions opts = to_run_options(flags);
  InterferenceReport rep = run_interference_study(cfg, opts, flags.out_dir, no_interferer);
  std::cout << "target cell: doppler=" << rep.target_doppler
            << " Hz, azimuth=" << rep.target_azimuth << " rad\n";
  std::cout << "no interference: target gain " << rep.target_rel_db_without
            << " dB rel peak\n";
  if (!no_interferer && rep.interferer_present_in_scenario) {
    std::cout << "with interference: target gain " << rep.target_rel_db_with
              << " dB rel peak, loss " << rep.peak_gain_loss_db << " dB, peak shift ("
              << rep.peak_shift_doppler_cells << ", " << rep.peak_shift_azimuth_cells
              << ") cells\n";
  }
  return 0;
}

int cmd_certify(const std::string& scenario_path, const std::string& ws_path,
                const CommonFlags& flags) {
  ScenarioConfig cfg = load_scenario(scenario_path);
  std::ifstream in(ws_path);
  if (!in) throw std::runtime_error("cannot open (w, s) file: " + ws_path);
  nlohmann::json j = nlohmann::json::parse(in);
  auto parse_vec = [](const nlohmann::json& arr) {
    VecC v(arr.size());
    for (size_t i = 0; i < arr.size(); ++i)
      v(static_cast<Eigen::Index>(i)) = cxd(arr[i][0].get<double>(), arr[i][1].get<double>());
    return v;
  };
  VecC w = parse_vec(j.at("w"));
  VecC s = parse_vec(j.at("s"));
  if (w.size() != cfg.nml() || s.size() != cfg.N)
    throw std::invalid_argument("(w, s) dimensions do not match the scenario");

  CovarianceSet cov = build_covariance_set(cfg);
  std::vector<IndefinitenessCertificate> certs;
  std::vector<std::string> scopes;
  const double tol = 1e-8;
  for (size_t q = 0; q < cov.clutter.size(); ++q) {
    certs.push_back(certify(per_patch_hessian(w, s, cov.clutter[q].channel,
                                              cov.clutter[q].rbar), tol));
    scopes.push_back("per_patch_" + std::to_string(q));
  }
  certs.push_back(certify(clutter_hessian(w, s, cov), tol));
  scopes.push_back("clutter_total");
  certs.push_back(certify(objective_hessian(w, s, cov), tol));
  scopes.push_back("objective");

  std::filesystem::create_directories(flags.out_dir);
  write_certificates_csv(certs, scopes, flags.out_dir + "/certificates.csv");
  for (size_t i = 0; i < certs.size(); ++i)
    std::cout << scopes[i] << ": " << to_string(certs[i].verdict) << " (" << certs[i].positive_count
              << "+/" << certs[i].negative_count << "-/" << certs[i].zero_count << "0)\n";
  return 0;
}

int cmd_am(const std::string& scenario_path, const CommonFlags& flags) {
  ScenarioConfig cfg = load_scenario(scenario_path);
  CovarianceSet cov = build_covariance_set(cfg);
  ChannelMatrix target = target_channel(cfg);
  AmResult res = alternating_minimization(cov, target.mat, cfg.kappa, cfg.P_o);
  std::filesystem::create_directories(flags.out_dir);
  csv::Writer trace(flags.out_dir + "/am_trace.csv", {"round", "cost"});
  for (size_t i = 0; i < res.cost_trace.size(); ++i)
    trace.row({csv::fmt(static_cast<int>(i + 1)), csv::fmt(res.cost_trace[i])});
  std::cout << "am cost=" << (res.cost_trace.empty() ? 0.0 : res.cost_trace.back())
            << " rounds=" << res.rounds << (res.stalled ? " (stalled)" : "") << "\n";
  return res.stalled ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint waveform-beamformer SDR design tool"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string scenario_path, spec_path, ws_path;
  bool no_interferer = false;

  CLI::App* solve_cmd = app.add_subcommand("solve", "solve the relaxation for one scenario");
  solve_cmd->add_option("scenario", scenario_path, "scenario file")->required();
  add_common(solve_cmd, flags);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a kappa or P_o sweep");
  sweep_cmd->add_option("spec", spec_path, "sweep spec file")->required();
  add_common(sweep_cmd, flags);

  CLI::App* intf_cmd = app.add_subcommand("interference", "adapted-pattern interference study");
  intf_cmd->add_option("scenario", scenario_path, "scenario file")->required();
  intf_cmd->add_flag("--no-interferer", no_interferer, "run only the interference-free case");
  add_common(intf_cmd, flags);

  CLI::App* cert_cmd = app.add_subcommand("certify", "Hessian certificates for a given (w, s)");
  cert_cmd->add_option("scenario", scenario_path, "scenario file")->required();
  cert_cmd->add_option("ws_file", ws_path, "JSON file with w and s as [re, im] lists")
      ->required();
  add_common(cert_cmd, flags);

  CLI::App* am_cmd = app.add_subcommand("am", "alternating-minimization baseline only");
  am_cmd->add_option("scenario", scenario_path, "scenario file")->required();
  add_common(am_cmd, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve_cmd->parsed()) return cmd_solve(scenario_path, flags);
    if (sweep_cmd->parsed()) return cmd_sweep(spec_path, flags);
    if (intf_cmd->parsed()) return cmd_interference(scenario_path, no_interferer, flags);
    if (cert_cmd->parsed()) return cmd_certify(scenario_path, ws_path, flags);
    if (am_cmd->parsed()) return cmd_am(scenario_path, flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
