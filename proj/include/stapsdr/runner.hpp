#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stapsdr/extract.hpp"
#include "stapsdr/hessian.hpp"
#include "stapsdr/kkt.hpp"
#include "stapsdr/scenario.hpp"
#include "stapsdr/sdr.hpp"

namespace stapsdr {

struct RunOptions {
  SolveOptions solver;
  double check_tol = 1e-5;  // gate for KKT / lemma verdicts
  PatternGridSpec grid;
  int workers = 1;
  unsigned long long seed = 0;
};

/// Everything a single scenario solve produces, before any file IO.
struct SolveArtifacts {
  SlaterReport slater;
  SdrSolution solution;
  KktReport kkt;
  StructuralReport lemmas;
  std::optional<WaterfillingAudit> audit;  // absent when R_ni is rank deficient
  AmResult am;
  double am_cost = 0.0;
  std::vector<RankBExtract> rank_sweep;  // B = 1..J
  int best_b = 1;
  double best_extract_cost = 0.0;
  double sigma_ratio = 0.0;  // sigma_2 / sigma_1 of the solution matrix
};

SolveArtifacts run_solve(const SdrProblem& prob, const RunOptions& opts);

/// Summary row schema shared by `solve` and `sweep` outputs.
std::vector<std::string> summary_header();
std::vector<std::string> summary_row(const std::string& variable, double value,
                                     const SdrProblem& prob, const SolveArtifacts& art);

void write_solution_dump(const SdrSolution& sol, const SdrProblem& prob,
                         const std::string& path);
void write_kkt_csv(const KktReport& rep, const StructuralReport& lemmas, const std::string& path);
void write_kkt_text(const KktReport& rep, const StructuralReport& lemmas,
                    const std::optional<WaterfillingAudit>& audit, const std::string& path);
void write_eigenspread_csv(const SolveArtifacts& art, const std::string& path);
void write_cost_vs_b_csv(const SolveArtifacts& art, const std::string& path);
void write_cosines_csv(const SolveArtifacts& art, const SdrProblem& prob,
                       const std::string& path);
void write_waterfilling_csv(const WaterfillingAudit& audit, const std::string& path);
void write_pattern_csv(const AdaptedPatternGrid& grid, const std::string& path);
void write_certificates_csv(const std::vector<IndefinitenessCertificate>& certs,
                            const std::vector<std::string>& scopes, const std::string& path);

/// Full single-scenario pipeline with artifact files under out_dir.
SolveArtifacts run_solve_command(const ScenarioConfig& cfg, const RunOptions& opts,
                                 const std::string& out_dir);

struct SweepSpec {
  enum class Variable { kappa, P_o };
  Variable variable = Variable::kappa;
  std::vector<double> values;
  std::string base_scenario;
  std::string outputs_dir;
  SolveOptions solver;
};

SweepSpec load_sweep_spec(const std::string& path);

struct SweepPointResult {
  double value = 0.0;
  bool solved = false;
  bool included = false;
  std::string reason;
  SolveArtifacts artifacts;
};

/// Solve every sweep point (worker pool of configurable width), write one
/// artifact directory per point and a value-ordered summary.csv. Returns the
/// per-point results in value order.
std::vector<SweepPointResult> run_sweep(const SweepSpec& spec, const RunOptions& opts);

struct InterferenceReport {
  AdaptedPatternGrid with_interferer;
  AdaptedPatternGrid without_interferer;
  double target_doppler = 0.0;
  double target_azimuth = 0.0;
  int target_doppler_idx = 0;
  int target_azimuth_idx = 0;
  // Pattern value at the target cell in dB relative to the grid peak.
  double target_rel_db_with = 0.0;
  double target_rel_db_without = 0.0;
  double peak_gain_loss_db = 0.0;  // without minus with, positive means degradation
  int peak_shift_doppler_cells = 0;
  int peak_shift_azimuth_cells = 0;
  bool interferer_present_in_scenario = false;
};

InterferenceReport run_interference_study(const ScenarioConfig& cfg, const RunOptions& opts,
                                          const std::string& out_dir, bool skip_interferer);

}  // namespace stapsdr
