#pragma once

#include <array>
#include <string>
#include <vector>

#include "stapsdr/sdr.hpp"
#include "stapsdr/types.hpp"

namespace stapsdr {

/// Residuals of the first-order optimality system evaluated on a candidate
/// relaxed solution. The slack Sigma used for the complementary-slackness
/// checks is reconstructed in closed form from the stationarity equation
/// (Sigma1 = R_ni, Sigma3 = lambda I, sigma2 = C_V beta2 - mu^* tau), so the
/// report does not depend on solver-internal dual bookkeeping.
struct KktReport {
  double stationarity_residual = 0.0;   // solver Sigma vs the gradient equation
  double sigma1_matches_Rni = 0.0;
  double sigma3_matches_lambdaI = 0.0;
  std::array<double, 4> cs_residuals{};  // CS1..CS4, relative
  bool lambda_feasible = false;          // lambda >= -tol
  double power_slack = 0.0;              // P_o - tr(B3), signed
  double capon_residual = 0.0;           // |tr(B2^H T) - kappa|
  double psd_min_eig_B = 0.0;
  double psd_min_eig_Sigma = 0.0;
  double lambda_from_B1 = 0.0;        // |lambda - tr(B1 R_ni)/P_o| / (1 + lambda)
  double lambda_from_B2Sigma2 = 0.0;  // |lambda + tr(B2^H Sigma2)/P_o| / (1 + lambda)
  double mu_kappa_gap = 0.0;          // |mu^* kappa - objective| / (1 + |objective|)
  double scalar_slackness = 0.0;      // |lambda (tr B3 - P_o)|, relative
  double tr_B2H_Sigma2_imag = 0.0;    // should be ~0 (trace is real and nonpositive)
  double tol = 0.0;
  bool verdict = false;
};

KktReport check_kkt(const SdrSolution& sol, const SdrProblem& prob, double tol);

/// Power-bound proposition, block-rank equalities and the rank lemma,
/// evaluated at the shared numeric-rank threshold.
struct StructuralReport {
  int rank_Rni = 0;
  bool Rni_full_rank = false;
  double lambda = 0.0;
  bool lambda_positive = false;
  bool power_bound_active = false;
  double power_gap_rel = 0.0;  // |tr B3 - P_o| / P_o
  int rank_B1 = 0, rank_B2 = 0, rank_B3 = 0, rank_B = 0;
  bool ranks_equal = false;
  bool rank_le_N = false;
  int rank_lemma_rhs = 0;  // N - rank(lambda I - Sigma2^H R_ni^{-1} Sigma2)
  bool rank_lemma_holds = false;
  bool sigma2_zero = false;
  bool verdict = false;
};

StructuralReport structural_lemmas(const SdrSolution& sol, const SdrProblem& prob, double tol);

/// Clutter-basis decomposition of C_V through the Q x Q factor Gram matrix
/// and the per-direction balance equations of the waterfilling form.
struct WaterfillingAudit {
  int Q_eff = 0;
  VecR nu;                     // positive eigenvalues of C_V, descending
  std::vector<MatC> U;         // NML x N clutter direction matrices
  std::vector<cxd> alignment;  // tr(U_i^H B2)
  VecR balance_residuals;      // one per clutter direction
  double max_balance_residual = 0.0;
  cxd mu_from_waterfilling{0.0, 0.0};
  double mu_match_rel = 0.0;  // |mu_wf - mu_solver| / (|mu_solver| + tiny)
  bool degenerate = false;    // tr(T^H R_ni^{-1} T B3) below tolerance
  double partial_isometry_residual = 0.0;  // max_i ||U_i^H U_i - I/N||
  double zero_clutter_residual = 0.0;      // ||B2 - mu^* R_ni^{-1} T B3|| when Q_eff = 0
};

WaterfillingAudit waterfilling_audit(const SdrSolution& sol, const SdrProblem& prob, double tol);

/// Section 6.3-style candidate: B1 minimizes tr(B1 R_ni) orthogonal to the
/// clutter with the target-norm equality, completed through
/// B2 = (P_o/kappa) B1 T and B3 = (P_o^2/|kappa|^2) T^H B1 T.
struct PowerBoundedCandidate {
  MatC B;
  SolveStatus subproblem_status = SolveStatus::max_iters;
  int iterations = 0;
  double tr_B1_Rni = 0.0;
  bool admissibility_inequality = false;  // tr(B1 R_ni) <= (|k|^2/||T||_F^2)(tr R_ni / P_o)
  bool tau_in_range_cv = false;           // precondition record
  std::vector<bool> herm_TGq_psd;         // whether (T Gamma_q^H)_H is semidefinite
  double lambda = 0.0;
  cxd mu{0.0, 0.0};
  KktReport kkt;
};

PowerBoundedCandidate candidate_power_bounded(const SdrProblem& prob, double tol,
                                              const SolveOptions& opts = {});

enum class FlowchartVerdict {
  not_applicable,                // R_ni numerically full rank
  infeasible_target_embedded,    // Range(T) inside Range(R_ni)
  feasible_whitened_target,      // C_V full rank and C_V^{-1} tau in Null(lifted R_ni)
  infeasible_whitened_target,    // C_V full rank, whitened target not clear of R_ni
  mu_zero_feasible,              // tau outside Range(C_V), Capon reachable in Null(C_V P_perp)
  mu_zero_infeasible,            // tau outside Range(C_V), Capon unreachable
  infeasible_clutter_subsumed,   // Null(lifted R_ni) inside Null(C_V)
  feasible_tau_in_clutter        // remaining case, solution needs mu^* tau in Range(C_V P_perp)
};
const char* to_string(FlowchartVerdict v);

struct FlowchartDiagnosis {
  FlowchartVerdict verdict = FlowchartVerdict::not_applicable;
  int rank_Rni = 0;
  double p_perp_T_norm = 0.0;
  bool cv_full_rank = false;
  bool tau_in_range_cv = false;
  bool clutter_subsumed = false;
  std::string detail;
};

FlowchartDiagnosis nonpower_flowchart(const SdrProblem& prob, double tol);

}  // namespace stapsdr
