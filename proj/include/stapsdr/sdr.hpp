#pragma once

#include <string>
#include <vector>

#include "stapsdr/model.hpp"
#include "stapsdr/types.hpp"

namespace stapsdr {

enum class ObjectiveMode {
  factor_quadratic,  // sum_q |phi_q^H vec(B2)|^2 evaluated factor by factor
  norm_of_factor     // ||C_V^{1/2} vec(B2)||^2 through the factor Gram eigenbasis
};

/// Vectorized relaxation data. The clutter quadratic is held in factor form:
/// C_V = Phi Phi^H with column q of Phi equal to sqrt(rbar_q) vec(Gamma_q);
/// the N^2 ML x N^2 ML operator is never densified.
struct SdrProblem {
  int N = 1, M = 1, L = 1;
  MatC T;                    // NML x N target channel
  MatC R_ni;                 // NML x NML
  MatC factors;              // N^2 ML x Q, clutter factors with sqrt(rbar) absorbed
  VecR rbar;                 // per-patch reflectivity powers
  cxd kappa{1.0, 0.0};
  double P_o = 1.0;
  CovarianceSet cov;         // kept for cost evaluation and audits

  int nml() const { return N * M * L; }
  int joint_dim() const { return N * (M * L + 1); }
  SplitterPair split() const { return SplitterPair{N, M, L}; }

  MatC block1(const MatC& B) const { return B.topLeftCorner(nml(), nml()); }
  MatC block2(const MatC& B) const { return B.topRightCorner(nml(), N); }
  MatC block3(const MatC& B) const { return B.bottomRightCorner(N, N); }

  /// tr(B2^H T), the Capon value of a relaxed iterate.
  cxd capon_value(const MatC& B) const;

  /// Re tr(R_ni B1) + vec(B2)^H C_V vec(B2) in the requested evaluation mode.
  double objective(const MatC& B, ObjectiveMode mode = ObjectiveMode::factor_quadratic) const;

  /// C_V x through the factor form.
  VecC apply_cv(const VecC& x) const;
};

SdrProblem assemble(const ScenarioConfig& cfg);
/// Assembly from prebuilt pieces, for constructed test problems.
SdrProblem assemble(const CovarianceSet& cov, const ChannelMatrix& target, cxd kappa, double P_o,
                    int N, int M, int L);

struct SlaterReport {
  bool satisfied = false;
  double margin = 0.0;  // P_o - |kappa|^2 / ||T||_F^2
  MatC witness;         // strictly feasible PD point when satisfied
};

SlaterReport slater_margin(const SdrProblem& prob);

enum class SolveStatus { optimal, max_iters, infeasible };
const char* to_string(SolveStatus s);

/// barrier: path-following Newton on the exact minimal-completion reduction
///   B1 = B2 B3^{-1} B2^H (the structure complementary slackness forces at
///   any optimum), which certifies at 1e-9-level residuals on desk scales.
/// splitting: the PSD-projection / affine-step scheme with running dual
///   updates; kept as an alternative engine and used for the linear-SDP
///   subproblems.
enum class SolveMethod { barrier, splitting };

struct SolveOptions {
  double tol = 1e-7;
  int max_iters = 50000;
  SolveMethod method = SolveMethod::barrier;
  double over_relaxation = 1.5;  // splitting only
  bool warm_start_slater = false;
  ObjectiveMode objective_mode = ObjectiveMode::factor_quadratic;
  double rho0 = 1.0;             // splitting penalty start
  bool adaptive_rho = true;
  bool psd_via_real_embedding = false;
  double barrier_shrink = 0.2;   // mu reduction per outer stage
};

struct SdrResiduals {
  double capon = 0.0;          // |tr(B2^H T) - kappa|
  double power = 0.0;          // tr(B3) - P_o, signed
  double psd_violation = 0.0;  // max(0, -min eig B)
  double stationarity = 0.0;   // relative residual of the SW-block gradient equation
  double slackness = 0.0;      // relative |<Sigma, B>|
  double primal = 0.0;         // splitting consensus gap (scaled problem)
  double dual = 0.0;
};

struct SdrSolution {
  MatC B;            // J x J Hermitian PSD
  double lambda = 0.0;  // power multiplier
  cxd mu{0.0, 0.0};     // Capon multiplier (mu tilde)
  MatC Sigma;           // PSD slack recovered from the splitting dual
  double objective = 0.0;
  double objective_alt = 0.0;  // value under the other evaluation mode
  SdrResiduals residuals;
  SolveStatus status = SolveStatus::max_iters;
  int iterations = 0;
  int nml = 0;  // block partition sizes
  int n = 0;

  MatC B1() const { return B.topLeftCorner(nml, nml); }
  MatC B2() const { return B.topRightCorner(nml, n); }
  MatC B3() const { return B.bottomRightCorner(n, n); }
  MatC Sigma2() const { return Sigma.topRightCorner(nml, n); }
};

/// First-order splitting over {Hermitian PSD cone} x {affine constraints}:
/// alternates a proximal step on the convex quadratic objective under the
/// Capon/power constraints with a PSD-cone projection, carrying running
/// multipliers for both constraints. Deterministic for fixed options.
SdrSolution solve(const SdrProblem& prob, const SolveOptions& opts = {});

/// min Re tr(C X) over X >= 0 subject to Re<A_i, X> = b_i. Same splitting
/// machinery; used for the power-bounded candidate subproblem.
struct LinearSdp {
  MatC C;
  std::vector<MatC> A;  // Hermitian constraint matrices
  VecR b;
};

struct LinearSdpSolution {
  MatC X;
  VecR constraint_values;
  SolveStatus status = SolveStatus::max_iters;
  int iterations = 0;
  double objective = 0.0;
  double primal_residual = 0.0;
  double affine_residual = 0.0;
};

LinearSdpSolution solve_linear_sdp(const LinearSdp& sdp, const SolveOptions& opts = {});

}  // namespace stapsdr
