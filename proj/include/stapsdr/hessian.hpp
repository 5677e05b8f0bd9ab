#pragma once

#include "stapsdr/model.hpp"
#include "stapsdr/types.hpp"

namespace stapsdr {

enum class HessianScope { per_patch, clutter_total, objective };

/// The J x J (1,1) block H_{bb*} of the complex Hessian. The full 2J x 2J
/// Hessian is block-diagonal in this block and its transpose, so definiteness
/// is decided here.
struct HessianBlock {
  MatC corner;      // NML x N contribution to the (1,2) position
  MatC full_block;  // J x J Hermitian
  HessianScope scope = HessianScope::per_patch;
  int patch_index = -1;
  // Pre-cancellation magnitude of the couplings that built the corner; the
  // reference scale for deciding that a block vanished (zero when unknown).
  double scale = 0.0;
};

/// Corner (rbar_q/2) (w^H Gamma_q s)^* Gamma_q, assembled as
/// [[0, corner], [corner^H, 0]].
HessianBlock per_patch_hessian(const VecC& w, const VecC& s, const ChannelMatrix& gamma,
                               double rbar);

/// Corner Pi_Q = sum_q (rbar_q/2) (w^H Gamma_q s)^* Gamma_q.
HessianBlock clutter_hessian(const VecC& w, const VecC& s, const CovarianceSet& cov);

/// [[R_ni, Pi_Q], [Pi_Q^H, 0]].
HessianBlock objective_hessian(const VecC& w, const VecC& s, const CovarianceSet& cov);

enum class DefinitenessVerdict { indefinite, psd, nsd, zero };

struct IndefinitenessCertificate {
  int positive_count = 0;
  int negative_count = 0;
  int zero_count = 0;
  double min_eig = 0.0;
  double max_eig = 0.0;
  DefinitenessVerdict verdict = DefinitenessVerdict::zero;
  bool nulling_detected = false;  // corner vanished, i.e. all w^H Gamma_q s = 0

  // Partitioned-matrix PSD conditions on [[A, B], [B^H, C]] with C = 0:
  // A1: C >= 0 (always), A2: B = B C^dagger C (fails unless B = 0),
  // A3: A - B C^dagger B^H >= 0 (reduces to A >= 0).
  bool cond_a1 = true;
  bool cond_a2 = false;
  bool cond_a3 = true;
  double corner_norm = 0.0;  // A2 residual ||B||_F
  // Contraction-form alternative: range inclusion Range(B^H) subset Range(C)
  // degenerates to requiring the corner to vanish; this is its residual.
  double range_inclusion_residual = 0.0;
};

const char* to_string(DefinitenessVerdict v);

IndefinitenessCertificate certify(const HessianBlock& block, double tol);

/// rbar_q |w^H Gamma_q s|^2, Eq. (13b)-style per-patch cost.
double per_patch_cost(const VecC& w, const VecC& s, const ChannelMatrix& gamma, double rbar);

}  // namespace stapsdr
