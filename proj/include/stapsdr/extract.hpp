#pragma once

#include <vector>

#include "stapsdr/sdr.hpp"
#include "stapsdr/types.hpp"

namespace stapsdr {

struct RankBExtract {
  int B_used = 1;
  VecC w;      // Capon-restored pair
  VecC s;
  VecC w_raw;  // straight from the truncated singular-vector sum
  VecC s_raw;
  double original_cost = 0.0;  // restored pair
  double raw_cost = 0.0;
  cxd capon_value{0.0, 0.0};   // w^H T s of the restored pair
  double capon_gap = 0.0;      // |w^H T s - kappa|
  double power_used = 0.0;     // ||s||^2
  VecR singular_values;        // all J, nonincreasing
};

/// Singular-value-weighted sum of the first B singular vectors of the solution
/// matrix, split into (w, s). Each singular vector is phase-normalized so its
/// largest-modulus entry is real positive, making the sum deterministic.
/// Feasibility restoration puts the Capon phase on s and splits the magnitude
/// correction evenly between w and s (an exactly rank-one input is then
/// recovered verbatim), followed by a power-ball projection on s.
RankBExtract extract(const SdrSolution& sol, const SdrProblem& prob, int B_count);

/// w^H R_ni w + sum_q rbar_q |w^H Gamma_q s|^2, the unrelaxed cost.
double original_cost(const VecC& w, const VecC& s, const CovarianceSet& cov);

/// |tr(X^H Y)| / (||X||_F ||Y||_F). Throws on a zero input.
double subspace_cosine(const MatC& X, const MatC& Y);

struct PatternGridSpec {
  int doppler_bins = 64;
  int azimuth_bins = 181;
  double doppler_min = 0.0;  // filled from the PRI when min == max
  double doppler_max = 0.0;
  double azimuth_min = -1.5707963267948966;
  double azimuth_max = 1.5707963267948966;
};

struct AdaptedPatternGrid {
  VecR doppler_axis;
  VecR azimuth_axis;
  double elevation = 0.0;
  MatR values;  // doppler_bins x azimuth_bins, |w^H (v(f) kron s kron a(theta, phi))|^2
  int peak_doppler_idx = 0;
  int peak_azimuth_idx = 0;
  double peak_value = 0.0;
};

AdaptedPatternGrid adapted_pattern(const VecC& w, const VecC& s, const PatternGridSpec& grid,
                                   double phi, const ScenarioConfig& cfg);

struct AmOptions {
  double tol = 1e-10;       // relative cost-decrease stop
  int max_rounds = 500;
  double ridge = 1e-13;     // relative regularization floor for the w-step solve
};

struct AmResult {
  VecC w;
  VecC s;
  std::vector<double> cost_trace;  // nonincreasing
  bool stalled = false;            // a step increased the cost beyond rounding
  int rounds = 0;
};

/// Alternating minimization baseline: closed-form MVDR w-step, then an
/// equality-constrained least-norm s-step with bisection on the power
/// multiplier.
AmResult alternating_minimization(const CovarianceSet& cov, const MatC& T, cxd kappa, double P_o,
                                  const AmOptions& opts = {});

}  // namespace stapsdr
