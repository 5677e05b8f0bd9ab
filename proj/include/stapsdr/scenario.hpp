#pragma once

#include <string>
#include <vector>

#include "stapsdr/types.hpp"

namespace stapsdr {

struct TargetSpec {
  double theta_t = 0.0;  // azimuth, radians
  double phi_t = 0.0;    // elevation, radians
  Vec3 velocity = Vec3::Zero();
  cxd rho_t{1.0, 0.0};
};

struct InterfererSpec {
  double theta_k = 0.0;
  double phi_k = 0.0;
  MatC correlation;  // NL x NL Hermitian PSD
};

struct ClutterPatchSpec {
  double theta_q = 0.0;
  double phi_q = 0.0;
  double rbar_q = 0.0;  // combined reflectivity power, >= 0
};

/// Full scenario parameterization: radar geometry, target, interference,
/// clutter field, noise correlation and the two design constraints.
struct ScenarioConfig {
  int N = 1;  // fast-time samples per pulse
  int M = 1;  // array elements
  int L = 1;  // pulses per CPI
  double f_o = 1e9;        // carrier, Hz
  double bandwidth = 5e7;  // Hz
  double d = 0.15;         // element spacing, m
  double T_p = 1e-4;       // pulse repetition interval, s
  Vec3 platform_velocity = Vec3::Zero();
  TargetSpec target;
  std::vector<InterfererSpec> interferers;
  std::vector<ClutterPatchSpec> clutter_patches;
  MatC noise_correlation;  // NML x NML Hermitian PSD
  cxd kappa{1.0, 0.0};
  double P_o = 1.0;

  int nml() const { return N * M * L; }
  int joint_dim() const { return N * (M * L + 1); }

  /// Enforce the structural invariants: dims >= 1, P_o > 0, kappa != 0,
  /// rbar_q >= 0, correlation matrices of the right shape, Hermitian within
  /// 1e-10 relative (symmetrized with a warning above that) and PSD.
  /// Throws std::invalid_argument on violation; warnings go through warn_fn
  /// (stderr when null).
  void validate(void (*warn_fn)(const std::string&) = nullptr);
};

/// scale * Toeplitz(exp(rate * |i-j|)). Negative rates give the usual decaying
/// correlation; positive rates are representable but generally not PSD, which
/// validation will reject.
MatC exp_toeplitz(double rate, double scale, int size);

ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig scenario_from_json(const std::string& json_text);
std::string scenario_to_json(const ScenarioConfig& cfg);
void save_scenario(const ScenarioConfig& cfg, const std::string& path);

}  // namespace stapsdr
