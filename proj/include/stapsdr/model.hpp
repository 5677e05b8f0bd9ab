#pragma once

#include <vector>

#include "stapsdr/scenario.hpp"
#include "stapsdr/types.hpp"

namespace stapsdr {

struct SteeringVectors {
  VecC v;         // length L Doppler steering
  VecC a;         // length M spatial steering
  double f_d;     // Doppler shift, Hz
};

/// Two-way Doppler shift seen from a relative velocity at (theta, phi):
/// 2 f_o v^T [sin(phi)sin(theta), sin(phi)cos(theta), cos(phi)] / c.
double doppler_shift(const Vec3& velocity, double theta, double phi, double f_o);

/// v_i = exp(-j 2 pi f_d (i-1) T_p), a_i = exp(-j 2 pi (i-1) vartheta),
/// vartheta = d sin(theta) sin(phi) f_o / c.
SteeringVectors steering(double theta, double phi, double f_d, const ScenarioConfig& cfg);

struct ChannelMatrix {
  enum class Kind { target, clutter };
  MatC mat;        // NML x N, equals v kron I_N kron a
  Kind kind = Kind::target;
  int patch_index = -1;  // q for clutter channels
  VecC c;          // v kron a, length ML; Gram identity: mat^H mat = ||c||^2 I_N
};

ChannelMatrix channel_matrix(const VecC& v, const VecC& a, int N,
                             ChannelMatrix::Kind kind = ChannelMatrix::Kind::target,
                             int patch_index = -1);

ChannelMatrix target_channel(const ScenarioConfig& cfg);

struct ClutterChannel {
  ChannelMatrix channel;
  double rbar;
  double azimuth = 0.0;
  double elevation = 0.0;
};

/// One channel per clutter patch, Doppler induced by platform motion only.
std::vector<ClutterChannel> clutter_channels(const ScenarioConfig& cfg);

/// R_i = sum_k R_{alpha,k} kron a_k a_k^H.
MatC interference_covariance(const std::vector<InterfererSpec>& interferers,
                             const ScenarioConfig& cfg);

struct CovarianceSet {
  MatC R_n;
  MatC R_i;
  MatC R_ni;  // R_n + R_i, exactly
  std::vector<ClutterChannel> clutter;
  int N = 1;

  /// Signal-dependent clutter covariance sum_q rbar_q (Gamma_q s)(Gamma_q s)^H.
  MatC clutter_covariance(const VecC& s) const;
  /// R_u(s) = R_ni + R_c(s).
  MatC undesired_covariance(const VecC& s) const;
};

CovarianceSet build_covariance_set(const ScenarioConfig& cfg);

/// Block selectors recovering w and s from the stacked b = [w; s].
struct SplitterPair {
  int N = 1, M = 1, L = 1;

  int nml() const { return N * M * L; }
  int joint_dim() const { return N * (M * L + 1); }

  VecC w_of(const VecC& b) const;
  VecC s_of(const VecC& b) const;
  VecC join(const VecC& w, const VecC& s) const;

  MatR psi_w() const;  // NML x J
  MatR psi_s() const;  // N x J

  /// Corner-block expansion Psi_W^T X Psi_S for an NML x N matrix X (the
  /// J x J matrix holding X in its upper-right corner).
  MatC expand_corner(const MatC& X) const;
};

SplitterPair splitters(int N, int M, int L);

}  // namespace stapsdr
