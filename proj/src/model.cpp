#include "stapsdr/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "stapsdr/linalg.hpp"

namespace stapsdr {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

VecC phase_ramp(int n, double step) {
  VecC out(n);
  for (int i = 0; i < n; ++i) {
    double ph = -kTwoPi * step * i;
    out(i) = cxd(std::cos(ph), std::sin(ph));
  }
  return out;
}
}  // namespace

double doppler_shift(const Vec3& velocity, double theta, double phi, double f_o) {
  Vec3 k(std::sin(phi) * std::sin(theta), std::sin(phi) * std::cos(theta), std::cos(phi));
  return 2.0 * f_o * velocity.dot(k) / kSpeedOfLight;
}

SteeringVectors steering(double theta, double phi, double f_d, const ScenarioConfig& cfg) {
  SteeringVectors sv;
  sv.f_d = f_d;
  sv.v = phase_ramp(cfg.L, f_d * cfg.T_p);
  double vartheta = cfg.d * std::sin(theta) * std::sin(phi) * cfg.f_o / kSpeedOfLight;
  sv.a = phase_ramp(cfg.M, vartheta);
  return sv;
}

ChannelMatrix channel_matrix(const VecC& v, const VecC& a, int N, ChannelMatrix::Kind kind,
                             int patch_index) {
  const int L = static_cast<int>(v.size());
  const int M = static_cast<int>(a.size());
  ChannelMatrix ch;
  ch.kind = kind;
  ch.patch_index = patch_index;
  ch.c = vec((a * v.transpose()).eval());  // v kron a, stacked as c(l*M+m) = v_l a_m
  ch.mat = MatC::Zero(static_cast<Eigen::Index>(N) * M * L, N);
  // v kron I_N kron a: row index (l, n, m), column n, value v_l a_m.
  for (int l = 0; l < L; ++l)
    for (int n = 0; n < N; ++n)
      for (int m = 0; m < M; ++m)
        ch.mat(static_cast<Eigen::Index>(l) * N * M + static_cast<Eigen::Index>(n) * M + m, n) =
            v(l) * a(m);
  return ch;
}

ChannelMatrix target_channel(const ScenarioConfig& cfg) {
  double f_d = doppler_shift(cfg.target.velocity, cfg.target.theta_t, cfg.target.phi_t, cfg.f_o);
  SteeringVectors sv = steering(cfg.target.theta_t, cfg.target.phi_t, f_d, cfg);
  return channel_matrix(sv.v, sv.a, cfg.N, ChannelMatrix::Kind::target);
}

std::vector<ClutterChannel> clutter_channels(const ScenarioConfig& cfg) {
  std::vector<ClutterChannel> out;
  out.reserve(cfg.clutter_patches.size());
  for (size_t q = 0; q < cfg.clutter_patches.size(); ++q) {
    const auto& p = cfg.clutter_patches[q];
    double f_c = doppler_shift(cfg.platform_velocity, p.theta_q, p.phi_q, cfg.f_o);
    SteeringVectors sv = steering(p.theta_q, p.phi_q, f_c, cfg);
    out.push_back({channel_matrix(sv.v, sv.a, cfg.N, ChannelMatrix::Kind::clutter,
                                  static_cast<int>(q)),
                   p.rbar_q, p.theta_q, p.phi_q});
  }
  return out;
}

MatC interference_covariance(const std::vector<InterfererSpec>& interferers,
                             const ScenarioConfig& cfg) {
  const int nml = cfg.nml();
  const int nl = cfg.N * cfg.L;
  MatC R = MatC::Zero(nml, nml);
  for (const auto& intf : interferers) {
    if (intf.correlation.rows() != nl || intf.correlation.cols() != nl)
      throw std::invalid_argument("interferer correlation must be NL x NL");
    SteeringVectors sv = steering(intf.theta_k, intf.phi_k, 0.0, cfg);
    MatC outer = sv.a * sv.a.adjoint();
    R += kron(intf.correlation, outer);
  }
  return hermitian_part(R);
}

MatC CovarianceSet::clutter_covariance(const VecC& s) const {
  const Eigen::Index nml = R_ni.rows();
  MatC R = MatC::Zero(nml, nml);
  for (const auto& cc : clutter) {
    VecC y = cc.channel.mat * s;
    R.noalias() += cc.rbar * (y * y.adjoint());
  }
  return R;
}

MatC CovarianceSet::undesired_covariance(const VecC& s) const {
  return R_ni + clutter_covariance(s);
}

CovarianceSet build_covariance_set(const ScenarioConfig& cfg) {
  CovarianceSet cov;
  cov.N = cfg.N;
  cov.R_n = cfg.noise_correlation.rows() ? cfg.noise_correlation
                                         : MatC::Identity(cfg.nml(), cfg.nml());
  cov.R_i = interference_covariance(cfg.interferers, cfg);
  cov.R_ni = cov.R_n + cov.R_i;
  cov.clutter = clutter_channels(cfg);
  return cov;
}

VecC SplitterPair::w_of(const VecC& b) const {
  if (b.size() != joint_dim()) throw std::invalid_argument("splitter: bad joint vector length");
  return b.head(nml());
}

VecC SplitterPair::s_of(const VecC& b) const {
  if (b.size() != joint_dim()) throw std::invalid_argument("splitter: bad joint vector length");
  return b.tail(N);
}

VecC SplitterPair::join(const VecC& w, const VecC& s) const {
  if (w.size() != nml() || s.size() != N)
    throw std::invalid_argument("splitter: bad component lengths");
  VecC b(joint_dim());
  b << w, s;
  return b;
}

MatR SplitterPair::psi_w() const {
  MatR P = MatR::Zero(nml(), joint_dim());
  P.leftCols(nml()).setIdentity();
  return P;
}

MatR SplitterPair::psi_s() const {
  MatR P = MatR::Zero(N, joint_dim());
  P.rightCols(N).setIdentity();
  return P;
}

MatC SplitterPair::expand_corner(const MatC& X) const {
  if (X.rows() != nml() || X.cols() != N)
    throw std::invalid_argument("expand_corner: X must be NML x N");
  MatC out = MatC::Zero(joint_dim(), joint_dim());
  out.topRightCorner(nml(), N) = X;
  return out;
}

SplitterPair splitters(int N, int M, int L) {
  if (N < 1 || M < 1 || L < 1) throw std::invalid_argument("splitters: dims must be >= 1");
  return SplitterPair{N, M, L};
}

}  // namespace stapsdr
