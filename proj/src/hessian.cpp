#include "stapsdr/hessian.hpp"

#include <stdexcept>

#include "stapsdr/linalg.hpp"

namespace stapsdr {

namespace {

HessianBlock from_corner(MatC corner, const MatC* R_ni, HessianScope scope, int patch_index,
                         double scale) {
  const Eigen::Index nml = corner.rows();
  const Eigen::Index n = corner.cols();
  HessianBlock blk;
  blk.scope = scope;
  blk.patch_index = patch_index;
  blk.scale = scale;
  blk.full_block = MatC::Zero(nml + n, nml + n);
  blk.full_block.topRightCorner(nml, n) = corner;
  blk.full_block.bottomLeftCorner(n, nml) = corner.adjoint();
  if (R_ni) blk.full_block.topLeftCorner(nml, nml) = *R_ni;
  blk.corner = std::move(corner);
  return blk;
}

}  // namespace

HessianBlock per_patch_hessian(const VecC& w, const VecC& s, const ChannelMatrix& gamma,
                               double rbar) {
  cxd coupling = (w.adjoint() * gamma.mat * s)(0);
  MatC corner = (0.5 * rbar * std::conj(coupling)) * gamma.mat;
  double scale = 0.5 * rbar * (gamma.mat.adjoint() * w).norm() * s.norm() * gamma.mat.norm();
  return from_corner(std::move(corner), nullptr, HessianScope::per_patch, gamma.patch_index,
                     scale);
}

HessianBlock clutter_hessian(const VecC& w, const VecC& s, const CovarianceSet& cov) {
  const Eigen::Index nml = cov.R_ni.rows();
  MatC corner = MatC::Zero(nml, cov.N);
  double scale = 0.0;
  for (const auto& cc : cov.clutter) {
    cxd coupling = (w.adjoint() * cc.channel.mat * s)(0);
    corner.noalias() += (0.5 * cc.rbar * std::conj(coupling)) * cc.channel.mat;
    scale += 0.5 * cc.rbar * (cc.channel.mat.adjoint() * w).norm() * s.norm() *
             cc.channel.mat.norm();
  }
  return from_corner(std::move(corner), nullptr, HessianScope::clutter_total, -1, scale);
}

HessianBlock objective_hessian(const VecC& w, const VecC& s, const CovarianceSet& cov) {
  HessianBlock blk = clutter_hessian(w, s, cov);
  MatC corner = blk.corner;
  return from_corner(std::move(corner), &cov.R_ni, HessianScope::objective, -1,
                     blk.scale + cov.R_ni.norm());
}

const char* to_string(DefinitenessVerdict v) {
  switch (v) {
    case DefinitenessVerdict::indefinite: return "indefinite";
    case DefinitenessVerdict::psd: return "psd";
    case DefinitenessVerdict::nsd: return "nsd";
    case DefinitenessVerdict::zero: return "zero";
  }
  return "unknown";
}

IndefinitenessCertificate certify(const HessianBlock& block, double tol) {
  if (tol <= 0.0) throw std::invalid_argument("certify: tol must be positive");
  IndefinitenessCertificate cert;
  VecR ev = hermitian_eigenvalues(block.full_block);
  cert.min_eig = ev.minCoeff();
  cert.max_eig = ev.maxCoeff();
  double scale = std::max(ev.cwiseAbs().maxCoeff(), block.scale);
  double thresh = tol * scale;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > thresh)
      ++cert.positive_count;
    else if (ev(i) < -thresh)
      ++cert.negative_count;
    else
      ++cert.zero_count;
  }
  if (cert.positive_count > 0 && cert.negative_count > 0)
    cert.verdict = DefinitenessVerdict::indefinite;
  else if (cert.positive_count > 0)
    cert.verdict = DefinitenessVerdict::psd;
  else if (cert.negative_count > 0)
    cert.verdict = DefinitenessVerdict::nsd;
  else
    cert.verdict = DefinitenessVerdict::zero;

  cert.corner_norm = block.corner.norm();
  double corner_scale = std::max(std::max(block.full_block.norm(), block.scale), 1e-300);
  cert.nulling_detected = cert.corner_norm <= tol * corner_scale;

  // Theorem-1 conditions for the [[A, B], [B^H, 0]] partition.
  cert.cond_a1 = true;                    // C = 0 is trivially PSD
  cert.cond_a2 = cert.nulling_detected;   // B 0^dagger 0 = 0, so A2 <=> B = 0
  const Eigen::Index nml = block.corner.rows();
  MatC A = block.full_block.topLeftCorner(nml, nml);
  if (A.norm() == 0.0) {
    cert.cond_a3 = true;
  } else {
    VecR aev = hermitian_eigenvalues(A);
    cert.cond_a3 = aev.minCoeff() >= -tol * std::max(aev.cwiseAbs().maxCoeff(), 1e-300);
  }
  // Contraction form: B = A^{1/2} X 0^{1/2} forces B = 0; residual is ||B||.
  cert.range_inclusion_residual = cert.corner_norm / corner_scale;
  return cert;
}

double per_patch_cost(const VecC& w, const VecC& s, const ChannelMatrix& gamma, double rbar) {
  cxd coupling = (w.adjoint() * gamma.mat * s)(0);
  return rbar * std::norm(coupling);
}

}  // namespace stapsdr
