#include "stapsdr/extract.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "stapsdr/linalg.hpp"

namespace stapsdr {

namespace {
constexpr double kTiny = 1e-300;

/// Phase-normalize so the largest-modulus entry is real positive; ties broken
/// by the first such index.
VecC normalize_phase(const VecC& u) {
  Eigen::Index imax = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    double m = std::abs(u(i));
    if (m > best) {
      best = m;
      imax = i;
    }
  }
  if (best <= kTiny) return u;
  cxd phase = std::conj(u(imax)) / best;
  return phase * u;
}

}  // namespace

double original_cost(const VecC& w, const VecC& s, const CovarianceSet& cov) {
  double cost = (w.adjoint() * cov.R_ni * w)(0).real();
  for (const auto& cc : cov.clutter) {
    cxd coupling = (w.adjoint() * cc.channel.mat * s)(0);
    cost += cc.rbar * std::norm(coupling);
  }
  return cost;
}

RankBExtract extract(const SdrSolution& sol, const SdrProblem& prob, int B_count) {
  const int J = prob.joint_dim();
  if (B_count < 1 || B_count > J) throw std::invalid_argument("extract: B out of range");
  RankBExtract out;
  out.B_used = B_count;

  HermitianEig eig = hermitian_eig(sol.B);
  // Hermitian PSD solution: singular values are the eigenvalue magnitudes,
  // reported nonincreasing.
  out.singular_values.resize(J);
  VecC b_appx = VecC::Zero(J);
  for (int k = 0; k < J; ++k) {
    Eigen::Index idx = J - 1 - k;  // eigenvalues ascending
    double sigma = std::abs(eig.values(idx));
    out.singular_values(k) = sigma;
    if (k < B_count) b_appx += sigma * normalize_phase(eig.vectors.col(idx));
  }

  SplitterPair split = prob.split();
  VecC w = split.w_of(b_appx);
  VecC s = split.s_of(b_appx);
  out.w_raw = w;
  out.s_raw = s;
  out.raw_cost = original_cost(w, s, prob.cov);

  // Feasibility restoration: the phase correction goes on s, the magnitude
  // correction is split evenly so an exactly rank-one input round-trips, then
  // s is projected back into the power ball.
  cxd ws = (w.adjoint() * prob.T * s)(0);
  if (std::abs(ws) > 1e-12) {
    cxd c = prob.kappa / ws;
    double root = std::sqrt(std::abs(c));
    w *= root;
    s *= c / root;
  }
  double power = s.squaredNorm();
  if (power > prob.P_o) s *= std::sqrt(prob.P_o / power);

  out.w = w;
  out.s = s;
  out.capon_value = (w.adjoint() * prob.T * s)(0);
  out.capon_gap = std::abs(out.capon_value - prob.kappa);
  out.power_used = s.squaredNorm();
  out.original_cost = original_cost(w, s, prob.cov);
  return out;
}

double subspace_cosine(const MatC& X, const MatC& Y) {
  double nx = X.norm();
  double ny = Y.norm();
  if (nx == 0.0 || ny == 0.0)
    throw std::invalid_argument("subspace_cosine: zero matrix input");
  return std::abs((X.adjoint() * Y).trace()) / (nx * ny);
}

AdaptedPatternGrid adapted_pattern(const VecC& w, const VecC& s, const PatternGridSpec& grid,
                                   double phi, const ScenarioConfig& cfg) {
  if (w.size() != cfg.nml() || s.size() != cfg.N)
    throw std::invalid_argument("adapted_pattern: dimension mismatch");
  if (w.norm() == 0.0 || s.norm() == 0.0)
    throw std::invalid_argument("adapted_pattern: zero beamformer or signal");

  AdaptedPatternGrid out;
  out.elevation = phi;
  double fmin = grid.doppler_min, fmax = grid.doppler_max;
  if (fmin == fmax) {  // default to the unambiguous Doppler span of the PRI
    fmax = 0.5 / cfg.T_p;
    fmin = -fmax;
  }
  out.doppler_axis.setLinSpaced(grid.doppler_bins, fmin, fmax);
  out.azimuth_axis.setLinSpaced(grid.azimuth_bins, grid.azimuth_min, grid.azimuth_max);
  out.values.resize(grid.doppler_bins, grid.azimuth_bins);

  for (int j = 0; j < grid.azimuth_bins; ++j) {
    SteeringVectors sv = steering(out.azimuth_axis(j), phi, 0.0, cfg);
    for (int i = 0; i < grid.doppler_bins; ++i) {
      VecC v = steering(0.0, 0.0, out.doppler_axis(i), cfg).v;
      // w^H (v kron s kron a), cell independent of every other cell
      cxd acc = 0.0;
      Eigen::Index idx = 0;
      for (int l = 0; l < cfg.L; ++l)
        for (int n = 0; n < cfg.N; ++n)
          for (int m = 0; m < cfg.M; ++m, ++idx)
            acc += std::conj(w(idx)) * v(l) * s(n) * sv.a(m);
      out.values(i, j) = std::norm(acc);
    }
  }
  out.peak_value = out.values.maxCoeff(&out.peak_doppler_idx, &out.peak_azimuth_idx);
  return out;
}

namespace {

struct SStepResult {
  VecC s;
  bool ok = false;
};

/// min s^H Q s subject to a^H s = kappa and ||s||^2 <= P_o, worked in the
/// eigenbasis of Q: s(zeta) = eta(zeta) (Q + zeta I)^{-1} a with ||s(zeta)||
/// nonincreasing in zeta, so a bisection on the power multiplier suffices.
SStepResult constrained_s_step(const MatC& Q, const VecC& a, cxd kappa, double P_o) {
  SStepResult res;
  const Eigen::Index n = a.size();
  if (a.norm() <= kTiny) return res;

  HermitianEig eig = hermitian_eig(Q);
  VecR q = eig.values.cwiseMax(0.0);
  VecC ap = eig.vectors.adjoint() * a;
  double q_scale = std::max(q.maxCoeff(), 0.0);

  // Zero-curvature subspace carries an exactly cost-free solution.
  VecC a_null = VecC::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (q(i) <= kRankTol * q_scale) a_null(i) = ap(i);
  if (a_null.norm() > kRankTol * ap.norm()) {
    VecC sp = (kappa / a_null.squaredNorm()) * a_null;
    if (sp.squaredNorm() <= P_o) {
      res.s = eig.vectors * sp;
      res.ok = true;
      return res;
    }
  }

  auto spectral = [&](double zeta) {
    VecC x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = ap(i) / (q(i) + zeta);
    cxd denom = (ap.adjoint() * x)(0);
    return VecC((kappa / denom) * x);
  };
  auto norm2_at = [&](double zeta) { return spectral(zeta).squaredNorm(); };

  // Feasibility floor: the min-norm Capon solution has norm |kappa|/||a||.
  if (std::norm(kappa) / a.squaredNorm() > P_o * (1.0 + 1e-12)) return res;

  double zeta_lo = std::max(q_scale, 1.0) * 1e-30;
  if (norm2_at(zeta_lo) <= P_o) {
    res.s = eig.vectors * spectral(zeta_lo);
    res.ok = true;
    return res;
  }
  double zeta_hi = std::max(1.0, q_scale);
  while (norm2_at(zeta_hi) > P_o && zeta_hi < 1e30) zeta_hi *= 10.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (zeta_lo + zeta_hi);
    if (norm2_at(mid) > P_o)
      zeta_lo = mid;
    else
      zeta_hi = mid;
    if (zeta_hi - zeta_lo <= 1e-12 * zeta_hi) break;
  }
  res.s = eig.vectors * spectral(zeta_hi);
  res.ok = true;
  return res;
}

}  // namespace

AmResult alternating_minimization(const CovarianceSet& cov, const MatC& T, cxd kappa, double P_o,
                                  const AmOptions& opts) {
  const Eigen::Index nml = T.rows();
  const Eigen::Index n = T.cols();
  AmResult res;

  // Deterministic start: full-power flat signal.
  VecC s = VecC::Constant(n, cxd(std::sqrt(P_o / static_cast<double>(n)), 0.0));
  VecC w = VecC::Zero(nml);

  auto w_step = [&](const VecC& sig) {
    MatC Ru = cov.undesired_covariance(sig);
    VecC ts = T * sig;
    VecC x = Eigen::LDLT<MatC>(Ru).solve(ts);
    cxd denom = (ts.adjoint() * x)(0);
    if (!x.allFinite() || std::abs(denom) <= kTiny) {
      MatC ridge = Ru + opts.ridge * std::max(Ru.norm(), 1.0) * MatC::Identity(nml, nml);
      x = Eigen::LDLT<MatC>(ridge).solve(ts);
      denom = (ts.adjoint() * x)(0);
    }
    return VecC(std::conj(kappa) * x / denom);
  };

  double prev = std::numeric_limits<double>::infinity();
  for (int round = 1; round <= opts.max_rounds; ++round) {
    w = w_step(s);

    // s-step data: Q(w) = sum_q rbar_q (Gamma_q^H w)(Gamma_q^H w)^H, a = T^H w.
    MatC Qw = MatC::Zero(n, n);
    for (const auto& cc : cov.clutter) {
      VecC g = cc.channel.mat.adjoint() * w;
      Qw.noalias() += cc.rbar * (g * g.adjoint());
    }
    VecC a = T.adjoint() * w;
    SStepResult step = constrained_s_step(Qw, a, kappa, P_o);
    if (!step.ok) {
      res.stalled = true;
      break;
    }
    s = step.s;

    double cost = original_cost(w, s, cov);
    res.cost_trace.push_back(cost);
    res.rounds = round;
    if (cost > prev * (1.0 + 1e-12)) {
      res.stalled = true;
      break;
    }
    if (std::isfinite(prev) && prev - cost <= opts.tol * std::max(prev, kTiny)) break;
    prev = cost;
  }
  res.w = w;
  res.s = s;
  return res;
}

}  // namespace stapsdr
