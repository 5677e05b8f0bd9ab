#include "stapsdr/sdr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <stdexcept>
#include <utility>

#include "stapsdr/linalg.hpp"

namespace stapsdr {

namespace {
constexpr double kTiny = 1e-300;
}

cxd SdrProblem::capon_value(const MatC& B) const {
  return (block2(B).adjoint() * T).trace();
}

VecC SdrProblem::apply_cv(const VecC& x) const {
  if (factors.cols() == 0) return VecC::Zero(x.size());
  return factors * (factors.adjoint() * x);
}

double SdrProblem::objective(const MatC& B, ObjectiveMode mode) const {
  double linear = (R_ni * block1(B)).trace().real();
  VecC beta2 = vec(block2(B).eval());
  if (factors.cols() == 0) return linear;
  VecC g = factors.adjoint() * beta2;  // length Q
  if (mode == ObjectiveMode::factor_quadratic) return linear + g.squaredNorm();
  // Norm-of-factor route: ||C_V^{1/2} beta2||^2 through the Gram eigenbasis.
  MatC gram = factors.adjoint() * factors;
  HermitianEig eig = hermitian_eig(gram);
  double quad = 0.0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    cxd proj = (eig.vectors.col(i).adjoint() * g)(0);
    quad += std::norm(proj);
  }
  return linear + quad;
}

SdrProblem assemble(const CovarianceSet& cov, const ChannelMatrix& target, cxd kappa, double P_o,
                    int N, int M, int L) {
  SdrProblem prob;
  prob.N = N;
  prob.M = M;
  prob.L = L;
  prob.T = target.mat;
  prob.R_ni = cov.R_ni;
  prob.kappa = kappa;
  prob.P_o = P_o;
  prob.cov = cov;
  const Eigen::Index vdim = static_cast<Eigen::Index>(prob.nml()) * N;
  const Eigen::Index Q = static_cast<Eigen::Index>(cov.clutter.size());
  prob.factors.resize(vdim, Q);
  prob.rbar.resize(Q);
  for (Eigen::Index q = 0; q < Q; ++q) {
    const auto& cc = cov.clutter[static_cast<size_t>(q)];
    prob.factors.col(q) = std::sqrt(cc.rbar) * vec(cc.channel.mat);
    prob.rbar(q) = cc.rbar;
  }
  return prob;
}

SdrProblem assemble(const ScenarioConfig& cfg) {
  CovarianceSet cov = build_covariance_set(cfg);
  ChannelMatrix target = target_channel(cfg);
  return assemble(cov, target, cfg.kappa, cfg.P_o, cfg.N, cfg.M, cfg.L);
}

SlaterReport slater_margin(const SdrProblem& prob) {
  SlaterReport rep;
  double t_norm2 = prob.T.squaredNorm();
  if (t_norm2 <= 0.0) throw std::invalid_argument("slater_margin: target channel is zero");
  rep.margin = prob.P_o - std::norm(prob.kappa) / t_norm2;
  rep.satisfied = rep.margin > 0.0;
  if (!rep.satisfied) return rep;
  // Explicit strictly feasible point: Z1 = I, corner (kappa^*/||T||_F^2) T,
  // Z3 = ((P_o - eps)/||T||_F^2) T^H T with eps = margin/2.
  double eps = 0.5 * rep.margin;
  const int nml = prob.nml();
  const int n = prob.N;
  rep.witness = MatC::Zero(nml + n, nml + n);
  rep.witness.topLeftCorner(nml, nml).setIdentity();
  rep.witness.topRightCorner(nml, n) = (std::conj(prob.kappa) / t_norm2) * prob.T;
  rep.witness.bottomLeftCorner(n, nml) = rep.witness.topRightCorner(nml, n).adjoint().eval();
  rep.witness.bottomRightCorner(n, n) =
      ((prob.P_o - eps) / t_norm2) * (prob.T.adjoint() * prob.T);
  return rep;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::max_iters: return "max_iters";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

namespace {

/// Fixed-matrix projection kit for the coupled (beta2, g) block:
/// minimize ||beta2 - a||^2 + ||g - b||^2 over g = Phi^H beta2 and
/// tau^H beta2 = kappa^*, through (I + Phi Phi^H)^{-1} held by a one-time
/// Q x Q capacitance factorization.
struct CouplingProjector {
  const MatC* phi = nullptr;
  Eigen::LLT<MatC> cap;  // I_Q + Phi^H Phi
  VecC minv_tau;
  double tmt = 1.0;

  void init(const MatC& factors, const VecC& tau) {
    phi = &factors;
    if (factors.cols() > 0) {
      MatC shifted = factors.adjoint() * factors;
      shifted.diagonal().array() += 1.0;
      cap.compute(shifted);
    }
    minv_tau = apply_minv(tau);
    tmt = (tau.adjoint() * minv_tau)(0).real();
  }
  VecC apply_minv(const VecC& x) const {
    if (!phi || phi->cols() == 0) return x;
    return x - (*phi) * cap.solve(phi->adjoint() * x);
  }
  /// Returns beta2; g and the Capon multiplier m through out-params.
  VecC project(const VecC& a, const VecC& b, const VecC& tau, cxd kappa_conj, VecC& g_out,
               cxd& m_out) const {
    VecC rhs = a;
    if (phi && phi->cols() > 0) rhs += (*phi) * b;
    VecC base = apply_minv(rhs);
    m_out = (kappa_conj - (tau.adjoint() * base)(0)) / tmt;
    VecC beta2 = base + m_out * minv_tau;
    g_out = (phi && phi->cols() > 0) ? VecC((*phi).adjoint() * beta2) : VecC(0);
    return beta2;
  }
};

}  // namespace

namespace {

SdrSolution solve_splitting(const SdrProblem& prob, const SolveOptions& opts,
                            const SlaterReport& slater) {
  const int nml = prob.nml();
  const int n = prob.N;
  const int J = prob.joint_dim();
  const Eigen::Index Q = prob.factors.cols();

  // Block-diagonal rescaling b = S b_hat keeps the iterate blocks O(1):
  // alpha_s matches the power bound, alpha_w the Capon-matched filter gain.
  const double alpha_s = std::sqrt(prob.P_o);
  const double t_col = std::sqrt(std::max(prob.T.squaredNorm() / n, kTiny));
  const double alpha_w = std::max(std::abs(prob.kappa) / (alpha_s * t_col), kTiny);
  const double nu = std::max(prob.R_ni.norm() / std::sqrt(static_cast<double>(nml)), kTiny);

  const MatC R_hat = prob.R_ni / nu;
  const MatC phi_hat = prob.factors * (alpha_s / std::sqrt(nu));
  const cxd kappa_hat = prob.kappa / (alpha_w * alpha_s);
  const VecC tau = vec(prob.T);

  // The clutter quadratic is carried by an exact epigraph block
  // E = [[I_Q, g], [g^H, t]] >= 0 with g = Phi^H beta2 and objective term t,
  // so the smooth side stays linear and every projection matrix is fixed.
  CouplingProjector proj;
  proj.init(phi_hat, tau);
  const Eigen::Index JE = Q + 1;

  double rho = opts.rho0;

  MatC Zb = MatC::Zero(J, J);
  MatC Ze = MatC::Zero(JE, JE);
  Ze.topLeftCorner(Q, Q).setIdentity();
  if (opts.warm_start_slater && slater.satisfied) {
    Zb.topLeftCorner(nml, nml) = slater.witness.topLeftCorner(nml, nml) / (alpha_w * alpha_w);
    Zb.topRightCorner(nml, n) = slater.witness.topRightCorner(nml, n) / (alpha_w * alpha_s);
    Zb.bottomLeftCorner(n, nml) = Zb.topRightCorner(nml, n).adjoint().eval();
    Zb.bottomRightCorner(n, n) = slater.witness.bottomRightCorner(n, n) / (alpha_s * alpha_s);
    VecC g0 = phi_hat.adjoint() * vec(Zb.topRightCorner(nml, n).eval());
    Ze.topRightCorner(Q, 1) = g0;
    Ze.bottomLeftCorner(1, Q) = g0.adjoint();
    Ze(Q, Q) = g0.squaredNorm() + 1.0;
  }
  MatC Ub = MatC::Zero(J, J), Ue = MatC::Zero(JE, JE);
  MatC B = MatC::Zero(J, J), E = MatC::Zero(JE, JE);

  double lambda_hat = 0.0;
  cxd mu_mult = 0.0;  // rho * projection multiplier, converges to mu_hat^*

  SdrSolution sol;
  sol.nml = nml;
  sol.n = n;
  sol.status = SolveStatus::max_iters;

  const double alpha = opts.over_relaxation;
  double r_primal = 0.0, r_dual = 0.0, r_capon = 0.0, r_power = 0.0;
  int iter = 0;
  for (iter = 1; iter <= opts.max_iters; ++iter) {
    MatC Vb = Zb - Ub;
    MatC Ve = Ze - Ue;

    // Affine-side update: linear objective drift plus exact projections.
    B.topLeftCorner(nml, nml) = Vb.topLeftCorner(nml, nml) - R_hat / rho;
    VecC a = vec(Vb.topRightCorner(nml, n).eval());
    VecC b_g = Ve.topRightCorner(Q, 1);
    VecC g;
    cxd m = 0.0;
    VecC beta2 = proj.project(a, b_g, tau, std::conj(kappa_hat), g, m);
    mu_mult = rho * m;
    B.topRightCorner(nml, n) = unvec(beta2, nml, n);
    B.bottomLeftCorner(n, nml) = B.topRightCorner(nml, n).adjoint().eval();
    double tr_v3 = Vb.bottomRightCorner(n, n).trace().real();
    double theta = std::max(0.0, (tr_v3 - 1.0) / n);
    B.bottomRightCorner(n, n) = Vb.bottomRightCorner(n, n);
    B.bottomRightCorner(n, n).diagonal().array() -= theta;
    lambda_hat = rho * theta;

    E.topLeftCorner(Q, Q).setIdentity();
    E.topRightCorner(Q, 1) = g;
    E.bottomLeftCorner(1, Q) = g.adjoint();
    E(Q, Q) = Ve(Q, Q).real() - 1.0 / rho;

    // Cone-side update with over-relaxation, then the dual step.
    MatC Br = alpha * B + (1.0 - alpha) * Zb;
    MatC Er = alpha * E + (1.0 - alpha) * Ze;
    MatC Zb_prev = std::move(Zb);
    MatC Ze_prev = std::move(Ze);
    Zb = psd_project(Br + Ub, opts.psd_via_real_embedding);
    Ze = psd_project(Er + Ue, opts.psd_via_real_embedding);
    Ub += Br - Zb;
    Ue += Er - Ze;

    r_primal = std::hypot((B - Zb).norm(), (E - Ze).norm());
    r_dual = rho * std::hypot((Zb - Zb_prev).norm(), (Ze - Ze_prev).norm());
    r_capon = std::abs((Zb.topRightCorner(nml, n).adjoint() * prob.T).trace() - kappa_hat);
    r_power = std::max(0.0, Zb.bottomRightCorner(n, n).trace().real() - 1.0);
    // Consensus residuals scale with the iterate, constraint residuals with
    // their own right-hand sides.
    double scale = 1.0 + std::hypot(B.norm(), E.norm());
    bool converged = r_primal < opts.tol * scale && r_dual < opts.tol * scale &&
                     r_capon < opts.tol * (1.0 + std::abs(kappa_hat)) &&
                     r_power < opts.tol * 2.0;
    if (converged) {
      sol.status = SolveStatus::optimal;
      break;
    }
    if (B.norm() > 1e9) {
      sol.status = SolveStatus::infeasible;
      break;
    }

    if (opts.adaptive_rho && iter % 50 == 0) {
      if (r_primal > 10.0 * r_dual && rho < 1e10) {
        rho *= 2.0;
        Ub *= 0.5;
        Ue *= 0.5;
      } else if (r_dual > 10.0 * r_primal && rho > 1e-8) {
        rho *= 0.5;
        Ub *= 2.0;
        Ue *= 2.0;
      }
    }
  }
  sol.iterations = std::min(iter, opts.max_iters);
  MatC Z = Zb;
  MatC U = Ub;
  cxd c_mult = mu_mult;

  // Map the scaled iterate and running multipliers back to problem scale.
  sol.B = MatC(J, J);
  sol.B.topLeftCorner(nml, nml) = (alpha_w * alpha_w) * Z.topLeftCorner(nml, nml);
  sol.B.topRightCorner(nml, n) = (alpha_w * alpha_s) * Z.topRightCorner(nml, n);
  sol.B.bottomLeftCorner(n, nml) = sol.B.topRightCorner(nml, n).adjoint().eval();
  sol.B.bottomRightCorner(n, n) = (alpha_s * alpha_s) * Z.bottomRightCorner(n, n);
  sol.B = hermitian_part(sol.B);

  sol.lambda = nu * (alpha_w * alpha_w) / (prob.P_o) * lambda_hat;
  cxd mu_hat = std::conj(c_mult);
  sol.mu = nu * (alpha_w / alpha_s) * mu_hat;

  MatC sigma_hat = -rho * U;
  sol.Sigma = MatC(J, J);
  sol.Sigma.topLeftCorner(nml, nml) = nu * sigma_hat.topLeftCorner(nml, nml);
  sol.Sigma.topRightCorner(nml, n) =
      nu * (alpha_w / alpha_s) * sigma_hat.topRightCorner(nml, n);
  sol.Sigma.bottomLeftCorner(n, nml) = sol.Sigma.topRightCorner(nml, n).adjoint().eval();
  sol.Sigma.bottomRightCorner(n, n) =
      nu * (alpha_w * alpha_w) / (alpha_s * alpha_s) * sigma_hat.bottomRightCorner(n, n);
  sol.Sigma = hermitian_part(sol.Sigma);

  sol.objective = prob.objective(sol.B, opts.objective_mode);
  sol.objective_alt = prob.objective(sol.B, opts.objective_mode == ObjectiveMode::factor_quadratic
                                                ? ObjectiveMode::norm_of_factor
                                                : ObjectiveMode::factor_quadratic);

  sol.residuals.capon = std::abs(prob.capon_value(sol.B) - prob.kappa);
  sol.residuals.power = prob.block3(sol.B).trace().real() - prob.P_o;
  sol.residuals.psd_violation = std::max(0.0, -min_eigenvalue(sol.B));
  double hat_scale = 1.0 + B.norm();
  sol.residuals.primal = r_primal / hat_scale;
  sol.residuals.dual = r_dual / hat_scale;

  VecC beta2 = vec(prob.block2(sol.B).eval());
  VecC cv_beta2 = prob.apply_cv(beta2);
  VecC sigma2 = vec(sol.Sigma2().eval());
  VecC stat = cv_beta2 - sigma2 - std::conj(sol.mu) * tau;
  sol.residuals.stationarity =
      stat.norm() / (1.0 + cv_beta2.norm() + sigma2.norm() + std::abs(sol.mu) * tau.norm());
  double slack = std::abs((sol.Sigma * sol.B).trace().real());
  sol.residuals.slackness = slack / (1.0 + sol.Sigma.norm() * sol.B.norm());
  return sol;
}

/// Path-following Newton on the exact reduced form. With B1 eliminated by its
/// minimal PSD completion B1 = P S^{-1} P^H (P = B2, S = B3; the structure CS1
/// and the rank lemma force at optimality) the relaxation becomes the smooth
/// convex program
///   min  tr(R P S^{-1} P^H) + sum_q rbar_q |tr(Gamma_q^H P)|^2
///   s.t. tr(P^H T) = kappa,  tr(S) <= P_o,  S > 0,
/// handled with log barriers on S and the power slack. Dual recovery:
/// lambda = mu_barrier / (P_o - tr S), mu from the Capon multiplier of the
/// Newton KKT system.
SdrSolution solve_barrier(const SdrProblem& prob, const SolveOptions& opts,
                          const SlaterReport& slater) {
  const int nml = prob.nml();
  const int n = prob.N;
  const int J = prob.joint_dim();
  const Eigen::Index np = static_cast<Eigen::Index>(nml) * n;
  const Eigen::Index dim = 2 * np + static_cast<Eigen::Index>(n) * n;

  // Work in scaled units so P, S are O(1): P = alpha_p P_hat, S = alpha_s^2 S_hat.
  const double alpha_s2 = prob.P_o;
  const double t_col = std::sqrt(std::max(prob.T.squaredNorm() / n, kTiny));
  const double alpha_p = std::max(std::abs(prob.kappa) / t_col, kTiny);  // P ~ w s^H scale

  const MatC& R = prob.R_ni;
  const MatC& T = prob.T;
  const cxd kappa_hat = prob.kappa / alpha_p;
  const double obj_scale = std::max(alpha_p * alpha_p / alpha_s2 * R.norm(), kTiny);

  // Hermitian basis for S: diagonal, then (re, im) pairs above the diagonal.
  std::vector<std::pair<int, int>> s_pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) s_pairs.emplace_back(i, j);

  auto pack = [&](const MatC& Gp, const MatC& Gs, VecR& out) {
    // Coordinates of a differential df = 2 Re<Gp, dP> + Re<Gs, dS>.
    for (Eigen::Index k = 0; k < np; ++k) {
      out(2 * k) = 2.0 * Gp(k % nml, k / nml).real();
      out(2 * k + 1) = 2.0 * Gp(k % nml, k / nml).imag();
    }
    Eigen::Index o = 2 * np;
    for (int i = 0; i < n; ++i) out(o++) = Gs(i, i).real();
    for (auto [i, j] : s_pairs) {
      out(o++) = 2.0 * Gs(i, j).real();  // dS = E_ij + E_ji
      out(o++) = 2.0 * Gs(i, j).imag();  // dS = i (E_ij - E_ji)
    }
  };
  auto unpack_dir = [&](const VecR& x, MatC& dP, MatC& dS) {
    for (Eigen::Index k = 0; k < np; ++k)
      dP(k % nml, k / nml) = cxd(x(2 * k), x(2 * k + 1));
    dS.setZero();
    Eigen::Index o = 2 * np;
    for (int i = 0; i < n; ++i) dS(i, i) = x(o++);
    for (auto [i, j] : s_pairs) {
      double re = x(o++), im = x(o++);
      dS(i, j) = cxd(re, im);
      dS(j, i) = cxd(re, -im);
    }
  };

  // Strictly feasible start, Capon-exact for any margin sign.
  MatC P = (std::conj(kappa_hat) / T.squaredNorm()) * T;
  MatC S = MatC::Identity(n, n) * (0.5 / n);  // tr = 1/2 of the scaled bound
  if (slater.satisfied && opts.warm_start_slater) {
    P = slater.witness.topRightCorner(nml, n) / alpha_p;
    S = slater.witness.bottomRightCorner(n, n) / alpha_s2;
  }

  VecR rb = prob.rbar;
  std::vector<MatC> gammas;
  gammas.reserve(prob.cov.clutter.size());
  for (const auto& cc : prob.cov.clutter) gammas.push_back(cc.channel.mat);

  auto coupling = [&](const MatC& Pm, Eigen::Index q) {
    return (gammas[static_cast<size_t>(q)].adjoint() * Pm).trace();
  };
  // Scaled objective: the rbar factors absorb alpha_p^2 / obj_scale.
  VecR rb_hat(rb.size());
  for (Eigen::Index q = 0; q < rb.size(); ++q)
    rb_hat(q) = rb(q) * alpha_p * alpha_p / obj_scale;
  const MatC R_hat = R * (alpha_p * alpha_p / (alpha_s2 * obj_scale));

  auto objective_hat = [&](const MatC& Pm, const Eigen::LLT<MatC>& llt) {
    MatC xph = llt.solve(Pm.adjoint().eval());  // S^{-1} P^H
    double v = (R_hat * Pm * xph).trace().real();
    for (Eigen::Index q = 0; q < rb.size(); ++q) v += rb_hat(q) * std::norm(coupling(Pm, q));
    return v;
  };
  auto phi_value = [&](const MatC& Pm, const MatC& Sm, double mu, bool& ok) {
    Eigen::LLT<MatC> llt(Sm);
    double slack = 1.0 - Sm.trace().real();
    if (llt.info() != Eigen::Success || slack <= 0.0) {
      ok = false;
      return 0.0;
    }
    ok = true;
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i).real());
    return objective_hat(Pm, llt) - mu * logdet - mu * std::log(slack);
  };

  SdrSolution sol;
  sol.nml = nml;
  sol.n = n;
  sol.status = SolveStatus::max_iters;

  int newton_steps = 0;
  cxd capon_mult = 0.0;
  double mu = 1.0;
  {
    Eigen::LLT<MatC> llt(S);
    mu = std::max((objective_hat(P, llt) + 1.0) / (n + 1.0), 1e-3);
  }
  const double mu_floor_abs = 1e-13;
  bool converged = false;

  VecR grad(dim), col(dim);
  MatC dP(nml, n), dS(n, n);

  // First-order optimality score of a stage, in scaled units; the returned
  // iterate is the best-scoring stage, which guards the dual quality when a
  // rank-deficient optimal S makes deep centering numerically fruitless.
  auto stage_score = [&](const MatC& Pm, const MatC& Sm, double mu_now,
                         cxd m_now) -> std::pair<double, double> {
    Eigen::LLT<MatC> llt(Sm);
    if (llt.info() != Eigen::Success) return {1e300, 1e300};
    double slack = 1.0 - Sm.trace().real();
    if (slack <= 0.0) return {1e300, 1e300};
    double lam = mu_now / slack;
    cxd mu_tilde_c = std::conj(-0.5 * m_now);  // mu^* in scaled units
    MatC B1 = Pm * llt.solve(Pm.adjoint().eval());
    MatC Sigma2 = -mu_tilde_c * T;
    for (Eigen::Index q = 0; q < rb.size(); ++q)
      Sigma2 += rb_hat(q) * coupling(Pm, q) * gammas[static_cast<size_t>(q)];
    auto rel = [](double a, double s) { return a / (1.0 + s); };
    double cs1 = rel((B1 * R_hat + Pm * Sigma2.adjoint()).norm(),
                     (B1 * R_hat).norm() + (Pm * Sigma2.adjoint()).norm());
    double cs2 = rel((B1 * Sigma2 + lam * Pm).norm(),
                     (B1 * Sigma2).norm() + lam * Pm.norm());
    double cs3 = rel((Pm.adjoint() * R_hat + Sm * Sigma2.adjoint()).norm(),
                     (Pm.adjoint() * R_hat).norm() + (Sm * Sigma2.adjoint()).norm());
    double cs4 = rel((Pm.adjoint() * Sigma2 + lam * Sm).norm(),
                     (Pm.adjoint() * Sigma2).norm() + lam * Sm.norm());
    double lam_id = std::abs(lam - (R_hat * B1).trace().real()) / (1.0 + lam);
    double cert = std::max(std::max(std::max(cs1, cs2), std::max(cs3, cs4)), lam_id);
    // Complementarity gap keeps early, loosely centered stages from winning.
    double obj_now = (R_hat * B1).trace().real();
    for (Eigen::Index q = 0; q < rb.size(); ++q)
      obj_now += rb_hat(q) * std::norm(coupling(Pm, q));
    double gap = std::abs((R_hat * B1).trace().real() + 2.0 * (Sigma2.adjoint() * Pm).trace().real() +
                          lam * Sm.trace().real()) /
                 (1.0 + std::abs(obj_now));
    return std::make_pair(cert, gap);
  };
  double best_score = 1e300;
  double best_cert = 1e300, best_gap = 1e300;
  MatC best_P = P, best_S = S;
  cxd best_mult = 0.0;
  double best_lambda_hat = 0.0;
  int bad_stages = 0;
  int crawl_stages = 0;

  while (newton_steps < opts.max_iters) {
    // Center at the current mu.
    for (int inner = 0; inner < 60 && newton_steps < opts.max_iters; ++inner) {
      ++newton_steps;
      Eigen::SelfAdjointEigenSolver<MatC> es(S);
      if (es.info() != Eigen::Success) break;
      // Local metric dP = dPt S^{1/2}, dS = S^{1/2} dX S^{1/2}: keeps the
      // Newton system conditioned even when the optimal S is rank deficient.
      MatC shalf = es.operatorSqrt();
      MatC sinvhalf = es.operatorInverseSqrt();
      MatC X = sinvhalf * sinvhalf;  // S^{-1}
      double slack = 1.0 - S.trace().real();
      MatC RP = R_hat * P;
      MatC RPX = RP * X;
      MatC W = X * P.adjoint() * RPX;  // S^{-1} P^H R P S^{-1}

      MatC Gp = RPX;
      for (Eigen::Index q = 0; q < rb.size(); ++q)
        Gp += rb_hat(q) * coupling(P, q) * gammas[static_cast<size_t>(q)];
      MatC Gs = -W - mu * X + (mu / slack) * MatC::Identity(n, n);
      // Transformed gradient coordinates: <Gp, dPt Shalf> = <Gp Shalf, dPt>.
      pack(Gp * shalf, shalf * Gs * shalf, grad);

      // Dense Newton system in the metric coordinates plus the Capon rows.
      // Hessian actions: dGp = R dP X - R P X dS X (+ factor terms),
      // dGs from dW = -X dS W - W dS X + X (dP^H RP + RP^H dP) X.
      MatR H(dim, dim);
      for (Eigen::Index k = 0; k < dim; ++k) {
        VecR e = VecR::Zero(dim);
        e(k) = 1.0;
        unpack_dir(e, dP, dS);
        dP = dP * shalf;          // map metric coordinates to (dP, dS)
        dS = shalf * dS * shalf;
        MatC XdS = X * dS;
        MatC dGp = R_hat * dP * X - RPX * XdS.adjoint();  // (X dS)^H = dS X
        for (Eigen::Index q = 0; q < rb.size(); ++q)
          dGp += rb_hat(q) * (gammas[static_cast<size_t>(q)].adjoint() * dP).trace() *
                 gammas[static_cast<size_t>(q)];
        MatC dW = -XdS * W - W * XdS.adjoint() +
                  X * (dP.adjoint() * RP + RP.adjoint() * dP) * X;
        MatC dGs = -dW + mu * XdS * X +
                   (mu / (slack * slack)) * dS.trace().real() * MatC::Identity(n, n);
        pack(dGp * shalf, shalf * dGs * shalf, col);
        H.col(k) = col;
      }
      H = 0.5 * (H + H.transpose().eval());

      VecR jre(dim), jim(dim);
      pack(0.5 * T * shalf, MatC::Zero(n, n), jre);
      pack(cxd(0.0, -0.5) * T * shalf, MatC::Zero(n, n), jim);

      MatR kkt = MatR::Zero(dim + 2, dim + 2);
      kkt.topLeftCorner(dim, dim) = H;
      kkt.block(0, dim, dim, 1) = jre;
      kkt.block(0, dim + 1, dim, 1) = jim;
      kkt.block(dim, 0, 1, dim) = jre.transpose();
      kkt.block(dim + 1, 0, 1, dim) = jim.transpose();
      VecR rhs = VecR::Zero(dim + 2);
      rhs.head(dim) = -grad;
      cxd capon_gap = (P.adjoint() * T).trace() - kappa_hat;
      rhs(dim) = -capon_gap.real();
      rhs(dim + 1) = -capon_gap.imag();
      VecR step = kkt.ldlt().solve(rhs);
      capon_mult = cxd(step(dim), step(dim + 1));

      unpack_dir(step.head(dim), dP, dS);
      double decrement = -grad.dot(step.head(dim));
      dP = dP * shalf;  // back to natural coordinates
      dS = shalf * dS * shalf;

      // Fraction to the S > 0 and power-slack boundaries, then backtracking.
      double alpha_max = 1.0;
      {
        VecR ev = hermitian_eigenvalues((sinvhalf * dS * sinvhalf).eval());
        if (ev.minCoeff() < 0.0) alpha_max = std::min(alpha_max, -0.99 / ev.minCoeff());
        double dtr = dS.trace().real();
        if (dtr > 0.0) alpha_max = std::min(alpha_max, 0.99 * slack / dtr);
      }
      bool ok = false;
      double phi0 = phi_value(P, S, mu, ok);
      double step_len = std::min(1.0, alpha_max);
      for (int bt = 0; bt < 60; ++bt) {
        bool ok2 = false;
        double phi1 = phi_value(P + step_len * dP, S + step_len * dS, mu, ok2);
        if (ok2 && phi1 <= phi0 + 1e-4 * step_len * grad.dot(step.head(dim))) break;
        step_len *= 0.5;
      }
      P += step_len * dP;
      S += step_len * dS;
      S = hermitian_part(S);

      if (step_len < 1e-10) {
        ++crawl_stages;
        break;
      }
      if (std::abs(decrement) < std::max(1e-4 * mu, 1e-15)) {
        crawl_stages = 0;
        break;
      }
    }

    auto [cert, gap] = stage_score(P, S, mu, capon_mult);
    double score = std::max(cert, gap);
    if (std::getenv("STAPSDR_TRACE"))
      std::fprintf(stderr, "stage mu=%.3g cert=%.3g gap=%.3g crawl=%d bad=%d steps=%d\n", mu,
                   cert, gap, crawl_stages, bad_stages, newton_steps);
    if (score < 2.0 * best_score) {  // prefer deeper stages at comparable quality
      best_score = std::min(best_score, score);
      best_cert = cert;
      best_gap = gap;
      best_P = P;
      best_S = S;
      best_mult = capon_mult;
      best_lambda_hat = mu / std::max(1.0 - S.trace().real(), kTiny);
      bad_stages = 0;
    } else if (++bad_stages >= 3 && best_cert < 3e-5 && best_gap < 1e-3) {
      converged = true;  // duals already certified; deeper centering degrades them
      break;
    }
    if (crawl_stages >= 2) {
      converged = best_cert < 3e-5 && best_gap < 1e-3;
      break;
    }

    Eigen::LLT<MatC> llt(S);
    double obj_now = objective_hat(P, llt);
    double mu_target = std::max(opts.tol * (1.0 + std::abs(obj_now)) / (n + 1.0) * 0.1,
                                mu_floor_abs);
    if (mu <= mu_target) {
      converged = true;
      break;
    }
    mu = std::max(mu * opts.barrier_shrink, mu_target);
  }
  sol.iterations = newton_steps;
  sol.status = converged ? SolveStatus::optimal : SolveStatus::max_iters;
  if (best_score < 1e300) {
    P = best_P;
    S = best_S;
    capon_mult = best_mult;
  }

  // Lift back through the pseudo-inverse of S, duals from the barrier
  // multipliers.
  MatC s_pinv;
  {
    Eigen::SelfAdjointEigenSolver<MatC> es(S);
    VecR ev = es.eigenvalues();
    double cap_scale = std::max(ev.cwiseAbs().maxCoeff(), kTiny);
    VecR inv = VecR::Zero(n);
    for (int i = 0; i < n; ++i)
      if (ev(i) > 1e-14 * cap_scale) inv(i) = 1.0 / ev(i);
    s_pinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().adjoint();
  }
  MatC B2 = alpha_p * P;
  MatC B3 = alpha_s2 * S;
  MatC B1 = (alpha_p * alpha_p / alpha_s2) * (P * s_pinv * P.adjoint());
  sol.B = MatC::Zero(J, J);
  sol.B.topLeftCorner(nml, nml) = B1;
  sol.B.topRightCorner(nml, n) = B2;
  sol.B.bottomLeftCorner(n, nml) = B2.adjoint();
  sol.B.bottomRightCorner(n, n) = B3;
  sol.B = hermitian_part(sol.B);

  double lambda_hat = best_score < 1e300 ? best_lambda_hat
                                         : mu / std::max(1.0 - S.trace().real(), kTiny);
  sol.lambda = lambda_hat * obj_scale / alpha_s2;
  // Capon multiplier of the reduced KKT maps to the relaxation's mu tilde.
  sol.mu = -0.5 * capon_mult * obj_scale / alpha_p;

  const VecC tau = vec(prob.T);
  VecC beta2 = vec(B2.eval());
  VecC cv_beta2 = prob.apply_cv(beta2);
  VecC sigma2 = cv_beta2 - std::conj(sol.mu) * tau;
  sol.Sigma = MatC::Zero(J, J);
  sol.Sigma.topLeftCorner(nml, nml) = prob.R_ni;
  sol.Sigma.topRightCorner(nml, n) = unvec(sigma2, nml, n);
  sol.Sigma.bottomLeftCorner(n, nml) = sol.Sigma.topRightCorner(nml, n).adjoint().eval();
  sol.Sigma.bottomRightCorner(n, n) = sol.lambda * MatC::Identity(n, n);

  sol.objective = prob.objective(sol.B, opts.objective_mode);
  sol.objective_alt = prob.objective(sol.B, opts.objective_mode == ObjectiveMode::factor_quadratic
                                                ? ObjectiveMode::norm_of_factor
                                                : ObjectiveMode::factor_quadratic);
  sol.residuals.capon = std::abs(prob.capon_value(sol.B) - prob.kappa);
  sol.residuals.power = prob.block3(sol.B).trace().real() - prob.P_o;
  sol.residuals.psd_violation = std::max(0.0, -min_eigenvalue(sol.B));
  VecC stat = cv_beta2 - sigma2 - std::conj(sol.mu) * tau;
  sol.residuals.stationarity =
      stat.norm() / (1.0 + cv_beta2.norm() + sigma2.norm() + std::abs(sol.mu) * tau.norm());
  double slack_ip = std::abs((sol.Sigma * sol.B).trace().real());
  sol.residuals.slackness = slack_ip / (1.0 + sol.Sigma.norm() * sol.B.norm());
  sol.residuals.primal = std::abs(sol.residuals.power) / (1.0 + prob.P_o);
  sol.residuals.dual = mu;
  return sol;
}

}  // namespace

SdrSolution solve(const SdrProblem& prob, const SolveOptions& opts) {
  SlaterReport slater = slater_margin(prob);
  if (!slater.satisfied)
    std::cerr << "warning: Slater margin " << slater.margin
              << " is nonpositive; solving anyway\n";
  if (opts.method == SolveMethod::splitting) return solve_splitting(prob, opts, slater);
  // The dense reduced Newton system has 2 NML N + N^2 real unknowns; past a
  // few thousand the memory bill belongs to the splitting engine instead.
  Eigen::Index dim = 2LL * prob.nml() * prob.N + static_cast<Eigen::Index>(prob.N) * prob.N;
  if (dim > 6000) {
    std::cerr << "note: reduced Newton dimension " << dim
              << " too large; falling back to the splitting method\n";
    return solve_splitting(prob, opts, slater);
  }
  return solve_barrier(prob, opts, slater);
}

namespace {

/// Dual path-following for min tr(C X), Re<A_i, X> = b_i, X >= 0 when C is
/// positive definite: maximize b^T y with S(y) = C - sum y_i A_i > 0 through
/// the log barrier (y = 0 is strictly feasible), recovering the primal as
/// X = mu S^{-1}, which satisfies the constraints exactly at each center.
LinearSdpSolution solve_linear_sdp_dual(const LinearSdp& sdp, const SolveOptions& opts) {
  const Eigen::Index nn = sdp.C.rows();
  const size_t m = sdp.A.size();
  const double nu_scale = std::max(sdp.C.norm() / std::sqrt(static_cast<double>(nn)), 1e-300);

  std::vector<MatC> A(m);
  VecR b(static_cast<Eigen::Index>(m));
  for (size_t i = 0; i < m; ++i) {
    double s = std::max(sdp.A[i].norm(), 1e-300);
    A[i] = sdp.A[i] / s;
    b(static_cast<Eigen::Index>(i)) = sdp.b(static_cast<Eigen::Index>(i)) / s / nu_scale;
  }
  const MatC C_hat = sdp.C / nu_scale;

  VecR y = VecR::Zero(static_cast<Eigen::Index>(m));
  auto dual_slack = [&](const VecR& yv) {
    MatC S = C_hat;
    for (size_t i = 0; i < m; ++i) S -= yv(static_cast<Eigen::Index>(i)) * A[i];
    return S;
  };

  LinearSdpSolution out;
  out.status = SolveStatus::max_iters;
  double mu = 1.0;
  const double mu_target = std::max(opts.tol, 1e-12);
  int steps = 0;
  bool diverged = false;
  while (steps < opts.max_iters && !diverged) {
    for (int inner = 0; inner < 40 && steps < opts.max_iters; ++inner) {
      ++steps;
      MatC S = dual_slack(y);
      Eigen::LLT<MatC> llt(S);
      if (llt.info() != Eigen::Success) {
        diverged = true;
        break;
      }
      MatC X = llt.solve(MatC::Identity(nn, nn));
      VecR g(static_cast<Eigen::Index>(m));
      std::vector<MatC> XA(m);
      for (size_t i = 0; i < m; ++i) {
        XA[i] = X * A[i];
        g(static_cast<Eigen::Index>(i)) = -b(static_cast<Eigen::Index>(i)) +
                                          mu * XA[i].trace().real();
      }
      MatR H(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
      for (size_t i = 0; i < m; ++i)
        for (size_t j = i; j < m; ++j) {
          double h = mu * (XA[i] * XA[j]).trace().real();
          H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = h;
          H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = h;
        }
      H.diagonal().array() += 1e-14 * std::max(1.0, H.norm());
      VecR dy = H.ldlt().solve(-g);
      double decrement = -g.dot(dy);
      double step_len = 1.0;
      for (int bt = 0; bt < 60; ++bt) {
        Eigen::LLT<MatC> probe(dual_slack((y + step_len * dy).eval()));
        if (probe.info() == Eigen::Success) break;
        step_len *= 0.5;
      }
      y += step_len * dy;
      if (y.norm() > 1e10) {
        diverged = true;
        break;
      }
      if (std::abs(decrement) < std::max(0.01 * mu, 1e-15) || step_len < 1e-12) break;
    }
    if (diverged) break;
    if (mu <= mu_target) {
      // Final tight centering: the recovered primal meets the constraints
      // exactly at a perfect center, so polish the last point hard.
      for (int polish = 0; polish < 25 && steps < opts.max_iters; ++polish) {
        ++steps;
        MatC S = dual_slack(y);
        Eigen::LLT<MatC> llt(S);
        if (llt.info() != Eigen::Success) break;
        MatC X = llt.solve(MatC::Identity(nn, nn));
        VecR g(static_cast<Eigen::Index>(m));
        std::vector<MatC> XA(m);
        for (size_t i = 0; i < m; ++i) {
          XA[i] = X * A[i];
          g(static_cast<Eigen::Index>(i)) = -b(static_cast<Eigen::Index>(i)) +
                                            mu * XA[i].trace().real();
        }
        MatR H(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        for (size_t i = 0; i < m; ++i)
          for (size_t j = i; j < m; ++j) {
            double h = mu * (XA[i] * XA[j]).trace().real();
            H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = h;
            H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = h;
          }
        H.diagonal().array() += 1e-15 * std::max(1.0, H.norm());
        VecR dy = H.ldlt().solve(-g);
        double step_len = 1.0;
        for (int bt = 0; bt < 60; ++bt) {
          Eigen::LLT<MatC> probe(dual_slack((y + step_len * dy).eval()));
          if (probe.info() == Eigen::Success) break;
          step_len *= 0.5;
        }
        y += step_len * dy;
        if (g.norm() < 1e-12 * (1.0 + b.norm()) || step_len < 1e-12) break;
      }
      out.status = SolveStatus::optimal;
      break;
    }
    mu = std::max(mu * 0.2, mu_target);
  }
  out.iterations = steps;
  if (diverged) out.status = SolveStatus::infeasible;

  MatC S = dual_slack(y);
  Eigen::LLT<MatC> llt(S);
  MatC X = llt.info() == Eigen::Success
               ? MatC((mu * nu_scale) * llt.solve(MatC::Identity(nn, nn)))
               : MatC::Zero(nn, nn);
  out.X = hermitian_part(X);
  out.objective = (sdp.C * out.X).trace().real();
  out.constraint_values.resize(static_cast<Eigen::Index>(m));
  double affine = 0.0;
  for (size_t i = 0; i < m; ++i) {
    double v = (sdp.A[i].adjoint() * out.X).trace().real();
    out.constraint_values(static_cast<Eigen::Index>(i)) = v;
    affine = std::max(affine,
                      std::abs(v - sdp.b(static_cast<Eigen::Index>(i))) /
                          (1.0 + std::abs(sdp.b(static_cast<Eigen::Index>(i)))));
  }
  out.affine_residual = affine;
  out.primal_residual = 0.0;
  return out;
}

}  // namespace

LinearSdpSolution solve_linear_sdp(const LinearSdp& sdp, const SolveOptions& opts) {
  const Eigen::Index n = sdp.C.rows();
  const size_t m = sdp.A.size();
  if (sdp.b.size() != static_cast<Eigen::Index>(m))
    throw std::invalid_argument("solve_linear_sdp: constraint count mismatch");

  // PD objective matrix admits the dual-barrier route (y = 0 strictly
  // feasible); otherwise fall through to the splitting iteration.
  {
    VecR ev = hermitian_eigenvalues(sdp.C);
    if (ev.minCoeff() > 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300))
      return solve_linear_sdp_dual(sdp, opts);
  }

  // Normalize each constraint to unit Frobenius norm.
  std::vector<MatC> A(m);
  VecR b(m);
  for (size_t i = 0; i < m; ++i) {
    double s = std::max(sdp.A[i].norm(), kTiny);
    A[i] = sdp.A[i] / s;
    b(static_cast<Eigen::Index>(i)) = sdp.b(static_cast<Eigen::Index>(i)) / s;
  }
  const double nu = std::max(sdp.C.norm() / std::sqrt(static_cast<double>(n)), kTiny);
  MatC C_hat = sdp.C / nu;

  MatR gram(m, m);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < m; ++j)
      gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (A[i].adjoint() * A[j]).trace().real();
  // Pseudo-inverse tolerant of linearly dependent constraints.
  Eigen::SelfAdjointEigenSolver<MatR> ges(gram);
  VecR gev = ges.eigenvalues();
  double gmax = std::max(gev.cwiseAbs().maxCoeff(), kTiny);
  MatR gram_pinv = MatR::Zero(m, m);
  for (Eigen::Index i = 0; i < gev.size(); ++i)
    if (gev(i) > 1e-12 * gmax)
      gram_pinv += ges.eigenvectors().col(i) * ges.eigenvectors().col(i).transpose() / gev(i);

  auto affine_project = [&](const MatC& X) {
    VecR g(m);
    for (size_t i = 0; i < m; ++i)
      g(static_cast<Eigen::Index>(i)) = (A[i].adjoint() * X).trace().real();
    VecR d = gram_pinv * (b - g);
    MatC out = X;
    for (size_t i = 0; i < m; ++i) out += d(static_cast<Eigen::Index>(i)) * A[i];
    return out;
  };

  double rho = opts.rho0;
  MatC Z = MatC::Zero(n, n);
  MatC U = MatC::Zero(n, n);
  MatC B = MatC::Zero(n, n);
  const double alpha = opts.over_relaxation;

  LinearSdpSolution out;
  out.status = SolveStatus::max_iters;
  double r_primal = 0.0, r_dual = 0.0, r_affine = 0.0;
  int iter = 0;
  for (iter = 1; iter <= opts.max_iters; ++iter) {
    B = affine_project(Z - U - C_hat / rho);
    MatC B_relax = alpha * B + (1.0 - alpha) * Z;
    MatC Z_prev = std::move(Z);
    Z = psd_project(B_relax + U, opts.psd_via_real_embedding);
    U += B_relax - Z;

    r_primal = (B - Z).norm();
    r_dual = rho * (Z - Z_prev).norm();
    r_affine = 0.0;
    for (size_t i = 0; i < m; ++i)
      r_affine = std::max(
          r_affine, std::abs((A[i].adjoint() * Z).trace().real() - b(static_cast<Eigen::Index>(i))));
    double scale = 1.0 + B.norm();
    if (std::max(std::max(r_primal, r_dual), r_affine) < opts.tol * scale) {
      out.status = SolveStatus::optimal;
      break;
    }
    if (B.norm() > 1e12 || U.norm() > 1e10 * scale) {
      out.status = SolveStatus::infeasible;
      break;
    }
    if (opts.adaptive_rho && iter % 50 == 0) {
      if (r_primal > 10.0 * r_dual && rho < 1e10) {
        rho *= 2.0;
        U *= 0.5;
      } else if (r_dual > 10.0 * r_primal && rho > 1e-8) {
        rho *= 0.5;
        U *= 2.0;
      }
    }
  }
  out.iterations = std::min(iter, opts.max_iters);
  out.X = hermitian_part(Z);
  out.objective = (sdp.C * out.X).trace().real();
  out.constraint_values.resize(m);
  for (size_t i = 0; i < m; ++i)
    out.constraint_values(static_cast<Eigen::Index>(i)) =
        (sdp.A[i].adjoint() * out.X).trace().real();
  out.primal_residual = r_primal / (1.0 + B.norm());
  out.affine_residual = r_affine;
  return out;
}

}  // namespace stapsdr
