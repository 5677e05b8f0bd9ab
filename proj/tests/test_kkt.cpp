#include "doctest.h"
#include "stapsdr/kkt.hpp"
#include "stapsdr/linalg.hpp"
#include "support/oracles.hpp"

using namespace stapsdr;

namespace {

SdrSolution solve_default(const SdrProblem& prob, double tol = 1e-9) {
  SolveOptions opts;
  opts.tol = tol;
  return solve(prob, opts);
}

/// Rank-deficient noise, either containing the target channel's range or
/// built orthogonal to it.
ScenarioConfig lowrank_noise_scenario(bool target_embedded, int Q) {
  ScenarioConfig cfg = oracle::tiny_scenario(Q);
  cfg.P_o = 100.0;
  cfg.kappa = cxd(5.0, 0.0);
  ChannelMatrix tgt = target_channel(cfg);
  auto gen = oracle::rng(77);
  const int nml = cfg.nml();
  MatC V = oracle::random_matrix(gen, nml, 3);
  if (target_embedded) {
    cfg.noise_correlation =
        hermitian_part((tgt.mat * tgt.mat.adjoint() + V * V.adjoint()).eval());
  } else {
    MatC proj = MatC::Identity(nml, nml) -
                tgt.mat * (tgt.mat.adjoint() * tgt.mat).ldlt().solve(tgt.mat.adjoint().eval());
    MatC W = proj * V;
    cfg.noise_correlation = hermitian_part((W * W.adjoint()).eval());
  }
  return cfg;
}

}  // namespace

TEST_CASE("check_kkt on a converged desk solve") {
  ScenarioConfig cfg = oracle::desk_scenario(3, 3, 4, 9);
  cfg.P_o = 1e4;
  cfg.kappa = cxd(30.0, 0.0);
  SdrProblem prob = assemble(cfg);
  SdrSolution sol = solve_default(prob);
  REQUIRE(sol.status == SolveStatus::optimal);
  KktReport rep = check_kkt(sol, prob, 1e-5);
  CHECK(rep.verdict);
  CHECK(rep.lambda_from_B1 < 1e-5);
  CHECK(rep.mu_kappa_gap < 1e-5);
  CHECK(rep.tr_B2H_Sigma2_imag < 1e-5);
  // tr(B2^H Sigma2) is real and nonpositive at optimality.
  MatC sigma2 = sol.Sigma.topRightCorner(prob.nml(), prob.N);
  cxd t = (prob.block2(sol.B).adjoint() * sigma2).trace();
  CHECK(t.real() <= 1e-8 * (1.0 + std::abs(t)));
}

TEST_CASE("check_kkt flags a constructed Capon violation") {
  ScenarioConfig cfg = oracle::tiny_scenario(2);
  SdrProblem prob = assemble(cfg);
  auto gen = oracle::rng(51);
  VecC w = oracle::random_vector(gen, prob.nml());
  VecC s = oracle::random_vector(gen, prob.N);
  VecC b(prob.joint_dim());
  b << w, s;
  SdrSolution fake;
  fake.B = b * b.adjoint();
  fake.lambda = 0.0;
  fake.mu = cxd(0.0, 0.0);
  fake.nml = prob.nml();
  fake.n = prob.N;
  KktReport rep = check_kkt(fake, prob, 1e-6);
  CHECK(rep.capon_residual > 1e-3);
  CHECK_FALSE(rep.verdict);
}

TEST_CASE("structural lemmas at a full-rank-noise optimum") {
  ScenarioConfig cfg = oracle::desk_scenario(2, 2, 2, 3);
  cfg.P_o = 1e4;
  cfg.kappa = cxd(50.0, 0.0);
  SdrProblem prob = assemble(cfg);
  SdrSolution sol = solve_default(prob);
  REQUIRE(sol.status == SolveStatus::optimal);
  StructuralReport rep = structural_lemmas(sol, prob, 1e-5);
  CHECK(rep.Rni_full_rank);
  CHECK(rep.lambda_positive);
  CHECK(rep.power_bound_active);
  CHECK(rep.power_gap_rel < 1e-5);
  CHECK(rep.ranks_equal);
  CHECK(rep.rank_le_N);
  CHECK(rep.rank_lemma_holds);
  CHECK(rep.verdict);
}

TEST_CASE("structural lemmas in the rank-deficient branch") {
  // Noise orthogonal to the target and no clutter: lambda and Sigma2 vanish.
  ScenarioConfig cfg = lowrank_noise_scenario(false, 0);
  SdrProblem prob = assemble(cfg);
  SdrSolution sol = solve_default(prob, 1e-8);
  StructuralReport rep = structural_lemmas(sol, prob, 1e-5);
  CHECK_FALSE(rep.Rni_full_rank);
  CHECK(std::abs(sol.lambda) < 1e-5);
  CHECK(rep.sigma2_zero);
  CHECK(rep.verdict);
}

TEST_CASE("waterfilling audit") {
  SUBCASE("desk solve satisfies the balance equations") {
    ScenarioConfig cfg = oracle::desk_scenario(2, 2, 2, 3);
    cfg.P_o = 1e4;
    cfg.kappa = cxd(50.0, 0.0);
    SdrProblem prob = assemble(cfg);
    SdrSolution sol = solve_default(prob);
    WaterfillingAudit audit = waterfilling_audit(sol, prob, 1e-8);
    REQUIRE_FALSE(audit.degenerate);
    CHECK(audit.Q_eff > 0);
    CHECK(audit.Q_eff <= 3);
    CHECK(audit.partial_isometry_residual < 1e-9);
    double b2_norm = prob.block2(sol.B).norm();
    CHECK(audit.max_balance_residual < 1e-4 * b2_norm);
    CHECK(audit.mu_match_rel < 1e-4);
    // A direction with nu_j = 0 obeys the balance with leading coefficient 1.
    MatC B2 = prob.block2(sol.B);
    MatC B3 = prob.block3(sol.B);
    Eigen::LDLT<MatC> rinv(prob.R_ni);
    auto gen = oracle::rng(52);
    VecC u = oracle::random_vector(gen, prob.nml() * prob.N);
    u -= prob.factors * (prob.factors.adjoint() * prob.factors)
                            .ldlt()
                            .solve(prob.factors.adjoint() * u);
    u /= u.norm();
    MatC U = unvec(u, prob.nml(), prob.N);
    cxd lhs = (U.adjoint() * B2).trace();
    cxd rhs = std::conj(sol.mu) * (U.adjoint() * rinv.solve(prob.T) * B3).trace();
    for (size_t i = 0; i < audit.U.size(); ++i)
      rhs -= audit.nu(static_cast<Eigen::Index>(i)) * audit.alignment[i] *
             (U.adjoint() * rinv.solve(audit.U[i]) * B3).trace();
    CHECK(std::abs(lhs - rhs) < 1e-4 * (1.0 + b2_norm));
  }
  SUBCASE("zero clutter collapses to the whitened-target relation") {
    ScenarioConfig cfg = oracle::tiny_scenario(0);
    cfg.P_o = 1e4;
    cfg.kappa = cxd(20.0, 0.0);
    SdrProblem prob = assemble(cfg);
    SdrSolution sol = solve_default(prob);
    WaterfillingAudit audit = waterfilling_audit(sol, prob, 1e-8);
    CHECK(audit.Q_eff == 0);
    CHECK(audit.zero_clutter_residual < 1e-6);
    CHECK(audit.mu_match_rel < 1e-5);
  }
  SUBCASE("rank-deficient noise is rejected") {
    ScenarioConfig cfg = lowrank_noise_scenario(false, 0);
    SdrProblem prob = assemble(cfg);
    SdrSolution sol = solve_default(prob, 1e-6);
    CHECK_THROWS_AS(waterfilling_audit(sol, prob, 1e-8), std::invalid_argument);
  }
}

TEST_CASE("power-bounded candidate") {
  SUBCASE("zero clutter: completion is Capon-exact and passes the KKTs") {
    ScenarioConfig cfg = oracle::tiny_scenario(0);
    cfg.P_o = 1e4;
    cfg.kappa = cxd(20.0, 0.0);
    SdrProblem prob = assemble(cfg);
    SolveOptions opts;
    opts.tol = 1e-9;
    PowerBoundedCandidate cand = candidate_power_bounded(prob, 1e-4, opts);
    REQUIRE(cand.subproblem_status == SolveStatus::optimal);
    CHECK_FALSE(cand.tau_in_range_cv);
    CHECK(std::abs(prob.capon_value(cand.B) - prob.kappa) < 1e-5 * std::abs(prob.kappa));
    double tr_b3 = prob.block3(cand.B).trace().real();
    CHECK(tr_b3 == doctest::Approx(prob.P_o).epsilon(1e-8));
    CHECK(cand.admissibility_inequality);
    CHECK(cand.kkt.verdict);
    // Same optimum as the direct solve when the orthogonality ansatz is exact.
    SdrSolution sol = solve_default(prob);
    CHECK(prob.objective(cand.B) == doctest::Approx(sol.objective).epsilon(1e-5));
  }
  SUBCASE("single sparse patch: valid completion that upper-bounds the optimum") {
    ScenarioConfig cfg = oracle::desk_scenario(2, 2, 2, 1);
    cfg.P_o = 1e4;
    cfg.kappa = cxd(20.0, 0.0);
    SdrProblem prob = assemble(cfg);
    SolveOptions opts;
    opts.tol = 1e-9;
    PowerBoundedCandidate cand = candidate_power_bounded(prob, 1e-4, opts);
    REQUIRE(cand.subproblem_status == SolveStatus::optimal);
    CHECK(std::abs(prob.capon_value(cand.B) - prob.kappa) < 1e-5 * std::abs(prob.kappa));
    double tr_b3 = prob.block3(cand.B).trace().real();
    CHECK(tr_b3 == doctest::Approx(prob.P_o).epsilon(1e-6));
    CHECK(cand.admissibility_inequality);
    SdrSolution sol = solve_default(prob);
    CHECK(prob.objective(cand.B) >= sol.objective * (1.0 - 1e-6));
    // The clutter-orthogonal ansatz is suboptimal on this scenario, so the
    // completion is feasible but does not satisfy the full KKT system.
    CHECK(prob.objective(cand.B) > sol.objective * (1.0 + 1e-3));
    CHECK_FALSE(cand.kkt.verdict);
  }
  SUBCASE("clutter-rich small array: constraints annihilate the PSD mass") {
    ScenarioConfig cfg = oracle::desk_scenario(2, 2, 2, 2);
    cfg.P_o = 1e4;
    cfg.kappa = cxd(20.0, 0.0);
    SdrProblem prob = assemble(cfg);
    SolveOptions opts;
    opts.tol = 1e-9;
    PowerBoundedCandidate cand = candidate_power_bounded(prob, 1e-4, opts);
    CHECK(cand.subproblem_status == SolveStatus::infeasible);
  }
}

TEST_CASE("non-power-bounded flowchart") {
  SUBCASE("full-rank noise is not applicable") {
    ScenarioConfig cfg = oracle::tiny_scenario(1);
    SdrProblem prob = assemble(cfg);
    CHECK(nonpower_flowchart(prob, 1e-8).verdict == FlowchartVerdict::not_applicable);
  }
  SUBCASE("target embedded in the noise range is infeasible") {
    ScenarioConfig cfg = lowrank_noise_scenario(true, 1);
    SdrProblem prob = assemble(cfg);
    FlowchartDiagnosis diag = nonpower_flowchart(prob, 1e-8);
    CHECK(diag.verdict == FlowchartVerdict::infeasible_target_embedded);
  }
  SUBCASE("orthogonal target with zero clutter reaches the mu = 0 branch") {
    ScenarioConfig cfg = lowrank_noise_scenario(false, 0);
    SdrProblem prob = assemble(cfg);
    FlowchartDiagnosis diag = nonpower_flowchart(prob, 1e-8);
    CHECK(diag.verdict == FlowchartVerdict::mu_zero_feasible);
    CHECK_FALSE(diag.tau_in_range_cv);
  }
  SUBCASE("target channel inside the clutter span") {
    ScenarioConfig cfg = lowrank_noise_scenario(false, 0);
    CovarianceSet cov = build_covariance_set(cfg);
    ChannelMatrix tgt = target_channel(cfg);
    cov.clutter.push_back({tgt, 1.0, cfg.target.theta_t, cfg.target.phi_t});
    SdrProblem prob = assemble(cov, tgt, cfg.kappa, cfg.P_o, cfg.N, cfg.M, cfg.L);
    FlowchartDiagnosis diag = nonpower_flowchart(prob, 1e-8);
    CHECK(diag.tau_in_range_cv);
    CHECK(diag.verdict == FlowchartVerdict::feasible_tau_in_clutter);
  }
}
