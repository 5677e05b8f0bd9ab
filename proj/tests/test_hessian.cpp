#include "doctest.h"
#include "stapsdr/hessian.hpp"
#include "stapsdr/linalg.hpp"
#include "support/oracles.hpp"

using namespace stapsdr;

namespace {

// w orthogonal to every Gamma_q s: a patch-nulling beamformer.
VecC nulling_beamformer(const CovarianceSet& cov, const VecC& s, std::mt19937_64& gen) {
  const Eigen::Index nml = cov.R_ni.rows();
  MatC responses(nml, static_cast<Eigen::Index>(cov.clutter.size()));
  for (size_t q = 0; q < cov.clutter.size(); ++q)
    responses.col(static_cast<Eigen::Index>(q)) = cov.clutter[q].channel.mat * s;
  MatC pn = MatC::Identity(nml, nml) -
            responses * (responses.adjoint() * responses).ldlt().solve(responses.adjoint());
  return pn * oracle::random_vector(gen, nml);
}

}  // namespace

TEST_CASE("per-patch hessian") {
  ScenarioConfig cfg = oracle::tiny_scenario(2);
  CovarianceSet cov = build_covariance_set(cfg);
  auto gen = oracle::rng(31);
  const auto& patch = cov.clutter[0];

  SUBCASE("nulling pair gives the zero block") {
    VecC s = oracle::random_vector(gen, cfg.N);
    VecC w = nulling_beamformer(cov, s, gen);
    HessianBlock blk = per_patch_hessian(w, s, patch.channel, patch.rbar);
    CHECK(blk.corner.norm() < 1e-10);
    IndefinitenessCertificate cert = certify(blk, 1e-8);
    CHECK(cert.verdict == DefinitenessVerdict::zero);
    CHECK(cert.nulling_detected);
  }

  SUBCASE("eigenvalues are +-(rbar/2)|w^H Gamma s| sqrt(ML) with multiplicity N") {
    VecC w = oracle::random_vector(gen, cfg.nml());
    VecC s = oracle::random_vector(gen, cfg.N);
    double rbar = 0.8;
    HessianBlock blk = per_patch_hessian(w, s, patch.channel, rbar);
    cxd coupling = (w.adjoint() * patch.channel.mat * s)(0);
    double sv = 0.5 * rbar * std::abs(coupling) * std::sqrt(double(cfg.M * cfg.L));
    VecR ev = hermitian_eigenvalues(blk.full_block);
    const int J = cfg.joint_dim();
    for (int i = 0; i < cfg.N; ++i) {
      CHECK(ev(i) == doctest::Approx(-sv).epsilon(1e-9));
      CHECK(ev(J - 1 - i) == doctest::Approx(sv).epsilon(1e-9));
    }
    for (int i = cfg.N; i < J - cfg.N; ++i) CHECK(std::abs(ev(i)) < 1e-9 * sv);
    IndefinitenessCertificate cert = certify(blk, 1e-8);
    CHECK(cert.verdict == DefinitenessVerdict::indefinite);
    CHECK(cert.positive_count == cfg.N);
    CHECK(cert.negative_count == cfg.N);
    CHECK(cert.positive_count + cert.negative_count + cert.zero_count == J);
  }

  SUBCASE("diagonal blocks are exactly zero") {
    VecC w = oracle::random_vector(gen, cfg.nml());
    VecC s = oracle::random_vector(gen, cfg.N);
    HessianBlock blk = per_patch_hessian(w, s, patch.channel, 1.0);
    CHECK(blk.full_block.topLeftCorner(cfg.nml(), cfg.nml()).norm() == 0.0);
    CHECK(blk.full_block.bottomRightCorner(cfg.N, cfg.N).norm() == 0.0);
  }
}

TEST_CASE("total clutter hessian") {
  ScenarioConfig cfg = oracle::tiny_scenario(2);
  cfg.clutter_patches[0].rbar_q = 0.6;
  cfg.clutter_patches[1].rbar_q = 1.7;
  CovarianceSet cov = build_covariance_set(cfg);
  auto gen = oracle::rng(32);
  VecC w = oracle::random_vector(gen, cfg.nml());
  VecC s = oracle::random_vector(gen, cfg.N);

  SUBCASE("single patch reduces to the per-patch block") {
    ScenarioConfig c1 = oracle::tiny_scenario(1);
    c1.clutter_patches[0].rbar_q = 0.6;
    CovarianceSet cov1 = build_covariance_set(c1);
    HessianBlock total = clutter_hessian(w, s, cov1);
    HessianBlock single = per_patch_hessian(w, s, cov1.clutter[0].channel, 0.6);
    CHECK((total.full_block - single.full_block).norm() < 1e-14 * single.full_block.norm());
  }

  SUBCASE("spectrum is +-singular values of the corner plus N(ML-1) zeros") {
    HessianBlock blk = clutter_hessian(w, s, cov);
    Eigen::JacobiSVD<MatC> svd(blk.corner);
    VecR sv = svd.singularValues();
    VecR ev = hermitian_eigenvalues(blk.full_block);
    const int J = cfg.joint_dim();
    for (int i = 0; i < cfg.N; ++i) {
      CHECK(ev(J - 1 - i) == doctest::Approx(sv(i)).epsilon(1e-10));
      CHECK(ev(i) == doctest::Approx(-sv(cfg.N - 1 - i)).epsilon(1e-10));
    }
    int zeros = 0;
    for (int i = cfg.N; i < J - cfg.N; ++i)
      if (std::abs(ev(i)) < 1e-9 * sv(0)) ++zeros;
    CHECK(zeros == cfg.N * (cfg.M * cfg.L - 1));
  }

  SUBCASE("corner Gram matches the D-matrix construction") {
    HessianBlock blk = clutter_hessian(w, s, cov);
    MatC gram = blk.corner.adjoint() * blk.corner;
    // D columns rbar_q (w^H Gamma_q s)^* c_q; the printed form absorbs unit rbar.
    MatC D(cfg.M * cfg.L, 2);
    for (int q = 0; q < 2; ++q) {
      const auto& cc = cov.clutter[static_cast<size_t>(q)];
      cxd coupling = (w.adjoint() * cc.channel.mat * s)(0);
      D.col(q) = cc.rbar * std::conj(coupling) * cc.channel.c;
    }
    cxd scalar = (VecC::Ones(2).adjoint() * (D.adjoint() * D) * VecC::Ones(2))(0) / 4.0;
    MatC expected = scalar * MatC::Identity(cfg.N, cfg.N);
    CHECK((gram - expected).norm() < 1e-10 * (1.0 + expected.norm()));
  }

  SUBCASE("nonzero spectrum is symmetric about zero") {
    HessianBlock blk = clutter_hessian(w, s, cov);
    VecR ev = hermitian_eigenvalues(blk.full_block);
    const Eigen::Index J = ev.size();
    for (Eigen::Index i = 0; i < J; ++i) {
      double flipped = -ev(J - 1 - i);
      CHECK(std::abs(ev(i) - flipped) < 1e-9 * (1.0 + std::abs(ev(i))));
    }
  }
}

TEST_CASE("objective hessian") {
  ScenarioConfig cfg = oracle::tiny_scenario(2);
  CovarianceSet cov = build_covariance_set(cfg);
  auto gen = oracle::rng(33);
  VecC w = oracle::random_vector(gen, cfg.nml());
  VecC s = oracle::random_vector(gen, cfg.N);

  SUBCASE("zero reflectivity leaves the PSD block diagonal") {
    CovarianceSet quiet = cov;
    for (auto& cc : quiet.clutter) cc.rbar = 0.0;
    HessianBlock blk = objective_hessian(w, s, quiet);
    CHECK(blk.corner.norm() == 0.0);
    IndefinitenessCertificate cert = certify(blk, 1e-8);
    CHECK(cert.verdict == DefinitenessVerdict::psd);
    CHECK(cert.cond_a2);
  }

  SUBCASE("zero noise reduces to the clutter hessian") {
    CovarianceSet noiseless = cov;
    noiseless.R_n.setZero();
    noiseless.R_i.setZero();
    noiseless.R_ni.setZero();
    HessianBlock blk = objective_hessian(w, s, noiseless);
    HessianBlock clut = clutter_hessian(w, s, noiseless);
    CHECK((blk.full_block - clut.full_block).norm() == 0.0);
  }

  SUBCASE("indefinite whenever some patch is coupled; A2 is the failing condition") {
    HessianBlock blk = objective_hessian(w, s, cov);
    IndefinitenessCertificate cert = certify(blk, 1e-8);
    CHECK(cert.verdict == DefinitenessVerdict::indefinite);
    CHECK(cert.cond_a1);
    CHECK_FALSE(cert.cond_a2);  // Pi_Q != 0
    CHECK(cert.cond_a3);
    CHECK(cert.range_inclusion_residual > 1e-8);
  }

  SUBCASE("PSD at a constructed nulling pair") {
    VecC s2 = oracle::random_vector(gen, cfg.N);
    VecC w2 = nulling_beamformer(cov, s2, gen);
    HessianBlock blk = objective_hessian(w2, s2, cov);
    IndefinitenessCertificate cert = certify(blk, 1e-8);
    CHECK((cert.verdict == DefinitenessVerdict::psd ||
           cert.verdict == DefinitenessVerdict::zero));
    CHECK(cert.nulling_detected);
  }
}

TEST_CASE("certify on constructed spectra") {
  SUBCASE("zero matrix") {
    HessianBlock blk;
    blk.corner = MatC::Zero(4, 2);
    blk.full_block = MatC::Zero(6, 6);
    CHECK(certify(blk, 1e-8).verdict == DefinitenessVerdict::zero);
  }
  SUBCASE("diag(I, -I) is indefinite") {
    HessianBlock blk;
    blk.corner = MatC::Zero(2, 2);
    blk.full_block = MatC::Identity(4, 4);
    blk.full_block(2, 2) = -1.0;
    blk.full_block(3, 3) = -1.0;
    IndefinitenessCertificate cert = certify(blk, 1e-8);
    CHECK(cert.verdict == DefinitenessVerdict::indefinite);
    CHECK(cert.positive_count == 2);
    CHECK(cert.negative_count == 2);
  }
}

TEST_CASE("per-patch cost") {
  ScenarioConfig cfg = oracle::tiny_scenario(2);
  CovarianceSet cov = build_covariance_set(cfg);
  auto gen = oracle::rng(34);
  const auto& patch = cov.clutter[0];
  VecC s = oracle::random_vector(gen, cfg.N);

  SUBCASE("orthogonal beamformer and zero reflectivity vanish") {
    VecC w = nulling_beamformer(cov, s, gen);
    CHECK(per_patch_cost(w, s, patch.channel, 1.3) < 1e-18);
    VecC w2 = oracle::random_vector(gen, cfg.nml());
    CHECK(per_patch_cost(w2, s, patch.channel, 0.0) == 0.0);
  }

  SUBCASE("modulus form equals the real/imag decomposition") {
    VecC w = oracle::random_vector(gen, cfg.nml());
    double rbar = 2.1;
    cxd coupling = (w.adjoint() * patch.channel.mat * s)(0);
    double decomposed = rbar * (coupling.real() * coupling.real() +
                                coupling.imag() * coupling.imag());
    CHECK(per_patch_cost(w, s, patch.channel, rbar) ==
          doctest::Approx(decomposed).epsilon(1e-12));
  }

  SUBCASE("compact quadratic-of-quadratics form agrees") {
    // g = [Re(w^H G s); Im(w^H G s)], cost = g^H (rbar I_2) g.
    VecC w = oracle::random_vector(gen, cfg.nml());
    double rbar = 0.9;
    SplitterPair sp = splitters(cfg.N, cfg.M, cfg.L);
    MatC expanded = sp.expand_corner(patch.channel.mat);
    VecC b = sp.join(w, s);
    cxd re_part = (b.adjoint() * hermitian_part(expanded) * b)(0);
    cxd im_part = (b.adjoint() * antihermitian_part(expanded) * b)(0);
    double compact = rbar * (std::norm(re_part) + std::norm(im_part));
    CHECK(per_patch_cost(w, s, patch.channel, rbar) ==
          doctest::Approx(compact).epsilon(1e-12));
  }

  SUBCASE("patch costs plus noise equal the full objective") {
    VecC w = oracle::random_vector(gen, cfg.nml());
    double total = (w.adjoint() * cov.R_ni * w)(0).real();
    for (const auto& cc : cov.clutter) total += per_patch_cost(w, s, cc.channel, cc.rbar);
    double through_cov = (w.adjoint() * cov.undesired_covariance(s) * w)(0).real();
    CHECK(total == doctest::Approx(through_cov).epsilon(1e-10));
  }
}
