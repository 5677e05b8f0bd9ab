#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "stapsdr/linalg.hpp"
#include "stapsdr/scenario.hpp"
#include "support/oracles.hpp"

using namespace stapsdr;

TEST_CASE("exp toeplitz generator") {
  MatC t = exp_toeplitz(-0.2, 2.0, 4);
  CHECK(t(0, 0).real() == doctest::Approx(2.0));
  CHECK(t(0, 3).real() == doctest::Approx(2.0 * std::exp(-0.6)));
  CHECK(t(3, 0).real() == doctest::Approx(2.0 * std::exp(-0.6)));
  CHECK(min_eigenvalue(t) > 0.0);
  // Positive rates are expressible but produce an indefinite matrix.
  MatC grow = exp_toeplitz(0.2, 1.0, 4);
  CHECK(min_eigenvalue(grow) < 0.0);
}

TEST_CASE("scenario JSON round trip") {
  ScenarioConfig cfg = oracle::desk_scenario(2, 2, 2, 3, /*with_interferer=*/true);
  std::string text = scenario_to_json(cfg);
  ScenarioConfig back = scenario_from_json(text);
  CHECK(back.N == cfg.N);
  CHECK(back.M == cfg.M);
  CHECK(back.L == cfg.L);
  CHECK(back.T_p == cfg.T_p);
  CHECK(back.kappa == cfg.kappa);
  CHECK(back.P_o == cfg.P_o);
  CHECK(back.clutter_patches.size() == cfg.clutter_patches.size());
  CHECK((back.noise_correlation - cfg.noise_correlation).norm() <
        1e-12 * cfg.noise_correlation.norm());
  CHECK((back.interferers[0].correlation - cfg.interferers[0].correlation).norm() <
        1e-12 * cfg.interferers[0].correlation.norm());
  CHECK(back.target.theta_t == cfg.target.theta_t);
}

TEST_CASE("generator spec inside a scenario file") {
  std::string text = R"({
    "N": 2, "M": 2, "L": 2,
    "f_o": 1e9, "d": 0.15, "T_p": 1e-4,
    "platform_velocity": [100.0, 0.0, 0.0],
    "target": {"theta_t": 0.3, "phi_t": 1.0471975511965976, "velocity": [100.0, 0.0, 0.0]},
    "clutter_patches": [{"theta_q": 0.5, "phi_q": 0.7853981633974483, "rbar_q": 1.0}],
    "noise_correlation": {"kind": "exp_toeplitz", "rate": -0.05, "scale": 1.0, "size": 8},
    "interferers": [{"theta_k": 0.3941, "phi_k": 0.3,
                     "correlation": {"kind": "exp_toeplitz", "rate": -0.2, "scale": 5.0, "size": 4}}],
    "kappa": [10.0, 0.0],
    "P_o": 1000.0
  })";
  ScenarioConfig cfg = scenario_from_json(text);
  CHECK(cfg.noise_correlation.rows() == 8);
  CHECK(cfg.interferers[0].correlation(0, 0).real() == doctest::Approx(5.0));
  CHECK(cfg.noise_correlation(0, 1).real() == doctest::Approx(std::exp(-0.05)));
}

TEST_CASE("validation rejects bad input") {
  ScenarioConfig cfg = oracle::tiny_scenario();
  SUBCASE("kappa must be nonzero") {
    cfg.kappa = cxd(0.0, 0.0);
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("P_o must be positive") {
    cfg.P_o = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("negative rbar rejected") {
    cfg.clutter_patches[0].rbar_q = -0.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("non-PSD noise rejected (growing exp rate)") {
    cfg.noise_correlation = exp_toeplitz(0.2, 1.0, cfg.nml());
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("wrong interferer correlation shape rejected") {
    InterfererSpec intf;
    intf.theta_k = 0.1;
    intf.phi_k = 0.2;
    intf.correlation = MatC::Identity(3, 3);
    cfg.interferers.push_back(intf);
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("near-Hermitian input is symmetrized") {
    cfg.noise_correlation(0, 1) += cxd(0.0, 1e-13);
    cfg.validate();
    CHECK(hermitian_asymmetry(cfg.noise_correlation) < 1e-15);
  }
}

TEST_CASE("save and load through a file") {
  ScenarioConfig cfg = oracle::tiny_scenario();
  std::string path =
      (std::filesystem::temp_directory_path() / "stapsdr_test_scenario.json").string();
  save_scenario(cfg, path);
  ScenarioConfig back = load_scenario(path);
  CHECK(back.nml() == cfg.nml());
  CHECK(back.kappa == cfg.kappa);
  std::remove(path.c_str());
}
