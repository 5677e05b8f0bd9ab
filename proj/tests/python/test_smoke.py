"""End-to-end smoke tests for the python bindings."""

import json
import math

import numpy as np
import pytest

import stapsdr


def scenario_text(N=2, M=2, L=2, Q=2, kappa=20.0, P_o=1e4, interferer=False):
    cfg = {
        "N": N,
        "M": M,
        "L": L,
        "f_o": 1e9,
        "bandwidth": 5e7,
        "d": 0.5 * 299792458.0 / 1e9,
        "T_p": 1e-4,
        "platform_velocity": [100.0, 0.0, 0.0],
        "target": {
            "theta_t": 0.3,
            "phi_t": math.pi / 3,
            "velocity": [100.0, 0.0, 0.0],
            "rho_t": [1.0, 0.0],
        },
        "clutter_patches": [
            {
                "theta_q": -math.pi / 2 + (q + 1) * math.pi / (Q + 1),
                "phi_q": math.pi / 4,
                "rbar_q": 1.0,
            }
            for q in range(Q)
        ],
        "noise_correlation": {
            "kind": "exp_toeplitz",
            "rate": -0.05,
            "scale": 1.0,
            "size": N * M * L,
        },
        "kappa": [kappa, 0.0],
        "P_o": P_o,
    }
    if interferer:
        cfg["interferers"] = [
            {
                "theta_k": 0.3941,
                "phi_k": 0.3,
                "correlation": {
                    "kind": "exp_toeplitz",
                    "rate": -0.2,
                    "scale": 100.0,
                    "size": N * L,
                },
            }
        ]
    return json.dumps(cfg)


@pytest.fixture(scope="module")
def solved():
    cfg = stapsdr.ScenarioConfig.from_json(scenario_text())
    prob = stapsdr.assemble(cfg)
    sol = stapsdr.solve(prob, tol=1e-9)
    return cfg, prob, sol


def test_model_pieces():
    cfg = stapsdr.ScenarioConfig.from_json(scenario_text())
    assert cfg.nml == 8 and cfg.joint_dim == 10
    assert stapsdr.doppler_shift(np.array([0.0, 0.0, 0.0]), 0.3, 0.5, 1e9) == 0.0
    v, a = stapsdr.steering(0.0, 0.0, 0.0, cfg)
    assert np.allclose(v, 1.0) and np.allclose(a, 1.0)
    T = stapsdr.target_channel(cfg)
    assert T.shape == (8, 2)
    gram = T.conj().T @ T
    assert np.allclose(gram, 4.0 * np.eye(2), atol=1e-10)
    cov = stapsdr.covariances(cfg)
    assert np.allclose(cov["R_ni"], cov["R_n"] + cov["R_i"])
    s = np.array([1.0 + 0.5j, -0.25j])
    Rc = stapsdr.clutter_covariance(cfg, s)
    assert np.linalg.eigvalsh(Rc).min() > -1e-10 * np.linalg.norm(Rc)


def test_solve_and_certify(solved):
    cfg, prob, sol = solved
    assert sol.status == "optimal"
    assert abs(prob.capon_value(sol.B) - cfg.kappa) < 1e-6 * abs(cfg.kappa)
    rep = stapsdr.check_kkt(sol, prob, tol=1e-5)
    assert rep["verdict"]
    lemmas = stapsdr.structural_lemmas(sol, prob)
    assert lemmas["power_bound_active"] and lemmas["ranks_equal"]
    audit = stapsdr.waterfilling_audit(sol, prob)
    assert not audit["degenerate"]
    assert audit["mu_match_rel"] < 1e-3


def test_slater_witness(solved):
    _, prob, _ = solved
    rep = stapsdr.slater_margin(prob)
    assert rep["satisfied"]
    w = rep["witness"]
    assert np.linalg.eigvalsh(w).min() > 0.0


def test_extraction_and_pattern(solved):
    cfg, prob, sol = solved
    ex = stapsdr.extract(sol, prob, B=1)
    assert ex["power_used"] <= cfg.P_o * (1 + 1e-9)
    if ex["power_used"] < cfg.P_o * (1 - 1e-9):
        # Capon holds exactly unless the power-ball projection clipped s.
        assert ex["capon_gap"] < 1e-6 * abs(cfg.kappa)
    # The reported objective carries the certified stage gap (~1e-6 rel).
    assert ex["original_cost"] >= sol.objective * (1 - 1e-5)
    sv = ex["singular_values"]
    assert sv[0] > 0 and all(sv[i] >= sv[i + 1] - 1e-12 * sv[0] for i in range(len(sv) - 1))

    pat = stapsdr.adapted_pattern(ex["w"], ex["s"], cfg, phi=math.pi / 3)
    assert pat["values"].shape == (64, 181)
    # Capon restoration pins the response at the exact target to |kappa|^2.
    f_t = stapsdr.doppler_shift(np.array([100.0, 0.0, 0.0]), 0.3, math.pi / 3, 1e9)
    fi = int(np.argmin(np.abs(pat["doppler_axis"] - f_t)))
    aj = int(np.argmin(np.abs(pat["azimuth_axis"] - 0.3)))
    assert pat["values"][fi, aj] > 0.0

    cos = stapsdr.subspace_cosine(prob.T, prob.T)
    assert abs(cos - 1.0) < 1e-12


def test_am_baseline(solved):
    _, prob, sol = solved
    res = stapsdr.alternating_minimization(prob)
    assert not res["stalled"]
    trace = res["cost_trace"]
    assert all(trace[i + 1] <= trace[i] * (1 + 1e-12) for i in range(len(trace) - 1))
    assert trace[-1] >= sol.objective * (1 - 1e-6)


def test_hessian_certificate(solved):
    cfg, prob, _ = solved
    rng = np.random.default_rng(7)
    w = rng.standard_normal(cfg.nml) + 1j * rng.standard_normal(cfg.nml)
    s = rng.standard_normal(cfg.N) + 1j * rng.standard_normal(cfg.N)
    cert = stapsdr.objective_hessian(w, s, prob)
    assert cert["verdict"] == "indefinite"
    assert cert["positive_count"] > 0 and cert["negative_count"] > 0


def test_flowchart_not_applicable(solved):
    _, prob, _ = solved
    diag = stapsdr.nonpower_flowchart(prob)
    assert diag["verdict"] == "not_applicable"
