"""Joint transmit-waveform / receive-beamformer design via semidefinite relaxation.

The heavy lifting lives in the C++ extension `_core`; this package re-exports
its surface.
"""

from stapsdr._core import (
    ScenarioConfig,
    SdrProblem,
    SdrSolution,
    adapted_pattern,
    alternating_minimization,
    assemble,
    candidate_power_bounded,
    check_kkt,
    clutter_covariance,
    covariances,
    doppler_shift,
    extract,
    nonpower_flowchart,
    objective_hessian,
    original_cost,
    slater_margin,
    solve,
    steering,
    structural_lemmas,
    subspace_cosine,
    target_channel,
    waterfilling_audit,
)

__all__ = [
    "ScenarioConfig",
    "SdrProblem",
    "SdrSolution",
    "adapted_pattern",
    "alternating_minimization",
    "assemble",
    "candidate_power_bounded",
    "check_kkt",
    "clutter_covariance",
    "covariances",
    "doppler_shift",
    "extract",
    "nonpower_flowchart",
    "objective_hessian",
    "original_cost",
    "slater_margin",
    "solve",
    "steering",
    "structural_lemmas",
    "subspace_cosine",
    "target_channel",
    "waterfilling_audit",
]
