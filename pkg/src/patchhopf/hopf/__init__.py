"""Characteristic equation, Hopf points, continuation, classification and the topology index."""

from .characteristic import (
    CharMatrixEval,
    adjoint_eigenvector,
    delta_from_phase,
    eval_delta,
    linear_coefficients,
    root_velocity,
    simplicity_certificate,
)
from .classify import (
    NEAR_DSTAR,
    SMALL_D,
    HopfAt,
    Inconclusive,
    StableAllDelays,
    StabilityVerdict,
    classify,
    resonance_check,
)
from .curve import HopfCurve, hopf_curve, hopf_point_at, near_tag, small_tag, track_branch
from .oracle import oracle_crossing_tau, oracle_rightmost_roots, oracle_slope
from .solver import (
    HopfPoint,
    isolated_patch_hopf,
    reduced_scalar_hopf,
    solve_hopf_point,
    start_near_dstar,
    start_small_d,
)
from .topology import TopologyData, tau_expansion, topology_data, topology_index, unique_argmax

__all__ = [
    "CharMatrixEval", "adjoint_eigenvector", "delta_from_phase", "eval_delta", "linear_coefficients",
    "root_velocity", "simplicity_certificate", "NEAR_DSTAR", "SMALL_D", "HopfAt", "Inconclusive",
    "StableAllDelays", "StabilityVerdict", "classify", "resonance_check", "HopfCurve", "hopf_curve",
    "hopf_point_at", "near_tag", "small_tag", "track_branch", "oracle_crossing_tau",
    "oracle_rightmost_roots", "oracle_slope", "HopfPoint", "isolated_patch_hopf", "reduced_scalar_hopf",
    "solve_hopf_point", "start_near_dstar", "start_small_d", "TopologyData", "tau_expansion",
    "topology_data", "topology_index", "unique_argmax",
]
