"""Delay-stability verdicts for the positive equilibrium in the two asymptotic regimes."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..equilibrium import dstar_expansion, solve_u0
from ..errors import NoPositiveEquilibriumError, PatchHopfError
from ..model import DEGENERACY_RTOL, as_model, classify_patches, partials_at
from ..spectral import PerronData, find_dstar
from .curve import hopf_point_at
from .solver import HopfPoint, isolated_patch_hopf

NEAR_DSTAR = "near_dstar"
SMALL_D = "small_d"


@dataclass(frozen=True)
class StableAllDelays:
    regime: str
    reason: str = ""

    label = "StableAllDelays"


@dataclass(frozen=True)
class HopfAt:
    tau0: float
    source: str
    point: HopfPoint | None = None

    label = "HopfAt"


@dataclass(frozen=True)
class Inconclusive:
    reason: str

    label = "Inconclusive"


StabilityVerdict = StableAllDelays | HopfAt | Inconclusive


def _close(x, y, rtol=DEGENERACY_RTOL):
    return abs(x - y) <= rtol * max(abs(x), abs(y))


def resonance_check(model) -> str | None:
    """Reason string if two oscillation-capable patches share ``(nu^0, theta^0)`` or ``theta^0/nu^0``."""
    model = as_model(model)
    u0 = solve_u0(model.law)
    part = classify_patches(model.law, u0, strict=False)
    if part.degenerate:
        return f"patches {[j + 1 for j in part.degenerate]} have a_j^0 = b_j^0"
    a0, b0 = partials_at(model.law, u0)
    data = {q: isolated_patch_hopf(a0[q], b0[q], u0[q]) for q in part.oscillatory}
    for j, k in combinations(part.oscillatory, 2):
        (nj, tj), (nk, tk) = data[j], data[k]
        if _close(nj, nk) and _close(tj, tk):
            return f"patches {j + 1} and {k + 1} share the isolated crossing (nu, theta) = ({nj:.6g}, {tj:.6g})"
        if _close(tj / nj, tk / nk):
            return f"patches {j + 1} and {k + 1} reach their first threshold at the same delay {tj / nj:.6g}"
    return None


def classify(model, d: float, regime: str, *, perron: PerronData | None = None) -> StabilityVerdict:
    """Stability verdict at dispersal rate ``d`` using the criterion of ``regime``.

    ``near_dstar`` decides by the sign of ``tilde_a - tilde_b``; ``small_d`` by
    whether any isolated patch has ``a_j^0 - b_j^0 > 0``. Boundary cases and
    resonant patch pairs give :class:`Inconclusive` instead of a guess.
    """
    model = as_model(model)
    P = perron if perron is not None else find_dstar(model.A, model.m)
    if d >= P.d_star:
        raise NoPositiveEquilibriumError(f"d = {d} >= d_* = {P.d_star}")
    if regime == NEAR_DSTAR:
        exp = dstar_expansion(model.law, P)
        gap = exp.tilde_a - exp.tilde_b
        if abs(gap) <= DEGENERACY_RTOL * (abs(exp.tilde_a) + abs(exp.tilde_b)):
            return Inconclusive("tilde_a = tilde_b: boundary case near d_*")
        if gap < 0:
            return StableAllDelays(regime, "tilde_a - tilde_b < 0")
    elif regime == SMALL_D:
        part = classify_patches(model.law, solve_u0(model.law), strict=False)
        if part.degenerate:
            return Inconclusive(f"patches {[j + 1 for j in part.degenerate]} have a_j^0 = b_j^0")
        if not part.oscillatory:
            return StableAllDelays(regime, "a_j^0 - b_j^0 < 0 for every patch")
        reason = resonance_check(model)
        if reason is not None:
            return Inconclusive(reason)
    else:
        raise ValueError(f"unknown regime {regime!r}")
    try:
        pt = hopf_point_at(model, d, regime, perron=P)
    except PatchHopfError as exc:
        return Inconclusive(f"Hopf continuation failed: {exc}")
    return HopfAt(pt.tau0, pt.source, pt)


def verdict_label(v: StabilityVerdict) -> str:
    return v.label
