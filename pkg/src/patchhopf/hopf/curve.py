"""Continuation of the first Hopf delay ``tau_{d,0}`` along the dispersal rate.

Each isolated-patch crossing ``q`` with ``a_q^0 - b_q^0 > 0`` seeds a branch
continued upward from ``d ~ 0``; the near-critical crossing seeds a branch
continued downward from ``d ~ d_*``. The reported threshold is the smallest
delay among the branches available at each rate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..equilibrium import dstar_expansion, solve_equilibrium, solve_u0
from ..errors import ContinuationError, NoCrossingError, PatchHopfError, PreconditionError, RegimeBoundaryError
from ..model import as_model, classify_patches
from ..spectral import PerronData, find_dstar
from .solver import HopfPoint, solve_hopf_point, start_near_dstar, start_small_d

SMALL_START = 1e-4  # fraction of d_* where small-d branches are seeded
NEAR_START = 1e-3  # distance from d_* (relative) where the near-critical branch is seeded
MAX_HALVINGS = 14
JUMP_FACTOR = 10.0
OVERLAP_MIN = 0.9
MEET_ATOL = 1e-6
SMALL_REGIME = 0.1
NEAR_REGIME = 0.9
COLLAPSE_FRACTION = 0.2


def near_tag() -> str:
    return "near_dstar"


def small_tag(q: int) -> str:
    return f"small_d/q={q + 1}"


@dataclass
class _Track:
    """Last accepted points of a branch, used for warm starts and jump tests."""

    tag: str
    scaled: bool
    d_star: float
    history: list = field(default_factory=list)
    nu_seed: float = 0.0

    def __post_init__(self):
        if self.history and not self.nu_seed:
            self.nu_seed = self.history[0].nu

    def guess(self, d: float):
        last = self.history[-1]
        nu = last.nu
        if self.scaled:
            nu *= (self.d_star - d) / (self.d_star - last.d)
        return nu, last.theta, last.phi

    def _smooth(self, pt: HopfPoint) -> float:
        # tau blows up like 1/(d_* - d) on the near-critical branch; h = nu/(d_* - d) stays smooth
        return pt.nu / (self.d_star - pt.d) if self.scaled else pt.tau0

    def is_jump(self, new: HopfPoint) -> bool:
        last = self.history[-1]
        ov = abs(np.vdot(last.phi, new.phi)) / (np.linalg.norm(last.phi) * np.linalg.norm(new.phi))
        if ov < OVERLAP_MIN:
            return True
        y_last, y_new = self._smooth(last), self._smooth(new)
        if len(self.history) < 2:
            return abs(y_new - y_last) > 0.25 * abs(y_last)
        prev = self.history[-2]
        slope = (y_last - self._smooth(prev)) / (last.d - prev.d)
        predicted = y_last + slope * (new.d - last.d)
        trend = abs(slope * (new.d - last.d))
        return abs(y_new - predicted) > JUMP_FACTOR * trend + 1e-3 * abs(y_last)


def _advance(model, P: PerronData, track: _Track, d_target: float, u_prev, L: int):
    """Move a branch from its last point to ``d_target``, halving the step on failure or jumps."""
    flags = []
    d_from = track.history[-1].d
    if d_target == d_from:
        return track.history[-1], u_prev, flags
    pending = [d_target]
    u = u_prev
    halvings = 0
    while pending:
        d = pending[-1]
        try:
            u_new = solve_equilibrium(model, d, u, perron=P).u
            pt = solve_hopf_point(model, d, u_new, track.guess(d), perron=P, L=L, source=track.tag,
                                  patch=track.history[-1].patch)
            jump = track.is_jump(pt)
        except (ContinuationError, PreconditionError):
            pt, jump = None, True
        if jump:
            halvings += 1
            if halvings > MAX_HALVINGS:
                if pt is None or _collapsing(track):
                    raise ContinuationError(f"branch {track.tag} lost between d={d_from} and d={d}")
                flags.append(f"unresolved jump on {track.tag} near d={d:.6g}")
                warnings.warn(flags[-1], stacklevel=3)
            else:
                pending.append(0.5 * (track.history[-1].d + d))
                continue
        track.history.append(pt)
        track.history = track.history[-3:]
        u = u_new
        d_from = d
        pending.pop()
        halvings = 0 if not pending else halvings
    return track.history[-1], u, flags


def _seed_small(model, P, q, L):
    d0 = SMALL_START * P.d_star
    u = solve_equilibrium(model, d0, solve_u0(model.law), perron=P).u
    pt = solve_hopf_point(model, d0, u, start_small_d(model, q), perron=P, formulation="direct", L=L,
                          source=small_tag(q), patch=q)
    return _Track(small_tag(q), False, P.d_star, [pt]), u


def _seed_near(model, P, L):
    h, theta, phi = start_near_dstar(dstar_expansion(model.law, P), P)
    d0 = P.d_star * (1 - NEAR_START)
    u = solve_equilibrium(model, d0, perron=P).u
    pt = solve_hopf_point(model, d0, u, ((P.d_star - d0) * h, theta, phi), perron=P, formulation="scaled",
                          L=L, source=near_tag())
    return _Track(near_tag(), True, P.d_star, [pt]), u


def _collapsing(track: _Track) -> bool:
    # a branch whose frequency falls monotonically towards zero ends there (tau -> infinity)
    h = track.history
    if len(h) < 3 or track.scaled:
        return False
    nus = [p.nu for p in h]
    return nus[0] > nus[1] > nus[2] and nus[2] < COLLAPSE_FRACTION * track.nu_seed


def track_branch(model, P: PerronData, tag: str, targets, L: int = 3):
    """Points of one branch at each rate in ``targets`` (``None`` once the branch is lost).

    ``tag`` is :func:`near_tag` or :func:`small_tag`; targets are visited in the
    natural direction of the branch.
    """
    targets = np.asarray(targets, dtype=float)
    try:
        seeded = _seed_near(model, P, L) if tag == near_tag() else _seed_small(model, P, int(tag.split("=")[1]) - 1, L)
    except (ContinuationError, PreconditionError, RegimeBoundaryError) as exc:
        # a resonant isolated start can sit between two modes; the branch is then unavailable
        return [None] * len(targets), [f"{tag} could not be seeded: {exc}"]
    track, u = seeded
    if tag == near_tag():
        order = np.argsort(-targets)
        targets = targets[order]
        order = list(order)
    else:
        order = list(np.argsort(targets))
        targets = targets[order]
    out: list = [None] * len(targets)
    flags: list[str] = []
    for i, d in zip(order, targets):
        try:
            pt, u, fl = _advance(model, P, track, float(d), u, L)
        except PatchHopfError as exc:
            if _collapsing(track):
                last = track.history[-1]
                flags.append(f"{tag} ends near d={last.d:.6g}: frequency collapses (nu = {last.nu:.3g})")
            else:
                flags.append(f"{tag} stopped at d={d:.6g}: {exc}")
            break
        flags.extend(fl)
        out[i] = pt
    return out, flags


@dataclass
class HopfCurve:
    """First Hopf delay on a grid, with the branch that attains it.

    ``regime`` marks each grid point as ``small_d`` (``d <= 0.1 d_*``),
    ``near_dstar`` (``d >= 0.9 d_*``) or ``intermediate``; intermediate values
    come from numerical continuation only.
    """

    d: np.ndarray
    tau0: np.ndarray
    nu: np.ndarray
    theta: np.ndarray
    branch: list
    regime: list
    points: list
    branches: dict
    d_star: float
    meeting_d: float | None = None
    meeting_mismatch: float | None = None
    flags: list = field(default_factory=list)

    def rows(self):
        for i in range(len(self.d)):
            yield self.d[i], self.tau0[i], self.nu[i], self.theta[i], self.branch[i]


def _regime(d, d_star):
    if d <= SMALL_REGIME * d_star:
        return "small_d"
    if d >= NEAR_REGIME * d_star:
        return "near_dstar"
    return "intermediate"


def hopf_curve(model, d_grid, *, perron: PerronData | None = None, L: int = 3) -> HopfCurve:
    """Continue every Hopf branch over ``d_grid`` and take the pointwise minimum delay.

    Parameters
    ----------
    d_grid : array_like
        Increasing rates inside ``(0, d_*)``.

    Notes
    -----
    The small-d and near-critical branches are compared at the grid point
    closest to ``d_*/2``. A mismatch above ``1e-6`` is retried on a refined
    local grid; if it persists the curve carries a flag and a warning is issued
    (the branches are then genuinely different Hopf families).
    """
    model = as_model(model)
    P = perron if perron is not None else find_dstar(model.A, model.m)
    d_grid = np.asarray(d_grid, dtype=float)
    if d_grid.ndim != 1 or len(d_grid) == 0:
        raise ValueError("d_grid must be a nonempty 1-d array")
    if np.any(np.diff(d_grid) <= 0):
        raise ValueError("d_grid must be strictly increasing")
    if d_grid[0] <= 0 or d_grid[-1] >= P.d_star:
        raise PreconditionError(f"d_grid must lie inside (0, d_*) = (0, {P.d_star})")

    flags: list[str] = []
    branches: dict[str, list] = {}
    part = classify_patches(model.law, solve_u0(model.law), strict=False)
    for q in part.oscillatory:
        pts, fl = track_branch(model, P, small_tag(q), d_grid, L)
        branches[small_tag(q)] = pts
        flags += fl
    try:
        pts, fl = track_branch(model, P, near_tag(), d_grid, L)
        branches[near_tag()] = pts
        flags += fl
    except NoCrossingError:
        pass

    n = len(d_grid)
    tau0, nu, theta = np.full(n, np.nan), np.full(n, np.nan), np.full(n, np.nan)
    branch, points = ["none"] * n, [None] * n
    for i in range(n):
        best = _pick(branches, i, d_grid[i], P.d_star)
        if best is not None:
            tau0[i], nu[i], theta[i] = best.tau0, best.nu, best.theta
            branch[i], points[i] = best.source, best

    meet_d = mismatch = None
    small = [t for t in branches if t != near_tag()]
    if near_tag() in branches and small:
        i = int(np.argmin(np.abs(d_grid - 0.5 * P.d_star)))
        meet_d = float(d_grid[i])
        mismatch = _meeting_mismatch(branches, small, i)
        if mismatch is not None and mismatch > MEET_ATOL:
            refined = _refine_meeting(model, P, meet_d, small, L)
            if refined is not None:
                mismatch = refined
        if mismatch is None:
            flags.append(f"no overlapping small-d and near-d_* points at d={meet_d:.6g}")
        elif mismatch > MEET_ATOL:
            flags.append(f"small-d and near-d_* branches disagree at d={meet_d:.6g} (mismatch {mismatch})")
            warnings.warn(flags[-1], stacklevel=2)

    regime = [_regime(d, P.d_star) for d in d_grid]
    return HopfCurve(d_grid, tau0, nu, theta, branch, regime, points, branches, P.d_star, meet_d, mismatch, flags)


def _pick(branches, i, d, d_star, rtol=1e-9):
    cands = [pts[i] for pts in branches.values() if pts[i] is not None]
    if not cands:
        return None
    low = min(p.tau0 for p in cands)
    same = [p for p in cands if p.tau0 <= low * (1 + rtol)]
    if len(same) > 1:
        # coincident branches: credit the one seeded in the regime the rate belongs to
        prefer_near = d >= 0.5 * d_star
        same.sort(key=lambda p: (p.source == near_tag()) != prefer_near)
    return same[0]


def _meeting_mismatch(branches, small, i):
    near = branches[near_tag()][i]
    lows = [branches[t][i] for t in small if branches[t][i] is not None]
    if near is None or not lows:
        return None
    return min(abs(near.tau0 - p.tau0) for p in lows) / max(1.0, near.tau0)


def _refine_meeting(model, P, d_meet, small, L):
    # a finer continuation path removes mismatches caused by coarse grids
    grid = np.linspace(d_meet / 8, d_meet, 8)
    near_grid = np.linspace(d_meet, P.d_star * (1 - 2 * NEAR_START), 8)
    near_pts, _ = track_branch(model, P, near_tag(), near_grid, L)
    if near_pts[0] is None:
        return None
    best = None
    for tag in small:
        pts, _ = track_branch(model, P, tag, grid, L)
        if pts[-1] is not None:
            gap = abs(pts[-1].tau0 - near_pts[0].tau0) / max(1.0, near_pts[0].tau0)
            best = gap if best is None else min(best, gap)
    return best


def hopf_point_at(model, d: float, regime: str, *, perron: PerronData | None = None, L: int = 3) -> HopfPoint:
    """First Hopf point at ``d`` following the branches of one regime.

    ``regime="near_dstar"`` continues the near-critical branch down to ``d``;
    ``regime="small_d"`` continues every isolated-patch branch up to ``d`` and
    returns the one with the smallest delay.
    """
    model = as_model(model)
    P = perron if perron is not None else find_dstar(model.A, model.m)
    if regime == "near_dstar":
        tags = [near_tag()]
    elif regime == "small_d":
        part = classify_patches(model.law, solve_u0(model.law), strict=False)
        if not part.oscillatory:
            raise NoCrossingError("no isolated patch can oscillate")
        tags = [small_tag(q) for q in part.oscillatory]
    else:
        raise ValueError(f"unknown regime {regime!r}")
    best = None
    for tag in tags:
        pts, flags = track_branch(model, P, tag, [d], L)
        if pts[0] is not None and (best is None or pts[0].tau0 < best.tau0):
            best = pts[0]
    if best is None:
        raise ContinuationError(f"no {regime} Hopf branch reached d={d}")
    return best


__all__ = ["HopfCurve", "hopf_curve", "hopf_point_at", "track_branch", "near_tag", "small_tag"]
