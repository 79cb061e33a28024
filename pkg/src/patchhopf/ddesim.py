"""Fixed-step integration of the delayed patch model and long-run behaviour detection.

The integrator is classical RK4 on a grid whose step divides the delay, so
every delayed stage lands either on a grid point or on the midpoint of an
earlier step. Those values come from a cubic Hermite interpolant built from
the stored states and right-hand sides, which keeps the global error O(h^4).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DivergenceError, PositivityWarning, PreconditionError
from .model import Logistic, ModelConfig, as_model

DIVERGENCE_BOUND = 1e12
POSITIVITY_ATOL = 1e-8
STEPS_PER_DELAY = 64
CONVERGED_ATOL = 1e-6
AMPLITUDE_RTOL = 0.01
SPACING_RTOL = 0.02
MIN_PEAKS = 6
FREQUENCY_OFFSET = 1.05
FREQUENCY_RTOL = 0.10


class History:
    """Initial function on ``[-tau, 0]``; evaluate with ``h(t)`` for an array of times."""

    def __call__(self, t) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def constant(value) -> "ConstantHistory":
        return ConstantHistory(value)

    @staticmethod
    def sampled(times, states) -> "SampledHistory":
        return SampledHistory(times, states)


@dataclass(frozen=True)
class ConstantHistory(History):
    value: np.ndarray

    def __post_init__(self):
        v = np.array(self.value, dtype=float).ravel()
        if np.any(v < 0):
            raise PreconditionError("history must be nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "value", v)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.value, t.shape + self.value.shape).copy()


@dataclass(frozen=True)
class SampledHistory(History):
    """Samples on ``[-tau, 0]`` joined by a shape-preserving cubic, so nonnegative data stays nonnegative."""

    times: np.ndarray
    states: np.ndarray
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        y = np.array(self.states, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if len(t) != len(y) or len(t) < 2:
            raise PreconditionError("need at least two (time, state) samples")
        if np.any(np.diff(t) <= 0):
            raise PreconditionError("history sample times must be increasing")
        if np.any(y < 0):
            raise PreconditionError("history must be nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", y)
        object.__setattr__(self, "_interp", PchipInterpolator(t, y, axis=0, extrapolate=False))

    def __call__(self, t):
        out = self._interp(np.asarray(t, dtype=float))
        if np.any(np.isnan(out)):
            raise PreconditionError("history evaluated outside its sample range")
        return out


@dataclass
class Trajectory:
    """States on an equally spaced grid ``t_k = k * step`` with their right-hand sides."""

    step: float
    tau: float
    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    history: History = field(repr=False)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def dense_eval(self, t) -> np.ndarray:
        """Piecewise cubic Hermite interpolant; the history for ``t < 0``. Exact at grid points."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((len(t), self.n))
        neg = t < 0
        if np.any(neg):
            out[neg] = self.history(t[neg])
        tp = t[~neg]
        if len(tp):
            if np.any(tp > self.t_end * (1 + 1e-14)):
                raise ValueError("dense_eval beyond the end of the trajectory")
            k = np.minimum((tp / self.step).astype(int), len(self.times) - 2)
            s = (tp - self.times[k]) / self.step
            out[~neg] = _hermite(self.states[k], self.states[k + 1], self.derivs[k], self.derivs[k + 1],
                                 self.step, s[:, None])
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"u{j + 1}" for j in range(self.n)])
            for t, row in zip(self.times, self.states):
                w.writerow([format(t, ".17g")] + [format(x, ".17g") for x in row])


def _hermite(y0, y1, f0, f1, h, s):
    s2, s3 = s * s, s * s * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * f0
            + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * f1)


def stiffness_scale(model: ModelConfig, d: float) -> float:
    """Rough bound on the linearised rates, used to keep RK4 inside its stability region."""
    A = model.A.entries
    return d * float(np.max(np.sum(np.abs(A), axis=1))) + 2.0 * float(np.max(np.abs(model.m)))


def default_step(model: ModelConfig, d: float, tau: float) -> float:
    sigma = stiffness_scale(model, d)
    if tau == 0:
        return min(0.01, 2.0 / sigma)
    # RK4 is stable on the negative real axis up to h*|lambda| ~ 2.78; keep h*sigma <= 2
    return tau / max(STEPS_PER_DELAY, math.ceil(tau * sigma / 2.0))


def integrate(model, d: float, tau: float, history, t_end: float, step: float | None = None) -> Trajectory:
    """RK4 by the method of steps.

    Parameters
    ----------
    history : History or array_like
        A vector means a constant history.
    step : float, optional
        Rounded down so that it divides ``tau``. Defaults to ``tau/64``, refined
        further when the dispersal terms are stiff.

    Raises
    ------
    DivergenceError
        If the state norm exceeds ``1e12`` or becomes non-finite.
    """
    model = as_model(model)
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if tau < 0 or d < 0:
        raise ValueError("tau and d must be nonnegative")
    if not isinstance(history, History):
        history = ConstantHistory(history)
    if step is None:
        step = default_step(model, d, tau)
    if tau > 0:
        lag = math.ceil(tau / step - 1e-9)
        step = tau / lag
    else:
        lag = 0
    K = math.ceil(t_end / step - 1e-9)
    n = model.n
    A = d * model.A.entries
    law = model.law

    if isinstance(law, Logistic):
        m_, a_, b_ = law.m, law.a_hat, law.b_hat

        def rhs(u, ud):
            return A @ u + u * (m_ - a_ * u - b_ * ud)
    else:
        def rhs(u, ud):
            return A @ u + u * law.values(u, ud)

    Y = np.empty((K + 1, n))
    F = np.empty((K + 1, n))
    hist_grid = history(-tau + step * np.arange(lag + 1)) if lag else None
    hist_mid = history(-tau + step * (np.arange(lag) + 0.5)) if lag else None
    y0 = history(np.array([0.0]))[0]
    if y0.shape != (n,):
        raise PreconditionError(f"history has dimension {y0.shape} but the model has {n} patches")
    Y[0] = y0

    def grid_value(j):
        # state at t_j for j >= -lag, reading the history for negative indices
        return Y[j] if j >= 0 else hist_grid[j + lag]

    h = step
    neg_time = None
    # the cone and blow-up checks run once per delay interval
    check_every = max(lag, 1)
    last_check = -1
    # overflow inside a delay interval is reported below as DivergenceError
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K):
            y = Y[k]
            if lag:
                j = k - lag
                d0, d2 = grid_value(j), grid_value(j + 1)
                k1 = rhs(y, d0)
                F[k] = k1
                if j >= 0:
                    # F[j + 1] is available because j + 1 <= k
                    d1 = 0.5 * (Y[j] + Y[j + 1]) + 0.125 * h * (F[j] - F[j + 1])
                else:
                    d1 = hist_mid[j + lag]
            else:
                d0 = d1 = d2 = None
                k1 = rhs(y, y)
                F[k] = k1
            k2 = y + 0.5 * h * k1
            k2 = rhs(k2, d1 if lag else k2)
            k3 = y + 0.5 * h * k2
            k3 = rhs(k3, d1 if lag else k3)
            k4 = y + h * k3
            k4 = rhs(k4, d2 if lag else k4)
            Y[k + 1] = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if (k + 1) % check_every == 0 or k + 1 == K:
                block = Y[last_check + 1 : k + 2]
                bad = ~np.isfinite(block).all(axis=1) | (np.abs(block).max(axis=1) > DIVERGENCE_BOUND)
                if bad.any():
                    t_bad = (last_check + 1 + int(np.argmax(bad))) * h
                    raise DivergenceError(f"state norm exceeded {DIVERGENCE_BOUND:g} at t={t_bad:.6g}")
                neg = block.min(axis=1) < -POSITIVITY_ATOL
                if neg_time is None and neg.any():
                    neg_time = (last_check + 1 + int(np.argmax(neg))) * h
                last_check = k + 1
    F[K] = rhs(Y[K], grid_value(K - lag)) if lag else rhs(Y[K], Y[K])
    if neg_time is not None:
        warnings.warn(f"solution left the nonnegative cone at t={neg_time:.6g}", PositivityWarning, stacklevel=2)
    times = h * np.arange(K + 1)
    return Trajectory(h, float(tau), times, Y, F, history)


@dataclass(frozen=True)
class Converged:
    rate: float
    label = "Converged"


@dataclass(frozen=True)
class Periodic:
    amplitude: np.ndarray
    period: float
    label = "Periodic"

    @property
    def frequency(self) -> float:
        return 2 * np.pi / self.period


@dataclass(frozen=True)
class Undetermined:
    reason: str = ""
    label = "Undetermined"


def _peaks(t, y):
    """Three-point maxima refined by the vertex of the local parabola."""
    i = np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])) + 1
    ym, y0, yp = y[i - 1], y[i], y[i + 1]
    denom = ym - 2 * y0 + yp
    safe = np.where(denom != 0, denom, -1.0)
    off = np.where(denom != 0, 0.5 * (ym - yp) / safe, 0.0)
    h = t[1] - t[0]
    return t[i] + off * h, y0 - 0.25 * (ym - yp) * off


def _troughs(t, y):
    tt, yy = _peaks(t, -y)
    return tt, -yy


def _decay_rate(traj, u_eq, scale) -> float:
    # slope of log's running maxima over windows, ignoring the rounding floor
    dist = np.max(np.abs(traj.states - u_eq), axis=1)
    w = max(len(dist) // 32, 1)
    nwin = len(dist) // w
    env = dist[: nwin * w].reshape(nwin, w).max(axis=1)
    mids = traj.times[: nwin * w].reshape(nwin, w).mean(axis=1)
    keep = env > 1e-11 * scale
    if keep.sum() < 2:
        return float("inf")
    return float(-np.polyfit(mids[keep], np.log(env[keep]), 1)[0])


def detect_asymptotics(traj: Trajectory, u_eq, transient_fraction: float = 0.5):
    """Classify the tail of a trajectory as Converged, Periodic or Undetermined.

    Converged: the sup distance to ``u_eq`` falls below ``1e-6`` and its
    running maxima over four consecutive tail windows decrease. Periodic: every
    component has at least six peaks, successive peak-to-trough amplitudes
    drift by less than 1% and peak spacing is uniform within 2%.
    """
    u_eq = np.asarray(u_eq, dtype=float)
    t0 = transient_fraction * traj.t_end
    sel = traj.times >= t0
    t, Y = traj.times[sel], traj.states[sel]
    if len(t) < 16:
        return Undetermined("tail too short")
    dist = np.max(np.abs(Y - u_eq), axis=1)
    scale = max(1.0, float(np.max(np.abs(u_eq))))
    chunks = np.array_split(dist, 4)
    env = np.array([c.max() for c in chunks])
    if env[-1] < CONVERGED_ATOL * scale and np.all(np.diff(env) <= 0):
        return Converged(_decay_rate(traj, u_eq, scale))

    amps, periods = [], []
    for j in range(traj.n):
        tp, yp = _peaks(t, Y[:, j])
        tt, yt = _troughs(t, Y[:, j])
        if len(tp) < MIN_PEAKS or len(tt) < MIN_PEAKS - 1:
            return Undetermined(f"component {j + 1}: only {len(tp)} peaks in the tail")
        # pair each peak with the next trough
        k = np.searchsorted(tt, tp)
        ok = k < len(tt)
        p2p = yp[ok] - yt[k[ok]]
        if len(p2p) < MIN_PEAKS - 1 or np.min(p2p) <= 1e-3 * CONVERGED_ATOL * scale:
            return Undetermined(f"component {j + 1}: no sustained oscillation")
        drift = np.abs(np.diff(p2p)) / p2p[1:]
        if np.max(drift[-(MIN_PEAKS - 2):]) > AMPLITUDE_RTOL:
            return Undetermined(f"component {j + 1}: amplitude still drifting ({np.max(drift[-4:]):.2%})")
        sp = np.diff(tp)
        if np.std(sp) > SPACING_RTOL * np.mean(sp):
            return Undetermined(f"component {j + 1}: irregular peak spacing")
        amps.append(float(p2p[-1]))
        periods.append(float(np.mean(sp)))
    return Periodic(np.array(amps), float(np.mean(periods)))


@dataclass(frozen=True)
class HopfVerification:
    passed: bool
    tau_below: float | None
    tau_above: float | None
    below: object
    above: object
    frequency: float | None
    frequency_error: float | None
    notes: str = ""


def _rightmost(model, d, u, tau):
    from .hopf.oracle import oracle_rightmost_roots

    return oracle_rightmost_roots(model, d, u, tau, 24, k=1, check_resolution=False)[0]


def _horizon(period: float, rate: float, tau: float, periods: int = 20) -> float:
    # long enough for a 1e-2 perturbation to decay past 1e-6 (or to saturate) and then for 20 more periods
    rate = max(abs(rate), 1e-6)
    return 2.0 * (periods * period + 25.0 / rate) + 4 * tau


def verify_hopf(model, d: float, hopf, margin: float = 0.15, *, u_eq=None, step: float | None = None,
                tau_no_threshold: float = 10.0, max_t_end: float | None = None) -> HopfVerification:
    """Simulate on both sides of the threshold and check the predicted change of behaviour.

    With ``hopf=None`` (no threshold exists) one run at ``tau_no_threshold``
    must converge.
    """
    from .equilibrium import solve_equilibrium

    model = as_model(model)
    if not 0 < margin <= 0.5:
        raise ValueError("margin must lie in (0, 0.5]")
    if u_eq is None:
        u_eq = hopf.u if hopf is not None else solve_equilibrium(model, d).u
    u_eq = np.asarray(u_eq, dtype=float)
    hist = ConstantHistory(1.01 * u_eq)

    def run(tau, period):
        root = _rightmost(model, d, u_eq, tau)
        t_end = _horizon(period, root.real, tau)
        if max_t_end is not None:
            t_end = min(t_end, max_t_end)
        traj = integrate(model, d, tau, hist, t_end, step)
        return detect_asymptotics(traj, u_eq)

    if hopf is None:
        v = run(tau_no_threshold, 4 * tau_no_threshold)
        ok = isinstance(v, Converged)
        return HopfVerification(ok, tau_no_threshold, None, v, None, None, None, "no delay threshold exists")

    lo, hi = (1 - margin) * hopf.tau0, (1 + margin) * hopf.tau0
    below = run(lo, hopf.period)
    above = run(hi, hopf.period)
    # the period lengthens with tau, so the frequency is compared just above threshold
    near = run(FREQUENCY_OFFSET * hopf.tau0, hopf.period)
    freq = err = None
    if isinstance(near, Periodic):
        freq = near.frequency
        err = abs(freq - hopf.nu) / hopf.nu
    ok = isinstance(below, Converged) and isinstance(above, Periodic) and err is not None and err <= FREQUENCY_RTOL
    return HopfVerification(ok, lo, hi, below, above, freq, err)
