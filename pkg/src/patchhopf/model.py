"""Patch model data: dispersion matrix, per-patch growth laws, assumption checks.

Row ``j`` of the dispersion matrix holds the inflow rates into patch ``j``:
``A[j, k]`` (``j != k``) is the movement rate from patch ``k`` to patch ``j`` and
``-A[j, j]`` is the rate of leaving patch ``j``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AssumptionError, BoundaryCaseError, DimensionError

DEGENERACY_RTOL = 1e-9
MONOTONE_SAMPLES = 256


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of an assumption check; ``violations`` names each failed clause."""

    valid: bool
    violations: tuple[str, ...] = ()
    messages: tuple[str, ...] = ()

    def __bool__(self):
        return self.valid

    def summary(self) -> str:
        if self.valid:
            return "valid"
        return "; ".join(f"{v}: {m}" for v, m in zip(self.violations, self.messages))


def _as_square(entries) -> np.ndarray:
    arr = np.array(entries, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"dispersion matrix must be square, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise DimensionError("need at least two patches")
    if not np.all(np.isfinite(arr)):
        raise DimensionError("dispersion matrix has non-finite entries")
    return arr


def _strongly_connected(positive: np.ndarray) -> bool:
    # positive[j, k] means an edge k -> j
    n = positive.shape[0]

    def reach(adj):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            v = queue.popleft()
            for w in np.flatnonzero(adj[v]):
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
        return seen.all()

    off = positive & ~np.eye(n, dtype=bool)
    # adj[v, w]: edge v -> w, i.e. positive[w, v]
    return reach(off.T) and reach(off)


def validate_dispersion(A) -> ValidationReport:
    """Check the dispersal assumption: essentially nonnegative, irreducible, lossy.

    Parameters
    ----------
    A : array_like or DispersionMatrix
        Square matrix of dispersal rates.

    Returns
    -------
    ValidationReport
        ``violations`` is a subset of ``("sign_pattern", "irreducibility",
        "column_loss")``.
    """
    arr = A.entries if isinstance(A, DispersionMatrix) else _as_square(A)
    n = arr.shape[0]
    violations, messages = [], []
    off = ~np.eye(n, dtype=bool)
    scale = max(1.0, float(np.abs(arr).max()))

    bad_off = np.argwhere((arr < 0) & off)
    bad_diag = np.flatnonzero(np.diag(arr) > 0)
    if bad_off.size or bad_diag.size:
        violations.append("sign_pattern")
        parts = [f"A[{j},{k}] < 0" for j, k in bad_off[:3]]
        parts += [f"A[{j},{j}] > 0" for j in bad_diag[:3]]
        messages.append("off-diagonal entries must be >= 0 and diagonal <= 0 (" + ", ".join(parts) + ")")

    if not _strongly_connected(arr > 0):
        violations.append("irreducibility")
        messages.append("patch graph is not strongly connected")

    loss = -np.diag(arr) - (arr * off).sum(axis=0)
    tol = 1e-12 * scale
    if np.any(loss < -tol) or not np.any(loss > tol):
        violations.append("column_loss")
        if np.any(loss < -tol):
            cols = np.flatnonzero(loss < -tol)
            messages.append(f"columns {cols.tolist()} gain population during dispersal")
        else:
            messages.append("no column has strict population loss (closed habitat)")

    return ValidationReport(not violations, tuple(violations), tuple(messages))


@dataclass(frozen=True)
class DispersionMatrix:
    """Immutable ``n x n`` dispersal matrix with its assumption report."""

    entries: np.ndarray
    report: ValidationReport = field(init=False, repr=False, compare=False)

    def __init__(self, entries):
        arr = _as_square(entries)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "report", validate_dispersion(arr))

    @classmethod
    def coerce(cls, A) -> "DispersionMatrix":
        return A if isinstance(A, cls) else cls(A)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def valid(self) -> bool:
        return self.report.valid

    def require_valid(self) -> "DispersionMatrix":
        if not self.report.valid:
            raise AssumptionError(f"dispersion matrix is not admissible: {self.report.summary()}")
        return self

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, DispersionMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())


class GrowthLaw:
    """Per-capita growth rates ``f_j(x, y)`` with first partial derivatives.

    ``x`` is the current density and ``y`` the delayed one. Vectorised methods
    take per-patch arrays of length ``n``; ``eval``, ``dx`` and ``dy`` evaluate a
    single patch.
    """

    n: int

    def values(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def dx_values(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def dy_values(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def eval(self, j, x, y) -> float:
        return float(self._patch(self.values, j, x, y))

    def dx(self, j, x, y) -> float:
        return float(self._patch(self.dx_values, j, x, y))

    def dy(self, j, x, y) -> float:
        return float(self._patch(self.dy_values, j, x, y))

    def _patch(self, fn, j, x, y):
        xs = np.zeros(self.n)
        ys = np.zeros(self.n)
        xs[j], ys[j] = x, y
        return fn(xs, ys)[j]

    @property
    def m(self) -> np.ndarray:
        """Intrinsic growth rates ``f_j(0, 0)``."""
        z = np.zeros(self.n)
        return np.asarray(self.values(z, z), dtype=float)

    def excess(self, x, y) -> np.ndarray:
        """``f_j(x, y) - m_j``; subclasses override when it has a cancellation-free form."""
        return np.asarray(self.values(x, y)) - self.m


@dataclass(frozen=True, eq=False)
class Logistic(GrowthLaw):
    """``f_j(x, y) = m_j - a_hat_j x - b_hat_j y``."""

    m_: np.ndarray
    a_hat: np.ndarray
    b_hat: np.ndarray

    def __init__(self, m, a_hat=None, b_hat=None):
        m = np.atleast_1d(np.array(m, dtype=float))
        a_hat = np.zeros_like(m) if a_hat is None else np.broadcast_to(np.array(a_hat, dtype=float), m.shape).copy()
        b_hat = np.ones_like(m) if b_hat is None else np.broadcast_to(np.array(b_hat, dtype=float), m.shape).copy()
        if m.ndim != 1:
            raise DimensionError("m must be a vector")
        for arr in (m, a_hat, b_hat):
            arr.setflags(write=False)
        object.__setattr__(self, "m_", m)
        object.__setattr__(self, "a_hat", a_hat)
        object.__setattr__(self, "b_hat", b_hat)

    @classmethod
    def hutchinson(cls, m) -> "Logistic":
        """Purely delayed density dependence: ``a_hat = 0``, ``b_hat = 1``."""
        m = np.atleast_1d(np.array(m, dtype=float))
        return cls(m, np.zeros_like(m), np.ones_like(m))

    @property
    def n(self) -> int:
        return self.m_.shape[0]

    @property
    def m(self) -> np.ndarray:
        return self.m_

    @property
    def is_hutchinson(self) -> bool:
        return bool(np.all(self.a_hat == 0.0) and np.all(self.b_hat == 1.0))

    def values(self, x, y):
        return self.m_ - self.a_hat * np.asarray(x) - self.b_hat * np.asarray(y)

    def excess(self, x, y):
        return -self.a_hat * np.asarray(x) - self.b_hat * np.asarray(y)

    def dx_values(self, x, y):
        return -self.a_hat * np.ones_like(np.asarray(x, dtype=float))

    def dy_values(self, x, y):
        return -self.b_hat * np.ones_like(np.asarray(y, dtype=float))

    def __repr__(self):
        return f"Logistic(m={self.m_.tolist()}, a_hat={self.a_hat.tolist()}, b_hat={self.b_hat.tolist()})"


PatchFn = Callable[[float, float], float]


class CallableLaw(GrowthLaw):
    """Growth law assembled from user callables ``(f, df/dx, df/dy)``.

    Each of ``f``, ``fx``, ``fy`` is either one callable ``g(x, y)`` shared by all
    patches or a sequence of ``n`` callables.
    """

    def __init__(self, n: int, f, fx, fy):
        self.n = int(n)
        self._f = self._per_patch(f)
        self._fx = self._per_patch(fx)
        self._fy = self._per_patch(fy)

    def _per_patch(self, fn) -> list[PatchFn]:
        if callable(fn):
            return [fn] * self.n
        fns = list(fn)
        if len(fns) != self.n:
            raise DimensionError(f"expected {self.n} callables, got {len(fns)}")
        return fns

    @staticmethod
    def _apply(fns, x, y):
        x = np.broadcast_to(np.asarray(x, dtype=float), (len(fns),))
        y = np.broadcast_to(np.asarray(y, dtype=float), (len(fns),))
        return np.array([float(g(xi, yi)) for g, xi, yi in zip(fns, x, y)])

    def values(self, x, y):
        return self._apply(self._f, x, y)

    def dx_values(self, x, y):
        return self._apply(self._fx, x, y)

    def dy_values(self, x, y):
        return self._apply(self._fy, x, y)


def partials_at(law: GrowthLaw, point) -> tuple[np.ndarray, np.ndarray]:
    """Patchwise ``(df_j/dx, df_j/dy)`` evaluated at ``(point_j, point_j)``."""
    point = np.asarray(point, dtype=float)
    return np.asarray(law.dx_values(point, point)), np.asarray(law.dy_values(point, point))


def _scalar_u0_upper(law: GrowthLaw, j: int) -> float | None:
    x = 1.0
    for _ in range(200):
        if law.eval(j, x, x) < 0:
            return x
        x *= 2.0
    return None


def validate_growth_law(law: GrowthLaw) -> ValidationReport:
    """Check ``f_j(0,0) = m_j > 0`` and that ``g_j(x) = f_j(x, x)`` decreases on x > 0.

    Logistic laws are checked analytically (``a_hat + b_hat > 0``). Other laws
    are sampled on a log-spaced grid of (0, 10 u_j^0].
    """
    violations, messages = [], []
    m = law.m
    if np.any(~np.isfinite(m)) or np.any(m <= 0):
        violations.append("growth_at_origin")
        messages.append(f"f_j(0,0) must be positive, got {m.tolist()}")

    if isinstance(law, Logistic):
        bad = np.flatnonzero(law.a_hat + law.b_hat <= 0)
        if bad.size:
            violations.append("monotone_g")
            messages.append(f"a_hat + b_hat must be > 0 at patches {bad.tolist()}")
    else:
        bad = []
        for j in range(law.n):
            hi = _scalar_u0_upper(law, j)
            if hi is None:
                bad.append(j)
                continue
            grid = np.logspace(np.log10(hi) - 8, np.log10(10 * hi), MONOTONE_SAMPLES)
            g = np.array([law.eval(j, x, x) for x in grid])
            # g' = f_x + f_y must be negative; neighbouring samples may round to ties
            slope = np.array([law.dx(j, x, x) + law.dy(j, x, x) for x in grid])
            if np.any(slope >= 0) or np.any(np.diff(g) > 0):
                bad.append(j)
        if bad:
            violations.append("monotone_g")
            messages.append(f"g_j(x) = f_j(x,x) is not strictly decreasing at patches {bad}")

    return ValidationReport(not violations, tuple(violations), tuple(messages))


@dataclass(frozen=True)
class PatchPartition:
    """Split of patches by the sign of ``a_j^0 - b_j^0``."""

    oscillatory: tuple[int, ...]
    stable: tuple[int, ...]
    degenerate: tuple[int, ...]
    gap: np.ndarray = field(repr=False, compare=False)

    @property
    def p(self) -> int:
        return len(self.oscillatory)


def classify_patches(law: GrowthLaw, u0, *, rtol: float = DEGENERACY_RTOL, strict: bool = True) -> PatchPartition:
    """Partition patches into ``a_j^0 - b_j^0 > 0`` (can oscillate) and ``< 0``.

    Raises
    ------
    BoundaryCaseError
        If ``strict`` and some patch has ``|a_j^0 - b_j^0|`` within ``rtol`` of 0.
    """
    a0, b0 = partials_at(law, u0)
    gap = a0 - b0
    scale = np.maximum(np.abs(a0) + np.abs(b0), np.finfo(float).tiny)
    degenerate = np.abs(gap) <= rtol * scale
    part = PatchPartition(
        oscillatory=tuple(int(j) for j in np.flatnonzero((gap > 0) & ~degenerate)),
        stable=tuple(int(j) for j in np.flatnonzero((gap < 0) & ~degenerate)),
        degenerate=tuple(int(j) for j in np.flatnonzero(degenerate)),
        gap=gap,
    )
    if strict and part.degenerate:
        raise BoundaryCaseError(
            f"boundary case: a_j^0 = b_j^0 at patches {list(part.degenerate)}", part.degenerate
        )
    return part


@dataclass(frozen=True)
class ModelConfig:
    """A dispersal matrix, a growth law, and optionally a dispersal rate and delay."""

    A: DispersionMatrix
    law: GrowthLaw
    d: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "A", DispersionMatrix.coerce(self.A))
        if self.A.n != self.law.n:
            raise DimensionError(f"matrix has {self.A.n} patches but growth law has {self.law.n}")
        if self.d < 0 or self.tau < 0:
            raise ValueError("d and tau must be nonnegative")

    @property
    def n(self) -> int:
        return self.A.n

    @property
    def m(self) -> np.ndarray:
        return self.law.m

    def with_(self, **changes) -> "ModelConfig":
        params = dict(A=self.A, law=self.law, d=self.d, tau=self.tau)
        params.update(changes)
        return ModelConfig(**params)

    def validate(self) -> ValidationReport:
        r1, r2 = self.A.report, validate_growth_law(self.law)
        return ValidationReport(
            r1.valid and r2.valid, r1.violations + r2.violations, r1.messages + r2.messages
        )

    def require_valid(self) -> "ModelConfig":
        report = self.validate()
        if not report.valid:
            raise AssumptionError(report.summary())
        return self


def as_model(A, law: GrowthLaw | Sequence[float] | None = None, **kw) -> ModelConfig:
    """Build a ModelConfig; a bare vector for ``law`` means a Hutchinson law."""
    if isinstance(A, ModelConfig):
        return A.with_(**kw) if kw else A
    if law is None:
        raise TypeError("a growth law (or growth-rate vector) is required")
    if not isinstance(law, GrowthLaw):
        law = Logistic.hutchinson(law)
    return ModelConfig(DispersionMatrix.coerce(A), law, **kw)
