"""Independent characteristic-root oracle by pseudospectral collocation.

The linear delay system ``v' = L0 v(t) + E v(t - tau)`` is rewritten as an
abstract ODE on the history segment over ``[-tau, 0]``; collocating that
generator at ``N + 1`` Chebyshev points gives a ``(N+1)n`` square matrix
whose rightmost eigenvalues converge spectrally to the characteristic roots.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import PreconditionError, ResolutionWarning
from ..model import as_model

RESOLUTION_ATOL = 1e-6


def linearise_numerically(model, d: float, u, rel_step: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """``(L0, E)`` by central differences of the model right-hand side in the present and delayed state.

    Deliberately independent of the analytic assembly used by the Hopf solver.
    """
    model = as_model(model)
    u = np.asarray(u, dtype=float)
    A = d * model.A.entries

    def rhs(x, y):
        return A @ x + x * model.law.values(x, y)

    n = len(u)
    L0, E = np.empty((n, n)), np.empty((n, n))
    for k in range(n):
        h = rel_step * max(abs(u[k]), 1e-3)
        dk = np.zeros(n)
        dk[k] = h
        L0[:, k] = (rhs(u + dk, u) - rhs(u - dk, u)) / (2 * h)
        E[:, k] = (rhs(u, u + dk) - rhs(u, u - dk)) / (2 * h)
    return L0, E


def cheb(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev differentiation matrix and nodes ``x_k = cos(k pi / N)`` on ``[-1, 1]``."""
    x = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    X = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (X + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return D, x


def generator_matrix(L0: np.ndarray, E: np.ndarray, tau: float, N: int) -> np.ndarray:
    n = L0.shape[0]
    if tau == 0:
        return L0 + E
    D, _ = cheb(N)
    D = D * (2.0 / tau)  # map [-1, 1] onto [-tau, 0]; node 0 is t = 0, node N is t = -tau
    G = np.kron(D, np.eye(n))
    G[:n, :] = 0.0
    G[:n, :n] = L0
    G[:n, N * n :] = E
    return G


def _roots(L0, E, tau, N):
    lam = np.linalg.eigvals(generator_matrix(L0, E, tau, N))
    return lam[np.lexsort((-lam.imag, -lam.real))]


def oracle_rightmost_roots(model, d: float, u_d, tau: float, N: int = 32, *, k: int | None = None,
                           check_resolution: bool = True) -> np.ndarray:
    """Approximate characteristic roots sorted by decreasing real part.

    Parameters
    ----------
    N : int
        Collocation order, at least 8.
    k : int, optional
        Return only the ``k`` rightmost roots.
    check_resolution : bool
        Repeat with ``2N`` and emit :class:`ResolutionWarning` if the rightmost
        root moves by more than ``1e-6``.
    """
    if N < 8:
        raise PreconditionError("collocation order N must be at least 8")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    L0, E = linearise_numerically(model, d, u_d)
    lam = _roots(L0, E, tau, N)
    if check_resolution and tau > 0:
        fine = _roots(L0, E, tau, 2 * N)
        shift = abs(fine[0] - lam[0])
        if shift > RESOLUTION_ATOL and abs(fine[0] - np.conj(lam[0])) > RESOLUTION_ATOL:
            warnings.warn(
                f"rightmost root moved by {shift:.2e} when doubling N={N}; increase N",
                ResolutionWarning,
                stacklevel=2,
            )
    return lam if k is None else lam[:k]


def leading_real_part(model, d, u_d, tau, N=32) -> float:
    return float(oracle_rightmost_roots(model, d, u_d, tau, N, k=1, check_resolution=False)[0].real)


def oracle_crossing_tau(model, d, u_d, tau_lo: float, tau_hi: float, N: int = 32, *, rtol: float = 1e-12) -> float:
    """Bisection for the delay where the leading real part changes sign inside ``[tau_lo, tau_hi]``."""
    model = as_model(model)
    g = lambda t: leading_real_part(model, d, u_d, t, N)
    glo, ghi = g(tau_lo), g(tau_hi)
    if glo * ghi > 0:
        raise PreconditionError(f"no sign change of the leading real part on [{tau_lo}, {tau_hi}]")
    lo, hi = tau_lo, tau_hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if (gm > 0) == (ghi > 0):
            hi, ghi = mid, gm
        else:
            lo, glo = mid, gm
    return 0.5 * (lo + hi)


def oracle_slope(model, d, u_d, tau: float, N: int = 32, *, rel_step: float = 1e-5) -> float:
    """Central finite difference of the leading real part in ``tau``."""
    model = as_model(model)
    h = rel_step * tau
    return (leading_real_part(model, d, u_d, tau + h, N) - leading_real_part(model, d, u_d, tau - h, N)) / (2 * h)
