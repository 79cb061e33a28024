"""Spectral bound of ``dA + diag(m)``, the critical dispersal rate and Perron vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssumptionError, NumericError
from .model import DispersionMatrix

POWER_RTOL = 1e-13
POWER_MAXITER = 100_000


def _matrix(A) -> np.ndarray:
    return np.asarray(A.entries if isinstance(A, DispersionMatrix) else A, dtype=float)


def _eigvals(M: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        # LAPACK reports the failing QR sweep index in the message
        raise NumericError(f"eigenvalue iteration did not converge: {exc}") from exc


def spectral_bound(A, m, d: float) -> float:
    """Largest real part among the eigenvalues of ``d*A + diag(m)``.

    A closed form is used for two patches; otherwise the dense Hessenberg-QR
    eigenvalue routine.
    """
    if d < 0:
        raise ValueError("dispersal rate must be nonnegative")
    M = d * _matrix(A) + np.diag(np.asarray(m, dtype=float))
    if M.shape == (2, 2):
        tr = M[0, 0] + M[1, 1]
        # (M00 - M11)^2 + 4 M01 M10 avoids cancellation in tr^2 - 4 det
        disc = (M[0, 0] - M[1, 1]) ** 2 + 4.0 * M[0, 1] * M[1, 0]
        if disc >= 0:
            return 0.5 * (tr + np.sqrt(disc))
        return 0.5 * tr
    return float(np.max(_eigvals(M).real))


def spectral_gap(A, m, d: float) -> float:
    """Difference between the largest and second-largest real parts."""
    M = d * _matrix(A) + np.diag(np.asarray(m, dtype=float))
    re = np.sort(_eigvals(M).real)[::-1]
    return float(re[0] - re[1])


def perron_vector(M: np.ndarray, *, rtol: float = POWER_RTOL, maxiter: int = POWER_MAXITER) -> np.ndarray:
    """Positive eigenvector of an irreducible essentially nonnegative matrix.

    Power iteration on ``M + cI`` with ``c = 1 + max_j |M_jj|`` so that the
    shifted matrix is nonnegative with a strictly dominant Perron root. The
    result is normalised to unit sum.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    c = 1.0 + np.max(np.abs(np.diag(M)))
    B = M + c * np.eye(n)
    x = np.full(n, 1.0 / n)
    for it in range(1, maxiter + 1):
        y = B @ x
        y /= y.sum()
        change = np.max(np.abs(y - x)) / np.max(np.abs(y))
        x = y
        if change < rtol:
            break
    else:
        raise NumericError(f"power iteration did not converge in {maxiter} iterations", maxiter)
    return x


def _polish_null_vector(M: np.ndarray, x: np.ndarray) -> np.ndarray:
    # bordered solve [M; 1^T] v = [0; 1] picks the unit-sum null vector exactly
    n = M.shape[0]
    K = np.vstack([M, np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    v, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    if np.all(v > 0) and np.linalg.norm(M @ v) <= np.linalg.norm(M @ x):
        return v
    return x


@dataclass(frozen=True)
class PerronData:
    """Critical dispersal rate with the unit-sum right/left Perron vectors."""

    d_star: float
    eta: np.ndarray
    sigma_vec: np.ndarray
    residuals: tuple[float, float]
    A: np.ndarray
    m: np.ndarray

    @property
    def M_star(self) -> np.ndarray:
        """``d_* A + diag(m)``; singular with kernel spanned by ``eta``."""
        return self.d_star * self.A + np.diag(self.m)

    @property
    def eta_dot_sigma(self) -> float:
        return float(self.eta @ self.sigma_vec)

    def s(self, d: float) -> float:
        return spectral_bound(self.A, self.m, d)


def find_dstar(A, m) -> PerronData:
    """Locate ``d_*`` with ``s(d_*) = 0`` by bisection and compute the Perron pair.

    Relies on ``s(d)`` being strictly decreasing for a lossy irreducible
    dispersal matrix, with ``s(0) = max m > 0``.
    """
    A = _matrix(A)
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0):
        raise AssumptionError("growth rates at the origin must be positive")
    scale = max(1.0, float(np.max(m)))
    atol = 1e-10 * scale
    s = lambda d: spectral_bound(A, m, d)

    lo, hi = 0.0, 1.0
    doublings = 0
    while s(hi) >= 0:
        lo, hi = hi, 2.0 * hi
        doublings += 1
        if doublings > 200:
            raise AssumptionError("spectral bound never becomes negative; is there any population loss?")

    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        smid = s(mid)
        if smid > 0:
            lo = mid
        else:
            hi = mid
    # bisection runs to adjacent floats; pick the endpoint with the smaller |s|
    d_star = lo if abs(s(lo)) <= abs(s(hi)) else hi
    if abs(s(d_star)) > atol:
        raise AssumptionError(f"bisection ended with s(d_*) = {s(d_star):.3e}; s is not continuous here")

    M = d_star * A + np.diag(m)
    eta = _polish_null_vector(M, perron_vector(M))
    sig = _polish_null_vector(M.T, perron_vector(M.T))
    res = (float(np.linalg.norm(M @ eta)), float(np.linalg.norm(M.T @ sig)))
    A.setflags(write=False)
    for v in (eta, sig, m):
        v.setflags(write=False)
    return PerronData(d_star, eta, sig, res, A, m)


def project_X1(x, P: PerronData) -> tuple[float, np.ndarray]:
    """Split ``x = r * eta + w`` with ``<sigma, w> = 0``."""
    x = np.asarray(x)
    r = (P.sigma_vec @ x) / P.eta_dot_sigma
    return r, x - r * P.eta


def X1_basis(P: PerronData) -> np.ndarray:
    """Orthonormal ``n x (n-1)`` basis of the complement ``{x : <sigma, x> = 0}``."""
    s = P.sigma_vec / np.linalg.norm(P.sigma_vec)
    q, _ = np.linalg.qr(np.column_stack([s, np.eye(len(s))]))
    return q[:, 1 : len(s)]
