"""Characteristic matrix of the delayed linearisation and the root certificates built on it.

At an equilibrium ``u`` the linearisation reads ``v' = L0 v(t) + diag(e) v(t - tau)``
with ``L0 = dA + diag(f(u,u) + u a)`` and ``e = u b``, where ``(a, b)`` are the
partials of the growth law at ``(u, u)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PreconditionError
from ..model import ModelConfig, as_model, partials_at


def linear_coefficients(model: ModelConfig, d: float, u) -> tuple[np.ndarray, np.ndarray]:
    """``(L0, e)``: instantaneous matrix and delayed diagonal of the linearisation."""
    u = np.asarray(u, dtype=float)
    a, b = partials_at(model.law, u)
    L0 = d * model.A.entries + np.diag(model.law.values(u, u) + u * a)
    return L0, u * b


@dataclass(frozen=True)
class CharMatrixEval:
    """``Delta(d, mu, tau) = L0 + exp(-mu tau) diag(e) - mu I`` with its ingredients."""

    value: np.ndarray
    d: float
    mu: complex
    tau: float
    L0: np.ndarray
    e: np.ndarray

    @property
    def theta(self) -> float:
        """Phase lag ``Im(mu) * tau``."""
        return float(np.imag(self.mu) * self.tau)


def eval_delta(model, d: float, u_d, mu: complex, tau: float) -> CharMatrixEval:
    model = as_model(model)
    L0, e = linear_coefficients(model, d, u_d)
    n = len(e)
    value = L0 + np.exp(-mu * tau) * np.diag(e) - mu * np.eye(n)
    return CharMatrixEval(value.astype(complex), float(d), complex(mu), float(tau), L0, e)


def delta_from_phase(L0: np.ndarray, e: np.ndarray, nu: float, theta: float) -> np.ndarray:
    """``Delta`` at ``mu = i nu`` with ``nu * tau`` replaced by the phase ``theta``."""
    return L0 + np.exp(-1j * theta) * np.diag(e) - 1j * nu * np.eye(len(e))


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so its largest-modulus entry is real and positive."""
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def adjoint_eigenvector(ev: CharMatrixEval, *, norm: float = 1.0, rtol: float = 1e-8) -> np.ndarray:
    """Null vector of the conjugate transpose of ``Delta``.

    Raises
    ------
    PreconditionError
        If ``Delta`` is not numerically singular.
    """
    U, s, _ = np.linalg.svd(ev.value)
    scale = 1.0 + np.linalg.norm(ev.value, "fro")
    if s[-1] > rtol * scale:
        raise PreconditionError(
            f"characteristic matrix is not singular (smallest singular value {s[-1]:.3e})"
        )
    # Delta^H U[:, -1] = s_min V[:, -1]
    psi = U[:, -1]
    return fix_phase(psi) * (norm / np.linalg.norm(psi))


def simplicity_certificate(phi, psi_adj, e, theta: float, tau: float) -> complex:
    """``<psi, phi> + tau e^{-i theta} <psi, diag(e) phi>``; nonzero iff the root is simple."""
    inner = np.vdot(psi_adj, phi)
    weighted = np.vdot(psi_adj, e * phi)
    return complex(inner + tau * np.exp(-1j * theta) * weighted)


def root_velocity(phi, psi_adj, e, nu: float, theta: float, tau: float) -> complex:
    """``d mu / d tau`` of the critical root at ``mu = i nu``."""
    num = -1j * nu * np.exp(-1j * theta) * np.vdot(psi_adj, e * phi)
    return complex(num / simplicity_certificate(phi, psi_adj, e, theta, tau))
