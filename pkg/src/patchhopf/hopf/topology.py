"""Topology index of a dispersal network and the small-d expansion of the first Hopf delay.

For the Hutchinson law ``f_j = m_j - u_j(t - tau)`` the first delay threshold
behaves like ``pi/(2 m_q) + d T(A)/m_q^2`` as ``d -> 0``, where ``q`` is the
patch with the largest growth rate and ``T(A)`` depends only on row ``q`` of A.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BoundaryCaseError
from ..model import DEGENERACY_RTOL


def _row_data(A, m):
    A = np.asarray(A.entries if hasattr(A, "entries") else A, dtype=float)
    m = np.asarray(m, dtype=float)
    q = unique_argmax(m)
    off = sum(A[q, k] * m[k] for k in range(len(m)) if k != q)
    return A, m, q, off


def unique_argmax(m, rtol: float = DEGENERACY_RTOL) -> int:
    """Index of the largest growth rate.

    Raises
    ------
    BoundaryCaseError
        If the maximum is attained (within ``rtol``) at more than one patch.
    """
    m = np.asarray(m, dtype=float)
    top = float(np.max(m))
    ties = np.flatnonzero(np.abs(m - top) <= rtol * abs(top))
    if len(ties) > 1:
        raise BoundaryCaseError(f"growth-rate maximum {top} is attained at patches {ties.tolist()}", ties.tolist())
    return int(ties[0])


@dataclass(frozen=True)
class TopologyData:
    """``T(A)``, the patch ``q_hat`` and the ``d = 0`` derivatives of phase and frequency."""

    T: float
    q_hat: int
    tau_limit: float
    theta_prime: float
    nu_prime: float

    @property
    def tau_prime(self) -> float:
        m = np.pi / (2 * self.tau_limit)
        return self.T / m**2

    @property
    def slope_sign(self) -> int:
        return int(np.sign(self.T))


def topology_index(A, m) -> float:
    """``-(pi/2) A_qq + (1 - pi/2) (1/m_q) sum_{k != q} A_qk m_k`` with ``q = argmax m``."""
    A, m, q, off = _row_data(A, m)
    return float(-0.5 * np.pi * A[q, q] + (1 - 0.5 * np.pi) * off / m[q])


def topology_data(A, m) -> TopologyData:
    A, m, q, off = _row_data(A, m)
    mq = m[q]
    theta_prime = off / mq**2
    nu_prime = (A[q, q] * mq + off) / mq
    return TopologyData(topology_index(A, m), q, float(np.pi / (2 * mq)), float(theta_prime), float(nu_prime))


def tau_expansion(A, m, d: float) -> float:
    """Two-term small-d approximation of the first Hopf delay."""
    t = topology_data(A, m)
    return t.tau_limit + d * t.tau_prime


def tau_prime_from_ingredients(t: TopologyData) -> float:
    """``(theta/nu)'`` at ``d = 0`` assembled from ``theta'`` and ``nu'``; equals ``T/m^2``."""
    m = np.pi / (2 * t.tau_limit)
    return t.theta_prime / m - 0.5 * np.pi * t.nu_prime / m**2
