"""Purely imaginary roots ``mu = i nu`` of the characteristic equation.

Two Newton formulations are available. The direct one solves for
``(nu, theta, phi)`` with ``|phi| = 1`` and a real largest component. The scaled
one, used close to the critical dispersal rate, writes ``nu = (d_* - d) h`` and
``phi = r eta + w`` with ``w`` orthogonal to the left Perron vector and solves
for ``(w, r, h, theta)``, which stays well conditioned as ``d -> d_*``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..equilibrium import DstarExpansion, solve_u0
from ..errors import ContinuationError, NoCrossingError, PreconditionError, RegimeBoundaryError
from ..model import ModelConfig, as_model, partials_at
from ..spectral import PerronData, X1_basis, find_dstar
from .characteristic import (
    CharMatrixEval,
    adjoint_eigenvector,
    delta_from_phase,
    fix_phase,
    linear_coefficients,
    root_velocity,
    simplicity_certificate,
)

NEWTON_MAXITER = 60
DEFAULT_L = 3
ROOT_RTOL = 1e-9
THETA_EDGE = 1e-10


@dataclass(frozen=True)
class HopfPoint:
    """A purely imaginary root ``i nu`` at dispersal rate ``d`` with its certificates.

    ``tau_list[l] = (theta + 2 l pi) / nu``; ``S[l]`` is the simplicity certificate
    at ``tau_list[l]`` and ``transversality`` is ``d Re(mu)/d tau`` at ``tau_list[0]``.
    """

    d: float
    nu: float
    theta: float
    phi: np.ndarray
    tau_list: np.ndarray
    S: np.ndarray
    transversality: float
    psi_adj: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    residual: float = 0.0
    source: str = "direct"
    patch: int | None = None
    newton_iters: int = 0

    @property
    def tau0(self) -> float:
        return float(self.tau_list[0])

    @property
    def period(self) -> float:
        return 2 * np.pi / self.nu

    @property
    def start(self) -> tuple[float, float, np.ndarray]:
        return self.nu, self.theta, self.phi


def start_near_dstar(exp: DstarExpansion, P: PerronData) -> tuple[float, float, np.ndarray]:
    """Limit ``(h, theta, phi)`` of the scaled Hopf system at ``d = d_*``.

    ``theta = arccos(-tilde_a / tilde_b)``, ``h = beta sqrt(tilde_b^2 - tilde_a^2) / <eta, sigma>``
    and ``phi = eta``; the frequency at ``d`` is ``(d_* - d) h``.

    Raises
    ------
    NoCrossingError
        If ``tilde_a - tilde_b <= 0``: no delay-induced crossing near ``d_*``.
    """
    ta, tb = exp.tilde_a, exp.tilde_b
    if ta - tb <= 0:
        raise NoCrossingError(f"tilde_a - tilde_b = {ta - tb:.6g} <= 0: stable for every delay near d_*")
    theta = float(np.arccos(-ta / tb))
    h = exp.beta_star * np.sqrt(tb * tb - ta * ta) / P.eta_dot_sigma
    return float(h), theta, P.eta.astype(complex)


def isolated_patch_hopf(a0: float, b0: float, u0: float) -> tuple[float, float]:
    """``(nu, theta)`` of the scalar equation ``v' = u0 a0 v + u0 b0 v(t - tau)``."""
    if not a0 - b0 > 0:
        raise NoCrossingError(f"a0 - b0 = {a0 - b0:.6g} <= 0: isolated patch is stable for every delay")
    return float(u0 * np.sqrt(b0 * b0 - a0 * a0)), float(np.arccos(-a0 / b0))


def reduced_scalar_hopf(exp: DstarExpansion, P: PerronData) -> tuple[float, float]:
    """Crossing ``(nu, theta)`` of ``c' = (beta/<eta,sigma>) (tilde_a c + tilde_b c(t - tau))``.

    This scalar equation governs the amplitude along ``eta`` as ``d -> d_*``;
    its frequency coincides with ``h`` from :func:`start_near_dstar`.
    """
    return isolated_patch_hopf(exp.tilde_a, exp.tilde_b, exp.beta_star / P.eta_dot_sigma)


def start_small_d(model, q: int, u0=None) -> tuple[float, float, np.ndarray]:
    """Isolated-patch crossing ``(nu_q^0, theta_q^0, e_q)`` used to start the small-d branch."""
    model = as_model(model)
    u0 = solve_u0(model.law) if u0 is None else np.asarray(u0, dtype=float)
    a0, b0 = partials_at(model.law, u0)
    nu, theta = isolated_patch_hopf(a0[q], b0[q], u0[q])
    phi = np.zeros(model.n, dtype=complex)
    phi[q] = 1.0
    return nu, theta, phi


def _newton(fun, x0, *, tol, maxiter=NEWTON_MAXITER):
    x = np.array(x0, dtype=float)
    F, J = fun(x)
    fnorm = np.linalg.norm(F)
    for it in range(1, maxiter + 1):
        if fnorm <= tol:
            return x, it - 1, fnorm
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise ContinuationError("singular Jacobian in Hopf Newton iteration", it) from exc
        t = 1.0
        for _ in range(12):
            xt = x + t * dx
            Ft, Jt = fun(xt)
            ft = np.linalg.norm(Ft)
            if ft < fnorm or ft <= tol:
                break
            t *= 0.5
        else:
            if fnorm <= 1e3 * tol:
                return x, it, fnorm
            raise ContinuationError(f"Hopf Newton stalled at residual {fnorm:.3e}", it)
        x, F, J, fnorm = xt, Ft, Jt, ft
        if np.linalg.norm(t * dx) <= 1e-15 * (1 + np.linalg.norm(x)) and fnorm <= 1e3 * tol:
            return x, it, fnorm
    if fnorm <= 1e3 * tol:
        return x, maxiter, fnorm
    raise ContinuationError(f"Hopf Newton did not converge (residual {fnorm:.3e})", maxiter)


def _direct_system(L0, e, k):
    n = len(e)

    def fun(x):
        nu, theta = x[0], x[1]
        phi = x[2 : 2 + n] + 1j * x[2 + n :]
        ph = np.exp(-1j * theta)
        K = delta_from_phase(L0, e, nu, theta)
        H = K @ phi
        F = np.concatenate([H.real, H.imag, [phi.real @ phi.real + phi.imag @ phi.imag - 1.0, phi.imag[k]]])
        J = np.zeros((2 * n + 2, 2 * n + 2))
        cols = [-1j * phi, -1j * ph * e * phi]
        for c, col in enumerate(cols):
            J[:n, c] = col.real
            J[n : 2 * n, c] = col.imag
        J[:n, 2 : 2 + n] = K.real
        J[:n, 2 + n :] = -K.imag
        J[n : 2 * n, 2 : 2 + n] = K.imag
        J[n : 2 * n, 2 + n :] = K.real
        J[2 * n, 2 : 2 + n] = 2 * phi.real
        J[2 * n, 2 + n :] = 2 * phi.imag
        J[2 * n + 1, 2 + n + k] = 1.0
        return F, J

    return fun


def _scaled_system(model: ModelConfig, d: float, u, P: PerronData, B: np.ndarray):
    n = model.n
    eps = P.d_star - d
    ds = P.d_star
    a, b = partials_at(model.law, u)
    q = model.law.excess(u, u) / eps
    v = u / eps  # beta^d (eta + eps xi^d)
    dM = d * P.M_star
    eta = P.eta
    sig = P.sigma_vec
    eta_norm2 = eta @ eta
    p = n - 1

    def fun(x):
        z = x[:p] + 1j * x[p : 2 * p]
        r, h, theta = x[2 * p], x[2 * p + 1], x[2 * p + 2]
        w = B @ z
        phi = r * eta + w
        ph = np.exp(-1j * theta)
        k = P.m + ds * q - 1j * ds * h + ds * v * (a + b * ph)
        F2 = np.sum(sig * k * phi)
        y = dM @ w + eps * k * phi
        F1 = B.T @ (y - eps * F2)
        F3 = (phi.conj() @ phi).real - eta_norm2

        dk_dth = ds * v * b * (-1j * ph)
        # complex-linear part in z
        dF2_dz = (sig * k) @ B
        dy_dz = dM @ B + eps * (k[:, None] * B)
        dF1_dz = B.T @ (dy_dz - eps * np.outer(np.ones(n), dF2_dz))
        real_cols = {
            "r": (B.T @ (eps * k * eta - eps * np.sum(sig * k * eta)), np.sum(sig * k * eta)),
            "h": (B.T @ (-1j * ds * eps * phi + 1j * ds * eps * np.sum(sig * phi)), -1j * ds * np.sum(sig * phi)),
            "th": (B.T @ (eps * dk_dth * phi - eps * np.sum(sig * dk_dth * phi)), np.sum(sig * dk_dth * phi)),
        }
        F = np.concatenate([F1.real, F1.imag, [F2.real, F2.imag, F3]])
        N = 2 * p + 3
        J = np.zeros((N, N))
        J[:p, :p] = dF1_dz.real
        J[:p, p : 2 * p] = -dF1_dz.imag
        J[p : 2 * p, :p] = dF1_dz.imag
        J[p : 2 * p, p : 2 * p] = dF1_dz.real
        J[2 * p, :p] = dF2_dz.real
        J[2 * p, p : 2 * p] = -dF2_dz.imag
        J[2 * p + 1, :p] = dF2_dz.imag
        J[2 * p + 1, p : 2 * p] = dF2_dz.real
        c = phi.conj() @ B
        J[2 * p + 2, :p] = 2 * c.real
        J[2 * p + 2, p : 2 * p] = -2 * c.imag
        for i, key in enumerate(("r", "h", "th")):
            col1, col2 = real_cols[key]
            J[:p, 2 * p + i] = col1.real
            J[p : 2 * p, 2 * p + i] = col1.imag
            J[2 * p, 2 * p + i] = np.real(col2)
            J[2 * p + 1, 2 * p + i] = np.imag(col2)
        J[2 * p + 2, 2 * p] = 2 * (phi.real @ eta)
        return F, J

    return fun, eps


def _to_scaled_unknowns(nu, theta, phi, eps, P, B):
    phi = np.asarray(phi, dtype=complex)
    s = P.sigma_vec @ phi
    if abs(s) < 1e-12 * np.linalg.norm(phi):
        raise PreconditionError("eigenvector is orthogonal to the left Perron vector")
    phi = phi * (abs(s) / s)
    phi = phi * (np.linalg.norm(P.eta) / np.linalg.norm(phi))
    r = (P.sigma_vec @ phi).real / P.eta_dot_sigma
    z = B.T @ (phi - r * P.eta)
    return np.concatenate([z.real, z.imag, [r, nu / eps, theta]])


def _wrap_theta(theta: float) -> float:
    return float(np.mod(theta, 2 * np.pi))


def solve_hopf_point(model, d: float, u_d, start, *, perron: PerronData | None = None,
                     formulation: str = "auto", L: int = DEFAULT_L, source: str | None = None,
                     patch: int | None = None) -> HopfPoint:
    """Newton solve of ``Delta(d, i nu, theta/nu) phi = 0`` from ``start = (nu, theta, phi)``.

    Parameters
    ----------
    model : ModelConfig
    d : float
        Dispersal rate; ``u_d`` must be the converged equilibrium there.
    start : tuple or HopfPoint
        Initial ``(nu, theta, phi)``.
    formulation : {"auto", "direct", "scaled"}
        ``"auto"`` picks the scaled system for ``d >= d_*/2``.
    L : int
        Number of additional delay values ``tau_{d,l}`` to report.

    Raises
    ------
    ContinuationError
        Newton diverged; retry with a closer start.
    RegimeBoundaryError
        The frequency collapsed to zero or the phase hit ``0``/``2 pi``.
    """
    model = as_model(model)
    u = np.asarray(u_d, dtype=float)
    if isinstance(start, HopfPoint):
        start = start.start
    nu0, theta0, phi0 = start
    phi0 = np.asarray(phi0, dtype=complex)
    L0, e = linear_coefficients(model, d, u)
    scale = 1.0 + np.linalg.norm(L0) + np.linalg.norm(e)

    if formulation == "auto":
        if perron is None:
            perron = find_dstar(model.A, model.m)
        formulation = "scaled" if d >= 0.5 * perron.d_star else "direct"

    if formulation == "scaled":
        P = perron if perron is not None else find_dstar(model.A, model.m)
        B = X1_basis(P)
        fun, eps = _scaled_system(model, d, u, P, B)
        if eps <= 0:
            raise PreconditionError("scaled formulation needs d < d_*")
        x0 = _to_scaled_unknowns(nu0, theta0, phi0, eps, P, B)
        tol = 1e-13 * (1 + P.d_star * np.linalg.norm(P.M_star) + np.linalg.norm(P.m))
        x, iters, _ = _newton(fun, x0, tol=tol)
        p = model.n - 1
        z = x[:p] + 1j * x[p : 2 * p]
        r, h, theta = x[2 * p :]
        phi = r * P.eta + B @ z
        nu = eps * h
        phi_norm, adj_norm = np.linalg.norm(P.eta), np.linalg.norm(P.sigma_vec)
    elif formulation == "direct":
        phi0 = fix_phase(phi0 / np.linalg.norm(phi0))
        k = int(np.argmax(np.abs(phi0)))
        fun = _direct_system(L0, e, k)
        x0 = np.concatenate([[nu0, theta0], phi0.real, phi0.imag])
        x, iters, _ = _newton(fun, x0, tol=1e-14 * scale)
        n = model.n
        nu, theta = x[0], x[1]
        phi = x[2 : 2 + n] + 1j * x[2 + n :]
        phi_norm = adj_norm = 1.0
    else:
        raise ValueError(f"unknown formulation {formulation!r}")

    if not nu > 1e-12 * scale:
        raise RegimeBoundaryError(f"Hopf frequency collapsed (nu = {nu:.3e}) at d = {d}")
    theta = _wrap_theta(theta)
    if theta < THETA_EDGE or theta > 2 * np.pi - THETA_EDGE:
        raise RegimeBoundaryError(f"degenerate phase theta = {theta:.3e} at d = {d}")
    return _finalize(model, d, u, L0, e, float(nu), theta, phi, phi_norm, adj_norm, L,
                     source or formulation, patch, iters)


def _finalize(model, d, u, L0, e, nu, theta, phi, phi_norm, adj_norm, L, source, patch, iters):
    phi = fix_phase(phi) * (phi_norm / np.linalg.norm(phi))
    K = delta_from_phase(L0, e, nu, theta)
    res = float(np.linalg.norm(K @ phi))
    if res > ROOT_RTOL * (1 + np.linalg.norm(K, "fro")) * max(1.0, phi_norm):
        raise ContinuationError(f"Hopf root certificate failed (residual {res:.3e}) at d = {d}")
    taus = (theta + 2 * np.pi * np.arange(L + 1)) / nu
    ev = CharMatrixEval(K, d, 1j * nu, taus[0], L0, e)
    psi = adjoint_eigenvector(ev, norm=adj_norm)
    S = np.array([simplicity_certificate(phi, psi, e, theta, t) for t in taus])
    trans = root_velocity(phi, psi, e, nu, theta, taus[0]).real
    return HopfPoint(float(d), nu, theta, phi, taus, S, float(trans), psi, u, res, source, patch, iters)

