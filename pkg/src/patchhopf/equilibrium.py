"""The positive equilibrium branch ``u^d`` on ``0 <= d < d_*`` and its profile near ``d_*``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    AssumptionError,
    ContinuationError,
    NoPositiveEquilibriumError,
    PreconditionError,
    UnsupportedLawError,
)
from .model import GrowthLaw, Logistic, ModelConfig, as_model, partials_at
from .spectral import PerronData, find_dstar, project_X1

NEWTON_MAXITER = 100
MAX_HALVINGS = 60
RELAX_CHUNKS = 20


@dataclass(frozen=True)
class EquilibriumPoint:
    d: float
    u: np.ndarray
    residual: float
    newton_iters: int


@dataclass(frozen=True)
class DstarExpansion:
    """Leading-order data of ``u^d = beta (d_*-d) [eta + (d_*-d) xi]`` at ``d = d_*``."""

    beta_star: float
    xi_star: np.ndarray
    tilde_a: float
    tilde_b: float


def solve_u0(law: GrowthLaw, *, tol: float = 1e-12) -> np.ndarray:
    """Isolated-patch equilibria: the positive root of ``g_j(x) = f_j(x, x)``.

    Safeguarded Newton inside a bracket ``[0, x_hi]`` with ``x_hi`` doubled
    until ``g_j(x_hi) < 0``.
    """
    if isinstance(law, Logistic):
        s = law.a_hat + law.b_hat
        if np.any(s <= 0) or np.any(law.m <= 0):
            raise AssumptionError("logistic law needs m > 0 and a_hat + b_hat > 0")
        return law.m / s

    u0 = np.empty(law.n)
    for j in range(law.n):
        g = lambda x: law.eval(j, x, x)
        dg = lambda x: law.dx(j, x, x) + law.dy(j, x, x)
        lo, hi = 0.0, 1.0
        if g(lo) <= 0:
            raise AssumptionError(f"patch {j}: f_j(0,0) must be positive")
        for _ in range(200):
            if g(hi) < 0:
                break
            lo, hi = hi, 2.0 * hi
        else:
            raise AssumptionError(f"patch {j}: g_j(x) = f_j(x,x) never changes sign")
        x = 0.5 * (lo + hi)
        scale = max(1.0, abs(g(0.0)))
        for _ in range(200):
            gx = g(x)
            if abs(gx) <= tol * scale:
                break
            if gx > 0:
                lo = x
            else:
                hi = x
            slope = dg(x)
            step = x - gx / slope if slope != 0 else None
            x = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
            if hi - lo <= 4 * np.finfo(float).eps * hi:
                break
        u0[j] = x
    return u0


def residual(model: ModelConfig, d: float, u) -> np.ndarray:
    """``d A u + u * f(u, u)``; zero at an equilibrium."""
    u = np.asarray(u, dtype=float)
    return d * (model.A.entries @ u) + u * model.law.values(u, u)


def jacobian(model: ModelConfig, d: float, u) -> np.ndarray:
    """Jacobian of :func:`residual`, i.e. the linearisation with the delay set to zero."""
    u = np.asarray(u, dtype=float)
    a, b = partials_at(model.law, u)
    return d * model.A.entries + np.diag(model.law.values(u, u) + u * (a + b))


def _near_dstar_guess(model, d, P, exp):
    eps = P.d_star - d
    return exp.beta_star * eps * (P.eta + eps * exp.xi_star)


def solve_equilibrium(model, d: float | None = None, guess=None, *, perron: PerronData | None = None,
                      tol: float = 1e-12) -> EquilibriumPoint:
    """Positive solution of ``d A u + u f(u, u) = 0`` by damped Newton.

    Newton runs on the per-capita residual ``G(u)/u`` in logarithmic
    coordinates, with step halving while its norm grows. Iteration stops once
    that norm is below ``tol * (1 + max m)`` and the correction has stagnated.
    The reported residual is the unscaled ``|G(u)|``.

    Raises
    ------
    NoPositiveEquilibriumError
        If ``d >= d_*``.
    ContinuationError
        If Newton stagnates; retry from a closer guess.
    """
    model = as_model(model)
    d = model.d if d is None else float(d)
    if d < 0:
        raise ValueError("d must be nonnegative")
    if d == 0:
        u0 = solve_u0(model.law)
        return EquilibriumPoint(0.0, u0, float(np.linalg.norm(residual(model, 0.0, u0))), 0)
    P = perron if perron is not None else find_dstar(model.A, model.m)
    if d >= P.d_star:
        raise NoPositiveEquilibriumError(
            f"d = {d} >= d_* = {P.d_star}: only the trivial equilibrium exists"
        )
    if guess is None:
        if d < 0.5 * P.d_star:
            guess = solve_u0(model.law)
        else:
            guess = _near_dstar_guess(model, d, P, dstar_expansion(model.law, P))
            if np.any(guess <= 0):
                guess = solve_u0(model.law) * (1 - d / P.d_star)
    u = np.array(guess, dtype=float)
    if np.any(u <= 0):
        raise PreconditionError("equilibrium guess must be strictly positive")
    try:
        return _log_newton(model, d, u, tol)
    except ContinuationError:
        pass
    # the positive equilibrium attracts every positive state of u' = G(u);
    # relax along that flow in chunks and retry Newton from the endpoint
    rate = 1.0 + np.max(np.abs(model.m)) + d * np.max(np.abs(model.A.entries).sum(axis=1))
    last = None
    for _ in range(RELAX_CHUNKS):
        sol = solve_ivp(lambda t, x: residual(model, d, x), (0.0, 20.0 / rate * 16), u,
                        method="LSODA", rtol=1e-8, atol=1e-12 * (1 + np.abs(u).max()))
        u = np.maximum(sol.y[:, -1], 1e-300)
        try:
            return _log_newton(model, d, u, tol)
        except ContinuationError as exc:
            last = exc
    raise ContinuationError(f"no positive equilibrium found at d={d}: {last}", NEWTON_MAXITER)


def _log_newton(model, d, u, tol):
    # Newton on the per-capita residual H = G/u in w = log u: iterates stay
    # positive and the trivial root u = 0 is not a solution of H = 0
    w = np.log(u)
    H = residual(model, d, u) / u
    hnorm = np.linalg.norm(H)
    scale = 1.0 + np.max(np.abs(model.m))
    converged_once = False
    for it in range(1, NEWTON_MAXITER + 1):
        Jw = jacobian(model, d, u) * u[None, :] / u[:, None] - np.diag(H)
        try:
            delta = np.linalg.solve(Jw, -H)
        except np.linalg.LinAlgError as exc:
            raise ContinuationError(f"singular Jacobian at d={d}", it) from exc
        # cap the log step so one iterate cannot over- or underflow
        t = min(1.0, 2.0 / max(np.max(np.abs(delta)), 1e-300))
        for _ in range(MAX_HALVINGS):
            wt = w + t * delta
            ut = np.exp(wt)
            Ht = residual(model, d, ut) / ut
            ht = np.linalg.norm(Ht)
            if np.isfinite(ht) and (ht <= hnorm or converged_once or ht <= tol * scale):
                break
            t *= 0.5
        else:
            raise ContinuationError(f"Newton line search failed at d={d}; use a closer guess", it)
        step = t * np.linalg.norm(delta)
        w, u, H, hnorm = wt, ut, Ht, ht
        small = hnorm <= tol * scale
        if small and (converged_once or step <= 1e-14):
            return EquilibriumPoint(d, u, float(np.linalg.norm(residual(model, d, u))), it)
        converged_once = converged_once or small
    if converged_once:
        return EquilibriumPoint(d, u, float(np.linalg.norm(residual(model, d, u))), NEWTON_MAXITER)
    raise ContinuationError(
        f"Newton stagnated at d={d} (per-capita residual {hnorm:.3e}); continue from a nearer d", NEWTON_MAXITER
    )


def equilibrium_branch(model, d_grid, *, perron: PerronData | None = None) -> list[EquilibriumPoint]:
    """Continue the equilibrium along increasing ``d``, warm-starting each solve."""
    model = as_model(model)
    d_grid = np.asarray(d_grid, dtype=float)
    if np.any(np.diff(d_grid) <= 0):
        raise ValueError("d_grid must be strictly increasing")
    P = perron if perron is not None else find_dstar(model.A, model.m)
    out, guess = [], None
    for d in d_grid:
        try:
            pt = solve_equilibrium(model, d, guess, perron=P)
        except ContinuationError:
            # the warm start failed; the regime-aware default guess is the fallback
            pt = solve_equilibrium(model, d, None, perron=P)
        except Exception as exc:
            raise type(exc)(f"at d={d}: {exc}") from exc
        out.append(pt)
        guess = pt.u
    return out


def expansion_coefficients(law: GrowthLaw, P: PerronData) -> tuple[float, float]:
    """``(tilde_a, tilde_b) = sum_j (a_j, b_j) eta_j^2 sigma_j`` with partials at the origin."""
    a, b = partials_at(law, np.zeros(law.n))
    w = P.eta**2 * P.sigma_vec
    return float(a @ w), float(b @ w)


def bordered_solve(M: np.ndarray, right: np.ndarray, left: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``M x = rhs`` with ``<left, x> = 0`` for singular ``M = ker span{right}``.

    The Lagrange multiplier on the ``right`` direction makes the bordered matrix
    nonsingular; it vanishes when ``rhs`` lies in the range of ``M``.
    """
    n = M.shape[0]
    K = np.zeros((n + 1, n + 1), dtype=np.result_type(M, rhs))
    K[:n, :n] = M
    K[:n, n] = right
    K[n, :n] = left
    sol = np.linalg.solve(K, np.concatenate([rhs, [0.0]]))
    return sol[:n]


def dstar_expansion(law: GrowthLaw, P: PerronData) -> DstarExpansion:
    """``beta^{d_*}`` and ``xi^{d_*}`` of the near-critical equilibrium profile."""
    a, b = partials_at(law, np.zeros(law.n))
    ta, tb = expansion_coefficients(law, P)
    if ta + tb >= 0:
        raise AssumptionError(f"tilde_a + tilde_b = {ta + tb} must be negative")
    m, eta, d_star = P.m, P.eta, P.d_star
    beta = float(m @ (eta * P.sigma_vec)) / (-d_star * (ta + tb))
    forcing = eta * (m + d_star * beta * (a + b) * eta)
    xi = bordered_solve(d_star * P.M_star, eta, P.sigma_vec, -forcing)
    xi.setflags(write=False)
    return DstarExpansion(beta, xi, ta, tb)


def profile_coefficients(u, d: float, P: PerronData) -> tuple[float, np.ndarray]:
    """``(beta^d, xi^d)`` such that ``u = beta (d_*-d) [eta + (d_*-d) xi]``, ``xi`` in X1."""
    eps = P.d_star - d
    r, w = project_X1(u, P)
    beta = r / eps
    return float(beta), w / (beta * eps * eps)


def du_at_zero(A, m=None, law: GrowthLaw | None = None) -> np.ndarray:
    """Slope ``(1/m_j) sum_k A_jk m_k`` of the Hutchinson equilibrium branch at ``d = 0``."""
    if law is not None:
        if not (isinstance(law, Logistic) and law.is_hutchinson):
            raise UnsupportedLawError("du_at_zero needs the logistic law with a_hat = 0, b_hat = 1")
        m = law.m if m is None else m
    if m is None:
        raise TypeError("growth rates m are required")
    A = np.asarray(A.entries if hasattr(A, "entries") else A, dtype=float)
    m = np.asarray(m, dtype=float)
    return (A @ m) / m
