import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from patchhopf.equilibrium import solve_equilibrium
from patchhopf.errors import PreconditionError, ResolutionWarning
from patchhopf.hopf import (
    hopf_curve,
    hopf_point_at,
    near_tag,
    oracle_crossing_tau,
    oracle_rightmost_roots,
    oracle_slope,
    small_tag,
    tau_expansion,
)
from patchhopf.hopf.oracle import cheb, linearise_numerically
from patchhopf.hopf.characteristic import linear_coefficients
from patchhopf.model import Logistic, as_model

from conftest import A3, A4, M2, SYMMETRIC


class TestOracle:
    def test_cheb_differentiates_polynomials(self):
        D, x = cheb(12)
        assert_allclose(D @ x**5, 5 * x**4, atol=1e-11)

    def test_numeric_linearisation(self, a3):
        u = solve_equilibrium(a3, 0.6).u
        L0, E = linearise_numerically(a3, 0.6, u)
        L0_ref, e = linear_coefficients(a3, 0.6, u)
        assert_allclose(L0, L0_ref, atol=1e-8)
        assert_allclose(E, np.diag(e), atol=1e-8)

    def test_scalar_hutchinson_threshold(self, a3):
        # at d = 0 patch 1 (m = 1) obeys v' = -v(t - tau): roots +-i at tau = pi/2
        lam = oracle_rightmost_roots(a3, 0.0, [1.0, 2.0], np.pi / 2, k=4)
        assert np.any(np.abs(lam - 1j) < 1e-8)
        # the m = 2 patch is already unstable at tau = pi/2 > pi/4
        assert lam[0].real > 0

    def test_scalar_stable_below_threshold(self, sym):
        # decoupled identical patches: v' = -v(t - tau) twice
        lam = oracle_rightmost_roots(sym, 0.0, [1.0, 1.0], 1.0, k=2)
        assert lam[0].real < 0
        lam = oracle_rightmost_roots(sym, 0.0, [1.0, 1.0], np.pi / 2, k=4)
        assert_allclose(sorted(lam.imag), [-1, -1, 1, 1], atol=1e-7)
        assert_allclose(lam.real, 0, atol=1e-7)

    def test_symmetric_roots(self, sym):
        lam = oracle_rightmost_roots(sym, 0.5, [0.5, 0.5], np.pi, k=2)
        assert_allclose(sorted(lam.imag), [-0.5, 0.5], atol=1e-9)
        assert_allclose(lam.real, 0, atol=1e-9)

    def test_no_delay_is_jacobian(self, a3):
        u = solve_equilibrium(a3, 0.6).u
        lam = oracle_rightmost_roots(a3, 0.6, u, 0.0)
        L0, e = linear_coefficients(a3, 0.6, u)
        assert_allclose(np.sort(lam.real), np.sort(np.linalg.eigvals(L0 + np.diag(e)).real), atol=1e-7)

    def test_resolution_warning(self):
        # a strong delayed coefficient puts many roots far right; N = 8 cannot resolve them
        model = as_model(SYMMETRIC, Logistic([100.0, 100.0], [0.0, 0.0], [100.0, 100.0]))
        with pytest.warns(ResolutionWarning):
            oracle_rightmost_roots(model, 0.0, [1.0, 1.0], 10.0, N=8)

    def test_well_resolved_is_silent(self, sym):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            oracle_rightmost_roots(sym, 0.5, [0.5, 0.5], np.pi)

    def test_small_order_rejected(self, sym):
        with pytest.raises(PreconditionError):
            oracle_rightmost_roots(sym, 0.5, [0.5, 0.5], 1.0, N=4)

    def test_crossing_and_slope(self, sym):
        tau = oracle_crossing_tau(sym, 0.5, [0.5, 0.5], 2.0, 4.0)
        assert tau == pytest.approx(np.pi, rel=1e-10)
        pt = hopf_point_at(sym, 0.5, "near_dstar")
        assert oracle_slope(sym, 0.5, [0.5, 0.5], tau) == pytest.approx(pt.transversality, rel=1e-5)

    def test_no_bracket(self, sym):
        with pytest.raises(PreconditionError):
            oracle_crossing_tau(sym, 0.5, [0.5, 0.5], 0.5, 1.0)


class TestCurve:
    def test_symmetric_curve(self, sym, sym_perron):
        grid = np.linspace(0.05, 0.95, 19)
        c = hopf_curve(sym, grid, perron=sym_perron)
        assert_allclose(c.tau0, np.pi / (2 * (1 - grid)), rtol=1e-10)
        assert c.regime[0] == "small_d" and c.regime[-1] == "near_dstar"
        # coincident patch branches are resonant and never seeded
        assert set(c.branch) == {near_tag()}

    @pytest.mark.parametrize("A, sign", [(A3, 1), (A4, -1)])
    def test_small_d_limit_and_direction(self, A, sign):
        model = as_model(A, M2)
        grid = np.array([1e-3, 2e-3, 4e-3])
        c = hopf_curve(model, grid)
        assert abs(c.tau0[0] - np.pi / 4) < 1e-3
        assert np.all(np.sign(np.diff(c.tau0)) == sign)
        assert c.branch[0] == small_tag(1)
        # second-order remainder scales like |A|^2 / m_q^3
        C = (1 + np.abs(A).max()) ** 2 / 8
        assert_allclose(c.tau0, [tau_expansion(A, M2, d) for d in grid], atol=C * grid[-1] ** 2)

    def test_full_range_meets(self, a3, a3_perron):
        grid = np.linspace(0.02, 0.98, 25) * a3_perron.d_star
        c = hopf_curve(a3, grid, perron=a3_perron)
        assert np.all(np.isfinite(c.tau0))
        assert c.meeting_mismatch is not None and c.meeting_mismatch <= 1e-6
        # the patch-1 branch terminates with a collapsing frequency; nothing else is flagged
        assert all(" ends near " in f for f in c.flags)
        assert c.meeting_d == pytest.approx(grid[np.argmin(np.abs(grid - 0.5 * a3_perron.d_star))])
        rows = list(c.rows())
        assert len(rows) == len(grid) and rows[3][0] == grid[3]
        for d, tau, nu, theta, _ in rows:
            assert tau == pytest.approx(theta / nu)

    def test_delay_diverges_near_dstar(self, a3, a3_perron):
        c = hopf_curve(a3, a3_perron.d_star * np.array([0.99, 0.999]), perron=a3_perron)
        ratio = c.tau0[1] / c.tau0[0]
        assert ratio == pytest.approx(10.0, rel=0.02)

    def test_curve_points_are_minimal(self, a3, a3_perron):
        c = hopf_curve(a3, [0.3, 1.0, 3.0], perron=a3_perron)
        for i, d in enumerate(c.d):
            u = solve_equilibrium(a3, d, perron=a3_perron).u
            # just below the threshold every root is in the left half plane
            lam = oracle_rightmost_roots(a3, d, u, 0.999 * c.tau0[i], k=1)
            assert lam[0].real < 0

    def test_grid_validation(self, a3, a3_perron):
        with pytest.raises(ValueError):
            hopf_curve(a3, [0.2, 0.1])
        with pytest.raises(PreconditionError):
            hopf_curve(a3, [0.1, a3_perron.d_star])

    def test_no_oscillating_patch(self):
        model = as_model(A3, Logistic([1.0, 2.0], [2.0, 2.0], [1.0, 1.0]))
        c = hopf_curve(model, [0.1, 0.2])
        assert c.branch == ["none", "none"]
        assert np.all(np.isnan(c.tau0))

    def test_symmetric_two_rates_uses_larger_rate(self):
        model = as_model(SYMMETRIC, [1.0, 2.0])
        c = hopf_curve(model, [0.01])
        assert c.branch[0] == small_tag(1)
        assert c.tau0[0] == pytest.approx(tau_expansion(SYMMETRIC, [1, 2], 0.01), abs=1e-3)
