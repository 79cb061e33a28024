import csv
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from patchhopf.ddesim import (
    ConstantHistory,
    Converged,
    History,
    Periodic,
    SampledHistory,
    Trajectory,
    Undetermined,
    default_step,
    detect_asymptotics,
    integrate,
    stiffness_scale,
    verify_hopf,
)
from patchhopf.equilibrium import solve_equilibrium
from patchhopf.errors import DivergenceError, PositivityWarning, PreconditionError
from patchhopf.hopf import hopf_point_at
from patchhopf.model import CallableLaw, Logistic, as_model

from conftest import A3, A4, M2, SYMMETRIC


def hutchinson_exact(phi, tau, t):
    """Method-of-steps solution of u' = u (1 - u(t - tau)) on [0, 2 tau] from the constant history phi."""
    c = 1.0 - phi
    if t <= tau:
        return phi * np.exp(c * t)
    s = t - tau
    return phi * np.exp(c * tau) * np.exp(s - phi / c * (np.exp(c * s) - 1.0))


@pytest.fixture(scope="module")
def decoupled():
    # two identical uncoupled Hutchinson patches when d = 0
    return as_model(SYMMETRIC, [1.0, 1.0])


class TestIntegrator:
    def test_exact_first_intervals(self, decoupled):
        traj = integrate(decoupled, 0.0, 1.0, [0.5, 0.5], 2.0, step=1 / 128)
        assert_allclose(traj.states[-1], hutchinson_exact(0.5, 1.0, 2.0), rtol=1e-9)

    def test_fourth_order(self, decoupled):
        exact = hutchinson_exact(0.5, 1.0, 2.0)
        errs = [abs(integrate(decoupled, 0.0, 1.0, [0.5, 0.5], 2.0, step=1 / k).states[-1, 0] - exact)
                for k in (8, 16, 32)]
        for e1, e2 in zip(errs, errs[1:]):
            assert 12 <= e1 / e2 <= 20

    def test_equilibrium_history_stays(self, a3):
        u = solve_equilibrium(a3, 0.5).u
        traj = integrate(a3, 0.5, 0.3, u, 50.0)
        assert np.max(np.abs(traj.states - u)) < 1e-8

    def test_nonnegative(self, a3):
        rng = np.random.default_rng(1)
        times = np.linspace(-0.7, 0.0, 15)
        hist = SampledHistory(times, rng.uniform(0.0, 3.0, (15, 2)))
        with warnings.catch_warnings():
            warnings.simplefilter("error", PositivityWarning)
            traj = integrate(a3, 0.5, 0.7, hist, 60.0)
        assert traj.states.min() >= -1e-8

    def test_no_delay_converges(self, a3):
        u = solve_equilibrium(a3, 0.5).u
        traj = integrate(a3, 0.5, 0.0, [0.2, 3.0], 60.0)
        assert isinstance(detect_asymptotics(traj, u), Converged)

    def test_sampled_matches_constant(self, a3):
        c = integrate(a3, 0.5, 0.4, [1.0, 1.5], 5.0)
        s = integrate(a3, 0.5, 0.4, SampledHistory([-0.4, -0.2, 0.0], [[1.0, 1.5]] * 3), 5.0)
        assert_allclose(s.states, c.states, rtol=1e-13)

    def test_step_divides_delay(self, a3):
        traj = integrate(a3, 0.5, 0.3, [1, 1], 1.0, step=0.07)
        assert (0.3 / traj.step) == pytest.approx(round(0.3 / traj.step), abs=1e-9)
        assert traj.step <= 0.07

    def test_stiff_default_step(self, a4):
        sigma = stiffness_scale(a4, 5.0)
        assert sigma == pytest.approx(5.0 * 21 + 4)
        assert default_step(a4, 5.0, 1.0) * sigma <= 2.0
        assert default_step(a4, 0.0, 1.0) == pytest.approx(1 / 64)

    def test_divergence(self, a3):
        law = CallableLaw(2, lambda x, y: 1.0 + x, lambda x, y: 1.0, lambda x, y: 0.0)
        model = as_model(A3, law)
        with pytest.raises(DivergenceError):
            integrate(model, 0.1, 0.5, [1.0, 1.0], 50.0)

    def test_positivity_warning(self, a4):
        # h * |d A_11| = 3 lies outside the RK4 stability interval, so the iterates flip sign
        with pytest.warns(PositivityWarning, match="t=0.45"):
            integrate(a4, 1.0, 0.6, [1.0, 1.0], 0.6, step=0.15)

    def test_dimension_mismatch(self, a3):
        with pytest.raises(PreconditionError):
            integrate(a3, 0.1, 0.5, [1.0, 1.0, 1.0], 1.0)

    def test_bad_arguments(self, a3):
        with pytest.raises(ValueError):
            integrate(a3, 0.1, -1.0, [1, 1], 1.0)
        with pytest.raises(ValueError):
            integrate(a3, 0.1, 1.0, [1, 1], 0.0)


class TestHistories:
    def test_negative_rejected(self):
        with pytest.raises(PreconditionError):
            ConstantHistory([1.0, -0.1])
        with pytest.raises(PreconditionError):
            SampledHistory([-1, 0], [[1, 1], [-1, 1]])

    def test_sampled_out_of_range(self):
        h = History.sampled([-1.0, 0.0], [[1.0, 2.0], [2.0, 3.0]])
        assert_allclose(h(np.array([-0.5])), [[1.5, 2.5]])
        with pytest.raises(PreconditionError):
            h(np.array([-2.0]))

    def test_constant_broadcast(self):
        h = History.constant([1.0, 2.0])
        assert h(np.zeros(3)).shape == (3, 2)


class TestTrajectory:
    def test_dense_eval_exact_at_grid(self, a3):
        traj = integrate(a3, 0.5, 0.4, [1.0, 1.5], 3.0)
        assert_array_equal(traj.dense_eval(traj.times[:-1]), traj.states[:-1])
        assert_allclose(traj.dense_eval([-0.2]), [[1.0, 1.5]])
        with pytest.raises(ValueError):
            traj.dense_eval([4.0])

    def test_dense_eval_accuracy(self, decoupled):
        traj = integrate(decoupled, 0.0, 1.0, [0.5, 0.5], 1.0, step=1 / 64)
        t = np.linspace(0, 1, 37)
        assert_allclose(traj.dense_eval(t)[:, 0], 0.5 * np.exp(0.5 * t), rtol=1e-9)

    def test_csv(self, a3, tmp_path):
        traj = integrate(a3, 0.5, 0.4, [1.0, 1.5], 1.0)
        path = tmp_path / "traj.csv"
        traj.to_csv(path)
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["t", "u1", "u2"]
        assert len(rows) == len(traj.times) + 1
        back = np.array(rows[1:], dtype=float)
        assert_array_equal(back[:, 1:], traj.states)
        assert all(cell for row in rows for cell in row)


def synthetic(y, t):
    Y = np.column_stack([y, y])
    return Trajectory(t[1] - t[0], 0.0, t, Y, np.zeros_like(Y), ConstantHistory([0, 0]))


class TestAsymptotics:
    t = np.linspace(0, 200, 40001)

    def test_periodic(self):
        v = detect_asymptotics(synthetic(1 + 0.3 * np.sin(2 * self.t), self.t), [1, 1])
        assert isinstance(v, Periodic)
        assert v.period == pytest.approx(np.pi, rel=1e-6)
        assert_allclose(v.amplitude, 0.6, rtol=1e-6)

    def test_converged_rate(self):
        v = detect_asymptotics(synthetic(1 + np.exp(-0.2 * self.t) * np.cos(self.t), self.t), [1, 1])
        assert isinstance(v, Converged)
        assert v.rate == pytest.approx(0.2, rel=0.05)

    def test_growing_is_undetermined(self):
        v = detect_asymptotics(synthetic(1 + 1e-3 * np.exp(0.01 * self.t) * np.sin(self.t), self.t), [1, 1])
        assert isinstance(v, Undetermined)

    def test_slow_decay_is_undetermined(self):
        v = detect_asymptotics(synthetic(1 + np.exp(-0.005 * self.t) * np.sin(self.t), self.t), [1, 1])
        assert isinstance(v, Undetermined)
        assert v.label == "Undetermined"

    def test_short_tail(self):
        t = np.linspace(0, 1, 20)
        assert isinstance(detect_asymptotics(synthetic(np.ones(20), t), [1, 1]), Undetermined)


class TestVerify:
    def test_symmetric(self, sym):
        pt = hopf_point_at(sym, 0.5, "near_dstar")
        ver = verify_hopf(sym, 0.5, pt)
        assert ver.passed
        assert isinstance(ver.below, Converged) and isinstance(ver.above, Periodic)
        assert ver.tau_below == pytest.approx(0.85 * np.pi)
        assert ver.frequency_error <= 0.10

    def test_no_threshold(self):
        model = as_model(A3, Logistic(M2, [2.0, 2.0], [1.0, 1.0]))
        ver = verify_hopf(model, 1.0, None)
        assert ver.passed and isinstance(ver.below, Converged)

    def test_margin_validated(self, sym):
        with pytest.raises(ValueError):
            verify_hopf(sym, 0.5, None, margin=0.0)
