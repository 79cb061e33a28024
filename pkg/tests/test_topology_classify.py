import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from patchhopf.errors import BoundaryCaseError, NoPositiveEquilibriumError
from patchhopf.hopf import (
    NEAR_DSTAR,
    SMALL_D,
    HopfAt,
    Inconclusive,
    StableAllDelays,
    classify,
    oracle_crossing_tau,
    resonance_check,
    tau_expansion,
    topology_data,
    topology_index,
    unique_argmax,
)
from patchhopf.hopf.topology import tau_prime_from_ingredients
from patchhopf.model import Logistic, as_model
from patchhopf.spectral import find_dstar

from conftest import A1, A2, A3, A4, M2, M4, SYMMETRIC, valid_models


class TestTopology:
    def test_reference_values(self):
        assert topology_index(A3, M2) == pytest.approx(1.313938, abs=1e-6)
        assert topology_index(A4, M2) == pytest.approx(-2.710176, abs=1e-6)

    def test_symmetric_with_distinct_rates(self):
        # -(pi/2)(-2) + (1 - pi/2)(1 * 1)/2
        assert topology_index(SYMMETRIC, [1, 2]) == pytest.approx(np.pi + (1 - np.pi / 2) / 2)
        assert topology_index(SYMMETRIC, [1, 2]) == pytest.approx(2.8562, abs=1e-4)

    def test_four_patch_networks_use_first_row(self):
        assert topology_index(A1, M4) == pytest.approx(0.94292, abs=1e-5)
        assert topology_index(A2, M4) == pytest.approx(2.78770, abs=1e-5)

    def test_expansion_values(self):
        assert tau_expansion(A3, M2, 0.1) == pytest.approx(0.8182, abs=1e-4)
        assert tau_expansion(A4, M2, 0.05) == pytest.approx(0.7515, abs=1e-4)

    def test_ties_raise(self):
        with pytest.raises(BoundaryCaseError) as info:
            topology_index(SYMMETRIC, [1.0, 1.0])
        assert info.value.indices == (0, 1)

    def test_unique_argmax(self):
        assert unique_argmax([1.0, 3.0, 2.0]) == 1

    @given(valid_models(), st.floats(0.01, 100.0))
    @settings(max_examples=50, deadline=None)
    def test_invariant_under_rate_scaling(self, am, c):
        A, m = am
        assert topology_index(A, c * m) == pytest.approx(topology_index(A, m), rel=1e-10, abs=1e-12)

    @given(valid_models())
    @settings(max_examples=50, deadline=None)
    def test_derivative_ingredients(self, am):
        t = topology_data(*am)
        assert tau_prime_from_ingredients(t) == pytest.approx(t.tau_prime, rel=1e-10, abs=1e-12)
        assert t.slope_sign == np.sign(t.T)


def two_patch(a_hat, b_hat, m=(1.0, 2.0), A=A3):
    return as_model(A, Logistic(list(m), list(a_hat), list(b_hat)))


class TestClassify:
    @pytest.mark.parametrize("regime", [SMALL_D, NEAR_DSTAR])
    def test_instantaneous_dominates(self, regime):
        model = two_patch([2, 2], [1, 1])
        P = find_dstar(model.A, model.m)
        v = classify(model, 0.05 * P.d_star if regime == SMALL_D else 0.95 * P.d_star, regime, perron=P)
        assert isinstance(v, StableAllDelays)
        assert v.label == "StableAllDelays"

    @pytest.mark.parametrize("regime", [SMALL_D, NEAR_DSTAR])
    def test_delayed_dominates(self, regime, a3, a3_perron):
        d = 0.05 * a3_perron.d_star if regime == SMALL_D else 0.95 * a3_perron.d_star
        v = classify(a3, d, regime, perron=a3_perron)
        assert isinstance(v, HopfAt)
        assert v.tau0 > 0 and v.point.d == pytest.approx(d)
        assert v.label == "HopfAt"

    def test_mixed_patches(self):
        # patch 1 delayed, patch 2 instantaneous: small-d verdict follows patch 1
        model = two_patch([0, 2], [1, 1])
        P = find_dstar(model.A, model.m)
        v = classify(model, 0.02 * P.d_star, SMALL_D, perron=P)
        assert isinstance(v, HopfAt)
        pt = v.point
        tau = oracle_crossing_tau(model, pt.d, pt.u, 0.9 * pt.tau0, 1.1 * pt.tau0)
        assert pt.tau0 == pytest.approx(tau, rel=1e-6)

    def test_near_dstar_sign_rule(self):
        model = two_patch([0, 2], [1, 1])
        P = find_dstar(model.A, model.m)
        w = P.eta**2 * P.sigma_vec
        v = classify(model, 0.95 * P.d_star, NEAR_DSTAR, perron=P)
        assert isinstance(v, HopfAt if w[0] > w[1] else StableAllDelays)

    def test_resonant_pair_is_inconclusive(self, sym):
        assert resonance_check(sym) is not None
        assert isinstance(classify(sym, 0.05, SMALL_D), Inconclusive)

    def test_equal_first_delays_are_inconclusive(self):
        # patch 1: nu = 1, theta = pi/2; patch 2 tuned so that theta/nu = pi/2 too
        theta2 = 2 * np.pi / 3
        nu2 = theta2 / (np.pi / 2)
        # logistic with u0 = 1: a0 = -a_hat, b0 = -b_hat, nu = sqrt(b^2 - a^2), cos theta = -a/b
        b2 = nu2 / np.sin(theta2)
        a2 = -b2 * np.cos(theta2)
        model = as_model(A3, Logistic([1.0, a2 + b2], [0.0, a2], [1.0, b2]))
        assert "same delay" in resonance_check(model)
        assert isinstance(classify(model, 0.01, SMALL_D), Inconclusive)

    def test_degenerate_patch_is_inconclusive(self):
        model = two_patch([0, 1], [1, 1])
        v = classify(model, 0.01, SMALL_D)
        assert isinstance(v, Inconclusive)
        assert "a_j^0 = b_j^0" in v.reason

    def test_near_dstar_boundary(self):
        model = two_patch([0.5, 0.5], [0.5, 0.5], m=(1.0, 1.0), A=SYMMETRIC)
        assert isinstance(classify(model, 0.95, NEAR_DSTAR), Inconclusive)

    def test_hopf_agrees_between_regimes_on_symmetric_rates(self, sym):
        v = classify(sym, 0.95, NEAR_DSTAR)
        assert v.tau0 == pytest.approx(np.pi / (2 * 0.05), rel=1e-9)

    def test_beyond_dstar(self, a3, a3_perron):
        with pytest.raises(NoPositiveEquilibriumError):
            classify(a3, a3_perron.d_star, SMALL_D)

    def test_unknown_regime(self, a3):
        with pytest.raises(ValueError):
            classify(a3, 0.1, "middle")
