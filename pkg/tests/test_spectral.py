import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from patchhopf.spectral import X1_basis, find_dstar, perron_vector, project_X1, spectral_bound, spectral_gap

from conftest import A1, A3, M2, M4, SYMMETRIC, valid_models


def test_bound_at_zero_is_max_growth():
    assert spectral_bound(A1, M4, 0.0) == pytest.approx(7.5, abs=1e-12)


@pytest.mark.parametrize("d", [0.0, 0.2, 0.5, 1.5])
def test_symmetric_closed_form(d):
    assert spectral_bound(SYMMETRIC, [1, 1], d) == pytest.approx(1 - d, abs=1e-14)


def test_two_patch_matches_characteristic_polynomial():
    # at d = 1: trace 0, determinant (1-2)(2-1) - 0.9 = -1.9
    lam = (0.0 + np.sqrt(4 * 1.9)) / 2
    assert spectral_bound(A3, M2, 1.0) == pytest.approx(lam, rel=1e-12)
    assert lam == pytest.approx(1.3784, abs=1e-4)


def test_closed_form_agrees_with_dense_route():
    M = 0.7 * A3 + np.diag(M2)
    assert spectral_bound(A3, M2, 0.7) == pytest.approx(np.max(np.linalg.eigvals(M).real), rel=1e-13)


def test_negative_rate_rejected():
    with pytest.raises(ValueError):
        spectral_bound(A3, M2, -0.1)


def test_dstar_symmetric():
    P = find_dstar(SYMMETRIC, [1, 1])
    assert P.d_star == pytest.approx(1.0, abs=1e-12)
    assert_allclose(P.eta, [0.5, 0.5], atol=1e-12)
    assert_allclose(P.sigma_vec, [0.5, 0.5], atol=1e-12)


def test_dstar_two_patch_quadratic_root():
    # det(d A3 + diag(1,2)) = 1.1 d^2 - 5 d + 2 vanishes at the larger root
    P = find_dstar(A3, M2)
    assert P.d_star == pytest.approx((5 + np.sqrt(16.2)) / 2.2, rel=1e-11)


def test_dstar_four_patch_exceeds_ten():
    assert find_dstar(A1, M4).d_star > 10


def test_perron_data_invariants():
    P = find_dstar(A1, M4)
    assert np.all(P.eta > 0) and np.all(P.sigma_vec > 0)
    assert P.eta.sum() == pytest.approx(1.0, abs=1e-14)
    assert P.sigma_vec.sum() == pytest.approx(1.0, abs=1e-14)
    assert max(P.residuals) <= 1e-10
    assert abs(P.s(P.d_star)) <= 1e-10 * 7.5
    assert spectral_gap(A1, M4, P.d_star) > 0


def test_power_iteration_matches_dense_eigenvector():
    M = 0.5 * A1 + np.diag(M4)
    w, V = np.linalg.eig(M)
    v = np.abs(V[:, np.argmax(w.real)].real)
    assert_allclose(perron_vector(M), v / v.sum(), rtol=1e-10)


def test_project_examples():
    P = find_dstar(SYMMETRIC, [1, 1])
    r, w = project_X1(P.eta, P)
    assert r == pytest.approx(1.0)
    assert_allclose(w, 0.0, atol=1e-15)
    r, w = project_X1(np.array([1.0, 0.0]), P)
    assert r == pytest.approx(1.0)
    assert_allclose(w, [0.5, -0.5], atol=1e-14)
    x = np.array([1.0, -1.0])
    r, w = project_X1(x, P)
    assert r == pytest.approx(0.0, abs=1e-15)
    assert_allclose(w, x)


def test_x1_basis_is_orthonormal_complement():
    P = find_dstar(A1, M4)
    B = X1_basis(P)
    assert_allclose(B.T @ B, np.eye(3), atol=1e-13)
    assert_allclose(P.sigma_vec @ B, 0.0, atol=1e-14)


@given(valid_models(), st.floats(0.0, 4.0), st.floats(1e-3, 2.0))
@settings(max_examples=100, deadline=None)
def test_bound_strictly_decreasing(am, d1, dd):
    A, m = am
    assert spectral_bound(A, m, d1) > spectral_bound(A, m, d1 + dd)


@given(valid_models())
@settings(max_examples=40, deadline=None)
def test_perron_residuals_random(am):
    A, m = am
    P = find_dstar(A, m)
    assert max(P.residuals) <= 1e-10
    assert abs(P.s(P.d_star)) <= 1e-10 * max(1.0, m.max())
    assert np.all(P.eta > 0) and np.all(P.sigma_vec > 0)
    assert spectral_gap(A, m, P.d_star) > 0


@given(valid_models(), st.lists(st.floats(-5, 5), min_size=6, max_size=6))
@settings(max_examples=40, deadline=None)
def test_projection_reconstructs(am, xs):
    A, m = am
    P = find_dstar(A, m)
    x = np.array(xs[: len(m)])
    r, w = project_X1(x, P)
    assert np.linalg.norm(r * P.eta + w - x) <= 1e-12 * max(np.linalg.norm(x), 1e-300)
    assert abs(P.sigma_vec @ w) <= 1e-12 * max(np.linalg.norm(x), 1.0)
