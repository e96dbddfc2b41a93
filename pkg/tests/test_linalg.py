import numpy as np
import pytest
import scipy.linalg

from src.errors import InvalidInputError
from src.linalg import (
    antisymmetric_abs,
    as_symmetric,
    is_hermitian_psd,
    is_psd,
    matrix_abs,
    min_eigenvalue,
    pseudoinverse,
)


def _random_symmetric(rng, dim, rank=None):
    rank = dim if rank is None else rank
    v = np.linalg.qr(rng.normal(size=(dim, dim)))[0]
    w = np.zeros(dim)
    w[:rank] = rng.uniform(0.5, 3.0, size=rank) * rng.choice([-1.0, 1.0], size=rank)
    return (v * w) @ v.T


def test_matrix_abs_identity():
    np.testing.assert_allclose(matrix_abs(np.eye(4)), np.eye(4), atol=1e-15)


def test_matrix_abs_flips_negative_eigenvalues():
    np.testing.assert_allclose(matrix_abs(np.diag([-2.0, 3.0])), np.diag([2.0, 3.0]), atol=1e-14)


def test_matrix_abs_matches_independent_eigensolver():
    a = np.random.default_rng(6).normal(size=(6, 6))
    a = a + a.T
    w, v = np.linalg.eigh(a)
    oracle = (v * np.abs(w)) @ v.T
    assert np.max(np.abs(matrix_abs(a) - oracle)) < 1e-10
    np.testing.assert_allclose(matrix_abs(a), np.real(scipy.linalg.sqrtm(a @ a)), atol=1e-8)


def test_matrix_abs_is_psd_and_squares_back(rng):
    for _ in range(20):
        a = _random_symmetric(rng, 5)
        result = matrix_abs(a)
        assert is_psd(result, 1e-12)
        assert np.linalg.norm(result @ result - a @ a) <= 1e-9 * np.linalg.norm(a @ a)
        np.testing.assert_allclose(result @ a, a @ result, atol=1e-10)


def test_matrix_abs_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        matrix_abs(np.array([[1.0, np.nan], [np.nan, 1.0]]))


def test_as_symmetric_rejects_non_square():
    with pytest.raises(InvalidInputError):
        as_symmetric(np.ones((2, 3)))


def test_pseudoinverse_diagonal():
    np.testing.assert_allclose(pseudoinverse(np.diag([2.0, 5.0])), np.diag([0.5, 0.2]), atol=1e-15)


def test_pseudoinverse_zero_matrix():
    np.testing.assert_array_equal(pseudoinverse(np.zeros((3, 3))), np.zeros((3, 3)))


def test_pseudoinverse_drops_eigenvalues_below_cutoff():
    np.testing.assert_allclose(pseudoinverse(np.diag([1.0, 1e-13])), np.diag([1.0, 0.0]), atol=1e-15)
    np.testing.assert_allclose(pseudoinverse(np.diag([1.0, 1e-11])), np.diag([1.0, 1e11]), rtol=1e-12)
    np.testing.assert_allclose(pseudoinverse(np.diag([1.0, 1e-11]), rtol=1e-10), np.diag([1.0, 0.0]), atol=1e-15)


def test_pseudoinverse_of_projector_is_itself():
    p = np.array([1.0, 2.0, -1.0])
    p /= np.linalg.norm(p)
    projector = np.outer(p, p)
    np.testing.assert_allclose(pseudoinverse(projector), projector, atol=1e-12)


@pytest.mark.parametrize("rank", [0, 1, 3, 6])
def test_pseudoinverse_penrose_identities(rng, rank):
    a = _random_symmetric(rng, 6, rank)
    g = pseudoinverse(a)
    scale = max(np.linalg.norm(a), 1.0)
    assert np.linalg.norm(a @ g @ a - a) <= 1e-9 * scale
    assert np.linalg.norm(g @ a @ g - g) <= 1e-9 * max(np.linalg.norm(g), 1.0)
    np.testing.assert_allclose(a @ g, (a @ g).T, atol=1e-9)
    np.testing.assert_allclose(g @ a, (g @ a).T, atol=1e-9)


def test_pseudoinverse_is_involutive_for_well_conditioned(rng):
    a = _random_symmetric(rng, 5)
    np.testing.assert_allclose(pseudoinverse(pseudoinverse(a)), a, rtol=1e-8, atol=1e-8)


def test_is_psd_examples():
    assert is_psd(np.eye(3), 0.0)
    assert not is_psd(np.diag([1.0, -1e-3]), 1e-6)
    assert is_psd(np.diag([1.0, -1e-9]), 1e-6)


def test_is_psd_rejects_negative_tolerance():
    with pytest.raises(InvalidInputError):
        is_psd(np.eye(2), -1.0)


def test_min_eigenvalue():
    assert min_eigenvalue(np.diag([3.0, -2.0, 1.0])) == pytest.approx(-2.0)


def test_antisymmetric_abs_of_symplectic_block():
    b = np.array([[0.0, 2.5], [-2.5, 0.0]])
    np.testing.assert_allclose(antisymmetric_abs(b), 2.5 * np.eye(2), atol=1e-14)


def test_hermitian_psd_boundary():
    epsilon = np.array([[0.0, 1.0], [-1.0, 0.0]])
    # I + i*epsilon has eigenvalues 0 and 2
    assert is_hermitian_psd(np.eye(2), epsilon, 1e-12)
    assert not is_hermitian_psd(np.eye(2), 1.1 * epsilon, 1e-12)
