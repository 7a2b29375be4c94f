import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from vwbeam import kernels
from vwbeam.femcore import BAND


def random_band(rng, n, l=BAND, u=BAND, shift=10.0):
    ab = rng.standard_normal((l + u + 1, n))
    ab[u] += shift  # diagonally dominant, so unpivoted LU is safe
    return ab


def band_to_dense(ab, l, u):
    n = ab.shape[1]
    D = np.zeros((n, n))
    for j in range(n):
        for i in range(max(0, j - u), min(n, j + l + 1)):
            D[i, j] = ab[u + i - j, j]
    return D


def test_numpy_path_always_available():
    assert kernels.numpy_impl.name == "numpy"
    assert kernels.active in (kernels.numpy_impl, kernels.numba_impl)


def test_band_matvec(impl, rng):
    ab = random_band(rng, 20)
    x = rng.standard_normal(20)
    np.testing.assert_allclose(impl.band_matvec(ab, BAND, BAND, x),
                               band_to_dense(ab, BAND, BAND) @ x, rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(4, 40), seed=st.integers(0, 2**16))
def test_band_solve_matches_lapack(n, seed):
    rng = np.random.default_rng(seed)
    ab = random_band(rng, n)
    b = rng.standard_normal(n)
    ref = scipy.linalg.solve_banded((BAND, BAND), ab, b)
    for impl in (kernels.numpy_impl, kernels.numba_impl):
        got = impl.band_lu_solve(impl.band_lu_factor(ab, BAND, BAND), BAND, BAND, b)
        np.testing.assert_allclose(got, ref, rtol=1e-10, atol=1e-12)


def test_factor_does_not_mutate(impl, rng):
    ab = random_band(rng, 10)
    before = ab.copy()
    impl.band_lu_factor(ab, BAND, BAND)
    np.testing.assert_array_equal(ab, before)


def test_singular_pivot():
    ab = np.zeros((2 * BAND + 1, 6))
    with pytest.raises((kernels.SingularPivotError, np.linalg.LinAlgError)):
        kernels.numba_impl.band_lu_solve(kernels.numba_impl.band_lu_factor(ab, BAND, BAND),
                                         BAND, BAND, np.ones(6))
    with pytest.raises((kernels.SingularPivotError, np.linalg.LinAlgError)):
        kernels.numpy_impl.band_lu_solve(kernels.numpy_impl.band_lu_factor(ab, BAND, BAND),
                                         BAND, BAND, np.ones(6))


def test_scatter_backends_agree(rng):
    ke = rng.standard_normal((7, 4, 4))
    a = kernels.numpy_impl.scatter_elements(np.zeros((7, 16)), ke, BAND)
    b = kernels.numba_impl.scatter_elements(np.zeros((7, 16)), ke, BAND)
    np.testing.assert_allclose(a, b, rtol=1e-14)
    D = band_to_dense(a, BAND, BAND)
    ref = np.zeros((16, 16))
    for e in range(7):
        ref[2 * e:2 * e + 4, 2 * e:2 * e + 4] += ke[e]
    np.testing.assert_allclose(D, ref, rtol=1e-14)


def test_newmark_backends_agree(rng):
    n, m = 12, 20
    m_ab = random_band(rng, n, shift=5.0)
    eff = random_band(rng, n, shift=50.0)
    loads = rng.standard_normal((m + 1, n))
    u0, v0, a0 = rng.standard_normal((3, n))
    a = kernels.numpy_impl.newmark_constant(m_ab, eff, BAND, BAND, loads, u0, v0, a0,
                                            0.05, 0.25, 0.5)
    b = kernels.numba_impl.newmark_constant(m_ab, eff, BAND, BAND, loads, u0, v0, a0,
                                            0.05, 0.25, 0.5)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-9, atol=1e-12)


def test_neglog_backends_agree():
    x = np.linspace(0, 1, 201)
    nodes, weights = kernels.graded_nodes()
    a = kernels.numpy_impl.neglog_convolve(x, 0.5, 0.05, nodes, weights)
    b = kernels.numba_impl.neglog_convolve(x, 0.5, 0.05, nodes, weights)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_graded_nodes_integrate_log():
    # int_0^1 -log(r) dr = 1, int_0^1 r^2 dr = 1/3
    nodes, weights = kernels.graded_nodes()
    assert np.all((nodes > 0) & (nodes <= 1))
    assert weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.sum(-np.log(nodes) * weights) == pytest.approx(1.0, abs=1e-8)
    assert np.sum(nodes**2 * weights) == pytest.approx(1 / 3, abs=1e-14)
