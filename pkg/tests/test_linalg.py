import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from influence_bandits.linalg import ConfigError, DesignMatrix, design_new, design_update, quad_norm, solve


def test_new_identity():
    m = design_new(2, 1.0)
    np.testing.assert_array_equal(m.gram, np.eye(2))
    np.testing.assert_array_equal(m.inv, np.eye(2))


def test_new_scalar():
    m = design_new(3, 2.0)
    np.testing.assert_array_equal(m.gram, 2 * np.eye(3))
    np.testing.assert_array_equal(m.inv, 0.5 * np.eye(3))


@pytest.mark.parametrize("d, reg", [(2, 0.0), (0, 1.0), (129, 1.0), (2, -1.0)])
def test_new_rejects(d, reg):
    with pytest.raises(ConfigError):
        design_new(d, reg)


def test_update_axis():
    m = design_update(design_new(2, 1.0), np.array([1.0, 0.0]))
    np.testing.assert_allclose(m.gram, [[2, 0], [0, 1]])
    np.testing.assert_allclose(m.inv, [[0.5, 0], [0, 1]], atol=1e-15)


def test_update_zero_is_noop():
    m = design_update(design_new(2, 1.0), np.zeros(2))
    np.testing.assert_array_equal(m.gram, np.eye(2))
    np.testing.assert_array_equal(m.inv, np.eye(2))


def test_update_ones():
    m = design_update(design_new(2, 2.0), np.ones(2))
    np.testing.assert_allclose(m.gram, [[3, 1], [1, 3]])
    np.testing.assert_allclose(m.inv, np.array([[3, -1], [-1, 3]]) / 8, atol=1e-15)


def test_update_dimension_mismatch():
    with pytest.raises(ValueError):
        design_update(design_new(2, 1.0), np.ones(3))


def test_quad_norm_examples():
    assert quad_norm(design_new(2, 1.0), np.array([3.0, 4.0])) == pytest.approx(5.0)
    assert quad_norm(design_new(3, 0.7), np.zeros(3)) == 0.0
    m = design_update(design_new(2, 1.0), np.array([1.0, 0.0]))
    assert quad_norm(m, np.array([1.0, 0.0])) == pytest.approx(np.sqrt(0.5), abs=1e-12)


def test_solve_examples():
    np.testing.assert_allclose(solve(design_new(2, 1.0), np.array([2.0, 0.0])), [2, 0])
    np.testing.assert_allclose(solve(design_new(2, 2.0), np.array([2.0, 4.0])), [1, 2])
    m = design_update(design_new(2, 1.0), np.array([1.0, 0.0]))
    np.testing.assert_allclose(solve(m, np.array([2.0, 0.0])), [1, 0], atol=1e-15)


def test_long_sequence_matches_direct_inverse():
    rng = np.random.default_rng(7)
    m = DesignMatrix.new(10, 1.0)
    for _ in range(1000):
        m.update(rng.normal(size=10))
    np.testing.assert_allclose(m.inv, np.linalg.inv(m.gram), atol=1e-8, rtol=0)
    assert m.identity_error() < 1e-8
    np.testing.assert_array_equal(m.inv, m.inv.T)


def test_refresh_happens():
    rng = np.random.default_rng(0)
    m = DesignMatrix.new(3, 1.0)
    for _ in range(512):
        m.update(rng.random(3))
    np.testing.assert_allclose(m.inv, np.linalg.solve(m.gram, np.eye(3)), atol=1e-14)


vectors = st.integers(1, 10).flatmap(
    lambda d: st.lists(arrays(float, d, elements=st.floats(-3, 3)), min_size=1, max_size=30))


@settings(max_examples=100, deadline=None)
@given(vectors, st.floats(0.1, 5.0))
def test_inverse_tracks_direct_inversion(ys, reg):
    m = DesignMatrix.new(len(ys[0]), reg)
    for y in ys:
        m.update(y)
    np.testing.assert_allclose(m.inv, np.linalg.inv(m.gram), atol=1e-8, rtol=0)


@settings(max_examples=100, deadline=None)
@given(vectors, st.floats(0.1, 5.0))
def test_rank_one_shrinkage_and_bound(ys, reg):
    m = DesignMatrix.new(len(ys[0]), reg)
    for y in ys[:-1]:
        m.update(y)
        assert m.quad_norm(y) ** 2 <= (y @ y) / reg + 1e-9
    y = ys[-1]
    if np.linalg.norm(y) > 1e-3:
        before = m.quad_norm(y)
        m.update(y)
        assert m.quad_norm(y) < before


@settings(max_examples=50, deadline=None)
@given(vectors)
def test_solve_residual(ys):
    m = DesignMatrix.new(len(ys[0]), 1.0)
    for y in ys:
        m.update(y)
    rhs = np.arange(m.dim, dtype=float)
    x = m.solve(rhs)
    assert np.linalg.norm(m.gram @ x - rhs) <= 1e-8 * (1 + np.linalg.norm(rhs))
