import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from haartraces.transport import (
    ASSIGNMENT_CAP,
    EmpiricalCloud,
    W1Method,
    conjugation_matrix,
    gaussian_reference,
    realify,
    realify_matrix,
    realify_vector,
    w1_1d,
    w1_exact,
    w1_sliced,
)


def test_exact_examples(kernel_path):
    assert w1_exact([[0.0], [1.0]], [[1.0], [2.0]]).value == 1.0
    x = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert w1_exact(x, x).value == 0.0
    assert w1_exact(x, x[::-1]).value == 0.0


def test_exact_errors():
    with pytest.raises(ValueError):
        w1_exact(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(ValueError):
        w1_exact(np.zeros((3, 2)), np.zeros((3, 1)))
    big = np.zeros((ASSIGNMENT_CAP + 1, 1))
    with pytest.raises(ValueError, match="cap"):
        w1_exact(big, big)


def test_cloud_validation():
    with pytest.raises(ValueError):
        EmpiricalCloud(np.array([[np.nan]]))
    assert EmpiricalCloud(np.arange(4.0)).dim == 1


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 60).flatmap(lambda k: st.tuples(
    arrays(float, (k, 1), elements=finite), arrays(float, (k, 1), elements=finite))))
def test_exact_matches_sorted_1d(xy):
    x, y = xy
    assert w1_exact(x, y).value == pytest.approx(w1_1d(x, y).value, abs=1e-12)


def test_metric_properties(rng):
    for _ in range(20):
        x, y, z = (rng.standard_normal((25, 3)) for _ in range(3))
        v = rng.standard_normal(3)
        xy, yx = w1_exact(x, y).value, w1_exact(y, x).value
        assert xy == pytest.approx(yx, abs=1e-12)
        assert xy <= w1_exact(x, z).value + w1_exact(z, y).value + 1e-12
        assert w1_exact(x + v, y + v).value == pytest.approx(xy, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_realification_identities(d, seed):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    w = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    zr, wr = realify(z), realify(w)
    assert np.vdot(w, z).real == pytest.approx(zr @ wr, abs=1e-14 * (1 + abs(np.vdot(w, z))))
    assert np.linalg.norm(zr) == pytest.approx(np.linalg.norm(z), abs=1e-14 * np.linalg.norm(z) + 1e-15)
    np.testing.assert_allclose(realify_matrix(a) @ zr, realify_vector(a @ z), atol=1e-13)
    np.testing.assert_allclose(conjugation_matrix(d) @ zr, realify(np.conj(z)), atol=0)


def test_sliced_examples(rng):
    x = rng.standard_normal((50, 1))
    y = rng.standard_normal((50, 1))
    s = w1_sliced(x, y, 5, rng)
    assert s.method is W1Method.SLICED and s.projections == 5
    assert s.value == pytest.approx(w1_1d(x, y).value, abs=1e-12)
    x2 = rng.standard_normal((50, 3))
    assert w1_sliced(x2, x2, 10, rng).value == 0.0


def test_sliced_variance_shrinks():
    x = np.random.default_rng(1).standard_normal((200, 4))
    y = np.random.default_rng(2).standard_normal((200, 4)) * 1.5

    def spread(k):
        vals = [w1_sliced(x, y, k, np.random.default_rng(s)).value for s in range(40)]
        return np.var(vals)

    assert spread(64) < spread(2)


@pytest.mark.parametrize("kind, dim", [("u", 4), ("so", 2), ("sp", 2)])
def test_gaussian_reference(kind, dim, rng):
    cloud = gaussian_reference(kind, 3, 2, 20000, rng)
    assert cloud.dim == dim
    var = cloud.points.var(axis=0)
    expected = [1, 1, 1.5, 1.5] if kind == "u" else [2, 3]
    np.testing.assert_allclose(var, expected, rtol=0.05)
