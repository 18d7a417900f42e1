import numpy as np
import pytest

from haartraces import groups
from haartraces.groups import (
    GroupElement,
    brownian_batch,
    brownian_step,
    group_diagnostics,
    haar_batch,
    haar_sample,
    lie_basis,
    symplectic_form,
    trace_vector,
    trace_vectors,
)
from haartraces.psalgebra import GroupKind

U, SO, SP = GroupKind.UNITARY, GroupKind.SPECIAL_ORTHOGONAL, GroupKind.UNITARY_SYMPLECTIC


@pytest.mark.parametrize("kind, n", [(U, 10), (SO, 9), (SO, 4), (SP, 5), (SP, 1), (U, 1)])
def test_haar_samples_pass_diagnostics(kernel_path, kind, n, rng):
    mats = haar_batch(kind, n, 50, rng)
    assert mats.shape == (50, kind.dimension(n), kind.dimension(n))
    for m in mats:
        assert group_diagnostics(m, kind).passed


def test_perturbed_sample_fails(rng):
    m = haar_sample(U, 10, rng)
    bad = m.matrix + 1e-3 * np.eye(10)
    diag = group_diagnostics(bad, U)
    assert not diag.checks["unitarity"]


def test_so_determinant(rng):
    diag = haar_sample(SO, 6, rng).diagnostics()
    assert diag.determinant <= 1e-10


def test_symplectic_sample_structure(rng):
    m = haar_sample(SP, 3, rng).matrix
    a, b = m[:3, :3], m[:3, 3:]
    np.testing.assert_allclose(m[3:, :3], -b.conj(), atol=1e-13)
    np.testing.assert_allclose(m[3:, 3:], a.conj(), atol=1e-13)


def test_element_shape_check():
    with pytest.raises(ValueError):
        GroupElement(SP, 2, np.eye(3))


@pytest.mark.parametrize("kind, n", [(U, 4), (SO, 5), (SP, 3), (SO, 1)])
def test_lie_basis_orthonormal(kind, n):
    basis = lie_basis(kind, n)
    dims = {U: n * n, SO: n * (n - 1) // 2, SP: n * (2 * n + 1)}
    assert len(basis) == dims[kind]
    if len(basis):
        np.testing.assert_allclose(basis.gram(), np.eye(len(basis)), atol=1e-14)
    for x in basis.basis:
        np.testing.assert_allclose(x.conj().T, -x, atol=1e-15)
        if kind is SP:
            J = symplectic_form(n)
            np.testing.assert_allclose(x.T @ J + J @ x, 0, atol=1e-15)


@pytest.mark.parametrize("kind, n", [(U, 4), (SO, 5), (SP, 2)])
def test_brownian_step_stays_in_group(kind, n, rng):
    m = haar_sample(kind, n, rng)
    for h in (1e-1, 1e-6, 1e-12):
        m2 = brownian_step(m, h, rng)
        assert m2.diagnostics().passed


def test_brownian_rejects_bad_h(rng):
    m = haar_sample(U, 3, rng)
    for h in (0.0, -1.0, float("nan")):
        with pytest.raises(ValueError):
            brownian_step(m, h, rng)


def test_brownian_antithetic_inverse(rng):
    # exp(A) exp(-A) = I, so the two antithetic steps from M are mutually inverse increments
    m = haar_sample(U, 3, rng).matrix
    basis = lie_basis(U, 3)
    xi = rng.standard_normal(len(basis))
    a = brownian_batch(m, U, 0.01, xi, basis)
    b = brownian_batch(m, U, 0.01, -xi, basis)
    np.testing.assert_allclose(np.linalg.inv(m) @ a @ np.linalg.inv(m) @ b, np.eye(3), atol=1e-13)


def test_trace_vector_examples():
    tv = trace_vector(GroupElement(U, 5, np.eye(5, dtype=complex)), 3, 3)
    np.testing.assert_allclose(tv.values, [5, 5, 5])
    tv = trace_vector(GroupElement(SO, 4, np.eye(4)), 2, 2, centered=True)
    np.testing.assert_allclose(tv.values, [4, 3])
    th = 0.7
    e = np.diag([np.exp(1j * th), np.exp(2j * th), np.exp(-1j * th), np.exp(-2j * th)])
    tv = trace_vector(GroupElement(SP, 2, e), 4, 4)
    assert np.isrealobj(tv.values)
    with pytest.raises(ValueError):
        trace_vectors(U, np.eye(2)[None], 1, 2)


def test_sampling_deterministic():
    a = haar_batch(SP, 3, 4, np.random.default_rng(5))
    b = haar_batch(SP, 3, 4, np.random.default_rng(5))
    assert np.array_equal(a, b)


@pytest.mark.parametrize("kind, n, j, mean", [(U, 8, 2, 0.0), (SO, 9, 2, 1.0), (SP, 4, 2, -1.0)])
def test_low_moments(kind, n, j, mean, rng):
    tr = groups.power_traces(haar_batch(kind, n, 4000, rng), j)[:, j - 1]
    se = tr.real.std() / np.sqrt(len(tr))
    assert abs(tr.real.mean() - mean) <= 5 * se
