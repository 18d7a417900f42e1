"""Concrete matrix models of U(n), SO(n) and USp(2n).

Haar sampling, orthonormal Lie-algebra bases for the metric
``<X, Y> = Tr(X* Y)``, one-step Brownian increments, and the trace-vector
statistics.  Batched functions take and return stacks of shape
``(count, dim, dim)``; the single-element API wraps them in
:class:`GroupElement`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .psalgebra import GroupKind

__all__ = [
    "GroupElement",
    "LieBasis",
    "TraceVector",
    "Diagnostics",
    "symplectic_form",
    "haar_sample",
    "haar_batch",
    "lie_basis",
    "brownian_step",
    "brownian_batch",
    "expm_skew",
    "trace_vector",
    "trace_vectors",
    "power_traces",
    "group_diagnostics",
    "centering_shift",
    "TOL",
]

TOL = 1e-10


def symplectic_form(n: int) -> np.ndarray:
    """``J = [[0, I_n], [-I_n, 0]]``."""
    z, i = np.zeros((n, n)), np.eye(n)
    return np.block([[z, i], [-i, z]])


@dataclass(frozen=True)
class Diagnostics:
    unitarity: float
    determinant: float | None
    symplectic: float | None
    tol: float = TOL

    @property
    def checks(self) -> dict[str, bool]:
        out = {"unitarity": self.unitarity <= self.tol}
        if self.determinant is not None:
            out["determinant"] = self.determinant <= self.tol
        if self.symplectic is not None:
            out["symplectic"] = self.symplectic <= self.tol
        return out

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


@dataclass(frozen=True, eq=False)
class GroupElement:
    kind: GroupKind
    n: int
    matrix: np.ndarray

    def __post_init__(self):
        dim = self.kind.dimension(self.n)
        if self.matrix.shape != (dim, dim):
            raise ValueError(f"{self.kind.label}({self.n}) needs a {dim}x{dim} matrix, "
                             f"got {self.matrix.shape}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def diagnostics(self, tol: float = TOL) -> Diagnostics:
        return group_diagnostics(self, tol=tol)


def group_diagnostics(M, kind: GroupKind | str | None = None, tol: float = TOL) -> Diagnostics:
    """Max-entry deviations from the defining relations of the group.

    ``M`` is a :class:`GroupElement` or a bare square array (then ``kind``
    is required).  The symplectic form check uses ``J`` of the matching
    size and is only performed for USp.
    """
    if isinstance(M, GroupElement):
        kind, mat = M.kind, M.matrix
    else:
        if kind is None:
            raise ValueError("kind is required for a bare matrix")
        kind, mat = GroupKind.parse(kind), np.asarray(M)
    dim = mat.shape[0]
    adj = mat.T if kind is GroupKind.SPECIAL_ORTHOGONAL else mat.conj().T
    unitarity = float(np.abs(adj @ mat - np.eye(dim)).max())
    det = sym = None
    if kind is GroupKind.SPECIAL_ORTHOGONAL:
        det = float(abs(np.linalg.det(mat) - 1.0))
    if kind is GroupKind.UNITARY_SYMPLECTIC:
        if dim % 2:
            sym = float("inf")
        else:
            J = symplectic_form(dim // 2)
            sym = float(np.abs(mat.T @ J @ mat - J).max())
    return Diagnostics(unitarity, det, sym, tol)


# --- Haar sampling -------------------------------------------------------------

def _haar_unitary(n, count, rng):
    z = (rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def _haar_orthogonal(n, count, rng):
    z = rng.standard_normal((count, n, n))
    q, r = np.linalg.qr(z)
    q = q * np.sign(np.diagonal(r, axis1=1, axis2=2))[:, None, :]
    flip = np.linalg.det(q) < 0
    q[flip, :, -1] *= -1
    return q


def _haar_symplectic(n, count, rng):
    g = (rng.standard_normal((count, 2 * n, n)) + 1j * rng.standard_normal((count, 2 * n, n)))
    return _kernels.symplectic_gram_schmidt(g / np.sqrt(2))


def haar_batch(kind: GroupKind | str, n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent Haar matrices as a ``(count, dim, dim)`` array."""
    kind = GroupKind.parse(kind)
    if n < 1:
        raise ValueError("rank n must be >= 1")
    if kind is GroupKind.UNITARY:
        return _haar_unitary(n, count, rng)
    if kind is GroupKind.SPECIAL_ORTHOGONAL:
        return _haar_orthogonal(n, count, rng)
    return _haar_symplectic(n, count, rng)


def haar_sample(kind: GroupKind | str, n: int, rng: np.random.Generator) -> GroupElement:
    kind = GroupKind.parse(kind)
    return GroupElement(kind, n, haar_batch(kind, n, 1, rng)[0])


# --- Lie algebra ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LieBasis:
    kind: GroupKind
    n: int
    basis: np.ndarray = field(repr=False)  # (count, dim, dim)

    def __len__(self) -> int:
        return self.basis.shape[0]

    def gram(self) -> np.ndarray:
        return np.einsum("aij,bij->ab", self.basis.conj(), self.basis)

    def combine(self, coeffs: np.ndarray) -> np.ndarray:
        """``sum_k coeffs[..., k] X_k``."""
        return np.tensordot(coeffs, self.basis, axes=([-1], [0]))


def _unitary_algebra(n):
    out = []
    for j in range(n):
        e = np.zeros((n, n), complex)
        e[j, j] = 1j
        out.append(e)
    s = 1 / np.sqrt(2)
    for j in range(n):
        for k in range(j + 1, n):
            e = np.zeros((n, n), complex)
            e[j, k], e[k, j] = s, -s
            out.append(e)
            e = np.zeros((n, n), complex)
            e[j, k] = e[k, j] = 1j * s
            out.append(e)
    return out


def _symmetric_basis(n):
    out = []
    for j in range(n):
        e = np.zeros((n, n))
        e[j, j] = 1
        out.append(e)
    for j in range(n):
        for k in range(j + 1, n):
            e = np.zeros((n, n))
            e[j, k] = e[k, j] = 1 / np.sqrt(2)
            out.append(e)
    return out


def lie_basis(kind: GroupKind | str, n: int) -> LieBasis:
    kind = GroupKind.parse(kind)
    if n < 1:
        raise ValueError("rank n must be >= 1")
    s = 1 / np.sqrt(2)
    if kind is GroupKind.UNITARY:
        mats = _unitary_algebra(n)
    elif kind is GroupKind.SPECIAL_ORTHOGONAL:
        mats = []
        for j in range(n):
            for k in range(j + 1, n):
                e = np.zeros((n, n))
                e[j, k], e[k, j] = s, -s
                mats.append(e)
    else:
        # sp(n) = {[[A, B], [-conj(B), conj(A)]] : A in u(n), B complex symmetric}
        z = np.zeros((n, n))
        mats = [s * np.block([[a, z], [z, a.conj()]]) for a in _unitary_algebra(n)]
        for b in _symmetric_basis(n):
            for c in (b, 1j * b):
                mats.append(s * np.block([[z, c], [-np.conj(c), z]]))
    dim = kind.dimension(n)
    dtype = float if kind is GroupKind.SPECIAL_ORTHOGONAL else complex
    basis = np.array(mats, dtype=dtype).reshape(len(mats), dim, dim)
    return LieBasis(kind, n, basis)


# --- Brownian increments ------------------------------------------------------------

def expm_skew(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of (a stack of) skew-Hermitian matrices via ``eigh``."""
    w, v = np.linalg.eigh(-1j * a)
    out = (v * np.exp(1j * w)[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)
    if np.isrealobj(a):
        return out.real
    return out


def brownian_batch(M: np.ndarray, kind: GroupKind | str, h: float,
                   normals: np.ndarray, basis: LieBasis | None = None) -> np.ndarray:
    """``M exp(sqrt(2h) sum_k normals[..., k] X_k)`` for given standard normals.

    ``M`` is a single matrix or a stack matching the leading axes of
    ``normals``.  Passing the normals explicitly lets callers reuse them
    across step sizes and antithetic signs.
    """
    kind = GroupKind.parse(kind)
    if not np.isfinite(h) or h <= 0:
        raise ValueError(f"time step must be finite and positive, got {h}")
    if basis is None:
        n = M.shape[-1] // 2 if kind is GroupKind.UNITARY_SYMPLECTIC else M.shape[-1]
        basis = lie_basis(kind, n)
    a = basis.combine(np.sqrt(2.0 * h) * normals)
    return M @ expm_skew(a)


def brownian_step(M: GroupElement, h: float, rng: np.random.Generator) -> GroupElement:
    """One geodesic Euler step of Brownian motion with generator Delta."""
    if not np.isfinite(h) or h <= 0:
        raise ValueError(f"time step must be finite and positive, got {h}")
    basis = lie_basis(M.kind, M.n)
    xi = rng.standard_normal(len(basis))
    return GroupElement(M.kind, M.n, brownian_batch(M.matrix, M.kind, h, xi, basis))


# --- trace statistics -----------------------------------------------------------------

def power_traces(mats: np.ndarray, d: int) -> np.ndarray:
    """``Tr(M^j)`` for ``j = 1..d``; last axis indexes ``j``."""
    mats = np.asarray(mats)
    single = mats.ndim == 2
    out = _kernels.power_traces(mats, d)
    return out[0] if single else out


def centering_shift(kind: GroupKind, j: int) -> int:
    """Constant added to ``p_j`` to center it (``-1`` on SO, ``+1`` on USp for even j)."""
    if j % 2 or kind is GroupKind.UNITARY:
        return 0
    return -1 if kind is GroupKind.SPECIAL_ORTHOGONAL else 1


@dataclass(frozen=True, eq=False)
class TraceVector:
    values: np.ndarray
    d: int
    r: int
    n: int
    centered: bool

    @property
    def indices(self) -> range:
        return range(self.d - self.r + 1, self.d + 1)


def _check_dr(d, r):
    if not 1 <= r <= d:
        raise ValueError(f"need 1 <= r <= d, got d={d}, r={r}")


def trace_vectors(kind: GroupKind | str, mats: np.ndarray, d: int, r: int,
                  centered: bool = False) -> np.ndarray:
    """Batched statistic ``W``: ``(count, r)`` complex (U) or real (SO/USp)."""
    kind = GroupKind.parse(kind)
    _check_dr(d, r)
    tr = power_traces(np.asarray(mats).reshape(-1, *np.shape(mats)[-2:]), d)[:, d - r:]
    if kind is GroupKind.UNITARY:
        return tr
    imag = np.abs(tr.imag).max(initial=0.0)
    if imag > 1e-9:
        raise ValueError(f"traces of a real-trace group have imaginary part {imag:.2e}")
    vals = tr.real.copy()
    if centered:
        for col, j in enumerate(range(d - r + 1, d + 1)):
            vals[:, col] += centering_shift(kind, j)
    return vals


def trace_vector(M: GroupElement, d: int, r: int, centered: bool = False) -> TraceVector:
    vals = trace_vectors(M.kind, M.matrix[None], d, r, centered)[0]
    return TraceVector(vals, d, r, M.n, centered)
