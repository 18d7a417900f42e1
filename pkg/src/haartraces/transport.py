"""Realification, Gaussian reference clouds and Wasserstein-1 estimators."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .psalgebra import GroupKind

__all__ = [
    "realify",
    "realify_matrix",
    "realify_vector",
    "conjugation_matrix",
    "EmpiricalCloud",
    "W1Method",
    "WassersteinEstimate",
    "gaussian_reference",
    "w1_exact",
    "w1_1d",
    "w1_sliced",
    "ASSIGNMENT_CAP",
]

ASSIGNMENT_CAP = 4096


def realify_vector(z) -> np.ndarray:
    """``(Re z_1, Im z_1, Re z_2, ...)``; leading axes are kept."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def realify_matrix(a) -> np.ndarray:
    """Real ``2d x 2d`` matrix of ``[[Re, -Im], [Im, Re]]`` blocks."""
    a = np.asarray(a, dtype=complex)
    d1, d2 = a.shape
    out = np.empty((2 * d1, 2 * d2))
    out[0::2, 0::2] = a.real
    out[0::2, 1::2] = -a.imag
    out[1::2, 0::2] = a.imag
    out[1::2, 1::2] = a.real
    return out


def realify(x):
    """Vector or matrix realification depending on dimensionality."""
    x = np.asarray(x)
    if x.ndim == 2:
        return realify_matrix(x)
    return realify_vector(x)


def conjugation_matrix(d: int) -> np.ndarray:
    """``J`` with ``J z_R = (conj z)_R`` in interleaved coordinates."""
    return np.kron(np.eye(d), np.diag([1.0, -1.0]))


@dataclass(frozen=True, eq=False)
class EmpiricalCloud:
    points: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError("cloud points must be an (N, k) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("cloud has non-finite entries")
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def shifted(self, v) -> "EmpiricalCloud":
        return EmpiricalCloud(self.points + np.asarray(v, dtype=float), dict(self.meta))


def _points(x) -> np.ndarray:
    return x.points if isinstance(x, EmpiricalCloud) else EmpiricalCloud(x).points


class W1Method(enum.Enum):
    ASSIGNMENT_EXACT = "assignment_exact"
    ONE_DIMENSIONAL = "one_dimensional"
    SLICED = "sliced"


@dataclass(frozen=True)
class WassersteinEstimate:
    value: float
    method: W1Method
    size: int
    dim: int
    projections: int | None = None
    seed: int | None = None

    def __float__(self) -> float:
        return self.value


def gaussian_reference(kind: GroupKind | str, d: int, r: int, count: int,
                       rng: np.random.Generator) -> EmpiricalCloud:
    """Samples of ``Sigma^{1/2} Z`` with ``Sigma = diag(d-r+1, ..., d)``.

    Complex standard normal (components ``N(0, 1/2)``) realified to
    ``R^{2r}`` for U; real standard normal in ``R^r`` otherwise.
    """
    kind = GroupKind.parse(kind)
    if not 1 <= r <= d:
        raise ValueError(f"need 1 <= r <= d, got d={d}, r={r}")
    if count < 1:
        raise ValueError("count must be >= 1")
    scale = np.sqrt(np.arange(d - r + 1, d + 1, dtype=float))
    if kind is GroupKind.UNITARY:
        z = (rng.standard_normal((count, r)) + 1j * rng.standard_normal((count, r))) / np.sqrt(2)
        pts = realify_vector(z * scale)
    else:
        pts = rng.standard_normal((count, r)) * scale
    return EmpiricalCloud(pts, {"kind": kind.value, "d": d, "r": r, "reference": True})


def w1_exact(x, y, cap: int = ASSIGNMENT_CAP) -> WassersteinEstimate:
    """Exact W1 between equal-size, equal-weight clouds via optimal assignment."""
    a, b = _points(x), _points(y)
    if a.shape != b.shape:
        raise ValueError(f"cloud shapes differ: {a.shape} vs {b.shape}")
    if a.shape[0] > cap:
        raise ValueError(f"{a.shape[0]} points exceed the assignment cap {cap}")
    cost = _kernels.euclidean_cost(a, b)
    cols = _kernels.assignment(cost)
    value = float(cost[np.arange(len(cols)), cols].mean())
    return WassersteinEstimate(value, W1Method.ASSIGNMENT_EXACT, a.shape[0], a.shape[1])


def w1_1d(x, y) -> WassersteinEstimate:
    a, b = _points(x), _points(y)
    if a.shape[1] != 1 or b.shape[1] != 1:
        raise ValueError("one-dimensional estimator needs 1-D clouds")
    if a.shape[0] != b.shape[0]:
        raise ValueError("clouds must have the same size")
    value = float(np.abs(np.sort(a[:, 0]) - np.sort(b[:, 0])).mean())
    return WassersteinEstimate(value, W1Method.ONE_DIMENSIONAL, a.shape[0], 1)


def w1_sliced(x, y, projections: int, rng: np.random.Generator,
              seed: int | None = None) -> WassersteinEstimate:
    """Average 1-D W1 over random unit directions.  A surrogate, not W1 itself."""
    a, b = _points(x), _points(y)
    if a.shape[1] != b.shape[1]:
        raise ValueError("clouds must have the same dimension")
    if a.shape[0] != b.shape[0]:
        raise ValueError("clouds must have the same size")
    if projections < 1:
        raise ValueError("need at least one projection")
    dirs = rng.standard_normal((projections, a.shape[1]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pa, pb = np.sort(a @ dirs.T, axis=0), np.sort(b @ dirs.T, axis=0)
    value = float(np.abs(pa - pb).mean())
    return WassersteinEstimate(value, W1Method.SLICED, a.shape[0], a.shape[1],
                               projections=projections, seed=seed)
