"""Exchangeable-pair regression data and Wasserstein bounds for trace vectors.

For the statistic ``W = (f_{d-r+1}, ..., f_d)(M)`` the Brownian-motion
exchangeable pair gives

    E[W_t - W | M] / t  ->  -Lambda W + R
    E[(W_t - W)(W_t - W)^* | M] / t  ->  2 Lambda Sigma + S
    E[(W_t - W)(W_t - W)^T | M] / t  ->  T            (unitary only)

with ``Lambda``, ``Sigma`` diagonal and ``R``, ``S``, ``T`` power-sum
polynomials.  This module builds those objects symbolically, takes their
exact second moments with :func:`haar_expectation`, and assembles the
Jensen-relaxed Wasserstein bound.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

from .psalgebra import (
    N,
    BelowThresholdError,
    GroupKind,
    PowerSumPolynomial,
    conjugate,
    constant,
    haar_expectation,
    laplacian,
    p,
)

__all__ = [
    "RegressionData",
    "RemainderSymbols",
    "SecondMoments",
    "SteinBoundReport",
    "build_regression",
    "build_remainders",
    "centered_statistic",
    "second_moments",
    "wasserstein_bound",
    "rate_formula",
    "theorem_threshold",
    "carre_du_champ",
]


def _check(d, r):
    if not 1 <= r <= d:
        raise ValueError(f"need 1 <= r <= d, got d={d}, r={r}")


def _indices(d, r):
    return list(range(d - r + 1, d + 1))


def _lambda_factor(kind: GroupKind, j: int):
    if kind is GroupKind.UNITARY:
        return N * j
    if kind is GroupKind.SPECIAL_ORTHOGONAL:
        return (N - 1) * j / 2
    return (2 * N + 1) * j / 2


@dataclass(frozen=True)
class RegressionData:
    kind: GroupKind
    d: int
    r: int
    n: int
    lambda_diag: tuple[Fraction, ...]
    sigma_diag: tuple[int, ...]


def build_regression(kind: GroupKind | str, d: int, r: int, n: int) -> RegressionData:
    kind = GroupKind.parse(kind)
    _check(d, r)
    if n < 1:
        raise ValueError("rank n must be >= 1")
    lam = tuple(Fraction(int(_lambda_factor(kind, j)(n).numerator),
                         int(_lambda_factor(kind, j)(n).denominator))
                for j in _indices(d, r))
    return RegressionData(kind, d, r, n, lam, tuple(_indices(d, r)))


def centered_statistic(kind: GroupKind | str, j: int) -> PowerSumPolynomial:
    """``f_j``: ``p_j`` shifted by -1 (SO) / +1 (USp) for even ``j``."""
    kind = GroupKind.parse(kind)
    f = p(kind, j)
    if j % 2 == 0 and kind is GroupKind.SPECIAL_ORTHOGONAL:
        f = f - 1
    elif j % 2 == 0 and kind is GroupKind.UNITARY_SYMPLECTIC:
        f = f + 1
    return f


@dataclass(frozen=True)
class RemainderSymbols:
    kind: GroupKind
    d: int
    r: int
    R: tuple[PowerSumPolynomial, ...]
    S: tuple[tuple[PowerSumPolynomial, ...], ...]
    T: tuple[tuple[PowerSumPolynomial, ...], ...] | None

    @property
    def indices(self) -> list[int]:
        return _indices(self.d, self.r)


def _split_sum(kind, j):
    out = constant(kind, 0)
    for l in range(1, j):
        out = out + p(kind, l, j - l)
    return out


def _fold_sum(kind, j):
    out = constant(kind, 0)
    for l in range(1, j):
        out = out + p(kind, 2 * l - j)
    return out


def _remainder(kind, j):
    if kind is GroupKind.UNITARY:
        return _split_sum(kind, j) * (-j)
    half = Fraction(j, 2)
    if kind is GroupKind.SPECIAL_ORTHOGONAL:
        out = _split_sum(kind, j) * (-half) + _fold_sum(kind, j) * half
        if j % 2 == 0:
            out = out - (N - 1) * half
        return out
    out = _split_sum(kind, j) * (-half) - _fold_sum(kind, j) * half
    if j % 2 == 0:
        out = out + (2 * N + 1) * half
    return out


def _s_entry(kind, j, k):
    if kind is GroupKind.UNITARY:
        return constant(kind, 0) if j == k else p(kind, j - k) * (2 * j * k)
    if j == k:
        if kind is GroupKind.SPECIAL_ORTHOGONAL:
            return (1 - p(kind, 2 * j)) * (j * j)
        return (1 + p(kind, 2 * j)) * (-j * j)
    return (p(kind, j - k) - p(kind, j + k)) * (j * k)


def build_remainders(kind: GroupKind | str, d: int, r: int) -> RemainderSymbols:
    kind = GroupKind.parse(kind)
    _check(d, r)
    idx = _indices(d, r)
    R = tuple(_remainder(kind, j) for j in idx)
    S = tuple(tuple(_s_entry(kind, j, k) for k in idx) for j in idx)
    T = None
    if kind is GroupKind.UNITARY:
        T = tuple(tuple(p(kind, j + k) * (-2 * j * k) for k in idx) for j in idx)
    return RemainderSymbols(kind, d, r, R, S, T)


def carre_du_champ(kind: GroupKind | str, f: PowerSumPolynomial,
                   g: PowerSumPolynomial) -> PowerSumPolynomial:
    """``Delta(fg) - f Delta g - g Delta f``: the t-coefficient of
    ``E[(f(M_t) - f(M))(g(M_t) - g(M)) | M]``."""
    kind = GroupKind.parse(kind)
    return laplacian(kind, f * g) - f * laplacian(kind, g) - g * laplacian(kind, f)


@dataclass(frozen=True)
class SecondMoments:
    """Exact ``E||R||^2``, ``E||S||_HS^2``, ``E||T||_HS^2`` as polynomials in ``n``."""

    kind: GroupKind
    d: int
    r: int
    ER2: object
    ES2: object
    ET2: object | None
    threshold: int

    def at(self, n: int, force: bool = False) -> dict[str, Fraction | None]:
        if n < self.threshold and not force:
            raise BelowThresholdError(
                f"second moments need n >= {self.threshold}, got n = {n}")

        def ev(c):
            if c is None:
                return None
            q = c(n)
            return Fraction(int(q.numerator), int(q.denominator))
        return {"ER2": ev(self.ER2), "ES2": ev(self.ES2), "ET2": ev(self.ET2)}


def _abs2_expectation(kind, polys):
    total, thr = None, 1
    for f in polys:
        e = haar_expectation(kind, f * conjugate(f))
        total = e.value if total is None else total + e.value
        thr = max(thr, e.validity_threshold)
    return total, thr


def second_moments(kind: GroupKind | str, d: int, r: int) -> SecondMoments:
    kind = GroupKind.parse(kind)
    sym = build_remainders(kind, d, r)
    er2, t1 = _abs2_expectation(kind, sym.R)
    es2, t2 = _abs2_expectation(kind, [x for row in sym.S for x in row])
    et2, t3 = None, 1
    if sym.T is not None:
        et2, t3 = _abs2_expectation(kind, [x for row in sym.T for x in row])
    return SecondMoments(kind, d, r, er2, es2, et2, max(t1, t2, t3))


def theorem_threshold(kind: GroupKind | str, d: int) -> int:
    """Smallest rank covered by the CLT theorem: ``2d`` (U, USp) or ``4d+1`` (SO)."""
    kind = GroupKind.parse(kind)
    return 4 * d + 1 if kind is GroupKind.SPECIAL_ORTHOGONAL else 2 * d


def rate_formula(d: int, r: int, n: int) -> float:
    _check(d, r)
    if n < 1:
        raise ValueError("rank n must be >= 1")
    return max(r ** 3.5 / (d - r + 1) ** 1.5, (d - r) ** 1.5 * math.sqrt(r)) / n


@dataclass(frozen=True)
class SteinBoundReport:
    kind: GroupKind
    d: int
    r: int
    n: int
    ER2: float
    ES2: float
    ET2: float | None
    lambda_inv_op: float
    sigma_invhalf_op: float
    bound: float
    rate: float
    thresholds_ok: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kind"] = self.kind.value
        if self.ET2 is None:
            del out["ET2"]
        for key in ("lambda_inv_op", "sigma_invhalf_op"):
            del out[key]
        return {k: out[k] for k in ("kind", "d", "r", "n", "ER2", "ES2", "ET2",
                                    "bound", "rate", "thresholds_ok") if k in out}


def wasserstein_bound(kind: GroupKind | str, d: int, r: int, n: int,
                      force: bool = False, moments: SecondMoments | None = None
                      ) -> SteinBoundReport:
    """Evaluate ``||L^-1|| (sqrt(E||R||^2) + ||S^-1/2|| (sqrt(E||S||^2) + sqrt(E||T||^2)) / sqrt(2 pi))``.

    Raises :class:`BelowThresholdError` for ``n`` below the theorem's rank
    condition unless ``force`` is set; the report then carries
    ``thresholds_ok = False``.
    """
    kind = GroupKind.parse(kind)
    _check(d, r)
    mom = moments if moments is not None else second_moments(kind, d, r)
    ok = n >= max(theorem_threshold(kind, d), mom.threshold)
    if not ok and not force:
        raise BelowThresholdError(
            f"{kind.label}: bound needs n >= {max(theorem_threshold(kind, d), mom.threshold)}, "
            f"got n = {n}")
    vals = mom.at(n, force=True)
    lam_min = float(_lambda_factor(kind, d - r + 1)(n))
    if lam_min <= 0:
        raise ValueError(f"Lambda is singular at n = {n}")
    lam_inv = 1.0 / lam_min
    sig = 1.0 / math.sqrt(d - r + 1)
    er2, es2 = float(vals["ER2"]), float(vals["ES2"])
    et2 = None if vals["ET2"] is None else float(vals["ET2"])
    hs = math.sqrt(es2) + (math.sqrt(et2) if et2 is not None else 0.0)
    bound = lam_inv * (math.sqrt(er2) + sig * hs / math.sqrt(2 * math.pi))
    return SteinBoundReport(kind, d, r, n, er2, es2, et2, lam_inv, sig, bound,
                            rate_formula(d, r, n), ok)
