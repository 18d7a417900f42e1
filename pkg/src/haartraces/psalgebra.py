"""Exact algebra of power-sum trace functionals on U(n), SO(n) and USp(2n).

A :class:`PowerSumPolynomial` is a finite linear combination of products of
traces ``p_j = Tr(M^j)`` and (unitary case only) their conjugates, with
coefficients that are polynomials in the rank symbol ``n`` over the
rationals.  On top of the ring operations the module provides the
Laplace-Beltrami operator on trace-degree <= 2 monomials and the exact
Haar expectations of arbitrary monomials (Diaconis-Shahshahani moments).

Examples
--------
>>> from haartraces.psalgebra import GroupKind, p, laplacian
>>> print(laplacian(GroupKind.UNITARY, p(GroupKind.UNITARY, 2)))
-2*n*p[2] - 2*p[1,1]
"""
from __future__ import annotations

import enum
import math
import re
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from sympy.polys.domains import QQ
from sympy.polys.rings import PolyElement, ring

__all__ = [
    "GroupKind",
    "PowerSumMonomial",
    "PowerSumPolynomial",
    "ExpectationResult",
    "UnsupportedShapeError",
    "BelowThresholdError",
    "GroupMismatchError",
    "InexactExpectationWarning",
    "COEFF_RING",
    "N",
    "normalize_index",
    "p",
    "pbar",
    "constant",
    "poly_multiply",
    "conjugate",
    "laplacian",
    "haar_expectation",
    "moment_factor",
    "parse_polynomial",
    "supported_monomials",
    "monomials_up_to_weight",
]

COEFF_RING, N = ring("n", QQ)


class UnsupportedShapeError(ValueError):
    """Laplacian requested on a monomial of trace-degree >= 3."""


class BelowThresholdError(ValueError):
    """Moment formula evaluated at a rank where it is not guaranteed exact."""


class GroupMismatchError(ValueError):
    """Arithmetic between polynomials over different groups."""


class InexactExpectationWarning(UserWarning):
    """A forced expectation below the validity threshold."""


class GroupKind(enum.Enum):
    UNITARY = "u"
    SPECIAL_ORTHOGONAL = "so"
    UNITARY_SYMPLECTIC = "sp"

    @classmethod
    def parse(cls, text: "str | GroupKind") -> "GroupKind":
        if isinstance(text, GroupKind):
            return text
        key = str(text).strip().lower()
        aliases = {"u": cls.UNITARY, "unitary": cls.UNITARY,
                   "so": cls.SPECIAL_ORTHOGONAL, "o": cls.SPECIAL_ORTHOGONAL,
                   "sp": cls.UNITARY_SYMPLECTIC, "usp": cls.UNITARY_SYMPLECTIC}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown group kind {text!r}") from None

    @property
    def is_real(self) -> bool:
        return self is not GroupKind.UNITARY

    def dimension(self, n: int) -> int:
        """Matrix size for rank ``n``."""
        return 2 * n if self is GroupKind.UNITARY_SYMPLECTIC else n

    def dimension_poly(self) -> PolyElement:
        return 2 * N if self is GroupKind.UNITARY_SYMPLECTIC else N

    @property
    def label(self) -> str:
        return {"u": "U", "so": "SO", "sp": "USp"}[self.value]


def _as_coeff(value) -> PolyElement:
    if isinstance(value, PolyElement):
        return value
    if isinstance(value, Fraction):
        return COEFF_RING(QQ(value.numerator, value.denominator))
    if isinstance(value, int):
        return COEFF_RING(value)
    raise TypeError(f"cannot use {type(value).__name__} as a coefficient")


def _to_fraction(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


@dataclass(frozen=True, order=True)
class PowerSumMonomial:
    """``prod_j p_j^{a_j} * prod_j conj(p_j)^{b_j}`` with sorted positive indices.

    ``a`` and ``b`` are tuples of ``(index, exponent)`` pairs.
    """

    a: tuple[tuple[int, int], ...] = ()
    b: tuple[tuple[int, int], ...] = ()

    @classmethod
    def from_maps(cls, a: Mapping[int, int] | None = None,
                  b: Mapping[int, int] | None = None) -> "PowerSumMonomial":
        def canon(m):
            items = []
            for j, e in sorted((m or {}).items()):
                if j <= 0:
                    raise ValueError("monomial indices must be positive")
                if e < 0:
                    raise ValueError("negative exponent")
                if e:
                    items.append((int(j), int(e)))
            return tuple(items)
        return cls(canon(a), canon(b))

    @classmethod
    def from_indices(cls, a: Iterable[int] = (), b: Iterable[int] = ()) -> "PowerSumMonomial":
        ma: dict[int, int] = {}
        mb: dict[int, int] = {}
        for j in a:
            ma[j] = ma.get(j, 0) + 1
        for j in b:
            mb[j] = mb.get(j, 0) + 1
        return cls.from_maps(ma, mb)

    @property
    def a_map(self) -> dict[int, int]:
        return dict(self.a)

    @property
    def b_map(self) -> dict[int, int]:
        return dict(self.b)

    @property
    def k_a(self) -> int:
        return sum(j * e for j, e in self.a)

    @property
    def k_b(self) -> int:
        return sum(j * e for j, e in self.b)

    @property
    def weight(self) -> int:
        return self.k_a + self.k_b

    @property
    def degree(self) -> int:
        """Number of trace factors."""
        return sum(e for _, e in self.a) + sum(e for _, e in self.b)

    def a_indices(self) -> list[int]:
        return [j for j, e in self.a for _ in range(e)]

    def b_indices(self) -> list[int]:
        return [j for j, e in self.b for _ in range(e)]

    def __mul__(self, other: "PowerSumMonomial") -> "PowerSumMonomial":
        ma, mb = self.a_map, self.b_map
        for j, e in other.a:
            ma[j] = ma.get(j, 0) + e
        for j, e in other.b:
            mb[j] = mb.get(j, 0) + e
        return PowerSumMonomial.from_maps(ma, mb)

    def conj(self) -> "PowerSumMonomial":
        return PowerSumMonomial(self.b, self.a)

    def sort_key(self):
        return (self.degree, self.weight, self.a_indices(), self.b_indices())

    def render(self) -> str:
        parts = []
        if self.a:
            parts.append("p[" + ",".join(map(str, self.a_indices())) + "]")
        if self.b:
            parts.append("~p[" + ",".join(map(str, self.b_indices())) + "]")
        return "*".join(parts)

    def __str__(self) -> str:
        return self.render() or "1"


ONE = PowerSumMonomial()


def _render_coeff(c: PolyElement) -> tuple[int, str]:
    """Split a coefficient into a sign and a factored magnitude string."""
    terms = sorted(c.terms(), key=lambda t: -t[0][0])
    fracs = [(e[0], _to_fraction(q)) for e, q in terms]
    nums = [abs(f.numerator) for _, f in fracs]
    dens = [f.denominator for _, f in fracs]
    content = Fraction(math.gcd(*nums), math.lcm(*dens))
    sign = -1 if fracs[0][1] < 0 else 1
    prim = [(e, f / content * sign) for e, f in fracs]

    def mono(e, k):
        k = int(k)
        if e == 0:
            return str(abs(k))
        var = "n" if e == 1 else f"n**{e}"
        return var if abs(k) == 1 else f"{abs(k)}*{var}"

    body = ""
    for i, (e, k) in enumerate(prim):
        piece = mono(e, k)
        if i == 0:
            body = piece if k > 0 else "-" + piece
        else:
            body += ("+" if k > 0 else "-") + piece
    if len(prim) > 1:
        body = f"({body})"
    if content == 1:
        return sign, body
    cstr = str(content.numerator) if content.denominator == 1 else f"({content})"
    if body == "1":
        return sign, cstr
    return sign, f"{cstr}*{body}"


class PowerSumPolynomial:
    """Immutable sparse polynomial in power sums over a fixed group kind."""

    __slots__ = ("kind", "_terms", "_hash")

    def __init__(self, kind: GroupKind, terms: Mapping[PowerSumMonomial, object] | None = None):
        self.kind = GroupKind.parse(kind)
        clean: dict[PowerSumMonomial, PolyElement] = {}
        for m, c in (terms or {}).items():
            if self.kind.is_real and m.b:
                raise ValueError("conjugated factors are not allowed over SO/USp")
            c = _as_coeff(c)
            if c:
                clean[m] = clean[m] + c if m in clean else c
                if not clean[m]:
                    del clean[m]
        self._terms = clean
        self._hash = None

    @property
    def terms(self) -> dict[PowerSumMonomial, PolyElement]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, m: PowerSumMonomial) -> PolyElement:
        return self._terms.get(m, COEFF_RING(0))

    def _coerce(self, other) -> "PowerSumPolynomial":
        if isinstance(other, PowerSumPolynomial):
            if other.kind is not self.kind:
                raise GroupMismatchError(f"{self.kind.label} vs {other.kind.label}")
            return other
        return PowerSumPolynomial(self.kind, {ONE: _as_coeff(other)})

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out[m] + c if m in out else c
        return PowerSumPolynomial(self.kind, out)

    __radd__ = __add__

    def __neg__(self):
        return PowerSumPolynomial(self.kind, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, PowerSumPolynomial):
            c = _as_coeff(other)
            return PowerSumPolynomial(self.kind, {m: v * c for m, v in self._terms.items()})
        return poly_multiply(self, other)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = PowerSumPolynomial(self.kind, {ONE: 1})
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction, PolyElement)):
            other = self._coerce(other)
        if not isinstance(other, PowerSumPolynomial):
            return NotImplemented
        return self.kind is other.kind and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.kind, frozenset((m, str(c)) for m, c in self._terms.items())))
        return self._hash

    def conj(self) -> "PowerSumPolynomial":
        return conjugate(self)

    def max_degree(self) -> int:
        return max((m.degree for m in self._terms), default=0)

    def max_index(self) -> int:
        return max((j for m in self._terms for j, _ in m.a + m.b), default=0)

    def render(self) -> str:
        if not self._terms:
            return "0"
        out = ""
        for i, m in enumerate(sorted(self._terms, key=PowerSumMonomial.sort_key)):
            sign, mag = _render_coeff(self._terms[m])
            mono = m.render()
            if mono:
                piece = mono if mag == "1" else f"{mag}*{mono}"
            else:
                piece = mag
            if i == 0:
                out = piece if sign > 0 else "-" + piece
            else:
                out += (" + " if sign > 0 else " - ") + piece
        return out

    __str__ = render

    def __repr__(self) -> str:
        return f"PowerSumPolynomial({self.kind.label}: {self.render()})"

    def evaluate(self, traces, n: int):
        """Evaluate at concrete trace values.

        ``traces`` is an array whose last axis holds ``p_1, p_2, ...``;
        leading axes broadcast (one value per sample).
        """
        import numpy as np

        traces = np.asarray(traces)
        need = self.max_index()
        if need > traces.shape[-1]:
            raise ValueError(f"need traces up to p_{need}, got {traces.shape[-1]}")
        out = np.zeros(traces.shape[:-1], dtype=complex)
        conj = np.conj(traces)
        for m, c in self._terms.items():
            val = np.ones(traces.shape[:-1], dtype=complex)
            for j, e in m.a:
                val = val * traces[..., j - 1] ** e
            for j, e in m.b:
                val = val * conj[..., j - 1] ** e
            out = out + float(_to_fraction(c(n))) * val
        if self.kind.is_real:
            return out.real
        return out


def constant(kind: GroupKind, value=1) -> PowerSumPolynomial:
    return PowerSumPolynomial(kind, {ONE: _as_coeff(value)})


def normalize_index(raw_index: int, kind: GroupKind) -> PowerSumPolynomial:
    """Single trace factor ``p_raw`` with index 0 and negative indices folded."""
    kind = GroupKind.parse(kind)
    if raw_index == 0:
        return PowerSumPolynomial(kind, {ONE: kind.dimension_poly()})
    if raw_index > 0:
        return PowerSumPolynomial(kind, {PowerSumMonomial.from_maps({raw_index: 1}): 1})
    k = -raw_index
    if kind is GroupKind.UNITARY:
        return PowerSumPolynomial(kind, {PowerSumMonomial.from_maps(None, {k: 1}): 1})
    return PowerSumPolynomial(kind, {PowerSumMonomial.from_maps({k: 1}): 1})


def p(kind: GroupKind, *indices: int) -> PowerSumPolynomial:
    """Product ``p_{i1} p_{i2} ...`` with each index normalized."""
    out = constant(kind, 1)
    for j in indices:
        out = out * normalize_index(j, kind)
    return out


def pbar(kind: GroupKind, *indices: int) -> PowerSumPolynomial:
    return conjugate(p(kind, *indices))


def poly_multiply(f: PowerSumPolynomial, g: PowerSumPolynomial) -> PowerSumPolynomial:
    if f.kind is not g.kind:
        raise GroupMismatchError(f"{f.kind.label} vs {g.kind.label}")
    out: dict[PowerSumMonomial, PolyElement] = {}
    for m1, c1 in f.items():
        for m2, c2 in g.items():
            m = m1 * m2
            c = c1 * c2
            out[m] = out[m] + c if m in out else c
    return PowerSumPolynomial(f.kind, out)


def conjugate(f: PowerSumPolynomial) -> PowerSumPolynomial:
    """Complex conjugate; traces are real over SO/USp so it is the identity there."""
    if f.kind.is_real:
        return f
    return PowerSumPolynomial(f.kind, {m.conj(): c for m, c in f.items()})


# --- Laplacian ---------------------------------------------------------------

def _split_sum(kind, j):
    """sum_{l=1}^{j-1} p_l p_{j-l}"""
    out = constant(kind, 0)
    for l in range(1, j):
        out = out + p(kind, l, j - l)
    return out


def _fold_sum(kind, j):
    """sum_{l=1}^{j-1} p_{2l-j}  (symmetric under l -> j-l, so equal to sum p_{j-2l})"""
    out = constant(kind, 0)
    for l in range(1, j):
        out = out + p(kind, 2 * l - j)
    return out


def _casimir(kind) -> PolyElement:
    """Eigenvalue factor c with Delta p_1 = -c p_1."""
    if kind is GroupKind.UNITARY:
        return N
    if kind is GroupKind.SPECIAL_ORTHOGONAL:
        return (N - 1) / 2
    return (2 * N + 1) / 2


def _lap_single(kind, j) -> PowerSumPolynomial:
    c = _casimir(kind)
    if kind is GroupKind.UNITARY:
        return p(kind, j) * (-c * j) - _split_sum(kind, j) * j
    half = Fraction(j, 2)
    sign = 1 if kind is GroupKind.SPECIAL_ORTHOGONAL else -1
    return (p(kind, j) * (-c * j) - _split_sum(kind, j) * half
            + _fold_sum(kind, j) * (sign * half))


def _lap_pair(kind, j, k) -> PowerSumPolynomial:
    c = _casimir(kind)
    if kind is GroupKind.UNITARY:
        return (p(kind, j, k) * (-c * (j + k)) - p(kind, j + k) * (2 * j * k)
                - p(kind, k) * _split_sum(kind, j) * j
                - p(kind, j) * _split_sum(kind, k) * k)
    sign = 1 if kind is GroupKind.SPECIAL_ORTHOGONAL else -1
    return (p(kind, j, k) * (-c * (j + k))
            - p(kind, k) * _split_sum(kind, j) * Fraction(j, 2)
            - p(kind, j) * _split_sum(kind, k) * Fraction(k, 2)
            - p(kind, j + k) * (j * k)
            + p(kind, k) * _fold_sum(kind, j) * (sign * Fraction(j, 2))
            + p(kind, j) * _fold_sum(kind, k) * (sign * Fraction(k, 2))
            + p(kind, j - k) * (j * k))


def _lap_mixed(j, k) -> PowerSumPolynomial:
    """Delta_U(p_j conj(p_k))."""
    u = GroupKind.UNITARY
    return (p(u, j - k) * (2 * j * k)
            - p(u, j) * pbar(u, k) * (N * (j + k))
            - pbar(u, k) * _split_sum(u, j) * j
            - p(u, j) * conjugate(_split_sum(u, k)) * k)


def _lap_monomial(kind, m: PowerSumMonomial) -> PowerSumPolynomial:
    if m.degree == 0:
        return constant(kind, 0)
    if m.degree > 2:
        raise UnsupportedShapeError(
            f"Laplacian is only available on monomials of trace-degree <= 2; "
            f"{m} has degree {m.degree}")
    a, b = m.a_indices(), m.b_indices()
    if not b:
        return _lap_single(kind, a[0]) if len(a) == 1 else _lap_pair(kind, a[0], a[1])
    if not a:
        return conjugate(_lap_monomial(kind, m.conj()))
    return _lap_mixed(a[0], b[0])


def laplacian(kind: GroupKind, f: PowerSumPolynomial) -> PowerSumPolynomial:
    """Laplace-Beltrami operator for the metric ``<X, Y> = Tr(X* Y)``.

    Defined on linear combinations of ``1, p_j, p_j p_k, p_j conj(p_k)``
    and their conjugates; anything of trace-degree >= 3 raises
    :class:`UnsupportedShapeError`.
    """
    kind = GroupKind.parse(kind)
    if f.kind is not kind:
        raise GroupMismatchError(f"{f.kind.label} polynomial under {kind.label} Laplacian")
    out = constant(kind, 0)
    for m, c in f.items():
        out = out + _lap_monomial(kind, m) * c
    return out


# --- Haar expectations ---------------------------------------------------------

def _double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def moment_factor(j: int, a_j: int) -> int:
    """``E[(sqrt(j) Z + eta_j)^{a_j}]`` for a real standard normal ``Z``."""
    if a_j == 0:
        return 1
    if j % 2 == 0:
        return 1 + sum(j ** d * math.comb(a_j, 2 * d) * _double_factorial(2 * d - 1)
                       for d in range(1, a_j // 2 + 1))
    if a_j % 2 == 1:
        return 0
    return j ** (a_j // 2) * _double_factorial(a_j - 1)


@dataclass(frozen=True)
class ExpectationResult:
    """Exact Haar expectation as a polynomial in ``n`` plus the minimal valid rank."""

    value: PolyElement
    validity_threshold: int

    def is_constant(self) -> bool:
        return self.value.degree() <= 0

    def at(self, n: int, force: bool = False) -> Fraction:
        if n < self.validity_threshold:
            msg = (f"moment formula needs n >= {self.validity_threshold}, got n = {n}")
            if not force:
                raise BelowThresholdError(msg)
            warnings.warn(msg + "; value not guaranteed exact", InexactExpectationWarning,
                          stacklevel=2)
        return _to_fraction(self.value(n))

    def render(self) -> str:
        if not self.value:
            return "0"
        sign, mag = _render_coeff(self.value)
        return mag if sign > 0 else "-" + mag

    def __str__(self) -> str:
        return f"{self.render()} (valid for n >= {self.validity_threshold})"


def _monomial_moment(kind: GroupKind, m: PowerSumMonomial) -> tuple[int, int]:
    """(value, threshold) for a single monomial."""
    if kind is GroupKind.UNITARY:
        if m.k_a != m.k_b:
            return 0, 1
        if m.a != m.b:
            return 0, max(1, m.k_a)
        val = 1
        for j, e in m.a:
            val *= j ** e * math.factorial(e)
        return val, max(1, m.k_a)
    if m.b:
        raise ValueError("conjugated factors are not allowed over SO/USp")
    val = 1
    for j, e in m.a:
        f = moment_factor(j, e)
        if kind is GroupKind.UNITARY_SYMPLECTIC and (j - 1) * e % 2:
            f = -f
        val *= f
    if kind is GroupKind.SPECIAL_ORTHOGONAL:
        return val, m.k_a + 1
    return val, max(1, -(-m.k_a // 2))


def haar_expectation(kind: GroupKind, f: PowerSumPolynomial) -> ExpectationResult:
    kind = GroupKind.parse(kind)
    if f.kind is not kind:
        raise GroupMismatchError(f"{f.kind.label} polynomial under {kind.label} Haar measure")
    value = COEFF_RING(0)
    threshold = 1
    for m, c in f.items():
        v, t = _monomial_moment(kind, m)
        value += c * v
        threshold = max(threshold, t)
    return ExpectationResult(value, threshold)


# --- enumeration helpers -------------------------------------------------------

def _partitions(k: int, max_part: int | None = None):
    if max_part is None:
        max_part = k
    if k == 0:
        yield ()
        return
    for first in range(min(k, max_part), 0, -1):
        for rest in _partitions(k - first, first):
            yield (first,) + rest


def monomials_up_to_weight(kind: GroupKind, max_weight: int,
                           include_constant: bool = False) -> list[PowerSumMonomial]:
    """All monomials with ``k_a + k_b <= max_weight`` (no conjugates over SO/USp)."""
    kind = GroupKind.parse(kind)
    out = []
    for w in range(0, max_weight + 1):
        splits = [(w, 0)] if kind.is_real else [(ka, w - ka) for ka in range(w + 1)]
        for ka, kb in splits:
            for pa in _partitions(ka):
                for pb in _partitions(kb):
                    m = PowerSumMonomial.from_indices(pa, pb)
                    if m.degree or include_constant:
                        out.append(m)
    return sorted(out, key=PowerSumMonomial.sort_key)


def supported_monomials(kind: GroupKind, max_weight: int) -> list[PowerSumMonomial]:
    """Monomials of trace-degree <= 2 and weight <= ``max_weight`` (Laplacian domain)."""
    return [m for m in monomials_up_to_weight(kind, max_weight, include_constant=True)
            if m.degree <= 2]


# --- parsing -----------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(~?p\[[-\d,\s]+\])|(~?p-?\d+)|(\d+/\d+|\d+)|(n)|(\*\*|[-+*()]))")


def _tokenize(text: str) -> list[str]:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse polynomial at {text[pos:]!r}")
        out.append(next(g for g in m.groups() if g is not None).replace(" ", ""))
        pos = m.end()
    return out


def parse_polynomial(text: str, kind: GroupKind) -> PowerSumPolynomial:
    """Parse the mini-grammar ``p2*~p2 - 3/2*n*p[1,1] + 1``.

    Factors: ``p<k>`` / ``p[j,k,...]`` power sums (any integer index),
    ``~`` prefix for conjugates, integers, rationals ``a/b``, the rank
    symbol ``n`` and parenthesized sub-expressions.
    """
    kind = GroupKind.parse(kind)
    toks = _tokenize(text)
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else None

    def take():
        nonlocal pos
        pos += 1
        return toks[pos - 1]

    def factor():
        t = peek()
        if t is None:
            raise ValueError(f"unexpected end of input in {text!r}")
        if t == "(":
            take()
            out = expr()
            if take() != ")":
                raise ValueError(f"unbalanced parentheses in {text!r}")
            return out
        if t == "-":
            take()
            return -factor()
        out = atom()
        if peek() == "**":
            take()
            e = take() if peek() is not None else ""
            if not e.isdigit():
                raise ValueError(f"exponent must be a nonnegative integer in {text!r}")
            out = out ** int(e)
        return out

    def atom():
        t = take()
        if t == "n":
            return constant(kind, N)
        if t[0].isdigit():
            return constant(kind, Fraction(t))
        if "p" not in t:
            raise ValueError(f"unexpected token {t!r} in {text!r}")
        neg = t.startswith("~")
        body = t[1:] if neg else t
        if body.startswith("p["):
            idx = [int(x) for x in body[2:-1].split(",") if x]
        else:
            idx = [int(body[1:])]
        out = p(kind, *idx)
        if neg:
            if kind.is_real:
                raise ValueError("conjugated factors are not allowed over SO/USp")
            out = conjugate(out)
        return out

    def term():
        out = factor()
        while peek() == "*":
            take()
            out = out * factor()
        return out

    def expr():
        sign = 1
        if peek() in ("+", "-"):
            sign = -1 if take() == "-" else 1
        out = term() * sign
        while peek() in ("+", "-"):
            s = take()
            t = term()
            out = out + t if s == "+" else out - t
        return out

    result = expr()
    if pos != len(toks):
        raise ValueError(f"trailing input {''.join(toks[pos:])!r} in {text!r}")
    return result
