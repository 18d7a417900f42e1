from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from haartraces.psalgebra import (
    BelowThresholdError,
    GroupKind,
    GroupMismatchError,
    InexactExpectationWarning,
    PowerSumMonomial,
    PowerSumPolynomial,
    UnsupportedShapeError,
    constant,
    conjugate,
    haar_expectation,
    laplacian,
    moment_factor,
    monomials_up_to_weight,
    normalize_index,
    p,
    parse_polynomial,
    pbar,
    supported_monomials,
)

U, SO, SP = GroupKind.UNITARY, GroupKind.SPECIAL_ORTHOGONAL, GroupKind.UNITARY_SYMPLECTIC
KINDS = [U, SO, SP]


@pytest.mark.parametrize("kind, mono, expected", [
    (U, "p2", "-2*n*p[2] - 2*p[1,1]"),
    (SO, "p1", "-(1/2)*(n-1)*p[1]"),
    (SP, "p1", "-(1/2)*(2*n+1)*p[1]"),
    (SO, "p2", "n - (n-1)*p[2] - p[1,1]"),
    (U, "p1*~p1", "2*n - 2*n*p[1]*~p[1]"),
    (U, "p1", "-n*p[1]"),
    (U, "1", "0"),
])
def test_laplacian_rendering(kind, mono, expected):
    assert laplacian(kind, parse_polynomial(mono, kind)).render() == expected


def test_laplacian_rejects_degree_three():
    with pytest.raises(UnsupportedShapeError, match="degree"):
        laplacian(U, p(U, 1) ** 3)


def test_sp_p2_laplacian_has_constant():
    # fold sum at j = 2 contains p_0 = 2n, entering with a minus sign
    out = laplacian(SP, p(SP, 2))
    assert out.coefficient(PowerSumMonomial()) is not None
    assert haar_expectation(SP, out).render() == "0"


@pytest.mark.parametrize("kind, poly, value, threshold", [
    (U, "p2*~p2", 2, 2),
    (SO, "p2*p2", 3, 5),
    (SP, "p2", -1, 1),
    (U, "p1*p1*~p2", 0, 2),
    (U, "p1*~p2", 0, 1),
    (U, "p1*p1*~p1*~p1", 2, 2),
    (SO, "p1*p1", 1, 3),
    (SO, "p4", 1, 5),
    (SP, "p1*p1", 1, 1),
    (SP, "p3*p3", 3, 3),
])
def test_expectation_examples(kind, poly, value, threshold):
    res = haar_expectation(kind, parse_polynomial(poly, kind))
    assert res.render() == str(value)
    assert res.validity_threshold == threshold


def test_expectation_str():
    res = haar_expectation(U, parse_polynomial("p2*~p2", U))
    assert str(res) == "2 (valid for n >= 2)"


def test_below_threshold_errors_and_force_warns():
    res = haar_expectation(SO, parse_polynomial("p2*p2", SO))
    with pytest.raises(BelowThresholdError):
        res.at(3)
    with pytest.warns(InexactExpectationWarning):
        assert res.at(3, force=True) == 3
    assert res.at(5) == Fraction(3)


def test_group_mismatch():
    with pytest.raises(GroupMismatchError):
        haar_expectation(SO, p(U, 1))


def test_conjugates_rejected_on_real_groups():
    with pytest.raises(ValueError):
        parse_polynomial("~p1", SO)


@pytest.mark.parametrize("j, a, expected", [
    (1, 1, 0), (1, 2, 1), (1, 4, 3), (2, 1, 1), (2, 2, 3),
    (3, 2, 3), (4, 1, 1), (3, 1, 0), (2, 0, 1),
])
def test_moment_factor(j, a, expected):
    assert moment_factor(j, a) == expected


@pytest.mark.parametrize("kind, raw, expected", [
    (U, -2, "~p[2]"), (SO, -2, "p[2]"), (SP, -3, "p[3]"), (U, 0, "n"), (SP, 0, "2*n"),
])
def test_normalize_index(kind, raw, expected):
    assert normalize_index(raw, kind).render() == expected


def test_conjugate_identity_on_real_kinds():
    f = p(SO, 1, 2) + 3
    assert conjugate(f) == f
    assert conjugate(p(U, 2)) == pbar(U, 2)


@pytest.mark.parametrize("kind", KINDS)
def test_parse_roundtrip_of_laplacians(kind):
    for m in supported_monomials(kind, 5):
        out = laplacian(kind, PowerSumPolynomial(kind, {m: 1}))
        assert parse_polynomial(out.render(), kind) == out


def test_parser_errors():
    with pytest.raises(ValueError):
        parse_polynomial("p1 +", U)
    with pytest.raises(ValueError):
        parse_polynomial("q1", U)


def test_enumeration_counts():
    assert len(monomials_up_to_weight(SO, 4)) == 1 + 2 + 3 + 5
    assert len(monomials_up_to_weight(U, 2)) == 2 + 5


@pytest.mark.parametrize("kind", KINDS)
def test_stationarity_low_weight(kind):
    for m in supported_monomials(kind, 6):
        e = haar_expectation(kind, laplacian(kind, PowerSumPolynomial(kind, {m: 1})))
        assert e.render() == "0", m.render()


indices = st.integers(min_value=1, max_value=4)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(KINDS), indices, indices, st.integers(-3, 3), st.integers(-3, 3))
def test_laplacian_is_linear(kind, j, k, a, b):
    f, g = p(kind, j), p(kind, k)
    assert laplacian(kind, f * a + g * b) == laplacian(kind, f) * a + laplacian(kind, g) * b


@settings(max_examples=60, deadline=None)
@given(indices, indices)
def test_unitary_laplacian_commutes_with_conjugation(j, k):
    f = p(U, j) * pbar(U, k)
    assert laplacian(U, conjugate(f)) == conjugate(laplacian(U, f))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(KINDS), st.lists(indices, min_size=1, max_size=3))
def test_ring_axioms(kind, idx):
    f = p(kind, *idx)
    g = constant(kind, 2) + p(kind, idx[0])
    assert f * g == g * f
    assert (f + g) - g == f
    assert f * (g + 1) == f * g + f
