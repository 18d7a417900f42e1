import math
from fractions import Fraction

import pytest

from haartraces.psalgebra import BelowThresholdError, GroupKind, haar_expectation, laplacian, p
from haartraces.stein import (
    _lambda_factor,
    build_regression,
    build_remainders,
    carre_du_champ,
    centered_statistic,
    rate_formula,
    second_moments,
    theorem_threshold,
    wasserstein_bound,
)

U, SO, SP = GroupKind.UNITARY, GroupKind.SPECIAL_ORTHOGONAL, GroupKind.UNITARY_SYMPLECTIC


@pytest.mark.parametrize("kind, d, r, n, lam, sigma", [
    (U, 3, 3, 10, (10, 20, 30), (1, 2, 3)),
    (SO, 2, 1, 9, (8,), (2,)),
    (SP, 2, 2, 5, (Fraction(11, 2), 11), (1, 2)),
])
def test_regression_data(kind, d, r, n, lam, sigma):
    reg = build_regression(kind, d, r, n)
    assert reg.lambda_diag == tuple(Fraction(x) for x in lam)
    assert reg.sigma_diag == sigma


def test_regression_rejects_r_above_d():
    with pytest.raises(ValueError):
        build_regression(U, 1, 2, 5)


def test_remainder_examples():
    sym = build_remainders(U, 1, 1)
    assert [x.render() for x in sym.R] == ["0"]
    assert sym.S[0][0].render() == "0"
    assert sym.T[0][0].render() == "-2*p[2]"
    sym = build_remainders(U, 2, 2)
    assert [x.render() for x in sym.R] == ["0", "-2*p[1,1]"]
    assert [[x.render() for x in row] for row in sym.T] == [
        ["-2*p[2]", "-4*p[3]"], ["-4*p[3]", "-8*p[4]"]]
    sym = build_remainders(SO, 1, 1)
    assert sym.S[0][0].render() == "1 - p[2]"
    assert sym.T is None


@pytest.mark.parametrize("kind", [U, SO, SP])
def test_s_symmetry(kind):
    sym = build_remainders(kind, 5, 4)
    for a in range(4):
        for b in range(4):
            if kind is U:
                assert sym.S[a][b] == sym.S[b][a].conj()
                assert sym.T[a][b] == sym.T[b][a]
            else:
                assert sym.S[a][b] == sym.S[b][a]


@pytest.mark.parametrize("kind, d, r, key, value", [
    (U, 2, 2, "ER2", 8), (U, 1, 1, "ET2", 8), (SO, 2, 2, "ES2", 98), (SO, 1, 1, "ES2", 2),
])
def test_second_moment_examples(kind, d, r, key, value):
    mom = second_moments(kind, d, r)
    assert mom.at(max(mom.threshold, 10))[key] == value


def test_second_moment_threshold():
    mom = second_moments(U, 2, 2)
    assert mom.threshold == 4
    with pytest.raises(BelowThresholdError):
        mom.at(3)


def test_bound_examples():
    rep = wasserstein_bound(U, 1, 1, 10)
    assert rep.bound == pytest.approx(2 / (math.sqrt(math.pi) * 10), abs=1e-12)
    rep = wasserstein_bound(SO, 1, 1, 9)
    assert rep.bound == pytest.approx(2 / 8 * math.sqrt(2) / math.sqrt(2 * math.pi), abs=1e-12)
    assert set(rep.to_dict()) == {"kind", "d", "r", "n", "ER2", "ES2", "bound", "rate", "thresholds_ok"}


def test_bound_halves_with_n():
    a = wasserstein_bound(U, 1, 1, 20).bound
    b = wasserstein_bound(U, 1, 1, 40).bound
    assert a == pytest.approx(2 * b, rel=1e-14)


def test_bound_threshold_override():
    with pytest.raises(BelowThresholdError):
        wasserstein_bound(SO, 2, 2, 8)
    rep = wasserstein_bound(SO, 2, 2, 8, force=True)
    assert not rep.thresholds_ok


@pytest.mark.parametrize("kind", [U, SO, SP])
def test_bound_positive_and_decreasing(kind):
    vals = [wasserstein_bound(kind, 3, 2, n).bound for n in (13, 20, 40, 80)]
    assert all(v > 0 for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("d, r, n, expected", [
    (4, 4, 10, 4 ** 3.5 / 10), (5, 1, 7, 4 ** 1.5 / 7), (1, 1, 3, 1 / 3),
])
def test_rate_formula(d, r, n, expected):
    assert rate_formula(d, r, n) == pytest.approx(expected)


def test_rate_identical_across_groups():
    # the rate factor does not depend on the group
    assert theorem_threshold(SO, 3) == 13 and theorem_threshold(SP, 3) == 6
    reps = [wasserstein_bound(k, 3, 2, 40) for k in (U, SO, SP)]
    assert reps[0].rate == reps[1].rate == reps[2].rate


@pytest.mark.parametrize("kind", [U, SO, SP])
def test_regression_identity(kind):
    for j in range(1, 9):
        sym = build_remainders(kind, j, 1)
        lhs = laplacian(kind, p(kind, j)) + centered_statistic(kind, j) * _lambda_factor(kind, j)
        assert (lhs - sym.R[0]).is_zero()


def test_gamma_unitary_diagonal():
    g = carre_du_champ(U, p(U, 3), p(U, 3).conj())
    assert g.render() == "18*n"
    assert haar_expectation(SO, carre_du_champ(SO, p(SO, 2), p(SO, 2))).at(7) == 24
