import math

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from depmine.data import ContingencyTable2x2 as T
from depmine.errors import CapacityError, DomainError
from depmine.exact import (LOGCOMB, NEGATIVE, POSITIVE, RULE_TESTS, binom_complete_p,
                           binom_partial_p, chi2_p, double_binom_value_p, fisher_p, fisher_p0,
                           log_binom_tail, mi_p, multinomial_value_p, resolve_test_id,
                           rule_log_p, z_complete, z_partial)

X_A = T(100, 30, 50, 30)
Y_A = T(100, 60, 50, 50)


def close(lp, ref, rel=1e-9):
    return math.isclose(lp, ref, rel_tol=rel, abs_tol=1e-12)


@st.composite
def tables(draw, min_n=1, max_n=40, inner=False):
    n = draw(st.integers(max(min_n, 2 if inner else 1), max_n))
    lo, hi = (1, n - 1) if inner else (0, n)
    nx = draw(st.integers(lo, hi))
    na = draw(st.integers(lo, hi))
    nxa = draw(st.integers(max(0, nx + na - n), min(nx, na)))
    return T(n, nx, na, nxa)


def test_fisher_examples():
    assert f"{fisher_p(X_A).p_value:.2e}" == "1.60e-12"
    assert f"{fisher_p(Y_A).p_value:.2e}" == "7.47e-19"
    assert fisher_p(T(5, 2, 2, 2)).p_value == pytest.approx(0.1, rel=1e-12)


def test_binomial_partial_examples():
    assert binom_partial_p(X_A).p_value == pytest.approx(0.5 ** 30, rel=1e-9)
    assert f"{binom_partial_p(X_A).p_value:.2e}" == "9.31e-10"
    assert f"{binom_partial_p(Y_A).p_value:.2e}" == "8.08e-08"


def test_z_scores():
    assert round(z_partial(X_A).statistic, 2) == 5.48
    assert round(z_partial(Y_A).statistic, 2) == 5.16
    assert round(z_complete(X_A).statistic, 2) == 4.20
    assert round(z_complete(Y_A).statistic, 2) == 4.36


def test_value_based_examples():
    assert f"{multinomial_value_p(X_A).p_value:.2e}" == "8.86e-13"
    assert f"{multinomial_value_p(Y_A).p_value:.2e}" == "1.01e-19"
    assert f"{double_binom_value_p(X_A).p_value:.2e}" == "2.05e-13"
    assert f"{double_binom_value_p(Y_A).p_value:.2e}" == "7.35e-20"


def test_zero_overlap_is_full_tail():
    for t in (T(10, 3, 4, 0), T(7, 0, 3, 0)):
        assert fisher_p(t).p_value == 1.0


def test_caps():
    with pytest.raises(CapacityError):
        multinomial_value_p(T(201, 10, 10, 5))
    with pytest.raises(CapacityError):
        double_binom_value_p(T(50, 10, 10, 5), cap=49)


def test_directions_checked():
    with pytest.raises(DomainError):
        fisher_p(X_A, "sideways")
    with pytest.raises(DomainError):
        resolve_test_id("nope")


def test_undefined_tests_become_one():
    assert rule_log_p(T(10, 0, 5, 0), "chi2") == 0.0


def test_lncomb_outside_range():
    assert LOGCOMB.lncomb(5, 6) == -math.inf
    assert LOGCOMB.lncomb(5, -1) == -math.inf
    assert LOGCOMB.lncomb(3000, 1) == pytest.approx(math.log(3000))


def test_log_binom_tail_matches_sum():
    exact = sum(math.comb(20, k) * 0.3 ** k * 0.7 ** (20 - k) for k in range(8, 21))
    assert log_binom_tail(20, 0.3, 8, 20) == pytest.approx(math.log(exact), rel=1e-12)


def test_chi2_one_sided_halves():
    two = chi2_p(X_A).log_p
    assert chi2_p(X_A, POSITIVE).log_p == pytest.approx(two + math.log(0.5), rel=1e-12)
    assert chi2_p(X_A, NEGATIVE).p_value == pytest.approx(1 - 0.5 * math.exp(two), rel=1e-12)
    assert mi_p(Y_A, POSITIVE).log_p < mi_p(Y_A).log_p


def test_non_exchangeable_partial_tests():
    t = T(100, 30, 60, 25)
    assert binom_partial_p(t).log_p != pytest.approx(binom_partial_p(t.swapped()).log_p, rel=1e-6)
    assert z_partial(t).statistic != pytest.approx(z_partial(t.swapped()).statistic, rel=1e-6)


@settings(max_examples=300, deadline=None)
@given(tables(max_n=60))
def test_fisher_properties(t):
    pos, neg = fisher_p(t), fisher_p(t, NEGATIVE)
    assert 0 < pos.p_value <= 1 and pos.log_p <= 0
    assert pos.p_value == pytest.approx(math.exp(pos.log_p), rel=1e-15)
    assert pos.p_value + neg.p_value >= 1 - 1e-12
    p0 = fisher_p0(t).log_p
    assert p0 <= pos.log_p + 1e-12 and p0 <= neg.log_p + 1e-12
    assert close(pos.log_p, fisher_p(t.swapped()).log_p)


@settings(max_examples=300, deadline=None)
@given(tables(max_n=60, inner=True))
def test_exchangeability_and_sign(t):
    assert close(binom_complete_p(t).log_p, binom_complete_p(t.swapped()).log_p)
    assert z_complete(t).statistic == pytest.approx(z_complete(t.swapped()).statistic, rel=1e-12,
                                                    abs=1e-12)
    zp = z_partial(t, POSITIVE).statistic
    zn = z_partial(t.negated(), NEGATIVE).statistic
    assert zp == pytest.approx(-zn, rel=1e-12, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(tables(max_n=25, inner=True), st.sampled_from(sorted(RULE_TESTS)))
def test_monotone_in_overlap(t, tid):
    hi = min(t.n_x, t.n_a)
    prev = None
    for k in range(max(0, t.n_x + t.n_a - t.n), hi + 1):
        lp = rule_log_p(T(t.n, t.n_x, t.n_a, k), tid)
        assert math.isfinite(lp) and lp <= 0
        if prev is not None:
            assert lp <= prev + 1e-9 * max(1.0, abs(prev))
        prev = lp


@settings(max_examples=150, deadline=None)
@given(tables(max_n=12))
def test_fisher_oracle_small(t):
    for direction in (POSITIVE, NEGATIVE):
        ref = oracles.fisher_log_p(t.n, t.n_x, t.n_a, t.n_xa, direction)
        assert close(fisher_p(t, direction).log_p, ref)
    assert close(fisher_p0(t).log_p, oracles.fisher_p0_log(t.n, t.n_x, t.n_a, t.n_xa))


@settings(max_examples=80, deadline=None)
@given(tables(max_n=14))
def test_value_based_oracles_small(t):
    assert close(multinomial_value_p(t).log_p,
                 oracles.multinomial_log_p(t.n, t.n_x, t.n_a, t.n_xa))
    assert close(double_binom_value_p(t).log_p,
                 oracles.double_binom_log_p(t.n, t.n_x, t.n_a, t.n_xa))
