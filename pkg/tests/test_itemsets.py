import math
from fractions import Fraction
from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import counts_dataset
from depmine.data import ContingencyTable2x2, Dataset, extract_table, set_pattern
from depmine.errors import CapacityError, DomainError
from depmine.exact import fisher_p
from depmine.itemsets import (bipartition_productive, bipartitions, independently_productive,
                              is_nonredundant, itemset_binom_p, itemset_chi2,
                              mutual_independence_witness, self_sufficiency)
from depmine.measures import chi2_2x2


def parity_mix(m, even_weight, uniform_weight):
    """Every proper subset is exactly independent; the full set is not."""
    cells = {}
    for key in product((0, 1), repeat=m):
        cells[key] = uniform_weight + (even_weight if sum(key) % 2 == 0 else 0)
    return counts_dataset(cells, [f"b{i}" for i in range(m)])


def noisy_four():
    """40 rows of ABCD on top of an exactly independent background."""
    cells = {key: 5 * 2 ** (4 - sum(key)) for key in product((0, 1), repeat=4)}
    cells[(1, 1, 1, 1)] += 40
    return counts_dataset(cells, ["A", "B", "C", "D"])


def test_bipartition_count():
    parts = list(bipartitions((0, 1, 2, 3)))
    assert len(parts) == 7
    assert len({frozenset(map(frozenset, p)) for p in parts}) == 7


def test_two_items_reduce_to_2x2():
    rng = np.random.default_rng(0)
    for _ in range(30):
        mat = rng.random((30, 2)) < 0.5
        d = Dataset.from_matrix(mat, ["x", "a"])
        if not (0 < mat[:, 0].sum() < 30 and 0 < mat[:, 1].sum() < 30):
            continue
        s = itemset_chi2(set_pattern(d, ["x", "a"]))
        assert s.statistic == pytest.approx(chi2_2x2(extract_table(d, ["x"], "a")), rel=1e-12)


def test_independent_product_is_zero():
    d = counts_dataset({key: 1 for key in product((0, 1), repeat=3)}, ["a", "b", "c"])
    assert itemset_chi2(set_pattern(d, ["a", "b", "c"])).statistic == pytest.approx(0, abs=1e-12)


def test_chi2_oracle_16_rows():
    rng = np.random.default_rng(3)
    done = 0
    while done < 50:
        mat = rng.random((16, 3)) < 0.5
        if not all(0 < c < 16 for c in mat.sum(axis=0)):
            continue
        d = Dataset.from_matrix(mat, ["a", "b", "c"])
        got = itemset_chi2(set_pattern(d, ["a", "b", "c"]))
        stat, lp = oracles.itemset_chi2_exact(mat.astype(int).tolist(), (0, 1, 2))
        assert got.statistic == pytest.approx(float(stat), rel=1e-12, abs=1e-12)
        assert math.isclose(got.log_p, lp, rel_tol=1e-9, abs_tol=1e-12)
        done += 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(*[st.booleans()] * 4), min_size=4, max_size=30), st.permutations(range(4)))
def test_chi2_permutation_invariant(rows, perm):
    mat = np.array(rows, dtype=bool)
    if not all(0 < c < len(rows) for c in mat.sum(axis=0)):
        return
    d = Dataset.from_matrix(mat, list("abcd"))
    d2 = Dataset.from_matrix(mat[:, list(perm)], [d.names[i] for i in perm])
    s1 = itemset_chi2(set_pattern(d, list("abcd"))).statistic
    s2 = itemset_chi2(set_pattern(d2, list("abcd"))).statistic
    assert s1 == pytest.approx(s2, rel=1e-12, abs=1e-12)


def test_binomial_itemset_test():
    d = counts_dataset({(1, 1): 3, (1, 0): 1, (0, 1): 1, (0, 0): 5}, ["a", "b"])
    q = (4 / 10) * (4 / 10)
    exact = sum(math.comb(10, k) * q ** k * (1 - q) ** (10 - k) for k in range(3, 11))
    assert itemset_binom_p(set_pattern(d, ["a", "b"])).p_value == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("m,even,uniform", [(3, 1, 1), (3, 3, 2), (4, 1, 1), (4, 2, 5)])
def test_parity_mix_equal_bipartition_leverage(m, even, uniform):
    d = parity_mix(m, even, uniform)
    items = list(range(m))
    n = d.n_rows
    for size in range(2, m):
        for y in combinations(items, size):
            assert mutual_independence_witness(d, y) is None
    assert mutual_independence_witness(d, items) == tuple(items)
    fx = d.freq(items)
    levs = {Fraction(fx, n) - Fraction(d.freq(q), n) * Fraction(d.freq(r), n)
            for q, r in bipartitions(items)}
    assert len(levs) == 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(*[st.booleans()] * 4), min_size=2, max_size=25))
def test_mutual_dependence_monotone(rows):
    d = Dataset.from_matrix(np.array(rows, dtype=bool), list("abcd"))
    for size in range(2, 4):
        for y in combinations(range(4), size):
            if mutual_independence_witness(d, y) is not None:
                for extra in range(4):
                    if extra not in y:
                        assert mutual_independence_witness(d, tuple(y) + (extra,)) is not None


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(*[st.booleans()] * 3), min_size=2, max_size=30))
def test_bipartition_fails_with_independent_item(rows):
    d = Dataset.from_matrix(np.array(rows, dtype=bool), list("abc"))
    res = bipartition_productive(d, [0, 1, 2], 0.05)
    for i in range(3):
        rest = [j for j in range(3) if j != i]
        p = fisher_p(ContingencyTable2x2(d.n_rows, d.freq([i]), d.freq(rest), d.freq([0, 1, 2]))).p_value
        if p > 0.05:
            assert not res.productive
        assert res.worst_p >= p * (1 - 1e-12)


def test_redundancy_pregnant():
    # every pregnant row is female
    d = counts_dataset({(1, 1, 1): 6, (1, 1, 0): 4, (1, 0, 1): 5, (1, 0, 0): 15, (0, 0, 1): 3,
                        (0, 0, 0): 17}, ["female", "pregnant", "nausea"])
    ok, witness = is_nonredundant(d, ["female", "pregnant", "nausea"])
    assert not ok
    y, z = witness
    assert d.freq(y) == d.freq(z) and set(z) < set(y)
    assert set(y) == {0, 1} and z == (1,)


def test_apple_redundant(apple):
    ok, witness = is_nonredundant(apple, ["red", "big", "sweet"])
    assert not ok and apple.freq(witness[0]) == apple.freq(witness[1])


def test_independent_productivity_noisy_four():
    d = noisy_four()
    assert bipartition_productive(d, ["A", "B"]).productive
    assert independently_productive(d, ["A", "B"], [["A", "B", "C", "D"]]) is False
    full = self_sufficiency(d, ["A", "B", "C", "D"])
    assert full.productive and full.nonredundant and full.self_sufficient
    sub = self_sufficiency(d, ["A", "B"], [["A", "B", "C", "D"]])
    assert sub.productive and not sub.self_sufficient
    assert sub.independently_productive is False


def test_independent_productivity_edge_cases():
    d = noisy_four()
    assert independently_productive(d, ["A", "B"], []) is True
    every = counts_dataset({(1, 1, 1): 4, (1, 0, 1): 2, (0, 1, 1): 2}, ["A", "B", "C"])
    assert independently_productive(every, ["A", "B"], [["A", "B", "C"]]) is None
    with pytest.raises(DomainError):
        independently_productive(d, ["A", "B"], [["A"]])


def test_caps_and_domain():
    d = counts_dataset({(1,) * 13: 2, (0,) * 13: 2}, [f"c{i}" for i in range(13)])
    with pytest.raises(CapacityError):
        bipartition_productive(d, range(13))
    with pytest.raises(DomainError):
        bipartition_productive(d, [0])
