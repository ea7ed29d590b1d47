"""Significance and self-sufficiency of dependency sets (itemsets)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, List, Optional, Sequence, Tuple

from scipy import stats

from .data import DEFAULT_MAX_CELL_ITEMS, ContingencyTable2x2, Dataset, SetPattern, set_pattern
from .errors import CapacityError, DomainError
from .exact import TestResult, log_binom_tail, fisher_p


def itemset_chi2(s: SetPattern) -> TestResult:
    """Chi-squared distance of the 2^m cell table from the product of the
    item margins.  The p-value uses one degree of freedom, following the
    correlation-rule convention, whatever m is."""
    n = s.n
    probs = [f / n for f in s.margins]
    if any(not 0 < p < 1 for p in probs):
        raise DomainError("every item margin must lie strictly between 0 and n")
    stat = 0.0
    for key, obs in s.cell_counts.items():
        e = 1.0
        for bit, p in zip(key, probs):
            e *= p if bit else 1 - p
        stat += n * (obs / n - e) ** 2 / e
    return TestResult("itemset_chi2", min(0.0, float(stats.chi2.logsf(stat, 1))), stat)


def itemset_binom_p(s: SetPattern) -> TestResult:
    """Binomial tail of fr(X) with success probability prod P(A_i)."""
    if any(f == 0 for f in s.margins):
        raise DomainError("every item must occur at least once")
    q = 1.0
    for f in s.margins:
        q *= f / s.n
    log_p = log_binom_tail(s.n, q, s.freq, s.n)
    return TestResult("itemset_binom", min(0.0, log_p))


def bipartitions(items: Sequence[int]):
    """Yield the 2^(m-1) - 1 unordered splits (Q, X \\ Q) with both sides nonempty."""
    first, rest = items[0], list(items[1:])
    m = len(rest)
    for code in range(1 << m):
        if code == (1 << m) - 1:
            continue
        left = (first,) + tuple(rest[i] for i in range(m) if code >> i & 1)
        right = tuple(rest[i] for i in range(m) if not code >> i & 1)
        yield left, right


@dataclass
class BipartitionResult:
    productive: bool
    worst_p: float
    worst_partition: Tuple[Tuple[int, ...], Tuple[int, ...]]
    alpha: float


def bipartition_productive(d: Dataset, x: Iterable, alpha: float = 0.05,
                           max_items: int = DEFAULT_MAX_CELL_ITEMS) -> BipartitionResult:
    xs = d.indices(x)
    if len(xs) < 2:
        raise DomainError("need at least two items")
    if len(xs) > max_items:
        raise CapacityError(f"{len(xs)} items exceed the cap of {max_items}")
    n, fx = d.n_rows, d.freq(xs)
    worst_lp, worst = -math.inf, None
    for left, right in bipartitions(xs):
        t = ContingencyTable2x2(n, d.freq(left), d.freq(right), fx)
        lp = fisher_p(t).log_p
        if lp > worst_lp or worst is None:
            worst_lp, worst = lp, (left, right)
    worst_p = math.exp(worst_lp)
    return BipartitionResult(worst_p <= alpha, worst_p, worst, alpha)


def is_nonredundant(d: Dataset, x: Iterable) -> Tuple[bool, Optional[Tuple[Tuple[int, ...], Tuple[int, ...]]]]:
    """False with witness (Y, Z) when some Y inside X has a nonempty proper
    subset Z of equal frequency.

    If any such pair exists then one exists with Z = Y minus one item, so
    only those pairs are scanned.
    """
    xs = d.indices(x)
    if len(xs) < 2:
        raise DomainError("need at least two items")
    for size in range(2, len(xs) + 1):
        for y in combinations(xs, size):
            fy = d.freq(y)
            for drop in y:
                z = tuple(i for i in y if i != drop)
                if d.freq(z) == fy:
                    return False, (y, z)
    return True, None


def independently_productive(d: Dataset, x: Iterable, supersets: Iterable[Iterable],
                             alpha: float = 0.05) -> Optional[bool]:
    """Recheck bipartition productivity after removing every row that
    contains all items of (Y minus X) for some superset Y.

    Returns None when no rows remain (undecidable).
    """
    xs = d.indices(x)
    sups = [d.indices(y) for y in supersets]
    for y in sups:
        if not set(xs) < set(y):
            raise DomainError("every superset must strictly contain x")
    if not sups:
        return True
    covered = 0
    for y in sups:
        covered |= d.cover(i for i in y if i not in xs)
    keep = d.all_rows & ~covered
    if keep == 0:
        return None
    return bipartition_productive(d.select_rows(keep), xs, alpha).productive


@dataclass
class SelfSufficiencyVerdict:
    pattern: SetPattern
    productive: bool
    worst_p: float
    nonredundant: bool
    witness: Optional[Tuple[Tuple[int, ...], Tuple[int, ...]]]
    independently_productive: Optional[bool]
    alpha_used: float

    @property
    def self_sufficient(self) -> bool:
        return bool(self.productive and self.nonredundant and self.independently_productive)


def self_sufficiency(d: Dataset, x: Iterable, candidates: Iterable[Iterable] = (),
                     alpha: float = 0.05) -> SelfSufficiencyVerdict:
    """Full verdict; candidate supersets that are themselves unproductive or
    redundant are ignored for the independence check."""
    xs = d.indices(x)
    prod = bipartition_productive(d, xs, alpha)
    nonred, witness = is_nonredundant(d, xs)
    qualifying = []
    for y in candidates:
        ys = d.indices(y)
        if set(xs) < set(ys) and bipartition_productive(d, ys, alpha).productive \
                and is_nonredundant(d, ys)[0]:
            qualifying.append(ys)
    indep = independently_productive(d, xs, qualifying, alpha)
    pattern = set_pattern(d, xs)
    pattern.verdicts.update(productive=prod.productive, nonredundant=nonred,
                            independently_productive=indep)
    return SelfSufficiencyVerdict(pattern, prod.productive, prod.worst_p, nonred, witness,
                                  indep, alpha)


def mutual_independence_witness(d: Dataset, x: Iterable) -> Optional[Tuple[int, ...]]:
    """A subset Y of x (|Y| >= 2) whose frequency differs from the product
    of its item margins, or None when x is exactly mutually independent.

    Exactness uses integers: fr(Y) * n^(|Y|-1) == prod fr(A_i).
    """
    xs = d.indices(x)
    n = d.n_rows
    for size in range(2, len(xs) + 1):
        for y in combinations(xs, size):
            prod = 1
            for i in y:
                prod *= d.col_freqs[i]
            if d.freq(y) * n ** (size - 1) != prod:
                return y
    return None
