"""Multiple-testing corrections, testability filtering, layered levels and
hold-out evaluation."""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .data import ContingencyTable2x2, Dataset, RulePattern, extract_table
from .errors import DomainError
from .exact import fisher_p, rule_log_p

METHODS = ("bonferroni", "sidak", "holm", "hochberg", "bh", "bhy", "weighted_bonferroni")


@dataclass
class AdjustmentResult:
    method: str
    m: int
    alpha: float
    k: int
    adjusted_ps: List[float]
    rejected: List[bool]


def _validate(raw_ps) -> np.ndarray:
    p = np.asarray(raw_ps, dtype=float).ravel()
    if p.size == 0:
        return p
    if not np.all((p > 0) & (p <= 1)):
        raise DomainError("p-values must lie in (0, 1]")
    return p


def harmonic(m: int) -> float:
    return float(sum(1.0 / i for i in range(1, m + 1)))


def adjusted_pvalues(raw_ps, method: str, weights=None) -> np.ndarray:
    p = _validate(raw_ps)
    m = p.size
    if m == 0:
        return p
    if method == "bonferroni":
        return np.minimum(1.0, m * p)
    if method == "sidak":
        with np.errstate(divide="ignore"):
            return np.minimum(1.0, -np.expm1(m * np.log1p(-np.minimum(p, 1.0))))
    if method == "weighted_bonferroni":
        if weights is None:
            raise DomainError("weighted_bonferroni needs weights")
        w = np.asarray(weights, dtype=float).ravel()
        if w.size != m or np.any(~np.isfinite(w)) or np.any(w < 0) \
                or not math.isclose(float(w.sum()), m, rel_tol=1e-9):
            raise DomainError("weights must be nonnegative, one per hypothesis, summing to m")
        with np.errstate(divide="ignore"):
            out = np.where(w > 0, m * p / np.where(w > 0, w, 1.0), 1.0)
        return np.minimum(1.0, out)

    order = np.argsort(p, kind="stable")
    ps = p[order]
    i = np.arange(1, m + 1)
    if method == "holm":
        adj = np.maximum.accumulate((m - i + 1) * ps)
    elif method == "hochberg":
        adj = np.minimum.accumulate(((m - i + 1) * ps)[::-1])[::-1]
    elif method in ("bh", "bhy"):
        # multiply by the ratio m/i so that i = m leaves p untouched exactly
        adj = np.minimum.accumulate((ps * (m / i))[::-1])[::-1]
        if method == "bhy":
            adj = adj * harmonic(m)
    else:
        raise DomainError(f"unknown correction method {method!r}")
    out = np.empty(m)
    out[order] = np.minimum(1.0, adj)
    return out


def adjust(raw_ps, method: str, alpha: float = 0.05, weights=None) -> AdjustmentResult:
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    adj = adjusted_pvalues(raw_ps, method, weights)
    rejected = [bool(a <= alpha) for a in adj]
    return AdjustmentResult(method, int(adj.size), alpha, sum(rejected), adj.tolist(), rejected)


@dataclass
class ErrorRateReport:
    m: int
    m0: int
    R: int
    V: int
    fwer_estimate: float
    fdr_estimate: float


def error_rates(rejected_per_trial: Sequence[Sequence[bool]], true_null: Sequence[bool]) -> ErrorRateReport:
    """Monte-Carlo FWER and FDR over trials with a known set of true nulls.

    R and V are totals over all trials.
    """
    rej = np.asarray(rejected_per_trial, dtype=bool)
    null = np.asarray(true_null, dtype=bool)
    r = rej.sum(axis=1)
    v = (rej & null[None, :]).sum(axis=1)
    fdp = np.where(r > 0, v / np.maximum(r, 1), 0.0)
    return ErrorRateReport(int(null.size), int(null.sum()), int(r.sum()), int(v.sum()),
                           float(np.mean(v > 0)), float(np.mean(fdp)))


def min_attainable_fisher_log_p(n: int, fr_x: int, fr_a: int) -> float:
    v = min(fr_x, fr_a)
    return fisher_p(ContingencyTable2x2(n, fr_x, fr_a, v)).log_p


def min_attainable_fisher_p(n: int, fr_x: int, fr_a: int) -> float:
    """Smallest Fisher p any table with these margins can reach."""
    return math.exp(min_attainable_fisher_log_p(n, fr_x, fr_a))


@dataclass
class TestabilityResult:
    __test__ = False

    testable: List[int]
    m_effective: int
    alpha: float

    @property
    def level(self) -> float:
        return self.alpha / self.m_effective if self.m_effective else self.alpha


def testability_from_pmin(p_min: Sequence[float], alpha: float = 0.05) -> TestabilityResult:
    """Smallest k with #{i : p*_i <= alpha/k} <= k, found by bisection.

    Counting is monotone in k, so the admissible k form an upper interval.
    The hypotheses with p*_i <= alpha/k are testable and k is the
    Bonferroni factor; each of them has p*_i <= alpha/|testable|.
    """
    pm = np.asarray(p_min, dtype=float)
    total = pm.size
    if total == 0:
        return TestabilityResult([], 0, alpha)
    srt = sorted(pm.tolist())

    def count(k):
        return bisect_right(srt, alpha / k)

    lo, hi = 1, total
    while lo < hi:
        mid = (lo + hi) // 2
        if count(mid) <= mid:
            hi = mid
        else:
            lo = mid + 1
    level = alpha / lo
    return TestabilityResult([i for i, v in enumerate(pm.tolist()) if v <= level], lo, alpha)


def testability_filter(margins: Sequence[Tuple[int, int, int]], alpha: float = 0.05,
                       correction: str = "bonferroni") -> TestabilityResult:
    """``margins`` holds one (n, fr_x, fr_a) triple per hypothesis."""
    if correction != "bonferroni":
        raise DomainError("testability filtering is defined for bonferroni only")
    return testability_from_pmin([min_attainable_fisher_p(*mg) for mg in margins], alpha)


@dataclass
class LayeredAlpha:
    alpha: float
    l_max: int
    s_l: Tuple[int, ...]
    alpha_l: Tuple[float, ...]


def layered_alphas(alpha: float, l_max: int, s_l: Sequence[int]) -> LayeredAlpha:
    s = tuple(int(v) for v in s_l)
    if l_max < 1 or len(s) != l_max:
        raise DomainError("need one pattern count per level")
    if any(v <= 0 for v in s):
        raise DomainError("pattern counts must be positive")
    return LayeredAlpha(alpha, l_max, s, tuple(alpha / (l_max * v) for v in s))


@dataclass
class HoldoutRule:
    rule: RulePattern
    p_explore: float
    p_holdout: float
    adjusted_p: float
    rejected: bool


@dataclass
class HoldoutResult:
    rules: List[HoldoutRule] = field(default_factory=list)
    n_explore: int = 0
    n_holdout: int = 0

    @property
    def survivors(self) -> List[HoldoutRule]:
        return [r for r in self.rules if r.rejected]


def split_rows(d: Dataset, split_ratio: float, seed: int,
               stratify: Optional[str] = None) -> Tuple[int, int]:
    """Seeded split into (exploratory, hold-out) row bitsets."""
    if not 0 < split_ratio < 1:
        raise DomainError("split_ratio must lie in (0, 1)")
    n = d.n_rows
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    if stratify is None:
        groups = [np.arange(n)]
    else:
        col = d.column(stratify)
        inside = np.array([(col >> i) & 1 for i in range(n)], dtype=bool)
        groups = [np.flatnonzero(inside), np.flatnonzero(~inside)]
    explore = 0
    for g in groups:
        if g.size == 0:
            continue
        take = int(round(split_ratio * g.size))
        for r in rng.permutation(g)[:take].tolist():
            explore |= 1 << r
    hold = d.all_rows & ~explore
    if explore == 0 or hold == 0:
        raise DomainError("split leaves one side empty")
    return explore, hold


def holdout_evaluate(d: Dataset, split_ratio: float, seed: int, miner_config, k: int,
                     correction: str = "holm", alpha: float = 0.05,
                     stratify: Optional[str] = None, workers: int = 1) -> HoldoutResult:
    """Mine the top k rules on an exploratory part and test only those on the rest."""
    from .miner import mine_rules

    explore_rows, hold_rows = split_rows(d, split_ratio, seed, stratify)
    explore = d.select_rows(explore_rows)
    hold = d.select_rows(hold_rows)
    cfg = replace(miner_config, top_k=k)
    report = mine_rules(explore, cfg, workers=workers)
    result = HoldoutResult([], explore.n_rows, hold.n_rows)
    if not report.rules:
        return result
    p_hold = []
    for rule in report.rules:
        t = extract_table(hold, rule.antecedent, rule.consequent, rule.consequent_sign)
        p_hold.append(math.exp(rule_log_p(t, cfg.test_id, multinomial_cap=cfg.multinomial_cap,
                                          double_binom_cap=cfg.double_binom_cap)))
    p_hold_safe = [max(p, np.finfo(float).tiny) for p in p_hold]
    adj = adjust(p_hold_safe, correction, alpha)
    for rule, ph, a, rej in zip(report.rules, p_hold, adj.adjusted_ps, adj.rejected):
        result.rules.append(HoldoutRule(rule, rule.scores["p"], ph, a, rej))
    return result
