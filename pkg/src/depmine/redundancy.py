"""Is a specialised rule YQ -> A an improvement over its generalisation Y -> A?

The forward test asks whether Q raises the chance of A inside the rows
where Y holds.  The backward test asks whether the rows outside YQ still
show the parent dependency once YQ itself is removed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, List, Optional, Tuple

from .data import POSITIVE, SIGNS, ContingencyTable2x2, Dataset, RulePattern, rule_pattern
from .errors import DomainError
from .exact import fisher_p

VALUE_BASED = "value_based"
VARIABLE_BASED = "variable_based"
INTERPRETATIONS = (VALUE_BASED, VARIABLE_BASED)

PRODUCTIVE = "productive"
SUPERFLUOUS = "superfluous"
UNDECIDABLE = "undecidable"

_TIE_RTOL = 1e-12


@dataclass
class ImprovementResult:
    parent: RulePattern
    child: RulePattern
    p_forward: Optional[float]
    p_backward: Optional[float]
    verdict: str
    reason: str = ""


def _prepare(d: Dataset, y, q, a, sign):
    ys, qs = d.indices(y), d.indices(q)
    ai = d.index(a)
    if not qs:
        raise DomainError("q must be nonempty")
    if set(ys) & set(qs):
        raise DomainError("y and q overlap")
    if ai in ys or ai in qs:
        raise DomainError("consequent appears in the antecedent")
    if sign not in SIGNS:
        raise DomainError(f"unknown sign {sign!r}")
    col = d.column(ai)
    if sign != POSITIVE:
        col = d.all_rows & ~col
    return d.cover(ys), d.cover(ys) & d.cover(qs), col


def forward_table(d: Dataset, y, q, a, sign: str = POSITIVE) -> ContingencyTable2x2:
    """Table of Q -> A within the rows where Y holds."""
    cy, cyq, ca = _prepare(d, y, q, a, sign)
    n = cy.bit_count()
    if n == 0:
        raise DomainError("fr(Y) = 0")
    return ContingencyTable2x2(n, cyq.bit_count(), (cy & ca).bit_count(), (cyq & ca).bit_count())


def backward_table(d: Dataset, y, q, a, sign: str = POSITIVE) -> ContingencyTable2x2:
    """Table of not-Y -> not-A within the rows where YQ fails."""
    cy, cyq, ca = _prepare(d, y, q, a, sign)
    rest = d.all_rows & ~cyq
    n = rest.bit_count()
    if n == 0:
        raise DomainError("fr(not YQ) = 0")
    not_y = rest & ~cy
    not_a = rest & ~ca
    return ContingencyTable2x2(n, not_y.bit_count(), not_a.bit_count(), (not_y & not_a).bit_count())


def productivity_fisher(d: Dataset, y, q, a, sign: str = POSITIVE) -> float:
    return fisher_p(forward_table(d, y, q, a, sign)).p_value


def negated_productivity_fisher(d: Dataset, y, q, a, sign: str = POSITIVE) -> float:
    return fisher_p(backward_table(d, y, q, a, sign)).p_value


def _conditional_chi2(n: int, x: int, a: int, xa: int) -> float:
    den = x * (n - x) * a * (n - a)
    if den == 0:
        raise DomainError("zero conditional margin")
    return n * (n * xa - x * a) ** 2 / den


def productivity_chi2(d: Dataset, y, q, a, sign: str = POSITIVE) -> float:
    t = forward_table(d, y, q, a, sign)
    return _conditional_chi2(t.n, t.n_x, t.n_a, t.n_xa)


def negated_productivity_chi2(d: Dataset, y, q, a, sign: str = POSITIVE) -> float:
    t = backward_table(d, y, q, a, sign)
    return _conditional_chi2(t.n, t.n_x, t.n_a, t.n_xa)


def _no_precision_gain(child: ContingencyTable2x2, parent: ContingencyTable2x2) -> bool:
    # exact integer form of precision(child) <= precision(parent)
    return child.n_xa * parent.n_x <= parent.n_xa * child.n_x


def _not_below(lp_a: float, lp_b: float) -> bool:
    # lp_a >= lp_b, with ties up to float noise counted as ties
    return lp_a >= lp_b - _TIE_RTOL * abs(lp_b)


def _log_p_or_none(table_fn, *args) -> Optional[float]:
    try:
        return fisher_p(table_fn(*args)).log_p
    except DomainError:
        return None


def _parents(antecedent: Tuple[int, ...], all_subsets: bool) -> List[Tuple[int, ...]]:
    k = len(antecedent)
    sizes = range(1, k) if all_subsets else [k - 1]
    out = []
    for s in sizes:
        if s >= 1:
            out.extend(combinations(antecedent, s))
    return out


def judge_superfluous(d: Dataset, child: RulePattern, interpretation: str = VARIABLE_BASED,
                      alpha: float = 0.05, all_subsets: bool = False,
                      shortcut: bool = False) -> List[ImprovementResult]:
    """Compare a rule with its generalisations (nonempty antecedents only).

    value_based: superfluous against a parent when precision does not
    increase or the forward p exceeds alpha.
    variable_based: superfluous when p_forward >= p_backward; with
    ``shortcut`` the rule's own Fisher p is compared with the parent's
    instead, and a child that is no better is superfluous.
    """
    if interpretation not in INTERPRETATIONS:
        raise DomainError(f"unknown interpretation {interpretation!r}")
    if not child.antecedent:
        raise DomainError("child antecedent is empty")
    a, sign = child.consequent, child.consequent_sign
    results = []
    for y in _parents(child.antecedent, all_subsets):
        q = tuple(i for i in child.antecedent if i not in y)
        parent = rule_pattern(d, y, a, sign)
        lp_fwd = _log_p_or_none(forward_table, d, y, q, a, sign)
        lp_bwd = _log_p_or_none(backward_table, d, y, q, a, sign)
        p_fwd = None if lp_fwd is None else math.exp(lp_fwd)
        p_bwd = None if lp_bwd is None else math.exp(lp_bwd)

        if interpretation == VALUE_BASED:
            if child.table.n_x == 0 or p_fwd is None:
                verdict, reason = UNDECIDABLE, "empty antecedent cover"
            elif _no_precision_gain(child.table, parent.table):
                verdict, reason = SUPERFLUOUS, "no gain in precision"
            elif p_fwd > alpha:
                verdict, reason = SUPERFLUOUS, "gain not significant"
            else:
                verdict, reason = PRODUCTIVE, ""
        elif shortcut:
            if _not_below(fisher_p(child.table).log_p, fisher_p(parent.table).log_p):
                verdict, reason = SUPERFLUOUS, "fisher p not below parent's"
            else:
                verdict, reason = PRODUCTIVE, ""
        else:
            if p_fwd is None or p_bwd is None:
                verdict, reason = UNDECIDABLE, "empty conditional population"
            elif _not_below(lp_fwd, lp_bwd):
                verdict, reason = SUPERFLUOUS, "forward improvement not stronger than backward"
            else:
                verdict, reason = PRODUCTIVE, ""
        results.append(ImprovementResult(parent, child, p_fwd, p_bwd, verdict, reason))
    return results


def is_superfluous(results: Iterable[ImprovementResult]) -> bool:
    return any(r.verdict == SUPERFLUOUS for r in results)
