"""Descriptive dependence measures of a 2x2 table.

Logarithms are natural and 0*log(0) is taken as 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .data import ContingencyTable2x2
from .errors import DomainError

MEASURE_IDS = ("leverage", "lift", "precision", "odds_ratio", "chi2", "chi2_cc",
               "mutual_information", "j_measure")


@dataclass(frozen=True)
class MeasureValue:
    id: str
    value: float
    defined: bool = True


def leverage(t: ContingencyTable2x2) -> float:
    n = t.n
    return t.n_xa / n - (t.n_x / n) * (t.n_a / n)


def lift(t: ContingencyTable2x2) -> float:
    if t.n_x == 0 or t.n_a == 0:
        raise DomainError("lift needs nonzero margins")
    return (t.n * t.n_xa) / (t.n_x * t.n_a)


def precision(t: ContingencyTable2x2) -> float:
    if t.n_x == 0:
        raise DomainError("precision needs fr(X) > 0")
    return t.n_xa / t.n_x


def odds_ratio(t: ContingencyTable2x2) -> MeasureValue:
    den = t.n_xna * t.n_nxa
    if den == 0:
        return MeasureValue("odds_ratio", math.inf, defined=False)
    return MeasureValue("odds_ratio", t.n_xa * t.n_nxna / den)


def _require_margins(t: ContingencyTable2x2):
    if not (0 < t.n_x < t.n and 0 < t.n_a < t.n):
        raise DomainError("all four margins must be positive")


def chi2_2x2(t: ContingencyTable2x2, continuity: bool = False) -> float:
    _require_margins(t)
    n = t.n
    px, pa = t.n_x / n, t.n_a / n
    d = abs(leverage(t))
    if continuity:
        d = max(0.0, d - 0.5 / n)
    return n * d * d / (px * (1 - px) * pa * (1 - pa))


def _plogr(p: float, q: float) -> float:
    return p * math.log(p / q) if p > 0 else 0.0


def mutual_information_2x2(t: ContingencyTable2x2) -> float:
    n = t.n
    px, pa = t.n_x / n, t.n_a / n
    mi = (_plogr(t.n_xa / n, px * pa)
          + _plogr(t.n_xna / n, px * (1 - pa))
          + _plogr(t.n_nxa / n, (1 - px) * pa)
          + _plogr(t.n_nxna / n, (1 - px) * (1 - pa)))
    # rounding can leave a tiny negative value at independence
    return max(mi, 0.0)


def j_measure(t: ContingencyTable2x2) -> float:
    if t.n_x == 0:
        raise DomainError("J-measure needs fr(X) > 0")
    n = t.n
    px, pa = t.n_x / n, t.n_a / n
    return _plogr(t.n_xa / n, px * pa) + _plogr(t.n_xna / n, px * (1 - pa))


def all_measures(t: ContingencyTable2x2) -> dict:
    """Every measure that is defined for t, keyed by measure id."""
    out = {"leverage": leverage(t), "mutual_information": mutual_information_2x2(t)}
    if t.n_x:
        out["precision"] = precision(t)
        out["j_measure"] = j_measure(t)
    if t.n_x and t.n_a:
        out["lift"] = lift(t)
    orr = odds_ratio(t)
    if orr.defined:
        out["odds_ratio"] = orr.value
    if 0 < t.n_x < t.n and 0 < t.n_a < t.n:
        out["chi2"] = chi2_2x2(t)
        out["chi2_cc"] = chi2_2x2(t, continuity=True)
    return out
