"""Exact and asymptotic significance tests for a single rule X -> A.

Every p-value is carried as its natural logarithm.  Tail sums are formed
from log-domain terms with log-sum-exp, so values far below the smallest
double never underflow on the way.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats
from scipy.special import gammaln, logsumexp, xlog1py, xlogy

from .data import ContingencyTable2x2
from .errors import CapacityError, DomainError
from .measures import chi2_2x2, leverage, mutual_information_2x2

POSITIVE = "positive"
NEGATIVE = "negative"
DIRECTIONS = (POSITIVE, NEGATIVE)

DEFAULT_MULTINOMIAL_CAP = 200
DEFAULT_DOUBLE_BINOM_CAP = 2000

TEST_IDS = ("fisher_pos", "fisher_neg", "fisher_p0", "binom_partial", "z_partial",
            "binom_complete", "z_complete", "multinomial_value", "double_binom_value",
            "chi2_test", "mi_test")


class LogCombinatorics:
    """Table of ln(k!) that grows on demand and is shared read-only."""

    def __init__(self, n_max: int = 1024):
        self._lock = threading.Lock()
        self._table = gammaln(np.arange(n_max + 1, dtype=float) + 1.0)
        self._table[0] = self._table[1] = 0.0

    @property
    def n_max(self) -> int:
        return len(self._table) - 1

    def _ensure(self, n: int) -> np.ndarray:
        table = self._table
        if n < len(table):
            return table
        with self._lock:
            if n >= len(self._table):
                size = max(n + 1, 2 * len(self._table))
                new = gammaln(np.arange(size, dtype=float) + 1.0)
                new[0] = new[1] = 0.0
                self._table = new
            return self._table

    def lnfact(self, k):
        k = np.asarray(k, dtype=np.int64)
        table = self._ensure(int(k.max()) if k.size else 0)
        return table[k]

    def lncomb(self, n, k):
        """ln C(n, k); -inf where k lies outside [0, n]."""
        n = np.asarray(n, dtype=np.int64)
        k = np.asarray(k, dtype=np.int64)
        n, k = np.broadcast_arrays(n, k)
        ok = (k >= 0) & (k <= n)
        nn = np.where(ok, n, 0)
        kk = np.where(ok, k, 0)
        table = self._ensure(int(nn.max()) if nn.size else 0)
        out = table[nn] - table[kk] - table[nn - kk]
        out = np.where(ok, out, -np.inf)
        return out if out.ndim else float(out)


LOGCOMB = LogCombinatorics()


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # keep pytest from collecting this class

    test_id: str
    log_p: Optional[float]
    statistic: Optional[float] = None

    @property
    def p_value(self) -> Optional[float]:
        return None if self.log_p is None else math.exp(self.log_p)


def _clip(log_p: float) -> float:
    return min(0.0, float(log_p))


def _check_direction(direction: str):
    if direction not in DIRECTIONS:
        raise DomainError(f"unknown direction {direction!r}")


def _log_hypergeom_range(t: ContingencyTable2x2, lo: int, hi: int) -> float:
    i = np.arange(lo, hi + 1)
    terms = LOGCOMB.lncomb(t.n_x, i) + LOGCOMB.lncomb(t.n - t.n_x, t.n_a - i)
    return float(logsumexp(terms)) - LOGCOMB.lncomb(t.n, t.n_a)


def fisher_p(t: ContingencyTable2x2, direction: str = POSITIVE) -> TestResult:
    _check_direction(direction)
    if direction == POSITIVE:
        log_p = _log_hypergeom_range(t, t.n_xa, min(t.n_x, t.n_a))
        return TestResult("fisher_pos", _clip(log_p))
    log_p = _log_hypergeom_range(t, max(0, t.n_x + t.n_a - t.n), t.n_xa)
    return TestResult("fisher_neg", _clip(log_p))


def fisher_p0(t: ContingencyTable2x2) -> TestResult:
    return TestResult("fisher_p0", _clip(_log_hypergeom_range(t, t.n_xa, t.n_xa)))


def log_binom_tail(size: int, p: float, lo: int, hi: int) -> float:
    i = np.arange(lo, hi + 1)
    terms = LOGCOMB.lncomb(size, i) + xlogy(i, p) + xlog1py(size - i, -p)
    return float(logsumexp(terms))


def binom_partial_p(t: ContingencyTable2x2, direction: str = POSITIVE) -> TestResult:
    """Binomial tail of fr(XA) among the fr(X) rows, P(A) at its MLE."""
    _check_direction(direction)
    if t.n_x == 0:
        raise DomainError("partial binomial test needs fr(X) > 0")
    pa = t.n_a / t.n
    if direction == POSITIVE:
        log_p = log_binom_tail(t.n_x, pa, t.n_xa, t.n_x)
    else:
        log_p = log_binom_tail(t.n_x, pa, 0, t.n_xa)
    return TestResult("binom_partial", _clip(log_p))


def binom_complete_p(t: ContingencyTable2x2, direction: str = POSITIVE) -> TestResult:
    """Binomial tail of fr(XA) among all n rows with success P(X)P(A)."""
    _check_direction(direction)
    q = (t.n_x * t.n_a) / (t.n * t.n)
    if direction == POSITIVE:
        log_p = log_binom_tail(t.n, q, t.n_xa, t.n)
    else:
        log_p = log_binom_tail(t.n, q, 0, t.n_xa)
    return TestResult("binom_complete", _clip(log_p))


def _normal_log_p(z: float, direction: str) -> float:
    if direction == POSITIVE:
        return float(stats.norm.logsf(z))
    return float(stats.norm.logcdf(z))


def z_partial(t: ContingencyTable2x2, direction: str = POSITIVE) -> TestResult:
    """Signed z-score of fr(XA) against Bin(fr(X), P(A)).

    The statistic is the same for both directions; the direction selects
    the normal tail used for the p-value.
    """
    _check_direction(direction)
    if t.n_x == 0 or not 0 < t.n_a < t.n:
        raise DomainError("z-score undefined for degenerate margins")
    pa = t.n_a / t.n
    z = (t.n_xa - t.n_x * pa) / math.sqrt(t.n_x * pa * (1 - pa))
    return TestResult("z_partial", _normal_log_p(z, direction), z)


def z_complete(t: ContingencyTable2x2, direction: str = POSITIVE, continuity: bool = False) -> TestResult:
    _check_direction(direction)
    q = (t.n_x * t.n_a) / (t.n * t.n)
    if not 0 < t.n_x * t.n_a < t.n * t.n:
        raise DomainError("z-score undefined for degenerate margins")
    dev = t.n_xa - t.n * q
    if continuity:
        dev = math.copysign(max(0.0, abs(dev) - 0.5), dev)
    z = dev / math.sqrt(t.n * q * (1 - q))
    return TestResult("z_complete", _normal_log_p(z, direction), z)


def multinomial_value_p(t: ContingencyTable2x2, cap: int = DEFAULT_MULTINOMIAL_CAP) -> TestResult:
    """Value-based p under the multinomial model with MLE parameters.

    Sums every table (N_X, N_XA, N_A) whose lift is at least the observed
    lift and whose N_XA is at least fr(XA).  The lift comparison is done
    in integers, so equal lifts are counted.
    """
    n, nx, na, nxa = t.n, t.n_x, t.n_a, t.n_xa
    if n > cap:
        raise CapacityError(f"n={n} exceeds the multinomial cap of {cap}")
    px, pa = nx / n, na / n
    big_na = np.arange(n + 1)
    a_part = xlogy(big_na, pa) + xlog1py(n - big_na, -pa)
    parts = []
    for big_nx in range(n + 1):
        base = float(LOGCOMB.lncomb(n, big_nx)) + xlogy(big_nx, px) + xlog1py(n - big_nx, -px)
        if base == -np.inf or big_nx < nxa:
            continue
        big_nxa = np.arange(nxa, big_nx + 1)[:, None]
        ok = ((big_na >= big_nxa) & (big_na - big_nxa <= n - big_nx)
              & (big_nxa * nx * na >= nxa * big_nx * big_na))
        if not ok.any():
            continue
        terms = (LOGCOMB.lncomb(big_nx, big_nxa) + LOGCOMB.lncomb(n - big_nx, big_na - big_nxa)
                 + a_part)
        parts.append(base + float(logsumexp(np.where(ok, terms, -np.inf))))
    log_p = float(logsumexp(parts)) if parts else -np.inf
    return TestResult("multinomial_value", _clip(log_p))


def double_binom_value_p(t: ContingencyTable2x2, cap: int = DEFAULT_DOUBLE_BINOM_CAP) -> TestResult:
    """Value-based p with fr(X) fixed: two independent binomials for the
    counts of A inside and outside X."""
    n, nx, na, nxa = t.n, t.n_x, t.n_a, t.n_xa
    if n > cap:
        raise CapacityError(f"n={n} exceeds the double binomial cap of {cap}")
    pa = na / n
    big_na = np.arange(n + 1)
    big_nxa = np.arange(nxa, nx + 1)[:, None]
    ok = ((big_na >= big_nxa) & (big_na - big_nxa <= n - nx)
          & (big_nxa * nx * na >= nxa * nx * big_na))
    terms = (LOGCOMB.lncomb(nx, big_nxa) + LOGCOMB.lncomb(n - nx, big_na - big_nxa)
             + xlogy(big_na, pa) + xlog1py(n - big_na, -pa))
    log_p = float(logsumexp(np.where(ok, terms, -np.inf)))
    return TestResult("double_binom_value", _clip(log_p))


def _chi2_1dof_log_p(stat: float, delta: float, direction: Optional[str]) -> float:
    log_sf = float(stats.chi2.logsf(stat, 1))
    if direction is None:
        return _clip(log_sf)
    _check_direction(direction)
    tested = delta > 0 if direction == POSITIVE else delta < 0
    if tested:
        return _clip(math.log(0.5) + log_sf)
    return _clip(math.log1p(-0.5 * math.exp(log_sf)))


def chi2_p(t: ContingencyTable2x2, direction: Optional[str] = None, continuity: bool = False) -> TestResult:
    """Chi-squared test with one degree of freedom.

    With ``direction=None`` the two-sided tail is reported.  With a
    direction the one-sided value is half the tail when the observed
    leverage has the tested sign and one minus half the tail otherwise.
    """
    stat = chi2_2x2(t, continuity)
    return TestResult("chi2_test", _chi2_1dof_log_p(stat, leverage(t), direction), stat)


def mi_p(t: ContingencyTable2x2, direction: Optional[str] = None) -> TestResult:
    """Likelihood-ratio test: 2n*MI against chi-squared with 1 dof."""
    if not (0 < t.n_x < t.n and 0 < t.n_a < t.n):
        raise DomainError("all four margins must be positive")
    stat = 2 * t.n * mutual_information_2x2(t)
    return TestResult("mi_test", _chi2_1dof_log_p(stat, leverage(t), direction), stat)


# Positive-direction tests usable for ranking rules.  Each takes a table
# and returns a TestResult whose log_p is defined.
RULE_TESTS = {
    "fisher_pos": lambda t, **kw: fisher_p(t, POSITIVE),
    "binom_partial": lambda t, **kw: binom_partial_p(t, POSITIVE),
    "binom_complete": lambda t, **kw: binom_complete_p(t, POSITIVE),
    "z_partial": lambda t, **kw: z_partial(t, POSITIVE),
    "z_complete": lambda t, **kw: z_complete(t, POSITIVE),
    "multinomial_value": lambda t, multinomial_cap=DEFAULT_MULTINOMIAL_CAP, **kw:
        multinomial_value_p(t, multinomial_cap),
    "double_binom_value": lambda t, double_binom_cap=DEFAULT_DOUBLE_BINOM_CAP, **kw:
        double_binom_value_p(t, double_binom_cap),
    "chi2_test": lambda t, **kw: chi2_p(t, POSITIVE),
    "mi_test": lambda t, **kw: mi_p(t, POSITIVE),
}

TEST_ALIASES = {"fisher": "fisher_pos", "chi2": "chi2_test", "mi": "mi_test",
                "multinomial": "multinomial_value", "double_binom": "double_binom_value"}


def resolve_test_id(test_id: str) -> str:
    tid = TEST_ALIASES.get(test_id, test_id)
    if tid not in RULE_TESTS:
        raise DomainError(f"unknown test {test_id!r}")
    return tid


def rule_log_p(t: ContingencyTable2x2, test_id: str, **caps) -> float:
    """log p of positive dependence for X -> A under the named test.

    Tables on which a test is undefined (degenerate margins) get log p = 0.
    """
    fn = RULE_TESTS[resolve_test_id(test_id)]
    try:
        return fn(t, **caps).log_p
    except DomainError:
        return 0.0
