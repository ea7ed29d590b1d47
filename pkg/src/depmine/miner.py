"""Branch-and-bound search for the best non-superfluous dependency rules.

For every consequent A (and optionally its negation) the antecedents are
enumerated in a set-enumeration tree over the other attributes, ordered by
ascending frequency.  A subtree rooted at X is cut when a lower bound on
the p-value of every rule X' -> A with X' containing X already exceeds the
largest raw p-value that could still be reported.

The correction always covers the whole declared family of hypotheses.
Hypotheses that were cut are known to have p above the admission level and
enter the correction as p = 1; as argued in ``_admission_log_level`` this
never changes an adjusted p-value that is at most alpha.
"""
from __future__ import annotations

import heapq
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import xlogy

from .data import NEGATED, POSITIVE, ContingencyTable2x2, Dataset, RulePattern, extract_table
from .errors import CapacityError, ConfigError, DomainError
from .exact import (LOGCOMB, DEFAULT_DOUBLE_BINOM_CAP, DEFAULT_MULTINOMIAL_CAP, binom_complete_p,
                    binom_partial_p, chi2_p, double_binom_value_p, fisher_p, fisher_p0, mi_p,
                    multinomial_value_p, resolve_test_id, rule_log_p, z_complete, z_partial)
from .measures import all_measures, leverage
from .multitest import adjusted_pvalues, harmonic, testability_from_pmin
from .redundancy import (INTERPRETATIONS, SUPERFLUOUS, VARIABLE_BASED, judge_superfluous)

CORRECTIONS = ("bonferroni", "sidak", "holm", "hochberg", "bh", "bhy", "layered", "none")
WORKERS_ENV = "DEPMINE_WORKERS"

_TINY = np.finfo(float).tiny
# cut and admission tests are loosened by this much in log p so that
# rounding can only make pruning weaker, never drop a reportable rule
_SLACK = 1e-9


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class MinerConfig:
    test_id: str = "fisher_pos"
    interpretation: str = VARIABLE_BASED
    max_antecedent: int = 2
    consequents: Optional[Tuple] = None  # None means every column
    allow_negated_consequent: bool = True
    alpha: float = 0.05
    correction: str = "bonferroni"
    top_k: int = 100
    min_freq: Optional[int] = None
    seed: int = 0
    hypothesis_count: str = "testable"  # or "space"
    kingfisher_shortcut: bool = False
    all_subsets: bool = False
    z_screen: Optional[float] = None
    multinomial_cap: int = DEFAULT_MULTINOMIAL_CAP
    double_binom_cap: int = DEFAULT_DOUBLE_BINOM_CAP


@dataclass
class MiningReport:
    rules: List[RulePattern]
    hypothesis_count: int
    space_size: int
    nodes_visited: int
    bound_cuts: int
    config: MinerConfig
    names: Tuple[str, ...] = field(default_factory=tuple)


def validate_config(d: Dataset, cfg: MinerConfig) -> str:
    """Check cfg against d and return the canonical test id."""
    try:
        tid = resolve_test_id(cfg.test_id)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.interpretation not in INTERPRETATIONS:
        raise ConfigError(f"unknown interpretation {cfg.interpretation!r}")
    if cfg.correction not in CORRECTIONS:
        raise ConfigError(f"unsupported correction {cfg.correction!r}")
    if cfg.max_antecedent < 1:
        raise ConfigError("max_antecedent must be at least 1")
    if cfg.top_k < 1:
        raise ConfigError("top_k must be at least 1")
    if not 0 < cfg.alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    if cfg.min_freq is not None and not 0 <= cfg.min_freq <= d.n_rows:
        raise ConfigError("min_freq must lie between 0 and the number of rows")
    if cfg.hypothesis_count not in ("testable", "space"):
        raise ConfigError(f"unknown hypothesis_count {cfg.hypothesis_count!r}")
    if tid == "multinomial_value" and d.n_rows > cfg.multinomial_cap:
        raise CapacityError(f"n={d.n_rows} exceeds the multinomial cap of {cfg.multinomial_cap}")
    if tid == "double_binom_value" and d.n_rows > cfg.double_binom_cap:
        raise CapacityError(f"n={d.n_rows} exceeds the double binomial cap of {cfg.double_binom_cap}")
    return tid


def _hypotheses(d: Dataset, cfg: MinerConfig) -> List[Tuple[int, str]]:
    cons = range(d.n_cols) if cfg.consequents is None else d.indices(cfg.consequents)
    signs = (POSITIVE, NEGATED) if cfg.allow_negated_consequent else (POSITIVE,)
    return [(a, s) for a in cons for s in signs]


def _level_sizes(k_other: int, max_ante: int) -> List[int]:
    return [math.comb(k_other, l) for l in range(1, max_ante + 1)]


def _log_pmin(n: int, nx, na: int):
    """log of the smallest attainable Fisher p for margins (nx, na), vectorised."""
    nx = np.asarray(nx, dtype=np.int64)
    low = nx <= na
    a = LOGCOMB.lncomb(n - nx, na - nx)
    b = LOGCOMB.lncomb(nx, na)
    return np.where(low, a, b) - LOGCOMB.lncomb(n, na)


def _antecedent_freqs(d: Dataset, max_ante: int):
    """(attribute tuple, frequency) for every nonempty itemset up to max_ante
    items with frequency > 0."""
    out = []
    stack = [((j,), d.column(j), j + 1) for j in range(d.n_cols - 1, -1, -1)]
    while stack:
        items, cover, nxt = stack.pop()
        f = cover.bit_count()
        if f == 0:
            continue
        out.append((items, f))
        if len(items) < max_ante:
            for j in range(d.n_cols - 1, nxt - 1, -1):
                stack.append((items + (j,), cover & d.column(j), j + 1))
    return out


@dataclass
class _Family:
    m: int                     # size used by the correction
    space: int                 # size of the declared space
    level: Optional[float]     # testable mode: p* must not exceed alpha / m; None otherwise


def _family(d: Dataset, cfg: MinerConfig, tid: str, hyps) -> _Family:
    k_other = d.n_cols - 1
    space = len(hyps) * sum(_level_sizes(k_other, cfg.max_antecedent)) if k_other > 0 else 0
    if cfg.hypothesis_count == "space" or tid != "fisher_pos" or space == 0:
        return _Family(space, space, None)
    n = d.n_rows
    itemsets = _antecedent_freqs(d, cfg.max_antecedent)
    pmins = []
    for a, sign in hyps:
        na = d.col_freqs[a] if sign == POSITIVE else n - d.col_freqs[a]
        fx = np.array([f for items, f in itemsets if a not in items], dtype=np.int64)
        if fx.size:
            pmins.append(np.exp(_log_pmin(n, fx, na)))
    pm = np.concatenate(pmins) if pmins else np.zeros(0)
    # hypotheses with fr(X) = 0 have p* = 1 and can never be testable
    pm = np.concatenate([pm, np.ones(space - pm.size)])
    res = testability_from_pmin(pm, cfg.alpha)
    m = res.m_effective
    return _Family(m, space, res.level if m else -1.0)


def _admission_log_level(cfg: MinerConfig, m: int, level_sizes: Sequence[int], n_hyps: int) -> float:
    """log of the largest raw p that any correction could still reject.

    Single-step methods reject p <= alpha/m (or the Sidak level).  Step
    methods never reject p > alpha (alpha / c(m) for BHY), and any term of
    an adjusted p built from a p above that level exceeds alpha, so
    replacing such p-values by 1 leaves every adjusted p <= alpha unchanged.
    """
    a = cfg.alpha
    if m == 0:
        return -math.inf
    c = cfg.correction
    if c == "bonferroni":
        return math.log(a / m)
    if c == "sidak":
        return math.log(-math.expm1(math.log1p(-a) / m))
    if c == "bhy":
        return math.log(a / harmonic(m))
    if c == "layered":
        sizes = [n_hyps * s for s in level_sizes if s > 0]
        return math.log(a / (len(level_sizes) * min(sizes)))
    return math.log(a)


def _log_bound(tid: str, n: int, na: int, nxa: int) -> float:
    """Lower bound on log p for X' -> A over all X' containing X (fr(XA) = nxa)."""
    if tid == "fisher_pos":
        return float(LOGCOMB.lncomb(n - nxa, na - nxa) - LOGCOMB.lncomb(n, na))
    if tid == "binom_partial":
        return float(xlogy(nxa, na / n))
    return math.log(0.5) if nxa == 0 else -math.inf


_CTX = {}


def _init_worker(ctx):
    _CTX.clear()
    _CTX.update(ctx)


@dataclass
class _Evaluated:
    key: tuple           # (len, antecedent, consequent, sign flag)
    log_p: float
    in_family: bool
    candidate: bool      # p within admission level and passes screening


def _search_task(task):
    a, sign, first = task
    ctx = _CTX
    d: Dataset = ctx["d"]
    cfg: MinerConfig = ctx["cfg"]
    tid, log_tau, fam_level = ctx["tid"], ctx["log_tau"], ctx["fam_level"]
    topk_prune = ctx["topk_prune"]
    n = d.n_rows
    order = ctx["orders"][a]
    target = d.column(a) if sign == POSITIVE else d.all_rows & ~d.column(a)
    na = target.bit_count()
    caps = {"multinomial_cap": cfg.multinomial_cap, "double_binom_cap": cfg.double_binom_cap}

    visited = cuts = 0
    evaluated: List[_Evaluated] = []
    kept: List[RulePattern] = []
    heap: List[float] = []   # negated log p of the best top_k non-superfluous candidates

    root = order[first]
    stack = [((root,), d.column(root), first + 1)]
    while stack:
        items, cover, nxt = stack.pop()
        visited += 1
        nx = cover.bit_count()
        nxa = (cover & target).bit_count()
        if cfg.min_freq is not None and nxa < cfg.min_freq:
            cuts += 1
            continue
        threshold = log_tau
        if topk_prune and len(heap) >= cfg.top_k:
            threshold = min(threshold, -heap[0])
        if _log_bound(tid, n, na, nxa) > threshold + _SLACK:
            cuts += 1
            continue

        t = ContingencyTable2x2(n, nx, na, nxa)
        log_p = rule_log_p(t, tid, **caps)
        x = tuple(sorted(items))
        in_family = fam_level is None or float(np.exp(_log_pmin(n, np.array([nx]), na))[0]) <= fam_level
        candidate = in_family and log_p <= log_tau + _SLACK
        if candidate and cfg.z_screen is not None:
            try:
                candidate = z_complete(t).statistic >= cfg.z_screen
            except DomainError:
                candidate = False
        key = (len(x), x, a, sign != POSITIVE)
        evaluated.append(_Evaluated(key, log_p, in_family, candidate))
        if candidate:
            rule = RulePattern(x, a, sign, t, {"log_p": log_p})
            superfluous = False
            if len(x) > 1:
                verdicts = judge_superfluous(d, rule, cfg.interpretation, cfg.alpha,
                                             cfg.all_subsets, cfg.kingfisher_shortcut)
                superfluous = any(v.verdict == SUPERFLUOUS for v in verdicts)
            rule.scores["superfluous"] = superfluous
            if not superfluous:
                kept.append(rule)
                if topk_prune:
                    if len(heap) < cfg.top_k:
                        heapq.heappush(heap, -log_p)
                    elif log_p < -heap[0]:
                        heapq.heapreplace(heap, -log_p)

        if len(items) < cfg.max_antecedent:
            for pos in range(len(order) - 1, nxt - 1, -1):
                j = order[pos]
                stack.append((items + (j,), cover & d.column(j), pos + 1))
    return visited, cuts, evaluated, kept


def mine_rules(d: Dataset, cfg: MinerConfig, workers: int = 1, prune: bool = True) -> MiningReport:
    tid = validate_config(d, cfg)
    hyps = _hypotheses(d, cfg)
    fam = _family(d, cfg, tid, hyps)
    level_sizes = _level_sizes(max(d.n_cols - 1, 0), cfg.max_antecedent)
    if prune:
        log_tau = _admission_log_level(cfg, fam.m, level_sizes, len(hyps))
    else:
        log_tau = 0.0
    topk_prune = prune and cfg.correction in ("bonferroni", "sidak", "holm", "none")

    orders = {}
    for a, _ in hyps:
        others = [j for j in range(d.n_cols) if j != a]
        orders[a] = sorted(others, key=lambda j: (d.col_freqs[j], j))
    ctx = {"d": d, "cfg": cfg, "tid": tid, "log_tau": log_tau, "fam_level": fam.level,
           "topk_prune": topk_prune, "orders": orders}
    tasks = [(a, s, i) for a, s in hyps for i in range(len(orders[a]))]

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(ctx,)) as ex:
            results = list(ex.map(_search_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        _init_worker(ctx)
        results = [_search_task(t) for t in tasks]

    visited = sum(r[0] for r in results)
    cuts = sum(r[1] for r in results)
    fam_logs = [e.log_p for r in results for e in r[2] if e.in_family]
    kept = [rule for r in results for rule in r[3]]

    # adjusted p-values over the full family; unevaluated members count as p = 1
    if fam.m and kept:
        kept_logs = [rule.scores["log_p"] for rule in kept]
        ps = np.exp(np.array(fam_logs + [0.0] * max(0, fam.m - len(fam_logs))))
        ps = np.maximum(ps, _TINY)
        if cfg.correction == "layered":
            adj_kept = [_layered_adjusted(rule, cfg, level_sizes, len(hyps)) for rule in kept]
        elif cfg.correction == "none":
            adj_kept = [math.exp(lp) for lp in kept_logs]
        else:
            adj_all = adjusted_pvalues(ps, cfg.correction)
            index = {}
            for pos, lp in enumerate(fam_logs):
                index.setdefault(lp, pos)
            adj_kept = [float(adj_all[index[lp]]) for lp in kept_logs]
    else:
        adj_kept = []

    reported = []
    for rule, adj in zip(kept, adj_kept):
        if adj <= cfg.alpha:
            rule.scores.update(_rule_scores(rule))
            rule.scores["adjusted_p"] = adj
            reported.append(rule)
    reported.sort(key=lambda r: (r.scores["adjusted_p"], r.scores["log_p"]) + r.sort_key)
    return MiningReport(reported[:cfg.top_k], fam.m, fam.space, visited, cuts, cfg, d.names)


def _layered_adjusted(rule: RulePattern, cfg: MinerConfig, level_sizes, n_hyps: int) -> float:
    s = n_hyps * level_sizes[len(rule.antecedent) - 1]
    return min(1.0, math.exp(rule.scores["log_p"]) * len(level_sizes) * s)


def _rule_scores(rule: RulePattern) -> Dict[str, float]:
    t = rule.table
    out = {"p": math.exp(rule.scores["log_p"]), "fr": t.n_xa, "delta": leverage(t)}
    if t.n_x:
        out["phi"] = t.n_xa / t.n_x
    if t.n_x and t.n_a:
        out["gamma"] = t.n * t.n_xa / (t.n_x * t.n_a)
    return out


def _panel_entry(fn, *args):
    try:
        r = fn(*args)
    except (DomainError,) as exc:
        return {"undefined": str(exc)}
    out = {"p": r.p_value, "log_p": r.log_p}
    if r.statistic is not None:
        out["statistic"] = r.statistic
    return out


def explain_rule(d: Dataset, rule, multinomial_cap: int = DEFAULT_MULTINOMIAL_CAP,
                 double_binom_cap: int = DEFAULT_DOUBLE_BINOM_CAP, alpha: float = 0.05,
                 skip_capped: bool = False) -> dict:
    """Every measure and test for one rule, plus tests against each
    immediate generalisation.  ``rule`` is a RulePattern or a tuple
    (antecedent, consequent[, sign]).

    Capacity errors from the capped value-based tests propagate unless
    ``skip_capped`` is set.
    """
    if not isinstance(rule, RulePattern):
        ante, cons, *rest = rule
        sign = rest[0] if rest else POSITIVE
        xs = d.indices(ante)
        rule = RulePattern(xs, d.index(cons), sign, extract_table(d, xs, cons, sign))
    t = rule.table
    tests = {
        "fisher_pos": _panel_entry(fisher_p, t, "positive"),
        "fisher_neg": _panel_entry(fisher_p, t, "negative"),
        "fisher_p0": _panel_entry(fisher_p0, t),
        "binom_partial": _panel_entry(binom_partial_p, t, "positive"),
        "z_partial": _panel_entry(z_partial, t, "positive"),
        "binom_complete": _panel_entry(binom_complete_p, t, "positive"),
        "z_complete": _panel_entry(z_complete, t, "positive"),
        "chi2_test": _panel_entry(chi2_p, t, None),
        "chi2_test_one_sided": _panel_entry(chi2_p, t, "positive"),
        "mi_test": _panel_entry(mi_p, t, None),
        "mi_test_one_sided": _panel_entry(mi_p, t, "positive"),
    }
    for key, fn, cap in (("multinomial_value", multinomial_value_p, multinomial_cap),
                         ("double_binom_value", double_binom_value_p, double_binom_cap)):
        try:
            tests[key] = _panel_entry(fn, t, cap)
        except CapacityError as exc:
            if not skip_capped:
                raise
            tests[key] = {"skipped": str(exc)}
    improvements = []
    if len(rule.antecedent) > 1:
        value = judge_superfluous(d, rule, "value_based", alpha)
        variable = judge_superfluous(d, rule, "variable_based", alpha)
        for v1, v2 in zip(value, variable):
            improvements.append({
                "parent": list(v1.parent.antecedent),
                "p_forward": v1.p_forward,
                "p_backward": v1.p_backward,
                "value_based": v1.verdict,
                "variable_based": v2.verdict,
            })
    return {
        "antecedent": list(rule.antecedent),
        "consequent": rule.consequent,
        "sign": rule.consequent_sign,
        "table": asdict(t),
        "measures": all_measures(t),
        "tests": tests,
        "improvements": improvements,
    }
