"""Randomised null datasets, empirical p-values and minP adjustment.

Each randomised dataset ``i`` draws from its own generator seeded by
``SeedSequence(seed, spawn_key=(i,))``, so the output does not depend on
how the work is split across processes.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .data import Dataset
from .errors import DomainError

COLUMN_PERMUTATION = "column_permutation"
SWAP_RANDOMIZATION = "swap_randomization"
KINDS = (COLUMN_PERMUTATION, SWAP_RANDOMIZATION)

SINGLE_STEP = "single_step"
STEP_DOWN = "step_down"


class DegenerateRandomizationWarning(UserWarning):
    pass


class UnderresolvedWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PermutationScheme:
    kind: str = COLUMN_PERMUTATION
    seed: int = 0
    b: int = 99
    swap_steps: Optional[int] = None  # None: 10 x number of ones

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown randomization kind {self.kind!r}")
        if self.b < 1:
            raise DomainError("b must be at least 1")
        if self.swap_steps is not None and self.swap_steps < 1:
            raise DomainError("swap_steps must be at least 1")

    @property
    def fixed_margins(self) -> str:
        return "columns_only" if self.kind == COLUMN_PERMUTATION else "rows_and_columns"


@dataclass(frozen=True)
class EmpiricalP:
    t0: float
    exceed_count: int
    b: int

    @property
    def p_em(self) -> float:
        return (self.exceed_count + 1) / (self.b + 1)


def empirical_p(t0: float, randomized_stats: Sequence[float]) -> EmpiricalP:
    vals = np.asarray(randomized_stats, dtype=float)
    if vals.size == 0:
        raise DomainError("need at least one randomized statistic")
    return EmpiricalP(float(t0), int(np.count_nonzero(vals >= t0)), int(vals.size))


def dataset_rng(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(index,))
    return np.random.default_rng(ss)


def has_feasible_swap(mat: np.ndarray) -> bool:
    """True when two rows have column sets where neither contains the other."""
    rows = {tuple(np.flatnonzero(r)) for r in mat}
    sets = [frozenset(r) for r in rows if r]
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            if not (sets[i] <= sets[j] or sets[j] <= sets[i]):
                return True
    return False


def swap_chain(mat: np.ndarray, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Run ``steps`` proposals of the swap chain and return the new matrix.

    A proposal picks two distinct ones (r1, c1), (r2, c2); when (r1, c2)
    and (r2, c1) are both zero the four cells are flipped, otherwise the
    chain stays where it is.
    """
    r_idx, c_idx = np.nonzero(mat)
    ones = list(zip(r_idx.tolist(), c_idx.tolist()))
    k = len(ones)
    out = mat.copy()
    if k < 2:
        return out
    rows = [set(np.flatnonzero(r).tolist()) for r in mat]
    first = rng.integers(0, k, size=steps)
    second = rng.integers(0, k - 1, size=steps)
    for i, j in zip(first.tolist(), second.tolist()):
        if j >= i:
            j += 1
        r1, c1 = ones[i]
        r2, c2 = ones[j]
        if r1 == r2 or c1 == c2 or c2 in rows[r1] or c1 in rows[r2]:
            continue
        rows[r1].remove(c1)
        rows[r1].add(c2)
        rows[r2].remove(c2)
        rows[r2].add(c1)
        ones[i] = (r1, c2)
        ones[j] = (r2, c1)
    out[:] = False
    for r, cols in enumerate(rows):
        out[r, list(cols)] = True
    return out


def _one(args) -> np.ndarray:
    mat, scheme, index = args
    rng = dataset_rng(scheme.seed, index)
    if scheme.kind == COLUMN_PERMUTATION:
        out = np.empty_like(mat)
        for j in range(mat.shape[1]):
            out[:, j] = mat[rng.permutation(mat.shape[0]), j]
        return out
    steps = scheme.swap_steps or 10 * int(mat.sum())
    return swap_chain(mat, steps, rng)


def randomize(d: Dataset, scheme: PermutationScheme, workers: int = 1) -> List[Dataset]:
    mat = d.to_matrix()
    if scheme.kind == SWAP_RANDOMIZATION and not has_feasible_swap(mat):
        warnings.warn("no feasible swap exists; returning copies of the input",
                      DegenerateRandomizationWarning, stacklevel=2)
        return [d] * scheme.b
    jobs = [(mat, scheme, i) for i in range(scheme.b)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            mats = list(ex.map(_one, jobs, chunksize=max(1, scheme.b // (4 * workers))))
    else:
        mats = [_one(job) for job in jobs]
    return [Dataset.from_matrix(m, d.names) for m in mats]


def permutation_null(d: Dataset, scheme: PermutationScheme,
                     pvalue_fn: Callable[[Dataset], Sequence[float]], workers: int = 1) -> np.ndarray:
    """b x m matrix of p-values: row i holds pvalue_fn on randomised dataset i."""
    return np.array([list(pvalue_fn(x)) for x in randomize(d, scheme, workers)], dtype=float)


@dataclass
class MinPResult:
    adjusted_ps: List[float]
    mode: str
    b: int
    underresolved: bool


def minp_adjust(raw_ps: Sequence[float], null_ps, mode: str = STEP_DOWN,
                alpha: Optional[float] = None, clamp_to_raw: bool = True) -> MinPResult:
    """Permutation minP adjusted p-values.

    ``null_ps`` is a b x m array of p-values of the same m hypotheses on b
    randomised datasets.  Counts use <=, with the +1 terms of the empirical
    p-value.  With ``clamp_to_raw`` an adjusted value never falls below its
    raw p-value.
    """
    raw = np.asarray(raw_ps, dtype=float)
    null = np.asarray(null_ps, dtype=float)
    if null.ndim != 2 or null.shape[1] != raw.size:
        raise DomainError("null p-values must be a b x m array")
    b = null.shape[0]
    if b < 1:
        raise DomainError("need at least one randomized dataset")
    if mode == SINGLE_STEP:
        minima = null.min(axis=1)
        adj = (np.count_nonzero(minima[:, None] <= raw[None, :], axis=0) + 1) / (b + 1)
    elif mode == STEP_DOWN:
        order = np.argsort(raw, kind="stable")
        suffix_min = np.minimum.accumulate(null[:, order][:, ::-1], axis=1)[:, ::-1]
        counts = np.count_nonzero(suffix_min <= raw[order][None, :], axis=0)
        ordered = np.maximum.accumulate((counts + 1) / (b + 1))
        adj = np.empty_like(ordered)
        adj[order] = ordered
    else:
        raise DomainError(f"unknown minP mode {mode!r}")
    if clamp_to_raw:
        adj = np.maximum(adj, raw)
    under = alpha is not None and 1 / (b + 1) > alpha
    if under:
        warnings.warn(f"b={b} cannot resolve alpha={alpha}", UnderresolvedWarning, stacklevel=2)
    return MinPResult(adj.tolist(), mode, b, under)
