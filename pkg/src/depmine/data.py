"""Binary datasets, 2x2 contingency tables and pattern records.

Columns are stored as row bitsets (Python ints, bit ``i`` set when row ``i``
holds the attribute), so every frequency is an AND followed by a popcount.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import CapacityError, DomainError, ParseError, UnknownAttributeError

POSITIVE = "positive"
NEGATED = "negated"
SIGNS = (POSITIVE, NEGATED)

DEFAULT_MAX_CELL_ITEMS = 12

Attr = Union[int, str]


def mask_to_bool(mask: int, n: int) -> np.ndarray:
    """Expand a row bitset into a boolean vector of length n."""
    raw = mask.to_bytes((n + 7) // 8 or 1, "little")
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
    return bits[:n].astype(bool)


def bool_to_mask(vec) -> int:
    vec = np.asarray(vec, dtype=bool)
    if vec.size == 0:
        return 0
    return int.from_bytes(np.packbits(vec, bitorder="little").tobytes(), "little")


class Dataset:
    """Immutable binary dataset with named columns."""

    def __init__(self, names: Sequence[str], masks: Sequence[int], n_rows: int):
        if len(names) != len(masks):
            raise ValueError("names and masks differ in length")
        if len(set(names)) != len(names):
            raise DomainError("duplicate attribute names")
        if n_rows <= 0:
            raise DomainError("dataset has no rows")
        full = (1 << n_rows) - 1
        for m in masks:
            if m < 0 or m & ~full:
                raise ValueError("row bitset out of range")
        self._names = tuple(str(x) for x in names)
        self._masks = tuple(int(m) for m in masks)
        self._n = int(n_rows)
        self._full = full
        self._index = {name: i for i, name in enumerate(self._names)}
        self._freqs = tuple(m.bit_count() for m in self._masks)

    @classmethod
    def from_matrix(cls, matrix, names: Optional[Sequence[str]] = None) -> "Dataset":
        mat = np.asarray(matrix)
        if mat.ndim != 2:
            raise DomainError("matrix must be two-dimensional")
        if not np.isin(mat, (0, 1)).all():
            raise DomainError("matrix values must be 0/1")
        mat = mat.astype(bool)
        if names is None:
            names = [f"a{j}" for j in range(mat.shape[1])]
        return cls(names, [bool_to_mask(mat[:, j]) for j in range(mat.shape[1])], mat.shape[0])

    @classmethod
    def from_transactions(cls, rows: Iterable[Iterable[str]]) -> "Dataset":
        names: List[str] = []
        index: Dict[str, int] = {}
        masks: List[int] = []
        n = 0
        for r, row in enumerate(rows):
            n += 1
            for item in row:
                j = index.get(item)
                if j is None:
                    j = index[item] = len(names)
                    names.append(item)
                    masks.append(0)
                masks[j] |= 1 << r
        return cls(names, masks, n)

    @property
    def names(self) -> Tuple[str, ...]:
        return self._names

    @property
    def n_rows(self) -> int:
        return self._n

    @property
    def n_cols(self) -> int:
        return len(self._names)

    @property
    def col_freqs(self) -> Tuple[int, ...]:
        return self._freqs

    @property
    def all_rows(self) -> int:
        return self._full

    def index(self, attr: Attr) -> int:
        if isinstance(attr, str):
            try:
                return self._index[attr]
            except KeyError:
                raise UnknownAttributeError(f"unknown attribute {attr!r}") from None
        if isinstance(attr, (int, np.integer)) and not isinstance(attr, bool):
            if 0 <= attr < len(self._names):
                return int(attr)
        raise UnknownAttributeError(f"unknown attribute {attr!r}")

    def indices(self, attrs: Iterable[Attr]) -> Tuple[int, ...]:
        return tuple(sorted({self.index(a) for a in attrs}))

    def column(self, attr: Attr) -> int:
        return self._masks[self.index(attr)]

    def rowset(self, attr: Attr) -> frozenset:
        m = self.column(attr)
        return frozenset(i for i in range(self._n) if m >> i & 1)

    def cover(self, attrs: Iterable[Attr]) -> int:
        """Bitset of rows containing every attribute in attrs."""
        m = self._full
        for a in attrs:
            m &= self._masks[self.index(a)]
        return m

    def freq(self, attrs: Iterable[Attr]) -> int:
        return self.cover(attrs).bit_count()

    def to_matrix(self) -> np.ndarray:
        out = np.zeros((self._n, len(self._names)), dtype=bool)
        for j, m in enumerate(self._masks):
            out[:, j] = mask_to_bool(m, self._n)
        return out

    def select_rows(self, rows: int) -> "Dataset":
        """New dataset made of the rows set in the bitset ``rows`` (order kept)."""
        keep = mask_to_bool(rows & self._full, self._n)
        if not keep.any():
            raise DomainError("row selection is empty")
        return Dataset.from_matrix(self.to_matrix()[keep], self._names)

    def dumps(self, fmt: str = "csv01") -> str:
        mat = self.to_matrix()
        if fmt == "csv01":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(self._names)
            for row in mat:
                w.writerow([int(v) for v in row])
            return buf.getvalue()
        if fmt == "transactions":
            for name in self._names:
                if not name or any(c.isspace() for c in name):
                    raise DomainError(f"attribute {name!r} cannot be written as a token")
            lines = [" ".join(self._names[j] for j in np.flatnonzero(row)) for row in mat]
            return "\n".join(lines) + "\n"
        raise DomainError(f"unknown format {fmt!r}")

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self._names, self._masks, self._n) == (other._names, other._masks, other._n)

    def __hash__(self):
        return hash((self._names, self._masks, self._n))

    def __repr__(self):
        return f"Dataset(n_rows={self._n}, n_cols={len(self._names)})"


def _read_bytes(source) -> bytes:
    if isinstance(source, bytes):
        return source
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read()
    data = source.read()
    if isinstance(data, str):
        return data.encode("utf-8")
    return data


def _decoded_lines(raw: bytes) -> List[str]:
    lines = raw.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    out = []
    for no, line in enumerate(lines, 1):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid UTF-8 ({exc.reason})", no) from None
        out.append(text.rstrip("\r"))
    return out


def load_dataset(source, fmt: str = "csv01") -> Dataset:
    """Read a dataset from a path, bytes or a file object.

    ``fmt`` is ``"transactions"`` (whitespace separated items, one row per
    line) or ``"csv01"`` (header of names, then comma separated 0/1 rows).
    """
    lines = _decoded_lines(_read_bytes(source))
    if fmt == "transactions":
        if not lines:
            raise DomainError("empty dataset")
        return Dataset.from_transactions(line.split() for line in lines)
    if fmt != "csv01":
        raise ParseError(f"unknown format {fmt!r}")

    numbered = [(no, line) for no, line in enumerate(lines, 1) if line.strip()]
    if not numbered:
        raise DomainError("empty dataset")
    hdr_no, hdr = numbered[0]
    names = [x.strip() for x in next(csv.reader([hdr]))]
    if any(not x for x in names):
        raise ParseError("empty column name in header", hdr_no)
    if len(set(names)) != len(names):
        raise ParseError("duplicate column name in header", hdr_no)
    masks = [0] * len(names)
    r = 0
    for no, line in numbered[1:]:
        cells = next(csv.reader([line]))
        if len(cells) != len(names):
            raise ParseError(f"expected {len(names)} fields, found {len(cells)}", no)
        for j, cell in enumerate(cells):
            v = cell.strip()
            if v == "1":
                masks[j] |= 1 << r
            elif v != "0":
                raise DomainError(f"line {no}: value {cell!r} is not 0/1")
        r += 1
    if r == 0:
        raise DomainError("empty dataset")
    return Dataset(names, masks, r)


@dataclass(frozen=True)
class ContingencyTable2x2:
    n: int
    n_x: int
    n_a: int
    n_xa: int

    def __post_init__(self):
        n, nx, na, nxa = self.n, self.n_x, self.n_a, self.n_xa
        if n < 0 or not (0 <= nx <= n and 0 <= na <= n):
            raise DomainError(f"infeasible margins {self}")
        if not (max(0, nx + na - n) <= nxa <= min(nx, na)):
            raise DomainError(f"infeasible joint count {self}")

    @property
    def n_xna(self) -> int:
        return self.n_x - self.n_xa

    @property
    def n_nxa(self) -> int:
        return self.n_a - self.n_xa

    @property
    def n_nxna(self) -> int:
        return self.n - self.n_x - self.n_a + self.n_xa

    @property
    def j1(self) -> int:
        return min(self.n_xna, self.n_nxa)

    @property
    def j2(self) -> int:
        return min(self.n_xa, self.n_nxna)

    def swapped(self) -> "ContingencyTable2x2":
        """Same table with the roles of X and A exchanged."""
        return ContingencyTable2x2(self.n, self.n_a, self.n_x, self.n_xa)

    def negated(self) -> "ContingencyTable2x2":
        """Table of X -> not A."""
        return ContingencyTable2x2(self.n, self.n_x, self.n - self.n_a, self.n_x - self.n_xa)


@dataclass
class RulePattern:
    antecedent: Tuple[int, ...]
    consequent: int
    consequent_sign: str
    table: ContingencyTable2x2
    scores: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.antecedent = tuple(sorted(self.antecedent))
        if self.consequent in self.antecedent:
            raise DomainError("consequent is part of the antecedent")
        if self.consequent_sign not in SIGNS:
            raise DomainError(f"unknown sign {self.consequent_sign!r}")

    def label(self, names: Sequence[str]) -> str:
        lhs = ",".join(names[i] for i in self.antecedent)
        rhs = names[self.consequent]
        if self.consequent_sign == NEGATED:
            rhs = "!" + rhs
        return f"{lhs} -> {rhs}"

    @property
    def sort_key(self):
        return (len(self.antecedent), self.antecedent, self.consequent,
                self.consequent_sign != POSITIVE)


@dataclass
class SetPattern:
    items: Tuple[int, ...]
    n: int
    freq: int
    cell_counts: Dict[Tuple[int, ...], int]
    verdicts: Dict[str, object] = field(default_factory=dict)

    @property
    def margins(self) -> Tuple[int, ...]:
        """Frequency of each single item, derived from the cells."""
        m = len(self.items)
        out = [0] * m
        for key, c in self.cell_counts.items():
            for i in range(m):
                if key[i]:
                    out[i] += c
        return tuple(out)


def extract_table(d: Dataset, x: Iterable[Attr], a: Attr, sign: str = POSITIVE) -> ContingencyTable2x2:
    xs = d.indices(x)
    ai = d.index(a)
    if not xs:
        raise DomainError("antecedent must be nonempty")
    if ai in xs:
        raise DomainError("consequent is part of the antecedent")
    if sign not in SIGNS:
        raise DomainError(f"unknown sign {sign!r}")
    cov = d.cover(xs)
    col = d.column(ai)
    n_x = cov.bit_count()
    n_xa = (cov & col).bit_count()
    n_a = d.col_freqs[ai]
    if sign == NEGATED:
        n_a = d.n_rows - n_a
        n_xa = n_x - n_xa
    return ContingencyTable2x2(d.n_rows, n_x, n_a, n_xa)


def rule_pattern(d: Dataset, x: Iterable[Attr], a: Attr, sign: str = POSITIVE) -> RulePattern:
    xs = d.indices(x)
    return RulePattern(xs, d.index(a), sign, extract_table(d, xs, a, sign))


def cell_counts_from_matrix(mat: np.ndarray) -> Dict[Tuple[int, ...], int]:
    m = mat.shape[1]
    weights = 1 << np.arange(m, dtype=np.int64)
    codes = mat.astype(np.int64) @ weights if m else np.zeros(mat.shape[0], dtype=np.int64)
    counts = np.bincount(codes, minlength=1 << m)
    out = {}
    for code in range(1 << m):
        key = tuple((code >> i) & 1 for i in range(m))
        out[key] = int(counts[code])
    return out


def extract_cells(d: Dataset, x: Iterable[Attr], max_items: int = DEFAULT_MAX_CELL_ITEMS) -> Dict[Tuple[int, ...], int]:
    """Full 2^m table of truth-value combinations over the items of x.

    Keys are 0/1 tuples in the order of the sorted attribute indices.
    """
    xs = d.indices(x)
    if len(xs) > max_items:
        raise CapacityError(f"{len(xs)} items exceed the cell-table cap of {max_items}")
    mat = np.stack([mask_to_bool(d.column(i), d.n_rows) for i in xs], axis=1) if xs else \
        np.zeros((d.n_rows, 0), dtype=bool)
    return cell_counts_from_matrix(mat)


def set_pattern(d: Dataset, x: Iterable[Attr], max_items: int = DEFAULT_MAX_CELL_ITEMS) -> SetPattern:
    xs = d.indices(x)
    cells = extract_cells(d, xs, max_items)
    return SetPattern(xs, d.n_rows, d.freq(xs), cells)
