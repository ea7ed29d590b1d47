"""Builders for the small hand-constructed datasets used by the tests.

Run as a script to (re)write the CSV files next to this module.
"""
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent

HEART_COLUMNS = ["smoking", "sports", "coffee", "stress", "pine_bark", "female", "heart_disease"]


def _largest_remainder(sizes, total):
    """Split ``total`` over cells proportionally to ``sizes`` (integers)."""
    sizes = np.asarray(sizes, dtype=float)
    raw = sizes * total / sizes.sum()
    base = np.floor(raw).astype(int)
    left = total - base.sum()
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:left]] += 1
    return base


def heart_rows():
    """1000 rows over HEART_COLUMNS matching the imaginary heart-disease table.

    Built in layers: (disease, smoking, stress), then female, then sports
    counts per (disease, smoking, stress, female) cell, then coffee spread
    proportionally inside each (smoking, disease) stratum, then a single
    pine-bark row without disease.
    """
    # (D, S, T) -> count
    dst = {(1, 1, 1): 100, (1, 1, 0): 20, (1, 0, 1): 50, (1, 0, 0): 130,
           (0, 1, 1): 100, (0, 1, 0): 80, (0, 0, 1): 250, (0, 0, 0): 270}
    # females per (D, S, T)
    fem = {(1, 1, 1): 67, (1, 1, 0): 6, (1, 0, 1): 33, (1, 0, 0): 42,
           (0, 1, 1): 46, (0, 1, 0): 44, (0, 0, 1): 114, (0, 0, 0): 148}
    # sports per (D, S, T, F)
    sports = {(1, 1, 1, 1): 10, (1, 1, 1, 0): 5, (1, 1, 0, 1): 1, (1, 1, 0, 0): 4,
              (1, 0, 1, 1): 15, (1, 0, 1, 0): 8, (1, 0, 0, 1): 22, (1, 0, 0, 0): 35,
              (0, 1, 1, 1): 10, (0, 1, 1, 0): 12, (0, 1, 0, 1): 8, (0, 1, 0, 0): 10,
              (0, 0, 1, 1): 80, (0, 0, 1, 0): 95, (0, 0, 0, 1): 105, (0, 0, 0, 0): 80}
    # coffee drinkers per (S, D) stratum
    coffee = {(1, 1): 96, (1, 0): 144, (0, 1): 7, (0, 0): 96}

    cells = []  # (D, S, T, F, P, size)
    for (dd, s, t), size in dst.items():
        for f, fsize in ((1, fem[(dd, s, t)]), (0, size - fem[(dd, s, t)])):
            p_in = sports[(dd, s, t, f)]
            cells.append((dd, s, t, f, 1, p_in))
            cells.append((dd, s, t, f, 0, fsize - p_in))

    rows = []
    for s in (1, 0):
        for dd in (1, 0):
            group = [c for c in cells if c[1] == s and c[0] == dd]
            alloc = _largest_remainder([c[5] for c in group], coffee[(s, dd)])
            for (dd_, s_, t, f, p, size), k in zip(group, alloc):
                for r in range(size):
                    rows.append({"smoking": s_, "sports": p, "coffee": int(r < k), "stress": t,
                                 "pine_bark": 0, "female": f, "heart_disease": dd_})
    # pine bark: one row without disease, chosen deterministically
    for row in rows:
        if row["heart_disease"] == 0 and row["smoking"] == 0 and row["stress"] == 0:
            row["pine_bark"] = 1
            break
    return [[row[c] for c in HEART_COLUMNS] for row in rows]


def comparison_rows():
    """n=100 with fr(A)=50, fr(YQ)=fr(YQA)=30, fr(Y)=60, fr(YA)=50.

    Q also occurs in 20 rows outside Y so that the rule Q -> A differs
    from YQ -> A.
    """
    rows = []
    rows += [[1, 1, 1]] * 30       # Y Q A
    rows += [[1, 0, 1]] * 20       # Y not-Q A
    rows += [[1, 0, 0]] * 10       # Y not-Q not-A
    rows += [[0, 1, 0]] * 20       # not-Y Q not-A
    rows += [[0, 0, 0]] * 20       # not-Y not-Q not-A
    return ["Y", "Q", "A"], rows


def apple_rows():
    """100 apples: 60 red (55 sweet), 40 green and bitter; red and big
    apples (40) are all sweet."""
    rows = []
    rows += [[1, 1, 1]] * 40       # red big sweet
    rows += [[1, 0, 1]] * 15       # red small sweet
    rows += [[1, 0, 0]] * 5        # red small bitter
    rows += [[0, 1, 0]] * 20       # green big bitter
    rows += [[0, 0, 0]] * 20       # green small bitter
    return ["red", "big", "sweet"], rows


def write_csv(path, names, rows):
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")


if __name__ == "__main__":
    write_csv(HERE / "heart_disease.csv", HEART_COLUMNS, heart_rows())
    write_csv(HERE / "comparison.csv", *comparison_rows())
    write_csv(HERE / "apple.csv", *apple_rows())
