"""Command-line front end.

Every command builds one report (patterns plus detail sections) which is
then rendered as TSV or JSON, so both formats carry the same values.
Exit codes: 0 ok, 1 usage or configuration, 2 bad data, 3 capacity.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from typing import List, Optional

from . import __version__
from .data import NEGATED, POSITIVE, Dataset, RulePattern, extract_table, load_dataset, set_pattern
from .errors import CapacityError, ConfigError, DepMineError
from .exact import TEST_ALIASES, TEST_IDS, rule_log_p
from .itemsets import itemset_binom_p, itemset_chi2, self_sufficiency
from .measures import leverage
from .miner import CORRECTIONS, MinerConfig, default_workers, explain_rule, mine_rules
from .multitest import METHODS, adjust, holdout_evaluate
from .randomization import KINDS, STEP_DOWN, SINGLE_STEP, PermutationScheme, empirical_p, \
    minp_adjust, randomize

COLUMNS = ("pattern", "fr", "phi", "delta", "gamma", "raw_p", "adjusted_p", "verdicts")
P_KEYS = {"raw_p", "adjusted_p", "p", "p_forward", "p_backward", "p_explore", "p_holdout",
          "p_em", "worst_p"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- formatting

def _fmt(key: str, v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if key in P_KEYS:
            return f"{v:.5e}"
        if math.isinf(v) or math.isnan(v):
            return str(v)
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return ",".join(str(x) for x in v)
    return str(v)


def render_tsv(report: dict) -> str:
    prov = report["provenance"]
    lines = [f"# depmine {report['command']}",
             f"# seed\t{prov['seed']}",
             f"# input_sha256\t{prov['input_sha256'] or '-'}",
             f"# argv\t{json.dumps(prov['argv'])}",
             f"# config\t{json.dumps(prov['config'], sort_keys=True)}",
             "\t".join(COLUMNS)]
    for p in report["patterns"]:
        lines.append("\t".join(_fmt(c, p.get(c)) for c in COLUMNS))
    for name, rows in report["sections"].items():
        lines.append("")
        lines.append(f"## {name}")
        if not rows:
            continue
        keys = list(rows[0])
        lines.append("\t".join(keys))
        for r in rows:
            lines.append("\t".join(_fmt(k, r.get(k)) for k in keys))
    return "\n".join(lines) + "\n"


def _json_safe(v):
    if isinstance(v, float) and (math.isinf(v) or math.isnan(v)):
        return str(v)
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def render_json(report: dict) -> str:
    return json.dumps(_json_safe(report), indent=2) + "\n"


# ---------------------------------------------------------------- inputs

def _sniff_format(path: str, raw: bytes) -> str:
    ext = os.path.splitext(path)[1].lower()
    if ext == ".csv":
        return "csv01"
    if ext in (".txt", ".dat", ".basket", ".trans"):
        return "transactions"
    for line in raw.decode("utf-8", errors="replace").splitlines():
        if line.strip():
            return "csv01" if "," in line else "transactions"
    return "csv01"


def _read_input(path: str, fmt: str):
    if path == "-":
        raw = sys.stdin.buffer.read()
    else:
        with open(path, "rb") as fh:
            raw = fh.read()
    if fmt == "auto":
        fmt = _sniff_format(path, raw)
    return load_dataset(raw, fmt), hashlib.sha256(raw).hexdigest()


def _split_names(text: str) -> List[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def parse_rule(text: str):
    """'A,B->!C' -> (['A', 'B'], 'C', sign)."""
    if "->" not in text:
        raise ConfigError(f"rule {text!r} must look like 'A,B->C' or 'A,B->!C'")
    lhs, rhs = text.split("->", 1)
    rhs = rhs.strip()
    sign = POSITIVE
    if rhs.startswith("!"):
        sign, rhs = NEGATED, rhs[1:].strip()
    ante = _split_names(lhs)
    if not ante or not rhs:
        raise ConfigError(f"rule {text!r} needs an antecedent and a consequent")
    return ante, rhs, sign


# ---------------------------------------------------------------- rows

def _rule_row(d: Dataset, rule: RulePattern, raw_p, adjusted_p, verdicts, log_p=None) -> dict:
    t = rule.table
    return {
        "pattern": rule.label(d.names),
        "fr": t.n_xa,
        "phi": t.n_xa / t.n_x if t.n_x else None,
        "delta": leverage(t),
        "gamma": t.n * t.n_xa / (t.n_x * t.n_a) if t.n_x and t.n_a else None,
        "raw_p": raw_p,
        "log_p": log_p,
        "adjusted_p": adjusted_p,
        "verdicts": verdicts,
    }


def _miner_config(args) -> MinerConfig:
    return MinerConfig(
        test_id=args.test,
        interpretation=args.interpretation,
        max_antecedent=args.max_antecedent,
        consequents=tuple(args.consequent) if args.consequent else None,
        allow_negated_consequent=not args.no_negated,
        alpha=args.alpha,
        correction=args.correction,
        top_k=args.top_k,
        min_freq=args.min_freq,
        seed=args.seed,
        hypothesis_count=args.hypothesis_count,
        kingfisher_shortcut=args.kingfisher,
        all_subsets=args.all_subsets,
        multinomial_cap=args.multinomial_cap,
        double_binom_cap=args.double_binom_cap,
    )


def cmd_mine(args, d: Dataset) -> dict:
    rep = mine_rules(d, _miner_config(args), workers=args.workers)
    patterns = [_rule_row(d, r, r.scores["p"], r.scores["adjusted_p"], "significant,non_superfluous",
                          r.scores["log_p"]) for r in rep.rules]
    search = [{"hypothesis_count": rep.hypothesis_count, "space_size": rep.space_size,
               "nodes_visited": rep.nodes_visited, "bound_cuts": rep.bound_cuts,
               "reported": len(rep.rules)}]
    return {"patterns": patterns, "sections": {"search": search}}


def _rule_from_flags(d: Dataset, args) -> RulePattern:
    if args.rule:
        ante, cons, sign = parse_rule(args.rule)
    else:
        if not args.antecedent or not args.consequent:
            raise ConfigError("give --rule or both --antecedent and --consequent")
        ante, cons = _split_names(args.antecedent), args.consequent.strip()
        sign = POSITIVE
        if cons.startswith("!"):
            sign, cons = NEGATED, cons[1:]
        if args.negated:
            sign = NEGATED
    xs = d.indices(ante)
    return RulePattern(xs, d.index(cons), sign, extract_table(d, xs, cons, sign))


def cmd_eval_rule(args, d: Dataset) -> dict:
    rule = _rule_from_flags(d, args)
    panel = explain_rule(d, rule, args.multinomial_cap, args.double_binom_cap, args.alpha,
                         skip_capped=not args.strict_caps)
    lp = panel["tests"]["fisher_pos"].get("log_p")
    raw = math.exp(lp) if lp is not None else None
    verdicts = ";".join(f"{','.join(d.names[i] for i in imp['parent'])}:"
                        f"value_based={imp['value_based']}/variable_based={imp['variable_based']}"
                        for imp in panel["improvements"]) or "-"
    row = _rule_row(d, rule, raw, None, verdicts, lp)
    tests = []
    for name, entry in panel["tests"].items():
        tests.append({"test": name, "p": entry.get("p"), "log_p": entry.get("log_p"),
                      "statistic": entry.get("statistic"),
                      "note": entry.get("undefined") or entry.get("skipped")})
    measures = [{"measure": k, "value": float(v)} for k, v in panel["measures"].items()]
    table = [dict(panel["table"])]
    improvements = [{"parent": ",".join(d.names[i] for i in imp["parent"]),
                     "p_forward": imp["p_forward"], "p_backward": imp["p_backward"],
                     "value_based": imp["value_based"], "variable_based": imp["variable_based"]}
                    for imp in panel["improvements"]]
    return {"patterns": [row],
            "sections": {"table": table, "tests": tests, "measures": measures,
                         "improvements": improvements}}


def cmd_eval_set(args, d: Dataset) -> dict:
    items = _split_names(args.items)
    cands = [_split_names(c) for c in args.candidate or []]
    v = self_sufficiency(d, items, cands, args.alpha)
    s = v.pattern
    label = "{" + ",".join(d.names[i] for i in s.items) + "}"
    verdicts = (f"productive={str(v.productive).lower()};nonredundant={str(v.nonredundant).lower()};"
                f"independently_productive={_fmt('', v.independently_productive)};"
                f"self_sufficient={str(v.self_sufficient).lower()}")
    row = {"pattern": label, "fr": s.freq, "phi": None, "delta": None, "gamma": None,
           "raw_p": v.worst_p, "log_p": math.log(v.worst_p) if v.worst_p > 0 else -math.inf,
           "adjusted_p": None, "verdicts": verdicts}
    tests = []
    for name, fn in (("itemset_chi2", itemset_chi2), ("itemset_binom", itemset_binom_p)):
        try:
            r = fn(s)
            tests.append({"test": name, "p": r.p_value, "log_p": r.log_p,
                          "statistic": r.statistic, "note": None})
        except DepMineError as exc:
            tests.append({"test": name, "p": None, "log_p": None, "statistic": None,
                          "note": str(exc)})
    cells = [{"cell": "".join(str(b) for b in key), "count": c}
             for key, c in sorted(s.cell_counts.items(), reverse=True)]
    witness = [{"y": ",".join(d.names[i] for i in v.witness[0]),
                "z": ",".join(d.names[i] for i in v.witness[1])}] if v.witness else []
    return {"patterns": [row],
            "sections": {"tests": tests, "cells": cells, "redundancy_witness": witness}}


def cmd_randomize(args, d: Dataset) -> dict:
    if not args.rule and not args.dump:
        raise ConfigError("randomize needs at least one --rule or --dump")
    scheme = PermutationScheme(args.kind, args.seed, args.b, args.swap_steps)
    rules = []
    for text in args.rule or []:
        ante, cons, sign = parse_rule(text)
        xs = d.indices(ante)
        rules.append(RulePattern(xs, d.index(cons), sign, extract_table(d, xs, cons, sign)))
    tid = args.test
    datasets = randomize(d, scheme, workers=args.workers)
    if args.dump:
        os.makedirs(args.dump, exist_ok=True)
        width = max(4, len(str(len(datasets) - 1)))
        for i, x in enumerate(datasets):
            with open(os.path.join(args.dump, f"rand_{i:0{width}d}.csv"), "w", encoding="utf-8") as fh:
                fh.write(x.dumps("csv01"))

    def log_ps(x: Dataset):
        return [rule_log_p(extract_table(x, r.antecedent, r.consequent, r.consequent_sign), tid,
                           multinomial_cap=args.multinomial_cap,
                           double_binom_cap=args.double_binom_cap) for r in rules]

    patterns, emp = [], []
    if rules:
        obs = log_ps(d)
        null = [log_ps(x) for x in datasets]
        raw = [math.exp(v) for v in obs]
        null_p = [[math.exp(v) for v in row] for row in null]
        res = minp_adjust(raw, null_p, args.minp, args.alpha)
        for j, r in enumerate(rules):
            e = empirical_p(-obs[j], [-row[j] for row in null])
            emp.append({"pattern": r.label(d.names), "exceed_count": e.exceed_count,
                        "b": e.b, "p_em": e.p_em})
            verdict = "rejected" if res.adjusted_ps[j] <= args.alpha else "not_rejected"
            patterns.append(_rule_row(d, r, raw[j], res.adjusted_ps[j], verdict, obs[j]))
    info = [{"kind": scheme.kind, "fixed_margins": scheme.fixed_margins, "b": scheme.b,
             "test": tid, "minp": args.minp,
             "underresolved": bool(rules) and 1 / (scheme.b + 1) > args.alpha}]
    return {"patterns": patterns, "sections": {"randomization": info, "empirical": emp}}


def cmd_adjust(args, _d) -> dict:
    ps: List[float] = []
    if args.p:
        ps.extend(float(x) for x in _split_names(args.p))
    if args.pvalues:
        fh = sys.stdin if args.pvalues == "-" else open(args.pvalues, encoding="utf-8")
        with fh:
            for line in fh:
                for tok in line.replace(",", " ").split():
                    ps.append(float(tok))
    if not ps:
        raise ConfigError("no p-values given")
    weights = [float(w) for w in _split_names(args.weights)] if args.weights else None
    res = adjust(ps, args.method, args.alpha, weights)
    patterns = [{"pattern": f"h{i + 1}", "fr": None, "phi": None, "delta": None, "gamma": None,
                 "raw_p": p, "log_p": math.log(p), "adjusted_p": a,
                 "verdicts": "rejected" if r else "not_rejected"}
                for i, (p, a, r) in enumerate(zip(ps, res.adjusted_ps, res.rejected))]
    summary = [{"method": res.method, "m": res.m, "alpha": res.alpha, "rejected": res.k}]
    return {"patterns": patterns, "sections": {"summary": summary}}


def cmd_holdout(args, d: Dataset) -> dict:
    cfg = _miner_config(args)
    res = holdout_evaluate(d, args.split_ratio, args.seed, cfg, args.k, args.holdout_correction,
                           args.alpha, args.stratify, workers=args.workers)
    patterns, explore = [], []
    for hr in res.rules:
        patterns.append(_rule_row(d, hr.rule, hr.p_holdout, hr.adjusted_p,
                                  "rejected" if hr.rejected else "not_rejected",
                                  math.log(hr.p_holdout) if hr.p_holdout > 0 else -math.inf))
        explore.append({"pattern": hr.rule.label(d.names), "p_explore": hr.p_explore})
    split = [{"n_explore": res.n_explore, "n_holdout": res.n_holdout,
              "survivors": len(res.survivors)}]
    return {"patterns": patterns, "sections": {"split": split, "explore": explore}}


# ---------------------------------------------------------------- parser

def _add_common(p, needs_data: bool = True):
    if needs_data:
        p.add_argument("input", help="dataset path, or - for standard input")
        p.add_argument("--format", choices=("auto", "csv01", "transactions"), default="auto")
    p.add_argument("--output", choices=("tsv", "json"), default="tsv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default from DEPMINE_WORKERS, else 1)")


def _add_caps(p):
    p.add_argument("--multinomial-cap", type=int, default=200)
    p.add_argument("--double-binom-cap", type=int, default=2000)


def _add_miner(p):
    p.add_argument("--test", default="fisher_pos", choices=sorted(set(TEST_IDS) | set(TEST_ALIASES)))
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--correction", choices=CORRECTIONS, default="bonferroni")
    p.add_argument("--interpretation", choices=("variable_based", "value_based"),
                   default="variable_based")
    p.add_argument("--max-antecedent", type=int, default=2)
    p.add_argument("--consequent", action="append", help="restrict consequents (repeatable)")
    p.add_argument("--no-negated", action="store_true", help="only positive consequents")
    p.add_argument("--top-k", type=int, default=100)
    p.add_argument("--min-freq", type=int, default=None)
    p.add_argument("--hypothesis-count", choices=("testable", "space"), default="testable")
    p.add_argument("--kingfisher", action="store_true", help="p_F comparison shortcut")
    p.add_argument("--all-subsets", action="store_true", help="test every generalisation")
    _add_caps(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="depmine", description="Statistically sound dependency rule mining.")
    parser.add_argument("--version", action="version", version=f"depmine {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mine", help="search for significant non-superfluous rules")
    _add_common(p)
    _add_miner(p)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("eval-rule", help="every measure and test for one rule")
    _add_common(p)
    p.add_argument("--rule", help="rule as 'A,B->C' or 'A,B->!C'")
    p.add_argument("--antecedent", help="comma separated attributes")
    p.add_argument("--consequent", help="attribute, prefix ! for the negation")
    p.add_argument("--negated", action="store_true")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--strict-caps", action="store_true",
                   help="fail instead of skipping value-based tests above their caps")
    _add_caps(p)
    p.set_defaults(func=cmd_eval_rule)

    p = sub.add_parser("eval-set", help="self-sufficiency of one itemset")
    _add_common(p)
    p.add_argument("--items", required=True, help="comma separated attributes")
    p.add_argument("--candidate", action="append", help="superset to check against (repeatable)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_eval_set)

    p = sub.add_parser("randomize", help="randomised null datasets, empirical and minP p-values")
    _add_common(p)
    p.add_argument("--rule", action="append", help="rule to evaluate (repeatable)")
    p.add_argument("--kind", choices=KINDS, default="swap_randomization")
    p.add_argument("--b", type=int, default=99)
    p.add_argument("--swap-steps", type=int, default=None)
    p.add_argument("--minp", choices=(SINGLE_STEP, STEP_DOWN), default=STEP_DOWN)
    p.add_argument("--test", default="fisher_pos", choices=sorted(set(TEST_IDS) | set(TEST_ALIASES)))
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--dump", help="directory for the randomised datasets (csv01)")
    _add_caps(p)
    p.set_defaults(func=cmd_randomize)

    p = sub.add_parser("adjust", help="adjust a list of p-values")
    _add_common(p, needs_data=False)
    p.add_argument("pvalues", nargs="?", help="file of p-values, or - for standard input")
    p.add_argument("--p", help="comma separated p-values")
    p.add_argument("--method", choices=METHODS, default="bh")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--weights", help="comma separated weights for weighted_bonferroni")
    p.set_defaults(func=cmd_adjust)

    p = sub.add_parser("holdout", help="mine on one part, test on the other")
    _add_common(p)
    _add_miner(p)
    p.add_argument("--split-ratio", type=float, default=0.5)
    p.add_argument("--k", type=int, default=10, help="rules carried to the hold-out part")
    p.add_argument("--holdout-correction", choices=METHODS[:-1], default="holm")
    p.add_argument("--stratify", help="attribute to stratify the split on")
    p.set_defaults(func=cmd_holdout)
    return parser


def run(argv: Optional[List[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.workers is None:
            args.workers = default_workers()
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        if getattr(args, "input", None) is not None:
            d, digest = _read_input(args.input, args.format)
        else:
            d, digest = None, None
        body = args.func(args, d)
    except UsageError as exc:
        print(f"depmine: usage error: {exc}", file=stderr)
        return 1
    except ConfigError as exc:
        print(f"depmine: configuration error: {exc}", file=stderr)
        return 1
    except CapacityError as exc:
        print(f"depmine: capacity error: {exc}", file=stderr)
        return 3
    except (DepMineError, OSError, ValueError) as exc:
        print(f"depmine: data error: {exc}", file=stderr)
        return 2
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "workers")}
    report = {"command": args.command,
              "provenance": {"input_sha256": digest, "argv": argv, "config": config,
                             "seed": args.seed},
              **body}
    stdout.write(render_json(report) if args.output == "json" else render_tsv(report))
    return 0


def main() -> None:
    sys.exit(run())
