"""Command-line front end.

    actevo search --config run.ini --out runs/evo [--resume] [--jobs N] [--seed S]
    actevo eval "swish" 0 1.5          # or --range -5 5 101
    actevo gradcheck all-operators
    actevo enumerate [--depth 2] [--count]
    actevo report runs/evo/results.jsonl --out runs/evo

Exit codes: 0 success, 1 verification failure, 2 config/usage error,
3 resume digest mismatch.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .expr import (BINARY_OPS, ParseError, StructureError, X, Binary, Unary, core_unit,
                   count_space, iter_s1, parse, unary_alphabet)
from .numerics import BadPoint, DEFAULT_POLICY, deriv, eval_tree, grad_check, sample_admissible
from .persist import ResumeMismatch, read_results, run_to_dir
from .rng import make_rng

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RESUME = 0, 1, 2, 3

GRADCHECK_TOL = 1e-5


def cmd_search(args) -> int:
    try:
        cfg = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["master_seed"] = args.seed
        if args.extended_alphabet:
            overrides["extended_alphabet"] = True
        if overrides:
            cfg = dataclasses.replace(cfg, **overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_to_dir(cfg, args.out, resume=args.resume, jobs=args.jobs)
    except ResumeMismatch as exc:
        print(f"cannot resume: {exc}", file=sys.stderr)
        return EXIT_RESUME
    except (ConfigError, ParseError, StructureError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    best = result.generations[-1].best_so_far
    print(f"{result.run_id}: {len(result.history)} candidates, {result.trainings} trainings, "
          f"{result.cache_hits} cache hits")
    print(f"best: {best.id}  val_acc={best.val_acc:.4f}  val_loss={best.val_loss:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        tree = parse(args.expr, args.extended_alphabet)
    except (ParseError, StructureError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.points:
        xs = np.array(args.points, dtype=float)
    else:
        lo, hi, n = args.range
        xs = np.linspace(float(lo), float(hi), int(n))
    f = eval_tree(tree, xs, DEFAULT_POLICY).values
    d = deriv(tree, xs, DEFAULT_POLICY).values
    print(f"# {tree}")
    print(f"{'x':>12} {'f(x)':>16} {'df/dx':>16}")
    for x, fx, dx in zip(xs, f, d):
        mark = "" if np.isfinite(fx) and np.isfinite(dx) else "  non-finite"
        print(f"{x:12.6g} {fx:16.8g} {dx:16.8g}{mark}")
    return EXIT_OK


def operator_probes(extended: bool = False) -> dict[str, tuple[Binary, float, float]]:
    """One probe tree and sampling range per operator."""
    probes = {}
    for op in unary_alphabet(extended):
        lo, hi = (-0.95, 0.95) if op == "atanh" else (-3.0, 3.0)
        probes[op] = (Binary("add", Unary(op, X), Unary("zero", X)), lo, hi)
    for op in BINARY_OPS:
        probes[op] = (core_unit(op, "sin", "exp"), -3.0, 3.0)
    return probes


def run_gradcheck(target: str, n_points: int = 100, h: float = 1e-5, seed: int = 0,
                  extended: bool = True) -> dict[str, float]:
    rng = make_rng(seed)
    if target == "all-operators":
        probes = operator_probes(extended)
    else:
        probes = {target: (parse(target, extended), -3.0, 3.0)}
    errors = {}
    for name, (tree, lo, hi) in probes.items():
        pts = sample_admissible(tree, n_points, lo, hi, rng)
        errors[name] = grad_check(tree, pts, h, DEFAULT_POLICY)
    return errors


def cmd_gradcheck(args) -> int:
    try:
        errors = run_gradcheck(args.target, args.points, args.h, args.seed,
                               extended=args.extended_alphabet or args.target == "all-operators")
    except (ParseError, StructureError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BadPoint as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    failed = 0
    for name, err in errors.items():
        ok = err <= args.tol
        failed += not ok
        print(f"{name:>10}  max_rel_err={err:.3e}  {'ok' if ok else 'FAIL'}")
    print(f"{len(errors) - failed}/{len(errors)} passed (tol {args.tol:g})")
    return EXIT_OK if failed == 0 else EXIT_FAIL


def cmd_enumerate(args) -> int:
    if args.count or args.depth != 1:
        print(count_space(args.depth, args.extended_alphabet))
        return EXIT_OK
    for t in iter_s1(args.extended_alphabet):
        print(t)
    return EXIT_OK


def best_per_generation(records: list[dict]) -> list[tuple[int, float, float]]:
    """(generation, best val_acc in generation, best val_acc so far)."""
    by_gen: dict[int, float] = {}
    for r in records:
        by_gen[r["generation"]] = max(by_gen.get(r["generation"], 0.0), r["val_acc"])
    rows, best = [], 0.0
    for g in sorted(by_gen):
        best = max(best, by_gen[g])
        rows.append((g, by_gen[g], best))
    return rows


def leaderboard(records: list[dict], k: int) -> list[dict]:
    seen: dict[str, dict] = {}
    for r in records:
        seen.setdefault(r["expr"], r)
    ranked = sorted(seen.values(), key=lambda r: (-r["val_acc"], r["val_loss"], r["expr"]))
    return ranked[:k]


def cmd_report(args) -> int:
    path = Path(args.results)
    if not path.exists():
        print(f"error: {path} does not exist", file=sys.stderr)
        return EXIT_CONFIG
    _, records = read_results(path)
    out = Path(args.out) if args.out else path.parent
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "curve_best_per_gen.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "best_val_acc_in_gen", "best_val_acc_so_far"])
        w.writerows(best_per_generation(records))
    with open(out / "leaderboard.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "expr", "val_acc", "val_loss", "status"])
        for i, r in enumerate(leaderboard(records, args.top), 1):
            w.writerow([i, r["expr"], r["val_acc"], r["val_loss"], r["status"]])
    print(f"wrote {out / 'curve_best_per_gen.csv'} and {out / 'leaderboard.csv'}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="actevo", description="Evolutionary search over activation functions.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("search", help="run a search from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--resume", action="store_true")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.add_argument("--extended-alphabet", action="store_true")
    s.set_defaults(func=cmd_search)

    e = sub.add_parser("eval", help="tabulate f(x) and f'(x) for one function")
    e.add_argument("expr")
    e.add_argument("points", nargs="*", type=float)
    e.add_argument("--range", nargs=3, metavar=("LO", "HI", "N"), default=(-5.0, 5.0, 101))
    e.add_argument("--extended-alphabet", action="store_true")
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("gradcheck", help="compare analytic and finite-difference derivatives")
    g.add_argument("target", help='an expression, a preset name, or "all-operators"')
    g.add_argument("--points", type=int, default=100)
    g.add_argument("--h", type=float, default=1e-5)
    g.add_argument("--tol", type=float, default=GRADCHECK_TOL)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--extended-alphabet", action="store_true")
    g.set_defaults(func=cmd_gradcheck)

    n = sub.add_parser("enumerate", help="list S_1 or count S_d")
    n.add_argument("--depth", type=int, default=1)
    n.add_argument("--count", action="store_true")
    n.add_argument("--extended-alphabet", action="store_true")
    n.set_defaults(func=cmd_enumerate)

    r = sub.add_parser("report", help="write plot-ready CSVs from a results file")
    r.add_argument("results")
    r.add_argument("--out")
    r.add_argument("--top", type=int, default=10)
    r.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
