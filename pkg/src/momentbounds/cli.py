"""Command-line front end: ``momentbounds {constants,verify,tail,demo}``."""

from __future__ import annotations

import argparse
import math
import sys
from contextlib import nullcontext
from pathlib import Path

from .bounds import tail_from_moments
from .checks import UPPER_PLUS, Context, execute, execute_all
from .constants import all_constants
from .report import format_float, emit
from .scenario import Check, Mode, Scenario, ScenarioError, THEOREM_RULES, parse_scenarios

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_FAIL, EXIT_PARSE = 0, 1, 2
TAIL_Q_GRID = tuple(2.0 + 0.5 * k for k in range(61))


def _load(path: str) -> list[Scenario]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc.strerror}", "") from None
    return parse_scenarios(text)


def _mode_from_args(args) -> Mode | None:
    if args.mode is None:
        return None
    if args.mode == "exact":
        return Mode()
    return Mode("mc", args.seed, args.samples)


def _open_out(path: str | None):
    return nullcontext(sys.stdout) if path in (None, "-") else open(path, "w", newline="")


def cmd_constants(args) -> int:
    print("name,value,residual,lo,hi,method")
    for c in all_constants():
        print(",".join([c.name, format_float(c.value), format_float(c.residual),
                        format_float(c.enclosure_low), format_float(c.enclosure_high), c.method]))
    return EXIT_OK


def cmd_verify(args) -> int:
    scenarios = _load(args.file)
    report = execute_all(scenarios, _mode_from_args(args), jobs=args.jobs)
    with _open_out(args.out) as fh:
        emit(report, args.format, fh)
    counts = report.counts()
    print(" ".join(f"{k}={v}" for k, v in counts.items()), file=sys.stderr)
    return EXIT_FAIL if report.failed else EXIT_OK


def _grid_check(chk: Check) -> Check | None:
    rule = THEOREM_RULES[chk.theorem]
    if not rule.uses_q:
        return None
    qs = tuple(q for q in TAIL_Q_GRID if q >= rule.min_q and (not rule.integer or q == int(q)))
    return Check(chk.theorem, qs, chk.ts, chk.theta, chk.mode, chk.params, chk.line)


def cmd_tail(args) -> int:
    scenarios = _load(args.file)
    mode = _mode_from_args(args)
    with _open_out(args.out) as fh:
        fh.write("scenario,theorem,variant,t,bound,observed\n")
        for sc in scenarios:
            checks = tuple(c for c in (_grid_check(c) for c in sc.checks) if c is not None)
            grid_sc = Scenario(sc.name, sc.space, sc.functional, sc.reduction, checks, sc.line)
            report = execute(grid_sc, mode, jobs=args.jobs)
            tables: dict[tuple[str, str], dict[float, float]] = {}
            for row in report.rows:
                variant = row.check_id.split("/")[2].split(".", 1)[1]
                if (row.theorem, variant) not in UPPER_PLUS or not math.isfinite(row.rhs):
                    continue
                tables.setdefault((row.theorem, variant), {})[row.q] = row.rhs
            ctx = Context(grid_sc)
            for (thm, variant), moments in tables.items():
                for t in args.t:
                    observed = _observed_tail(ctx, mode or Mode(), t)
                    fh.write(",".join([sc.name, thm, variant, format_float(t),
                                       format_float(tail_from_moments(t, moments)), format_float(observed)]) + "\n")
    return EXIT_OK


def _observed_tail(ctx: Context, mode: Mode, t: float) -> float | None:
    try:
        table = ctx.table(mode)
    except Exception:  # enumeration refused: no reference column
        return None
    return table.expect((table.z >= table.ez.value + t).astype(float)).value


def cmd_demo(args) -> int:
    if args.which != "triangle":
        raise ScenarioError(f"unknown demo {args.which!r}", "demo")
    if args.n < 3 or not 0.0 < args.p < 1.0:
        raise ScenarioError("need --n >= 3 and 0 < --p < 1", "demo")
    exact = args.n * (args.n - 1) // 2 <= 20 and args.mode != "mc"
    mode = Mode() if exact else Mode("mc", args.seed, args.samples)
    checks = (
        Check("tri_ez"),
        Check("tri_em1"),
        Check("thm15", (2.0, 3.0, 4.0)),
        Check("tri_cor3", (2.0, 3.0, 4.0)),
        Check("tri_m1_moment", (1.0, 2.0, 3.0)),
        Check("tri_good", (2.0, 3.0, 4.0)),
    )
    sc = Scenario(f"triangles_n{args.n}_p{args.p:g}", {"kind": "bernoulli", "p": args.p},
                  {"kind": "triangles", "n_vertices": args.n}, None, checks)
    report = execute(sc, mode, jobs=args.jobs)
    with _open_out(args.out) as fh:
        emit(report, args.format, fh)
    return EXIT_FAIL if report.failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="momentbounds", description="Verify moment and tail bounds on scenarios.")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("constants", help="print the numerical constants").set_defaults(func=cmd_constants)

    def common(sp, with_file=True):
        if with_file:
            sp.add_argument("file", help="scenario YAML file")
        sp.add_argument("--mode", choices=("exact", "mc"), default=None,
                        help="override every check's mode")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--samples", type=int, default=10_000)
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        sp.add_argument("--jobs", type=int, default=1, help="checks run in parallel threads")

    v = sub.add_parser("verify", help="run the checks of a scenario file")
    common(v)
    v.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("tail", help="tail bounds from the moment bounds of a scenario file")
    common(t)
    t.add_argument("--t", type=float, nargs="+", required=True)
    t.set_defaults(func=cmd_tail)

    d = sub.add_parser("demo", help="built-in demonstrations")
    d.add_argument("which", choices=("triangle",))
    d.add_argument("--n", type=int, default=25)
    d.add_argument("--p", type=float, default=0.2)
    common(d, with_file=False)
    d.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    d.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    if getattr(args, "samples", 100) < 100:
        print("error: --samples must be >= 100", file=sys.stderr)
        return EXIT_PARSE
    if getattr(args, "t", None) is not None and any(x <= 0 for x in args.t):
        print("error: --t values must be positive", file=sys.stderr)
        return EXIT_PARSE
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
