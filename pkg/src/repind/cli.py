"""Command line: ``repind qer-check|pipeline|case-study|suite``.

Exit status is 0 when every verdict passes, 1 when some verdict fails,
2 on input errors and 3 when an enumeration cap is exceeded.
"""

from __future__ import annotations

import argparse
import inspect
import sys
import time
from importlib import resources
from pathlib import Path

from .descent import DescentError, SuiteConfig, positivity_suite, suitability_suite
from .finrel import Carrier, FinRelError
from .pipeline import qer_check, run_pipeline
from .report import Report
from .specfile import load_spec
from .structure import CapExceeded, parse_desc
from .studies import STUDIES

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3


class InputError(Exception):
    pass


def shipped_spec(name: str) -> Path:
    """Path of a spec bundled with the package (``queues``, ``multisets``, ``monoid``)."""
    return Path(str(resources.files("repind") / "data" / "specs" / f"{name}.json"))


def _resolve_spec(arg: str) -> Path:
    p = Path(arg)
    if p.exists():
        return p
    if arg.startswith("builtin:"):
        q = shipped_spec(arg.split(":", 1)[1])
        if q.exists():
            return q
    raise InputError(f"spec file not found: {arg}")


def _coerce(default, text: str, name: str):
    if isinstance(default, bool):
        if text.lower() in ("1", "true", "yes"):
            return True
        if text.lower() in ("0", "false", "no"):
            return False
        raise InputError(f"parameter {name} expects true/false, got {text!r}")
    if isinstance(default, int) or default is None:
        try:
            return int(text)
        except ValueError:
            if default is None:
                return text
            raise InputError(f"parameter {name} expects an integer, got {text!r}") from None
    return text


def _study_params(fn, pairs: list[str]) -> dict:
    sig = inspect.signature(fn)
    out = {}
    for item in pairs:
        if "=" not in item:
            raise InputError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        if k not in sig.parameters:
            raise InputError(f"unknown parameter {k!r}; expected one of {', '.join(sig.parameters)}")
        out[k] = _coerce(sig.parameters[k].default, v, k)
    return out


def _suite_report(sr) -> Report:
    rep = Report("suite", sr.suite, {"desc": sr.desc})
    for c in sr.clauses:
        detail = {k: v for k, v in (("status", c.status), ("checked", c.checked),
                                    ("counterexample", c.counterexample), ("note", c.note)) if v is not None}
        rep.check(c.name, c.ok, detail)
    return rep


def _constants(items: list[str]) -> dict[str, Carrier]:
    out = {}
    for item in items:
        name, _, n = item.partition("=")
        if not name or not n.isdigit():
            raise InputError(f"--const expects NAME=SIZE, got {item!r}")
        out[name] = Carrier.range(name, int(n))
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="repind", description="Finite representation-independence checks.")
    p.add_argument("--seed", type=int, default=0, help="seed for sampled relations (default 0)")
    p.add_argument("--json", action="store_true", help="print the JSON report instead of text")
    p.add_argument("--timing", action="store_true", help="include wall-clock timing in reports")
    # the same flags are accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    common.add_argument("--timing", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("qer-check", parents=[common], help="check that a spec's relation is a structured QER")
    q.add_argument("spec", help="spec file, or builtin:<name>")
    q.add_argument("--report", metavar="PATH", help="also write the JSON report here")

    pl = sub.add_parser("pipeline", parents=[common], help="quotient both sides and transfer the axioms")
    pl.add_argument("spec", help="spec file, or builtin:<name>")
    pl.add_argument("--report", metavar="PATH", help="also write the JSON report here")
    pl.add_argument("--uniqueness", choices=("auto", "full", "factored", "skipped"), default="auto")

    cs = sub.add_parser("case-study", parents=[common], help="run a built-in study")
    cs.add_argument("name", choices=sorted(STUDIES))
    cs.add_argument("--param", action="append", default=[], metavar="K=V")
    cs.add_argument("--report", metavar="PATH", help="also write the JSON report here")

    su = sub.add_parser("suite", parents=[common], help="property suites for a description")
    su.add_argument("which", choices=("suitability", "positivity"))
    su.add_argument("--desc", required=True, help='description such as "maybe(X)"')
    su.add_argument("--const", action="append", default=[], metavar="NAME=SIZE",
                    help="constant carrier usable as const(NAME)")
    su.add_argument("--max-size", type=int, default=2, help="largest carrier checked exhaustively")
    su.add_argument("--sample-size", type=int, default=3, help="carrier size for sampled relations")
    su.add_argument("--samples", type=int, default=200, help="number of sampled relations")
    su.add_argument("--report", metavar="PATH", help="also write the JSON report here")
    return p


def _execute(args) -> Report:
    if args.command in ("qer-check", "pipeline"):
        path = _resolve_spec(args.spec)
        spec = load_spec(path)
        if args.command == "qer-check":
            return qer_check(spec, path.name)
        return run_pipeline(spec, path.name, args.uniqueness)
    if args.command == "case-study":
        fn = STUDIES[args.name]
        try:
            return fn(**_study_params(fn, args.param))
        except ValueError as exc:
            raise InputError(str(exc)) from None
    D = parse_desc(args.desc, _constants(args.const))
    cfg = SuiteConfig(args.max_size, args.sample_size, args.samples, args.seed)
    run = suitability_suite if args.which == "suitability" else positivity_suite
    return _suite_report(run(D, cfg))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        rep = _execute(args)
    except CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except DescentError as exc:
        if exc.kind != "precondition":
            raise
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, FinRelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.timing:
        rep.timing = {"seconds": round(time.perf_counter() - start, 3)}
    if getattr(args, "report", None):
        Path(args.report).write_text(rep.dumps(args.timing))
    sys.stdout.write(rep.dumps(args.timing) if args.json else rep.to_text() + "\n")
    return EXIT_PASS if rep.ok else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
