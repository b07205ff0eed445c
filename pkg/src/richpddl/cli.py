"""Command-line entry point: ``richpddl <subcommand> ...``.

Exit codes: 0 for success, a valid plan or agreement; 1 for an invalid plan
or a disagreement; 2 for usage, parse, compile or plan-interpretation errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from fractions import Fraction

from .compiler import CompilationMap, CompileError, compile_domain
from .model import EvaluationError, format_plan
from .parser import ParseError, parse_domain, parse_plan, parse_problem
from .printer import RICH, STRICT21, StrictOutputError, print_domain, print_problem
from .roundtrip import LiftError, LoweringError, compare_verdicts, lift_plan, lower_plan
from .validator import DEFAULT_EPSILON, PlanError, SemanticsError, simulate, validate

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ERROR = 2


class UserError(Exception):
    """Anything the user can fix; reported on one line without a traceback."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path

    def __str__(self):
        msg = self.args[0]
        return f"{self.path}: error: {msg}" if self.path else f"error: {msg}"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_ERROR)


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UserError(exc.strerror or str(exc), path) from None


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise UserError(exc.strerror or str(exc), path) from None


def _load(kind, path):
    text = _read(path)
    reader = {"domain": parse_domain, "problem": parse_problem, "plan": parse_plan}[kind]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = reader(text, filename=path)
    for w in caught:
        sys.stderr.write(f"{path}: warning: {w.message}\n")
    return result


def _load_map(path):
    text = _read(path)
    try:
        return CompilationMap.from_json(text)
    except json.JSONDecodeError as exc:
        raise UserError(f"{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}", path) from None
    except (KeyError, TypeError, ValueError, ParseError) as exc:
        raise UserError(f"malformed compilation map: {exc}", path) from None


def _rational(text):
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("epsilon must be positive")
    return value


# ---------------------------------------------------------------------------
# subcommands


def cmd_parse(args):
    domain = _load("domain", args.domain)
    problem = _load("problem", args.problem) if args.problem else None
    plan = _load("plan", args.plan) if args.plan else None
    if args.dump:
        out = print_domain(domain, RICH)
        if problem is not None:
            out += "\n" + print_problem(problem)
        if plan is not None:
            out += "\n" + format_plan(plan)
        sys.stdout.write(out)
    else:
        n = len(domain.actions)
        line = f"{args.domain}: ok, domain {domain.name}, {n} action{'s' if n != 1 else ''}"
        if problem is not None:
            line += f"; {args.problem}: ok, problem {problem.name}"
        if plan is not None:
            line += f"; {args.plan}: ok, {len(plan)} steps"
        print(line)
    return EXIT_OK


def cmd_compile(args):
    domain = _load("domain", args.domain)
    try:
        compiled, cmap = compile_domain(domain, tagged_clocks=not args.untagged_clocks)
        text = print_domain(compiled, STRICT21)
    except (CompileError, StrictOutputError) as exc:
        raise UserError(str(exc), args.domain) from None
    _write(args.output, text)
    if args.map:
        _write(args.map, cmap.to_json())
    return EXIT_OK


def _validate_inputs(args):
    return _load("domain", args.domain), _load("problem", args.problem), _load("plan", args.plan)


def cmd_validate(args):
    domain, problem, plan = _validate_inputs(args)
    try:
        verdict = validate(domain, problem, plan, args.semantics, args.epsilon)
    except (PlanError, SemanticsError) as exc:
        raise UserError(str(exc), args.plan) from None
    sys.stdout.write(verdict.to_json() if args.format == "json" else verdict.to_text())
    if args.plot:
        from .report import plot_timeline

        sim = simulate(domain, problem, plan, args.semantics)
        marks = {i: g.breakpoints for i, g in sim.ground_steps.items()}
        plot_timeline(plan, verdict, args.plot, marks)
    return EXIT_OK if verdict.valid else EXIT_INVALID


def cmd_lower(args):
    domain, problem, plan = _validate_inputs(args)
    cmap = _load_map(args.map)
    try:
        compiled, _, _ = lower_plan(plan, domain, problem, cmap)
    except (LoweringError, PlanError) as exc:
        raise UserError(str(exc), args.plan) from None
    _write(args.output, format_plan(compiled))
    return EXIT_OK


def cmd_lift(args):
    plan = _load("plan", args.plan)
    cmap = _load_map(args.map)
    try:
        lifted = lift_plan(plan, cmap)
    except LiftError as exc:
        raise UserError(str(exc), args.plan) from None
    _write(args.output, format_plan(lifted))
    return EXIT_OK


def cmd_check(args):
    domain, problem, plan = _validate_inputs(args)
    try:
        compiled, cmap = compile_domain(domain, tagged_clocks=not args.untagged_clocks)
    except CompileError as exc:
        raise UserError(str(exc), args.domain) from None
    try:
        report = compare_verdicts(domain, compiled, problem, plan, cmap, args.epsilon)
    except (LoweringError, PlanError, SemanticsError) as exc:
        raise UserError(str(exc), args.plan) from None
    sys.stdout.write(report.to_json() if args.format == "json" else report.to_text())
    return EXIT_OK if report.agreement else EXIT_INVALID


# ---------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="richpddl", description="Parse, compile and validate rich durative-action PDDL.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("parse", help="syntax-check a domain and optionally a problem and plan")
    s.add_argument("domain")
    s.add_argument("--problem")
    s.add_argument("--plan")
    s.add_argument("--dump", action="store_true", help="print the normalized files")
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("compile", help="compile rich actions into strict PDDL2.1")
    s.add_argument("domain")
    s.add_argument("-o", "--output", help="output domain file (default: stdout)")
    s.add_argument("--map", help="write the compilation map as JSON")
    s.add_argument("--untagged-clocks", action="store_true",
                   help="give clock predicates only the parameters each segment uses")
    s.set_defaults(func=cmd_compile)

    s = sub.add_parser("validate", help="validate a plan")
    s.add_argument("domain")
    s.add_argument("problem")
    s.add_argument("plan")
    s.add_argument("--semantics", choices=(RICH, STRICT21), default=RICH)
    s.add_argument("--epsilon", type=_rational, default=DEFAULT_EPSILON)
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.add_argument("--plot", metavar="FILE", help="also render a timeline figure to FILE")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("lower", help="translate a rich plan into a compiled plan")
    s.add_argument("domain")
    s.add_argument("problem")
    s.add_argument("plan")
    s.add_argument("--map", required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_lower)

    s = sub.add_parser("lift", help="translate a compiled plan back into a rich plan")
    s.add_argument("plan")
    s.add_argument("--map", required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_lift)

    s = sub.add_parser("check", help="compare rich and compiled verdicts for a plan")
    s.add_argument("domain")
    s.add_argument("problem")
    s.add_argument("plan")
    s.add_argument("--epsilon", type=_rational, default=DEFAULT_EPSILON)
    s.add_argument("--untagged-clocks", action="store_true")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.set_defaults(func=cmd_check)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        sys.stderr.write(f"{exc}\n")
    except UserError as exc:
        sys.stderr.write(f"{exc}\n")
    except EvaluationError as exc:
        sys.stderr.write(f"error: {exc}\n")
    return EXIT_ERROR


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
