"""Rich durative actions for PDDL: parsing, compilation to PDDL2.1, and plan validation."""

from .compiler import CompilationMap, CompileError, compile_action, compile_domain
from .model import Domain, DurativeAction, PlanStep, Problem, State
from .parser import ParseError, parse_domain, parse_plan, parse_problem
from .printer import print_domain, print_problem
from .roundtrip import compare_verdicts, lift_plan, lower_plan
from .validator import Verdict, Violation, validate

__all__ = [
    "CompilationMap",
    "CompileError",
    "Domain",
    "DurativeAction",
    "ParseError",
    "PlanStep",
    "Problem",
    "State",
    "Verdict",
    "Violation",
    "compare_verdicts",
    "compile_action",
    "compile_domain",
    "lift_plan",
    "lower_plan",
    "parse_domain",
    "parse_plan",
    "parse_problem",
    "print_domain",
    "print_problem",
    "validate",
]
