"""Core AST and value types for rich durative-action models.

All numeric values are :class:`fractions.Fraction`; nothing in the pipeline
touches binary floating point.  Every node is an immutable dataclass so ASTs
can be compared structurally and shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Optional, Tuple, Union

Rational = Fraction

START = "start"
END = "end"

ARITH_OPS = ("+", "-", "*", "/")
COMPARISON_OPS = ("<", "<=", "=", ">=", ">")
NUMERIC_EFFECT_OPS = ("assign", "increase", "decrease")


# ---------------------------------------------------------------------------
# errors


class EvaluationError(Exception):
    """Raised when an expression cannot be evaluated in a state."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class UnboundVariableError(EvaluationError):
    pass


class UnassignedFluentError(EvaluationError):
    pass


class DivisionByZeroError(EvaluationError):
    pass


class BreakpointOutsideAction(EvaluationError):
    def __init__(self, message, node=None, time=None):
        super().__init__(message, node)
        self.time = time


# ---------------------------------------------------------------------------
# numeric expressions


@dataclass(frozen=True)
class Const:
    value: Fraction

    def __str__(self):
        return format_number(self.value)


@dataclass(frozen=True)
class FluentRef:
    name: str
    args: Tuple[str, ...] = ()

    def __str__(self):
        return "(" + " ".join((self.name,) + self.args) + ")"


@dataclass(frozen=True)
class BinOp:
    op: str
    lhs: "NumExpr"
    rhs: "NumExpr"

    def __str__(self):
        return f"({self.op} {self.lhs} {self.rhs})"


NumExpr = Union[Const, FluentRef, BinOp]

ZERO = Const(Fraction(0))


def format_number(value: Fraction) -> str:
    """Render a rational as a decimal when it terminates, else as ``p/q``."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = max(twos, fives)
    scaled = abs(value.numerator) * 10**digits // value.denominator
    sign = "-" if value < 0 else ""
    whole, frac = divmod(scaled, 10**digits)
    return f"{sign}{whole}.{frac:0{digits}d}"


def fluents_in(expr: NumExpr):
    """Yield every fluent reference in ``expr`` (pre-order)."""
    if isinstance(expr, FluentRef):
        yield expr
    elif isinstance(expr, BinOp):
        yield from fluents_in(expr.lhs)
        yield from fluents_in(expr.rhs)


def variables_in_expr(expr: NumExpr):
    for ref in fluents_in(expr):
        for arg in ref.args:
            if arg.startswith("?"):
                yield arg


def _apply(op, a, b, node):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise DivisionByZeroError(f"division by zero in {node}", node)
        return a / b
    raise ValueError(f"unknown operator {op!r}")


def ground_args(args, bindings, node=None):
    out = []
    for arg in args:
        if arg.startswith("?"):
            if arg not in bindings:
                raise UnboundVariableError(f"unbound variable {arg} in {node}", node)
            out.append(bindings[arg])
        else:
            out.append(arg)
    return tuple(out)


def eval_numexpr(expr: NumExpr, bindings: Mapping[str, str], state: "State") -> Fraction:
    """Evaluate ``expr`` exactly under ``bindings`` in ``state``."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, FluentRef):
        key = (expr.name, ground_args(expr.args, bindings, expr))
        try:
            return state.fluents[key]
        except KeyError:
            raise UnassignedFluentError(
                f"fluent {format_atom(key)} has no value", expr
            ) from None
    if isinstance(expr, BinOp):
        lhs = eval_numexpr(expr.lhs, bindings, state)
        rhs = eval_numexpr(expr.rhs, bindings, state)
        return _apply(expr.op, lhs, rhs, expr)
    raise TypeError(f"not a numeric expression: {expr!r}")


def fold_constants(expr: NumExpr) -> NumExpr:
    """Collapse fluent-free subtrees to constants; division by zero is kept."""
    if isinstance(expr, BinOp):
        lhs = fold_constants(expr.lhs)
        rhs = fold_constants(expr.rhs)
        if isinstance(lhs, Const) and isinstance(rhs, Const):
            if not (expr.op == "/" and rhs.value == 0):
                return Const(_apply(expr.op, lhs.value, rhs.value, expr))
        return BinOp(expr.op, lhs, rhs)
    return expr


def constant_value(expr: NumExpr) -> Optional[Fraction]:
    folded = fold_constants(expr)
    if isinstance(folded, Const):
        return folded.value
    return None


# ---------------------------------------------------------------------------
# time points and intervals


@dataclass(frozen=True)
class TimePoint:
    """A point inside an action: ``offset`` after START or before END."""

    anchor: str
    offset: NumExpr = ZERO

    def __post_init__(self):
        if self.anchor not in (START, END):
            raise ValueError(f"bad anchor {self.anchor!r}")

    @property
    def is_endpoint(self) -> bool:
        return self.offset == ZERO

    def __str__(self):
        if self.offset == ZERO:
            return self.anchor
        op = "+" if self.anchor == START else "-"
        return f"({op} {self.anchor} {self.offset})"


AT_START = TimePoint(START)
AT_END = TimePoint(END)


@dataclass(frozen=True)
class TimeInterval:
    lo: TimePoint
    hi: TimePoint

    @property
    def is_full_span(self) -> bool:
        return self.lo == AT_START and self.hi == AT_END

    def __str__(self):
        return f"[{self.lo} {self.hi}]"


OVER_ALL = TimeInterval(AT_START, AT_END)


def resolve_timepoint(tp: TimePoint, step_start, step_duration, bindings, state) -> Fraction:
    """Absolute time of ``tp`` for a step starting at ``step_start``."""
    offset = eval_numexpr(tp.offset, bindings, state)
    if offset < 0 or offset > step_duration:
        if tp.anchor == START:
            when = step_start + offset
        else:
            when = step_start + step_duration - offset
        raise BreakpointOutsideAction(
            f"breakpoint outside action: {tp} resolves to {format_number(when)}, "
            f"outside [{format_number(step_start)}, {format_number(step_start + step_duration)}]",
            tp,
            when,
        )
    if tp.anchor == START:
        return step_start + offset
    return step_start + step_duration - offset


# ---------------------------------------------------------------------------
# conditions and effects


@dataclass(frozen=True)
class Literal:
    predicate: str
    args: Tuple[str, ...] = ()
    positive: bool = True

    @property
    def atom(self):
        return (self.predicate, self.args)

    def negate(self) -> "Literal":
        return replace(self, positive=not self.positive)

    def ground(self, bindings) -> "Literal":
        return Literal(self.predicate, ground_args(self.args, bindings, self), self.positive)

    def __str__(self):
        inner = "(" + " ".join((self.predicate,) + self.args) + ")"
        return inner if self.positive else f"(not {inner})"


@dataclass(frozen=True)
class Comparison:
    op: str
    lhs: NumExpr
    rhs: NumExpr

    def __str__(self):
        return f"({self.op} {self.lhs} {self.rhs})"


ConditionPart = Union[Literal, Comparison]


@dataclass(frozen=True)
class Condition:
    """Flat conjunction of literals and comparisons."""

    parts: Tuple[ConditionPart, ...] = ()

    def __str__(self):
        if len(self.parts) == 1:
            return str(self.parts[0])
        return "(and" + "".join(" " + str(p) for p in self.parts) + ")"


@dataclass(frozen=True)
class NumericEffect:
    op: str
    fluent: FluentRef
    expr: NumExpr

    def __str__(self):
        return f"({self.op} {self.fluent} {self.expr})"


EffectAtom = Union[Literal, NumericEffect]


@dataclass(frozen=True)
class TimedCondition:
    time: Union[TimePoint, TimeInterval]
    condition: Condition

    def __str__(self):
        return _timed_str(self.time, self.condition)


@dataclass(frozen=True)
class TimedEffect:
    time: Union[TimePoint, TimeInterval]
    effect: EffectAtom

    def __str__(self):
        return _timed_str(self.time, self.effect)


def _timed_str(when, body):
    if isinstance(when, TimeInterval):
        if when.is_full_span:
            return f"(over all {body})"
        return f"(over {when} {body})"
    return f"(at {when} {body})"


@dataclass(frozen=True)
class DurativeAction:
    name: str
    parameters: Tuple[Tuple[str, str], ...]
    duration: NumExpr
    conditions: Tuple[TimedCondition, ...] = ()
    effects: Tuple[TimedEffect, ...] = ()

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return tuple(p for p, _ in self.parameters)


@dataclass(frozen=True)
class Domain:
    name: str
    requirements: Tuple[str, ...] = ()
    types: Tuple[Tuple[str, str], ...] = ()
    constants: Tuple[Tuple[str, str], ...] = ()
    predicates: Tuple[Tuple[str, Tuple[Tuple[str, str], ...]], ...] = ()
    functions: Tuple[Tuple[str, Tuple[Tuple[str, str], ...]], ...] = ()
    actions: Tuple[DurativeAction, ...] = ()

    def action(self, name: str) -> Optional[DurativeAction]:
        for a in self.actions:
            if a.name == name:
                return a
        return None

    def supertypes(self, typ: str):
        """``typ`` and all its ancestors, ``object`` included."""
        parents = dict(self.types)
        seen = [typ]
        while typ in parents and parents[typ] not in seen:
            typ = parents[typ]
            seen.append(typ)
        if "object" not in seen:
            seen.append("object")
        return seen


@dataclass(frozen=True)
class Problem:
    name: str
    domain_name: str
    objects: Tuple[Tuple[str, str], ...] = ()
    init_literals: Tuple[Literal, ...] = ()
    init_fluents: Tuple[Tuple[Tuple[str, Tuple[str, ...]], Fraction], ...] = ()
    goal: Condition = Condition()


@dataclass(frozen=True, order=True)
class PlanStep:
    time: Fraction
    action: str
    args: Tuple[str, ...] = ()
    duration: Fraction = Fraction(1)

    def __str__(self):
        call = "(" + " ".join((self.action,) + self.args) + ")"
        return f"{format_number(self.time)}: {call} [{format_number(self.duration)}]"


Plan = Tuple[PlanStep, ...]


def sort_plan(steps) -> Plan:
    """Stable sort by start time."""
    return tuple(sorted(steps, key=lambda s: s.time))


def format_plan(plan) -> str:
    return "".join(str(s) + "\n" for s in plan)


def format_atom(atom) -> str:
    name, args = atom
    return "(" + " ".join((name,) + tuple(args)) + ")"


@dataclass(frozen=True)
class State:
    """Closed-world set of true ground atoms plus ground fluent values."""

    facts: frozenset = frozenset()
    fluents: Mapping = field(default_factory=dict)

    def holds(self, lit: Literal) -> bool:
        return (lit.atom in self.facts) == lit.positive

    @classmethod
    def initial(cls, problem: Problem) -> "State":
        return cls(
            frozenset(lit.atom for lit in problem.init_literals),
            dict(problem.init_fluents),
        )

    def __hash__(self):
        return hash((self.facts, tuple(sorted(self.fluents.items()))))


def evaluate_part(part: ConditionPart, bindings, state: State) -> bool:
    if isinstance(part, Literal):
        return state.holds(part.ground(bindings))
    lhs = eval_numexpr(part.lhs, bindings, state)
    rhs = eval_numexpr(part.rhs, bindings, state)
    return {
        "<": lhs < rhs,
        "<=": lhs <= rhs,
        "=": lhs == rhs,
        ">=": lhs >= rhs,
        ">": lhs > rhs,
    }[part.op]


# ---------------------------------------------------------------------------
# normalisation


def normalize_timepoint(tp: TimePoint) -> TimePoint:
    return TimePoint(tp.anchor, fold_constants(tp.offset))


def normalize_time(when):
    if isinstance(when, TimeInterval):
        return TimeInterval(normalize_timepoint(when.lo), normalize_timepoint(when.hi))
    return normalize_timepoint(when)


def normalize_action(action: DurativeAction) -> DurativeAction:
    """Canonical form: constant offsets folded, so ``start`` is ``(START, 0)``.

    ``at start``/``at end``/``over all`` already parse to canonical anchors; this
    additionally collapses forms such as ``(+ start (- 2 2))``.  Idempotent.
    """
    return replace(
        action,
        conditions=tuple(
            TimedCondition(normalize_time(c.time), c.condition) for c in action.conditions
        ),
        effects=tuple(TimedEffect(normalize_time(e.time), e.effect) for e in action.effects),
    )


def is_rich_time(when) -> bool:
    """True for anything strict PDDL2.1 cannot express as a condition site."""
    if isinstance(when, TimeInterval):
        return not when.is_full_span
    return not when.is_endpoint


def is_classic(action: DurativeAction) -> bool:
    """No interior time points and no interval effects."""
    if any(is_rich_time(c.time) for c in action.conditions):
        return False
    return not any(
        isinstance(e.time, TimeInterval) or is_rich_time(e.time) for e in action.effects
    )
