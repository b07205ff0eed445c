"""Timed-plan validation under rich or strict PDDL2.1 semantics.

The simulation walks the plan's happenings in time order.  At each instant,
steps starting there are grounded in the pre-state, every condition check of
the instant reads the pre-state, then all effects apply together.  Invariant
obligations are checked against each state holding inside their interval,
and interval effects protect their literal from other steps.

Interval conventions:

* ``over all`` obligations are open ``(t1, t2)``;
* interior interval conditions are closed ``[t1, t2]`` (point checks at both
  ends plus the open interior, split at the owner's breakpoints);
* interval effects hold over ``[t1, t2)``; their protection window is open.
"""

from __future__ import annotations

import heapq
import json
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .compiler import collect_breakpoints
from .model import (
    AT_END,
    AT_START,
    BinOp,
    Comparison,
    Condition,
    EvaluationError,
    FluentRef,
    Literal,
    NumericEffect,
    PlanStep,
    State,
    TimeInterval,
    TimePoint,
    evaluate_part,
    eval_numexpr,
    fluents_in,
    format_atom,
    format_number,
    ground_args,
    normalize_action,
    resolve_timepoint,
)
from .printer import first_rich_construct

RICH = "rich"
STRICT21 = "strict21"
SEMANTICS = (RICH, STRICT21)
DEFAULT_EPSILON = Fraction(1, 1000)

UNSATISFIED = "unsatisfied-condition"
MUTEX = "mutex"
PROTECTION = "protection"
INVARIANT = "invariant"
GOAL = "goal"
DURATION_MISMATCH = "duration-mismatch"
BREAKPOINT_INVERSION = "breakpoint-inversion"
KINDS = (UNSATISFIED, MUTEX, PROTECTION, INVARIANT, GOAL, DURATION_MISMATCH, BREAKPOINT_INVERSION)


class PlanError(Exception):
    """A plan step that cannot be interpreted at all (unknown action, bad arguments)."""


class SemanticsError(Exception):
    """A rich construct was used under strict PDDL2.1 semantics."""


class GroundingViolation(Exception):
    def __init__(self, kind, detail, symbols=frozenset()):
        super().__init__(detail)
        self.kind = kind
        self.detail = detail
        self.symbols = symbols


@dataclass(frozen=True)
class Violation:
    kind: str
    time: Fraction
    step_index: Optional[int]
    action: Optional[str]
    detail: str
    related_step: Optional[int] = None
    # predicates/functions the violation is about; used to spot clock-only noise
    symbols: frozenset = field(default=frozenset(), compare=False)

    def sort_key(self):
        step = -1 if self.step_index is None else self.step_index
        return (self.time, step, KINDS.index(self.kind), self.detail)

    def to_json(self):
        return {
            "kind": self.kind,
            "time": str(self.time),
            "step_index": self.step_index,
            "action": self.action,
            "detail": self.detail,
        }

    def __str__(self):
        where = f"t={format_number(self.time)}"
        if self.step_index is not None:
            where += f" step {self.step_index} ({self.action})"
        return f"{where}: {self.kind}: {self.detail}"


@dataclass(frozen=True)
class Verdict:
    valid: bool
    violations: Tuple[Violation, ...] = ()

    @classmethod
    def of(cls, violations):
        ordered = tuple(sorted(set(violations), key=Violation.sort_key))
        return cls(not ordered, ordered)

    def to_json(self) -> str:
        return json.dumps(
            {"valid": self.valid, "violations": [v.to_json() for v in self.violations]},
            indent=2,
        ) + "\n"

    def to_text(self) -> str:
        if self.valid:
            return "Plan valid\n"
        n = len(self.violations)
        lines = [f"Plan invalid: {n} violation{'s' if n != 1 else ''}"]
        lines += [f"  {v}" for v in self.violations]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# grounding


@dataclass(frozen=True)
class GroundStep:
    index: int
    step: PlanStep
    bindings: Tuple[Tuple[str, str], ...]
    duration: Fraction
    breakpoints: Tuple[Fraction, ...]
    schedule: Tuple[TimePoint, ...]

    @property
    def start(self) -> Fraction:
        return self.step.time

    @property
    def end(self) -> Fraction:
        return self.step.time + self.duration

    @property
    def binding_map(self) -> Dict[str, str]:
        return dict(self.bindings)

    def time_of(self, tp: TimePoint) -> Fraction:
        if tp == AT_START:
            return self.start
        if tp == AT_END:
            return self.end
        return self.breakpoints[self.schedule.index(tp)]

    def boundaries(self) -> Tuple[Fraction, ...]:
        return (self.start,) + self.breakpoints + (self.end,)


def _object_types(domain, problem):
    types = dict(domain.constants)
    types.update(dict(problem.objects))
    return types


def _bind(domain, problem, step: PlanStep):
    action = domain.action(step.action)
    if action is None:
        raise PlanError(f"unknown action {step.action!r} at time {format_number(step.time)}")
    if len(step.args) != len(action.parameters):
        raise PlanError(
            f"{step.action} takes {len(action.parameters)} argument(s), "
            f"got {len(step.args)} at time {format_number(step.time)}"
        )
    types = _object_types(domain, problem)
    bindings = []
    for (var, typ), obj in zip(action.parameters, step.args):
        if obj not in types:
            raise PlanError(f"unknown object {obj!r} in {step}")
        if typ not in domain.supertypes(types[obj]):
            raise PlanError(f"object {obj!r} of type {types[obj]} does not fit {var} - {typ} in {step}")
        bindings.append((var, obj))
    return normalize_action(action), tuple(bindings)


def _ground(domain, problem, step: PlanStep, state: State, index: int):
    """Return ``(GroundStep or None, normalized action, list of GroundingViolation)``."""
    action, bindings = _bind(domain, problem, step)
    bmap = dict(bindings)
    problems = []
    syms = frozenset(ref.name for ref in fluents_in(action.duration))
    try:
        evaluated = eval_numexpr(action.duration, bmap, state)
    except EvaluationError as exc:
        problems.append(GroundingViolation(DURATION_MISMATCH, f"duration cannot be evaluated: {exc}", syms))
    else:
        if evaluated != step.duration:
            problems.append(
                GroundingViolation(
                    DURATION_MISMATCH,
                    f"stated duration {format_number(step.duration)}, evaluated {format_number(evaluated)}",
                    syms,
                )
            )
    schedule = collect_breakpoints(action).points
    times = []
    try:
        for tp in schedule:
            times.append(resolve_timepoint(tp, step.time, step.duration, bmap, state))
    except EvaluationError as exc:
        problems.append(GroundingViolation(BREAKPOINT_INVERSION, str(exc)))
        return None, action, problems
    previous = step.time
    for tp, t in zip(schedule + (AT_END,), times + [step.time + step.duration]):
        if t <= previous:
            problems.append(
                GroundingViolation(
                    BREAKPOINT_INVERSION,
                    f"{tp} resolves to {format_number(t)}, not after {format_number(previous)}",
                )
            )
            return None, action, problems
        previous = t
    return GroundStep(index, step, bindings, step.duration, tuple(times), schedule), action, problems


def ground_step(domain, problem, step: PlanStep, state: State, index: int = 0) -> GroundStep:
    """Bind and evaluate one plan step in the state at its start.

    Raises :class:`PlanError` for uninterpretable steps and
    :class:`GroundingViolation` for duration mismatches or breakpoint inversion.
    """
    ground, _, problems = _ground(domain, problem, step, state, index)
    if problems:
        raise problems[0]
    return ground


# ---------------------------------------------------------------------------
# timeline


@dataclass(frozen=True)
class ConditionCheck:
    step_index: int
    part: object  # lifted Literal or Comparison
    bindings: Tuple[Tuple[str, str], ...]


@dataclass(frozen=True)
class EffectApplication:
    step_index: int
    effect: object  # lifted Literal or NumericEffect
    bindings: Tuple[Tuple[str, str], ...]


@dataclass
class Happening:
    time: Fraction
    checks: List[ConditionCheck] = field(default_factory=list)
    effects: List[EffectApplication] = field(default_factory=list)
    steps: set = field(default_factory=set)


@dataclass(frozen=True)
class ProtectionWindow:
    atom: tuple
    start: Fraction
    end: Fraction
    step_index: int

    def covers(self, t) -> bool:
        return self.start < t < self.end


@dataclass(frozen=True)
class Obligation:
    start: Fraction
    end: Fraction
    condition: Condition
    step_index: int
    bindings: Tuple[Tuple[str, str], ...]

    def covers(self, t) -> bool:
        # the state set at t holds just after t, so t itself counts when t >= start
        return self.start <= t < self.end


@dataclass
class TraceEntry:
    time: Fraction
    pre: State
    post: State
    happening: Happening


@dataclass
class Simulation:
    happenings: List[Happening]
    windows: List[ProtectionWindow]
    obligations: List[Obligation]
    ground_steps: Dict[int, GroundStep]
    trace: List[TraceEntry]
    violations: List[Violation]
    final_state: State
    final_time: Fraction


def _check_strict(action):
    bad = first_rich_construct(action)
    if bad is not None:
        raise SemanticsError(f"rich construct under strict semantics: action {action.name!r}, {bad}")


def _schedule_step(ground: GroundStep, action, happenings, obligations, windows):
    b = ground.bindings
    i = ground.index

    def at(t) -> Happening:
        if t not in happenings:
            happenings[t] = Happening(t)
        happenings[t].steps.add(i)
        return happenings[t]

    for t in ground.boundaries():
        at(t)
    bounds = ground.boundaries()
    for cond in action.conditions:
        if isinstance(cond.time, TimeInterval):
            lo, hi = ground.time_of(cond.time.lo), ground.time_of(cond.time.hi)
            if cond.time.is_full_span:
                obligations.append(Obligation(lo, hi, cond.condition, i, b))
                continue
            for t in (lo, hi):
                at(t).checks.extend(ConditionCheck(i, p, b) for p in cond.condition.parts)
            cuts = [lo] + [t for t in bounds if lo < t < hi] + [hi]
            for a, z in zip(cuts, cuts[1:]):
                obligations.append(Obligation(a, z, cond.condition, i, b))
        else:
            t = ground.time_of(cond.time)
            at(t).checks.extend(ConditionCheck(i, p, b) for p in cond.condition.parts)
    for eff in action.effects:
        if isinstance(eff.time, TimeInterval):
            lo, hi = ground.time_of(eff.time.lo), ground.time_of(eff.time.hi)
            at(lo).effects.append(EffectApplication(i, eff.effect, b))
            at(hi).effects.append(EffectApplication(i, eff.effect.negate(), b))
            windows.append(ProtectionWindow(eff.effect.ground(dict(b)).atom, lo, hi, i))
        else:
            at(ground.time_of(eff.time)).effects.append(EffectApplication(i, eff.effect, b))


def _part_symbols(part):
    if isinstance(part, Literal):
        return frozenset([part.predicate])
    return frozenset(ref.name for e in (part.lhs, part.rhs) for ref in fluents_in(e))


def _ground_node(node, b):
    if isinstance(node, FluentRef):
        return FluentRef(node.name, tuple(b.get(a, a) for a in node.args))
    if isinstance(node, BinOp):
        return BinOp(node.op, _ground_node(node.lhs, b), _ground_node(node.rhs, b))
    if isinstance(node, Comparison):
        return Comparison(node.op, _ground_node(node.lhs, b), _ground_node(node.rhs, b))
    if isinstance(node, Literal):
        return Literal(node.predicate, tuple(b.get(a, a) for a in node.args), node.positive)
    if isinstance(node, NumericEffect):
        return NumericEffect(node.op, _ground_node(node.fluent, b), _ground_node(node.expr, b))
    return node


def _ground_text(node, bindings):
    return str(_ground_node(node, dict(bindings)))


def _holds(part, bindings, state):
    """``(ok, reason)`` for one condition part."""
    try:
        return evaluate_part(part, dict(bindings), state), None
    except EvaluationError as exc:
        return False, str(exc)


def _apply(state: State, apps: List[EffectApplication]):
    """Apply a happening's effects; numeric right-hand sides read the pre-state."""
    adds, dels = set(), set()
    assigns, deltas = {}, defaultdict(Fraction)
    failures = []
    for app in apps:
        eff, b = app.effect, dict(app.bindings)
        if isinstance(eff, Literal):
            (adds if eff.positive else dels).add(eff.ground(b).atom)
            continue
        try:
            key = (eff.fluent.name, ground_args(eff.fluent.args, b, eff.fluent))
            value = eval_numexpr(eff.expr, b, state)
            if eff.op != "assign" and key not in state.fluents:
                raise EvaluationError(f"fluent {format_atom(key)} has no value", eff.fluent)
        except EvaluationError as exc:
            failures.append((app, str(exc)))
            continue
        if eff.op == "assign":
            assigns[key] = value
        elif eff.op == "increase":
            deltas[key] += value
        else:
            deltas[key] -= value
    facts = (state.facts - dels) | adds
    fluents = dict(state.fluents)
    fluents.update(assigns)
    for key, delta in deltas.items():
        fluents[key] = fluents[key] + delta
    return State(frozenset(facts), fluents), failures


def simulate(domain, problem, plan, semantics=RICH) -> Simulation:
    """Run the plan and collect the timeline plus every non-mutex violation."""
    if semantics not in SEMANTICS:
        raise ValueError(f"unknown semantics {semantics!r}")
    steps = list(plan)
    names = {i: s.action for i, s in enumerate(steps)}
    state = State.initial(problem)
    happenings: Dict[Fraction, Happening] = {}
    obligations: List[Obligation] = []
    windows: List[ProtectionWindow] = []
    grounds: Dict[int, GroundStep] = {}
    violations: List[Violation] = []
    trace: List[TraceEntry] = []
    failed_parts = set()

    def violation(kind, t, i, detail, related=None, symbols=frozenset()):
        violations.append(Violation(kind, t, i, names.get(i), detail, related, symbols))

    queue = sorted({s.time for s in steps})
    heapq.heapify(queue)
    seen_times = set(queue)
    next_step = 0
    by_time_order = sorted(range(len(steps)), key=lambda i: steps[i].time)
    last_time = Fraction(0)

    while queue:
        t = heapq.heappop(queue)
        pre = state
        while next_step < len(by_time_order) and steps[by_time_order[next_step]].time == t:
            i = by_time_order[next_step]
            next_step += 1
            if semantics == STRICT21:
                action = domain.action(steps[i].action)
                if action is not None:
                    _check_strict(normalize_action(action))
            ground, action, problems = _ground(domain, problem, steps[i], pre, i)
            for p in problems:
                violation(p.kind, t, i, p.detail, symbols=p.symbols)
            if ground is None:
                continue
            grounds[i] = ground
            _schedule_step(ground, action, happenings, obligations, windows)
            for when in ground.boundaries():
                if when not in seen_times:
                    seen_times.add(when)
                    heapq.heappush(queue, when)
        happening = happenings.get(t)
        if happening is None:
            continue
        last_time = t
        for check in happening.checks:
            ok, reason = _holds(check.part, check.bindings, pre)
            if not ok:
                text = _ground_text(check.part, check.bindings)
                violation(UNSATISFIED, t, check.step_index, reason or f"{text} is false",
                          symbols=_part_symbols(check.part))
        for app in happening.effects:
            if isinstance(app.effect, Literal):
                atom = app.effect.ground(dict(app.bindings)).atom
                for w in windows:
                    if w.atom == atom and w.covers(t) and w.step_index != app.step_index:
                        violation(
                            PROTECTION, t, app.step_index,
                            f"{_ground_text(app.effect, app.bindings)} touches {format_atom(atom)}, "
                            f"protected over ({format_number(w.start)}, {format_number(w.end)})",
                            related=w.step_index,
                            symbols=frozenset([atom[0]]),
                        )
        state, failures = _apply(pre, happening.effects)
        for app, reason in failures:
            violation(UNSATISFIED, t, app.step_index, reason,
                      symbols=frozenset([app.effect.fluent.name]))
        for ob in obligations:
            if not ob.covers(t):
                continue
            for part in ob.condition.parts:
                key = (id(ob), part)
                if key in failed_parts:
                    continue
                ok, reason = _holds(part, ob.bindings, state)
                if not ok:
                    failed_parts.add(key)
                    text = _ground_text(part, ob.bindings)
                    span = f"over ({format_number(ob.start)}, {format_number(ob.end)})"
                    violation(INVARIANT, t, ob.step_index,
                              f"{reason or text + ' is false'} {span}",
                              symbols=_part_symbols(part))
        trace.append(TraceEntry(t, pre, state, happening))

    for part in problem.goal.parts:
        ok, reason = _holds(part, (), state)
        if not ok:
            violation(GOAL, last_time, None, reason or f"goal {part} is false in the final state",
                      symbols=_part_symbols(part))

    ordered = [happenings[t] for t in sorted(happenings)]
    return Simulation(ordered, windows, obligations, grounds, trace, violations, state, last_time)


# ---------------------------------------------------------------------------
# mutex


@dataclass
class _Event:
    time: Fraction
    step_index: int
    requires: set = field(default_factory=set)  # ground literals (atom, positive)
    adds: set = field(default_factory=set)
    dels: set = field(default_factory=set)
    assigns: set = field(default_factory=set)


def _events(sim: Simulation) -> List[_Event]:
    out = []
    for h in sim.happenings:
        per_step: Dict[int, _Event] = {}

        def ev(i):
            if i not in per_step:
                per_step[i] = _Event(h.time, i)
            return per_step[i]

        for check in h.checks:
            if isinstance(check.part, Literal):
                lit = check.part.ground(dict(check.bindings))
                ev(check.step_index).requires.add((lit.atom, lit.positive))
        for app in h.effects:
            b = dict(app.bindings)
            eff = app.effect
            if isinstance(eff, Literal):
                atom = eff.ground(b).atom
                (ev(app.step_index).adds if eff.positive else ev(app.step_index).dels).add(atom)
            elif eff.op == "assign":
                try:
                    key = (eff.fluent.name, ground_args(eff.fluent.args, b))
                except EvaluationError:
                    continue
                ev(app.step_index).assigns.add(key)
        out.extend(per_step[i] for i in sorted(per_step))
    return out


def _conflicts(a: _Event, b: _Event):
    """Atoms/fluents over which event ``a`` interferes with event ``b`` (one direction)."""
    found = []
    for atom in sorted(a.dels & b.adds):
        found.append((f"{format_atom(atom)} asserted and retracted", atom[0]))
    for atom, positive in sorted(b.requires):
        if (atom in a.dels and positive) or (atom in a.adds and not positive):
            shown = format_atom(atom) if positive else f"(not {format_atom(atom)})"
            found.append((f"{shown} required while being falsified", atom[0]))
    for key in sorted(a.assigns & b.assigns):
        found.append((f"{format_atom(key)} assigned twice", key[0]))
    return found


def find_mutexes(sim: Simulation, steps, epsilon=DEFAULT_EPSILON) -> List[Violation]:
    """Pairs of events from different steps closer than ``epsilon`` that interfere."""
    events = _events(sim)
    out = []
    for j, later in enumerate(events):
        for i in range(j - 1, -1, -1):
            earlier = events[i]
            if later.time - earlier.time >= epsilon:
                break
            if earlier.step_index == later.step_index:
                continue
            hits = _conflicts(earlier, later) + _conflicts(later, earlier)
            if earlier.time == later.time:
                first, second = sorted((earlier.step_index, later.step_index))
            else:
                first, second = earlier.step_index, later.step_index
            for detail, symbol in sorted(set(hits)):
                out.append(
                    Violation(MUTEX, later.time, second, steps[second].action, detail, first,
                              frozenset([symbol]))
                )
    return out


# ---------------------------------------------------------------------------
# public entry points


def build_timeline(domain, problem, plan, semantics=RICH):
    """``(happenings, protection windows, invariant obligations)`` for a plan."""
    sim = simulate(domain, problem, plan, semantics)
    return sim.happenings, sim.windows, sim.obligations


def check_goal(problem, final_state: State, time=Fraction(0)) -> Optional[Violation]:
    """The first unsatisfied goal part as a violation, or None."""
    for part in problem.goal.parts:
        ok, reason = _holds(part, (), final_state)
        if not ok:
            return Violation(GOAL, time, None, None, reason or f"goal {part} is false in the final state",
                             symbols=_part_symbols(part))
    return None


def validate(domain, problem, plan, semantics=RICH, epsilon=DEFAULT_EPSILON) -> Verdict:
    """Decide whether ``plan`` is valid; every failure becomes a violation."""
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    steps = list(plan)
    sim = simulate(domain, problem, steps, semantics)
    return Verdict.of(sim.violations + find_mutexes(sim, steps, epsilon))
