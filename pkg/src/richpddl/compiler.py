"""Compile rich durative actions into plain PDDL2.1 sub-action chains.

A rich action with interior breakpoints ``b1 < ... < bk`` becomes an
*envelope* (same name, parameters and duration) plus ``k + 1`` segments that
tile it.  Generated clock predicates force the segments to run back to back
inside the envelope::

    envelope start:  active, enabled-0
    segment i:       over all (active, enabled-i); at end (not enabled-i), enabled-(i+1)
    last segment:    at start finished          (a start effect, see below)
    envelope end:    requires finished; at end (not active), (not finished)

``finished`` must be a start effect of the last segment: as an end effect it
would coincide with the envelope's ``(not finished)`` and the two would be
mutex.

Literal conditions that share an instant with the other sub-action's effects
are placed on that sub-action so the compiled plan is mutex-free whenever the
rich one is; where that is impossible the action is rejected with
:class:`CompileError`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from .model import (
    AT_END,
    AT_START,
    END,
    OVER_ALL,
    START,
    ZERO,
    BinOp,
    Condition,
    DurativeAction,
    Domain,
    FluentRef,
    Literal,
    NumericEffect,
    TimedCondition,
    TimedEffect,
    TimeInterval,
    TimePoint,
    constant_value,
    fluents_in,
    fold_constants,
    is_classic,
    normalize_action,
)

CONDITION_SITE = "condition-site"
POINT_EFFECT_SITE = "point-effect-site"
INTERVAL_ENDPOINT = "interval-endpoint"

MAX_SUFFIX = 100


class CompileError(Exception):
    pass


@dataclass(frozen=True)
class Breakpoint:
    point: TimePoint
    roles: frozenset = frozenset()


@dataclass(frozen=True)
class BreakpointSchedule:
    """START-anchored breakpoints by ascending offset, then END-anchored by descending offset."""

    breakpoints: Tuple[Breakpoint, ...] = ()

    @property
    def points(self) -> Tuple[TimePoint, ...]:
        return tuple(b.point for b in self.breakpoints)

    def __len__(self):
        return len(self.breakpoints)

    def boundaries(self) -> Tuple[TimePoint, ...]:
        """All segment boundaries: start, breakpoints, end."""
        return (AT_START,) + self.points + (AT_END,)


def _order_key(tp: TimePoint):
    value = constant_value(tp.offset)
    text = str(tp.offset)
    if tp.anchor == START:
        # symbolic offsets sort after constants, i.e. towards the middle
        return (0, 0, value, "") if value is not None else (0, 1, 0, text)
    return (1, 1, -value, "") if value is not None else (1, 0, 0, text)


def collect_breakpoints(action: DurativeAction) -> BreakpointSchedule:
    """Every interior time point the action mentions, in schedule order."""
    roles: Dict[TimePoint, set] = {}

    def note(tp, role):
        if not tp.is_endpoint:
            roles.setdefault(tp, set()).add(role)

    for cond in action.conditions:
        if isinstance(cond.time, TimeInterval):
            note(cond.time.lo, INTERVAL_ENDPOINT)
            note(cond.time.hi, INTERVAL_ENDPOINT)
        else:
            note(cond.time, CONDITION_SITE)
    for eff in action.effects:
        if isinstance(eff.time, TimeInterval):
            note(eff.time.lo, INTERVAL_ENDPOINT)
            note(eff.time.hi, INTERVAL_ENDPOINT)
        else:
            note(eff.time, POINT_EFFECT_SITE)
    ordered = sorted(roles, key=_order_key)
    return BreakpointSchedule(tuple(Breakpoint(tp, frozenset(roles[tp])) for tp in ordered))


# ---------------------------------------------------------------------------
# segments


@dataclass
class Slot:
    """Conditions and effects of one sub-action at one of its two endpoints."""

    conditions: List[TimedCondition] = field(default_factory=list)
    effects: List[TimedEffect] = field(default_factory=list)


@dataclass
class Segment:
    index: int
    left: TimePoint
    right: TimePoint
    duration: object
    start: Slot = field(default_factory=Slot)
    end: Slot = field(default_factory=Slot)
    over_conditions: List[Condition] = field(default_factory=list)

    @property
    def start_conditions(self):
        return [c.condition for c in self.start.conditions]

    @property
    def start_effects(self):
        return [e.effect for e in self.start.effects]

    @property
    def end_conditions(self):
        return [c.condition for c in self.end.conditions]

    @property
    def end_effects(self):
        return [e.effect for e in self.end.effects]


@dataclass
class Envelope:
    start: Slot = field(default_factory=Slot)
    end: Slot = field(default_factory=Slot)
    over_conditions: List[Condition] = field(default_factory=list)


def _minus(a, b):
    if b == ZERO:
        return a
    return fold_constants(BinOp("-", a, b))


def segment_duration(left: TimePoint, right: TimePoint, action: DurativeAction, duration_fluent):
    if left.anchor == right.anchor == START:
        return _minus(right.offset, left.offset)
    if left.anchor == right.anchor == END:
        return _minus(left.offset, right.offset)
    # the anchor-switch segment
    base = action.duration if left.is_endpoint else duration_fluent
    return _minus(_minus(base, left.offset), right.offset)


def _may_unify(a: Tuple[str, ...], b: Tuple[str, ...]) -> bool:
    return len(a) == len(b) and all(
        x == y or x.startswith("?") or y.startswith("?") for x, y in zip(a, b)
    )


def _falsifies(effect, lit: Literal) -> bool:
    return (
        isinstance(effect, Literal)
        and effect.predicate == lit.predicate
        and effect.positive != lit.positive
        and _may_unify(effect.args, lit.args)
    )


def _contradicts(e1, e2) -> bool:
    if isinstance(e1, Literal) and isinstance(e2, Literal):
        return _falsifies(e1, e2)
    if isinstance(e1, NumericEffect) and isinstance(e2, NumericEffect):
        return (
            e1.op == e2.op == "assign"
            and e1.fluent.name == e2.fluent.name
            and _may_unify(e1.fluent.args, e2.fluent.args)
        )
    return False


def segment_action(action: DurativeAction, schedule: BreakpointSchedule, duration_fluent=None):
    """Distribute an action's content over an envelope and its segments."""
    if duration_fluent is None:
        duration_fluent = FluentRef(f"{action.name}-duration", action.parameter_names)
    bounds = schedule.boundaries()
    index = {tp: i for i, tp in enumerate(bounds)}
    k = len(schedule)
    envelope = Envelope()
    segments = [
        Segment(i, bounds[i], bounds[i + 1], segment_duration(bounds[i], bounds[i + 1], action, duration_fluent))
        for i in range(k + 1)
    ]

    def where(tp):
        if tp not in index:
            raise AssertionError(f"time point {tp} missing from schedule")
        return index[tp]

    def site_slots(i):
        """The two sub-action endpoints meeting at boundary i, earlier one first."""
        if i == 0:
            return envelope.start, segments[0].start
        if i == k + 1:
            return segments[k].end, envelope.end
        return segments[i - 1].end, segments[i].start

    def point_slot(i):
        """Default home of point content at boundary i."""
        if i == 0:
            return envelope.start
        if i == k + 1:
            return envelope.end
        return segments[i].start

    def partner_slot(i):
        a, b = site_slots(i)
        return b if point_slot(i) is a else a

    # effects first: condition placement depends on them
    for eff in action.effects:
        if isinstance(eff.time, TimeInterval):
            lo, hi = where(eff.time.lo), where(eff.time.hi)
            if lo >= hi:
                raise CompileError(f"{action.name}: empty or inverted interval in {eff}")
            segments[lo].start.effects.append(TimedEffect(AT_START, eff.effect))
            segments[hi - 1].end.effects.append(TimedEffect(AT_END, eff.effect.negate()))
        else:
            i = where(eff.time)
            slot = point_slot(i)
            anchor = AT_END if slot is envelope.end else AT_START
            slot.effects.append(TimedEffect(anchor, eff.effect))

    placements = []  # (site, default slot, partner slot, condition)
    for cond in action.conditions:
        if isinstance(cond.time, TimeInterval):
            if cond.time.is_full_span:
                envelope.over_conditions.append(cond.condition)
                continue
            lo, hi = where(cond.time.lo), where(cond.time.hi)
            if lo >= hi:
                raise CompileError(f"{action.name}: empty or inverted interval in {cond}")
            for seg in segments[lo:hi]:
                seg.over_conditions.append(cond.condition)
            placements.append((lo, point_slot(lo), partner_slot(lo), cond.condition))
            # the closing check belongs to the segment that ends there
            closing, after = site_slots(hi)
            placements.append((hi, closing, after, cond.condition))
        else:
            i = where(cond.time)
            placements.append((i, point_slot(i), partner_slot(i), cond.condition))

    for site, default, partner, condition in placements:
        here, there = [], []
        for part in condition.parts:
            target = here
            if isinstance(part, Literal):
                ours = any(_falsifies(e.effect, part) for e in default.effects)
                theirs = any(_falsifies(e.effect, part) for e in partner.effects)
                if ours and theirs:
                    raise CompileError(
                        f"{action.name}: condition {part} at {bounds[site]} is threatened by "
                        "effects of both sub-actions meeting there"
                    )
                if theirs:
                    target = there
            target.append(part)
        for slot, parts in ((default, here), (partner, there)):
            if parts:
                anchor = AT_END if _is_end_slot(slot, envelope, segments) else AT_START
                slot.conditions.append(TimedCondition(anchor, Condition(tuple(parts))))

    for i in range(k + 2):
        a, b = site_slots(i)
        for e1 in a.effects:
            for e2 in b.effects:
                if _contradicts(e1.effect, e2.effect):
                    raise CompileError(
                        f"{action.name}: effects {e1.effect} and {e2.effect} meet at {bounds[i]} "
                        "in different sub-actions"
                    )
    return envelope, segments


def _is_end_slot(slot, envelope, segments):
    return slot is envelope.end or any(slot is s.end for s in segments)


# ---------------------------------------------------------------------------
# compilation map


@dataclass(frozen=True)
class SegmentInfo:
    name: str
    left: TimePoint
    param_indices: Tuple[int, ...]

    def to_json(self):
        return {
            "name": self.name,
            "left_offset_expr": str(self.left.offset),
            "anchor": self.left.anchor,
            "param_indices": list(self.param_indices),
        }


@dataclass(frozen=True)
class ActionMap:
    envelope: str
    segments: Tuple[SegmentInfo, ...]
    active: str
    enabled: Tuple[str, ...]
    finished: str
    duration_fluent: Optional[str]
    tagged: bool = True

    @property
    def generated_symbols(self) -> frozenset:
        names = {self.active, self.finished, *self.enabled}
        if self.duration_fluent:
            names.add(self.duration_fluent)
        return frozenset(names)

    def to_json(self):
        return {
            "envelope": self.envelope,
            "segments": [s.to_json() for s in self.segments],
            "predicates": {
                "active": self.active,
                "enabled": list(self.enabled),
                "finished": self.finished,
            },
            "duration_fluent": self.duration_fluent,
            "tagged": self.tagged,
        }


@dataclass(frozen=True)
class CompilationMap:
    actions: Tuple[Tuple[str, ActionMap], ...] = ()

    def __contains__(self, name):
        return any(n == name for n, _ in self.actions)

    def __getitem__(self, name) -> ActionMap:
        for n, m in self.actions:
            if n == name:
                return m
        raise KeyError(name)

    def __len__(self):
        return len(self.actions)

    def __iter__(self):
        return iter(n for n, _ in self.actions)

    def items(self):
        return iter(self.actions)

    @property
    def generated_symbols(self) -> frozenset:
        out = set()
        for _, m in self.actions:
            out |= m.generated_symbols
        return frozenset(out)

    def segment_owner(self, action_name):
        """``(rich action, segment index)`` for a segment action name, else None."""
        for rich, m in self.actions:
            for i, seg in enumerate(m.segments):
                if seg.name == action_name:
                    return rich, i
        return None

    def to_json(self) -> str:
        return json.dumps({n: m.to_json() for n, m in self.actions}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CompilationMap":
        from .parser import parse_numexpr

        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError("compilation map must be a JSON object")
        out = []
        for name, entry in data.items():
            segments = tuple(
                SegmentInfo(
                    s["name"],
                    TimePoint(s["anchor"], parse_numexpr(s["left_offset_expr"])),
                    tuple(s.get("param_indices", ())),
                )
                for s in entry["segments"]
            )
            preds = entry["predicates"]
            out.append(
                (
                    name,
                    ActionMap(
                        entry["envelope"],
                        segments,
                        preds["active"],
                        tuple(preds["enabled"]),
                        preds["finished"],
                        entry.get("duration_fluent"),
                        entry.get("tagged", True),
                    ),
                )
            )
        return cls(tuple(out))


# ---------------------------------------------------------------------------
# compile


class _Names:
    def __init__(self, taken):
        self.taken = set(taken)

    def fresh(self, base):
        name = base
        k = 0
        while name in self.taken:
            k += 1
            if k > MAX_SUFFIX:
                raise CompileError(f"cannot find a free name for {base}")
            name = f"{base}-gen{k}"
        self.taken.add(name)
        return name


def _content_variables(conditions, effects, duration):
    out = set()

    def expr_vars(e):
        for ref in fluents_in(e):
            out.update(a for a in ref.args if a.startswith("?"))

    expr_vars(duration)
    for c in conditions:
        for part in c.condition.parts:
            if isinstance(part, Literal):
                out.update(a for a in part.args if a.startswith("?"))
            else:
                expr_vars(part.lhs)
                expr_vars(part.rhs)
    for e in effects:
        eff = e.effect
        if isinstance(eff, Literal):
            out.update(a for a in eff.args if a.startswith("?"))
        else:
            expr_vars(eff.fluent)
            expr_vars(eff.expr)
    return out


def compile_action(action: DurativeAction, tagged_clocks: bool = True, names: _Names = None):
    """Compile one action; returns ``(actions, ActionMap or None)``."""
    action = normalize_action(action)
    if is_classic(action):
        return [action], None
    if names is None:
        names = _Names({action.name})
    names.taken.add(action.name)
    params = action.parameter_names
    clock_args = params if tagged_clocks else ()
    schedule = collect_breakpoints(action)
    k = len(schedule)

    active = names.fresh(f"active-{action.name}")
    enabled = [names.fresh(f"enabled-{action.name}-{i}") for i in range(k + 1)]
    finished = names.fresh(f"finished-{action.name}")
    seg_names = [names.fresh(f"{action.name}-seg{i}") for i in range(k + 1)]
    # the anchor-switch segment reads the fluent unless it starts with the envelope
    needs_fluent = any(tp.anchor == START for tp in schedule.points)
    fluent_name = names.fresh(f"{action.name}-duration") if needs_fluent else None
    fluent = FluentRef(fluent_name or f"{action.name}-duration", clock_args)

    envelope, segments = segment_action(action, schedule, fluent)

    def lit(name, args=clock_args, positive=True):
        return Literal(name, args, positive)

    env_conditions = [
        *envelope.start.conditions,
        *(TimedCondition(OVER_ALL, c) for c in envelope.over_conditions),
        *envelope.end.conditions,
        TimedCondition(AT_END, Condition((lit(finished),))),
    ]
    env_effects = [
        *envelope.start.effects,
        TimedEffect(AT_START, lit(active)),
        TimedEffect(AT_START, lit(enabled[0])),
    ]
    if fluent_name is not None:
        env_effects.append(TimedEffect(AT_START, NumericEffect("assign", fluent, action.duration)))
    env_effects += [
        *envelope.end.effects,
        TimedEffect(AT_END, lit(active, positive=False)),
        TimedEffect(AT_END, lit(finished, positive=False)),
    ]
    out = [replace(action, conditions=tuple(env_conditions), effects=tuple(env_effects))]

    infos = []
    for seg in segments:
        i = seg.index
        conditions = [
            *seg.start.conditions,
            TimedCondition(OVER_ALL, Condition((lit(active),))),
            TimedCondition(OVER_ALL, Condition((lit(enabled[i]),))),
            *(TimedCondition(OVER_ALL, c) for c in seg.over_conditions),
            *seg.end.conditions,
        ]
        effects = list(seg.start.effects)
        if i == k:
            effects.append(TimedEffect(AT_START, lit(finished)))
        effects += seg.end.effects
        effects.append(TimedEffect(AT_END, lit(enabled[i], positive=False)))
        if i < k:
            effects.append(TimedEffect(AT_END, lit(enabled[i + 1])))
        if tagged_clocks:
            seg_params = action.parameters
        else:
            used = _content_variables(conditions, effects, seg.duration)
            seg_params = tuple(p for p in action.parameters if p[0] in used)
        index_of = {p: j for j, p in enumerate(params)}
        infos.append(SegmentInfo(seg_names[i], seg.left, tuple(index_of[p] for p, _ in seg_params)))
        out.append(
            DurativeAction(seg_names[i], seg_params, seg.duration, tuple(conditions), tuple(effects))
        )
    amap = ActionMap(action.name, tuple(infos), active, tuple(enabled), finished, fluent_name, tagged_clocks)
    return out, amap


def compile_domain(domain: Domain, tagged_clocks: bool = True):
    """Compile every rich action; returns ``(strict domain, CompilationMap)``."""
    names = _Names(
        [n for n, _ in domain.predicates]
        + [n for n, _ in domain.functions]
        + [a.name for a in domain.actions]
    )
    actions, predicates, functions, maps = [], list(domain.predicates), list(domain.functions), []
    for action in domain.actions:
        compiled, amap = compile_action(action, tagged_clocks, names)
        actions.extend(compiled)
        if amap is None:
            continue
        maps.append((action.name, amap))
        clock_params = action.parameters if tagged_clocks else ()
        for pred in (amap.active, *amap.enabled, amap.finished):
            predicates.append((pred, clock_params))
        if amap.duration_fluent is not None:
            functions.append((amap.duration_fluent, clock_params))
    out = replace(
        domain,
        predicates=tuple(predicates),
        functions=tuple(functions),
        actions=tuple(actions),
    )
    return out, CompilationMap(tuple(maps))
