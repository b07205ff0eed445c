"""Move plans between a rich domain and its compiled form, and compare verdicts."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .compiler import CompilationMap
from .model import PlanStep, constant_value, format_number, sort_plan, START
from .validator import (
    BREAKPOINT_INVERSION,
    DEFAULT_EPSILON,
    MUTEX,
    PROTECTION,
    RICH,
    STRICT21,
    Verdict,
    Violation,
    simulate,
    validate,
)

PROTECTION_ONLY = "protection-only"
OTHER = "other"


class LoweringError(Exception):
    pass


class LiftError(Exception):
    ORPHANED = "orphaned segment"
    MIS_TIMED = "mis-timed segment"
    MISSING = "missing segment"

    def __init__(self, kind, message):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


@dataclass(frozen=True)
class LoweringRecord:
    """One rich step and the compiled steps (envelope first) standing for it."""

    rich_index: int
    rich_step: PlanStep
    compiled_indices: Tuple[int, ...]
    compiled_steps: Tuple[PlanStep, ...]

    def tiles(self) -> bool:
        envelope, segments = self.compiled_steps[0], self.compiled_steps[1:]
        if (envelope.time, envelope.duration) != (self.rich_step.time, self.rich_step.duration):
            return False
        t = envelope.time
        for seg in segments:
            if seg.time != t:
                return False
            t += seg.duration
        return t == envelope.time + envelope.duration


def lower_plan(plan, domain, problem, cmap: CompilationMap):
    """Expand each mapped rich step into its envelope plus abutting segments.

    Returns ``(compiled plan, records, owner)`` where ``owner`` maps each
    compiled step index to the rich step index it came from.
    """
    steps = list(plan)
    mapped = [i for i, s in enumerate(steps) if s.action in cmap]
    grounds = {}
    if mapped:
        sim = simulate(domain, problem, steps, RICH)
        grounds = sim.ground_steps
        for i in mapped:
            if i not in grounds:
                bad = [v for v in sim.violations if v.step_index == i and v.kind == BREAKPOINT_INVERSION]
                detail = bad[0].detail if bad else "step could not be grounded"
                raise LoweringError(f"{BREAKPOINT_INVERSION} in step {i} ({steps[i]}): {detail}")

    expanded: List[Tuple[PlanStep, int]] = []
    for i, step in enumerate(steps):
        expanded.append((step, i))
        if step.action not in cmap:
            continue
        amap = cmap[step.action]
        bounds = grounds[i].boundaries()
        for k, seg in enumerate(amap.segments):
            args = tuple(step.args[j] for j in seg.param_indices)
            expanded.append((PlanStep(bounds[k], seg.name, args, bounds[k + 1] - bounds[k]), i))
    expanded.sort(key=lambda pair: pair[0].time)
    compiled = tuple(s for s, _ in expanded)
    owner = {ci: ri for ci, (_, ri) in enumerate(expanded)}

    records = []
    for i in mapped:
        idx = tuple(ci for ci, ri in owner.items() if ri == i)
        records.append(LoweringRecord(i, steps[i], idx, tuple(compiled[c] for c in idx)))
    return compiled, tuple(records), owner


def lift_plan(compiled_plan, cmap: CompilationMap):
    """Collapse envelopes and their segments back into rich steps."""
    steps = list(compiled_plan)
    consumed = set()
    seg_names = {}
    for rich, amap in cmap.items():
        for k, seg in enumerate(amap.segments):
            seg_names[seg.name] = (rich, k)

    out = []
    for i, step in enumerate(steps):
        if step.action in seg_names:
            continue
        out.append(step)
        if step.action not in cmap:
            continue
        amap = cmap[step.action]
        t = step.time
        end = step.time + step.duration
        for k, seg in enumerate(amap.segments):
            args = tuple(step.args[j] for j in seg.param_indices)
            expected = _expected_start(seg, step, t)
            match = None
            for j, cand in enumerate(steps):
                if j in consumed or cand.action != seg.name or cand.args != args:
                    continue
                if cand.time == expected:
                    match = j
                    break
            if match is None:
                stray = [
                    c for j, c in enumerate(steps)
                    if j not in consumed and c.action == seg.name and c.args == args
                ]
                if stray:
                    raise LiftError(
                        LiftError.MIS_TIMED,
                        f"{stray[0]} should start at {format_number(expected)} inside {step}",
                    )
                raise LiftError(LiftError.MISSING, f"no {seg.name} step for {step}")
            consumed.add(match)
            t = steps[match].time + steps[match].duration
        if t != end:
            last = amap.segments[-1].name
            raise LiftError(
                LiftError.MIS_TIMED,
                f"{last} ends at {format_number(t)} but {step} ends at {format_number(end)}",
            )
    for j, step in enumerate(steps):
        if step.action in seg_names and j not in consumed:
            raise LiftError(LiftError.ORPHANED, f"{step} has no covering {seg_names[step.action][0]} step")
    return sort_plan(out)


def _expected_start(seg, envelope: PlanStep, chained: Fraction) -> Fraction:
    offset = constant_value(seg.left.offset)
    if offset is None:
        return chained
    if seg.left.anchor == START:
        fixed = envelope.time + offset
    else:
        fixed = envelope.time + envelope.duration - offset
    # a constant offset that disagrees with the chain can never tile
    return fixed if fixed == chained else chained


# ---------------------------------------------------------------------------
# equivalence


@dataclass(frozen=True)
class Divergence:
    time: Fraction
    literal: str
    explanation: str
    kind: str
    side: str  # which verdict has the violation the other lacks

    def to_json(self):
        return {
            "time": str(self.time),
            "literal": self.literal,
            "explanation": self.explanation,
            "kind": self.kind,
            "side": self.side,
        }


@dataclass(frozen=True)
class EquivalenceReport:
    rich_verdict: Verdict
    compiled_verdict: Verdict
    agreement: bool
    divergences: Tuple[Divergence, ...]
    ignored: Tuple[Violation, ...] = ()  # compiled violations about clocks only

    @property
    def protection_only(self) -> bool:
        return bool(self.divergences) and all(d.explanation == PROTECTION_ONLY for d in self.divergences)

    def to_json(self) -> str:
        return json.dumps(
            {
                "agreement": self.agreement,
                "divergences": [d.to_json() for d in self.divergences],
                "rich_valid": self.rich_verdict.valid,
                "compiled_valid": self.compiled_verdict.valid,
            },
            indent=2,
        ) + "\n"

    def to_text(self) -> str:
        lines = [
            f"rich semantics:     {'valid' if self.rich_verdict.valid else 'invalid'}",
            f"compiled semantics: {'valid' if self.compiled_verdict.valid else 'invalid'}",
        ]
        if self.agreement:
            lines.append("agreement")
        else:
            n = len(self.divergences)
            lines.append(f"disagreement: {n} divergence{'s' if n != 1 else ''}")
            for d in self.divergences:
                lines.append(
                    f"  t={format_number(d.time)} {d.side} only: {d.kind}: {d.literal} [{d.explanation}]"
                )
        return "\n".join(lines) + "\n"


def _key(v: Violation, owner: Optional[Dict[int, int]] = None):
    def m(i):
        if i is None or owner is None:
            return i
        return owner[i]

    if v.kind == MUTEX:
        return (v.kind, v.time, frozenset((m(v.step_index), m(v.related_step))), None, v.detail)
    return (v.kind, v.time, m(v.step_index), m(v.related_step), v.detail)


def compare_verdicts(rich_domain, compiled_domain, problem, rich_plan, cmap: CompilationMap,
                     epsilon=DEFAULT_EPSILON) -> EquivalenceReport:
    """Validate both encodings and classify every difference between them."""
    rich_plan = list(rich_plan)
    compiled_plan, _, owner = lower_plan(rich_plan, rich_domain, problem, cmap)
    rich = validate(rich_domain, problem, rich_plan, RICH, epsilon)
    compiled = validate(compiled_domain, problem, compiled_plan, STRICT21, epsilon)

    clocks = cmap.generated_symbols
    kept, ignored = [], []
    for v in compiled.violations:
        if v.symbols and v.symbols <= clocks:
            ignored.append(v)
        else:
            kept.append(v)

    rich_by_key = {}
    for v in rich.violations:
        rich_by_key.setdefault(_key(v), v)
    comp_by_key = {}
    for v in kept:
        comp_by_key.setdefault(_key(v, owner), v)
    rich_set, comp_set = set(rich_by_key), set(comp_by_key)

    divergences = []
    for k in sorted(rich_set - comp_set, key=_sortable):
        v = rich_by_key[k]
        why = PROTECTION_ONLY if v.kind == PROTECTION else OTHER
        divergences.append(Divergence(v.time, v.detail, why, v.kind, "rich"))
    for k in sorted(comp_set - rich_set, key=_sortable):
        v = comp_by_key[k]
        divergences.append(Divergence(v.time, v.detail, OTHER, v.kind, "compiled"))
    divergences.sort(key=lambda d: (d.time, d.side, d.kind, d.literal))
    agreement = not divergences and rich.valid == (not kept)
    return EquivalenceReport(rich, compiled, agreement, tuple(divergences), tuple(ignored))


def _sortable(key):
    return tuple(str(x) for x in key)


def clock_filtered_valid(report: EquivalenceReport) -> bool:
    """Compiled validity once clock-only violations are set aside."""
    return len(report.compiled_verdict.violations) == len(report.ignored)


__all__ = [
    "Divergence",
    "EquivalenceReport",
    "LiftError",
    "LoweringError",
    "LoweringRecord",
    "OTHER",
    "PROTECTION_ONLY",
    "compare_verdicts",
    "lift_plan",
    "lower_plan",
]
