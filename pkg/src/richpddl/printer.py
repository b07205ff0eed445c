"""Deterministic pretty-printing of domains and problems.

``rich`` output may contain interior time points and interval effects;
``strict21`` output refuses them so the text is valid plain PDDL2.1.
"""

from __future__ import annotations

from .model import (
    Domain,
    Problem,
    TimeInterval,
    format_atom,
    format_number,
    is_rich_time,
)

RICH = "rich"
STRICT21 = "strict21"
DIALECTS = (RICH, STRICT21)


class StrictOutputError(ValueError):
    """A rich construct was found while printing strict PDDL2.1."""

    def __init__(self, action, construct):
        self.action = action
        self.construct = construct
        super().__init__(f"rich construct in strict output: action {action!r}, {construct}")


def _typed(pairs, default="object"):
    out, group, group_type = [], [], None
    for name, typ in pairs:
        if typ != group_type and group:
            out.append(_group(group, group_type, default))
            group = []
        group.append(name)
        group_type = typ
    if group:
        out.append(_group(group, group_type, default))
    return " ".join(out)


def _group(names, typ, default):
    if typ == default:
        return " ".join(names)
    return " ".join(names) + " - " + typ


def _decl(name, params):
    inner = _typed(params)
    return f"({name} {inner})" if inner else f"({name})"


def _block(keyword, lines, indent):
    pad = " " * indent
    if not lines:
        return [f"{pad}{keyword} (and)"]
    if len(lines) == 1:
        return [f"{pad}{keyword} {lines[0]}"]
    body = [f"{pad}  {line}" for line in lines]
    body[-1] += ")"
    return [f"{pad}{keyword} (and"] + body


def first_rich_construct(action):
    """Describe the first construct strict PDDL2.1 cannot express, or None."""
    for cond in action.conditions:
        if isinstance(cond.time, TimeInterval):
            if not cond.time.is_full_span:
                bad = next((tp for tp in (cond.time.lo, cond.time.hi) if not tp.is_endpoint), None)
                if bad is not None:
                    return f"interior time point {bad} in {cond}"
                return f"interval condition {cond.time} in {cond}"
        elif is_rich_time(cond.time):
            return f"interior time point {cond.time} in {cond}"
    for eff in action.effects:
        if isinstance(eff.time, TimeInterval):
            bad = next((tp for tp in (eff.time.lo, eff.time.hi) if not tp.is_endpoint), None)
            if bad is not None:
                return f"interior time point {bad} in {eff}"
            return f"interval effect in {eff}"
        if is_rich_time(eff.time):
            return f"interior time point {eff.time} in {eff}"
    return None


def _effect_str(eff):
    if isinstance(eff.time, TimeInterval):
        # interval effects always print with brackets, even full-span
        return f"(over {eff.time} {eff.effect})"
    return str(eff)


def print_action(action, dialect=RICH, indent=2):
    if dialect == STRICT21:
        bad = first_rich_construct(action)
        if bad is not None:
            raise StrictOutputError(action.name, bad)
    pad = " " * indent
    lines = [f"{pad}(:durative-action {action.name}"]
    lines.append(f"{pad}  :parameters ({_typed(action.parameters)})")
    lines.append(f"{pad}  :duration (= ?duration {action.duration})")
    lines += _block(":condition", [str(c) for c in action.conditions], indent + 2)
    lines += _block(":effect", [_effect_str(e) for e in action.effects], indent + 2)
    lines[-1] += ")"
    return "\n".join(lines)


def print_domain(domain: Domain, dialect: str = RICH) -> str:
    """Render ``domain`` as PDDL text in the given dialect."""
    if dialect not in DIALECTS:
        raise ValueError(f"unknown dialect {dialect!r}")
    lines = [f"(define (domain {domain.name})"]
    if domain.requirements:
        lines.append(f"  (:requirements {' '.join(domain.requirements)})")
    if domain.types:
        lines.append(f"  (:types {_typed(domain.types)})")
    if domain.constants:
        lines.append(f"  (:constants {_typed(domain.constants)})")
    if domain.predicates:
        lines.append("  (:predicates")
        lines += [f"    {_decl(n, p)}" for n, p in domain.predicates]
        lines[-1] += ")"
    if domain.functions:
        lines.append("  (:functions")
        lines += [f"    {_decl(n, p)}" for n, p in domain.functions]
        lines[-1] += ")"
    for action in domain.actions:
        lines.append("")
        lines.append(print_action(action, dialect))
    lines.append(")")
    return "\n".join(lines) + "\n"


def print_problem(problem: Problem) -> str:
    lines = [f"(define (problem {problem.name})", f"  (:domain {problem.domain_name})"]
    if problem.objects:
        lines.append(f"  (:objects {_typed(problem.objects)})")
    init = [str(lit) for lit in problem.init_literals]
    init += [f"(= {format_atom(k)} {format_number(v)})" for k, v in problem.init_fluents]
    lines.append("  (:init")
    lines += [f"    {i}" for i in init]
    lines[-1] += ")"
    goal = problem.goal
    lines.append(f"  (:goal {goal if goal.parts else '(and)'})")
    lines.append(")")
    return "\n".join(lines) + "\n"

