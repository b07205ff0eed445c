import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from richpddl.compiler import (
    CompilationMap,
    CompileError,
    collect_breakpoints,
    compile_action,
    compile_domain,
    segment_action,
)
from richpddl.model import (
    END,
    START,
    Const,
    FluentRef,
    Literal,
    NumericEffect,
    State,
    TimeInterval,
    TimePoint,
    eval_numexpr,
)
from richpddl.parser import parse_domain
from richpddl.printer import STRICT21, print_domain

from randgen import random_case

RCS = FluentRef("rcs-duration", ())


def _domain(body, preds="(p) (q)"):
    return parse_domain(f"(define (domain d) (:predicates {preds}) {body})")


def _action(cond="(and)", eff="(and)", duration="30", params=""):
    return (
        f"(:durative-action a :parameters ({params}) :duration (= ?duration {duration}) "
        f":condition {cond} :effect {eff})"
    )


def test_schedule_of_rich_turn(rich):
    assert collect_breakpoints(rich.action("turn")).points == (TimePoint(START, RCS), TimePoint(END, RCS))


def test_schedule_of_classic_turn(conservative):
    assert collect_breakpoints(conservative.action("turn")).points == ()


def test_schedule_ordering_convention():
    eff = "(and (at (+ start 3) (p)) (at (+ start 1) (q)) (at (- end 2) (not (p))))"
    action = _domain(_action(eff=eff)).action("a")
    assert collect_breakpoints(action).points == (
        TimePoint(START, Const(Fraction(1))),
        TimePoint(START, Const(Fraction(3))),
        TimePoint(END, Const(Fraction(2))),
    )


def test_segments_of_rich_turn(rich):
    turn = rich.action("turn")
    envelope, segments = segment_action(turn, collect_breakpoints(turn))
    assert len(segments) == 3
    seg0, seg1, seg2 = segments
    for seg in (seg0, seg2):
        assert Literal("controller-in-use", ()) in seg.start_effects
        assert Literal("vibration", ()) in seg.start_effects
        assert Literal("controller-in-use", (), False) in seg.end_effects
        assert Literal("vibration", (), False) in seg.end_effects
    assert not seg1.start_effects and not seg1.end_effects
    burns = [e for e in envelope.start.effects if isinstance(e.effect, NumericEffect)]
    assert len(burns) == 1
    assert any(isinstance(e, NumericEffect) for e in seg2.start_effects)


def test_single_breakpoint_effect_lands_on_second_segment():
    action = _domain(_action(eff="(at (+ start 5) (p))")).action("a")
    _, segments = segment_action(action, collect_breakpoints(action))
    assert len(segments) == 2
    assert segments[1].start_effects == [Literal("p", ())]
    assert segments[0].start_effects == []


def test_classic_action_single_empty_segment(conservative):
    turn = conservative.action("turn")
    _, segments = segment_action(turn, collect_breakpoints(turn))
    assert len(segments) == 1
    seg = segments[0]
    assert not seg.start_effects and not seg.end_effects and not seg.over_conditions


def test_rich_turn_compiles_to_four_actions(rich):
    actions, amap = compile_action(rich.action("turn"))
    assert [a.name for a in actions] == ["turn", "turn-seg0", "turn-seg1", "turn-seg2"]
    last = actions[-1]
    finished = [e for e in last.effects if e.time == TimePoint(START) and getattr(e.effect, "predicate", None) == amap.finished]
    assert finished, "finished must be a start effect of the final segment"
    assert amap.enabled == ("enabled-turn-0", "enabled-turn-1", "enabled-turn-2")


def test_classic_compiles_to_itself(conservative):
    for action in conservative.actions:
        actions, amap = compile_action(action)
        assert actions == [action] and amap is None
    compiled, cmap = compile_domain(conservative)
    assert compiled == conservative and len(cmap) == 0


def test_empty_domain():
    domain = parse_domain("(define (domain e))")
    compiled, cmap = compile_domain(domain)
    assert compiled == domain and len(cmap) == 0


def test_generated_declarations(rich):
    turn_only = rich.__class__(**{**rich.__dict__, "actions": (rich.action("turn"),)})
    compiled, cmap = compile_domain(turn_only)
    assert len(compiled.actions) == 4
    assert len(compiled.predicates) - len(rich.predicates) == 5
    assert len(compiled.functions) - len(rich.functions) == 1
    assert parse_domain(print_domain(compiled, STRICT21)) == compiled


def test_coast_duration_is_160(rich, problem):
    actions, amap = compile_action(rich.action("turn"))
    coast = actions[2]
    bindings = {"?current-target": "a", "?new-target": "b"}
    state = State.initial(problem)
    envelope_assign = next(
        e.effect for e in actions[0].effects if isinstance(e.effect, NumericEffect) and e.effect.op == "assign"
    )
    value = eval_numexpr(envelope_assign.expr, bindings, state)
    assert value == 180
    fluents = dict(state.fluents)
    fluents[("turn-duration", ("a", "b"))] = value
    assert eval_numexpr(coast.duration, bindings, State(state.facts, fluents)) == 160


def test_untagged_clocks_have_no_arguments(rich):
    compiled, cmap = compile_domain(rich, tagged_clocks=False)
    generated = cmap.generated_symbols
    for name, params in compiled.predicates + compiled.functions:
        if name in generated:
            assert params == ()
    seg1 = compiled.action("turn-seg1")
    assert seg1.parameters == ()


def test_name_clash_gets_suffix():
    domain = _domain(_action(eff="(at (+ start 5) (p))"), preds="(p) (active-a)")
    compiled, cmap = compile_domain(domain)
    assert cmap["a"].active == "active-a-gen1"


def test_contradicting_effects_at_one_instant_rejected():
    eff = "(and (over [start (+ start 5)] (p)) (at start (not (p))))"
    with pytest.raises(CompileError):
        compile_domain(_domain(_action(eff=eff)))


def test_inverted_interval_rejected():
    eff = "(over [(+ start 5) (+ start 2)] (p))"
    with pytest.raises(CompileError):
        compile_domain(_domain(_action(eff=eff)))


def test_map_json_roundtrip(rich):
    _, cmap = compile_domain(rich)
    assert CompilationMap.from_json(cmap.to_json()) == cmap


# -- structural invariants over random domains ------------------------------


def _chain_ok(compiled, amap):
    producers, consumers = {}, {}
    for action in compiled.actions:
        for eff in action.effects:
            e = eff.effect
            if isinstance(e, Literal) and e.positive and e.predicate in amap.enabled:
                producers.setdefault(e.predicate, []).append(action.name)
        for cond in action.conditions:
            if isinstance(cond.time, TimeInterval) and cond.time.is_full_span:
                for part in cond.condition.parts:
                    if isinstance(part, Literal) and part.predicate in amap.enabled:
                        consumers.setdefault(part.predicate, []).append(action.name)
    for name in amap.enabled:
        assert len(producers.get(name, [])) == 1, name
        assert len(consumers.get(name, [])) == 1, name
    last = compiled.action(amap.segments[-1].name)
    assert any(e.time == TimePoint(START) and isinstance(e.effect, Literal)
               and e.effect.predicate == amap.finished and e.effect.positive for e in last.effects)
    env = compiled.action(amap.envelope)
    assert any(
        c.time == TimePoint(END) and isinstance(part, Literal) and part.predicate == amap.finished
        for c in env.conditions
        for part in c.condition.parts
    )


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.booleans())
def test_chain_integrity_and_tiling(seed, tagged):
    rng = random.Random(seed)
    domain, problem, compiled, cmap = random_case(rng, 0, tagged=tagged)
    state = State.initial(problem)
    for name, amap in cmap.items():
        _chain_ok(compiled, amap)
        action = domain.action(name)
        args = ("o1",) * len(action.parameters)
        bindings = dict(zip(action.parameter_names, args))
        duration = eval_numexpr(action.duration, bindings, state)
        fluents = dict(state.fluents)
        if amap.duration_fluent:
            clock_args = args if amap.tagged else ()
            fluents[(amap.duration_fluent, clock_args)] = duration
        seg_state = State(state.facts, fluents)
        total = sum(
            eval_numexpr(compiled.action(seg.name).duration, bindings, seg_state) for seg in amap.segments
        )
        assert total == duration


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_identity_exactly_on_classic(seed):
    rng = random.Random(seed)
    domain, _, compiled, cmap = random_case(rng, 0, rich=rng.random() < 0.5)
    for action in domain.actions:
        out, amap = compile_action(action)
        classic = not collect_breakpoints(action).points and not any(
            isinstance(e.time, TimeInterval) for e in action.effects
        ) and all(not isinstance(c.time, TimeInterval) or c.time.is_full_span for c in action.conditions)
        assert (out == [action]) == classic
