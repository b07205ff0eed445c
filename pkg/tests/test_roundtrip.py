import json
import random
from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from richpddl.compiler import compile_domain
from richpddl.model import PlanStep, format_plan
from richpddl.parser import parse_domain, parse_plan, parse_problem
from richpddl.roundtrip import (
    OTHER,
    PROTECTION_ONLY,
    LiftError,
    LoweringError,
    compare_verdicts,
    lift_plan,
    lower_plan,
)
from richpddl.validator import STRICT21, validate

from conftest import load_plan, load_problem
from randgen import random_case, random_plan

TURN = PlanStep(Fraction(0), "turn", ("a", "b"), Fraction(180))


@pytest.fixture(scope="module")
def compiled(rich):
    return compile_domain(rich)


def test_lower_turn(rich, problem, compiled):
    _, cmap = compiled
    low, records, owner = lower_plan([TURN], rich, problem, cmap)
    assert format_plan(low) == (
        "0: (turn a b) [180]\n"
        "0: (turn-seg0 a b) [10]\n"
        "10: (turn-seg1 a b) [160]\n"
        "170: (turn-seg2 a b) [10]\n"
    )
    (record,) = records
    assert record.tiles() and set(owner.values()) == {0}


def test_untransformed_steps_pass_through(rich, problem, compiled):
    _, cmap = compiled
    plan = load_plan("release-during-burn.plan")[1:]
    low, records, _ = lower_plan(plan, rich, problem, cmap)
    assert low == tuple(plan) and records == ()


def test_two_sequential_turns(rich, problem, compiled):
    _, cmap = compiled
    plan = parse_plan("0: (turn a b) [180]\n200: (turn b a) [180]\n")
    low, records, _ = lower_plan(plan, rich, problem, cmap)
    assert len(low) == 8
    first, second = records
    assert first.tiles() and second.tiles()
    assert max(s.time + s.duration for s in first.compiled_steps) <= min(s.time for s in second.compiled_steps)
    assert lift_plan(low, cmap) == plan


def test_lowering_inversion(rich, problem, compiled):
    _, cmap = compiled
    short = PlanStep(Fraction(0), "turn", ("a", "b"), Fraction(15))
    with pytest.raises(LoweringError, match="breakpoint-inversion"):
        lower_plan([short], rich, problem, cmap)


def test_lift_inverse(rich, problem, compiled):
    _, cmap = compiled
    plan = load_plan("image-during-coast.plan")
    low, _, _ = lower_plan(plan, rich, problem, cmap)
    assert lift_plan(low, cmap) == plan


def test_lift_mis_timed(rich, problem, compiled):
    _, cmap = compiled
    low = list(lower_plan([TURN], rich, problem, cmap)[0])
    low[2] = replace(low[2], time=Fraction(11))
    with pytest.raises(LiftError) as info:
        lift_plan(low, cmap)
    assert info.value.kind == LiftError.MIS_TIMED


def test_lift_orphan(rich, problem, compiled):
    _, cmap = compiled
    low = lower_plan([TURN], rich, problem, cmap)[0]
    with pytest.raises(LiftError) as info:
        lift_plan(low[1:], cmap)
    assert info.value.kind == LiftError.ORPHANED


def test_lift_missing(rich, problem, compiled):
    _, cmap = compiled
    low = lower_plan([TURN], rich, problem, cmap)[0]
    with pytest.raises(LiftError) as info:
        lift_plan(low[:2], cmap)
    assert info.value.kind == LiftError.MISSING


def test_turn_agreement(rich, problem, compiled):
    domain, cmap = compiled
    report = compare_verdicts(rich, domain, problem, [TURN], cmap)
    assert report.agreement and report.divergences == ()


def test_release_is_protection_only(rich, problem, compiled):
    domain, cmap = compiled
    report = compare_verdicts(rich, domain, problem, load_plan("release-during-burn.plan"), cmap)
    assert not report.agreement
    assert not report.rich_verdict.valid and report.compiled_verdict.valid
    (d,) = report.divergences
    assert d.explanation == PROTECTION_ONLY and d.time == 5
    assert "(controller-in-use)" in d.literal
    data = json.loads(report.to_json())
    assert data["divergences"][0]["explanation"] == PROTECTION_ONLY


def test_low_propellant_agreement(rich, compiled):
    domain, cmap = compiled
    low = load_problem("turn-problem-low-propellant.pddl")
    report = compare_verdicts(rich, domain, low, [TURN], cmap)
    assert report.agreement
    assert not report.rich_verdict.valid and not report.compiled_verdict.valid


def test_propositional_clock_encoding_agrees(rich, problem):
    domain, cmap = compile_domain(rich, tagged_clocks=False)
    for name in ("good.plan", "image-during-coast.plan", "bad-burn-overlap.plan"):
        assert compare_verdicts(rich, domain, problem, load_plan(name), cmap).agreement


# -- cross-envelope interleavings under propositional clocks ------------------

BURN = parse_domain(
    """(define (domain burner) (:predicates (hot) (done))
      (:durative-action burn :parameters () :duration (= ?duration 10)
        :condition (and)
        :effect (and (over [start (+ start 2)] (hot)) (at end (done)))))"""
)
BURN_PROBLEM = parse_problem("(define (problem b) (:domain burner) (:init) (:goal (done)))")


@pytest.mark.parametrize(
    "text",
    [
        # two overlapping envelopes share the propositional chain
        "0: (burn) [10]\n0: (burn-seg0) [2]\n2: (burn-seg1) [8]\n"
        "1: (burn) [10]\n1: (burn-seg0) [2]\n3: (burn-seg1) [8]\n",
        # the second envelope borrows the first one's tail segment
        "0: (burn) [10]\n0: (burn-seg0) [2]\n2: (burn-seg1) [8]\n5: (burn) [10]\n5: (burn-seg0) [2]\n",
        # segments of a later envelope drift outside it
        "0: (burn) [10]\n0: (burn-seg0) [2]\n2: (burn-seg1) [8]\n20: (burn) [10]\n19: (burn-seg0) [2]\n21: (burn-seg1) [8]\n",
        # segment chain with no envelope at all
        "0: (burn-seg0) [2]\n2: (burn-seg1) [8]\n",
        # chain skips the first segment
        "0: (burn) [10]\n2: (burn-seg1) [8]\n",
    ],
)
def test_cross_envelope_interleavings_are_invalid(text):
    domain, _ = compile_domain(BURN, tagged_clocks=False)
    assert not validate(domain, BURN_PROBLEM, parse_plan(text), STRICT21).valid


def test_single_burn_valid_after_compilation():
    domain, cmap = compile_domain(BURN, tagged_clocks=False)
    low, _, _ = lower_plan(parse_plan("0: (burn) [10]"), BURN, BURN_PROBLEM, cmap)
    assert validate(domain, BURN_PROBLEM, low, STRICT21).valid


# -- properties ---------------------------------------------------------------


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.booleans())
def test_lift_lower_identity_and_differential(seed, tagged):
    rng = random.Random(seed)
    domain, problem, compiled, cmap = random_case(rng, 0, tagged=tagged)
    plan = random_plan(rng, domain, problem)
    low, records, _ = lower_plan(plan, domain, problem, cmap)
    assert all(r.tiles() for r in records)
    assert lift_plan(low, cmap) == plan
    if tagged:
        report = compare_verdicts(domain, compiled, problem, plan, cmap)
        assert all(d.explanation != OTHER for d in report.divergences), report.to_text()
