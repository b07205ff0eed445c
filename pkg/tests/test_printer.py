import pytest

from richpddl.parser import parse_domain
from richpddl.printer import STRICT21, StrictOutputError, first_rich_construct, print_domain

from conftest import load_domain


def test_hand_decomposition_strict_roundtrip(hand_decomposed):
    assert parse_domain(print_domain(hand_decomposed, STRICT21)) == hand_decomposed


def test_rich_turn_rejected_in_strict(rich):
    with pytest.raises(StrictOutputError) as info:
        print_domain(rich, STRICT21)
    assert info.value.action == "turn"
    assert "(- end (rcs-duration))" in str(info.value)


def test_rich_roundtrip(rich):
    assert parse_domain(print_domain(rich)) == rich


def test_conservative_is_strict(conservative):
    assert all(first_rich_construct(a) is None for a in conservative.actions)
    assert parse_domain(print_domain(conservative, STRICT21)) == conservative


def test_output_is_deterministic(rich):
    assert print_domain(rich) == print_domain(load_domain("turn-rich.pddl"))


def test_unknown_dialect(rich):
    with pytest.raises(ValueError):
        print_domain(rich, "pddl3")
