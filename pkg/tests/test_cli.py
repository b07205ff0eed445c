import json
import subprocess
import sys

import pytest

from richpddl.cli import run

from conftest import fixture_path


def f(name):
    return str(fixture_path(name))


RICH = f("turn-rich.pddl")
PROBLEM = f("turn-problem.pddl")


def test_validate_good(capsys):
    assert run(["validate", RICH, PROBLEM, f("good.plan"), "--semantics", "rich"]) == 0
    assert capsys.readouterr().out == "Plan valid\n"


def test_validate_bad_burn(capsys):
    assert run(["validate", RICH, PROBLEM, f("bad-burn-overlap.plan"), "--semantics", "rich"]) == 1
    out = capsys.readouterr().out
    assert out.count("invariant") == 1 and "Plan invalid: 1 violation" in out


def test_validate_json(capsys):
    assert run(["validate", RICH, PROBLEM, f("bad-burn-overlap.plan"), "--format", "json"]) == 1
    data = json.loads(capsys.readouterr().out)
    assert [v["kind"] for v in data["violations"]] == ["invariant"]


def test_compile_then_parse(tmp_path, capsys):
    out, cmap = tmp_path / "out.pddl", tmp_path / "m.json"
    assert run(["compile", RICH, "-o", str(out), "--map", str(cmap)]) == 0
    assert run(["parse", str(out)]) == 0
    json.loads(cmap.read_text())
    assert "ok" in capsys.readouterr().out


def test_compile_to_stdout_untagged(capsys):
    assert run(["compile", RICH, "--untagged-clocks"]) == 0
    text = capsys.readouterr().out
    assert "(:durative-action turn-seg2" in text and "(finished-turn)" in text


def test_lower_and_lift(tmp_path, capsys):
    cmap, low, lifted = tmp_path / "m.json", tmp_path / "low.plan", tmp_path / "lifted.plan"
    assert run(["compile", RICH, "-o", str(tmp_path / "c.pddl"), "--map", str(cmap)]) == 0
    assert run(["lower", RICH, PROBLEM, f("good.plan"), "--map", str(cmap), "-o", str(low)]) == 0
    assert low.read_text().count("\n") == 4
    assert run(["lift", str(low), "--map", str(cmap), "-o", str(lifted)]) == 0
    assert lifted.read_text() == "0: (turn a b) [180]\n"
    assert run(["validate", str(tmp_path / "c.pddl"), PROBLEM, str(low), "--semantics", "strict21"]) == 0


def test_lift_orphan_is_error(tmp_path, capsys):
    cmap = tmp_path / "m.json"
    run(["compile", RICH, "-o", str(tmp_path / "c.pddl"), "--map", str(cmap)])
    plan = tmp_path / "orphan.plan"
    plan.write_text("0: (turn-seg0 a b) [10]\n")
    assert run(["lift", str(plan), "--map", str(cmap)]) == 2
    assert "orphaned segment" in capsys.readouterr().err


def test_check_protection_only(capsys):
    assert run(["check", RICH, PROBLEM, f("release-during-burn.plan")]) == 1
    out = capsys.readouterr().out
    assert "protection-only" in out and "other]" not in out


def test_check_agreement_json(capsys):
    assert run(["check", RICH, PROBLEM, f("good.plan"), "--format", "json", "--untagged-clocks"]) == 0
    assert json.loads(capsys.readouterr().out) == {
        "agreement": True,
        "divergences": [],
        "rich_valid": True,
        "compiled_valid": True,
    }


def test_parse_error_location(tmp_path, capsys):
    bad = tmp_path / "bad.pddl"
    bad.write_text("(define (domain x)\n  (:predicates (p)\n")
    assert run(["parse", str(bad)]) == 2
    err = capsys.readouterr().err
    assert err.startswith(f"{bad}:3:1:") and "Traceback" not in err


def test_missing_file(capsys):
    assert run(["parse", "no-such-file.pddl"]) == 2
    assert "no-such-file.pddl: error:" in capsys.readouterr().err


def test_unknown_action_in_plan(tmp_path, capsys):
    plan = tmp_path / "x.plan"
    plan.write_text("0: (fly a b) [3]\n")
    assert run(["validate", RICH, PROBLEM, str(plan)]) == 2
    assert "unknown action 'fly'" in capsys.readouterr().err


def test_strict_semantics_on_rich_domain(capsys):
    assert run(["validate", RICH, PROBLEM, f("good.plan"), "--semantics", "strict21"]) == 2
    assert "rich construct" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [[], ["bogus"], ["validate", RICH], ["validate", RICH, PROBLEM, "x", "--epsilon", "-1"]])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as info:
        run(argv)
    assert info.value.code == 2


def test_dump_is_reparsable(tmp_path, capsys):
    assert run(["parse", RICH, "--problem", PROBLEM, "--plan", f("good.plan"), "--dump"]) == 0
    out = capsys.readouterr().out
    assert "(:durative-action turn" in out and "0: (turn a b) [180]" in out


def test_plot_writes_figure(tmp_path, capsys):
    png = tmp_path / "timeline.png"
    assert run(["validate", RICH, PROBLEM, f("bad-burn-overlap.plan"), "--plot", str(png)]) == 1
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_byte_identical_invocations():
    cmd = [sys.executable, "-m", "richpddl", "check", RICH, PROBLEM, f("release-during-burn.plan"), "--format", "json"]
    first = subprocess.run(cmd, capture_output=True)
    second = subprocess.run(cmd, capture_output=True)
    assert first.returncode == 1
    assert first.stdout == second.stdout and first.stdout
