import json
from pathlib import Path

from click.testing import CliRunner

from uavmission.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, main
from uavmission.scenario import default_scenario_path

GOLDEN = Path(__file__).parent / "data" / "pddl" / "golden"
DOMAIN = str(GOLDEN / "droneworld-scan.domain.pddl")
GRID5 = str(GOLDEN / "grid5.problem.pddl")


def _invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_plan_and_validate(tmp_path):
    res = _invoke("plan", DOMAIN, GRID5)
    assert res.exit_code == EXIT_OK, res.output
    assert "; cost = " in res.output
    plan = tmp_path / "grid5.plan"
    plan.write_text(res.output)
    ok = _invoke("validate", DOMAIN, GRID5, plan)
    assert ok.exit_code == EXIT_OK and ok.output.startswith("valid:")
    plan.write_text("(move-forward c0_0 c0_1 n)\n")
    bad = _invoke("validate", DOMAIN, GRID5, plan)
    assert bad.exit_code == EXIT_FAIL and "step 1" in bad.output


def test_plan_reports_budget_and_bad_input(tmp_path):
    assert _invoke("plan", DOMAIN, GRID5, "--node-budget", 2).exit_code == EXIT_FAIL
    broken = tmp_path / "broken.pddl"
    broken.write_text("(define (problem p) (:domain droneworld-scan) (:objects x - nowhere) (:init) (:goal (and)))")
    res = _invoke("plan", DOMAIN, broken)
    assert res.exit_code == EXIT_INPUT
    assert "semantic.undeclared-type" in res.output


def test_policy_mode():
    res = _invoke("plan", DOMAIN, GRID5, "--mode", "policy")
    assert res.exit_code == EXIT_OK


def test_run_score_and_export(tmp_path):
    out = tmp_path / "run"
    res = _invoke("run", default_scenario_path(), "--out", out)
    assert res.exit_code == EXIT_OK, res.output
    assert "status: mission-complete" in res.output
    assert "score = (D_baseline - D_DP) / D_baseline x 100" in res.output
    assert "problem hash matches" in res.output
    log = out / "mission_log.jsonl"
    s = _invoke("score", log)
    assert s.exit_code == EXIT_OK and "score =" in s.output
    summary = _invoke("export", log, "--format", "summary")
    assert json.loads(summary.output)["status"] == "mission-complete"
    target = tmp_path / "t.csv"
    assert _invoke("export", log, "--format", "trajectory-csv", "--out", target).exit_code == EXIT_OK
    assert target.read_text().startswith("tick,x,y,alt,course\n")


def test_score_detects_tampering(tmp_path):
    out = tmp_path / "run"
    _invoke("run", default_scenario_path(), "--out", out)
    log = out / "mission_log.jsonl"
    lines = log.read_text().splitlines()
    for i, line in enumerate(lines):
        rec = json.loads(line)
        if rec["kind"] == "score":
            rec["payload"]["score"] += 1.0
            lines[i] = json.dumps(rec)
    log.write_text("\n".join(lines) + "\n")
    assert _invoke("score", log).exit_code == EXIT_FAIL


def test_unreadable_inputs(tmp_path):
    garbage = tmp_path / "log.jsonl"
    garbage.write_text("not json\n")
    assert _invoke("score", garbage).exit_code != EXIT_OK
    bad = tmp_path / "s.yaml"
    bad.write_text("area: {side: -1}\n")
    assert _invoke("run", bad).exit_code != EXIT_OK
