import random
import re
from pathlib import Path

import pytest

from uavmission.geometry import CellCoord, Heading
from uavmission.pddl import (ContractError, GroundingSizeError, LexError, ParseError, PDDLError, Plan,
                             SemanticError, applicable, apply, droneworld_domain, droneworld_text,
                             format_domain, format_problem, ground, parse_domain, parse_plan, parse_problem,
                             validate_plan)
from uavmission.planner import grid_problem

DATA = Path(__file__).parent / "data" / "pddl"
ERROR_FILES = sorted((DATA / "errors").glob("*.pddl"))
CLASSES = {"LexError": LexError, "ParseError": ParseError, "SemanticError": SemanticError}
EXPECT = re.compile(r"; expect: (\w+) (\S+)(?: line (\d+))?")


def _parse_file(path: Path):
    text = path.read_text()
    if "; domain: droneworld-scan" in text:
        return parse_problem(text, droneworld_domain(), path.name)
    return parse_domain(text, path.name)


def test_error_corpus_is_large_enough():
    assert len(ERROR_FILES) >= 20


@pytest.mark.parametrize("path", ERROR_FILES, ids=lambda p: p.stem)
def test_error_file_yields_documented_diagnostic(path):
    cls, code, line = EXPECT.search(path.read_text()).groups()
    with pytest.raises(PDDLError) as exc:
        _parse_file(path)
    err = exc.value
    assert type(err) is CLASSES[cls]
    assert err.code == code
    if line is not None:
        assert err.line == int(line)
    assert err.source == path.name
    assert path.name in str(err)


def test_lex_error_reports_column():
    with pytest.raises(LexError) as exc:
        parse_domain("(define (domain d)\n  (:predicates (p @)))")
    assert (exc.value.line, exc.value.col) == (2, 19)


GOLDEN = DATA / "golden"
DOMAINS = {"droneworld-scan": None, "courier": GOLDEN / "courier.domain.pddl",
           "minimal": GOLDEN / "minimal.domain.pddl"}
PROBLEMS = [("droneworld-scan", GOLDEN / "grid5.problem.pddl"),
            ("droneworld-scan", GOLDEN / "canonical-acquisition.problem.pddl"),
            ("courier", GOLDEN / "courier.problem.pddl")]


def _domain(name):
    path = DOMAINS[name]
    return droneworld_domain() if path is None else parse_domain(path.read_text(), path.name)


@pytest.mark.parametrize("name", sorted(DOMAINS))
def test_domain_round_trip(name):
    d = _domain(name)
    text = format_domain(d)
    again = parse_domain(text)
    assert again == d
    assert format_domain(again) == text


@pytest.mark.parametrize("dom,path", PROBLEMS, ids=lambda x: getattr(x, "stem", x))
def test_problem_round_trip(dom, path):
    d = _domain(dom)
    p = parse_problem(path.read_text(), d, path.name)
    text = format_problem(p)
    again = parse_problem(text, d)
    assert again == p
    assert format_problem(again) == text


def test_shipped_domain_prints_to_golden_bytes():
    assert format_domain(parse_domain(droneworld_text())) == (GOLDEN / "droneworld-scan.domain.pddl").read_text()


def test_generated_problem_prints_to_golden_bytes():
    p = grid_problem(5, 5, CellCoord(0, 0), Heading.E, threats=[CellCoord(2, 2), CellCoord(3, 1)],
                     targets=[CellCoord(4, 4)], final=CellCoord(4, 3), name="grid5")
    assert format_problem(p) == (GOLDEN / "grid5.problem.pddl").read_text()


def test_problem_init_is_a_set():
    d = _domain("courier")
    p = parse_problem((GOLDEN / "courier.problem.pddl").read_text(), d)
    assert len(p.init) == 7  # one road is listed twice


def test_case_insensitive_names():
    d = parse_domain("(DEFINE (DOMAIN Up) (:PREDICATES (Ready)) (:action Go :parameters () "
                     ":precondition (and) :effect (READY)))")
    assert d.name == "up"
    assert format_domain(d) == format_domain(parse_domain(format_domain(d).lower()))


def _courier():
    d = _domain("courier")
    return ground(d, parse_problem((GOLDEN / "courier.problem.pddl").read_text(), d))


def test_courier_plan_validates_with_costs():
    t = _courier()
    steps = ["(load box v1 depot)", "(drive v1 depot mill)", "(load crate v1 mill)", "(drive v1 mill depot)",
             "(unload crate v1 depot)", "(drive v1 depot mill)", "(drive v1 mill farm)", "(unload box v1 farm)"]
    report = validate_plan(t, steps)
    assert report.ok and report.total_cost == 4 * 3 + 4


def test_validate_reports_first_failing_step():
    t = _courier()
    report = validate_plan(t, ["(drive v1 depot mill)", "(unload box v1 mill)"])
    assert not report.valid
    assert report.failing_step == 1
    assert "loaded box v1" in report.reason
    report = validate_plan(t, ["(fly v1 depot farm)"])
    assert report.failing_step == 0 and "unknown action" in report.reason


def test_validate_distinguishes_goal_failure():
    report = validate_plan(_courier(), ["(drive v1 depot mill)"])
    assert report.valid and not report.achieved_goal and not report.ok


def test_apply_requires_applicability():
    t = _courier()
    drive = t.actions[t.lookup("(drive v1 depot mill)")]
    back = t.actions[t.lookup("(drive v1 mill depot)")]
    assert applicable(t.init, drive) and not applicable(t.init, back)
    s = apply(t.init, drive)
    assert applicable(s, back)
    with pytest.raises(ContractError):
        apply(t.init, back)


def test_plan_file_parsing():
    text = "; a plan\n(DRIVE v1 depot mill)\n(load box v1 depot) ; trailing\n; cost = 4\n"
    assert parse_plan(text) == ["(drive v1 depot mill)", "(load box v1 depot)"]
    with pytest.raises(ParseError) as exc:
        parse_plan("(drive (v1))")
    assert exc.value.code == "syntax.plan-step"


def test_plan_text_round_trip():
    t = _courier()
    plan = Plan.from_indices(t, [t.lookup("(load box v1 depot)"), t.lookup("(drive v1 depot mill)")])
    assert plan.cost == 4
    assert parse_plan(plan.to_text()) == list(plan.steps)
    assert plan.indices(t) == [t.lookup(s) for s in plan.steps]


DIRS = {"n": (0, 1), "e": (1, 0), "s": (0, -1), "w": (-1, 0)}
LEFT = {"n": "w", "w": "s", "s": "e", "e": "n"}
RIGHT = {v: k for k, v in LEFT.items()}


def _relaxed(cols, rows, start, heading, threats):
    """Delete-free fixpoint: every cell and heading some move sequence could make true."""
    cells, heads = {start}, {heading}
    grown = True
    while grown:
        grown = False
        for c in list(cells):
            for h in list(heads):
                for nd in (h, LEFT[h], RIGHT[h]):
                    n = (c[0] + DIRS[nd][0], c[1] + DIRS[nd][1])
                    if 0 <= n[0] < cols and 0 <= n[1] < rows and n not in threats:
                        if n not in cells or nd not in heads:
                            cells.add(n)
                            heads.add(nd)
                            grown = True
    return cells, heads


@pytest.mark.parametrize("seed", range(8))
def test_grounded_counts_match_brute_force(seed):
    rng = random.Random(seed)
    cols, rows = rng.randint(1, 6), rng.randint(1, 6)
    cells = [(c, r) for c in range(cols) for r in range(rows)]
    start = rng.choice(cells)
    threats = set(rng.sample([c for c in cells if c != start], min(len(cells) - 1, rng.randint(0, 3))))
    target = rng.choice([c for c in cells if c not in threats])
    p = grid_problem(cols, rows, CellCoord(*start), Heading.N,
                     threats=[CellCoord(*c) for c in threats], targets=[CellCoord(*target)])
    t = ground(droneworld_domain(), p)
    live, heads = _relaxed(cols, rows, start, "n", threats)

    def inside(c, d):
        n = (c[0] + DIRS[d][0], c[1] + DIRS[d][1])
        return 0 <= n[0] < cols and 0 <= n[1] < rows, n

    counts = {}
    for a in t.actions:
        counts[a.name] = counts.get(a.name, 0) + 1
    fwd = sum(1 for c in live for h in heads if inside(c, h)[0] and inside(c, h)[1] not in threats)
    left = sum(1 for c in live for h in heads if inside(c, LEFT[h])[0] and inside(c, LEFT[h])[1] not in threats)
    scans = sum(1 for c in live for h in heads if inside(c, h)[0])
    assert counts.get("move-forward", 0) == fwd
    assert counts.get("move-left", 0) == left
    assert counts.get("scan-forward", 0) == scans


def test_single_cell_grid_prunes_every_move():
    t = ground(droneworld_domain(), grid_problem(1, 1, CellCoord(0, 0), Heading.E))
    assert not any(a.name.startswith("move") for a in t.actions)


def test_grounding_is_deterministic():
    p = grid_problem(6, 4, CellCoord(1, 1), Heading.S, threats=[CellCoord(3, 2)], targets=[CellCoord(5, 3)])
    a = ground(droneworld_domain(), p)
    b = ground(droneworld_domain(), parse_problem(format_problem(p), droneworld_domain()))
    assert a.facts == b.facts
    assert [x.ident for x in a.actions] == [x.ident for x in b.actions]
    assert a.init == b.init and a.goal == b.goal
    assert [(x.name, x.args) for x in a.actions] == sorted((x.name, x.args) for x in a.actions)


def test_grounding_cap():
    with pytest.raises(GroundingSizeError):
        ground(droneworld_domain(), grid_problem(10, 10, CellCoord(0, 0), Heading.N), cap=50)


def test_threat_cells_are_never_entered():
    p = grid_problem(4, 4, CellCoord(0, 0), Heading.N, threats=[CellCoord(1, 1)])
    t = ground(droneworld_domain(), p)
    assert all("c1_1" != a.args[1] for a in t.actions if a.name.startswith("move"))
