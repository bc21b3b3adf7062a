"""Command-line entry point: run scenarios, plan, validate, score and export."""
from __future__ import annotations

import statistics
import sys
from pathlib import Path

import click

from .pddl import PDDLError, ground, parse_domain, parse_plan, parse_problem, validate_plan
from .planner.search import SearchBudgetError, SolverConfig, solve
from .planner.service import prepare_task
from .scenario import (FORMATS, ConfigError, ExportError, LogError, MissionLog, ScoreError, ScoreReport,
                       audit_planner_traffic, export, load_config, run_scenario)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_log(path: str) -> MissionLog:
    try:
        return MissionLog.read(path)
    except (OSError, LogError, ValueError) as exc:
        raise click.ClickException(f"cannot read mission log {path}: {exc}") from exc


@click.group()
def main() -> None:
    """UAV target-acquisition missions on a deterministic simulator."""


@main.command()
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Write the run directory here.")
@click.option("--sweep", type=int, default=0, help="Also run this many consecutive seeds and report the score spread.")
def run(scenario: str, seed: int | None, out_dir: str | None, sweep: int) -> None:
    """Fly SCENARIO end to end and print the score report."""
    try:
        cfg = load_config(scenario, seed)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc
    res = run_scenario(cfg, out_dir)
    audits = audit_planner_traffic(res.log)
    click.echo(f"status: {res.status}" + (f" (stage {res.stage})" if res.stage else ""))
    click.echo(f"dp requests: {res.dp_requests}  fallback: {'yes' if res.fallback else 'no'}")
    for a in audits:
        click.echo(f"dp request {a.msg_id} at tick {a.tick}: {a.status}, problem hash "
                   f"{'matches' if a.hash_matches else 'MISMATCH'}, plan "
                   f"{'n/a' if a.plan_valid is None else 'valid' if a.plan_valid else 'INVALID'}")
    if res.report is not None:
        click.echo(res.report.formula())
    if res.out_dir is not None:
        click.echo(f"run directory: {res.out_dir}")
    ok = res.ok and all(a.ok for a in audits)
    if sweep > 0:
        scores = []
        for s in range(cfg.seed, cfg.seed + sweep):
            r = run_scenario(cfg.with_seed(s))
            scores.append(None if r.report is None else r.report.score)
            click.echo(f"seed {s}: {r.status}, score "
                       f"{'n/a' if r.report is None else f'{r.report.score:.3f}%'}")
        got = [x for x in scores if x is not None]
        if got:
            spread = f"min {min(got):.3f}  median {statistics.median(got):.3f}  max {max(got):.3f}"
            click.echo(f"sweep over {len(scores)} seeds, {len(got)} scored: {spread}")
    sys.exit(EXIT_OK if ok else EXIT_FAIL)


@main.command()
@click.argument("domain", type=click.Path(exists=True, dir_okay=False))
@click.argument("problem", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["optimal", "policy"]), default="optimal")
@click.option("--node-budget", type=int, default=SolverConfig.node_budget)
@click.option("--threats", default="hard", help="'hard' or 'soft:<penalty>'.")
def plan(domain: str, problem: str, mode: str, node_budget: int, threats: str) -> None:
    """Solve PROBLEM under DOMAIN and print the plan."""
    try:
        cfg = SolverConfig(mode=mode, node_budget=node_budget, threats=threats)
        dom = parse_domain(_read(domain), domain)
        task = prepare_task(dom, parse_problem(_read(problem), dom, problem), cfg)
    except (PDDLError, ValueError) as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_INPUT)
    try:
        res = solve(task, cfg)
    except SearchBudgetError as exc:
        click.echo(f"; budget exhausted: {exc}")
        sys.exit(EXIT_FAIL)
    if not res.solved:
        click.echo(f"; {res.status} ({res.expanded} expanded)")
        sys.exit(EXIT_FAIL)
    click.echo(res.plan.to_text(), nl=False)
    click.echo(f"; expanded = {res.expanded}")


@main.command()
@click.argument("domain", type=click.Path(exists=True, dir_okay=False))
@click.argument("problem", type=click.Path(exists=True, dir_okay=False))
@click.argument("plan_file", metavar="PLAN", type=click.Path(exists=True, dir_okay=False))
def validate(domain: str, problem: str, plan_file: str) -> None:
    """Check that PLAN is executable in PROBLEM and reaches its goal."""
    try:
        dom = parse_domain(_read(domain), domain)
        task = ground(dom, parse_problem(_read(problem), dom, problem))
        steps = parse_plan(_read(plan_file), plan_file)
    except PDDLError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_INPUT)
    report = validate_plan(task, steps)
    if report.ok:
        click.echo(f"valid: {len(steps)} steps, cost {report.total_cost}")
        sys.exit(EXIT_OK)
    where = "" if report.failing_step is None else f"step {report.failing_step + 1}: "
    click.echo(f"invalid: {where}{report.reason}")
    sys.exit(EXIT_FAIL)


@main.command()
@click.argument("log_file", metavar="LOG", type=click.Path(exists=True, dir_okay=False))
def score(log_file: str) -> None:
    """Recompute the score from the distances recorded in LOG."""
    log = _load_log(log_file)
    rec = log.first("score")
    if rec is None:
        click.echo("no score record: the mission never reached the planning branch")
        sys.exit(EXIT_FAIL)
    try:
        report = ScoreReport.from_distances(rec.payload["d_baseline"], rec.payload["d_dp"])
    except (KeyError, ScoreError) as exc:
        raise click.ClickException(f"bad score record: {exc}") from exc
    click.echo(report.formula())
    consistent = abs(report.score - float(rec.payload["score"])) <= 1e-9
    if not consistent:
        click.echo(f"logged score {rec.payload['score']} disagrees with the recomputed value")
    sys.exit(EXIT_OK if consistent else EXIT_FAIL)


@main.command(name="export")
@click.argument("log_file", metavar="LOG", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(FORMATS), required=True)
@click.option("--out", "out_file", type=click.Path(dir_okay=False), default=None, help="Output file (default stdout).")
def export_cmd(log_file: str, fmt: str, out_file: str | None) -> None:
    """Convert LOG to a trajectory CSV, GeoJSON paths or a JSON summary."""
    log = _load_log(log_file)
    try:
        text = export(log, fmt)
    except ExportError as exc:
        raise click.ClickException(str(exc)) from exc
    if out_file is None:
        click.echo(text, nl=False)
    else:
        Path(out_file).write_text(text, encoding="utf-8")


if __name__ == "__main__":
    main()
