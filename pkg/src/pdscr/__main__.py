"""
CLI interface to pdscr
"""

import sys
import logging
from json import dumps
from typing import List, Optional, Sequence

import click

from .casefile import bundled_case_path, diagnose
from .exceptions import (
    CaseValidationError,
    InfeasibleError,
    SolverConfigError,
    SolverLimitError,
    StageError,
    StructuralError,
)
from .log import DEFAULT_LOGLEVEL
from .mipdms import CRITERIA
from .pipeline import Runner, RunManifest

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER_LIMIT = 4

# runner object for all commands
runner: Optional[Runner] = None

case_option = click.option(
    "--case",
    "case_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Case file (JSON); the bundled 6-bus case when omitted",
)
out_option = click.option("--out", type=click.Path(file_okay=False), default=None, help="Run directory")
seed_option = click.option("--seed", type=int, default=None, help="Override the scenario seed")
eps_option = click.option("--eps-points", type=int, default=None, help="Override the day-ahead ε grid size")
count_option = click.option("--scenarios", "scenario_count", type=int, default=None, help="Override the scenario count")
criterion_option = click.option(
    "--criterion",
    type=click.Choice(list(CRITERIA) + ["both"]),
    default="both",
    help="Profit distribution rule(s) for the intraday stage",
)


def exit_code(e: BaseException) -> int:
    """
    >>> exit_code(InfeasibleError("x")), exit_code(SolverLimitError("x")), exit_code(ValueError())
    (3, 4, 1)
    """
    if isinstance(e, StageError) and e.__cause__ is not None:
        return exit_code(e.__cause__)
    if isinstance(e, CaseValidationError):
        return EXIT_VALIDATION
    if isinstance(e, (InfeasibleError, StructuralError)):
        return EXIT_INFEASIBLE
    if isinstance(e, (SolverLimitError, SolverConfigError)):
        return EXIT_SOLVER_LIMIT
    return EXIT_FAILED


def _case(case_path: Optional[str]) -> str:
    return case_path if case_path is not None else bundled_case_path()


def _criteria(criterion: str) -> List[str]:
    return list(CRITERIA) if criterion == "both" else [criterion]


def _run(
    stages: Sequence[str],
    case_path: Optional[str],
    out: Optional[str],
    criterion: str = "both",
    seed: Optional[int] = None,
    eps_points: Optional[int] = None,
    scenario_count: Optional[int] = None,
) -> None:
    try:
        manifest: RunManifest = runner.run(  # type: ignore[union-attr]
            _case(case_path),
            stages=stages,
            criteria=_criteria(criterion),
            out=out,
            seed=seed,
            eps_points=eps_points,
            scenario_count=scenario_count,
        )
    except (StageError, CaseValidationError) as e:
        click.echo(str(e), err=True)
        if isinstance(e, CaseValidationError):
            for d in e.diagnostics:
                click.echo(str(d), err=True)
        sys.exit(exit_code(e))
    click.echo(dumps({"run_dir": manifest.run_dir, "run_id": manifest.run_id, "artifacts": sorted(manifest.artifacts)}))


@click.group()
@click.option("--cache-dir", type=click.Path(), help="Override default cache directory location")
@click.option("--debug/--no-debug", is_flag=True, default=False, help="Increase log verbosity")
@click.option("--dump-lp", type=click.Path(file_okay=False), default=None, help="Write every solved problem as LP text")
def main(cache_dir: str, debug: bool, dump_lp: Optional[str]) -> None:
    global runner
    runner = Runner(
        loglevel=logging.DEBUG if debug else DEFAULT_LOGLEVEL,
        cache_dir=cache_dir,
        dump_lp=dump_lp,
    )


@main.command()
@case_option
@click.option("--json", "as_json", is_flag=True, default=False, help="Print diagnostics as JSON")
def validate(case_path: Optional[str], as_json: bool) -> None:
    """
    Check a case file; exits 2 when there are diagnostics
    """
    path = _case(case_path)
    _, diags = diagnose(path)
    if as_json:
        click.echo(dumps([d.to_dict() for d in diags]))
    elif diags:
        for d in diags:
            click.echo(str(d))
    else:
        click.echo(f"{path}: ok")
    sys.exit(EXIT_VALIDATION if diags else EXIT_OK)


@main.command()
@case_option
@eps_option
@out_option
def dayahead(case_path: Optional[str], eps_points: Optional[int], out: Optional[str]) -> None:
    """Day-ahead ε sweep, its front and the compromise dispatch"""
    _run(["dayahead"], case_path, out, eps_points=eps_points)


@main.command()
@case_option
@seed_option
@count_option
@out_option
def scenarios(case_path: Optional[str], seed: Optional[int], scenario_count: Optional[int], out: Optional[str]) -> None:
    """Sample wind scenarios and pick the representative ones"""
    _run(["scenarios"], case_path, out, seed=seed, scenario_count=scenario_count)


@main.command()
@case_option
@seed_option
@count_option
@eps_option
@criterion_option
@out_option
def intraday(
    case_path: Optional[str],
    seed: Optional[int],
    scenario_count: Optional[int],
    eps_points: Optional[int],
    criterion: str,
    out: Optional[str],
) -> None:
    """Cooperative re-dispatch of the selected scenarios"""
    _run(["intraday"], case_path, out, criterion, seed, eps_points, scenario_count)


@main.command()
@case_option
@seed_option
@count_option
@eps_option
@criterion_option
@out_option
def report(
    case_path: Optional[str],
    seed: Optional[int],
    scenario_count: Optional[int],
    eps_points: Optional[int],
    criterion: str,
    out: Optional[str],
) -> None:
    """Comparison tables and figures across the held-fixed and cooperative cases"""
    _run(["report"], case_path, out, criterion, seed, eps_points, scenario_count)


@main.command()
@case_option
@seed_option
@count_option
@eps_option
@criterion_option
@out_option
def pipeline(
    case_path: Optional[str],
    seed: Optional[int],
    scenario_count: Optional[int],
    eps_points: Optional[int],
    criterion: str,
    out: Optional[str],
) -> None:
    """Every stage, writing all artifacts and the manifest"""
    _run(["dayahead", "scenarios", "intraday", "report"], case_path, out, criterion, seed, eps_points, scenario_count)


if __name__ == "__main__":
    main()
