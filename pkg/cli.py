"""
refsynth command line.
check | synth | graph | bench over LM programs.

Exit codes: 0 success, 1 type failure, 2 stuck, 3 I/O or parse error,
4 target not found, 5 no solution within the budget, 6 soundness violation.
"""
from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional

import click
from dotenv import load_dotenv

from services.refsynth_service import RefsynthService, render_ref
from services.solver import FuelExhausted, Status
from services.synthesis import BudgetExhausted, InitialTypeError, SoundnessViolation, TargetNotFound
from tools.constraints import SpecError
from tools.lm_frontend import LmParseError, UnknownLockTarget
from tools.terms import TermSyntaxError
from utils.config import Settings
from utils.log import configure_logging
from utils.tracing import init_tracing

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_STUCK = 2
EXIT_INPUT = 3
EXIT_TARGET_NOT_FOUND = 4
EXIT_BUDGET = 5
EXIT_SOUNDNESS = 6

_INPUT_ERRORS = (OSError, LmParseError, UnknownLockTarget, SpecError, TermSyntaxError)

_STATUS_EXIT = {Status.SUCCESS: EXIT_OK, Status.FAILURE: EXIT_FAILURE, Status.STUCK: EXIT_STUCK}


def _service(spec: Optional[str] = None, **flags) -> RefsynthService:
    settings = Settings.from_env().override(spec=spec, **flags)
    configure_logging(settings.log_level)
    init_tracing()
    return RefsynthService(settings)


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _heuristics(value: Optional[str]) -> Optional[bool]:
    return None if value is None else value == "on"


spec_option = click.option("--spec", help="Bundled spec name (lm, recmod) or rule-file path")
budget_options = [
    click.option("--max-solutions", type=click.IntRange(min=1), help="Solutions reported per hole"),
    click.option("--max-depth", type=click.IntRange(min=0), help="Speculative expansions per branch"),
    click.option("--timeout-ms", type=click.IntRange(min=1), help="Wall-clock budget of one search"),
    click.option("--heuristics", type=click.Choice(["on", "off"]), help="Guided search or plain enumeration"),
    click.option("--workers", type=click.IntRange(min=1), help="Branches (bench: files) processed in parallel"),
]


def with_budget(fn):
    for option in reversed(budget_options):
        fn = option(fn)
    return fn


@click.group()
def main():
    """Reference synthesis for scope-graph based type systems."""
    load_dotenv()


@main.command()
@click.argument("file", type=click.Path())
@spec_option
@click.option("--seed", type=int, help="Pick constraints in a seeded random order instead of FIFO")
@click.option("--trace", is_flag=True, help="Print one line per solver step")
def check(file: str, spec: Optional[str], seed: Optional[int], trace: bool):
    """Type check a program."""
    try:
        service = _service(spec)
        report = service.check(_read(file), seed=seed, tracer=click.echo if trace else None)
    except _INPUT_ERRORS as e:
        _fail(EXIT_INPUT, str(e))
    except FuelExhausted as e:
        _fail(EXIT_STUCK, str(e))

    if report.status is Status.SUCCESS:
        click.echo(f"ok ({report.steps} steps)")
    elif report.status is Status.FAILURE:
        click.echo(f"type error: {report.failure}")
    else:
        click.echo(f"stuck with {len(report.remaining)} constraints:")
        for line in report.remaining:
            click.echo(f"  {line}")
    sys.exit(_STATUS_EXIT[report.status])


@main.command()
@click.argument("file", type=click.Path())
@spec_option
@with_budget
@click.option("--emit-program", is_flag=True, help="Also print the program with every lock replaced by its first solution")
def synth(file: str, spec: Optional[str], max_solutions, max_depth, timeout_ms, heuristics, workers, emit_program: bool):
    """Synthesize references for the locks of a program."""
    try:
        service = _service(
            spec,
            max_solutions=max_solutions,
            max_depth=max_depth,
            timeout_ms=timeout_ms,
            heuristics=_heuristics(heuristics),
            workers=workers,
        )
        report = service.synthesize(_read(file))
    except _INPUT_ERRORS as e:
        _fail(EXIT_INPUT, str(e))
    except TargetNotFound as e:
        _fail(EXIT_TARGET_NOT_FOUND, str(e))
    except BudgetExhausted as e:
        for record in e.records:
            click.echo(record.render(render_ref))
        _fail(EXIT_BUDGET, str(e))
    except SoundnessViolation as e:
        _fail(EXIT_SOUNDNESS, str(e))
    except InitialTypeError as e:
        _fail(EXIT_FAILURE, str(e))
    except FuelExhausted as e:
        _fail(EXIT_STUCK, str(e))

    for line in report.lines():
        click.echo(line)
    if emit_program:
        click.echo()
        click.echo(report.unlocked(), nl=False)
    sys.exit(EXIT_OK)


@main.command()
@click.argument("file", type=click.Path())
@spec_option
def graph(file: str, spec: Optional[str]):
    """Print the scope graph of a program as DOT."""
    try:
        service = _service(spec)
        click.echo(service.graph(_read(file)), nl=False)
    except _INPUT_ERRORS as e:
        _fail(EXIT_INPUT, str(e))
    except FuelExhausted as e:
        _fail(EXIT_STUCK, str(e))


@main.command()
@click.argument("directory", type=click.Path())
@spec_option
@with_budget
@click.option("--report", "report_path", type=click.Path(), default="bench_report.txt", show_default=True,
              help="Machine-readable report, one line per file")
@click.option("--designated", is_flag=True, help="Only the programs listed in DESIGNATED")
@click.option("--compare", is_flag=True, help="Also run with heuristics flipped and fail files whose solution sets differ")
def bench(directory: str, spec: Optional[str], max_solutions, max_depth, timeout_ms, heuristics, workers,
          report_path: str, designated: bool, compare: bool):
    """Synthesize every program of a corpus and report outcomes and timings."""
    try:
        service = _service(
            spec,
            max_solutions=max_solutions,
            max_depth=max_depth,
            timeout_ms=timeout_ms,
            heuristics=_heuristics(heuristics),
            workers=workers,
        )
        report = service.bench(directory, designated_only=designated, compare=compare)
        Path(report_path).write_text(report.report(), encoding="utf-8")
    except _INPUT_ERRORS as e:
        _fail(EXIT_INPUT, str(e))

    click.echo(report.table())
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
