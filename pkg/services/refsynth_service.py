"""
Refsynth Service - Main orchestration for checking and synthesis
Coordinates rule loading, LM parsing, solving, synthesis, solution checks,
graph export and the corpus benchmark.
"""
from __future__ import annotations

import random
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import structlog
from langfuse import observe

from services.heuristics import SearchBudget
from services.solver import Configuration, FuelExhausted, SolveResult, Solver, Status, initial_configuration
from services.synthesis import (
    BudgetExhausted,
    SearchTruncated,
    SolutionRecord,
    SoundnessViolation,
    SynthesisError,
    check_solution,
    synthesize,
)
from tools.constraints import Specification
from tools.dot_export import scope_graph_to_dot
from tools.holes import HoleId, LockedTarget
from tools.lm_frontend import (
    LmProgram,
    NotARefTerm,
    gen_constraint,
    locked_targets,
    parse_lm,
    pretty_program,
    pretty_ref,
    unlock,
)
from tools.terms import Term
from utils.config import Settings
from utils.specs import SpecLoader

log = structlog.get_logger(__name__)


def render_ref(t: Term) -> str:
    """Surface syntax of a reference term, or its canonical text if it is not one."""
    try:
        return pretty_ref(t)
    except NotARefTerm:
        return str(t)


@dataclass(frozen=True)
class CheckReport:
    status: Status
    configuration: Configuration
    failure: Optional[str] = None
    steps: int = 0

    @property
    def remaining(self) -> list[str]:
        return [str(c) for c in self.configuration.constraints]


@dataclass
class SynthReport:
    program: LmProgram
    targets: dict[HoleId, LockedTarget]
    records: list[SolutionRecord] = field(default_factory=list)
    truncated: Optional[str] = None
    # Wall time until each hole's first solution, or the whole search if none
    hole_ms: dict[HoleId, float] = field(default_factory=dict)

    def for_hole(self, hole: HoleId) -> list[SolutionRecord]:
        return [r for r in self.records if r.hole == hole]

    def refs(self, hole: HoleId) -> list[str]:
        return [render_ref(r.term) for r in self.for_hole(hole)]

    def lines(self) -> list[str]:
        return [r.render(render_ref) for r in self.records]

    def unlocked(self) -> str:
        """The program with each lock replaced by its first solution."""
        first = {}
        for record in self.records:
            first.setdefault(record.hole, record.term)
        return pretty_program(unlock(self.program, first))


@dataclass(frozen=True)
class BenchEntry:
    file: str
    status: str
    holes: int = 0
    solutions: int = 0
    hole_ms: tuple[float, ...] = ()
    error: str = ""
    refs: tuple[tuple[str, ...], ...] = ()

    def line(self) -> str:
        timings = ", ".join(f"{ms:.1f}" for ms in self.hole_ms)
        text = f"{{file: {self.file}, status: {self.status}, holes: {self.holes}, solutions: {self.solutions}, hole_ms: [{timings}]"
        if self.error:
            text += f", error: {self.error}"
        return text + "}"


@dataclass
class BenchReport:
    entries: list[BenchEntry]

    def counts(self) -> dict[str, int]:
        counts = {"Success": 0, "Timeout": 0, "Failure": 0}
        for entry in self.entries:
            counts[entry.status] += 1
        return counts

    def timings(self) -> dict[str, float]:
        """min / median / p90 / max over every hole of every file, in ms."""
        values = sorted(ms for entry in self.entries for ms in entry.hole_ms)
        if not values:
            return {}
        p90 = values[min(len(values) - 1, int(round(0.9 * (len(values) - 1))))]
        return {"min": values[0], "median": statistics.median(values), "p90": p90, "max": values[-1]}

    def table(self) -> str:
        total = len(self.entries) or 1
        lines = [f"{'Outcome':<10}{'Files':>7}{'Share':>8}"]
        for status, count in self.counts().items():
            lines.append(f"{status:<10}{count:>7}{100 * count / total:>7.0f}%")
        timings = self.timings()
        if timings:
            lines.append("")
            lines.append("Per-hole synthesis time (ms): " + ", ".join(f"{k} {v:.1f}" for k, v in timings.items()))
        return "\n".join(lines)

    def report(self) -> str:
        return "\n".join(entry.line() for entry in self.entries) + "\n"


class RefsynthService:
    """Service for type checking and synthesizing references in LM programs."""

    def __init__(self, settings: Optional[Settings] = None, loader: Optional[SpecLoader] = None):
        """
        Initialize the service.

        Args:
            settings: Runtime settings (defaults to Settings.from_env())
            loader: Rule-file loader (defaults to the bundled specs)
        """
        self.settings = settings or Settings.from_env()
        self.loader = loader or SpecLoader()

    def budget(self) -> SearchBudget:
        """Search limits from the settings."""
        return SearchBudget(
            wall_clock_ms=self.settings.timeout_ms,
            max_solutions_per_hole=self.settings.max_solutions,
            max_depth=self.settings.max_depth,
            max_branches=self.settings.max_branches,
        )

    def load_spec(self, spec: Optional[str] = None) -> Specification:
        return self.loader.load(spec or self.settings.spec)

    def solver(self, spec: Specification, seed: Optional[int] = None, tracer: Optional[Callable[[str], None]] = None) -> Solver:
        rng = random.Random(seed) if seed is not None else None
        return Solver(spec, fuel=self.settings.fuel, tracer=tracer, rng=rng)

    def solve(self, text: str, spec: Optional[str] = None, seed: Optional[int] = None, tracer=None) -> SolveResult:
        rules = self.load_spec(spec)
        goal, lock_vars = gen_constraint(parse_lm(text), rules.init)
        holes = {var: hole for hole, var in lock_vars.items()}
        return self.solver(rules, seed, tracer).solve(initial_configuration(goal, holes))

    @observe()
    def check(self, text: str, spec: Optional[str] = None, seed: Optional[int] = None, tracer=None) -> CheckReport:
        """
        Type check a program by exhaustive solving.

        Args:
            text: LM program text
            spec: Bundled spec name or rule-file path
            seed: Seed for random constraint selection (FIFO when None)
            tracer: Receives one line per solver step

        Returns:
            CheckReport with status SUCCESS, FAILURE or STUCK
        """
        result = self.solve(text, spec, seed, tracer)
        failure = str(result.failure) if result.failure is not None else None
        log.info("check_finished", status=result.status.value, steps=result.steps)
        return CheckReport(result.status, result.configuration, failure, result.steps)

    @observe()
    def graph(self, text: str, spec: Optional[str] = None) -> str:
        """DOT source of the (possibly partial) scope graph of a program."""
        result = self.solve(text, spec)
        return scope_graph_to_dot(result.configuration.graph, title="refsynth scope graph")

    @observe()
    def synthesize(self, text: str, spec: Optional[str] = None, budget: Optional[SearchBudget] = None) -> SynthReport:
        """
        Synthesize references for every lock of a program.

        Every solution is re-checked before it is reported.

        Args:
            text: LM program text with locks
            spec: Bundled spec name or rule-file path
            budget: Search limits (defaults to the settings' budget)

        Returns:
            SynthReport with the solutions in emission order

        Raises:
            TargetNotFound: a lock's target declaration is missing from the graph
            InitialTypeError: the program fails with its locks open
            BudgetExhausted: some hole has no solution within the budget
            SoundnessViolation: a solution failed its re-check
        """
        rules = self.load_spec(spec)
        program = parse_lm(text)
        targets = locked_targets(program)
        goal, lock_vars = gen_constraint(program, rules.init)
        report = SynthReport(program, targets)
        if not targets:
            return report

        # Step 1: Search
        solver = self.solver(rules)
        started = time.monotonic()
        events = synthesize(
            rules,
            goal,
            lock_vars,
            {hole: target.key_term() for hole, target in targets.items()},
            budget or self.budget(),
            heuristics=self.settings.heuristics,
            workers=self.settings.workers,
            solver=solver,
        )
        for event in events:
            if isinstance(event, SearchTruncated):
                report.truncated = event.reason
                continue
            # Step 2: Re-check before accepting
            verdict = check_solution(rules, goal, lock_vars, event, targets[event.hole].key_term(), solver)
            if not verdict.ok:
                log.error("soundness_violation", hole=str(event.hole), term=str(event.term), reason=verdict.reason)
                raise SoundnessViolation(event, verdict.reason)
            report.records.append(event)
            report.hole_ms.setdefault(event.hole, (time.monotonic() - started) * 1000)
        elapsed = (time.monotonic() - started) * 1000

        # Step 3: Every hole needs a solution
        missing = [hole for hole in sorted(targets) if not report.for_hole(hole)]
        for hole in missing:
            report.hole_ms[hole] = elapsed
        log.info("synthesis_finished", holes=len(targets), solutions=len(report.records), ms=round(elapsed, 1))
        if missing:
            raise BudgetExhausted(missing, report.records)
        return report

    def compare_modes(self, text: str, spec: Optional[str], report: SynthReport) -> Optional[str]:
        """Re-run with heuristics flipped; describe the first hole whose solution sets differ."""
        flipped = RefsynthService(self.settings.override(heuristics=not self.settings.heuristics), self.loader)
        mode = "plain" if self.settings.heuristics else "guided"
        try:
            other = flipped.synthesize(text, spec)
        except BudgetExhausted as e:
            return f"{mode} search found no solution: {e}"
        for hole in sorted(report.targets):
            mine, theirs = sorted(set(report.refs(hole))), sorted(set(other.refs(hole)))
            if mine != theirs:
                log.warning("bench_modes_disagree", hole=str(hole), mode=mode, found=mine, other=theirs)
                return f"{mode} search disagrees on {hole}: {mine} vs {theirs}"
        return None

    def bench_file(self, path: Path, spec: Optional[str] = None, compare: bool = False) -> BenchEntry:
        disagreement = None
        try:
            text = path.read_text(encoding="utf-8")
            report = self.synthesize(text, spec)
            if compare:
                disagreement = self.compare_modes(text, spec, report)
        except BudgetExhausted as e:
            return BenchEntry(path.name, "Timeout", solutions=len(e.records), error=str(e))
        except SoundnessViolation as e:
            return BenchEntry(path.name, "Failure", error=str(e))
        except (SynthesisError, FuelExhausted, ValueError, OSError) as e:
            return BenchEntry(path.name, "Failure", error=f"{type(e).__name__}: {e}")
        holes = sorted(report.targets)
        return BenchEntry(
            path.name,
            "Failure" if disagreement else "Success",
            holes=len(holes),
            solutions=len(report.records),
            hole_ms=tuple(report.hole_ms[h] for h in holes),
            refs=tuple(tuple(report.refs(h)) for h in holes),
            error=disagreement or "",
        )

    @observe()
    def bench(self, directory: str, spec: Optional[str] = None, designated_only: bool = False, compare: bool = False) -> BenchReport:
        """
        Synthesize every program of a corpus directory.

        Args:
            directory: Directory of .lm programs
            spec: Bundled spec name or rule-file path
            designated_only: Restrict to the files listed in DESIGNATED
            compare: Also run each file with heuristics flipped; differing
                solution sets make the file a Failure

        Returns:
            BenchReport, entries sorted by file name
        """
        root = Path(directory)
        if not root.is_dir():
            raise FileNotFoundError(f"Corpus directory not found: {root}")
        files = sorted(root.glob("*.lm"))
        if designated_only:
            listed = set(designated(root))
            files = [f for f in files if f.name in listed]

        workers = max(1, self.settings.workers)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                entries = list(pool.map(lambda f: self.bench_file(f, spec, compare), files))
        else:
            entries = [self.bench_file(f, spec, compare) for f in files]
        entries.sort(key=lambda e: e.file)
        report = BenchReport(entries)
        log.info("bench_finished", files=len(entries), **{k.lower(): v for k, v in report.counts().items()})
        return report


def designated(root: Path) -> list[str]:
    """File names listed in the corpus's DESIGNATED file, comments skipped."""
    listing = root / "DESIGNATED"
    if not listing.exists():
        raise FileNotFoundError(f"Designated list not found: {listing}")
    names = []
    for line in listing.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            names.append(line)
    return names
