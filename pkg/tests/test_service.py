"""Tests for settings, rule-file loading and the service layer."""

import pytest

from conftest import CORPUS, IMPORT_SHADOWS, LOCAL_OR_QUALIFIED, LOCKED_IMPORT, wide_budget
from services.refsynth_service import BenchEntry, BenchReport, RefsynthService, designated, render_ref
from services.solver import Status
from services.synthesis import SolutionCheck, SoundnessViolation
from tools.holes import HoleId
from tools.terms import parse_term
from utils.config import Settings
from utils.specs import SpecLoader


class TestSettings:
    """Tests for environment configuration."""

    def test_defaults(self, monkeypatch):
        """Unset variables keep the defaults."""
        for name in ["REFSYNTH_MAX_DEPTH", "REFSYNTH_HEURISTICS", "REFSYNTH_SPEC"]:
            monkeypatch.delenv(name, raising=False)
        settings = Settings.from_env()
        assert (settings.max_depth, settings.heuristics, settings.spec) == (8, True, "lm")

    def test_from_env(self, monkeypatch):
        """Variables are parsed into typed settings."""
        monkeypatch.setenv("REFSYNTH_MAX_DEPTH", "3")
        monkeypatch.setenv("REFSYNTH_HEURISTICS", "off")
        monkeypatch.setenv("REFSYNTH_LOG_LEVEL", "debug")
        settings = Settings.from_env()
        assert settings.max_depth == 3
        assert settings.heuristics is False
        assert settings.log_level == "DEBUG"

    @pytest.mark.parametrize(
        "name, value",
        [
            ("REFSYNTH_MAX_DEPTH", "deep"),
            ("REFSYNTH_WORKERS", "0"),
            ("REFSYNTH_HEURISTICS", "maybe"),
        ],
    )
    def test_malformed(self, monkeypatch, name, value):
        """Bad values name the offending variable."""
        monkeypatch.setenv(name, value)
        with pytest.raises(ValueError, match=name):
            Settings.from_env()

    def test_override_skips_missing_flags(self):
        """Flags left as None do not override."""
        settings = Settings(max_depth=5).override(max_depth=None, workers=3)
        assert (settings.max_depth, settings.workers) == (5, 3)

    def test_budget(self, loader):
        """The search budget mirrors the settings."""
        budget = RefsynthService(Settings(timeout_ms=10, max_solutions=2, max_depth=4, max_branches=9), loader).budget()
        assert (budget.wall_clock_ms, budget.max_solutions_per_hole, budget.max_depth, budget.max_branches) == (10, 2, 4, 9)


class TestSpecLoader:
    """Tests for finding rule files."""

    def test_bundled(self, loader):
        """The bundled rule files are listed by name."""
        assert loader.bundled() == ["lm", "recmod"]

    def test_unknown_name(self, loader):
        """A missing spec raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            loader.load("nosuch")

    def test_load_by_path(self, tmp_path):
        """Any rule file can be loaded by path."""
        path = tmp_path / "tiny.spec"
        path.write_text("labels L; init ok; pred ok/1; rule Ok: ok(?x) <- emp;", encoding="utf-8")
        spec = SpecLoader().load(str(path))
        assert spec.init == "ok"

    def test_loads_are_cached(self, loader):
        """Loading the same unchanged file twice returns the same object."""
        assert loader.load("lm") is loader.load("lm")


class TestService:
    """Tests for the service operations."""

    def test_check(self, service):
        """check reports the solver's verdict."""
        assert service.check(IMPORT_SHADOWS).status is Status.SUCCESS
        report = service.check(LOCAL_OR_QUALIFIED)
        assert report.status is Status.STUCK
        assert report.remaining

    def test_graph(self, service):
        """graph renders every scope."""
        dot = service.graph(IMPORT_SHADOWS)
        assert dot.count("global") == 1
        assert "IMP" in dot

    def test_program_without_locks(self, service):
        """Synthesis on a lock-free program reports nothing."""
        assert service.synthesize(IMPORT_SHADOWS).records == []

    def test_unlocked_program(self, service):
        """The first solution of each hole replaces its lock."""
        text = service.synthesize(LOCKED_IMPORT, budget=wide_budget(max_solutions=1)).unlocked()
        assert "import A::*" in text
        assert "[[" not in text

    def test_hole_timings(self, service):
        """Every hole gets a time to first solution."""
        report = service.synthesize(LOCKED_IMPORT)
        assert set(report.hole_ms) == {HoleId(1), HoleId(2)}

    def test_soundness_violation(self, service, monkeypatch):
        """A solution failing its re-check aborts the synthesis."""
        monkeypatch.setattr("services.refsynth_service.check_solution", lambda *args: SolutionCheck(False, "rejected"))
        with pytest.raises(SoundnessViolation):
            service.synthesize(LOCAL_OR_QUALIFIED)

    def test_render_ref(self):
        """Non-references fall back to their canonical text."""
        assert render_ref(parse_term("qual(id(A), x)")) == "A.x"
        assert render_ref(parse_term("f(a)")) == "f(a)"


class TestBench:
    """Tests for corpus benchmarking."""

    def test_designated_list(self):
        """Comment lines are skipped."""
        names = designated(CORPUS)
        assert len(names) == 10
        assert "local_or_qualified.lm" in names

    def test_designated_missing(self, tmp_path):
        """A corpus without the list is an error."""
        with pytest.raises(FileNotFoundError):
            designated(tmp_path)

    def test_counts_and_timings(self):
        """Outcomes are counted and hole timings summarised."""
        report = BenchReport(
            [
                BenchEntry("a.lm", "Success", holes=2, solutions=2, hole_ms=(1.0, 3.0)),
                BenchEntry("b.lm", "Success", holes=1, solutions=1, hole_ms=(2.0,)),
                BenchEntry("c.lm", "Timeout", error="no solution"),
            ]
        )
        assert report.counts() == {"Success": 2, "Timeout": 1, "Failure": 0}
        timings = report.timings()
        assert (timings["min"], timings["median"], timings["max"]) == (1.0, 2.0, 3.0)
        assert "Timeout" in report.table()

    def test_report_lines(self):
        """Each entry is one record line."""
        entry = BenchEntry("a.lm", "Success", holes=1, solutions=1, hole_ms=(1.5,))
        assert entry.line() == "{file: a.lm, status: Success, holes: 1, solutions: 1, hole_ms: [1.5]}"

    def test_bench_directory(self, service, tmp_path):
        """Files are benchmarked in name order, failures included."""
        (tmp_path / "b.lm").write_text(LOCAL_OR_QUALIFIED, encoding="utf-8")
        (tmp_path / "a.lm").write_text("var x = [[q#1]]", encoding="utf-8")
        report = service.bench(str(tmp_path))
        assert [e.file for e in report.entries] == ["a.lm", "b.lm"]
        assert [e.status for e in report.entries] == ["Failure", "Success"]
        assert report.entries[1].refs == (("y",),)

    def test_compare_agrees(self, loader, tmp_path):
        """Guided and plain search find the same references, so the file succeeds."""
        (tmp_path / "a.lm").write_text(LOCAL_OR_QUALIFIED, encoding="utf-8")
        service = RefsynthService(Settings(max_solutions=10), loader)
        (entry,) = service.bench(str(tmp_path), compare=True).entries
        assert entry.status == "Success"
        assert set(entry.refs[0]) == {"y", "A.y"}

    def test_compare_flags_disagreement(self, loader, tmp_path, monkeypatch):
        """Differing solution sets between the two modes make the file a Failure."""
        (tmp_path / "a.lm").write_text(LOCAL_OR_QUALIFIED, encoding="utf-8")
        real = RefsynthService.synthesize

        def plain_finds_less(self, text, spec=None, budget=None):
            report = real(self, text, spec, budget)
            if not self.settings.heuristics:
                report.records = report.records[:1]
            return report

        monkeypatch.setattr(RefsynthService, "synthesize", plain_finds_less)
        service = RefsynthService(Settings(max_solutions=10), loader)
        (entry,) = service.bench(str(tmp_path), compare=True).entries
        assert entry.status == "Failure"
        assert "plain search disagrees on h1" in entry.error
