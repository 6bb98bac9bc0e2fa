"""Tests for the refsynth command line."""

import re

import pytest
import structlog
from click.testing import CliRunner

from cli import main
from conftest import CORPUS, LOCAL_OR_QUALIFIED
from utils.specs import SpecLoader


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ["REFSYNTH_MAX_SOLUTIONS", "REFSYNTH_MAX_DEPTH", "REFSYNTH_HEURISTICS", "REFSYNTH_SPEC", "REFSYNTH_WORKERS"]:
        monkeypatch.delenv(name, raising=False)
    yield
    # The CLI points structlog at the runner's stderr
    structlog.reset_defaults()


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def program(tmp_path):
    def write(text, name="program.lm"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return write


@pytest.fixture
def nokey_spec(tmp_path):
    """The LM rules with variable keys left out of scope data."""
    text = SpecLoader().read("lm").replace("new ?sx -> var(?x, ?ty, ?key)", "new ?sx -> var(?x, ?ty, nokey)")
    path = tmp_path / "nokey.spec"
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestCheck:
    """Tests for refsynth check exit codes."""

    def test_ok(self, runner, program):
        """A well-typed program exits 0."""
        result = runner.invoke(main, ["check", program("var x = 1 + 2")])
        assert result.exit_code == 0
        assert result.output.startswith("ok (")

    def test_type_error(self, runner, program):
        """An unresolved reference exits 1."""
        result = runner.invoke(main, ["check", program("var x = y")])
        assert result.exit_code == 1
        assert "type error" in result.output

    def test_stuck(self, runner, program):
        """An open lock leaves the program stuck."""
        result = runner.invoke(main, ["check", program(LOCAL_OR_QUALIFIED)])
        assert result.exit_code == 2
        assert "typeOfExpr" in result.output

    def test_parse_error(self, runner, program):
        """Malformed programs exit 3."""
        result = runner.invoke(main, ["check", program("var = 1")])
        assert result.exit_code == 3

    def test_missing_file(self, runner, tmp_path):
        """Unreadable files exit 3."""
        result = runner.invoke(main, ["check", str(tmp_path / "absent.lm")])
        assert result.exit_code == 3

    def test_unknown_spec(self, runner, program):
        """A spec that does not exist is an input error."""
        result = runner.invoke(main, ["check", program("var x = 1"), "--spec", "nosuch"])
        assert result.exit_code == 3

    def test_trace(self, runner, program):
        """--trace prints solver steps before the verdict."""
        result = runner.invoke(main, ["check", program("var x = 1"), "--trace"])
        assert result.exit_code == 0
        assert "step 1 Op-Pred[P-Program]" in result.output

    def test_seeded(self, runner, program):
        """A seeded random order gives the same verdict."""
        result = runner.invoke(main, ["check", program("mod A { var x = 1 } var y = A.x"), "--seed", "3"])
        assert result.exit_code == 0


class TestSynth:
    """Tests for refsynth synth."""

    def test_solution_line(self, runner, program):
        """Each solution is printed as one record."""
        result = runner.invoke(main, ["synth", program(LOCAL_OR_QUALIFIED)])
        assert result.exit_code == 0
        assert "{hole: h1, term: id(y)" in result.output
        assert "ref: y}" in result.output

    def test_local_and_qualified(self, runner, program):
        """With room for more, exactly the local and the qualified reference are found."""
        result = runner.invoke(main, ["synth", program(LOCAL_OR_QUALIFIED), "--max-depth", "4", "--max-solutions", "4"])
        assert result.exit_code == 0
        refs = [line.rsplit("ref: ", 1)[1].rstrip("}") for line in result.output.splitlines() if "ref: " in line]
        assert refs == ["y", "A.y"]
        assert re.search(r"path: \[(\$s\d+), \1, \$s\d+\], steps: 2, ref: A\.y", result.output)

    def test_more_solutions(self, runner, program):
        """--max-solutions lets the search continue."""
        result = runner.invoke(main, ["synth", program(LOCAL_OR_QUALIFIED), "--max-solutions", "2"])
        assert result.exit_code == 0
        assert "ref: A.y}" in result.output

    def test_emit_program(self, runner, program):
        """--emit-program prints the unlocked program."""
        result = runner.invoke(main, ["synth", program(LOCAL_OR_QUALIFIED), "--emit-program"])
        assert result.exit_code == 0
        assert "var x = y" in result.output

    def test_budget_exhausted(self, runner, program):
        """No solution within the depth limit exits 5."""
        result = runner.invoke(main, ["synth", program(LOCAL_OR_QUALIFIED), "--max-depth", "1"])
        assert result.exit_code == 5

    def test_target_not_found(self, runner, program, nokey_spec):
        """Targets without a key in the graph exit 4."""
        result = runner.invoke(main, ["synth", program(LOCAL_OR_QUALIFIED), "--spec", nokey_spec])
        assert result.exit_code == 4

    def test_initial_failure(self, runner, program):
        """A program that fails with its locks open exits 1."""
        result = runner.invoke(main, ["synth", program("mod A { var x = [[y#1]] var y = z }")])
        assert result.exit_code == 1

    def test_unknown_target(self, runner, program):
        """A lock naming a missing declaration is an input error."""
        result = runner.invoke(main, ["synth", program("var x = [[q#1]]")])
        assert result.exit_code == 3

    def test_plain_enumeration(self, runner, program):
        """--heuristics off still finds the local reference."""
        result = runner.invoke(main, ["synth", program(LOCAL_OR_QUALIFIED), "--heuristics", "off", "--max-depth", "4"])
        assert result.exit_code == 0
        assert "ref: y}" in result.output


class TestGraph:
    """Tests for refsynth graph."""

    def test_dot_output(self, runner, program):
        """The scope graph is printed as DOT."""
        result = runner.invoke(main, ["graph", program("mod A { var x = 1 }")])
        assert result.exit_code == 0
        assert "digraph {" in result.output
        assert "mod(A, key(A, 1))" in result.output

    def test_partial_graph(self, runner, program):
        """Programs with locks still have a graph."""
        result = runner.invoke(main, ["graph", program(LOCAL_OR_QUALIFIED)])
        assert result.exit_code == 0
        assert "var(y, int, key(y, 1))" in result.output


class TestBench:
    """Tests for refsynth bench."""

    def test_designated_report(self, runner, tmp_path):
        """The report has one line per designated file."""
        report = tmp_path / "report.txt"
        result = runner.invoke(main, ["bench", str(CORPUS), "--designated", "--report", str(report)])
        assert result.exit_code == 0
        lines = report.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 10
        assert all(line.startswith("{file: ") for line in lines)
        assert "Success" in result.output

    def test_missing_directory(self, runner, tmp_path):
        """A missing corpus directory is an input error."""
        result = runner.invoke(main, ["bench", str(tmp_path / "nowhere"), "--report", str(tmp_path / "r.txt")])
        assert result.exit_code == 3

    def test_compare_modes(self, runner, tmp_path):
        """--compare runs both modes and keeps agreeing files a success."""
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        (corpus / "a.lm").write_text(LOCAL_OR_QUALIFIED, encoding="utf-8")
        report = tmp_path / "report.txt"
        result = runner.invoke(main, ["bench", str(corpus), "--compare", "--max-solutions", "10", "--report", str(report)])
        assert result.exit_code == 0
        assert "status: Success" in report.read_text(encoding="utf-8")
