"""Tests for the guided search."""

from types import SimpleNamespace

import pytest

from conftest import LOCAL_OR_QUALIFIED, LOCKED_IMPORT, RECMOD, wide_budget
from services.heuristics import (
    BranchSignature,
    RecursionWitness,
    SearchBranch,
    SearchBudget,
    detect_recursion,
    insert_cross_hole_solution,
    order_rule_candidates,
    replay_recursive,
    run_search,
    select_constraint,
)
from services.refsynth_service import RefsynthService
from services.solver import Configuration, HoleState, Solver
from services.synthesis import BudgetExhausted, SearchTruncated, SolutionRecord, expand_pred, prepare
from tools.constraints import Pred, Query, matching_rules
from tools.holes import HoleId
from tools.lm_frontend import gen_constraint, locked_targets, parse_lm
from tools.terms import ScopeRef, Var, parse_term
from utils.config import Settings

H1, H2 = HoleId(1), HoleId(2)


def qualified_branch(spec):
    """LOCAL_OR_QUALIFIED after choosing qualified lookup, solved until stuck."""
    program = parse_lm(LOCAL_OR_QUALIFIED)
    goal, lock_vars = gen_constraint(program, spec.init)
    targets = {h: t.key_term() for h, t in locked_targets(program).items()}
    k = prepare(spec, goal, lock_vars, targets, Solver(spec))
    index = next(i for i, c in enumerate(k.constraints) if isinstance(c, Pred))
    _, (_, child) = expand_pred(spec, k, index)
    return Solver(spec).solve(child).configuration


def signature(id, depth, names, term, key=("c",)):
    return BranchSignature(id, H1, depth, key, names, ((), ()), HoleState((5,), parse_term(term)))


class TestSelection:
    """Tests for constraint selection and rule ordering."""

    def test_queries_first(self, lm_spec):
        """A query tied to the focus hole is expanded before predicates."""
        k = qualified_branch(lm_spec)
        order = select_constraint(lm_spec, k, H1)
        assert isinstance(k.constraints[order[0]], Query)
        assert isinstance(k.constraints[order[1]], Pred)

    def test_plain_order_is_age(self, lm_spec):
        """Without heuristics constraints come in age order."""
        k = qualified_branch(lm_spec)
        assert select_constraint(lm_spec, k, H1, heuristics=False) == sorted(select_constraint(lm_spec, k, H1))

    def test_rules_reaching_queries_first(self, lm_spec):
        """Rules that can lead to a query come before those that cannot."""
        goal = Pred("typeOfExpr", (ScopeRef(0), Var("e"), Var("ty")))
        ordered = order_rule_candidates(lm_spec, matching_rules(lm_spec, goal))
        assert [r.name for r, _ in ordered][-1] == "T-Num"

    def test_fewer_binders_first(self, lm_spec):
        """Among lookup rules, the one introducing fewer variables comes first."""
        goal = Pred("typeOfExpr", (ScopeRef(0), parse_term("ref(?h)"), Var("ty")))
        ordered = order_rule_candidates(lm_spec, matching_rules(lm_spec, goal))
        assert [r.name for r, _ in ordered] == ["T-Var", "T-QRef"]


class TestRecursion:
    """Tests for detecting and replaying recursive expansions."""

    def test_specialised_repeat_detected(self):
        """A descendant in the same situation with a more specific term repeats its ancestor."""
        first = signature(1, 2, ("r",), "qual(?r, y)")
        second = signature(3, 4, ("r2",), "qual(qual(?r2, B), y)")
        assert detect_recursion(second, [first]) == first

    def test_different_constraints_not_detected(self):
        """Pending constraints must agree."""
        first = signature(1, 2, ("r",), "qual(?r, y)", key=("other",))
        second = signature(3, 4, ("r2",), "qual(qual(?r2, B), y)")
        assert detect_recursion(second, [first]) is None

    def test_same_term_not_detected(self):
        """Nothing recurs without progress on the hole."""
        first = signature(1, 2, ("r",), "qual(?r, y)")
        second = signature(3, 4, ("r",), "qual(?r, y)")
        assert detect_recursion(second, [first]) is None

    def test_replay_carries_instantiation(self):
        """The ancestor's solution instantiates the descendant the same way."""
        first = signature(1, 2, ("r",), "qual(?r, y)")
        second = signature(3, 4, ("r2",), "qual(qual(?r2, B), y)")
        witness = RecursionWitness(first, second, Configuration())
        base = SolutionRecord(H1, parse_term("qual(id(A), y)"), (5,), (), Configuration(), 4, (1, 2))
        derived = replay_recursive(witness, base, max_depth=8)
        assert derived.term == parse_term("qual(qual(id(A), B), y)")
        assert derived.depth == 6
        assert derived.lineage == (3, 1, 2)

    def test_replay_respects_depth(self):
        """Derived solutions deeper than the budget are dropped."""
        first = signature(1, 2, ("r",), "qual(?r, y)")
        second = signature(3, 4, ("r2",), "qual(qual(?r2, B), y)")
        base = SolutionRecord(H1, parse_term("qual(id(A), y)"), (5,), (), Configuration(), 4, (1,))
        assert replay_recursive(RecursionWitness(first, second, Configuration()), base, max_depth=5) is None


class TestCrossHoleInsertion:
    """Tests for adopting another hole's solution."""

    def branch(self, term):
        k = Configuration(holes_by_var={Var("h"): H2}, hole_states={H2: HoleState((3,), term)})
        return SearchBranch(k, H1, 2, 7, (1, 7))

    def test_open_hole_adopts(self):
        """The waiting branch takes the donor's term and path."""
        record = SolutionRecord(H2, parse_term("id(A)"), (0, 3), (), Configuration())
        inserted = insert_cross_hole_solution(self.branch(Var("h")), record, 9)
        state = inserted.configuration.hole_states[H2]
        assert (state.term, state.path) == (parse_term("id(A)"), (0, 3))
        assert (inserted.id, inserted.lineage, inserted.focus) == (9, (1, 7, 9), H1)

    def test_solved_hole_left_alone(self):
        """A branch where the donor is already ground is not resumed."""
        record = SolutionRecord(H2, parse_term("id(A)"), (0, 3), (), Configuration())
        assert insert_cross_hole_solution(self.branch(parse_term("id(B)")), record, 9) is None


class TestSearch:
    """Tests for whole searches on LM programs."""

    def test_local_reference_first(self, service):
        """Plain and qualified references are both found, shortest first."""
        report = service.synthesize(LOCAL_OR_QUALIFIED, budget=wide_budget())
        assert report.refs(H1) == ["y", "A.y"]

    def test_import_and_reference(self, service):
        """A reference that depends on a locked import waits for it."""
        report = service.synthesize(LOCKED_IMPORT, budget=wide_budget())
        assert report.refs(H1) == ["A"]
        assert set(report.refs(H2)) == {"x", "A.x"}

    def test_recursive_modules(self, service):
        """Recursive imports yield every path up to the depth limit."""
        report = service.synthesize(RECMOD, "recmod", budget=wide_budget(max_depth=8, max_solutions=20))
        assert set(report.refs(H1)) == {"x", "A.x", "P.A.x", "Q.B.A.x", "A.B.A.x"}

    def test_self_import_terminates(self, service):
        """A module importing itself adds no qualifier, and the capped search still ends."""
        text = "mod A { import A::* var x = 1 var y = [[x#1]] }"
        report = service.synthesize(text, "recmod", budget=wide_budget(max_depth=6, max_solutions=20))
        assert report.refs(H1) == ["x", "A.x"]

    def test_parallel_workers_agree(self, loader):
        """Processing each level on two threads finds the same references."""
        service = RefsynthService(Settings(workers=2), loader)
        report = service.synthesize(LOCKED_IMPORT, budget=wide_budget())
        assert report.refs(H1) == ["A"]
        assert set(report.refs(H2)) == {"x", "A.x"}

    def test_plain_enumeration(self, loader):
        """Without heuristics the local reference is still found."""
        service = RefsynthService(Settings(heuristics=False), loader)
        report = service.synthesize(LOCAL_OR_QUALIFIED, budget=wide_budget(max_depth=4))
        assert "y" in report.refs(H1)

    def test_first_solution_only(self, service):
        """By default the search stops at one solution per hole."""
        report = service.synthesize(LOCAL_OR_QUALIFIED)
        assert report.refs(H1) == ["y"]

    def test_budget_exhausted(self, service):
        """No solution within the depth limit is reported per hole."""
        with pytest.raises(BudgetExhausted) as info:
            service.synthesize(LOCAL_OR_QUALIFIED, budget=wide_budget(max_depth=1))
        assert info.value.holes == (H1,)


class TestDeadline:
    """Tests for the wall-clock budget."""

    def test_deadline_checked_per_branch(self, lm_spec, monkeypatch):
        """A level already under way stops processing branches once time runs out."""
        ticks = iter([0.0, 0.0])
        monkeypatch.setattr("services.heuristics.time", SimpleNamespace(monotonic=lambda: next(ticks, 10.0)))
        program = parse_lm(LOCAL_OR_QUALIFIED)
        goal, lock_vars = gen_constraint(program, lm_spec.init)
        targets = {h: t.key_term() for h, t in locked_targets(program).items()}
        root = prepare(lm_spec, goal, lock_vars, targets, Solver(lm_spec))
        events = list(run_search(lm_spec, root, SearchBudget(wall_clock_ms=1)))
        assert events == [SearchTruncated("wall clock")]
