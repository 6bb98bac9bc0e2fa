"""
Reference synthesis.
Expansion of stuck predicates and queries, acceptance of solved holes, the
synthesize entry point and the independent solution check.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence, Union

import structlog

from services.solver import (
    Configuration,
    HoleState,
    QueryStep,
    Solver,
    Status,
    conflicts,
    guard,
    initial_configuration,
    potential_edges,
)
from tools.constraints import (
    Constraint,
    Pred,
    Query,
    Rule,
    Specification,
    eval_eq,
    matching_rules,
    reduce_tgt,
)
from tools.holes import HoleId
from tools.scope_graph import ScopeGraph, critical_edges, data_contains, resolve
from tools.terms import (
    App,
    Failure,
    ScopeRef,
    Substitution,
    Term,
    Var,
    compose,
    is_ground,
    mgu,
    term_vars,
)

log = structlog.get_logger(__name__)


# --- Errors ---

class SynthesisError(Exception):
    """Base class for synthesis failures reported to the caller."""


class TargetNotFound(SynthesisError):
    def __init__(self, hole: HoleId, key: Term):
        super().__init__(f"{hole}: no scope carries the target {key}")
        self.hole = hole
        self.key = key


class InitialTypeError(SynthesisError):
    """The program with its locks left open does not type check."""

    def __init__(self, reason: str):
        super().__init__(f"initial configuration fails: {reason}")
        self.reason = reason


class BudgetExhausted(SynthesisError):
    def __init__(self, holes: Sequence[HoleId], records: Sequence["SolutionRecord"] = ()):
        super().__init__(f"no solution within the search budget for {', '.join(map(str, holes))}")
        self.holes = tuple(holes)
        # Solutions found for the other holes
        self.records = tuple(records)


class SoundnessViolation(SynthesisError):
    def __init__(self, record: "SolutionRecord", reason: str):
        super().__init__(f"{record.hole}: {record.term} failed the solution check: {reason}")
        self.record = record
        self.reason = reason


# --- Records ---

@dataclass(frozen=True)
class SolutionRecord:
    hole: HoleId
    term: Term
    path: tuple[int, ...]
    steps: tuple[QueryStep, ...]
    configuration: Configuration = field(compare=False, repr=False)
    depth: int = 0
    lineage: tuple[int, ...] = field(default=(), compare=False)

    def render(self, pretty: Optional[Callable[[Term], str]] = None) -> str:
        path = ", ".join(f"$s{s}" for s in self.path)
        text = f"{{hole: {self.hole}, term: {self.term}, path: [{path}], steps: {len(self.steps)}"
        if pretty is not None:
            text += f", ref: {pretty(self.term)}"
        return text + "}"


@dataclass(frozen=True)
class SearchTruncated:
    """Marker yielded last when the budget cut the search short."""

    reason: str


SynthesisEvent = Union[SolutionRecord, SearchTruncated]


# --- Helpers over configurations ---

def owned_vars(k: Configuration, hole: HoleId) -> frozenset[Var]:
    return frozenset(v for v, h in k.holes_by_var.items() if h == hole)


def hole_of(k: Configuration, variables: Iterable[Var]) -> Optional[HoleId]:
    for v in variables:
        hole = k.holes_by_var.get(v)
        if hole is not None:
            return hole
    return None


def connected_constraints(constraints: Sequence[Constraint], seeds: frozenset[Var]) -> list[int]:
    """Indices of constraints linked to seeds through chains of shared variables."""
    reached = set(seeds)
    picked: set[int] = set()
    changed = True
    while changed:
        changed = False
        for i, c in enumerate(constraints):
            if i in picked:
                continue
            fv = c.free_vars()
            if fv & reached:
                picked.add(i)
                reached |= fv
                changed = True
    return sorted(picked)


def target_candidates(g: ScopeGraph, target: int) -> list[int]:
    """The target scope itself and every scope whose data mentions it."""
    found = [target]
    found.extend(s for s in g.scopes if s != target and data_contains(g, s, target))
    return found


# --- Expansion ---

def expand_pred(
    spec: Specification,
    k: Configuration,
    index: int,
    order: Optional[Callable[[Specification, list[tuple[Rule, Substitution]]], list[tuple[Rule, Substitution]]]] = None,
) -> list[tuple[Rule, Configuration]]:
    """
    Fork a configuration once per rule matching the predicate at index.

    Args:
        spec: Loaded specification
        k: Configuration whose constraint at index is a Pred
        index: Position of the predicate
        order: Optional reordering of the matching rules

    Returns:
        (rule, child configuration) pairs; branches that would put one
        variable under two holes are dropped
    """
    goal = k.constraints[index]
    if not isinstance(goal, Pred):
        raise TypeError(f"expected a predicate, got {goal}")
    matches = matching_rules(spec, goal)
    if order is not None:
        matches = order(spec, matches)
    children = []
    for rule, theta in matches:
        child = k.replace_constraint(index, rule.body).apply(theta)
        if child is not None:
            children.append((rule, child))
    return children


@dataclass(frozen=True)
class QueryExpansion:
    configuration: Configuration
    hole: HoleId
    source: int
    target: int


def expand_query(
    spec: Specification,
    k: Configuration,
    index: int,
    pairs: Optional[Iterable[tuple[int, int]]] = None,
) -> list[QueryExpansion]:
    """
    Guess the source and answer of a query whose filter mentions a hole.

    The query stays in the configuration; solving afterwards resolves it for
    real and checks the guess.

    Args:
        spec: Loaded specification
        k: Configuration whose constraint at index is a Query
        index: Position of the query
        pairs: (source, target) scope pairs to try; all combinations when None

    Returns:
        One expansion per consistent pair
    """
    q = k.constraints[index]
    if not isinstance(q, Query):
        raise TypeError(f"expected a query, got {q}")
    hole = hole_of(k, sorted(q.filter.free_vars(), key=str))
    if hole is None:
        return []
    state = k.hole_states[hole]
    if pairs is None:
        targets = target_candidates(k.graph, state.path[0])
        pairs = [(s, t) for t in targets for s in k.graph.scopes]

    expansions = []
    for source, target in pairs:
        theta1 = mgu(reduce_tgt(q.source), ScopeRef(source))
        if isinstance(theta1, Failure):
            continue
        graph = k.graph.map_data(theta1.apply)
        theta2 = eval_eq(graph, q.filter.apply(theta1).at(target))
        if isinstance(theta2, Failure):
            continue
        child = k.apply(compose(theta1, theta2))
        if child is None:
            continue
        q2 = child.constraints[index]
        if not any(path.target == target for path, _ in resolve(child.graph, source, q2.regex, q2.filter, q2.order)):
            continue
        if not guard(spec, child, q2, index):
            continue
        step = QueryStep(source, target, q2.regex, q2.order, q2.filter)
        child = child.with_hole(hole, child.hole_states[hole].prepend(source, step))
        expansions.append(QueryExpansion(child, hole, source, target))
    return expansions


# --- Acceptance ---

def accept(k: Configuration) -> bool:
    """Every hole is solved: no constraints left, all terms ground and reached by a query."""
    if k.constraints or not k.hole_states:
        return False
    return all(is_ground(hs.term) and len(hs.path) >= 2 for hs in k.hole_states.values())


def accept_focus(k: Configuration, focus: HoleId) -> bool:
    """The focus hole is solved even if constraints of other holes remain."""
    state = k.hole_states.get(focus)
    if state is None or len(state.path) < 2 or not is_ground(state.term):
        return False
    return not connected_constraints(k.constraints, owned_vars(k, focus))


def holes_well_formed(k: Configuration) -> bool:
    """Every hole path is a chain of query answers and every hole owns its term's variables."""
    for hole, state in k.hole_states.items():
        if not is_composite_path(k.graph, state.path, state.steps, state.path[-1] if state.path else -1):
            return False
        if any(k.holes_by_var.get(v, hole) != hole for v in term_vars(state.term)):
            return False
    return True


def is_well_formed_initial(spec: Specification, goal: Constraint, solver: Optional[Solver] = None) -> bool:
    """A lock-free goal solves to success or failure, never to a stuck state."""
    if goal.free_vars():
        return False
    result = (solver or Solver(spec)).solve(initial_configuration(goal))
    return result.status is not Status.STUCK


# --- Entry point ---

def find_target(g: ScopeGraph, key: Term) -> Optional[int]:
    """The scope whose data carries key as a subterm."""
    for scope in g.scopes:
        data = g.data_of(scope)
        if data is not None and _contains(data, key):
            return scope
    return None


def _contains(t: Term, needle: Term) -> bool:
    if t == needle:
        return True
    return isinstance(t, App) and any(_contains(a, needle) for a in t.args)


def prepare(
    spec: Specification,
    goal: Constraint,
    lock_vars: Mapping[HoleId, Var],
    targets: Mapping[HoleId, Term],
    solver: Solver,
) -> Configuration:
    """
    Solve the goal with its locks open and seed one hole state per lock.

    Raises:
        InitialTypeError: the open program already fails
        TargetNotFound: no scope carries a lock's target key
    """
    holes_by_var = {var: hole for hole, var in lock_vars.items()}
    result = solver.solve(initial_configuration(goal, holes_by_var))
    if result.status is Status.FAILURE:
        raise InitialTypeError(str(result.failure))
    k = result.configuration
    states = {}
    for hole, var in sorted(lock_vars.items()):
        key = targets[hole]
        scope = find_target(k.graph, key)
        if scope is None:
            raise TargetNotFound(hole, key)
        states[hole] = HoleState((scope,), var)
    k = replace(k, hole_states=states)
    log.info("synthesis_prepared", holes=len(states), scopes=len(k.graph.data), pending=len(k.constraints))
    return k


def synthesize(
    spec: Specification,
    goal: Constraint,
    lock_vars: Mapping[HoleId, Var],
    targets: Mapping[HoleId, Term],
    budget=None,
    heuristics: bool = True,
    workers: int = 1,
    solver: Optional[Solver] = None,
) -> Iterator[SynthesisEvent]:
    """
    Synthesize references for every lock.

    Args:
        spec: Loaded specification
        goal: Initial constraint with lock variables open
        lock_vars: Variable standing for each hole
        targets: Key term identifying each hole's target declaration
        budget: SearchBudget; defaults apply when None
        heuristics: Use the guided search (focus holes, backward resolution,
            cross-hole insertion, recursion replay)
        workers: Branches processed in parallel per search level
        solver: Solver to use; a fresh one when None

    Yields:
        SolutionRecord per solution in emission order, then SearchTruncated
        if the budget cut the search short
    """
    from services.heuristics import SearchBudget, run_search

    solver = solver or Solver(spec)
    k = prepare(spec, goal, lock_vars, targets, solver)
    yield from run_search(spec, k, budget or SearchBudget(), heuristics=heuristics, workers=workers, solver=solver)


# --- Solution check ---

@dataclass(frozen=True)
class SolutionCheck:
    ok: bool
    reason: str = ""


def query_connected(g: ScopeGraph, step: QueryStep, following: int) -> bool:
    """The query of step answers its target, which is or mentions the following scope."""
    if step.target != following and not data_contains(g, step.target, following):
        return False
    answers = resolve(g, step.source, step.regex, step.filter, step.order)
    return any(path.target == step.target for path, _ in answers)


def is_composite_path(g: ScopeGraph, path: Sequence[int], steps: Sequence[QueryStep], target: int) -> bool:
    """path is a chain of query answers ending at target."""
    if not path or path[-1] != target or len(steps) != len(path) - 1:
        return False
    for i, step in enumerate(steps):
        if step.source != path[i] or not query_connected(g, step, path[i + 1]):
            return False
    return True


def check_solution(
    spec: Specification,
    goal: Constraint,
    lock_vars: Mapping[HoleId, Var],
    record: SolutionRecord,
    target_key: Term,
    solver: Optional[Solver] = None,
) -> SolutionCheck:
    """
    Re-check a solution independently of the search that produced it.

    The goal is solved from scratch with every hole that is ground in the
    record's configuration substituted. It must succeed, or get stuck only on
    constraints tied to the locks still open. The declaration carrying
    target_key must exist in the re-solved graph, and the record's path must
    be a chain of query answers ending at that declaration.
    """
    solver = solver or Solver(spec)
    terms = {
        lock_vars[h]: hs.term
        for h, hs in record.configuration.hole_states.items()
        if h in lock_vars and is_ground(hs.term)
    }
    terms[lock_vars[record.hole]] = record.term
    open_vars = frozenset(v for v in lock_vars.values() if v not in terms)
    theta = Substitution(terms)
    result = solver.solve(Configuration(constraints=(goal.apply(theta),)))
    if result.status is Status.FAILURE:
        return SolutionCheck(False, f"substituted program fails: {result.failure}")
    if result.status is Status.STUCK:
        k = result.configuration
        tied = connected_constraints(k.constraints, open_vars)
        potential = potential_edges(spec, [k.constraints[i] for i in tied])
        for i, c in enumerate(k.constraints):
            if i in tied:
                continue
            if isinstance(c, Query) and isinstance(reduce_tgt(c.source), ScopeRef):
                critical = critical_edges(k.graph, reduce_tgt(c.source).scope, c.regex)
                if conflicts(potential, critical):
                    continue
            return SolutionCheck(False, f"substituted program is stuck on {c}")

    if find_target(result.configuration.graph, target_key) is None:
        return SolutionCheck(False, f"substituted program has no declaration {target_key}")
    target = find_target(record.configuration.graph, target_key)
    if target is None or not record.path or record.path[-1] != target:
        return SolutionCheck(False, "path does not end at the hole's target")
    if not is_composite_path(record.configuration.graph, record.path, record.steps, target):
        return SolutionCheck(False, "path is not a chain of query answers")
    return SolutionCheck(True)
