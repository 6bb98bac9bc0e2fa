"""
Search over synthesis branches.
Level-by-level exploration with constraint selection and rule ordering,
backward resolution of queries, cross-hole insertion of solutions and the
detection and replay of recursive expansions.
"""
from __future__ import annotations

import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional

import structlog

from services.solver import (
    Configuration,
    FuelExhausted,
    HoleState,
    Solver,
    Status,
    potential_edges,
)
from services.synthesis import (
    SearchTruncated,
    SolutionRecord,
    SynthesisEvent,
    accept,
    accept_focus,
    connected_constraints,
    expand_pred,
    expand_query,
    hole_of,
    owned_vars,
    target_candidates,
)
from tools.constraints import Pred, Query, Rule, Specification, exists_binders, reduce_tgt
from tools.holes import HoleId
from tools.scope_graph import IncompleteGraph, resolve_backward
from tools.terms import Failure, ScopeRef, Substitution, Var, is_ground, match, mgu

log = structlog.get_logger(__name__)


@dataclass(frozen=True)
class SearchBudget:
    wall_clock_ms: int = 60_000
    max_solutions_per_hole: int = 1
    max_depth: int = 8
    max_branches: int = 20_000


@dataclass(frozen=True)
class SearchBranch:
    configuration: Configuration
    focus: Optional[HoleId]
    depth: int
    id: int
    # Ids from the root down to and including this branch
    lineage: tuple[int, ...]


# --- Selection and ordering ---

def _expandable(k: Configuration, index: int) -> bool:
    c = k.constraints[index]
    if isinstance(c, Query):
        return hole_of(k, c.filter.free_vars()) is not None
    return isinstance(c, Pred)


def _related(k: Configuration, index: int, focus: HoleId) -> bool:
    c = k.constraints[index]
    owned = owned_vars(k, focus)
    if isinstance(c, Query):
        return bool(c.filter.free_vars() & owned)
    return bool(c.free_vars() & owned)


def select_constraint(spec: Specification, k: Configuration, focus: Optional[HoleId], heuristics: bool = True) -> list[int]:
    """
    Indices of constraints worth expanding, best first.

    With heuristics, only queries and predicates tied to the focus hole count;
    queries come first, then predicates that may lead to a query, then age.
    Without, every expandable constraint in age order.
    """
    indices = [i for i in range(len(k.constraints)) if _expandable(k, i)]
    if not heuristics or focus is None:
        return indices
    indices = [i for i in indices if _related(k, i, focus)]

    def rank(i: int) -> tuple[int, int]:
        c = k.constraints[i]
        if isinstance(c, Query):
            return 0, i
        return (1 if c.symbol in spec.query_leading else 2), i

    return sorted(indices, key=rank)


def order_rule_candidates(spec: Specification, matches: list[tuple[Rule, Substitution]]) -> list[tuple[Rule, Substitution]]:
    """Rules that may reach a query first, then those introducing fewer existentials."""
    return sorted(
        matches,
        key=lambda m: (0 if spec.rule_is_query_leading(m[0]) else 1, exists_binders(m[0].body)),
    )


# --- Recursion ---

_VAR = re.compile(r"\?[A-Za-z_][\w$']*")


@dataclass(frozen=True)
class BranchSignature:
    """What a processed branch looked like after solving, for recursion checks."""

    id: int
    focus: HoleId
    depth: int
    key: tuple[str, ...]
    names: tuple[str, ...]
    graph: tuple
    state: HoleState


def signature(branch: SearchBranch, k: Configuration) -> BranchSignature:
    """Constraints up to variable renaming plus the graph with variables erased."""
    names: dict[str, int] = {}

    def canonical(m: re.Match) -> str:
        index = names.setdefault(m.group(0), len(names))
        return f"?_{index}"

    key = tuple(_VAR.sub(canonical, str(c)) for c in k.constraints)
    graph = (
        tuple(None if d is None else _VAR.sub("?", str(d)) for d in k.graph.data),
        tuple(k.graph.edges()),
    )
    ordered = tuple(name[1:] for name, _ in sorted(names.items(), key=lambda item: item[1]))
    return BranchSignature(branch.id, branch.focus, branch.depth, key, ordered, graph, k.hole_states[branch.focus])


@dataclass(frozen=True)
class RecursionWitness:
    """An ancestor (first) whose situation recurs, more specialised, in a descendant (second)."""

    first: BranchSignature
    second: BranchSignature
    configuration: Configuration


def detect_recursion(sig: BranchSignature, ancestors: list[BranchSignature]) -> Optional[BranchSignature]:
    """
    The closest ancestor that this branch repeats.

    The pending constraints must agree up to renaming, over the same graph,
    with the focus path starting at the same scope and the ancestor's hole
    term generalising this one.
    """
    for first in reversed(ancestors):
        if first.focus != sig.focus or first.key != sig.key or first.graph != sig.graph:
            continue
        if first.state.path[0] != sig.state.path[0] or first.state.term == sig.state.term:
            continue
        if not isinstance(match(first.state.term, sig.state.term), Failure):
            return first
    return None


def replay_recursive(witness: RecursionWitness, base: SolutionRecord, max_depth: int) -> Optional[SolutionRecord]:
    """
    Derive a solution for the recursive branch from one found below the ancestor.

    The base term instantiates the ancestor's hole term; the same
    instantiation, carried over to the descendant's variables, solves the
    descendant.
    """
    first, second = witness.first, witness.second
    depth = base.depth + (second.depth - first.depth)
    if depth > max_depth:
        return None
    sigma = match(first.state.term, base.term)
    if isinstance(sigma, Failure):
        return None
    index = {name: i for i, name in enumerate(first.names)}
    carried = {}
    for var, t in sigma.term_map.items():
        i = index.get(var.name)
        if i is not None and i < len(second.names):
            carried[Var(second.names[i])] = t
    term = Substitution(carried).apply(second.state.term)
    if not is_ground(term):
        return None
    keep = len(base.path) - len(first.state.path)
    keep_steps = len(base.steps) - len(first.state.steps)
    if keep < 0 or keep_steps < 0 or base.path[keep:] != first.state.path:
        return None
    state = HoleState(
        base.path[:keep] + second.state.path,
        term,
        base.steps[:keep_steps] + second.state.steps,
    )
    k = witness.configuration.with_hole(base.hole, state)
    return SolutionRecord(base.hole, term, state.path, state.steps, k, depth, (second.id,) + base.lineage)


# --- Cross-hole insertion ---

def insert_cross_hole_solution(branch: SearchBranch, record: SolutionRecord, new_id: int) -> Optional[SearchBranch]:
    """Adopt another hole's solution in a branch waiting on it."""
    k = branch.configuration
    state = k.hole_states.get(record.hole)
    if state is None or is_ground(state.term):
        return None
    theta = mgu(state.term, record.term)
    if isinstance(theta, Failure):
        return None
    k = k.with_hole(record.hole, HoleState(record.path, record.term, record.steps)).apply(theta)
    if k is None:
        return None
    return SearchBranch(k, branch.focus, branch.depth, new_id, branch.lineage + (new_id,))


def donor_holes(spec: Specification, k: Configuration, query_index: int, blockers, focus: HoleId) -> set[HoleId]:
    """Holes whose pending constraints may add a blocking edge."""
    responsible = []
    for i, c in enumerate(k.constraints):
        if i == query_index:
            continue
        potential = potential_edges(spec, [c])
        if any(_blocks(entry, blockers) for entry in potential):
            responsible.append(i)
    seeds = frozenset(v for i in responsible for v in k.constraints[i].free_vars())
    linked = set(responsible) | set(connected_constraints(k.constraints, seeds))
    holes = {k.holes_by_var[v] for i in linked for v in k.constraints[i].free_vars() if v in k.holes_by_var}
    holes.discard(focus)
    return {h for h in holes if not is_ground(k.hole_states[h].term)}


def _blocks(entry, blockers) -> bool:
    scope, label = entry
    for b_scope, b_label in blockers:
        if label == b_label and (scope is None or b_scope is None or scope == b_scope):
            return True
    return False


# --- Search ---

@dataclass
class _Processed:
    children: list[tuple[Configuration, int]] = field(default_factory=list)
    records: list[SolutionRecord] = field(default_factory=list)
    # Donor holes this branch waits on, and the configuration to resume from
    parked: set[HoleId] = field(default_factory=set)
    resume: Optional[Configuration] = None
    signature: Optional[BranchSignature] = None
    witness: Optional[RecursionWitness] = None
    truncated: bool = False
    timed_out: bool = False


def _record_order(r: SolutionRecord) -> tuple[int, int, str]:
    return r.depth, len(r.steps), r.render()


class _Search:
    def __init__(self, spec: Specification, root: Configuration, budget: SearchBudget, heuristics: bool, workers: int, solver: Solver):
        self.spec = spec
        self.root = root
        self.budget = budget
        self.heuristics = heuristics
        self.workers = max(1, workers)
        self.solver = solver
        self.holes = sorted(root.hole_states)
        self.deadline = time.monotonic() + budget.wall_clock_ms / 1000
        self.next_id = 0
        self.explored = 0
        self.truncated: Optional[str] = None
        self.signatures: dict[int, BranchSignature] = {}
        self.emitted: dict[HoleId, list[SolutionRecord]] = {h: [] for h in self.holes}
        self.rendered: dict[HoleId, set[str]] = {h: set() for h in self.holes}
        self.parked: dict[HoleId, list[SearchBranch]] = {}
        self.witnesses: list[RecursionWitness] = []
        self.pending: list[SolutionRecord] = []

    def new_branch(self, k: Configuration, focus: Optional[HoleId], depth: int, lineage: tuple[int, ...]) -> SearchBranch:
        self.next_id += 1
        return SearchBranch(k, focus, depth, self.next_id, lineage + (self.next_id,))

    def full(self, hole: HoleId) -> bool:
        return len(self.emitted[hole]) >= self.budget.max_solutions_per_hole

    def done(self) -> bool:
        return all(self.full(h) for h in self.holes)

    # Runs on worker threads; shared state is only read here
    def process(self, branch: SearchBranch) -> _Processed:
        out = _Processed()
        if time.monotonic() > self.deadline:
            out.timed_out = True
            return out
        try:
            result = self.solver.solve(branch.configuration)
        except FuelExhausted as e:
            log.warning("branch_out_of_fuel", branch=branch.id, error=str(e))
            return out
        if result.status is Status.FAILURE:
            return out
        k = result.configuration

        # Step 1: acceptance
        if self.heuristics:
            if accept_focus(k, branch.focus):
                state = k.hole_states[branch.focus]
                out.records.append(
                    SolutionRecord(branch.focus, state.term, state.path, state.steps, k, branch.depth, branch.lineage)
                )
                return out
        elif accept(k):
            for hole in self.holes:
                state = k.hole_states[hole]
                out.records.append(SolutionRecord(hole, state.term, state.path, state.steps, k, branch.depth, branch.lineage))
            return out
        if result.status is Status.SUCCESS:
            return out

        # Step 2: limits and recursion
        if branch.depth >= self.budget.max_depth:
            out.truncated = True
            return out
        if self.heuristics:
            out.signature = signature(branch, k)
            ancestors = [self.signatures[i] for i in branch.lineage[:-1] if i in self.signatures]
            first = detect_recursion(out.signature, ancestors)
            if first is not None:
                out.witness = RecursionWitness(first, out.signature, k)
                return out

        # Step 3: expansion of the first constraint that yields anything
        for index in select_constraint(self.spec, k, branch.focus, self.heuristics):
            if isinstance(k.constraints[index], Pred):
                order = order_rule_candidates if self.heuristics else None
                children = [child for _, child in expand_pred(self.spec, k, index, order)]
            elif self.heuristics:
                children, out.parked = self.expand_query_backward(k, index, branch.focus)
            else:
                children = [e.configuration for e in expand_query(self.spec, k, index)]
            out.children = [(child, branch.depth + 1) for child in children]
            if out.children or out.parked:
                break
        if out.parked:
            out.resume = k
        return out

    def expand_query_backward(self, k: Configuration, index: int, focus: HoleId) -> tuple[list[Configuration], set[HoleId]]:
        q = k.constraints[index]
        hole = hole_of(k, q.filter.free_vars())
        others = [c for i, c in enumerate(k.constraints) if i != index]
        open_edges = potential_edges(self.spec, others + [q.cont])
        source = reduce_tgt(q.source)
        known = source.scope if isinstance(source, ScopeRef) else None
        pairs: list[tuple[int, int]] = []
        blockers: set = set()
        for target in target_candidates(k.graph, k.hole_states[hole].path[0]):
            found = resolve_backward(k.graph, target, q.regex, open_edges, known)
            if isinstance(found, IncompleteGraph):
                blockers |= found.blockers
                found = list(found.candidates)
            for source in dict.fromkeys(src for src, _ in found):
                pairs.append((source, target))
        children = [e.configuration for e in expand_query(self.spec, k, index, pairs)]
        donors = donor_holes(self.spec, k, index, blockers, focus) if blockers else set()
        return children, donors

    def run(self) -> Iterator[SynthesisEvent]:
        if self.heuristics:
            level = [self.new_branch(self.root, hole, 0, ()) for hole in self.holes]
        else:
            level = [self.new_branch(self.root, None, 0, ())]
        depth = 0

        executor = ThreadPoolExecutor(max_workers=self.workers) if self.workers > 1 else None
        try:
            while level and not self.done():
                if time.monotonic() > self.deadline:
                    self.truncated = "wall clock"
                    break
                room = self.budget.max_branches - self.explored
                if room <= 0:
                    self.truncated = "branch limit"
                    break
                if len(level) > room:
                    level = level[:room]
                    self.truncated = "branch limit"
                self.explored += len(level)

                results = list(executor.map(self.process, level)) if executor else [self.process(b) for b in level]
                next_level: list[SearchBranch] = []
                for branch, out in zip(level, results):
                    if out.signature is not None:
                        self.signatures[branch.id] = out.signature
                    if out.timed_out:
                        self.truncated = "wall clock"
                    if out.truncated and self.truncated is None:
                        self.truncated = "depth limit"
                    for child, child_depth in out.children:
                        next_level.append(self.new_branch(child, branch.focus, child_depth, branch.lineage))
                    self.pending.extend(out.records)
                    if out.witness is not None:
                        self.register_witness(out.witness)
                    if out.parked:
                        waiting = SearchBranch(out.resume, branch.focus, branch.depth, branch.id, branch.lineage)
                        next_level.extend(self.park(waiting, out.parked))
                log.debug("search_level", level=depth, branches=len(level), next=len(next_level), explored=self.explored)
                records, resumed = self.flush(depth)
                next_level.extend(resumed)
                yield from records
                level = next_level
                depth += 1
        finally:
            if executor is not None:
                executor.shutdown(wait=True)

        records, _ = self.flush(None)
        yield from records
        if self.truncated is not None and not self.done():
            log.info("search_truncated", reason=self.truncated, explored=self.explored)
            yield SearchTruncated(self.truncated)

    # --- Emission ---

    def flush(self, level: Optional[int]) -> tuple[list[SolutionRecord], list[SearchBranch]]:
        """
        Emit buffered records of depth up to level, best first.

        Each emitted record resumes branches parked on its hole and is
        replayed through every recursion witness below which it was found.
        """
        ready = sorted((r for r in self.pending if level is None or r.depth <= level), key=_record_order)
        self.pending = [r for r in self.pending if not (level is None or r.depth <= level)]
        emitted: list[SolutionRecord] = []
        resumed: list[SearchBranch] = []
        while ready:
            record = ready.pop(0)
            hole = record.hole
            rendered = record.render()
            if self.full(hole) or rendered in self.rendered[hole]:
                continue
            self.rendered[hole].add(rendered)
            self.emitted[hole].append(record)
            emitted.append(record)
            for waiting in self.parked.get(hole, []):
                inserted = insert_cross_hole_solution(waiting, record, self.next_id + 1)
                if inserted is not None:
                    self.next_id += 1
                    resumed.append(inserted)
            for derived in self.replay_for(record):
                if level is None or derived.depth <= level:
                    ready.append(derived)
                    ready.sort(key=_record_order)
                else:
                    self.pending.append(derived)
        return emitted, resumed

    def replay_for(self, record: SolutionRecord) -> list[SolutionRecord]:
        derived = (
            replay_recursive(w, record, self.budget.max_depth)
            for w in self.witnesses
            if w.first.focus == record.hole and w.first.id in record.lineage
        )
        return [d for d in derived if d is not None]

    def register_witness(self, witness: RecursionWitness):
        log.debug("recursion_detected", ancestor=witness.first.id, branch=witness.second.id, hole=str(witness.first.focus))
        self.witnesses.append(witness)
        for record in self.emitted[witness.first.focus]:
            if witness.first.id in record.lineage:
                derived = replay_recursive(witness, record, self.budget.max_depth)
                if derived is not None:
                    self.pending.append(derived)

    def park(self, branch: SearchBranch, donors: set[HoleId]) -> list[SearchBranch]:
        resumed = []
        for donor in sorted(donors):
            self.parked.setdefault(donor, []).append(branch)
            for record in self.emitted.get(donor, []):
                inserted = insert_cross_hole_solution(branch, record, self.next_id + 1)
                if inserted is not None:
                    self.next_id += 1
                    resumed.append(inserted)
        return resumed


def run_search(
    spec: Specification,
    root: Configuration,
    budget: SearchBudget,
    heuristics: bool = True,
    workers: int = 1,
    solver: Optional[Solver] = None,
) -> Iterator[SynthesisEvent]:
    """
    Explore synthesis branches level by level from a prepared configuration.

    Args:
        spec: Loaded specification
        root: Solved initial configuration with one hole state per lock
        budget: Limits on time, depth, branches and solutions per hole
        heuristics: Guided search when True, plain enumeration otherwise
        workers: Branches processed in parallel per level
        solver: Solver shared by all branches

    Yields:
        SolutionRecord in emission order, then SearchTruncated if cut short
    """
    search = _Search(spec, root, budget, heuristics, workers, solver or Solver(spec))
    log.info("search_started", holes=len(search.holes), heuristics=heuristics, workers=workers, max_depth=budget.max_depth)
    yield from search.run()
    log.info("search_finished", explored=search.explored, solutions=sum(len(v) for v in search.emitted.values()))
