"""
Constraint solver.
Configurations, the deterministic step rules, the query guard and exhaustive
solving to success, failure or a stuck state.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Optional, Union

import structlog

from tools.constraints import (
    Conj,
    Constraint,
    DataFilter,
    DataOf,
    EConj,
    EExists,
    Emp,
    Eq,
    Exists,
    FalseC,
    Forall,
    NewEdge,
    NewScope,
    Pred,
    Query,
    Single,
    Specification,
    freshen,
    has_tgt,
    matching_rules,
    reduce_tgt,
    walk,
)
from tools.holes import HoleId
from tools.label_regex import Regex
from tools.scope_graph import (
    LabelOrder,
    ScopeGraph,
    UnknownScope,
    add_edge,
    add_scope,
    critical_edges,
    resolve,
)
from tools.terms import (
    App,
    Failure,
    ScopeRef,
    SetLit,
    SetVar,
    Substitution,
    Term,
    Var,
    fresh_var,
    mgu,
    term_vars,
)

log = structlog.get_logger(__name__)

DEFAULT_FUEL = 100_000


class FuelExhausted(RuntimeError):
    """The step budget of one exhaustive solve ran out."""


# --- Configuration ---

@dataclass(frozen=True)
class QueryStep:
    """A query that extended a composite path: from source, answering target."""

    source: int
    target: int
    regex: Regex
    order: LabelOrder
    filter: DataFilter

    def __str__(self) -> str:
        return f"query $s{self.source} regex {self.regex} -> $s{self.target}"


@dataclass(frozen=True)
class HoleState:
    path: tuple[int, ...]
    term: Term
    # steps[i] connects path[i] to path[i + 1]
    steps: tuple[QueryStep, ...] = ()

    def prepend(self, scope: int, step: QueryStep) -> "HoleState":
        return HoleState((scope,) + self.path, self.term, (step,) + self.steps)


@dataclass(frozen=True)
class Configuration:
    graph: ScopeGraph = field(default_factory=ScopeGraph)
    constraints: tuple[Constraint, ...] = ()
    holes_by_var: Mapping[Var, HoleId] = field(default_factory=dict)
    hole_states: Mapping[HoleId, HoleState] = field(default_factory=dict)

    def __hash__(self):
        return id(self)

    def apply(self, theta: Substitution) -> Optional["Configuration"]:
        """
        Apply a substitution everywhere, propagating hole ownership.

        Returns None when a variable would come to belong to two holes.
        """
        if theta.is_empty:
            return self
        holes = dict(self.holes_by_var)
        for var, hole in self.holes_by_var.items():
            if var not in theta.term_map:
                continue
            for y in term_vars(theta.apply(var)):
                owner = holes.get(y)
                if owner is not None and owner != hole:
                    return None
                holes[y] = hole
        graph = self.graph.map_data(theta.apply)
        constraints = tuple(c.apply(theta) for c in self.constraints)
        states = {
            h: HoleState(
                hs.path,
                theta.apply(hs.term),
                tuple(replace(step, filter=step.filter.apply(theta)) for step in hs.steps),
            )
            for h, hs in self.hole_states.items()
        }
        return Configuration(graph, constraints, holes, states)

    def replace_constraint(self, index: int, *new: Constraint) -> "Configuration":
        rest = self.constraints[:index] + self.constraints[index + 1:]
        return replace(self, constraints=rest + tuple(c for c in new if not isinstance(c, Emp)))

    def with_hole(self, hole: HoleId, state: HoleState) -> "Configuration":
        states = dict(self.hole_states)
        states[hole] = state
        return replace(self, hole_states=states)


# --- Step outcomes ---

@dataclass(frozen=True)
class Progressed:
    configuration: Configuration
    rule: str
    constraint: Constraint
    substitution: Substitution = Substitution()


@dataclass(frozen=True)
class Failed:
    reason: str
    constraint: Optional[Constraint] = None

    def __str__(self) -> str:
        return f"{self.reason}: {self.constraint}" if self.constraint is not None else self.reason


@dataclass(frozen=True)
class Stuck:
    pass


STUCK = Stuck()

StepOutcome = Union[Progressed, Failed, Stuck]


class Status(enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    STUCK = "stuck"


@dataclass(frozen=True)
class SolveResult:
    configuration: Configuration
    status: Status
    failure: Optional[Failed] = None
    steps: int = 0


# --- Potential edges and the guard ---

Edge = tuple[Optional[int], str]


def potential_edges(spec: Specification, constraints: Iterable[Constraint]) -> frozenset[Edge]:
    """
    Over-approximate the edges pending constraints may still add.

    Args:
        spec: Specification with precomputed predicate footprints
        constraints: Pending constraints

    Returns:
        Set of (scope or None for unknown, label)

    Example:
        >>> potential_edges(spec, [parse_constraint("importOk($s3, import(?r))")])
        frozenset({(3, 'IMP')})
    """
    found: set[Edge] = set()
    for root in constraints:
        for c in walk(root):
            if isinstance(c, NewEdge):
                src = reduce_tgt(c.src)
                found.add((src.scope if isinstance(src, ScopeRef) else None, c.label))
            elif isinstance(c, Pred):
                for pos, label in spec.footprints.get(c.symbol, ()):
                    arg = reduce_tgt(c.args[pos]) if pos is not None and pos < len(c.args) else None
                    found.add((arg.scope if isinstance(arg, ScopeRef) else None, label))
    return frozenset(found)


def conflicts(potential: frozenset[Edge], critical: frozenset[tuple[int, str]]) -> bool:
    critical_labels = {label for _, label in critical}
    for scope, label in potential:
        if scope is None:
            if label in critical_labels:
                return True
        elif (scope, label) in critical:
            return True
    return False


def guard(spec: Specification, k: Configuration, q: Query, index: Optional[int] = None) -> bool:
    """
    True iff no pending constraint may add an edge that changes the answer of q.

    The query's own continuation counts as pending. q's source must be ground.
    """
    source = reduce_tgt(q.source)
    if not isinstance(source, ScopeRef):
        raise ValueError(f"guard needs a ground query source, got {source}")
    others = [c for i, c in enumerate(k.constraints) if i != index and c is not q]
    potential = potential_edges(spec, others + [q.cont])
    if not potential:
        return True
    return not conflicts(potential, critical_edges(k.graph, source.scope, q.regex))


# --- Step rules ---

def _substitute(k: Configuration, index: int, theta: Substitution, rule: str, c: Constraint, *new) -> StepOutcome:
    k2 = k.replace_constraint(index, *new).apply(theta)
    if k2 is None:
        return Failed("hole-conflict", c)
    return Progressed(k2, rule, c, theta)


def answer_query(g: ScopeGraph, q: Query, source: int) -> SetLit:
    answers = resolve(g, source, q.regex, q.filter, q.order)
    elements = []
    for path, _ in answers:
        data = g.data_of(path.target)
        elements.append(App("ans", (path.to_term(), data if data is not None else App("none"))))
    return SetLit(tuple(elements))


def try_step(spec: Specification, k: Configuration, index: int) -> StepOutcome:
    """Apply the rule for the constraint at index, or report it stuck."""
    c = k.constraints[index]

    if isinstance(c, Emp):
        return Progressed(k.replace_constraint(index), "Op-Emp", c)
    if isinstance(c, FalseC):
        return Failed("false", c)
    if isinstance(c, (Conj, EConj)):
        return Progressed(k.replace_constraint(index, c.left, c.right), "Op-Conj", c)
    if isinstance(c, (Exists, EExists)):
        fresh = fresh_var(c.binder.name)
        body = c.body.rename({c.binder.name: fresh.name})
        return Progressed(k.replace_constraint(index, body), "Op-Exists", c)

    if isinstance(c, Eq):
        left, right = reduce_tgt(c.left), reduce_tgt(c.right)
        if has_tgt(left) or has_tgt(right):
            return STUCK
        theta = mgu(left, right)
        if isinstance(theta, Failure):
            return Failed(str(theta), c)
        return _substitute(k, index, theta, "Op-Eq", c)

    if isinstance(c, DataOf):
        scope = reduce_tgt(c.scope)
        if not isinstance(scope, ScopeRef):
            return STUCK
        if scope.scope not in k.graph:
            return Failed("unknown scope", c)
        data = k.graph.data_of(scope.scope)
        if data is None:
            return Failed("scope carries no data", c)
        return Progressed(k.replace_constraint(index, Eq(data, c.term)), "Op-Data", c)

    if isinstance(c, Single):
        if isinstance(c.set_term, SetVar):
            return STUCK
        if len(c.set_term.elements) != 1:
            return Failed(f"expected one element, found {len(c.set_term.elements)}", c)
        return Progressed(k.replace_constraint(index, Eq(c.term, c.set_term.elements[0])), "Op-Singleton", c)

    if isinstance(c, Forall):
        if isinstance(c.set_term, SetVar):
            return STUCK
        bodies = [freshen(c.body.apply(Substitution({c.binder: e}))) for e in c.set_term.elements]
        return Progressed(k.replace_constraint(index, *bodies), "Op-Forall", c)

    if isinstance(c, NewScope):
        if not isinstance(c.var, Var):
            return Failed("new on a bound scope variable", c)
        graph, scope = add_scope(k.graph, c.data)
        k2 = replace(k, graph=graph)
        return _substitute(k2, index, Substitution({c.var: ScopeRef(scope)}), "Op-New-Scope", c)

    if isinstance(c, NewEdge):
        src, dst = reduce_tgt(c.src), reduce_tgt(c.dst)
        if not isinstance(src, ScopeRef) or not isinstance(dst, ScopeRef):
            return STUCK
        try:
            graph = add_edge(k.graph, src.scope, c.label, dst.scope)
        except UnknownScope as e:
            return Failed(str(e), c)
        return Progressed(replace(k.replace_constraint(index), graph=graph), "Op-New-Edge", c)

    if isinstance(c, Query):
        source = reduce_tgt(c.source)
        if not isinstance(source, ScopeRef) or c.filter.free_vars():
            return STUCK
        if source.scope not in k.graph:
            return Failed("unknown query source", c)
        if not guard(spec, k, c, index):
            return STUCK
        literal = answer_query(k.graph, c, source.scope)
        cont = c.cont.apply(Substitution({}, {c.result: literal}))
        return Progressed(k.replace_constraint(index, cont), "Op-Query", c)

    if isinstance(c, Pred):
        matches = matching_rules(spec, c)
        if not matches:
            return Failed("no matching rule", c)
        if len(matches) > 1:
            return STUCK
        rule, theta = matches[0]
        return _substitute(k, index, theta, f"Op-Pred[{rule.name}]", c, rule.body)

    raise TypeError(f"unknown constraint {c!r}")


# Constraints whose stuckness depends only on their own terms; queries also depend on the graph
_CACHEABLE = (Eq, DataOf, Single, Forall, NewEdge, Pred)


class Solver:
    """
    Exhaustive application of the step rules.

    Args:
        spec: Loaded specification
        fuel: Maximum number of steps per solve
        tracer: Optional callback receiving one line per step
        rng: When given, the next constraint is picked at random instead of FIFO
    """

    def __init__(
        self,
        spec: Specification,
        fuel: int = DEFAULT_FUEL,
        tracer: Optional[Callable[[str], None]] = None,
        rng: Optional[random.Random] = None,
    ):
        self.spec = spec
        self.fuel = fuel
        self.tracer = tracer
        self.rng = rng

    def step(self, k: Configuration, stuck: Optional[dict[int, Constraint]] = None) -> StepOutcome:
        order = list(range(len(k.constraints)))
        if self.rng is not None:
            self.rng.shuffle(order)
        for i in order:
            c = k.constraints[i]
            if stuck is not None and id(c) in stuck:
                continue
            outcome = try_step(self.spec, k, i)
            if not isinstance(outcome, Stuck):
                return outcome
            if stuck is not None and isinstance(c, _CACHEABLE):
                stuck[id(c)] = c
        return STUCK

    def solve(self, k: Configuration) -> SolveResult:
        stuck: dict[int, Constraint] = {}
        steps = 0
        while k.constraints:
            outcome = self.step(k, stuck)
            if isinstance(outcome, Stuck):
                return SolveResult(k, Status.STUCK, steps=steps)
            steps += 1
            if self.tracer is not None:
                self.tracer(f"step {steps} {_rule_of(outcome)} {_constraint_of(outcome)} {_subst_of(outcome)}")
            if isinstance(outcome, Failed):
                log.debug("solve_failed", reason=outcome.reason, constraint=str(outcome.constraint), steps=steps)
                return SolveResult(k, Status.FAILURE, failure=outcome, steps=steps)
            if steps >= self.fuel:
                raise FuelExhausted(f"no result after {steps} steps")
            k = outcome.configuration
        return SolveResult(k, Status.SUCCESS, steps=steps)


def _rule_of(outcome: StepOutcome) -> str:
    return outcome.rule if isinstance(outcome, Progressed) else "Failed"


def _constraint_of(outcome: StepOutcome) -> str:
    return str(outcome.constraint)


def _subst_of(outcome: StepOutcome) -> str:
    return str(outcome.substitution) if isinstance(outcome, Progressed) else outcome.reason


def step(spec: Specification, k: Configuration) -> StepOutcome:
    return Solver(spec).step(k)


def solve_exhaustively(spec: Specification, k: Configuration, fuel: int = DEFAULT_FUEL) -> SolveResult:
    return Solver(spec, fuel=fuel).solve(k)


def initial_configuration(goal: Constraint, holes_by_var: Mapping[Var, HoleId] | None = None) -> Configuration:
    return Configuration(ScopeGraph(), (goal,), dict(holes_by_var or {}), {})
