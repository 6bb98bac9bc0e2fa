"""
Scope graphs and query resolution.
Scopes, labelled edges and scope data, plus the Ans function: reachability by
label regex, data filtering and visibility by label order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Optional, Protocol

from tools.label_regex import EmptySet, Regex, derivative, first_set, invert, nullable
from tools.terms import App, LabelLit, ScopeRef, Substitution, Term, scopes_in

# Pseudo-label for the end of a path in visibility orders
END = "$"


class UnknownScope(LookupError):
    """Raised when an edge endpoint or query source is not a scope of the graph."""


# --- Label orders ---

@dataclass(frozen=True)
class LabelOrder:
    """Strict partial order on labels; (a, b) means a is preferred over b."""

    pairs: frozenset[tuple[str, str]] = frozenset()
    name: str = ""

    @classmethod
    def from_chains(cls, chains: list[list[str]], name: str = "") -> "LabelOrder":
        """
        Build an order from chains such as [["VAR", "IMP", "LEX"]].

        Raises:
            ValueError: if the transitive closure is not irreflexive
        """
        pairs = set()
        for chain in chains:
            pairs.update(zip(chain, chain[1:]))
        closed = _transitive_closure(pairs)
        cyclic = sorted(a for a, b in closed if a == b)
        if cyclic:
            raise ValueError(f"order {name or '<anonymous>'} is cyclic through {', '.join(cyclic)}")
        return cls(frozenset(closed), name)

    def prefers(self, a: str, b: str) -> bool:
        return (a, b) in self.pairs

    def labels(self) -> frozenset[str]:
        return frozenset(l for pair in self.pairs for l in pair)

    def __str__(self) -> str:
        return self.name or ", ".join(f"{a} < {b}" for a, b in sorted(self.pairs))


def _transitive_closure(pairs: set[tuple[str, str]]) -> set[tuple[str, str]]:
    closed = set(pairs)
    while True:
        extra = {(a, d) for a, b in closed for c, d in closed if b == c} - closed
        if not extra:
            return closed
        closed |= extra


EMPTY_ORDER = LabelOrder()


# --- Graph ---

@dataclass(frozen=True)
class ScopeGraph:
    """
    Persistent scope graph.

    Scope ids are dense integers; extending a graph returns a new value and
    leaves the original untouched, so forked configurations share structure.
    """

    data: tuple[Optional[Term], ...] = ()
    out_edges: Mapping[int, tuple[tuple[str, int], ...]] = field(default_factory=dict)
    in_edges: Mapping[int, tuple[tuple[str, int], ...]] = field(default_factory=dict)

    def __hash__(self):
        return hash((self.data, frozenset(self.edges())))

    @property
    def scopes(self) -> range:
        return range(len(self.data))

    def __contains__(self, scope: int) -> bool:
        return 0 <= scope < len(self.data)

    def data_of(self, scope: int) -> Optional[Term]:
        self._require(scope)
        return self.data[scope]

    def edges(self) -> Iterator[tuple[int, str, int]]:
        for src in sorted(self.out_edges):
            for label, dst in self.out_edges[src]:
                yield src, label, dst

    def outgoing(self, scope: int) -> tuple[tuple[str, int], ...]:
        return self.out_edges.get(scope, ())

    def incoming(self, scope: int) -> tuple[tuple[str, int], ...]:
        return self.in_edges.get(scope, ())

    def edge_count(self) -> int:
        return sum(len(v) for v in self.out_edges.values())

    def alias(self, scope: int) -> str:
        return f"s{scope}"

    def _require(self, scope: int):
        if scope not in self:
            raise UnknownScope(f"unknown scope $s{scope}")

    def map_data(self, fn: Callable[[Term], Term]) -> "ScopeGraph":
        """Rewrite every data term; returns self when nothing changed."""
        changed = False
        new_data = []
        for d in self.data:
            nd = d if d is None else fn(d)
            changed |= nd is not d
            new_data.append(nd)
        if not changed:
            return self
        return ScopeGraph(tuple(new_data), self.out_edges, self.in_edges)


def add_scope(g: ScopeGraph, data: Optional[Term]) -> tuple[ScopeGraph, int]:
    """
    Add a fresh scope carrying data.

    Args:
        g: Graph to extend
        data: Term associated with the scope (may be None)

    Returns:
        (extended graph, new scope id)
    """
    scope = len(g.data)
    return ScopeGraph(g.data + (data,), g.out_edges, g.in_edges), scope


def add_edge(g: ScopeGraph, src: int, label: str, dst: int) -> ScopeGraph:
    g._require(src)
    g._require(dst)
    if (label, dst) in g.outgoing(src):
        return g
    out_edges = dict(g.out_edges)
    out_edges[src] = g.outgoing(src) + ((label, dst),)
    in_edges = dict(g.in_edges)
    in_edges[dst] = g.incoming(dst) + ((label, src),)
    return ScopeGraph(g.data, out_edges, in_edges)


def data_contains(g: ScopeGraph, scope: int, needle: int) -> bool:
    """True iff needle occurs as a scope reference inside the data of scope."""
    d = g.data_of(scope)
    return d is not None and needle in set(scopes_in(d))


# --- Paths ---

@dataclass(frozen=True, order=True)
class ResolutionPath:
    source: int
    steps: tuple[tuple[str, int], ...] = ()

    @property
    def target(self) -> int:
        return self.steps[-1][1] if self.steps else self.source

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.steps)

    @property
    def scopes(self) -> tuple[int, ...]:
        return (self.source,) + tuple(s for _, s in self.steps)

    def left_scopes(self) -> frozenset[int]:
        """Scopes the path departs from; each may be left only once."""
        return frozenset(self.scopes[:-1])

    def extend(self, label: str, scope: int) -> "ResolutionPath":
        return ResolutionPath(self.source, self.steps + ((label, scope),))

    def to_term(self) -> Term:
        term: Term = App("path", (ScopeRef(self.source),))
        for label, scope in self.steps:
            term = App("step", (term, LabelLit(label), ScopeRef(scope)))
        return term

    def __str__(self) -> str:
        text = f"$s{self.source}"
        for label, scope in self.steps:
            text += f" -{label}-> $s{scope}"
        return text


def path_from_term(t: Term) -> Optional[ResolutionPath]:
    """Decode a ground path term; None if t is not one."""
    steps = []
    while isinstance(t, App) and t.ctor == "step" and len(t.args) == 3:
        prev, label, scope = t.args
        if not isinstance(label, LabelLit) or not isinstance(scope, ScopeRef):
            return None
        steps.append((label.label, scope.scope))
        t = prev
    if isinstance(t, App) and t.ctor == "path" and len(t.args) == 1 and isinstance(t.args[0], ScopeRef):
        return ResolutionPath(t.args[0].scope, tuple(reversed(steps)))
    return None


def path_target(t: Term) -> Optional[ScopeRef]:
    """The tgt projection: target scope of a path term, if t is one."""
    if isinstance(t, App) and t.ctor == "step" and len(t.args) == 3 and isinstance(t.args[2], ScopeRef):
        return t.args[2]
    if isinstance(t, App) and t.ctor == "path" and len(t.args) == 1 and isinstance(t.args[0], ScopeRef):
        return t.args[0]
    return None


# --- Resolution ---

class DataPredicate(Protocol):
    """Filter over a candidate target scope, witnessed by a substitution."""

    def matches(self, g: ScopeGraph, scope: int) -> Optional[Substitution]:
        ...


def reachable_paths(g: ScopeGraph, source: int, r: Regex) -> Iterator[ResolutionPath]:
    """All well-formed paths from source whose label word matches r."""
    g._require(source)
    stack = [(ResolutionPath(source), r)]
    while stack:
        path, residual = stack.pop()
        if nullable(residual):
            yield path
        here = path.target
        if here in path.left_scopes():
            continue
        for label, dst in g.outgoing(here):
            nxt = derivative(residual, label)
            if not isinstance(nxt, EmptySet):
                stack.append((path.extend(label, dst), nxt))


def shadows(order: LabelOrder, better: ResolutionPath, worse: ResolutionPath) -> bool:
    """True iff better wins at the first position where the two label words differ."""
    a, b = better.labels, worse.labels
    for i in range(max(len(a), len(b))):
        la = a[i] if i < len(a) else END
        lb = b[i] if i < len(b) else END
        if la != lb:
            return order.prefers(la, lb)
    return False


def visible(order: LabelOrder, paths: list[ResolutionPath]) -> list[ResolutionPath]:
    if not order.pairs:
        return list(paths)
    return [p for p in paths if not any(shadows(order, q, p) for q in paths if q is not p)]


def resolve(
    g: ScopeGraph,
    source: int,
    r: Regex,
    data_filter: DataPredicate,
    order: LabelOrder = EMPTY_ORDER,
) -> list[tuple[ResolutionPath, Substitution]]:
    """
    Answer a query: visible, well-formed paths whose target data passes the filter.

    Args:
        g: Scope graph
        source: Scope the query starts from
        r: Reachability regex
        data_filter: Predicate over target scopes
        order: Visibility order

    Returns:
        Sorted list of (path, witnessing substitution)

    Example:
        >>> answers = resolve(graph, 2, parse_regex("LEX* IMP? VAR"), is_var_x, lex_var)
        >>> [str(p) for p, _ in answers]
        ['$s2 -IMP-> $s1 -VAR-> $s4']
    """
    witnessed: dict[ResolutionPath, Substitution] = {}
    for path in reachable_paths(g, source, r):
        theta = data_filter.matches(g, path.target)
        if theta is not None:
            witnessed[path] = theta
    kept = visible(order, sorted(witnessed))
    return [(p, witnessed[p]) for p in kept]


@dataclass(frozen=True)
class IncompleteGraph:
    """Backward traversal reached a (scope, label) pair that pending constraints may still extend."""

    blockers: frozenset[tuple[Optional[int], str]]
    candidates: tuple[tuple[int, ResolutionPath], ...] = ()


def resolve_backward(
    g: ScopeGraph,
    target: int,
    r: Regex,
    open_scopes: frozenset[tuple[Optional[int], str]] = frozenset(),
    source: Optional[int] = None,
) -> list[tuple[int, ResolutionPath]] | IncompleteGraph:
    """
    Find source scopes from which target is reachable under r.

    Walks incoming edges guided by invert(r). Shadowing is not checked here.
    When an open (scope, label) pair could add an edge the traversal needs,
    the result is IncompleteGraph carrying the blockers and what was found.
    With a known query source, open pairs only count if one of them is
    critical for a query from that source; otherwise no new edge can put a
    path from source on the target.
    """
    g._require(target)
    if source is not None:
        critical = critical_edges(g, source, r)
        if not any(
            label == c_label and (scope is None or scope == c_scope)
            for scope, label in open_scopes
            for c_scope, c_label in critical
        ):
            open_scopes = frozenset()
    found: dict[tuple[int, ResolutionPath], None] = {}
    blockers: set[tuple[Optional[int], str]] = set()
    # State: forward path suffix ending at target, residual of the inverted regex
    stack = [(ResolutionPath(target), invert(r))]
    while stack:
        suffix, residual = stack.pop()
        head = suffix.source
        if nullable(residual):
            found[(head, suffix)] = None
        left = suffix.left_scopes()
        labels = first_set(residual)
        for scope, label in open_scopes:
            if label in labels and scope not in left:
                blockers.add((scope, label))
        for label, src in g.incoming(head):
            nxt = derivative(residual, label)
            if isinstance(nxt, EmptySet) or src in left:
                continue
            stack.append((ResolutionPath(src, ((label, head),) + suffix.steps), nxt))
    candidates = sorted(found)
    if blockers:
        return IncompleteGraph(frozenset(blockers), tuple(candidates))
    return candidates


def critical_edges(g: ScopeGraph, source: int, r: Regex) -> frozenset[tuple[int, str]]:
    """(scope, label) pairs a new edge on which could change the answer of a query from source."""
    critical: set[tuple[int, str]] = set()
    seen: set[tuple[int, Regex]] = set()
    stack = [(source, r)]
    while stack:
        scope, residual = stack.pop()
        if (scope, residual) in seen:
            continue
        seen.add((scope, residual))
        for label in first_set(residual):
            critical.add((scope, label))
        for label, dst in g.outgoing(scope):
            nxt = derivative(residual, label)
            if not isinstance(nxt, EmptySet):
                stack.append((dst, nxt))
    return frozenset(critical)
