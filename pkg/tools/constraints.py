"""
Constraint language.
The constraint AST, equality-constraint evaluation, predicate rules and the
loaded specification with its load-time checks and analyses.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, Optional, Union

from tools.label_regex import Regex, alphabet
from tools.scope_graph import LabelOrder, ScopeGraph, path_target
from tools.terms import (
    EMPTY,
    App,
    Failure,
    LabelLit,
    ScopeRef,
    SetLit,
    SetTerm,
    SetVar,
    Substitution,
    Term,
    Var,
    compose,
    fresh_var,
    mgu,
    mgu_all,
    term_vars,
)


# --- Errors ---

class SpecError(Exception):
    """Base class for problems found while loading a specification."""


class SpecParseError(SpecError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{line}:{column}: {message}" if line else message)
        self.line = line
        self.column = column


class ArityMismatch(SpecError):
    pass


class OverlappingRules(SpecError):
    def __init__(self, rule1: str, rule2: str):
        super().__init__(f"rules {rule1} and {rule2} have unifiable heads")
        self.rule1 = rule1
        self.rule2 = rule2


class UnboundVariable(SpecError):
    pass


class UnknownLabel(SpecError):
    pass


class InvalidOrder(SpecError):
    pass


# --- Term helpers ---

def _rename_term(t: Term, ren: Mapping[str, str]) -> Term:
    if isinstance(t, Var):
        name = ren.get(t.name)
        return t if name is None else Var(name)
    if isinstance(t, App) and t.args:
        args = tuple(_rename_term(a, ren) for a in t.args)
        if all(a is b for a, b in zip(args, t.args)):
            return t
        return App(t.ctor, args)
    return t


def _rename_set(st: SetTerm, ren: Mapping[str, str]) -> SetTerm:
    if isinstance(st, SetVar):
        name = ren.get(st.name)
        return st if name is None else SetVar(name)
    return SetLit(tuple(_rename_term(e, ren) for e in st.elements))


def _set_free_vars(st: SetTerm) -> frozenset[Var]:
    if isinstance(st, SetLit):
        return frozenset(v for e in st.elements for v in term_vars(e))
    return frozenset()


def reduce_tgt(t: Term) -> Term:
    """Rewrite tgt(P) to the target scope wherever P is a ground path term."""
    if isinstance(t, App) and t.args:
        args = tuple(reduce_tgt(a) for a in t.args)
        if t.ctor == "tgt" and len(args) == 1:
            target = path_target(args[0])
            if target is not None:
                return target
        if all(a is b for a, b in zip(args, t.args)):
            return t
        return App(t.ctor, args)
    return t


def has_tgt(t: Term) -> bool:
    if isinstance(t, App):
        return t.ctor == "tgt" or any(has_tgt(a) for a in t.args)
    return False


# --- Equality constraints ---

@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"{self.left} = {self.right}"

    def apply(self, s: Substitution) -> "Eq":
        left, right = s.apply(self.left), s.apply(self.right)
        return self if left is self.left and right is self.right else Eq(left, right)

    def free_vars(self) -> frozenset[Var]:
        return frozenset(term_vars(self.left)) | frozenset(term_vars(self.right))

    def rename(self, ren: Mapping[str, str]) -> "Eq":
        return Eq(_rename_term(self.left, ren), _rename_term(self.right, ren))

    def binders(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class DataOf:
    scope: Term
    term: Term

    def __str__(self) -> str:
        return f"dataOf({self.scope}, {self.term})"

    def apply(self, s: Substitution) -> "DataOf":
        scope, term = s.apply(self.scope), s.apply(self.term)
        return self if scope is self.scope and term is self.term else DataOf(scope, term)

    def free_vars(self) -> frozenset[Var]:
        return frozenset(term_vars(self.scope)) | frozenset(term_vars(self.term))

    def rename(self, ren: Mapping[str, str]) -> "DataOf":
        return DataOf(_rename_term(self.scope, ren), _rename_term(self.term, ren))

    def binders(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class EConj:
    left: "EqConstraint"
    right: "EqConstraint"

    def __str__(self) -> str:
        return f"{self.left} * {self.right}"

    def apply(self, s: Substitution) -> "EConj":
        left, right = self.left.apply(s), self.right.apply(s)
        return self if left is self.left and right is self.right else EConj(left, right)

    def free_vars(self) -> frozenset[Var]:
        return self.left.free_vars() | self.right.free_vars()

    def rename(self, ren: Mapping[str, str]) -> "EConj":
        return EConj(self.left.rename(ren), self.right.rename(ren))

    def binders(self) -> tuple[str, ...]:
        return self.left.binders() + self.right.binders()


@dataclass(frozen=True)
class EExists:
    binder: Var
    body: "EqConstraint"

    def __str__(self) -> str:
        return f"exists {self.binder}. ({self.body})"

    def apply(self, s: Substitution) -> "EExists":
        body = self.body.apply(s.without([self.binder]))
        return self if body is self.body else EExists(self.binder, body)

    def free_vars(self) -> frozenset[Var]:
        return self.body.free_vars() - {self.binder}

    def rename(self, ren: Mapping[str, str]) -> "EExists":
        return EExists(_rename_term(self.binder, ren), self.body.rename(ren))

    def binders(self) -> tuple[str, ...]:
        return (self.binder.name,) + self.body.binders()


EqConstraint = Union[Eq, DataOf, EConj, EExists]


def eval_eq(g: ScopeGraph, e: EqConstraint, _seen: Substitution = EMPTY) -> Substitution | Failure:
    """
    Evaluate an equality constraint to its unifier.

    Conjunctions are evaluated left to right; the unifier of the left part is
    applied to the right part and to the scope data it inspects.

    Args:
        g: Scope graph providing scope data
        e: Equality constraint

    Returns:
        Substitution, or Failure ("clash", "occurs" or "not-ground")

    Example:
        >>> str(eval_eq(g, DataOf(ScopeRef(1), parse_term("decl(?n, ?T)"))))
        '{?n -> x, ?T -> int}'
    """
    if isinstance(e, Eq):
        left, right = reduce_tgt(e.left), reduce_tgt(e.right)
        if has_tgt(left) or has_tgt(right):
            return Failure("not-ground", f"tgt of a non-path term in {e}")
        return mgu(left, right)
    if isinstance(e, DataOf):
        scope = reduce_tgt(e.scope)
        if not isinstance(scope, ScopeRef):
            return Failure("not-ground", f"dataOf on {scope}")
        if scope.scope not in g:
            return Failure("clash", f"unknown scope {scope}")
        data = g.data_of(scope.scope)
        if data is None:
            return Failure("clash", f"{scope} carries no data")
        return mgu(_seen.apply(data), e.term)
    if isinstance(e, EConj):
        first = eval_eq(g, e.left, _seen)
        if isinstance(first, Failure):
            return first
        second = eval_eq(g, e.right.apply(first), compose(_seen, first))
        if isinstance(second, Failure):
            return second
        return compose(first, second)
    if isinstance(e, EExists):
        fresh = fresh_var(e.binder.name)
        return eval_eq(g, e.body.rename({e.binder.name: fresh.name}), _seen)
    raise TypeError(f"not an equality constraint: {e!r}")


@dataclass(frozen=True)
class DataFilter:
    """The λy.E filter of a query; E sees the candidate target scope as y."""

    binder: Var
    body: EqConstraint

    def __str__(self) -> str:
        return f"({self.binder}) => {self.body}"

    def at(self, scope: int) -> EqConstraint:
        return self.body.apply(Substitution({self.binder: ScopeRef(scope)}))

    def matches(self, g: ScopeGraph, scope: int) -> Optional[Substitution]:
        result = eval_eq(g, self.at(scope))
        return None if isinstance(result, Failure) else result

    def apply(self, s: Substitution) -> "DataFilter":
        body = self.body.apply(s.without([self.binder]))
        return self if body is self.body else DataFilter(self.binder, body)

    def free_vars(self) -> frozenset[Var]:
        return self.body.free_vars() - {self.binder}

    def rename(self, ren: Mapping[str, str]) -> "DataFilter":
        return DataFilter(_rename_term(self.binder, ren), self.body.rename(ren))


# --- Constraints ---

@dataclass(frozen=True)
class Emp:
    def __str__(self) -> str:
        return "emp"

    def apply(self, s):
        return self

    def free_vars(self) -> frozenset[Var]:
        return frozenset()

    def rename(self, ren):
        return self

    def binders(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class FalseC:
    def __str__(self) -> str:
        return "false"

    def apply(self, s):
        return self

    def free_vars(self) -> frozenset[Var]:
        return frozenset()

    def rename(self, ren):
        return self

    def binders(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class Conj:
    left: "Constraint"
    right: "Constraint"

    def __str__(self) -> str:
        return f"{self.left} * {self.right}"

    def apply(self, s: Substitution) -> "Conj":
        left, right = self.left.apply(s), self.right.apply(s)
        return self if left is self.left and right is self.right else Conj(left, right)

    def free_vars(self) -> frozenset[Var]:
        return self.left.free_vars() | self.right.free_vars()

    def rename(self, ren: Mapping[str, str]) -> "Conj":
        return Conj(self.left.rename(ren), self.right.rename(ren))

    def binders(self) -> tuple[str, ...]:
        return self.left.binders() + self.right.binders()


@dataclass(frozen=True)
class Exists:
    binder: Var
    body: "Constraint"

    def __str__(self) -> str:
        return f"exists {self.binder}. ({self.body})"

    def apply(self, s: Substitution) -> "Exists":
        body = self.body.apply(s.without([self.binder]))
        return self if body is self.body else Exists(self.binder, body)

    def free_vars(self) -> frozenset[Var]:
        return self.body.free_vars() - {self.binder}

    def rename(self, ren: Mapping[str, str]) -> "Exists":
        return Exists(_rename_term(self.binder, ren), self.body.rename(ren))

    def binders(self) -> tuple[str, ...]:
        return (self.binder.name,) + self.body.binders()


@dataclass(frozen=True)
class Single:
    term: Term
    set_term: SetTerm

    def __str__(self) -> str:
        return f"single({self.term}, {self.set_term})"

    def apply(self, s: Substitution) -> "Single":
        term, st = s.apply(self.term), s.apply_set(self.set_term)
        return self if term is self.term and st is self.set_term else Single(term, st)

    def free_vars(self) -> frozenset[Var]:
        return frozenset(term_vars(self.term)) | _set_free_vars(self.set_term)

    def rename(self, ren: Mapping[str, str]) -> "Single":
        return Single(_rename_term(self.term, ren), _rename_set(self.set_term, ren))

    def binders(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class Forall:
    binder: Var
    set_term: SetTerm
    body: "Constraint"

    def __str__(self) -> str:
        return f"forall {self.binder} in {self.set_term}. ({self.body})"

    def apply(self, s: Substitution) -> "Forall":
        st = s.apply_set(self.set_term)
        body = self.body.apply(s.without([self.binder]))
        return self if st is self.set_term and body is self.body else Forall(self.binder, st, body)

    def free_vars(self) -> frozenset[Var]:
        return _set_free_vars(self.set_term) | (self.body.free_vars() - {self.binder})

    def rename(self, ren: Mapping[str, str]) -> "Forall":
        return Forall(_rename_term(self.binder, ren), _rename_set(self.set_term, ren), self.body.rename(ren))

    def binders(self) -> tuple[str, ...]:
        return (self.binder.name,) + self.body.binders()


@dataclass(frozen=True)
class NewScope:
    var: Term
    data: Optional[Term] = None

    def __str__(self) -> str:
        return f"new {self.var}" + (f" -> {self.data}" if self.data is not None else "")

    def apply(self, s: Substitution) -> "NewScope":
        var = s.apply(self.var)
        data = None if self.data is None else s.apply(self.data)
        return self if var is self.var and data is self.data else NewScope(var, data)

    def free_vars(self) -> frozenset[Var]:
        found = frozenset(term_vars(self.var))
        return found if self.data is None else found | frozenset(term_vars(self.data))

    def rename(self, ren: Mapping[str, str]) -> "NewScope":
        data = None if self.data is None else _rename_term(self.data, ren)
        return NewScope(_rename_term(self.var, ren), data)

    def binders(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class NewEdge:
    src: Term
    label: str
    dst: Term

    def __str__(self) -> str:
        return f"{self.src} -[{self.label}]-> {self.dst}"

    def apply(self, s: Substitution) -> "NewEdge":
        src, dst = s.apply(self.src), s.apply(self.dst)
        return self if src is self.src and dst is self.dst else NewEdge(src, self.label, dst)

    def free_vars(self) -> frozenset[Var]:
        return frozenset(term_vars(self.src)) | frozenset(term_vars(self.dst))

    def rename(self, ren: Mapping[str, str]) -> "NewEdge":
        return NewEdge(_rename_term(self.src, ren), self.label, _rename_term(self.dst, ren))

    def binders(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class Query:
    source: Term
    regex: Regex
    order: LabelOrder
    filter: DataFilter
    result: SetVar
    cont: "Constraint"

    def __str__(self) -> str:
        order = f" order {self.order}" if self.order.pairs else ""
        return f"query {self.source} regex {self.regex}{order} filter {self.filter} as {self.result}. ({self.cont})"

    def apply(self, s: Substitution) -> "Query":
        source = s.apply(self.source)
        flt = self.filter.apply(s)
        cont = self.cont.apply(s.without([self.result]))
        if source is self.source and flt is self.filter and cont is self.cont:
            return self
        return Query(source, self.regex, self.order, flt, self.result, cont)

    def free_vars(self) -> frozenset[Var]:
        return frozenset(term_vars(self.source)) | self.filter.free_vars() | self.cont.free_vars()

    def rename(self, ren: Mapping[str, str]) -> "Query":
        return Query(
            _rename_term(self.source, ren),
            self.regex,
            self.order,
            self.filter.rename(ren),
            _rename_set(self.result, ren),
            self.cont.rename(ren),
        )

    def binders(self) -> tuple[str, ...]:
        return (self.filter.binder.name, self.result.name) + self.filter.body.binders() + self.cont.binders()


@dataclass(frozen=True)
class Pred:
    symbol: str
    args: tuple[Term, ...]

    def __str__(self) -> str:
        return f"{self.symbol}({', '.join(str(a) for a in self.args)})"

    def apply(self, s: Substitution) -> "Pred":
        args = tuple(s.apply(a) for a in self.args)
        return self if all(a is b for a, b in zip(args, self.args)) else Pred(self.symbol, args)

    def free_vars(self) -> frozenset[Var]:
        return frozenset(v for a in self.args for v in term_vars(a))

    def rename(self, ren: Mapping[str, str]) -> "Pred":
        return Pred(self.symbol, tuple(_rename_term(a, ren) for a in self.args))

    def binders(self) -> tuple[str, ...]:
        return ()


Constraint = Union[Emp, FalseC, Conj, Exists, Single, Forall, NewScope, NewEdge, Query, Pred, Eq, DataOf, EConj, EExists]

EMP = Emp()
FALSE = FalseC()


def conj(*parts: Constraint) -> Constraint:
    parts = [p for p in parts if not isinstance(p, Emp)]
    if not parts:
        return EMP
    result = parts[-1]
    for p in reversed(parts[:-1]):
        result = Conj(p, result)
    return result


def walk(c: Constraint) -> Iterator[Constraint]:
    """Pre-order traversal through conjunctions, binders and query continuations."""
    yield c
    if isinstance(c, (Conj, EConj)):
        yield from walk(c.left)
        yield from walk(c.right)
    elif isinstance(c, (Exists, EExists, Forall)):
        yield from walk(c.body)
    elif isinstance(c, Query):
        yield from walk(c.filter.body)
        yield from walk(c.cont)


def exists_binders(c: Constraint) -> int:
    return sum(1 for sub in walk(c) if isinstance(sub, (Exists, EExists)))


def freshen(c: Constraint) -> Constraint:
    """Rename every binder of c to a fresh variable."""
    ren = {}
    for name in c.binders():
        if name not in ren:
            ren[name] = fresh_var(name).name
    return c.rename(ren) if ren else c


# --- Rules and specifications ---

@dataclass(frozen=True)
class Rule:
    name: str
    symbol: str
    params: tuple[Term, ...]
    body: Constraint

    def __str__(self) -> str:
        head = f"{self.symbol}({', '.join(str(p) for p in self.params)})"
        return f"rule {self.name}: {head} <- {self.body}"

    def head_vars(self) -> frozenset[Var]:
        return frozenset(v for p in self.params for v in term_vars(p))

    def renamed(self) -> "Rule":
        """A copy whose head variables and binders are all fresh."""
        names = {v.name for v in self.head_vars()} | set(self.body.binders())
        ren = {name: fresh_var(name).name for name in sorted(names)}
        return Rule(
            self.name,
            self.symbol,
            tuple(_rename_term(p, ren) for p in self.params),
            self.body.rename(ren),
        )


def _compatible(pattern: Term, arg: Term) -> bool:
    if isinstance(pattern, Var) or isinstance(arg, Var):
        return True
    if isinstance(pattern, App) and isinstance(arg, App):
        return (
            pattern.ctor == arg.ctor
            and len(pattern.args) == len(arg.args)
            and all(_compatible(p, a) for p, a in zip(pattern.args, arg.args))
        )
    return pattern == arg


# Footprint entry: (argument position or None for an unknown scope, label)
Footprint = frozenset[tuple[Optional[int], str]]


@dataclass(frozen=True)
class Specification:
    alphabet: frozenset[str]
    predicates: Mapping[str, int]
    rules: tuple[Rule, ...]
    init: str
    orders: Mapping[str, LabelOrder] = field(default_factory=dict)
    source_name: str = "<spec>"

    def __hash__(self):
        return id(self)

    def rules_for(self, symbol: str) -> tuple[Rule, ...]:
        return self._by_symbol.get(symbol, ())

    @cached_property
    def _by_symbol(self) -> dict[str, tuple[Rule, ...]]:
        grouped: dict[str, list[Rule]] = {}
        for rule in self.rules:
            grouped.setdefault(rule.symbol, []).append(rule)
        return {k: tuple(v) for k, v in grouped.items()}

    @cached_property
    def query_leading(self) -> frozenset[str]:
        """Predicates that may expand to a query."""
        leading: set[str] = set()
        changed = True
        while changed:
            changed = False
            for rule in self.rules:
                if rule.symbol not in leading and rule_leads_to_query(rule, leading):
                    leading.add(rule.symbol)
                    changed = True
        return frozenset(leading)

    def rule_is_query_leading(self, rule: Rule) -> bool:
        return rule_leads_to_query(rule, self.query_leading)

    @cached_property
    def footprints(self) -> dict[str, Footprint]:
        """Per-predicate over-approximation of the edges its expansion may add."""
        prints: dict[str, set] = {symbol: set() for symbol in self.predicates}
        changed = True
        while changed:
            changed = False
            for rule in self.rules:
                found = _rule_footprint(rule, prints)
                if not found <= prints[rule.symbol]:
                    prints[rule.symbol] |= found
                    changed = True
        return {k: frozenset(v) for k, v in prints.items()}


def rule_leads_to_query(rule: Rule, leading) -> bool:
    return any(
        isinstance(c, Query) or (isinstance(c, Pred) and c.symbol in leading)
        for c in walk(rule.body)
    )


def _rule_footprint(rule: Rule, prints: Mapping[str, set]) -> set[tuple[Optional[int], str]]:
    positions = {p: i for i, p in enumerate(rule.params) if isinstance(p, Var)}
    # Scopes created by this body cannot be visited by a query that is already pending
    local = {c.var for c in walk(rule.body) if isinstance(c, NewScope) and isinstance(c.var, Var)}

    def locate(t: Term):
        if t in local:
            return "local"
        return positions.get(t)

    found = set()
    for c in walk(rule.body):
        if isinstance(c, NewEdge):
            where = locate(c.src)
            if where != "local":
                found.add((where, c.label))
        elif isinstance(c, Pred):
            for pos, label in prints.get(c.symbol, ()):
                if pos is None:
                    found.add((None, label))
                    continue
                where = locate(c.args[pos]) if pos < len(c.args) else None
                if where != "local":
                    found.add((where, label))
    return found


def matching_rules(spec: Specification, goal: Pred) -> list[tuple[Rule, Substitution]]:
    """
    Rules whose freshly renamed head unifies with the goal, in file order.

    Args:
        spec: Loaded specification
        goal: Predicate constraint

    Returns:
        List of (renamed rule, head unifier)

    Example:
        >>> [(r.name, str(s)) for r, s in matching_rules(spec, goal)]
        [('T-Num', '{?T -> int, ...}')]
    """
    matches = []
    for rule in spec.rules_for(goal.symbol):
        if len(rule.params) != len(goal.args):
            continue
        if not all(_compatible(p, a) for p, a in zip(rule.params, goal.args)):
            continue
        fresh = rule.renamed()
        theta = mgu_all(fresh.params, goal.args)
        if not isinstance(theta, Failure):
            matches.append((fresh, theta))
    return matches


def check_specification(spec: Specification) -> None:
    """
    Load-time checks: declared arities, closed rules, known labels, no overlap.

    Raises:
        SpecError subclass describing the first problem found
    """
    if spec.init not in spec.predicates:
        raise ArityMismatch(f"initial predicate {spec.init} is not declared")
    if spec.predicates[spec.init] != 1:
        raise ArityMismatch(f"initial predicate {spec.init} must have arity 1")
    for name, order in spec.orders.items():
        unknown = order.labels() - spec.alphabet - {"$"}
        if unknown:
            raise UnknownLabel(f"order {name} mentions unknown label {sorted(unknown)[0]}")

    for rule in spec.rules:
        if rule.symbol not in spec.predicates:
            raise ArityMismatch(f"rule {rule.name}: predicate {rule.symbol} is not declared")
        if len(rule.params) != spec.predicates[rule.symbol]:
            raise ArityMismatch(
                f"rule {rule.name}: {rule.symbol} takes {spec.predicates[rule.symbol]} arguments, head has {len(rule.params)}"
            )
        unbound = rule.body.free_vars() - rule.head_vars()
        if unbound:
            raise UnboundVariable(f"rule {rule.name}: unbound variable {sorted(map(str, unbound))[0]}")
        for c in walk(rule.body):
            _check_constraint(spec, rule.name, c)

    for symbol in spec.predicates:
        rules = spec.rules_for(symbol)
        for i, r1 in enumerate(rules):
            for r2 in rules[i + 1:]:
                a, b = r1.renamed(), r2.renamed()
                if not isinstance(mgu_all(a.params, b.params), Failure):
                    raise OverlappingRules(r1.name, r2.name)


def _check_constraint(spec: Specification, rule_name: str, c: Constraint) -> None:
    if isinstance(c, Pred):
        arity = spec.predicates.get(c.symbol)
        if arity is None:
            raise ArityMismatch(f"rule {rule_name}: predicate {c.symbol} is not declared")
        if arity != len(c.args):
            raise ArityMismatch(f"rule {rule_name}: {c.symbol} takes {arity} arguments, got {len(c.args)}")
    labels: set[str] = set()
    if isinstance(c, NewEdge):
        labels.add(c.label)
    elif isinstance(c, Query):
        labels |= alphabet(c.regex)
        labels |= c.order.labels() - {"$"}
    for t in _terms_of(c):
        labels |= {sub.label for sub in _subterms(t) if isinstance(sub, LabelLit)}
    unknown = labels - spec.alphabet
    if unknown:
        raise UnknownLabel(f"rule {rule_name}: unknown label {sorted(unknown)[0]}")


def _terms_of(c: Constraint) -> list[Term]:
    if isinstance(c, Eq):
        return [c.left, c.right]
    if isinstance(c, DataOf):
        return [c.scope, c.term]
    if isinstance(c, NewEdge):
        return [c.src, c.dst]
    if isinstance(c, NewScope):
        return [c.var] + ([c.data] if c.data is not None else [])
    if isinstance(c, Pred):
        return list(c.args)
    if isinstance(c, Single):
        extra = list(c.set_term.elements) if isinstance(c.set_term, SetLit) else []
        return [c.term] + extra
    if isinstance(c, Query):
        return [c.source]
    return []


def _subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, App):
        for a in t.args:
            yield from _subterms(a)
