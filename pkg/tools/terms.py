"""
Terms, set terms and substitutions.
First-order unification with occurs-check, plus the canonical textual form
used by the CLI and the test fixtures.
"""
from __future__ import annotations

import itertools
import re
import threading
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Union


class TermSyntaxError(ValueError):
    """Raised when canonical term text cannot be parsed."""


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class App:
    ctor: str
    args: tuple["Term", ...] = ()

    def __post_init__(self):
        if not self.ctor:
            raise ValueError("constructor identifiers must be nonempty")

    def __str__(self) -> str:
        if not self.args:
            return self.ctor
        return f"{self.ctor}({', '.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class LabelLit:
    label: str

    def __str__(self) -> str:
        return f"#{self.label}"


@dataclass(frozen=True)
class ScopeRef:
    scope: int

    def __str__(self) -> str:
        return f"$s{self.scope}"


Term = Union[Var, App, LabelLit, ScopeRef]


@dataclass(frozen=True)
class SetVar:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class SetLit:
    elements: tuple[Term, ...] = ()

    def __str__(self) -> str:
        return "{" + ", ".join(str(e) for e in self.elements) + "}"


SetTerm = Union[SetVar, SetLit]


def const(name: str) -> App:
    return App(name, ())


def union(*sets: SetLit) -> SetLit:
    """Flatten a union of set literals into one literal, keeping duplicates."""
    return SetLit(tuple(e for s in sets for e in s.elements))


# --- Structure queries ---

def term_vars(t: Term) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    elif isinstance(t, App):
        for a in t.args:
            yield from term_vars(a)


def free_vars(t: Term) -> frozenset[Var]:
    return frozenset(term_vars(t))


def is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, App):
        return all(is_ground(a) for a in t.args)
    return True


def scopes_in(t: Term) -> Iterator[int]:
    """Yield every scope id occurring anywhere inside t."""
    if isinstance(t, ScopeRef):
        yield t.scope
    elif isinstance(t, App):
        for a in t.args:
            yield from scopes_in(a)


def set_vars(st: SetTerm) -> frozenset[Var]:
    if isinstance(st, SetLit):
        return frozenset(v for e in st.elements for v in term_vars(e))
    return frozenset()


# --- Substitutions ---

@dataclass(frozen=True)
class Failure:
    """Unification or evaluation failure, the bottom value of mgu and evalEq."""

    reason: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.reason}: {self.detail}" if self.detail else self.reason


@dataclass(frozen=True)
class Substitution:
    term_map: Mapping[Var, Term] = field(default_factory=dict)
    set_map: Mapping[SetVar, SetTerm] = field(default_factory=dict)

    def __hash__(self):
        return hash((frozenset(self.term_map.items()), frozenset(self.set_map.items())))

    def __str__(self) -> str:
        parts = [f"{v} -> {t}" for v, t in self.term_map.items()]
        parts += [f"{v} -> {t}" for v, t in self.set_map.items()]
        return "{" + ", ".join(parts) + "}"

    @property
    def is_empty(self) -> bool:
        return not self.term_map and not self.set_map

    def domain(self) -> frozenset[Var]:
        return frozenset(self.term_map)

    def apply(self, t: Term) -> Term:
        if not self.term_map:
            return t
        return _apply(t, self.term_map, frozenset())

    def apply_set(self, st: SetTerm) -> SetTerm:
        if isinstance(st, SetVar):
            bound = self.set_map.get(st)
            if bound is None:
                return st
            return self.apply_set(bound)
        if not self.term_map:
            return st
        elements = tuple(self.apply(e) for e in st.elements)
        if all(a is b for a, b in zip(elements, st.elements)):
            return st
        return SetLit(elements)

    def without(self, binders) -> "Substitution":
        """Drop bindings for variables bound by an enclosing binder."""
        binders = set(binders)
        if not any(b in self.term_map or b in self.set_map for b in binders):
            return self
        return Substitution(
            {v: t for v, t in self.term_map.items() if v not in binders},
            {v: t for v, t in self.set_map.items() if v not in binders},
        )

    def compose(self, second: "Substitution") -> "Substitution":
        return compose(self, second)


EMPTY = Substitution()


def _apply(t: Term, mapping: Mapping[Var, Term], seen: frozenset) -> Term:
    if isinstance(t, Var):
        bound = mapping.get(t)
        if bound is None:
            return t
        if t in seen:
            raise ValueError(f"cyclic substitution through {t}")
        return _apply(bound, mapping, seen | {t})
    if isinstance(t, App):
        if not t.args:
            return t
        args = tuple(_apply(a, mapping, seen) for a in t.args)
        if all(a is b for a, b in zip(args, t.args)):
            return t
        return App(t.ctor, args)
    return t


def apply(subst: Substitution, t: Term) -> Term:
    """
    Apply a substitution until fixpoint.

    Args:
        subst: Substitution, possibly in triangular form
        t: Term to rewrite

    Returns:
        t with every domain variable replaced, recursively

    Example:
        >>> apply(Substitution({Var("x"): Var("y"), Var("y"): const("g")}), Var("x"))
        App(ctor='g', args=())
    """
    return subst.apply(t)


def compose(first: Substitution, second: Substitution) -> Substitution:
    """
    Sequential composition: applying the result equals applying first, then second.

    The range of second must not mention the domain of first, which always
    holds when second was computed on terms first had already been applied to.
    """
    terms = {v: second.apply(t) for v, t in first.term_map.items()}
    for v, t in second.term_map.items():
        terms.setdefault(v, t)
    sets = {v: second.apply_set(s) for v, s in first.set_map.items()}
    for v, s in second.set_map.items():
        sets.setdefault(v, s)
    return Substitution(terms, sets)


# --- Unification ---

def _walk(t: Term, bindings: dict) -> Term:
    while isinstance(t, Var) and t in bindings:
        t = bindings[t]
    return t


def _occurs(v: Var, t: Term, bindings: dict) -> bool:
    t = _walk(t, bindings)
    if t == v:
        return True
    if isinstance(t, App):
        return any(_occurs(v, a, bindings) for a in t.args)
    return False


def mgu(t1: Term, t2: Term) -> Substitution | Failure:
    """
    Most general unifier with occurs-check.

    Args:
        t1: Left term
        t2: Right term

    Returns:
        An idempotent Substitution, or Failure on a clash or occurs-check
    """
    bindings: dict[Var, Term] = {}
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        a, b = _walk(a, bindings), _walk(b, bindings)
        if a == b:
            continue
        if isinstance(b, Var) and not isinstance(a, Var):
            a, b = b, a
        if isinstance(a, Var):
            if _occurs(a, b, bindings):
                return Failure("occurs", f"{a} in {_apply(b, bindings, frozenset())}")
            bindings[a] = b
            continue
        if isinstance(a, App) and isinstance(b, App):
            if a.ctor != b.ctor or len(a.args) != len(b.args):
                return Failure("clash", f"{a} vs {b}")
            stack.extend(zip(a.args, b.args))
            continue
        return Failure("clash", f"{a} vs {b}")
    return Substitution({v: _apply(t, bindings, frozenset()) for v, t in bindings.items()})


def mgu_all(left: tuple[Term, ...], right: tuple[Term, ...]) -> Substitution | Failure:
    if len(left) != len(right):
        return Failure("clash", f"arity {len(left)} vs {len(right)}")
    return mgu(App("_args", tuple(left)), App("_args", tuple(right)))


def match(pattern: Term, t: Term) -> Substitution | Failure:
    """One-way matching: bind only variables of pattern so that it equals t."""
    bindings: dict[Var, Term] = {}
    stack = [(pattern, t)]
    while stack:
        p, u = stack.pop()
        if isinstance(p, Var):
            seen = bindings.get(p)
            if seen is None:
                bindings[p] = u
            elif seen != u:
                return Failure("clash", f"{p} bound to {seen} and {u}")
            continue
        if isinstance(p, App) and isinstance(u, App):
            if p.ctor != u.ctor or len(p.args) != len(u.args):
                return Failure("clash", f"{p} vs {u}")
            stack.extend(zip(p.args, u.args))
            continue
        if p != u:
            return Failure("clash", f"{p} vs {u}")
    return Substitution(bindings)


# --- Fresh variables ---

_counter = itertools.count(1)
_counter_lock = threading.Lock()


def _next_id() -> int:
    with _counter_lock:
        return next(_counter)


def fresh_var(hint: str = "v") -> Var:
    """Return a session-unique variable; the hint survives as a readable prefix."""
    base = hint.split("$", 1)[0] or "v"
    return Var(f"{base}${_next_id()}")


def fresh_set_var(hint: str = "z") -> SetVar:
    base = hint.split("$", 1)[0] or "z"
    return SetVar(f"{base}${_next_id()}")


# --- Canonical text ---

_TOKEN = re.compile(
    r"\s*(?:(?P<var>\?[A-Za-z_][\w$]*)|(?P<label>#[A-Za-z_]\w*)|(?P<scope>\$s\d+)"
    r"|(?P<name>[A-Za-z0-9_][\w']*)|(?P<punct>[(),{}]))"
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise TermSyntaxError(f"unexpected input at offset {pos}: {text[pos:pos + 10]!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
        pos = m.end()
    return tokens


class _TermReader:
    def __init__(self, tokens: list[tuple[str, str]]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, value: str | None = None) -> tuple[str, str]:
        tok = self.peek()
        if tok is None or (value is not None and tok[1] != value):
            raise TermSyntaxError(f"expected {value or 'a token'}, found {tok[1] if tok else 'end of input'}")
        self.pos += 1
        return tok

    def term(self) -> Term:
        kind, value = self.take()
        if kind == "var":
            return Var(value[1:])
        if kind == "label":
            return LabelLit(value[1:])
        if kind == "scope":
            return ScopeRef(int(value[2:]))
        if kind != "name":
            raise TermSyntaxError(f"unexpected {value!r}")
        if self.peek() == ("punct", "("):
            self.take("(")
            args = []
            if self.peek() != ("punct", ")"):
                args.append(self.term())
                while self.peek() == ("punct", ","):
                    self.take(",")
                    args.append(self.term())
            self.take(")")
            return App(value, tuple(args))
        return App(value, ())

    def set_term(self) -> SetTerm:
        tok = self.peek()
        if tok and tok[0] == "var":
            self.take()
            return SetVar(tok[1][1:])
        self.take("{")
        elements = []
        if self.peek() != ("punct", "}"):
            elements.append(self.term())
            while self.peek() == ("punct", ","):
                self.take(",")
                elements.append(self.term())
        self.take("}")
        return SetLit(tuple(elements))

    def done(self):
        if self.peek() is not None:
            raise TermSyntaxError(f"trailing input: {self.peek()[1]!r}")


def parse_term(text: str) -> Term:
    """
    Parse canonical term text.

    Example:
        >>> str(parse_term("decl(?n, int, #VAR, $s2)"))
        'decl(?n, int, #VAR, $s2)'
    """
    reader = _TermReader(_tokenize(text))
    t = reader.term()
    reader.done()
    return t


def parse_set_term(text: str) -> SetTerm:
    reader = _TermReader(_tokenize(text))
    st = reader.set_term()
    reader.done()
    return st
