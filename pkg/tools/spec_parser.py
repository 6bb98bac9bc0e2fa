"""
Specification file loader.
Parses rule files into a checked Specification.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import structlog

from tools.constraints import (
    EMP,
    FALSE,
    Conj,
    Constraint,
    DataFilter,
    DataOf,
    EConj,
    EExists,
    Eq,
    EqConstraint,
    Exists,
    Forall,
    InvalidOrder,
    NewEdge,
    NewScope,
    Pred,
    Query,
    Rule,
    Single,
    SpecParseError,
    Specification,
    check_specification,
)
from tools.label_regex import RegexSyntaxError, parse_regex
from tools.scope_graph import EMPTY_ORDER, LabelOrder
from tools.terms import App, LabelLit, ScopeRef, SetLit, SetTerm, SetVar, Term, Var

log = structlog.get_logger(__name__)

_TOKEN = re.compile(
    r"(?P<ws>\s+|//[^\n]*)"
    r"|(?P<op><-|->|-\[|\]->|=>|\+\+|~0)"
    r"|(?P<var>\?[A-Za-z_][\w$']*)"
    r"|(?P<label>#[A-Za-z_]\w*)"
    r"|(?P<scope>\$s\d+)"
    r"|(?P<int>\d+)"
    r"|(?P<ident>[A-Za-z_]\w*(?:-[A-Za-z0-9_]+)*)"
    r"|(?P<punct>[(),;:.*|?{}=</$])"
)

KEYWORDS = {"labels", "order", "init", "pred", "rule", "emp", "false", "exists", "forall", "in",
            "new", "query", "regex", "filter", "as", "single", "dataOf"}


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    column: int
    offset: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise SpecParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(kind), line, pos - line_start + 1, pos))
        newlines = m.group(0).count("\n")
        if newlines:
            line += newlines
            line_start = pos + m.group(0).rfind("\n") + 1
        pos = m.end()
    return tokens


class SpecParser:
    """Recursive-descent parser for rule files."""

    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0
        self.labels: list[str] = []
        self.orders: dict[str, LabelOrder] = {}
        self.predicates: dict[str, int] = {}
        self.rules: list[Rule] = []
        self.init: Optional[str] = None

    # --- Token plumbing ---

    def peek(self, ahead: int = 0) -> Optional[Token]:
        i = self.pos + ahead
        return self.tokens[i] if i < len(self.tokens) else None

    def at(self, value: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.value == value

    def error(self, message: str) -> SpecParseError:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            return SpecParseError(f"{message} at end of input", last.line if last else 0, last.column if last else 0)
        return SpecParseError(f"{message}, found {tok.value!r}", tok.line, tok.column)

    def take(self, value: Optional[str] = None, kind: Optional[str] = None) -> Token:
        tok = self.peek()
        if tok is None or (value is not None and tok.value != value) or (kind is not None and tok.kind != kind):
            raise self.error(f"expected {value or kind}")
        self.pos += 1
        return tok

    # --- Top level ---

    def parse(self, source_name: str = "<spec>") -> Specification:
        while self.peek() is not None:
            keyword = self.take(kind="ident").value
            if keyword == "labels":
                while not self.at(";"):
                    self.labels.append(self.take(kind="ident").value)
                self.take(";")
            elif keyword == "order":
                self.order_decl()
            elif keyword == "init":
                self.init = self.take(kind="ident").value
                self.take(";")
            elif keyword == "pred":
                name = self.take(kind="ident").value
                self.take("/")
                self.predicates[name] = int(self.take(kind="int").value)
                self.take(";")
            elif keyword == "rule":
                self.rules.append(self.rule())
            else:
                self.pos -= 1
                raise self.error("expected labels, order, init, pred or rule")
        if self.init is None:
            raise SpecParseError("missing init declaration")
        spec = Specification(
            alphabet=frozenset(self.labels),
            predicates=dict(self.predicates),
            rules=tuple(self.rules),
            init=self.init,
            orders=dict(self.orders),
            source_name=source_name,
        )
        check_specification(spec)
        return spec

    def order_decl(self):
        name = "default"
        if self.peek(1) is not None and self.peek(1).value == ":":
            name = self.take(kind="ident").value
            self.take(":")
        chains = []
        while True:
            chain = [self.take(kind="ident").value]
            while self.at("<"):
                self.take("<")
                tok = self.peek()
                if tok is not None and tok.value == "$":
                    chain.append("$")
                    self.pos += 1
                else:
                    chain.append(self.take(kind="ident").value)
            chains.append(chain)
            if not self.at(","):
                break
            self.take(",")
        self.take(";")
        try:
            self.orders[name] = LabelOrder.from_chains(chains, name)
        except ValueError as e:
            raise InvalidOrder(str(e)) from e

    def rule(self) -> Rule:
        name = self.take(kind="ident").value
        self.take(":")
        symbol = self.take(kind="ident").value
        self.take("(")
        params = self.term_list(")")
        self.take("<-")
        body = self.constraint()
        self.take(";")
        return Rule(name, symbol, tuple(params), body)

    # --- Constraints ---

    def constraint(self) -> Constraint:
        parts = [self.conjunct()]
        while self.at("*"):
            self.take("*")
            parts.append(self.conjunct())
        result = parts[-1]
        for part in reversed(parts[:-1]):
            result = Conj(part, result)
        return result

    def conjunct(self) -> Constraint:
        tok = self.peek()
        if tok is None:
            raise self.error("expected a constraint")
        if tok.value == "(":
            self.take("(")
            inner = self.constraint()
            self.take(")")
            return inner
        if tok.kind == "ident":
            if tok.value == "emp":
                self.pos += 1
                return EMP
            if tok.value == "false":
                self.pos += 1
                return FALSE
            if tok.value == "exists":
                self.pos += 1
                binders = [self.variable()]
                while not self.at("."):
                    binders.append(self.variable())
                self.take(".")
                body = self.constraint()
                for v in reversed(binders):
                    body = Exists(v, body)
                return body
            if tok.value == "forall":
                self.pos += 1
                binder = self.variable()
                self.take("in")
                st = self.set_term()
                self.take(".")
                return Forall(binder, st, self.constraint())
            if tok.value == "new":
                self.pos += 1
                var = self.variable()
                data = None
                if self.at("->"):
                    self.take("->")
                    data = self.term()
                return NewScope(var, data)
            if tok.value == "query":
                return self.query()
            if tok.value == "single":
                self.pos += 1
                self.take("(")
                t = self.term()
                self.take(",")
                st = self.set_term()
                self.take(")")
                return Single(t, st)
            if tok.value == "dataOf":
                self.pos += 1
                self.take("(")
                scope = self.term()
                self.take(",")
                t = self.term()
                self.take(")")
                return DataOf(scope, t)
        left = self.term()
        if self.at("="):
            self.take("=")
            return Eq(left, self.term())
        if self.at("-["):
            self.take("-[")
            label = self.take(kind="ident").value
            self.take("]->")
            return NewEdge(left, label, self.term())
        if isinstance(left, App):
            return Pred(left.ctor, left.args)
        raise self.error("expected `=`, an edge or a predicate")

    def query(self) -> Query:
        self.take("query")
        source = self.term()
        self.take("regex")
        start = self.peek()
        while self.peek() is not None and self.peek().value not in ("order", "filter"):
            self.pos += 1
        end = self.peek()
        if start is None or end is None or start is end:
            raise self.error("expected a regex followed by filter")
        try:
            regex = parse_regex(self.text[start.offset:end.offset])
        except RegexSyntaxError as e:
            raise SpecParseError(str(e), start.line, start.column) from e
        order = EMPTY_ORDER
        if self.at("order"):
            self.take("order")
            tok = self.take(kind="ident")
            if tok.value not in self.orders:
                raise SpecParseError(f"unknown order {tok.value}", tok.line, tok.column)
            order = self.orders[tok.value]
        self.take("filter")
        self.take("(")
        binder = self.variable()
        self.take(")")
        self.take("=>")
        body = self.eq_constraint(self.constraint())
        self.take("as")
        result = SetVar(self.take(kind="var").value[1:])
        self.take(".")
        cont = self.constraint()
        return Query(source, regex, order, DataFilter(binder, body), result, cont)

    def eq_constraint(self, c: Constraint) -> EqConstraint:
        if isinstance(c, (Eq, DataOf)):
            return c
        if isinstance(c, Conj):
            return EConj(self.eq_constraint(c.left), self.eq_constraint(c.right))
        if isinstance(c, Exists):
            return EExists(c.binder, self.eq_constraint(c.body))
        raise self.error(f"query filters may only contain equality constraints, not {c}")

    # --- Terms ---

    def variable(self) -> Var:
        return Var(self.take(kind="var").value[1:])

    def term(self) -> Term:
        tok = self.peek()
        if tok is None:
            raise self.error("expected a term")
        self.pos += 1
        if tok.kind == "var":
            return Var(tok.value[1:])
        if tok.kind == "label":
            return LabelLit(tok.value[1:])
        if tok.kind == "scope":
            return ScopeRef(int(tok.value[2:]))
        if tok.kind == "ident" and tok.value in KEYWORDS:
            self.pos -= 1
            raise self.error("keywords cannot be used as constructors")
        if tok.kind in ("ident", "int"):
            if self.at("("):
                self.take("(")
                return App(tok.value, tuple(self.term_list(")")))
            return App(tok.value, ())
        self.pos -= 1
        raise self.error("expected a term")

    def term_list(self, close: str) -> list[Term]:
        items = []
        if not self.at(close):
            items.append(self.term())
            while self.at(","):
                self.take(",")
                items.append(self.term())
        self.take(close)
        return items

    def set_term(self) -> SetTerm:
        if self.peek() is not None and self.peek().kind == "var":
            if self.peek(1) is not None and self.peek(1).value == "++":
                raise self.error("union is only defined on set literals")
            return SetVar(self.take(kind="var").value[1:])
        elements: list[Term] = []
        while True:
            self.take("{")
            elements.extend(self.term_list("}"))
            if not self.at("++"):
                return SetLit(tuple(elements))
            self.take("++")


def load_spec(text: str, source_name: str = "<spec>") -> Specification:
    """
    Parse and check a rule file.

    Args:
        text: Rule-file content
        source_name: Name used in log events and errors

    Returns:
        Checked Specification

    Raises:
        SpecError: ParseError, ArityMismatch, OverlappingRules, UnboundVariable,
            UnknownLabel or InvalidOrder
    """
    spec = SpecParser(text).parse(source_name)
    log.debug("spec_loaded", source=source_name, rules=len(spec.rules), predicates=len(spec.predicates))
    return spec
