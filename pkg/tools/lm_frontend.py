"""
LM front end.
Parser with locked-reference syntax, term encoding for the bundled LM rules,
and the pretty-printers for programs and synthesized references.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Iterator, Mapping, Union

from tools.constraints import Pred
from tools.holes import HoleId, LockedTarget
from tools.terms import App, Term, Var, fresh_var


class LmParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class UnknownLockTarget(ValueError):
    """A lock names a declaration ordinal that does not exist."""


class NotARefTerm(ValueError):
    """A term that does not encode an LM reference."""


# --- AST ---

@dataclass(frozen=True)
class Path:
    names: tuple[str, ...]

    def __str__(self) -> str:
        return ".".join(self.names)


@dataclass(frozen=True)
class Locked:
    name: str
    ordinal: int
    line: int = 0
    column: int = 0

    def __str__(self) -> str:
        return f"[[{self.name}#{self.ordinal}]]"


LmRef = Union[Path, Locked]


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Add:
    left: "LmExpr"
    right: "LmExpr"


@dataclass(frozen=True)
class Ref:
    ref: LmRef


LmExpr = Union[Num, Add, Ref]


@dataclass(frozen=True)
class VarDecl:
    name: str
    expr: LmExpr


@dataclass(frozen=True)
class ModDecl:
    name: str
    imports: tuple[LmRef, ...]
    members: tuple["LmDecl", ...]


LmDecl = Union[VarDecl, ModDecl]


@dataclass(frozen=True)
class LmProgram:
    declarations: tuple[LmDecl, ...]

    def __str__(self) -> str:
        return pretty_program(self)


# --- Lexer ---

_TOKEN = re.compile(
    r"(?P<ws>\s+|//[^\n]*)"
    r"|(?P<open>\[\[)|(?P<close>\]\])|(?P<wild>::\*)"
    r"|(?P<int>\d+)"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<punct>[{}=+.;#()])"
)

KEYWORDS = {"var", "mod", "import"}


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise LmParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(0), line, pos - line_start + 1))
        chunk = m.group(0)
        if "\n" in chunk:
            line += chunk.count("\n")
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    return tokens


class _LmParser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def at(self, value: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.value == value

    def fail(self, message: str) -> LmParseError:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _Token("eof", "", 1, 1)
            return LmParseError(f"{message}, found end of input", last.line, last.column + len(last.value))
        return LmParseError(f"{message}, found {tok.value!r}", tok.line, tok.column)

    def take(self, value: str | None = None, kind: str | None = None) -> _Token:
        tok = self.peek()
        if tok is None or (value is not None and tok.value != value) or (kind is not None and tok.kind != kind):
            raise self.fail(f"expected {value or kind}")
        self.pos += 1
        return tok

    def ident(self) -> str:
        tok = self.peek()
        if tok is None or tok.kind != "ident" or tok.value in KEYWORDS:
            raise self.fail("expected an identifier")
        self.pos += 1
        return tok.value

    def skip_semicolons(self):
        while self.at(";"):
            self.pos += 1

    def program(self) -> LmProgram:
        decls = []
        self.skip_semicolons()
        while self.peek() is not None:
            decls.append(self.declaration())
            self.skip_semicolons()
        return LmProgram(tuple(decls))

    def declaration(self) -> LmDecl:
        if self.at("var"):
            self.take("var")
            name = self.ident()
            self.take("=")
            return VarDecl(name, self.expression())
        if self.at("mod"):
            self.take("mod")
            name = self.ident()
            self.take("{")
            imports, members = [], []
            self.skip_semicolons()
            while self.at("import"):
                self.take("import")
                imports.append(self.reference())
                self.take(kind="wild")
                self.skip_semicolons()
            while not self.at("}"):
                if self.at("import"):
                    raise self.fail("imports must precede the declarations of a module")
                if self.peek() is None:
                    raise self.fail("expected }")
                members.append(self.declaration())
                self.skip_semicolons()
            self.take("}")
            return ModDecl(name, tuple(imports), tuple(members))
        raise self.fail("expected var or mod")

    def expression(self) -> LmExpr:
        left = self.operand()
        while self.at("+"):
            self.take("+")
            left = Add(left, self.operand())
        return left

    def operand(self) -> LmExpr:
        tok = self.peek()
        if tok is not None and tok.kind == "int":
            self.pos += 1
            return Num(int(tok.value))
        if self.at("("):
            self.take("(")
            inner = self.expression()
            self.take(")")
            return inner
        return Ref(self.reference())

    def reference(self) -> LmRef:
        tok = self.peek()
        if tok is not None and tok.kind == "open":
            self.pos += 1
            name = self.ident()
            self.take("#")
            ordinal_tok = self.take(kind="int")
            self.take(kind="close")
            if int(ordinal_tok.value) < 1:
                raise LmParseError("lock ordinals start at 1", ordinal_tok.line, ordinal_tok.column)
            return Locked(name, int(ordinal_tok.value), tok.line, tok.column)
        names = [self.ident()]
        while self.at("."):
            self.take(".")
            names.append(self.ident())
        return Path(tuple(names))


def declarations(program: LmProgram) -> Iterator[LmDecl]:
    """All declarations in pre-order."""
    def visit(decls):
        for d in decls:
            yield d
            if isinstance(d, ModDecl):
                yield from visit(d.members)
    yield from visit(program.declarations)


def locks(program: LmProgram) -> Iterator[Locked]:
    """Locked references in source order."""
    def in_expr(e: LmExpr):
        if isinstance(e, Add):
            yield from in_expr(e.left)
            yield from in_expr(e.right)
        elif isinstance(e, Ref) and isinstance(e.ref, Locked):
            yield e.ref

    def visit(decls):
        for d in decls:
            if isinstance(d, VarDecl):
                yield from in_expr(d.expr)
            else:
                yield from (r for r in d.imports if isinstance(r, Locked))
                yield from visit(d.members)
    yield from visit(program.declarations)


def parse_lm(text: str) -> LmProgram:
    """
    Parse LM source.

    Args:
        text: Program text, locks written as [[name#ordinal]]

    Returns:
        LmProgram

    Raises:
        LmParseError: on a syntax error (with line and column)
        UnknownLockTarget: when a lock ordinal exceeds the declarations of that name

    Example:
        >>> parse_lm("mod A { var x = [[y#1]] var y = 1 }").declarations[0].name
        'A'
    """
    program = _LmParser(text).program()
    counts: dict[str, int] = {}
    for d in declarations(program):
        counts[d.name] = counts.get(d.name, 0) + 1
    for lock in locks(program):
        if lock.ordinal > counts.get(lock.name, 0):
            raise UnknownLockTarget(
                f"{lock.line}:{lock.column}: lock {lock} has no target "
                f"({counts.get(lock.name, 0)} declarations named {lock.name})"
            )
    return program


def locked_targets(program: LmProgram) -> dict[HoleId, LockedTarget]:
    targets = {}
    for i, lock in enumerate(locks(program), start=1):
        hole = HoleId(i, lock.line, lock.column)
        targets[hole] = LockedTarget(hole, lock.name, lock.ordinal)
    return targets


# --- Encoding ---

def _cons_list(items: list[Term]) -> Term:
    result: Term = App("nil")
    for item in reversed(items):
        result = App("cons", (item, result))
    return result


class _Encoder:
    def __init__(self, program: LmProgram):
        self.holes = {lock: hole for lock, hole in zip(locks(program), locked_targets(program))}
        self.lock_vars: dict[HoleId, Var] = {}
        self.counts: dict[str, int] = {}

    def key(self, name: str) -> Term:
        self.counts[name] = self.counts.get(name, 0) + 1
        return App("key", (App(name), App(str(self.counts[name]))))

    def ref(self, r: LmRef) -> Term:
        if isinstance(r, Locked):
            hole = self.holes[r]
            var = fresh_var(r.name)
            self.lock_vars[hole] = var
            return var
        term: Term = App("id", (App(r.names[0]),))
        for name in r.names[1:]:
            term = App("qual", (term, App(name)))
        return term

    def expr(self, e: LmExpr) -> Term:
        if isinstance(e, Num):
            return App("num", (App(str(e.value)),))
        if isinstance(e, Add):
            return App("add", (self.expr(e.left), self.expr(e.right)))
        return App("ref", (self.ref(e.ref),))

    def decl(self, d: LmDecl) -> Term:
        if isinstance(d, VarDecl):
            key = self.key(d.name)
            return App("vardecl", (App(d.name), self.expr(d.expr), key))
        key = self.key(d.name)
        imports = [App("import", (self.ref(r),)) for r in d.imports]
        members = [self.decl(m) for m in d.members]
        return App("moddecl", (App(d.name), _cons_list(imports), _cons_list(members), key))


def encode_program(program: LmProgram) -> tuple[Term, dict[HoleId, Var]]:
    encoder = _Encoder(program)
    term = _cons_list([encoder.decl(d) for d in program.declarations])
    return term, encoder.lock_vars


def gen_constraint(program: LmProgram, init: str = "programOk") -> tuple[Pred, dict[HoleId, Var]]:
    """
    Build the initial goal for a program.

    Locked references become fresh variables; every declaration carries a
    key(name, ordinal) token in the data its rule asserts, so lock targets can
    be found in the solved scope graph.

    Args:
        program: Parsed program
        init: Initial predicate of the specification

    Returns:
        (goal, mapping from hole to its variable)
    """
    term, lock_vars = encode_program(program)
    return Pred(init, (term,)), lock_vars


# --- Printing ---

def pretty_ref(t: Term) -> str:
    """
    Render a reference term in dotted surface syntax.

    Example:
        >>> pretty_ref(parse_term("qual(id(A), y)"))
        'A.y'
    """
    return str(decode_ref(t))


def decode_ref(t: Term) -> Path:
    names = []
    while isinstance(t, App) and t.ctor == "qual" and len(t.args) == 2:
        names.append(_name(t.args[1], t))
        t = t.args[0]
    if isinstance(t, App) and t.ctor == "id" and len(t.args) == 1:
        names.append(_name(t.args[0], t))
        return Path(tuple(reversed(names)))
    raise NotARefTerm(f"not a reference term: {t}")


def _name(t: Term, whole: Term) -> str:
    if isinstance(t, App) and not t.args and re.fullmatch(r"[A-Za-z][A-Za-z0-9_]*", t.ctor):
        return t.ctor
    raise NotARefTerm(f"not a reference term: {whole}")


def _pretty_expr(e: LmExpr, nested: bool = False) -> str:
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, Ref):
        return str(e.ref)
    text = f"{_pretty_expr(e.left)} + {_pretty_expr(e.right, nested=True)}"
    return f"({text})" if nested else text


def _pretty_decls(decls: tuple[LmDecl, ...], indent: int) -> list[str]:
    pad = "  " * indent
    lines = []
    for d in decls:
        if isinstance(d, VarDecl):
            lines.append(f"{pad}var {d.name} = {_pretty_expr(d.expr)}")
            continue
        lines.append(f"{pad}mod {d.name} {{")
        for imp in d.imports:
            lines.append(f"{pad}  import {imp}::*")
        lines.extend(_pretty_decls(d.members, indent + 1))
        lines.append(f"{pad}}}")
    return lines


def pretty_program(program: LmProgram) -> str:
    return "\n".join(_pretty_decls(program.declarations, 0)) + "\n"


def unlock(program: LmProgram, solutions: Mapping[HoleId, Term]) -> LmProgram:
    """Replace each locked reference that has a solution by the synthesized path."""
    holes = {lock: hole for lock, hole in zip(locks(program), locked_targets(program))}

    def ref(r: LmRef) -> LmRef:
        if isinstance(r, Locked) and holes[r] in solutions:
            return decode_ref(solutions[holes[r]])
        return r

    def expr(e: LmExpr) -> LmExpr:
        if isinstance(e, Add):
            return Add(expr(e.left), expr(e.right))
        if isinstance(e, Ref):
            return Ref(ref(e.ref))
        return e

    def decl(d: LmDecl) -> LmDecl:
        if isinstance(d, VarDecl):
            return replace(d, expr=expr(d.expr))
        return ModDecl(d.name, tuple(ref(r) for r in d.imports), tuple(decl(m) for m in d.members))

    return LmProgram(tuple(decl(d) for d in program.declarations))
