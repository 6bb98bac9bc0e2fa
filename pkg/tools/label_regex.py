"""
Regular expressions over edge labels.
Brzozowski derivatives for incremental path checking, plus inversion for
backward traversal of the scope graph.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Union


class RegexSyntaxError(ValueError):
    """Raised when a label regex cannot be parsed."""


@dataclass(frozen=True)
class EmptySet:
    def __str__(self) -> str:
        return "~0"


@dataclass(frozen=True)
class EmptyWord:
    def __str__(self) -> str:
        return "e"


@dataclass(frozen=True)
class Sym:
    label: str

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class Concat:
    left: "Regex"
    right: "Regex"

    def __str__(self) -> str:
        return f"{_wrap(self.left, 1)} {_wrap(self.right, 1)}"


@dataclass(frozen=True)
class Alt:
    options: tuple["Regex", ...]

    def __str__(self) -> str:
        return " | ".join(_wrap(o, 0) for o in self.options)


@dataclass(frozen=True)
class Star:
    inner: "Regex"

    def __str__(self) -> str:
        return f"{_wrap(self.inner, 2)}*"


@dataclass(frozen=True)
class Opt:
    inner: "Regex"

    def __str__(self) -> str:
        return f"{_wrap(self.inner, 2)}?"


Regex = Union[EmptySet, EmptyWord, Sym, Concat, Alt, Star, Opt]

EMPTY_SET = EmptySet()
EMPTY_WORD = EmptyWord()

# Binding strength used when printing
_PRECEDENCE = {Alt: 0, Concat: 1, Star: 2, Opt: 2, Sym: 3, EmptySet: 3, EmptyWord: 3}


def _wrap(r: Regex, level: int) -> str:
    text = str(r)
    return f"({text})" if _PRECEDENCE[type(r)] < level else text


# --- Smart constructors ---
# They keep one invariant: a regex denotes the empty language iff it is EMPTY_SET.

def sym(label: str) -> Regex:
    return Sym(label)


def concat(*parts: Regex) -> Regex:
    result: Regex = EMPTY_WORD
    for part in reversed(parts):
        result = _concat2(part, result)
    return result


def _concat2(left: Regex, right: Regex) -> Regex:
    if isinstance(left, EmptySet) or isinstance(right, EmptySet):
        return EMPTY_SET
    if isinstance(left, EmptyWord):
        return right
    if isinstance(right, EmptyWord):
        return left
    if isinstance(left, Concat):
        return _concat2(left.left, _concat2(left.right, right))
    return Concat(left, right)


def alt(*options: Regex) -> Regex:
    flat: set[Regex] = set()
    for o in options:
        if isinstance(o, Alt):
            flat.update(o.options)
        elif not isinstance(o, EmptySet):
            flat.add(o)
    if not flat:
        return EMPTY_SET
    if len(flat) == 1:
        return next(iter(flat))
    return Alt(tuple(sorted(flat, key=str)))


def star(inner: Regex) -> Regex:
    if isinstance(inner, (EmptySet, EmptyWord)):
        return EMPTY_WORD
    if isinstance(inner, Star):
        return inner
    if isinstance(inner, Opt):
        return star(inner.inner)
    return Star(inner)


def opt(inner: Regex) -> Regex:
    if isinstance(inner, (EmptySet, EmptyWord)):
        return EMPTY_WORD
    if nullable(inner):
        return inner
    return Opt(inner)


# --- Operations ---

@lru_cache(maxsize=None)
def nullable(r: Regex) -> bool:
    """True iff the empty word matches r, i.e. the current scope may end a path."""
    if isinstance(r, (EmptyWord, Star, Opt)):
        return True
    if isinstance(r, Concat):
        return nullable(r.left) and nullable(r.right)
    if isinstance(r, Alt):
        return any(nullable(o) for o in r.options)
    return False


@lru_cache(maxsize=None)
def derivative(r: Regex, label: str) -> Regex:
    """
    Brzozowski derivative of r with respect to one label.

    Args:
        r: Regex to differentiate
        label: Label of the edge being traversed

    Returns:
        Regex matching w exactly when r matches label followed by w

    Example:
        >>> str(derivative(parse_regex("LEX* IMP? VAR"), "LEX"))
        'LEX* IMP? VAR'
    """
    if isinstance(r, Sym):
        return EMPTY_WORD if r.label == label else EMPTY_SET
    if isinstance(r, Concat):
        head = _concat2(derivative(r.left, label), r.right)
        if nullable(r.left):
            return alt(head, derivative(r.right, label))
        return head
    if isinstance(r, Alt):
        return alt(*(derivative(o, label) for o in r.options))
    if isinstance(r, Star):
        return _concat2(derivative(r.inner, label), r)
    if isinstance(r, Opt):
        return derivative(r.inner, label)
    return EMPTY_SET


@lru_cache(maxsize=None)
def alphabet(r: Regex) -> frozenset[str]:
    if isinstance(r, Sym):
        return frozenset({r.label})
    if isinstance(r, Concat):
        return alphabet(r.left) | alphabet(r.right)
    if isinstance(r, Alt):
        return frozenset().union(*(alphabet(o) for o in r.options))
    if isinstance(r, (Star, Opt)):
        return alphabet(r.inner)
    return frozenset()


def first_set(r: Regex) -> frozenset[str]:
    """Labels l whose derivative is not the empty set."""
    return frozenset(l for l in alphabet(r) if not isinstance(derivative(r, l), EmptySet))


def matches(r: Regex, word: Iterable[str]) -> bool:
    for label in word:
        r = derivative(r, label)
        if isinstance(r, EmptySet):
            return False
    return nullable(r)


@lru_cache(maxsize=None)
def invert(r: Regex) -> Regex:
    """
    Reverse the language of r.

    Example:
        >>> str(invert(parse_regex("LEX* VAR")))
        'VAR LEX*'
    """
    if isinstance(r, Concat):
        return concat(invert(r.right), invert(r.left))
    if isinstance(r, Alt):
        return alt(*(invert(o) for o in r.options))
    if isinstance(r, Star):
        return star(invert(r.inner))
    if isinstance(r, Opt):
        return opt(invert(r.inner))
    return r


# --- Textual syntax ---

_TOKEN = re.compile(r"\s*(~0|[A-Z][A-Z0-9_]*|e\b|[|*?()])")


def _tokenize(text: str) -> list[str]:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise RegexSyntaxError(f"unexpected character in regex at offset {pos}: {text[pos:]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


class _RegexReader:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def alternation(self) -> Regex:
        options = [self.sequence()]
        while self.peek() == "|":
            self.pos += 1
            options.append(self.sequence())
        return alt(*options)

    def sequence(self) -> Regex:
        parts = []
        while self.peek() not in (None, "|", ")"):
            parts.append(self.postfix())
        if not parts:
            raise RegexSyntaxError("empty regex operand (write `e` for the empty word)")
        return concat(*parts)

    def postfix(self) -> Regex:
        r = self.atom()
        while self.peek() in ("*", "?"):
            r = star(r) if self.tokens[self.pos] == "*" else opt(r)
            self.pos += 1
        return r

    def atom(self) -> Regex:
        tok = self.peek()
        if tok is None:
            raise RegexSyntaxError("unexpected end of regex")
        self.pos += 1
        if tok == "(":
            r = self.alternation()
            if self.peek() != ")":
                raise RegexSyntaxError("missing `)` in regex")
            self.pos += 1
            return r
        if tok == "~0":
            return EMPTY_SET
        if tok == "e":
            return EMPTY_WORD
        if tok in ("*", "?", "|", ")"):
            raise RegexSyntaxError(f"unexpected {tok!r} in regex")
        return Sym(tok)


def parse_regex(text: str) -> Regex:
    """
    Parse label-regex text: juxtaposition, `|`, `*`, `?`, `~0`, `e`.

    Example:
        >>> parse_regex("LEX* IMP? VAR") == concat(star(sym("LEX")), opt(sym("IMP")), sym("VAR"))
        True
    """
    reader = _RegexReader(_tokenize(text))
    r = reader.alternation()
    if reader.peek() is not None:
        raise RegexSyntaxError(f"trailing input in regex: {reader.peek()!r}")
    return r
