"""
Hole identities.
A hole is the engine-side identity of a locked reference.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from tools.terms import App, Term


@dataclass(frozen=True, order=True)
class HoleId:
    index: int
    # Provenance of the locked reference in its source file
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)

    def __str__(self) -> str:
        return f"h{self.index}"

    @property
    def location(self) -> str:
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class LockedTarget:
    """The k-th declaration named `name`, counted in pre-order."""

    hole: HoleId
    name: str
    ordinal: int

    def key_term(self) -> Term:
        """Identity token embedded in the scope data of the target declaration."""
        return App("key", (App(self.name), App(str(self.ordinal))))
