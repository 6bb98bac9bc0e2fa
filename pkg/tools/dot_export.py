"""
Scope graph rendering.
DOT source for a scope graph, optionally highlighting synthesized paths.
"""
from typing import Iterable, Optional

from graphviz import Digraph

from tools.scope_graph import ScopeGraph


def scope_graph_to_dot(
    g: ScopeGraph,
    title: str = "scope graph",
    highlight: Optional[Iterable[tuple[int, ...]]] = None,
) -> str:
    """
    Render a scope graph as DOT source.

    Scopes are nodes labelled with their data; edges carry their label.
    Consecutive scopes of each highlighted path are drawn as dashed edges.

    Args:
        g: Scope graph
        title: Graph comment
        highlight: Composite paths (scope sequences) to overlay

    Returns:
        DOT source text

    Example:
        >>> print(scope_graph_to_dot(graph).splitlines()[1])
        digraph {
    """
    dot = Digraph(comment=title)
    dot.attr("node", shape="box", fontname="monospace")

    for scope in g.scopes:
        data = g.data_of(scope)
        label = f"$s{scope}" if data is None else f"$s{scope}\n{data}"
        dot.node(g.alias(scope), label)
    for src, label, dst in g.edges():
        dot.edge(g.alias(src), g.alias(dst), label=label)

    for path in highlight or ():
        for src, dst in zip(path, path[1:]):
            dot.edge(g.alias(src), g.alias(dst), style="dashed", color="blue", constraint="false")
    return dot.source
