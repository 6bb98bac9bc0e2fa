"""Tests for scope graphs and query resolution."""

import pytest

from oracles import LEX_MOD, LEX_VAR, NameIs, brute_resolve
from tools.label_regex import parse_regex
from tools.scope_graph import (
    IncompleteGraph,
    LabelOrder,
    ResolutionPath,
    ScopeGraph,
    UnknownScope,
    add_edge,
    add_scope,
    critical_edges,
    path_from_term,
    reachable_paths,
    resolve,
    resolve_backward,
    shadows,
)
from tools.terms import App, parse_term


def build(data: list[str], edges: list[tuple[int, str, int]]) -> ScopeGraph:
    g = ScopeGraph()
    for d in data:
        g, _ = add_scope(g, parse_term(d))
    for src, label, dst in edges:
        g = add_edge(g, src, label, dst)
    return g


# var x = 42  mod A { var x = 0 }  mod B { import A::*  var y = x }
IMPORT_SHADOWS = build(
    ["global", "var(x, int, key(x, 1))", "mod(A, key(A, 1))", "var(x, int, key(x, 2))", "mod(B, key(B, 1))", "var(y, int, key(y, 1))"],
    [
        (0, "VAR", 1),
        (2, "LEX", 0), (0, "MOD", 2), (2, "VAR", 3),
        (4, "LEX", 0), (0, "MOD", 4), (4, "IMP", 2), (4, "VAR", 5),
    ],
)

# mod A { import A::* } self-import loop plus a nested module
LOOPY = build(
    ["global", "mod(A, key(A, 1))", "var(x, int, key(x, 1))", "mod(C, key(C, 1))"],
    [(1, "LEX", 0), (0, "MOD", 1), (1, "IMP", 1), (1, "VAR", 2), (3, "LEX", 1), (1, "MOD", 3), (3, "IMP", 1)],
)


class TestGraphConstruction:
    """Tests for the persistent graph."""

    def test_scopes_are_dense(self):
        """New scopes get consecutive ids."""
        g, s0 = add_scope(ScopeGraph(), None)
        g, s1 = add_scope(g, App("d"))
        assert (s0, s1) == (0, 1)
        assert g.data_of(1) == App("d")

    def test_extension_leaves_original(self):
        """Adding an edge returns a new graph."""
        g, _ = add_scope(ScopeGraph(), None)
        g2 = add_edge(g, 0, "LEX", 0)
        assert g.edge_count() == 0
        assert g2.edge_count() == 1

    def test_duplicate_edge_is_ignored(self):
        """The same labelled edge is stored once."""
        g = add_edge(IMPORT_SHADOWS, 4, "IMP", 2)
        assert g is IMPORT_SHADOWS

    def test_unknown_scope(self):
        """Edges must connect existing scopes."""
        with pytest.raises(UnknownScope):
            add_edge(IMPORT_SHADOWS, 0, "LEX", 99)

    def test_incoming_mirrors_outgoing(self):
        """Both adjacency views agree."""
        assert ("IMP", 4) in IMPORT_SHADOWS.incoming(2)


class TestPaths:
    """Tests for path terms and reachability."""

    def test_path_term_round(self):
        """Path terms decode to the path they encode."""
        path = ResolutionPath(4, (("IMP", 2), ("VAR", 3)))
        assert path_from_term(path.to_term()) == path
        assert str(path.to_term()) == "step(step(path($s4), #IMP, $s2), #VAR, $s3)"

    def test_never_leave_scope_twice(self):
        """Cyclic import edges do not produce infinite paths."""
        paths = list(reachable_paths(LOOPY, 3, parse_regex("(LEX | IMP)* VAR")))
        assert paths
        for p in paths:
            assert len(p.left_scopes()) == len(p.scopes) - 1

    def test_shadowing_by_first_difference(self):
        """The path whose label wins at the first difference shadows the other."""
        imp = ResolutionPath(4, (("IMP", 2), ("VAR", 3)))
        lex = ResolutionPath(4, (("LEX", 0), ("VAR", 1)))
        assert shadows(LEX_VAR, imp, lex)
        assert not shadows(LEX_VAR, lex, imp)


class TestResolve:
    """Tests for query answers."""

    def test_import_shadows_outer(self):
        """In module B, x resolves through the import, not the enclosing scope."""
        answers = resolve(IMPORT_SHADOWS, 4, parse_regex("LEX* IMP? VAR"), NameIs("var", "x"), LEX_VAR)
        assert [p.target for p, _ in answers] == [3]

    def test_without_order_everything_is_visible(self):
        """An empty order keeps every matching path."""
        answers = resolve(IMPORT_SHADOWS, 4, parse_regex("LEX* IMP? VAR"), NameIs("var", "x"), LabelOrder())
        assert sorted(p.target for p, _ in answers) == [1, 3]

    def test_module_lookup(self):
        """A module is found through the enclosing scope."""
        answers = resolve(IMPORT_SHADOWS, 4, parse_regex("LEX* MOD"), NameIs("mod", "A"), LEX_MOD)
        assert [p.target for p, _ in answers] == [2]

    def test_no_answer(self):
        """Unknown names resolve to nothing."""
        assert resolve(IMPORT_SHADOWS, 4, parse_regex("LEX* IMP? VAR"), NameIs("var", "nope"), LEX_VAR) == []

    @pytest.mark.parametrize("graph", [IMPORT_SHADOWS, LOOPY], ids=["import_shadows", "loopy"])
    @pytest.mark.parametrize("regex", ["LEX* IMP? VAR", "LEX* MOD", "(LEX | IMP)* VAR", "IMP? MOD"])
    def test_agrees_with_brute_force(self, graph, regex):
        """Resolution agrees with enumerating every path and filtering by hand."""
        r = parse_regex(regex)
        for source in graph.scopes:
            for flt, order in [(NameIs("var", "x"), LEX_VAR), (NameIs("mod", "A"), LEX_MOD), (NameIs("mod", "C"), LEX_MOD)]:
                got = sorted(p.steps for p, _ in resolve(graph, source, r, flt, order))
                expected = brute_resolve(graph, source, r, flt(graph), order)
                assert got == expected, (regex, source, flt)


class TestBackward:
    """Tests for backward resolution."""

    def test_sources_of_a_declaration(self):
        """Every scope that can see A's x is a candidate source."""
        found = resolve_backward(IMPORT_SHADOWS, 3, parse_regex("LEX* IMP? VAR"))
        assert sorted({src for src, _ in found}) == [2, 4]

    def test_candidates_are_forward_paths(self):
        """Each candidate carries a forward path ending at the target."""
        for src, path in resolve_backward(IMPORT_SHADOWS, 3, parse_regex("LEX* IMP? VAR")):
            assert path.source == src
            assert path.target == 3

    def test_open_edge_blocks(self):
        """A pending import into the traversal is reported as a blocker."""
        found = resolve_backward(IMPORT_SHADOWS, 3, parse_regex("LEX* IMP? VAR"), frozenset({(None, "IMP")}))
        assert isinstance(found, IncompleteGraph)
        assert (None, "IMP") in found.blockers
        assert {src for src, _ in found.candidates} == {2, 4}

    def test_unrelated_open_edge(self):
        """An open edge with a label the traversal cannot use does not block."""
        found = resolve_backward(IMPORT_SHADOWS, 3, parse_regex("LEX* IMP? VAR"), frozenset({(0, "MOD")}))
        assert not isinstance(found, IncompleteGraph)

    def test_open_edge_off_the_source_does_not_block(self):
        """A pending import of B cannot change what a lookup from the top level sees."""
        found = resolve_backward(IMPORT_SHADOWS, 3, parse_regex("LEX* IMP? VAR"), frozenset({(4, "IMP")}), source=0)
        assert not isinstance(found, IncompleteGraph)
        assert {src for src, _ in found} == {2, 4}

    def test_open_edge_on_the_source_blocks(self):
        """The same pending import blocks a lookup that starts in B."""
        found = resolve_backward(IMPORT_SHADOWS, 3, parse_regex("LEX* IMP? VAR"), frozenset({(4, "IMP")}), source=4)
        assert isinstance(found, IncompleteGraph)
        assert (4, "IMP") in found.blockers

    def test_unknown_source_keeps_blockers(self):
        """Without a source every open pair the traversal needs is reported."""
        found = resolve_backward(IMPORT_SHADOWS, 3, parse_regex("LEX* IMP? VAR"), frozenset({(4, "IMP")}))
        assert isinstance(found, IncompleteGraph)


class TestCriticalEdges:
    """Tests for the edges a query depends on."""

    def test_critical_edges_of_lookup(self):
        """Scopes on the way and the labels the regex may still take."""
        critical = critical_edges(IMPORT_SHADOWS, 4, parse_regex("LEX* IMP? VAR"))
        assert (4, "IMP") in critical
        assert (0, "VAR") in critical
        assert (2, "VAR") in critical
        assert (2, "IMP") not in critical
