"""Tests for terms, substitutions and unification."""

import pytest

from tools.terms import (
    App,
    Failure,
    LabelLit,
    ScopeRef,
    SetLit,
    SetVar,
    Substitution,
    TermSyntaxError,
    Var,
    compose,
    const,
    fresh_var,
    is_ground,
    match,
    mgu,
    parse_set_term,
    parse_term,
    union,
)


class TestCanonicalText:
    """Tests for printing and parsing terms."""

    def test_print_forms(self):
        """Variables, labels, scopes and applications print canonically."""
        t = App("decl", (Var("n"), const("int"), LabelLit("VAR"), ScopeRef(2)))
        assert str(t) == "decl(?n, int, #VAR, $s2)"

    def test_parse_inverts_print(self):
        """Parsing canonical text gives back the same term."""
        text = "step(path($s0), #LEX, $s1)"
        assert str(parse_term(text)) == text

    def test_parse_nullary_constructor(self):
        """A bare name is a nullary application."""
        assert parse_term("nil") == App("nil")

    def test_parse_set_literal(self):
        """Set literals keep their elements in order."""
        st = parse_set_term("{a, b, a}")
        assert st == SetLit((App("a"), App("b"), App("a")))

    def test_parse_set_variable(self):
        """A variable in set position is a set variable."""
        assert parse_set_term("?z") == SetVar("z")

    def test_trailing_input_rejected(self):
        """Junk after a complete term is an error."""
        with pytest.raises(TermSyntaxError):
            parse_term("f(a) b")

    def test_empty_constructor_rejected(self):
        """Constructor identifiers must be nonempty."""
        with pytest.raises(ValueError):
            App("")


class TestSubstitution:
    """Tests for applying and composing substitutions."""

    def test_apply_to_fixpoint(self):
        """Triangular substitutions are applied until nothing changes."""
        s = Substitution({Var("x"): Var("y"), Var("y"): const("g")})
        assert s.apply(Var("x")) == const("g")

    def test_apply_leaves_other_vars(self):
        """Variables outside the domain are untouched."""
        s = Substitution({Var("x"): const("a")})
        assert s.apply(parse_term("f(?x, ?y)")) == parse_term("f(a, ?y)")

    def test_compose_is_sequential(self):
        """Applying a composition equals applying both in order."""
        first = Substitution({Var("x"): parse_term("f(?y)")})
        second = Substitution({Var("y"): const("b")})
        t = parse_term("g(?x, ?y)")
        assert compose(first, second).apply(t) == second.apply(first.apply(t))

    def test_without_drops_binders(self):
        """Bound variables are protected from substitution."""
        s = Substitution({Var("x"): const("a"), Var("y"): const("b")})
        assert s.without([Var("x")]).domain() == frozenset({Var("y")})

    def test_apply_set_resolves_set_variables(self):
        """Set variables are replaced by their bound literal."""
        s = Substitution({}, {SetVar("z"): SetLit((Var("x"),))})
        s2 = compose(s, Substitution({Var("x"): const("a")}))
        assert s2.apply_set(SetVar("z")) == SetLit((const("a"),))

    def test_union_keeps_duplicates(self):
        """Union of literals is concatenation."""
        assert union(SetLit((const("a"),)), SetLit((const("a"),))) == SetLit((const("a"), const("a")))


class TestUnification:
    """Tests for mgu and one-way matching."""

    def test_unify_binds_both_sides(self):
        """Variables on either side get bound."""
        theta = mgu(parse_term("f(?x, b)"), parse_term("f(a, ?y)"))
        assert theta.apply(Var("x")) == const("a")
        assert theta.apply(Var("y")) == const("b")

    def test_unifier_equalizes(self):
        """Applying the unifier makes both terms identical."""
        left, right = parse_term("f(?x, g(?y))"), parse_term("f(g(?z), ?x)")
        theta = mgu(left, right)
        assert theta.apply(left) == theta.apply(right)

    def test_clash(self):
        """Different constructors do not unify."""
        result = mgu(parse_term("f(a)"), parse_term("g(a)"))
        assert isinstance(result, Failure)
        assert result.reason == "clash"

    def test_arity_clash(self):
        """Same constructor with different arity does not unify."""
        assert isinstance(mgu(parse_term("f(a)"), parse_term("f(a, b)")), Failure)

    def test_occurs_check(self):
        """A variable cannot be bound to a term containing it."""
        result = mgu(Var("x"), parse_term("f(?x)"))
        assert isinstance(result, Failure)
        assert result.reason == "occurs"

    def test_scope_refs_unify_only_when_equal(self):
        """Scope references are constants."""
        assert not isinstance(mgu(ScopeRef(1), ScopeRef(1)), Failure)
        assert isinstance(mgu(ScopeRef(1), ScopeRef(2)), Failure)

    def test_match_is_one_way(self):
        """Matching binds pattern variables only."""
        sigma = match(parse_term("qual(?r, x)"), parse_term("qual(id(A), x)"))
        assert sigma.apply(Var("r")) == parse_term("id(A)")
        assert isinstance(match(parse_term("f(a)"), parse_term("f(?x)")), Failure)

    def test_match_consistent_bindings(self):
        """A repeated pattern variable must match equal subterms."""
        assert isinstance(match(parse_term("f(?x, ?x)"), parse_term("f(a, b)")), Failure)


class TestFreshVariables:
    """Tests for fresh variable generation."""

    def test_fresh_vars_differ(self):
        """Every call yields a new variable."""
        assert fresh_var("x") != fresh_var("x")

    def test_hint_survives(self):
        """The hint is kept as a readable prefix."""
        assert fresh_var("ty").name.startswith("ty$")

    def test_groundness(self):
        """Ground terms contain no variables."""
        assert is_ground(parse_term("f(a, $s1, #L)"))
        assert not is_ground(parse_term("f(a, ?x)"))
