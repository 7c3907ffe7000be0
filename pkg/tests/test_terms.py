import pytest
from hypothesis import given, settings, strategies as st

from algebench.errors import InputError, ParseError
from algebench.signatures import BOOLEAN, CONST_LATTICE, DOUBLE_HEYTING, FL, LATTICE, MODAL
from algebench.terms import (
    Equation, app, desugar, eq, iterate_term, le, make_signature, parse_equation, parse_term, polarity,
    power_term, render, render_equation, render_infix, substitute, var,
)


def test_parse_variable():
    assert parse_term("x", LATTICE) == var("x")


def test_parse_lattice_t():
    t = parse_term("(meet (meet c1 (join c2 (meet c3 x))) x)", CONST_LATTICE)
    assert t == parse_term("(c1 & (c2 | (c3 & x))) & x", CONST_LATTICE)
    assert t.variables() == {"x"}


@pytest.mark.parametrize("text", ["(meet x)", "(meet x y", "(frob x y)", "(meet x y))"])
def test_parse_errors_carry_offsets(text):
    with pytest.raises(ParseError) as exc:
        parse_term(text, LATTICE)
    assert exc.value.offset >= 0


def test_variable_colliding_with_op_is_rejected():
    with pytest.raises(InputError):
        parse_term("(meet box x)", MODAL)


def test_infix_sugar_matches_prefix():
    assert parse_term("x * (y \\ z)", FL) == parse_term("(mul x (ldiv y z))", FL)
    assert parse_term("x -> y", DOUBLE_HEYTING) == parse_term("(imp x y)", DOUBLE_HEYTING)
    assert parse_term("~x & y", BOOLEAN) == parse_term("(meet (neg x) y)", BOOLEAN)


def test_substitute_examples():
    t = parse_term("(c1 & (c2 | (c3 & x))) & x", CONST_LATTICE)
    assert substitute(var("x"), {"x": var("y")}) == var("y")
    assert substitute(t, {"x": t}) == iterate_term(t, "x", 2)
    s = parse_term("(e & x) * (e & x)", FL)
    assert substitute(s, {"x": app("e")}) == parse_term("(e & e) * (e & e)", FL)


def test_iterate_examples():
    bh = parse_term("(meet (box x) x)", MODAL)
    assert iterate_term(bh, "x", 0) == var("x")
    assert iterate_term(bh, "x", 2) == substitute(bh, {"x": bh})
    sq = power_term(parse_term("e & x", FL), 2)
    assert iterate_term(sq, "x", 1) == sq


def test_polarity_examples():
    assert polarity(parse_term("(neg (neg x))", BOOLEAN), "x", BOOLEAN) == "+"
    assert polarity(parse_term("(neg x)", BOOLEAN), "x", BOOLEAN) == "-"
    assert polarity(parse_term("(meet x (imp x y))", DOUBLE_HEYTING), "x", DOUBLE_HEYTING) == "both"
    assert polarity(parse_term("y", LATTICE), "x", LATTICE) == "none"
    unknown = make_signature({"f": 1})
    assert polarity(parse_term("(f x)", unknown), "x", unknown) == "?"


def test_desugar_examples():
    assert desugar(le(var("y"), var("x")), LATTICE) == eq(app("meet", var("y"), var("x")), var("y"))
    e = eq(var("x"), var("y"))
    assert desugar(e, LATTICE) == e
    with pytest.raises(InputError):
        desugar(le(var("y"), var("x")), make_signature({"f": 2}))


def test_equation_parsing_forms():
    a = parse_equation("y <= x", LATTICE)
    assert a.kind == "le"
    assert parse_equation("y ≤ x", LATTICE) == a
    assert parse_equation("(<= y x)", LATTICE) == a
    assert render_equation(parse_equation("x = (meet x x)", LATTICE)) == "x = (meet x x)"


def test_infix_rendering():
    assert render_infix(parse_term("(meet x (join y x))", LATTICE)) == "(x ∧ (y ∨ x))"


# -- properties ------------------------------------------------------------------------

VARS = st.sampled_from(["x", "y", "z"])


def terms(sig, max_leaves=20):
    ops = [(op, a) for op, a in sorted(sig.ops.items()) if a > 0]
    consts = [op for op, a in sorted(sig.ops.items()) if a == 0]
    leaves = VARS.map(var) | (st.sampled_from(consts).map(app) if consts else st.nothing())

    def extend(children):
        return st.one_of(*[st.tuples(*[children] * a).map(lambda args, op=op: app(op, *args)) for op, a in ops])

    return st.recursive(leaves, extend, max_leaves=max_leaves)


@given(terms(MODAL))
@settings(max_examples=200)
def test_parse_render_roundtrip(t):
    assert parse_term(render(t), MODAL) == t


@given(terms(FL))
@settings(max_examples=100)
def test_parse_render_roundtrip_fl(t):
    assert parse_term(render(t), FL) == t


@given(terms(LATTICE, 6), st.integers(0, 4), st.integers(0, 4))
@settings(max_examples=100)
def test_iterate_composes(t, j, k):
    lhs = iterate_term(t, "x", j + k)
    rhs = substitute(iterate_term(t, "x", j), {"x": iterate_term(t, "x", k)})
    assert lhs == rhs


def test_equation_requires_matching_kind():
    with pytest.raises((InputError, ValueError)):
        Equation(var("x"), var("y"), "lt")
