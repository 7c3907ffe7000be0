from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from algebench.errors import InputError
from algebench.finalg import check_quasi, evaluate
from algebench.signatures import CONST_LATTICE, DOUBLE_HEYTING, FL, MODAL
from algebench.structures import boxhat, chain_frame, complex_algebra, d_term, downset_algebra, luk_chain
from algebench.terms import parse_equation, parse_term
from algebench.witness import (
    Exhausted, Witness, emit_counterexample, family_members, family_signature, iterate_table, npotency_check,
    parse_family, potency_report, refute_consequence, refute_identity, resolve_term, unary_table,
    witness_search,
)


def test_npotency_examples():
    A = complex_algebra(chain_frame(2))
    assert npotency_check(boxhat(), A, 0) == (False, 1)
    assert npotency_check(boxhat(), A, 2)[0]
    assert npotency_check(parse_term("x", MODAL), A, 0) == (True, None)
    with pytest.raises(InputError):
        npotency_check(boxhat(), A, -1)


@pytest.mark.parametrize("n", range(0, 9))
def test_chain_frame_witness_has_n_plus_two_worlds(n):
    w = witness_search(boxhat(), "chain-frame", n)
    assert isinstance(w, Witness)
    assert w.member == f"chain-frame({n + 2})"
    f = unary_table(boxhat(), w.algebra)
    assert w.before == iterate_table(f, n)[w.element] and w.after == f[w.before] != w.before
    # every smaller frame is n-potent
    for k in range(1, n + 2):
        assert npotency_check(boxhat(), complex_algebra(chain_frame(k)), n)[0]


def test_chain_frame_witness_element():
    w = witness_search(boxhat(), "chain-frame", 3)
    assert w.to_json()["element_view"] == {"worlds": [0, 1, 2, 3]}
    assert (w.before, w.after) == (1, 0)


def test_luk_identity_refutation():
    cube = parse_equation("(e & x) * (e & x) * (e & x) = (e & x) * (e & x)", FL)
    r = refute_identity(cube, "luk")
    assert r.member == "luk(4)" and r.assignment == {"x": 2}
    assert evaluate(cube.lhs, r.algebra, r.assignment) != evaluate(cube.rhs, r.algebra, r.assignment)


def luk_sq_potent(k, n):
    """Exact oracle: iterate x -> max(0, 2x - 1) over i/(k-1) with fractions."""
    def s(x):
        return max(Fraction(0), 2 * x - 1)

    for i in range(k):
        x = Fraction(i, k - 1)
        for _ in range(n):
            x = s(x)
        if s(x) != x:
            return False
    return True


@pytest.mark.parametrize("n", range(0, 5))
def test_luk_square_witness(n):
    w = witness_search(resolve_term("luk-sq", FL), "luk", n)
    assert isinstance(w, Witness)
    k = w.algebra.size
    assert not luk_sq_potent(k, n) and all(luk_sq_potent(j, n) for j in range(2, k))


def test_d_witness_revalidates():
    w = witness_search(d_term(), "posets:6", 1)
    assert isinstance(w, Witness)
    imp, sub = w.algebra.tables["imp"], w.algebra.tables["sub"]
    top, bot = int(w.algebra.tables["top"]), int(w.algebra.tables["bot"])

    def d(u):
        return int(imp[sub[top, u], bot])

    assert d(w.element) == w.before and d(d(w.element)) == w.after != w.before
    assert witness_search(d_term(), "posets:6", 0).member.startswith("downsets")


def test_lattice_search_low_levels():
    t = resolve_term("lattice-t", CONST_LATTICE)
    for n in (0, 1):
        w = witness_search(t, "lattice-search:6", n)
        assert isinstance(w, Witness) and set(w.meta["constants"]) == {"c1", "c2", "c3"}
        f = unary_table(t, w.algebra)
        assert f[iterate_table(f, n)[w.element]] != iterate_table(f, n)[w.element]


def test_exhaustion_is_reported():
    w = witness_search(boxhat(), "chain-frame:3", 5)
    assert isinstance(w, Exhausted) and w.reason == "family exhausted" and w.examined == 3
    w = witness_search(boxhat(), "chain-frame", 8, budget=3)
    assert isinstance(w, Exhausted) and w.reason.startswith("budget")
    with pytest.raises(InputError):
        witness_search(boxhat(), "chain-frame", 1, budget=0)


def test_family_parsing():
    assert parse_family("luk:5") == ("luk", "5")
    assert family_signature("posets:3") is DOUBLE_HEYTING
    assert [m.name for m in family_members("luk:4")] == ["luk(2)", "luk(3)", "luk(4)"]
    for bad in ("nope", "luk:zero", "luk:0", "downset"):
        with pytest.raises(InputError):
            list(family_members(bad))


def test_potency_report_lists_every_level():
    rep = potency_report(boxhat(), "chain-frame", 3)
    assert [e["member"] for e in rep["entries"]] == [f"chain-frame({k + 2})" for k in range(4)]


def test_counterexample_package():
    pkg = emit_counterexample(boxhat(), "chain-frame", 5)
    assert pkg.complete and len(pkg.separators) == 6
    assert all(s.sigma_side == "verified" for s in pkg.separators)
    data = pkg.to_json()
    assert data["pi_truncated"][0] == "y <= t^0(z)" and len(data["pi_truncated"]) == 6
    md = pkg.markdown()
    assert md.count("| chain-frame(") == 6 and "## Conclusion" in md
    assert len(emit_counterexample(boxhat(), "chain-frame", 0).separators) == 1
    with pytest.raises(InputError):
        emit_counterexample(boxhat(), "chain-frame", -1)


def test_counterexample_package_incomplete():
    pkg = emit_counterexample(boxhat(), "chain-frame:4", 4)
    assert not pkg.complete and [e.n for e in pkg.exhausted] == [3, 4]
    assert pkg.to_json()["conclusion"].startswith("incomplete")


def test_separators_are_quasi_identity_failures():
    for s in emit_counterexample(boxhat(), "chain-frame", 3).separators:
        t = boxhat()
        A = s.witness.algebra
        f = unary_table(t, A)
        z, y = s.assignment["z"], s.assignment["y"]
        assert A.leq[y, iterate_table(f, s.n)[z]] and not A.leq[y, iterate_table(f, s.n + 1)[z]]


def test_refute_consequence_examples():
    sigma = [parse_equation("y <= (meet (box z) z)", MODAL)]
    eps = parse_equation("y <= (meet (box (meet (box z) z)) (meet (box z) z))", MODAL)
    r = refute_consequence(sigma, eps, "chain-frame")
    assert r.member == "chain-frame(3)"  # two worlds are 1-potent
    A = r.algebra
    assert not check_quasi(A, sigma, eps)[0]
    valid = parse_equation("(meet (box x) x) <= x", MODAL)
    got = refute_consequence([], valid, "chain-frame:4")
    assert isinstance(got, Exhausted) and got.reason == "family exhausted"


# -- properties ------------------------------------------------------------------------

@st.composite
def decreasing_tables(draw):
    # decreasing isotone maps on a chain of random length
    n = draw(st.integers(1, 12))
    f = [0]
    for a in range(1, n):
        f.append(draw(st.integers(f[-1], a)))
    return np.array(f)


@given(decreasing_tables(), st.integers(0, 12))
@settings(max_examples=100, deadline=None)
def test_stabilization_is_monotone(f, n):
    # once t^{n+1} = t^n the orbit is fixed at every later level
    tn = iterate_table(f, n)
    if np.array_equal(f[tn], tn):
        assert np.array_equal(iterate_table(f, n + 3), tn)
    assert np.array_equal(iterate_table(f, len(f)), iterate_table(f, len(f) - 1))


@given(st.integers(1, 6), st.integers(0, 7))
@settings(max_examples=40, deadline=None)
def test_chain_frame_potency_threshold(worlds, n):
    # the w-world chain frame is n-potent exactly when n >= w - 1
    A = complex_algebra(chain_frame(worlds))
    assert npotency_check(boxhat(), A, n)[0] == (n >= worlds - 1)


@given(st.integers(2, 9), st.integers(0, 8))
@settings(max_examples=40, deadline=None)
def test_luk_square_potency_threshold(k, n):
    A = luk_chain(k)
    assert npotency_check(resolve_term("luk-sq", FL), A, n)[0] == luk_sq_potent(k, n)


def test_downset_algebra_of_chain_is_one_potent():
    from algebench.canext import FinitePoset
    for n in range(1, 6):
        assert npotency_check(d_term(), downset_algebra(FinitePoset.chain(n)), 1)[0]
