import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from algebench.errors import BudgetExceeded, InputError
from algebench.finalg import (
    FiniteAlgebra, Homomorphism, algebra_from_json, all_pairs, brute_force_cg, cg_generate, check_quasi,
    diagonal, evaluate, quotient, satisfies, subalgebra_generated, total,
)
from algebench.signatures import BOOLEAN, FL, LATTICE, MODAL
from algebench.structures import chain_frame, complex_algebra, luk_chain
from algebench.suites import chain_lattice, random_algebra
from algebench.terms import parse_equation, parse_term


def boolean4() -> FiniteAlgebra:
    # bitmasks over two atoms: 0, a=1, b=2, 1=3
    i = np.arange(4)
    return FiniteAlgebra(BOOLEAN, 4, {"meet": i[:, None] & i[None, :], "join": i[:, None] | i[None, :],
                                      "neg": 3 - i, "bot": 0, "top": 3})


def boolean2() -> FiniteAlgebra:
    i = np.arange(2)
    return FiniteAlgebra(BOOLEAN, 2, {"meet": np.minimum.outer(i, i), "join": np.maximum.outer(i, i),
                                      "neg": 1 - i, "bot": 0, "top": 1})


def n5() -> FiniteAlgebra:
    # 0 < a < c < 1, 0 < b < 1
    leq = np.eye(5, dtype=bool)
    for lo, hi in [(0, 1), (0, 2), (0, 3), (0, 4), (1, 3), (1, 4), (3, 4), (2, 4)]:
        leq[lo, hi] = True
    from algebench.canext import FinitePoset
    from algebench.structures import lattice_from_poset
    return lattice_from_poset(FinitePoset(leq))


def test_evaluate_examples():
    L2 = chain_lattice(2)
    assert evaluate(parse_term("x & y", LATTICE), L2, {"x": 1, "y": 0}) == 0
    assert evaluate(parse_term("x * x", FL), luk_chain(3), {"x": 1}) == 0
    A = complex_algebra(chain_frame(3))
    assert evaluate(parse_term("(meet (box x) x)", MODAL), A, {"x": 0b011}) == 0b001


def test_evaluate_unbound_variable():
    with pytest.raises(InputError):
        evaluate(parse_term("x & y", LATTICE), chain_lattice(2), {"x": 0})


def test_satisfies_examples():
    assert satisfies(boolean2(), parse_equation("(neg (neg x)) = x", BOOLEAN)) == (True, None)
    assert satisfies(luk_chain(3), parse_equation("x * x = x", FL)) == (False, {"x": 1})
    ok, w = satisfies(n5(), parse_equation("x & (y | z) = (x & y) | (x & z)", LATTICE))
    assert not ok and w is not None


def test_satisfies_budget_is_a_hard_error():
    with pytest.raises(BudgetExceeded):
        satisfies(luk_chain(10), parse_equation("x * (y * z) = (x * y) * z", FL), budget=100)


def test_check_quasi_examples():
    e = parse_equation("x <= y", LATTICE)
    assert check_quasi(chain_lattice(3), [e], e)[0]
    A = complex_algebra(chain_frame(3))
    prem = parse_equation("y <= (meet (box z) z)", MODAL)
    concl = parse_equation("y <= (meet (box (meet (box z) z)) (meet (box z) z))", MODAL)
    assert check_quasi(A, [prem], concl) == (False, {"y": 0b001, "z": 0b011})
    sigma = [parse_equation("y <= x", LATTICE), parse_equation("x <= z", LATTICE)]
    assert check_quasi(chain_lattice(3), sigma, parse_equation("y <= z", LATTICE))[0]


def test_order_checks_on_load():
    bad = np.array([[0, 1], [0, 1]])  # not commutative
    with pytest.raises(InputError):
        FiniteAlgebra(LATTICE, 2, {"meet": bad, "join": bad})


def test_algebra_json_errors():
    with pytest.raises(InputError):
        algebra_from_json({"size": 2, "ops": {"meet": [[0, 0], [0, 1]]}, "sig": "lattice"})
    with pytest.raises(InputError):
        algebra_from_json({"size": 2, "ops": {"meet": [[0, 0], [0, 2]], "join": [[0, 1], [1, 1]]}, "sig": "lattice"})


def test_subalgebra_examples():
    B = boolean4()
    lattice_reduct = FiniteAlgebra(LATTICE, 4, {"meet": B.tables["meet"], "join": B.tables["join"]})
    assert subalgebra_generated(lattice_reduct, [1]).elements == (1,)
    assert subalgebra_generated(B, [1]).elements == (0, 1, 2, 3)
    assert subalgebra_generated(lattice_reduct, []).elements == ()


def test_cg_examples():
    C3 = chain_lattice(3)
    assert cg_generate(C3, []) == diagonal(C3)
    assert cg_generate(C3, [(1, 2)]).block_list() == [[0], [1, 2]]
    B = boolean4()
    assert cg_generate(B, [(0, 1)]).block_list() == [[0, 1], [2, 3]]


def test_quotient_examples():
    C3 = chain_lattice(3)
    Q, _ = quotient(C3, diagonal(C3))
    assert Q.size == 3 and np.array_equal(Q.tables["meet"], C3.tables["meet"])
    Q, surj = quotient(C3, cg_generate(C3, [(1, 2)]))
    assert Q.size == 2 and np.array_equal(Q.tables["meet"], chain_lattice(2).tables["meet"])
    assert Homomorphism(C3, Q, tuple(surj)).is_homomorphism()
    assert quotient(C3, total(C3))[0].size == 1


# -- properties ----------------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@given(seeds)
@settings(max_examples=150, deadline=None)
def test_cg_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    A = random_algebra(rng)
    pairs = all_pairs(A.size)
    chosen = [p for p in pairs if rng.random() < 0.3]
    assert cg_generate(A, chosen) == brute_force_cg(A, chosen)


@given(seeds)
@settings(max_examples=100, deadline=None)
def test_cg_is_monotone(seed):
    rng = np.random.default_rng(seed)
    A = random_algebra(rng)
    pairs = all_pairs(A.size)
    small = [p for p in pairs if rng.random() < 0.3]
    big = small + [p for p in pairs if rng.random() < 0.3]
    assert cg_generate(A, small) <= cg_generate(A, big)


@given(seeds)
@settings(max_examples=100, deadline=None)
def test_congruence_is_compatible_and_quotient_is_homomorphic(seed):
    rng = np.random.default_rng(seed)
    A = random_algebra(rng)
    theta = cg_generate(A, [p for p in all_pairs(A.size) if rng.random() < 0.2])
    assert theta.is_compatible()
    Q, surj = quotient(A, theta)
    assert Homomorphism(A, Q, tuple(surj)).is_homomorphism()


@given(seeds)
@settings(max_examples=100, deadline=None)
def test_check_quasi_antitone_in_premises(seed):
    rng = np.random.default_rng(seed)
    A = chain_lattice(int(rng.integers(2, 5)))
    eqs = [parse_equation(s, LATTICE) for s in ("x <= y", "y <= z", "z <= x", "x & y = z", "x | z = y")]
    concl = eqs[int(rng.integers(len(eqs)))]
    sigma = [e for e in eqs if rng.random() < 0.5]
    extra = sigma + [e for e in eqs if rng.random() < 0.5]
    if check_quasi(A, sigma, concl)[0]:
        assert check_quasi(A, extra, concl)[0]


def _decreasing_isotone(rng, n):
    """A random decreasing order-preserving map on the n-chain."""
    f = np.zeros(n, dtype=np.int64)
    for a in range(1, n):
        f[a] = int(rng.integers(f[a - 1], a + 1))
    return f


@given(seeds)
@settings(max_examples=100, deadline=None)
def test_decreasing_maps_stabilize_within_size(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 12))
    f = _decreasing_isotone(rng, n)
    orbit = [np.arange(n)]
    for _ in range(n):
        orbit.append(f[orbit[-1]])
    assert all((b <= a).all() for a, b in itertools.pairwise(orbit))
    assert np.array_equal(orbit[n - 1], orbit[n])
