"""Acceptance criteria 1 to 10, each at its stated tolerance and time limit.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS/FAIL line per criterion.
"""
import pytest

from algebench.suites import run_suite
from conftest import ACCEPTANCE_LINES

LATTICE_TERM_IDEMPOTENT = (
    "t(x) = (c1 ∧ (c2 ∨ (c3 ∧ x))) ∧ x satisfies t³ ≈ t² in every lattice: with u = t(x) and v = t(u), "
    "c3∧u ≤ v, so c3∧v = c3∧u and t(v) = v. Whitman therefore proves t²(x) ≤ t³(x), and the strict "
    "chain claimed for n = 2, 3 cannot be exhibited."
)
COMPOSITION_OFF_LATTICES = (
    "The σ-extension of a composite of join-preserving maps differs from the composite of σ-extensions "
    "on posets whose completion adds joins (smallest case: the 3-element antichain, whose completion is M3). "
    "Every counted violation is on a non-lattice poset; on the lattices in the sweep the equality holds."
)


def _check(key):
    r = run_suite(key)
    print(r.line())
    ACCEPTANCE_LINES.append(r.line())
    assert r.passed, r.details


def test_criterion_1_modal_witnesses():
    _check(1)


def test_criterion_2_residuated_witnesses():
    _check(2)


@pytest.mark.xfail(strict=True, reason=LATTICE_TERM_IDEMPOTENT)
def test_criterion_3_lattice_term():
    _check(3)


def test_criterion_3_holds_where_a_finite_witness_exists():
    r = run_suite(3)
    rows = r.details["rows"]
    assert [row["ok"] for row in rows if row["n"] <= 1] == [True, True]
    assert all(not row["whitman_strict"] and "finite_witness" not in row for row in rows if row["n"] >= 2)


def test_criterion_4_double_heyting():
    _check(4)


@pytest.mark.xfail(strict=True, reason=COMPOSITION_OFF_LATTICES)
def test_criterion_5_canonical_extension():
    _check(5)


def test_criterion_5_all_other_checks():
    r = run_suite(5)
    v = r.details["violations"]
    failing = {k for k, n in v.items() if n}
    assert failing <= {"operator_composition", "dual_operator_composition"}
    assert v["operator_composition_on_lattices"] == v["dual_operator_composition_on_lattices"] == 0
    assert r.details["posets"] == 87 and r.details["maps"] >= 500
    assert r.elapsed < r.limit


def test_criterion_6_congruence_kernel():
    _check(6)


def test_criterion_7_interpolation():
    _check(7)


def test_criterion_8_presentation_transfer():
    _check(8)


def test_criterion_9_stabilization():
    _check(9)


def test_criterion_10_determinism():
    _check(10)
