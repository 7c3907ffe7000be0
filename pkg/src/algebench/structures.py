"""Case-study families: complex algebras of frames, Łukasiewicz chains,
down-set double-Heyting algebras, lattices with constants, and Whitman's
decision procedure for free lattices."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .canext import FinitePoset, enumerate_posets
from .errors import BudgetExceeded, InputError
from .finalg import FiniteAlgebra, satisfies, term_function
from .signatures import CONST_LATTICE, DOUBLE_HEYTING, FL, LATTICE, MODAL
from .terms import Equation, Signature, Term, app, parse_equation, parse_term, power_term, var

MAX_WORLDS = 12
MAX_DOWNSETS = 4096


# -- frames and modal algebras -------------------------------------------------

@dataclass(frozen=True, eq=False)
class KripkeFrame:
    worlds: int
    rel: np.ndarray

    def __post_init__(self):
        rel = np.asarray(self.rel, dtype=bool)
        if rel.shape != (self.worlds, self.worlds):
            raise InputError(f"relation must be {self.worlds}x{self.worlds}")
        object.__setattr__(self, "rel", rel)

    @classmethod
    def from_edges(cls, worlds: int, edges: Iterable[Sequence[int]]) -> KripkeFrame:
        rel = np.zeros((worlds, worlds), dtype=bool)
        for e in edges:
            i, j = int(e[0]), int(e[1])
            if not (0 <= i < worlds and 0 <= j < worlds):
                raise InputError(f"edge {[i, j]} outside 0..{worlds - 1}")
            rel[i, j] = True
        return cls(worlds, rel)

    def edges(self) -> list[list[int]]:
        return [[int(i), int(j)] for i, j in zip(*np.nonzero(self.rel))]

    def to_json(self) -> dict:
        return {"worlds": self.worlds, "edges": self.edges()}


def chain_frame(n: int) -> KripkeFrame:
    """Worlds 0 → 1 → … → n-1 (successor steps only)."""
    return KripkeFrame.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def load_frame(path: str | Path) -> KripkeFrame:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict) or "worlds" not in data:
        raise InputError(f"{path}: frame JSON needs 'worlds' and 'edges'")
    return KripkeFrame.from_edges(int(data["worlds"]), data.get("edges", []))


def complex_algebra(F: KripkeFrame, max_worlds: int = MAX_WORLDS) -> FiniteAlgebra:
    """Subsets of worlds as bitmasks (bit w = world w), □U = {w | R[w] ⊆ U}."""
    w = F.worlds
    if w < 1:
        raise InputError("a frame needs at least one world")
    if w > max_worlds:
        raise BudgetExceeded(f"{w} worlds exceeds the budget of {max_worlds}")
    n = 1 << w
    full = n - 1
    U = np.arange(n, dtype=np.int64)
    box = np.zeros(n, dtype=np.int64)
    for world in range(w):
        succ = sum(1 << j for j in np.flatnonzero(F.rel[world]))
        box |= ((U & succ) == succ).astype(np.int64) << world
    tables = {
        "meet": U[:, None] & U[None, :],
        "join": U[:, None] | U[None, :],
        "neg": full ^ U,
        "bot": 0,
        "top": full,
        "box": box,
    }
    return FiniteAlgebra(MODAL, n, tables, name=f"Cm({w} worlds)")


def subset_of(mask: int) -> list[int]:
    mask = int(mask)
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


def box_terms(sig: Signature, f: str, pad: str = "0") -> tuple[list[Term], Term]:
    """□ᶠ_k x = f(c̄, x, c̄) ∧ x for each coordinate k, and their meet □ᶠ.

    ``pad`` selects the padding constant: ``"0"`` (bottom) or ``"1"`` (top).
    """
    if f not in sig.ops or sig.ops[f] == 0:
        raise InputError(f"{f!r} is not an operation of positive arity")
    if pad not in ("0", "1"):
        raise InputError("pad must be '0' or '1'")
    const = sig.bottom if pad == "0" else sig.top
    if const is None:
        raise InputError("signature lacks the padding constant")
    x = var("x")
    c = app(const)
    parts = []
    for k in range(sig.ops[f]):
        args = [c] * sig.ops[f]
        args[k] = x
        parts.append(sig.meet_of(app(f, *args), x))
    whole = parts[0]
    for p in parts[1:]:
        whole = sig.meet_of(whole, p)
    return parts, whole


def box_all(sig: Signature, ops: Sequence[str], pad: str = "0") -> Term:
    """□x = ⋀_{f} □ᶠ x over a finite list of operators."""
    if not ops:
        raise InputError("need at least one operator")
    out = None
    for f in ops:
        _, b = box_terms(sig, f, pad)
        out = b if out is None else sig.meet_of(out, b)
    return out


def boxhat(sig: Signature = MODAL) -> Term:
    """⊡x = □x ∧ x."""
    return box_terms(sig, "box")[1]


def conjugate_check(A: FiniteAlgebra, box: Term, g: Term) -> tuple[bool, tuple[int, int] | None]:
    """□x ∧ y = 0 ⟺ x ∧ g(y) = 0 for all x, y; returns the first failing pair."""
    sig = A.sig
    if sig.bottom is None:
        raise InputError("conjugation needs a bottom constant")
    (bx,) = sorted(box.variables())
    (gy,) = sorted(g.variables())
    b = term_function(box, A, [bx])
    gv = term_function(g, A, [gy])
    zero = int(A.tables[sig.bottom])
    m = A.meet_table
    n = A.size
    for x in range(n):
        for y in range(n):
            if (m[b[x], y] == zero) != (m[x, gv[y]] == zero):
                return False, (x, y)
    return True, None


# -- residuated chains -----------------------------------------------------------

def luk_chain(k: int, zero: str = "bottom") -> FiniteAlgebra:
    """The k-element Łukasiewicz chain {0, 1/(k-1), …, 1} as an FL-algebra.

    ``zero`` picks the constant 0: the bottom, or the unit (e ≈ 0).
    """
    if k < 2:
        raise InputError("a Łukasiewicz chain needs at least 2 elements")
    if zero not in ("bottom", "unit"):
        raise InputError("zero must be 'bottom' or 'unit'")
    top = k - 1
    i = np.arange(k)
    a, b = i[:, None], i[None, :]
    tables = {
        "meet": np.minimum(a, b),
        "join": np.maximum(a, b),
        "mul": np.maximum(0, a + b - top),
        "ldiv": np.minimum(top, top - a + b),   # a\b
        "rdiv": np.minimum(top, top - b + a),   # a/b
        "e": top,
        "zero": 0 if zero == "bottom" else top,
    }
    return FiniteAlgebra(FL, k, tables, name=f"Ł{k}")


def luk_value(k: int, a: int) -> Fraction:
    return Fraction(a, k - 1)


@dataclass(frozen=True)
class Violation:
    law: str
    elements: tuple[int, ...]

    def __str__(self):
        return f"{self.law} fails at {self.elements}"


def residuation_check(A: FiniteAlgebra) -> tuple[bool, Violation | None]:
    """Lattice and monoid laws plus b ≤ a\\c ⟺ a·b ≤ c ⟺ a ≤ c/b for all triples."""
    for op in ("meet", "join", "mul", "ldiv", "rdiv", "e"):
        if op not in A.sig.ops:
            raise InputError(f"residuated structure needs {op!r}")
    n = A.size
    if n == 0:
        return True, None
    m, j = A.tables["meet"], A.tables["join"]
    mul, ld, rd = A.tables["mul"], A.tables["ldiv"], A.tables["rdiv"]
    e = int(A.tables["e"])
    idx = np.arange(n)
    x, y, z = idx[:, None, None], idx[None, :, None], idx[None, None, :]
    bad = _first(~((m == m.T) & (j == j.T)))
    if bad:
        return False, Violation("lattice commutativity", bad)
    bad = _first((m[x, j[x, y]] != x) | (j[x, m[x, y]] != x))
    if bad:
        return False, Violation("absorption", bad)
    bad = _first((m[m[x, y], z] != m[x, m[y, z]]) | (j[j[x, y], z] != j[x, j[y, z]]))
    if bad:
        return False, Violation("lattice associativity", bad)
    bad = _first((mul[e, idx] != idx) | (mul[idx, e] != idx))
    if bad:
        return False, Violation("unit", bad)
    bad = _first(mul[mul[x, y], z] != mul[x, mul[y, z]])
    if bad:
        return False, Violation("monoid associativity", bad)
    leq = m == idx[:, None]
    # indices (a, b, c)
    a, b, c = x, y, z
    left = leq[b, ld[a, c]]
    mid = leq[mul[a, b], c]
    right = leq[a, rd[c, b]]
    bad = _first((left != mid) | (mid != right))
    if bad:
        return False, Violation("residuation", bad)
    return True, None


def _first(mask: np.ndarray) -> tuple[int, ...] | None:
    hits = np.argwhere(mask)
    return tuple(int(v) for v in hits[0]) if len(hits) else None


def fl_identities(sig: Signature = FL, hamiltonian_k: int = 1) -> dict[str, list[Equation]]:
    """The defining identities of the standard FL subvarieties, by name."""
    p = lambda s: parse_equation(s, sig)
    ek = power_term(parse_term("e & x", sig), hamiltonian_k)
    y = var("y")
    return {
        "e = 0": [p("e = zero")],
        "integral": [p("x <= e")],
        "zero-bounded": [p("zero <= x")],
        "commutative": [p("x * y = y * x")],
        "square-increasing": [p("x <= x * x")],
        "cyclic": [p("zero / (x \\ zero) = (zero / x) \\ zero")],
        "involutive": [p("zero / (x \\ zero) = x"), p("(zero / x) \\ zero = x")],
        f"hamiltonian-{hamiltonian_k}": [Equation(app("mul", ek, y), app("mul", y, ek))],
        "distributive": [p("x & (y | z) = (x & y) | (x & z)")],
    }


def identity_report(A: FiniteAlgebra, identities: Mapping[str, list[Equation]]) -> dict[str, bool]:
    return {name: all(satisfies(A, e)[0] for e in eqs) for name, eqs in identities.items()}


# -- down-set algebras ------------------------------------------------------------

def downsets(Q: FinitePoset, budget: int = MAX_DOWNSETS) -> list[int]:
    """All down-sets of Q as bitmasks, ordered by (size, mask)."""
    n = Q.size
    below = [sum(1 << int(a) for a in np.flatnonzero(Q.leq[:, q])) for q in range(n)]
    found = {0}
    frontier = [0]
    while frontier:
        U = frontier.pop()
        for q in range(n):
            V = U | below[q]
            if V not in found:
                found.add(V)
                if len(found) > budget:
                    raise BudgetExceeded(f"more than {budget} down-sets")
                frontier.append(V)
    return sorted(found, key=lambda m: (bin(m).count("1"), m))


def downset_algebra(Q: FinitePoset, budget: int = MAX_DOWNSETS) -> FiniteAlgebra:
    """Down-sets of Q with ∩, ∪, relative pseudo-complement and its dual."""
    D = downsets(Q, budget)
    index = {U: i for i, U in enumerate(D)}
    n = Q.size
    below = [sum(1 << int(a) for a in np.flatnonzero(Q.leq[:, q])) for q in range(n)]
    full = (1 << n) - 1

    def down_closure(S: int) -> int:
        out = 0
        for q in range(n):
            if S >> q & 1:
                out |= below[q]
        return out

    k = len(D)
    meet = np.empty((k, k), dtype=np.int64)
    join = np.empty_like(meet)
    imp = np.empty_like(meet)
    sub = np.empty_like(meet)
    for i, U in enumerate(D):
        for j, V in enumerate(D):
            meet[i, j] = index[U & V]
            join[i, j] = index[U | V]
            imp[i, j] = index[sum(1 << q for q in range(n) if below[q] & U & ~V == 0)]
            sub[i, j] = index[down_closure(U & ~V)]
    tables = {"meet": meet, "join": join, "imp": imp, "sub": sub, "bot": index[0], "top": index[full]}
    return FiniteAlgebra(DOUBLE_HEYTING, k, tables, name=f"Down({n})")


def downset_masks(Q: FinitePoset) -> list[int]:
    return downsets(Q)


def d_term(sig: Signature = DOUBLE_HEYTING) -> Term:
    """d(x) = (1 − x) → 0."""
    return parse_term("(top - x) -> bot", sig)


def fence(n: int) -> FinitePoset:
    """Zigzag 0 < 1 > 2 < 3 …: even points minimal, odd points maximal."""
    covers = []
    for i in range(0, n, 2):
        if i + 1 < n:
            covers.append((i, i + 1))
        if i - 1 >= 0:
            covers.append((i, i - 1))
    return FinitePoset.from_covers(n, covers)


def heyting_residuation_check(A: FiniteAlgebra) -> tuple[bool, Violation | None]:
    """a ∧ b ≤ c ⟺ b ≤ a → c and a − b ≤ c ⟺ a ≤ b ∨ c."""
    n = A.size
    idx = np.arange(n)
    leq = A.leq
    m, j = A.tables["meet"], A.tables["join"]
    imp, sub = A.tables["imp"], A.tables["sub"]
    a, b, c = idx[:, None, None], idx[None, :, None], idx[None, None, :]
    bad = _first(leq[m[a, b], c] != leq[b, imp[a, c]])
    if bad:
        return False, Violation("→ residuates ∧", bad)
    bad = _first(leq[sub[a, b], c] != leq[a, j[b, c]])
    if bad:
        return False, Violation("− dually residuates ∨", bad)
    return True, None


# -- lattices with constants ------------------------------------------------------

def lattice_t(sig: Signature = CONST_LATTICE) -> Term:
    """t(x) = (c1 ∧ (c2 ∨ (c3 ∧ x))) ∧ x."""
    return parse_term("(c1 & (c2 | (c3 & x))) & x", sig)


def lattice_from_poset(P: FinitePoset, name: str = "") -> FiniteAlgebra:
    return FiniteAlgebra(LATTICE, P.size, {"meet": P.meet_table, "join": P.join_table}, name=name)


@dataclass(frozen=True, eq=False)
class ConstLattice:
    algebra: FiniteAlgebra
    constants: dict[str, int] = field(default_factory=dict)

    @staticmethod
    def translate(t: Term | Equation) -> Term | Equation:
        """Read constants c̄ as free variables of the same name."""
        if isinstance(t, Equation):
            return Equation(constants_as_variables(t.lhs), constants_as_variables(t.rhs), t.kind)
        return constants_as_variables(t)


def constants_as_variables(t: Term) -> Term:
    if t.args is None:
        return t
    if not t.args and t.head in CONST_LATTICE.constants:
        return var(t.head)
    return app(t.head, *(constants_as_variables(a) for a in t.args))


def lattice_const_expand(L: FiniteAlgebra, assignment: Mapping[str, int]) -> ConstLattice:
    names = CONST_LATTICE.constants
    missing = [c for c in names if c not in assignment]
    if missing:
        raise InputError(f"assignment misses constants {missing}")
    for c in names:
        if not 0 <= int(assignment[c]) < L.size:
            raise InputError(f"constant {c} assigned outside the lattice")
    tables = {"meet": L.tables["meet"], "join": L.tables["join"]}
    tables.update({c: int(assignment[c]) for c in names})
    A = FiniteAlgebra(CONST_LATTICE, L.size, tables, name=f"{L.name}{tuple(assignment[c] for c in names)}")
    return ConstLattice(A, {c: int(assignment[c]) for c in names})


def enumerate_lattices(max_size: int):
    """Finite lattices up to isomorphism, by size, then by a fixed code order.

    A lattice with n ≥ 2 elements is a bounded poset 0 ⊕ Q ⊕ 1 with |Q| = n − 2.
    """
    for n in range(1, max_size + 1):
        if n == 1:
            yield lattice_from_poset(FinitePoset(np.ones((1, 1), dtype=bool)), name="L1#0")
            continue
        count = 0
        for Q in enumerate_posets(n - 2):
            L = np.ones((n, n), dtype=bool)
            L[1:, 0] = False
            L[n - 1, :n - 1] = False
            L[1:n - 1, 1:n - 1] = Q.leq
            P = FinitePoset(L, check=False)
            if P.is_lattice():
                yield lattice_from_poset(P, name=f"L{n}#{count}")
                count += 1


# -- Whitman's procedure ----------------------------------------------------------

def whitman_leq(s: Term, t: Term, meet: str = "meet", join: str = "join") -> bool:
    """Decide s ≤ t in the free lattice; other atoms (constants included) are generators."""

    @lru_cache(maxsize=None)
    def leq(a: Term, b: Term) -> bool:
        if a.args and a.head == join:
            return leq(a.args[0], b) and leq(a.args[1], b)
        if b.args and b.head == meet:
            return leq(a, b.args[0]) and leq(a, b.args[1])
        a_meet = bool(a.args) and a.head == meet
        b_join = bool(b.args) and b.head == join
        if not a_meet and not b_join:
            _atom(a, meet, join)
            _atom(b, meet, join)
            return a == b
        if a_meet and (leq(a.args[0], b) or leq(a.args[1], b)):
            return True
        if b_join and (leq(a, b.args[0]) or leq(a, b.args[1])):
            return True
        return False

    return leq(s, t)


def _atom(t: Term, meet: str, join: str):
    if t.args:
        raise InputError(f"Whitman's procedure handles only {meet}/{join} terms, not {t.head!r}")


NAMED_TERMS: dict[str, tuple[Signature, Callable[[], Term]]] = {
    "boxhat": (MODAL, lambda: boxhat(MODAL)),
    "d": (DOUBLE_HEYTING, lambda: d_term(DOUBLE_HEYTING)),
    "luk-sq": (FL, lambda: power_term(parse_term("e & x", FL), 2)),
    "lattice-t": (CONST_LATTICE, lambda: lattice_t(CONST_LATTICE)),
}
