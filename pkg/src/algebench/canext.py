"""Canonical extensions of finite posets and of maps between them.

For a finite poset every filter and ideal is principal, so the canonical
extension is the cut (Dedekind–MacNeille) completion.  The σ and π
extensions of maps are nevertheless computed from the general two-level
meet/join display over closed/open pairs, so the shortcut formulas for
order-preserving maps remain something to check rather than something
assumed.  Multi-ary maps are extended coordinatewise on the product of
completions, with order-reversed coordinates swapping closed and open.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetExceeded, InputError, InvariantViolation, PreconditionError
from .finalg import FiniteAlgebra, term_function
from .terms import Term, polarity

MAX_SUBSET_SCAN = 14


class FinitePoset:
    def __init__(self, leq, check: bool = True):
        leq = np.array(leq, dtype=bool)
        if leq.ndim != 2 or leq.shape[0] != leq.shape[1]:
            raise InputError("order relation must be a square matrix")
        self.leq = leq
        self.leq.setflags(write=False)
        self.size = leq.shape[0]
        if check:
            self._validate()

    def _validate(self):
        L = self.leq
        if not L.diagonal().all():
            raise InputError("order relation is not reflexive")
        if (L & L.T & ~np.eye(self.size, dtype=bool)).any():
            raise InputError("order relation is not antisymmetric")
        if self.size and ((L.astype(np.int64) @ L.astype(np.int64) > 0) & ~L).any():
            raise InputError("order relation is not transitive")

    def __repr__(self):
        return f"<FinitePoset size={self.size}>"

    @classmethod
    def chain(cls, n: int) -> FinitePoset:
        i = np.arange(n)
        return cls(i[:, None] <= i[None, :])

    @classmethod
    def antichain(cls, n: int) -> FinitePoset:
        return cls(np.eye(n, dtype=bool))

    @classmethod
    def from_covers(cls, n: int, covers: Iterable[tuple[int, int]]) -> FinitePoset:
        """Reflexive-transitive closure of the given (lower, upper) pairs."""
        L = np.eye(n, dtype=bool)
        for a, b in covers:
            L[a, b] = True
        for k in range(n):
            L |= L[:, k:k + 1] & L[k:k + 1, :]
        return cls(L)

    def dual(self) -> FinitePoset:
        return FinitePoset(self.leq.T, check=False)

    def to_json(self) -> dict:
        return {"size": self.size, "leq": self.leq.astype(int).tolist()}

    def down(self, a: int) -> np.ndarray:
        return self.leq[:, a]

    def up(self, a: int) -> np.ndarray:
        return self.leq[a, :]

    def upper_bounds(self, xs: Iterable[int]) -> np.ndarray:
        xs = list(xs)
        return self.leq[xs, :].all(axis=0) if xs else np.ones(self.size, dtype=bool)

    def lower_bounds(self, xs: Iterable[int]) -> np.ndarray:
        xs = list(xs)
        return self.leq[:, xs].all(axis=1) if xs else np.ones(self.size, dtype=bool)

    def least(self, mask: np.ndarray) -> int | None:
        cand = np.flatnonzero(mask)
        for c in cand:
            if self.leq[c, cand].all():
                return int(c)
        return None

    def greatest(self, mask: np.ndarray) -> int | None:
        cand = np.flatnonzero(mask)
        for c in cand:
            if self.leq[cand, c].all():
                return int(c)
        return None

    def join_of(self, xs: Iterable[int]) -> int | None:
        return self.least(self.upper_bounds(xs))

    def meet_of(self, xs: Iterable[int]) -> int | None:
        return self.greatest(self.lower_bounds(xs))

    def is_lattice(self) -> bool:
        if self.size == 0:
            return False
        if self.join_of([]) is None or self.meet_of([]) is None:
            return False
        return all(self.join_of([a, b]) is not None and self.meet_of([a, b]) is not None
                   for a, b in itertools.combinations(range(self.size), 2))

    @cached_property
    def meet_table(self) -> np.ndarray:
        return self._binary(self.meet_of, "meet")

    @cached_property
    def join_table(self) -> np.ndarray:
        return self._binary(self.join_of, "join")

    def _binary(self, fn, label) -> np.ndarray:
        n = self.size
        out = np.empty((n, n), dtype=np.int64)
        for a in range(n):
            for b in range(a, n):
                v = fn([a, b])
                if v is None:
                    raise InputError(f"poset has no {label} of {a} and {b}")
                out[a, b] = out[b, a] = v
        return out

    @cached_property
    def top(self) -> int | None:
        return self.greatest(np.ones(self.size, dtype=bool))

    @cached_property
    def bottom(self) -> int | None:
        return self.least(np.ones(self.size, dtype=bool))

    @cached_property
    def heights(self) -> np.ndarray:
        return self.leq.sum(axis=0)

    def is_isomorphic_to(self, other: FinitePoset) -> bool:
        return self.size == other.size and canonical_code(self) == canonical_code(other)


def poset_of(A: FiniteAlgebra) -> FinitePoset:
    return FinitePoset(A.leq)


def _fold(table: np.ndarray, items: Iterable[int], unit: int) -> int:
    out = unit
    for i in items:
        out = int(table[out, i])
    return out


@dataclass(eq=False)
class Completion:
    """A finite lattice with an order embedding of ``source`` and its closed
    (K) and open (O) elements."""

    source: FinitePoset
    lattice: FinitePoset
    embed: tuple[int, ...]
    closed: frozenset[int]
    open: frozenset[int]

    @property
    def size(self) -> int:
        return self.lattice.size

    @cached_property
    def meet(self) -> np.ndarray:
        return self.lattice.meet_table

    @cached_property
    def join(self) -> np.ndarray:
        return self.lattice.join_table

    @cached_property
    def top(self) -> int:
        return self.lattice.top

    @cached_property
    def bottom(self) -> int:
        return self.lattice.bottom

    def meet_all(self, items: Iterable[int]) -> int:
        return _fold(self.meet, items, self.top)

    def join_all(self, items: Iterable[int]) -> int:
        return _fold(self.join, items, self.bottom)

    def to_json(self) -> dict:
        return {
            "lattice": self.lattice.to_json(),
            "embed": list(self.embed),
            "closed": sorted(self.closed),
            "open": sorted(self.open),
        }


def closed_and_open(lattice: FinitePoset, embed: Sequence[int]) -> tuple[frozenset[int], frozenset[int]]:
    """K = meets of embedded subsets, O = joins of embedded subsets (empty included)."""
    meet, join = lattice.meet_table, lattice.join_table

    def closure(start: set[int], table) -> frozenset[int]:
        out = set(start)
        frontier = list(out)
        while frontier:
            a = frontier.pop()
            for e in set(embed):
                c = int(table[a, e])
                if c not in out:
                    out.add(c)
                    frontier.append(c)
        return frozenset(out)

    return closure({lattice.top}, meet), closure({lattice.bottom}, join)


def _popcount(m: int) -> int:
    return bin(m).count("1")


def _lattice_from_sets(masks: list[int]) -> FinitePoset:
    n = len(masks)
    L = np.zeros((n, n), dtype=bool)
    for i, a in enumerate(masks):
        for j, b in enumerate(masks):
            L[i, j] = a & b == a
    return FinitePoset(L)


def canonical_extension(P: FinitePoset) -> Completion:
    """Cut completion: intersections of principal down-sets, ordered by inclusion."""
    n = P.size
    full = (1 << n) - 1
    downs = [sum(1 << a for a in range(n) if P.leq[a, p]) for p in range(n)]
    cuts = {full, *downs}
    frontier = list(cuts)
    while frontier:
        c = frontier.pop()
        for d in downs:
            x = c & d
            if x not in cuts:
                cuts.add(x)
                frontier.append(x)
    masks = sorted(cuts, key=lambda m: (_popcount(m), m))
    lattice = _lattice_from_sets(masks)
    index = {m: i for i, m in enumerate(masks)}
    embed = tuple(index[d] for d in downs)
    K, O = closed_and_open(lattice, embed)
    return Completion(P, lattice, embed, K, O)


def filters(P: FinitePoset) -> list[frozenset[int]]:
    """Non-empty down-directed up-sets, by brute force over subsets."""
    return _directed_sets(P, up=True)


def ideals(P: FinitePoset) -> list[frozenset[int]]:
    return _directed_sets(P, up=False)


def _directed_sets(P: FinitePoset, up: bool) -> list[frozenset[int]]:
    n = P.size
    if n > MAX_SUBSET_SCAN:
        raise BudgetExceeded(f"subset scan over {n} elements exceeds the cap {MAX_SUBSET_SCAN}")
    L = P.leq if up else P.leq.T
    out = []
    for mask in range(1, 1 << n):
        S = [a for a in range(n) if mask >> a & 1]
        inside = np.zeros(n, dtype=bool)
        inside[S] = True
        if not all(inside[L[a]].all() for a in S):
            continue
        if all((L[:, a] & L[:, b] & inside).any() for a, b in itertools.combinations(S, 2)):
            out.append(frozenset(S))
    return out


def polarity_extension(P: FinitePoset) -> Completion:
    """Galois-stable sets of filters under F R I ⟺ F ∩ I ≠ ∅."""
    Fs, Is = filters(P), ideals(P)
    R = np.array([[bool(F & I) for I in Is] for F in Fs], dtype=bool).reshape(len(Fs), len(Is))
    if len(Fs) > MAX_SUBSET_SCAN:
        raise BudgetExceeded("too many filters for the subset scan")

    def close(sel: np.ndarray) -> frozenset[int]:
        upper = R[sel].all(axis=0) if sel.any() else np.ones(len(Is), dtype=bool)
        lower = R[:, upper].all(axis=1) if upper.any() else np.ones(len(Fs), dtype=bool)
        return frozenset(np.flatnonzero(lower).tolist())

    stable = set()
    for mask in range(1 << len(Fs)):
        sel = np.array([(mask >> i) & 1 for i in range(len(Fs))], dtype=bool)
        stable.add(close(sel))
    order = sorted(stable, key=lambda s: (len(s), sorted(s)))
    index = {s: i for i, s in enumerate(order)}
    n = len(order)
    lattice = FinitePoset([[a <= b for b in order] for a in order])
    principal = {min(F, key=lambda a: P.heights[a]): i for i, F in enumerate(Fs)}
    embed = []
    for p in range(P.size):
        sel = np.zeros(len(Fs), dtype=bool)
        sel[principal[p]] = True
        embed.append(index[close(sel)])
    K, O = closed_and_open(lattice, embed)
    assert lattice.size == n
    return Completion(P, lattice, tuple(embed), K, O)


def find_isomorphism(C1: Completion, C2: Completion) -> tuple[int, ...] | None:
    """A lattice isomorphism i: C1 → C2 with i ∘ e1 = e2, by backtracking."""
    L1, L2 = C1.lattice.leq, C2.lattice.leq
    n = C1.size
    if n != C2.size or len(C1.embed) != len(C2.embed):
        return None
    inv1 = [(int(L1[:, a].sum()), int(L1[a, :].sum())) for a in range(n)]
    inv2 = [(int(L2[:, a].sum()), int(L2[a, :].sum())) for a in range(n)]
    fixed: dict[int, int] = {}
    for e1, e2 in zip(C1.embed, C2.embed):
        if fixed.setdefault(e1, e2) != e2:
            return None
    mapping = [-1] * n
    used = [False] * n

    def consistent(a: int, b: int) -> bool:
        if inv1[a] != inv2[b] or used[b]:
            return False
        for c in range(n):
            d = mapping[c]
            if d >= 0 and (L1[a, c] != L2[b, d] or L1[c, a] != L2[d, b]):
                return False
        return True

    order = sorted(fixed) + [a for a in range(n) if a not in fixed]

    def place(k: int) -> bool:
        if k == n:
            return True
        a = order[k]
        cands = [fixed[a]] if a in fixed else range(n)
        for b in cands:
            if consistent(a, b):
                mapping[a], used[b] = b, True
                if place(k + 1):
                    return True
                mapping[a], used[b] = -1, False
        return False

    return tuple(mapping) if place(0) else None


@dataclass(frozen=True)
class CompletionReport:
    dense: bool
    compact: bool
    embedding_ok: bool

    @property
    def ok(self) -> bool:
        return self.dense and self.compact and self.embedding_ok


def verify_completion(C: Completion) -> CompletionReport:
    """Check the definitions directly.

    Compactness is checked in its filter/ideal form: ⋀e(F) ≤ ⋁e(I) iff F
    and I meet, for every filter F and ideal I of the source; with finite
    subsets of K and O the subset form would hold vacuously.
    """
    P, L = C.source, C.lattice
    e = C.embed
    embedding_ok = C.lattice.is_lattice() and all(
        bool(P.leq[a, b]) == bool(L.leq[e[a], e[b]]) for a in range(P.size) for b in range(P.size))
    if embedding_ok:
        for S in _subsets_to_check(P):
            m = P.meet_of(S)
            if m is not None and e[m] != C.meet_all(e[a] for a in S):
                embedding_ok = False
                break
            j = P.join_of(S)
            if j is not None and e[j] != C.join_all(e[a] for a in S):
                embedding_ok = False
                break
    dense = embedding_ok and all(
        c == C.join_all(k for k in C.closed if L.leq[k, c]) and c == C.meet_all(o for o in C.open if L.leq[c, o])
        for c in range(C.size))
    compact = embedding_ok and all(
        bool(L.leq[C.meet_all(e[a] for a in F), C.join_all(e[a] for a in I)]) == bool(F & I)
        for F in filters(P) for I in ideals(P))
    return CompletionReport(dense, compact, embedding_ok)


def _subsets_to_check(P: FinitePoset):
    n = P.size
    if n <= MAX_SUBSET_SCAN:
        for r in range(n + 1):
            yield from itertools.combinations(range(n), r)
    else:
        yield ()
        yield from itertools.combinations(range(n), 2)


# -- maps ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MapTable:
    """A map P^n → P; ``dual[i]`` marks coordinates read in the order dual."""

    poset: FinitePoset
    table: np.ndarray
    dual: tuple[bool, ...] = ()

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.int64)
        object.__setattr__(self, "table", table)
        if not self.dual:
            object.__setattr__(self, "dual", (False,) * table.ndim)
        if len(self.dual) != table.ndim:
            raise InputError("one dualisation flag per coordinate is required")
        if table.shape != (self.poset.size,) * table.ndim:
            raise InputError("map table does not cover P^n")
        if table.size and (table.min() < 0 or table.max() >= self.poset.size):
            raise InputError("map values outside the poset")

    @property
    def arity(self) -> int:
        return self.table.ndim

    def __call__(self, *args: int) -> int:
        return int(self.table[tuple(args)])

    def __eq__(self, other):
        return isinstance(other, MapTable) and np.array_equal(self.table, other.table) and self.dual == other.dual

    def __hash__(self):
        return hash(self.table.tobytes())


def identity_map(P: FinitePoset) -> MapTable:
    return MapTable(P, np.arange(P.size))


def constant_map(P: FinitePoset, c: int, arity: int = 1) -> MapTable:
    return MapTable(P, np.full((P.size,) * arity, c))


def compose(f: MapTable, gs: Sequence[MapTable]) -> MapTable:
    """f(g_1, …, g_n) as a map P^k → P."""
    if len(gs) != f.arity:
        raise InputError("need one inner map per coordinate of f")
    k = gs[0].arity
    if any(g.arity != k for g in gs):
        raise InputError("inner maps must share an arity")
    return MapTable(f.poset, f.table[tuple(g.table for g in gs)], gs[0].dual)


class _Product:
    """Order data on the domain C^k of a k-ary map, respecting dualisations.

    Interval endpoints: for σ the lower end runs over embedded points and the
    upper end over embedded points and the top; for π dually.  On a finite
    poset filters and ideals are principal, and the extra bound stands for
    an unconstrained end, so no interval [p, q] with p ≤ q is empty.
    """

    def __init__(self, C: Completion, dual: Sequence[bool], mode: str = "sigma"):
        self.C = C
        self.dual = tuple(dual)
        self.k = len(dual)
        c = C.size
        self.shape = (c,) * self.k
        self.N = c ** self.k
        pts = sorted(set(C.embed))
        lows, highs = [], []
        for d in self.dual:
            top, bot = (C.bottom, C.top) if d else (C.top, C.bottom)
            lows.append(pts + ([bot] if mode == "pi" and bot not in pts else []))
            highs.append(pts + ([top] if mode == "sigma" and top not in pts else []))
        self.K = self._flat(itertools.product(*lows))
        self.O = self._flat(itertools.product(*highs))
        n = C.source.size
        src = itertools.product(range(n), repeat=self.k)
        self.emb = self._flat(tuple(C.embed[a] for a in t) for t in src)

    def _flat(self, tuples) -> np.ndarray:
        tuples = list(tuples)
        if self.k == 0:
            return np.zeros(len(tuples), dtype=np.int64)
        arr = np.asarray(tuples, dtype=np.int64).reshape(len(tuples), self.k)
        return np.ravel_multi_index(arr.T, self.shape) if len(arr) else np.zeros(0, dtype=np.int64)

    def le(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Matrix of a_i ≤ b_j in the (dualised) product order."""
        a, b = np.asarray(a), np.asarray(b)
        out = np.ones((len(a), len(b)), dtype=bool)
        L = self.C.lattice.leq
        ca = np.unravel_index(a, self.shape) if self.k else ()
        cb = np.unravel_index(b, self.shape) if self.k else ()
        for i in range(self.k):
            x, y = ca[i][:, None], cb[i][None, :]
            out &= L[y, x] if self.dual[i] else L[x, y]
        return out


def _masked_fold(values: np.ndarray, masks: np.ndarray, table: np.ndarray, unit: int) -> np.ndarray:
    """out[r] = fold of values[j] over j with masks[r, j]."""
    out = np.full(masks.shape[0], unit, dtype=np.int64)
    for j in range(masks.shape[1]):
        m = masks[:, j]
        if m.any():
            out[m] = table[out[m], values[j]]
    return out


def extend_map(f: MapTable, mode: str, C: Completion) -> MapTable:
    """f^σ or f^π on C, evaluated from the display over closed/open pairs.

    Taking every meet and join of embedded subsets as an endpoint would let
    empty or off-centre intervals contribute, and the identity on a
    two-element antichain would already fail to extend to a monotone map;
    see ``_Product`` for the endpoints used.
    """
    if mode not in ("sigma", "pi"):
        raise InputError("mode must be 'sigma' or 'pi'")
    if C.source.size != f.poset.size:
        raise InputError("completion is not of the map's poset")
    D = _Product(C, f.dual, mode)
    fvals = np.asarray([C.embed[v] for v in f.table.ravel()], dtype=np.int64)
    LKE = D.le(D.K, D.emb)  # p ≤ e(a)
    LEO = D.le(D.emb, D.O)  # e(a) ≤ q
    inner_tab, inner_unit = (C.meet, C.top) if mode == "sigma" else (C.join, C.bottom)
    outer_tab, outer_unit = (C.join, C.bottom) if mode == "sigma" else (C.meet, C.top)
    # inner[p, q] folds f(a) over p ≤ a ≤ q
    pair_mask = LKE[:, None, :] & LEO.T[None, :, :]
    inner = _masked_fold(fvals, pair_mask.reshape(-1, len(fvals)), inner_tab, inner_unit)
    everything = np.arange(D.N)
    LKX = D.le(D.K, everything)  # p ≤ x
    LXO = D.le(everything, D.O)  # x ≤ q
    valid = (LKX.T[:, :, None] & LXO[:, None, :]).reshape(D.N, -1)
    out = _masked_fold(inner, valid, outer_tab, outer_unit)
    return MapTable(C.lattice, out.reshape(D.shape), f.dual)


def sigma_shortcut(f: MapTable, C: Completion) -> MapTable:
    """f^σ via ⋀{f(a) | p ≤ a} on closed p, then joins of closed elements below."""
    D = _Product(C, f.dual, "sigma")
    fvals = np.asarray([C.embed[v] for v in f.table.ravel()], dtype=np.int64)
    on_k = _masked_fold(fvals, D.le(D.K, D.emb), C.meet, C.top)
    below = D.le(D.K, np.arange(D.N)).T
    return MapTable(C.lattice, _masked_fold(on_k, below, C.join, C.bottom).reshape(D.shape), f.dual)


def pi_shortcut(f: MapTable, C: Completion) -> MapTable:
    D = _Product(C, f.dual, "pi")
    fvals = np.asarray([C.embed[v] for v in f.table.ravel()], dtype=np.int64)
    on_o = _masked_fold(fvals, D.le(D.emb, D.O).T, C.join, C.bottom)
    above = D.le(np.arange(D.N), D.O)
    return MapTable(C.lattice, _masked_fold(on_o, above, C.meet, C.top).reshape(D.shape), f.dual)


def restrict_to_source(F: MapTable, C: Completion) -> np.ndarray:
    """Values of an extended map on embedded tuples, pulled back to P."""
    k = F.arity
    n = C.source.size
    inv = {e: a for a, e in enumerate(C.embed)}
    out = np.empty((n,) * k, dtype=np.int64)
    for t in itertools.product(range(n), repeat=k):
        v = int(F.table[tuple(C.embed[a] for a in t)])
        if v not in inv:
            return None
        out[t] = inv[v]
    return out


def pointwise_leq(F: MapTable, G: MapTable) -> bool:
    return bool(F.poset.leq[F.table, G.table].all())


def is_order_preserving(f: MapTable) -> bool:
    P = f.poset
    k = f.arity
    for i in range(k):
        for a, b in zip(*np.nonzero(P.leq)):
            if a == b:
                continue
            lo, hi = (b, a) if f.dual[i] else (a, b)
            x = np.take(f.table, lo, axis=i)
            y = np.take(f.table, hi, axis=i)
            if not P.leq[x, y].all():
                return False
    return True


# -- operators -------------------------------------------------------------------

def _preserves(f: MapTable, joins: bool) -> bool:
    P = f.poset
    # non-empty joins only: ∨ itself must count as an operator
    if P.is_lattice():
        subsets = list(itertools.combinations(range(P.size), 2))
    elif P.size <= MAX_SUBSET_SCAN:
        subsets = [S for S in _subsets_to_check(P) if S]
    else:
        raise BudgetExceeded("operator check on a large non-lattice poset")
    n, k = P.size, f.arity
    for i in range(k):
        use_join = joins != f.dual[i]
        for S in subsets:
            src = P.join_of(S) if use_join else P.meet_of(S)
            if src is None:
                continue
            for rest in itertools.product(range(n), repeat=k - 1):
                args = list(rest[:i]) + [None] + list(rest[i:])
                vals = []
                for a in S:
                    args[i] = a
                    vals.append(f(*args))
                args[i] = src
                target = P.join_of(vals) if joins else P.meet_of(vals)
                if target is None or target != f(*args):
                    return False
    return True


def operator_check(f: MapTable) -> str:
    """'operator', 'dual_operator', 'both' or 'neither' under f's dualisations."""
    op, dop = _preserves(f, joins=True), _preserves(f, joins=False)
    return "both" if op and dop else "operator" if op else "dual_operator" if dop else "neither"


def preserves_cut_joins(f: MapTable, C: Completion) -> bool:
    """Coordinatewise: f(b) ≤ ⋁ f[S] in C whenever b lies below every upper
    bound of the finite set S.  On lattices this is join preservation; on
    other posets it is strictly stronger than preserving existing joins."""
    P = f.poset
    n, k = P.size, f.arity
    if any(f.dual):
        raise InputError("cut-join check covers order-preserving coordinates only")
    if n > MAX_SUBSET_SCAN:
        raise BudgetExceeded("cut-join check over too many subsets")
    L = C.lattice.leq
    for i in range(k):
        for r in range(n + 1):
            for S in itertools.combinations(range(n), r):
                ub = np.flatnonzero(P.upper_bounds(S))
                cut = np.flatnonzero(P.lower_bounds(ub))
                for rest in itertools.product(range(n), repeat=k - 1):
                    line = np.moveaxis(f.table, i, -1)[rest] if k > 1 else f.table
                    j = C.join_all(C.embed[line[a]] for a in S)
                    if not all(L[C.embed[line[b]], j] for b in cut):
                        return False
    return True


# -- algebras -----------------------------------------------------------------------

def op_map(A: FiniteAlgebra, op: str, P: FinitePoset | None = None) -> MapTable:
    P = P if P is not None else poset_of(A)
    pols = A.sig.mono.get(op, ("+",) * A.sig.ops[op])
    return MapTable(P, A.tables[op], tuple(p == "-" for p in pols))


def sigma_algebra(A: FiniteAlgebra, C: Completion | None = None) -> FiniteAlgebra:
    """A^σ: C with each basic operation extended by its declared σ/π choice."""
    P = poset_of(A)
    C = C if C is not None else canonical_extension(P)
    tables = {}
    for op, arity in A.sig.ops.items():
        if arity == 0:
            tables[op] = C.embed[int(A.tables[op])]
            continue
        mode = A.sig.ext.get(op, "sigma")
        tables[op] = extend_map(op_map(A, op, P), mode, C).table
    return FiniteAlgebra(A.sig, C.size, tables, name=f"{A.name}^σ" if A.name else "")


@dataclass(frozen=True)
class ExtensionClass:
    expanding: bool
    contracting: bool
    smooth: bool

    @property
    def stable(self) -> bool:
        return self.expanding and self.contracting

    @property
    def label(self) -> str:
        if self.stable:
            return "stable"
        return "expanding" if self.expanding else "contracting" if self.contracting else "none"


def term_map(t: Term, A: FiniteAlgebra, variables: Sequence[str], P: FinitePoset | None = None) -> MapTable:
    P = P if P is not None else poset_of(A)
    dual = tuple(polarity(t, v, A.sig) == "-" for v in variables)
    return MapTable(P, term_function(t, A, variables), dual)


def classify_extension(t: Term, A: FiniteAlgebra, C: Completion | None = None) -> ExtensionClass:
    """Compare t interpreted in A^σ with the σ-extension of t's term function."""
    P = poset_of(A)
    C = C if C is not None else canonical_extension(P)
    variables = sorted(t.variables()) or ["x"]
    f = term_map(t, A, variables, P)
    in_ext = term_function(t, sigma_algebra(A, C), variables)
    ext_sigma = extend_map(f, "sigma", C).table
    ext_pi = extend_map(f, "pi", C).table
    L = C.lattice.leq
    return ExtensionClass(
        expanding=bool(L[ext_sigma, in_ext].all()),
        contracting=bool(L[in_ext, ext_sigma].all()),
        smooth=bool(np.array_equal(ext_sigma, ext_pi)),
    )


def _check_fixpoint_preconditions(X: Sequence[int], step, leq: np.ndarray):
    X = list(X)
    if not X:
        raise PreconditionError("X must be non-empty")
    inside = set(X)
    for a in X:
        if step(a) not in inside:
            raise PreconditionError(f"X not closed under the map: {a} ↦ {step(a)}")
        if not leq[step(a), a]:
            raise PreconditionError(f"map not decreasing on X at {a}: {step(a)} ≰ {a}")
    for a, b in itertools.combinations(X, 2):
        if not any(leq[c, a] and leq[c, b] for c in X):
            raise PreconditionError(f"X not downward directed: no lower bound of {a}, {b} in X")


def fixpoint_check(f: MapTable | Term, X: Sequence[int], base: FinitePoset | FiniteAlgebra,
                   C: Completion | None = None) -> bool:
    """Whether the extended map fixes ⋀X (computed in C).

    ``f`` is either a unary MapTable on a poset (σ-extension used) or a unary
    term over an ordered algebra (interpreted in A^σ).
    """
    if isinstance(f, Term):
        A = base
        P = poset_of(A)
        C = C if C is not None else canonical_extension(P)
        (v,) = sorted(f.variables())
        here = term_function(f, A, [v])
        _check_fixpoint_preconditions(X, lambda a: int(here[a]), A.leq)
        extended = term_function(f, sigma_algebra(A, C), [v])
    else:
        P = base if isinstance(base, FinitePoset) else poset_of(base)
        C = C if C is not None else canonical_extension(P)
        if f.arity != 1:
            raise InputError("fixpoint check needs a unary map")
        _check_fixpoint_preconditions(X, f, P.leq)
        extended = extend_map(f, "sigma", C).table
    y = C.meet_all(C.embed[a] for a in X)
    return int(extended[y]) == y


# -- enumeration --------------------------------------------------------------------

def canonical_code(P: FinitePoset) -> tuple:
    """Isomorphism-invariant code: least relation encoding over invariant-respecting relabellings."""
    n = P.size
    L = P.leq
    inv = [(int(L[:, a].sum()), int(L[a, :].sum())) for a in range(n)]
    classes: dict[tuple, list[int]] = {}
    for a in range(n):
        classes.setdefault(inv[a], []).append(a)
    keys = sorted(classes)
    best = None
    for perms in itertools.product(*[itertools.permutations(classes[k]) for k in keys]):
        order = [a for p in perms for a in p]
        code = tuple(L[np.ix_(order, order)].ravel().tolist())
        if best is None or code < best:
            best = code
    return (n, tuple(keys), best)


def enumerate_posets(n: int):
    """All posets on n elements up to isomorphism, in a fixed order."""
    if n == 0:
        yield FinitePoset(np.zeros((0, 0), dtype=bool))
        return
    seen: dict[tuple, FinitePoset] = {}
    for L in _natural_posets(n):
        P = FinitePoset(L, check=False)
        code = canonical_code(P)
        if code not in seen:
            seen[code] = P
    for code in sorted(seen):
        yield _from_code(code)


def _from_code(code) -> FinitePoset:
    n = code[0]
    return FinitePoset(np.asarray(code[2], dtype=bool).reshape(n, n))


def _natural_posets(n: int):
    """Naturally labelled posets (i < j whenever i ≤ j), by adding one element at a time."""

    def rec(L: np.ndarray):
        m = L.shape[0]
        if m == n:
            yield L
            return
        for mask in range(1 << m):
            below = np.array([(mask >> i) & 1 for i in range(m)], dtype=bool)
            # the new element's strict down-set must itself be a down-set
            if m and not (L[:, below].any(axis=1) <= below).all():
                continue
            M = np.zeros((m + 1, m + 1), dtype=bool)
            M[:m, :m] = L
            M[:m, m] = below
            M[m, m] = True
            yield from rec(M)

    yield from rec(np.zeros((0, 0), dtype=bool))


def random_isotone_map(P: FinitePoset, rng: np.random.Generator, arity: int = 1,
                       dual: Sequence[bool] | None = None, sweeps: int = 20) -> MapTable:
    """A random order-preserving map P^k → P (with dualisations).

    Starts from a random constant map and performs single-point moves that
    keep the map order-preserving (a Metropolis walk with uniform proposals).
    """
    dual = tuple(dual) if dual is not None else (False,) * arity
    n = P.size
    points = list(itertools.product(range(n), repeat=arity))
    below: dict[tuple, list[tuple]] = {t: [] for t in points}
    above: dict[tuple, list[tuple]] = {t: [] for t in points}
    for t in points:
        for i, a in enumerate(t):
            for b in np.flatnonzero(P.leq[:, a] if not dual[i] else P.leq[a]):
                if b != a:
                    s = t[:i] + (int(b),) + t[i + 1:]
                    below[t].append(s)
                    above[s].append(t)
    table = np.full((n,) * arity, int(rng.integers(n)), dtype=np.int64)
    for _ in range(sweeps * len(points)):
        t = points[int(rng.integers(len(points)))]
        v = int(rng.integers(n))
        if all(P.leq[table[s], v] for s in below[t]) and all(P.leq[v, table[s]] for s in above[t]):
            table[t] = v
    f = MapTable(P, table, dual)
    if not is_order_preserving(f):
        raise InvariantViolation("random isotone map generator produced a non-isotone map")
    return f
