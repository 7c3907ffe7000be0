"""Finite algebras given by operation tables.

Evaluation is vectorised: a term is evaluated over whole arrays of
assignments at once by fancy-indexing the tables, which is what makes the
exhaustive identity and quasi-identity checks cheap at desk scale.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BudgetExceeded, InputError, InvariantViolation
from .signatures import builtin_signature
from .terms import Equation, Signature, Term, desugar, signature_from_json

DEFAULT_ASSIGNMENT_BUDGET = 10**7

Pair = tuple[int, int]


EXHAUSTIVE_ASSOCIATIVITY = 200
ASSOCIATIVITY_SAMPLE = 200_000


class FiniteAlgebra:
    """An algebra on ``{0, …, size-1}``; immutable after construction."""

    def __init__(self, sig: Signature, size: int, tables: Mapping[str, object], name: str = ""):
        self.sig = sig
        self.size = int(size)
        self.name = name
        if self.size < 0:
            raise InputError("algebra size must be non-negative")
        missing = set(sig.ops) - set(tables)
        if missing:
            raise InputError(f"missing tables for {sorted(missing)}")
        extra = set(tables) - set(sig.ops)
        if extra:
            raise InputError(f"tables for undeclared operations {sorted(extra)}")
        self.tables: dict[str, np.ndarray] = {}
        for op, arity in sig.ops.items():
            arr = np.asarray(tables[op], dtype=np.int32)
            if arr.shape != (self.size,) * arity:
                raise InputError(f"table {op!r} has shape {arr.shape}, expected {(self.size,) * arity}")
            if arr.size and (arr.min() < 0 or arr.max() >= self.size):
                raise InputError(f"table {op!r} has entries outside 0..{self.size - 1}")
            if arity == 0 and self.size == 0:
                raise InputError("an algebra with constants cannot be empty")
            arr.setflags(write=False)
            self.tables[op] = arr
        if sig.meet is not None:
            self._check_meet()

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"<FiniteAlgebra{label} size={self.size} ops={sorted(self.sig.ops)}>"

    @property
    def universe(self) -> range:
        return range(self.size)

    def op(self, name: str, *args: int) -> int:
        return int(self.tables[name][tuple(args)])

    @cached_property
    def meet_table(self) -> np.ndarray:
        if self.sig.meet is None:
            raise InputError("algebra has no designated meet")
        x, y = np.indices((self.size, self.size))
        return evaluate_array(self.sig.meet, self, {"x": x, "y": y})

    @cached_property
    def join_table(self) -> np.ndarray:
        if self.sig.join is None:
            raise InputError("algebra has no designated join")
        x, y = np.indices((self.size, self.size))
        return evaluate_array(self.sig.join, self, {"x": x, "y": y})

    @cached_property
    def leq(self) -> np.ndarray:
        """``leq[a, b]`` iff a ≤ b in the order induced by the designated meet."""
        m = self.meet_table
        return m == np.arange(self.size)[:, None]

    def _check_meet(self):
        m = self.meet_table
        n = self.size
        idx = np.arange(n)
        if not np.array_equal(m[idx, idx], idx):
            raise InputError("designated meet is not idempotent")
        if not np.array_equal(m, m.T):
            raise InputError("designated meet is not commutative")
        if n <= EXHAUSTIVE_ASSOCIATIVITY:
            a, b, c = idx[:, None, None], idx[None, :, None], idx[None, None, :]
        else:
            # large powerset-style algebras: a seeded sample of triples
            a, b, c = np.random.default_rng(0).integers(0, n, size=(3, ASSOCIATIVITY_SAMPLE))
        if n and not np.array_equal(m[m[a, b], c], m[a, m[b, c]]):
            raise InputError("designated meet is not associative")

    def to_json(self, sig_ref: object | None = None) -> dict:
        return {
            "size": self.size,
            "ops": {op: self.tables[op].tolist() for op in sorted(self.tables)},
            "sig": sig_ref if sig_ref is not None else self.sig.to_json(),
        }


def algebra_from_json(data: Mapping, base_dir: str | Path = ".") -> FiniteAlgebra:
    if not isinstance(data, Mapping) or "size" not in data or "ops" not in data:
        raise InputError("algebra JSON needs 'size' and 'ops'")
    sig_ref = data.get("sig")
    if isinstance(sig_ref, Mapping):
        sig = signature_from_json(sig_ref)
    elif isinstance(sig_ref, str) and (Path(base_dir) / sig_ref).is_file():
        sig = signature_from_json(json.loads((Path(base_dir) / sig_ref).read_text()))
    elif isinstance(sig_ref, str):
        sig = builtin_signature(sig_ref)
    else:
        raise InputError("algebra JSON needs a 'sig' (object, file path or built-in name)")
    return FiniteAlgebra(sig, data["size"], data["ops"])


def load_algebra(path: str | Path) -> FiniteAlgebra:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return algebra_from_json(data, path.parent)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


# -- evaluation ---------------------------------------------------------------

def evaluate_array(t: Term, A: FiniteAlgebra, env: Mapping[str, np.ndarray]) -> np.ndarray:
    """Evaluate ``t`` pointwise over broadcastable arrays of elements."""
    memo: dict[Term, np.ndarray] = {}
    shape = np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else ()

    def walk(s: Term) -> np.ndarray:
        if s.args is None:
            try:
                return np.asarray(env[s.head])
            except KeyError:
                raise InputError(f"unbound variable {s.head!r}") from None
        hit = memo.get(s)
        if hit is not None:
            return hit
        table = A.tables.get(s.head)
        if table is None:
            raise InputError(f"no table for operation {s.head!r}")
        if not s.args:
            out = np.broadcast_to(table, shape)
        else:
            out = table[tuple(walk(a) for a in s.args)]
        memo[s] = out
        return out

    return walk(t)


def evaluate(t: Term, A: FiniteAlgebra, asn: Mapping[str, int]) -> int:
    for v in t.variables():
        if v not in asn:
            raise InputError(f"unbound variable {v!r}")
    return int(evaluate_array(t, A, {k: np.asarray(v) for k, v in asn.items()}))


def term_function(t: Term, A: FiniteAlgebra, variables: Sequence[str]) -> np.ndarray:
    """Table of the term function of ``t`` with arguments in the given order."""
    k = len(variables)
    grids = np.indices((A.size,) * k) if k else np.zeros((0,), dtype=np.int64)
    env = {v: grids[i] for i, v in enumerate(variables)}
    out = evaluate_array(t, A, env)
    return np.broadcast_to(out, (A.size,) * k).copy()


def _grid(variables: Sequence[str], n: int, budget: int) -> dict[str, np.ndarray]:
    k = len(variables)
    total = n**k
    if total > budget:
        raise BudgetExceeded(f"{n}^{k} = {total} assignments exceeds the budget of {budget}")
    if k == 0:
        return {}
    grids = np.indices((n,) * k).reshape(k, -1)
    return {v: grids[i] for i, v in enumerate(variables)}


def _holds(e: Equation, A: FiniteAlgebra, env: Mapping[str, np.ndarray]) -> np.ndarray:
    e = desugar(e, A.sig)
    return np.asarray(evaluate_array(e.lhs, A, env) == evaluate_array(e.rhs, A, env))


def _witness(variables, env, mask) -> dict[str, int] | None:
    bad = np.flatnonzero(~mask)
    if bad.size == 0:
        return None
    i = int(bad[0])
    return {v: int(env[v][i]) for v in variables}


def satisfies(A: FiniteAlgebra, e: Equation, budget: int = DEFAULT_ASSIGNMENT_BUDGET):
    """Return ``(holds, witness)``; the witness is the lexicographically least
    failing assignment (variables in sorted order), or None."""
    variables = sorted(e.variables())
    env = _grid(variables, A.size, budget)
    mask = np.broadcast_to(_holds(e, A, env), (A.size ** len(variables),))
    w = _witness(variables, env, mask)
    return w is None, w


def check_quasi(A: FiniteAlgebra, premises: Iterable[Equation], conclusion: Equation,
                budget: int = DEFAULT_ASSIGNMENT_BUDGET):
    """Decide the quasi-identity ``premises ⇒ conclusion`` in ``A``.

    Returns ``(holds, witness)`` with the least assignment satisfying every
    premise but not the conclusion.
    """
    premises = list(premises)
    variables = sorted(set(conclusion.variables()).union(*(p.variables() for p in premises)))
    env = _grid(variables, A.size, budget)
    total = A.size ** len(variables)
    ok = np.ones(total, dtype=bool)
    for p in premises:
        ok &= np.broadcast_to(_holds(p, A, env), (total,))
    mask = ~ok | np.broadcast_to(_holds(conclusion, A, env), (total,))
    w = _witness(variables, env, mask)
    return w is None, w


# -- subalgebras --------------------------------------------------------------

@dataclass(frozen=True)
class Subalgebra:
    elements: tuple[int, ...]  # inclusion map: new index -> parent element
    algebra: FiniteAlgebra


def _apply_all(A: FiniteAlgebra, op: str, elems: np.ndarray) -> np.ndarray:
    T = A.tables[op]
    k = T.ndim
    if k == 0:
        return T.reshape(1)
    return T[np.ix_(*([elems] * k))].ravel()


def subalgebra_generated(A: FiniteAlgebra, gens: Iterable[int]) -> Subalgebra:
    inside = np.zeros(A.size, dtype=bool)
    inside[list(gens)] = True
    for op, arity in A.sig.ops.items():
        if arity == 0:
            inside[A.tables[op]] = True
    while True:
        elems = np.flatnonzero(inside)
        before = len(elems)
        for op in A.sig.ops:
            if elems.size or A.sig.ops[op] == 0:
                inside[_apply_all(A, op, elems)] = True
        if int(inside.sum()) == before:
            break
    elems = np.flatnonzero(inside)
    return Subalgebra(tuple(int(e) for e in elems), restrict_algebra(A, elems))


def restrict_algebra(A: FiniteAlgebra, elems: Sequence[int]) -> FiniteAlgebra:
    """The subalgebra on a closed subset, relabelled 0..m-1 in increasing order."""
    elems = np.asarray(elems, dtype=np.int64)
    relabel = np.full(A.size, -1, dtype=np.int64)
    relabel[elems] = np.arange(len(elems))
    tables = {}
    for op, T in A.tables.items():
        sub = T[np.ix_(*([elems] * T.ndim))] if T.ndim else T
        new = relabel[sub]
        if (new < 0).any():
            raise InputError("subset is not closed under the operations")
        tables[op] = new
    return FiniteAlgebra(A.sig, len(elems), tables)


# -- congruences --------------------------------------------------------------

class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra < rb:
            ra, rb = rb, ra
        self.parent[ra] = rb
        return True

    def blocks(self) -> tuple[int, ...]:
        """Block ids numbered by least member."""
        ids: dict[int, int] = {}
        return tuple(ids.setdefault(self.find(a), len(ids)) for a in range(len(self.parent)))


class CongruenceClosure:
    """Incremental Cg: add pairs, propagate through all unary translations."""

    def __init__(self, A: FiniteAlgebra):
        self.A = A
        self.uf = UnionFind(A.size)
        self._ops = [T for T in A.tables.values() if T.ndim > 0]

    def same(self, a: int, b: int) -> bool:
        return self.uf.find(a) == self.uf.find(b)

    def add(self, a: int, b: int) -> bool:
        """Merge ``a`` and ``b``; returns False if they were already related."""
        if self.same(a, b):
            return False
        stack = [(a, b)]
        while stack:
            a, b = stack.pop()
            if not self.uf.union(a, b):
                continue
            for T in self._ops:
                for i in range(T.ndim):
                    fa = T.take(a, axis=i).ravel()
                    fb = T.take(b, axis=i).ravel()
                    diff = fa != fb
                    stack.extend(zip(fa[diff].tolist(), fb[diff].tolist()))
        return True

    def blocks(self) -> tuple[int, ...]:
        return self.uf.blocks()


class Congruence:
    """A congruence of ``parent`` as canonical block ids plus generating pairs.

    Equality compares partitions only; generators are bookkeeping.
    """

    __slots__ = ("parent", "blocks", "generators")

    def __init__(self, parent: FiniteAlgebra, blocks: Sequence[int], generators: Iterable[Pair] = ()):
        self.parent = parent
        self.blocks = _canonical(blocks)
        self.generators = tuple((int(a), int(b)) for a, b in generators)

    def __eq__(self, other):
        return isinstance(other, Congruence) and self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)

    def __repr__(self):
        return f"Congruence({self.block_list()})"

    def __le__(self, other: Congruence) -> bool:
        return self.leq(other)

    def same(self, a: int, b: int) -> bool:
        return self.blocks[a] == self.blocks[b]

    def leq(self, other: Congruence) -> bool:
        image: dict[int, int] = {}
        for a, b in zip(self.blocks, other.blocks):
            if image.setdefault(a, b) != b:
                return False
        return True

    @property
    def num_blocks(self) -> int:
        return max(self.blocks) + 1 if self.blocks else 0

    def block_list(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.num_blocks)]
        for a, b in enumerate(self.blocks):
            out[b].append(a)
        return out

    def representatives(self) -> list[int]:
        return [blk[0] for blk in self.block_list()]

    def spanning_pairs(self) -> list[Pair]:
        """(least member, other member) for every non-least element."""
        reps = self.representatives()
        return [(reps[b], a) for a, b in enumerate(self.blocks) if reps[b] != a]

    def is_diagonal(self) -> bool:
        return self.num_blocks == self.parent.size

    def is_total(self) -> bool:
        return self.num_blocks <= 1

    def is_compatible(self) -> bool:
        return is_compatible_partition(self.parent, self.blocks)

    def to_json(self) -> dict:
        return {"blocks": self.block_list(), "generators": [list(p) for p in self.generators]}


def _canonical(blocks: Sequence[int]) -> tuple[int, ...]:
    ids: dict[int, int] = {}
    return tuple(ids.setdefault(int(b), len(ids)) for b in blocks)


def is_compatible_partition(A: FiniteAlgebra, blocks: Sequence[int]) -> bool:
    lab = np.asarray(blocks, dtype=np.int64)
    for T in A.tables.values():
        for i in range(T.ndim):
            # compatible iff the block of f(..a..) depends only on the block of a
            moved = np.moveaxis(lab[T], i, 0).reshape(A.size, -1)
            for blk in set(blocks):
                rows = moved[lab == blk]
                if len(rows) > 1 and not (rows == rows[0]).all():
                    return False
    return True


def diagonal(A: FiniteAlgebra) -> Congruence:
    return Congruence(A, range(A.size))


def total(A: FiniteAlgebra) -> Congruence:
    return cg_generate(A, [(0, a) for a in range(1, A.size)])


def cg_generate(A: FiniteAlgebra, pairs: Iterable[Pair]) -> Congruence:
    pairs = [(int(a), int(b)) for a, b in pairs]
    for a, b in pairs:
        if not (0 <= a < A.size and 0 <= b < A.size):
            raise InputError(f"pair {(a, b)} outside the universe")
    cc = CongruenceClosure(A)
    for a, b in pairs:
        cc.add(a, b)
    return Congruence(A, cc.blocks(), pairs)


def greedy_generators(A: FiniteAlgebra, blocks: Sequence[int]) -> list[Pair]:
    """A (not necessarily minimum) generating set: scan spanning pairs in
    order and keep those not already implied."""
    target = Congruence(A, blocks)
    cc = CongruenceClosure(A)
    gens = []
    for a, b in target.spanning_pairs():
        if cc.add(a, b):
            gens.append((a, b))
    if Congruence(A, cc.blocks()) != target:
        raise InvariantViolation("partition is not a congruence")
    return gens


def quotient(A: FiniteAlgebra, theta: Congruence):
    """Return ``(A/θ, surjection)`` with blocks as the new universe."""
    if theta.parent is not A and theta.parent.size != A.size:
        raise InputError("congruence belongs to a different algebra")
    lab = np.asarray(theta.blocks, dtype=np.int64)
    reps = np.asarray(theta.representatives(), dtype=np.int64)
    tables = {op: lab[T[np.ix_(*([reps] * T.ndim))]] if T.ndim else lab[T]
              for op, T in A.tables.items()}
    return FiniteAlgebra(A.sig, len(reps), tables), theta.blocks


# -- homomorphisms -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Homomorphism:
    source: FiniteAlgebra
    target: FiniteAlgebra
    mapping: tuple[int, ...]

    def __call__(self, a: int) -> int:
        return self.mapping[a]

    def is_homomorphism(self) -> bool:
        h = np.asarray(self.mapping, dtype=np.int64)
        for op, T in self.source.tables.items():
            U = self.target.tables[op]
            if T.ndim == 0:
                if h[T] != U:
                    return False
                continue
            grids = np.indices(T.shape)
            if not np.array_equal(h[T], U[tuple(h[g] for g in grids)]):
                return False
        return True

    def check(self) -> Homomorphism:
        if len(self.mapping) != self.source.size:
            raise InvariantViolation("homomorphism map has the wrong length")
        if not self.is_homomorphism():
            raise InvariantViolation("map does not preserve the operations")
        return self

    def is_injective(self) -> bool:
        return len(set(self.mapping)) == len(self.mapping)

    def is_surjective(self) -> bool:
        return set(self.mapping) == set(range(self.target.size))

    def kernel(self) -> Congruence:
        return Congruence(self.source, self.mapping, greedy_generators(self.source, self.mapping))


# -- brute force oracle -------------------------------------------------------

def set_partitions(n: int):
    """All partitions of range(n) as restricted-growth strings."""
    if n == 0:
        yield ()
        return

    def rec(prefix, m):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for b in range(m + 1):
            yield from rec(prefix + [b], max(m, b + 1))

    yield from rec([0], 1)


def brute_force_cg(A: FiniteAlgebra, pairs: Iterable[Pair]) -> Congruence:
    """Least compatible partition containing ``pairs`` by exhaustive enumeration."""
    pairs = list(pairs)
    candidates = [Congruence(A, p) for p in set_partitions(A.size)
                  if all(p[a] == p[b] for a, b in pairs) and is_compatible_partition(A, p)]
    least = [c for c in candidates if all(c.leq(d) for d in candidates)]
    if len(least) != 1:
        raise InvariantViolation("no least compatible partition")
    return Congruence(A, least[0].blocks, pairs)


def all_pairs(n: int) -> list[Pair]:
    return list(itertools.combinations(range(n), 2))
