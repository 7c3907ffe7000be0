"""Finite free algebras of varieties generated by finite algebras.

``F(x̄)`` is realised as the subalgebra of a direct power generated by the
projections: an element is the vector of values a term takes under every
assignment of x̄ into every generator algebra.  On top of that live the
congruence transports along free inclusions (lifting ``h*`` and restriction
``h⁻¹``), deductive interpolants, the interpolation square and the
presentation translation used for coherence.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BudgetExceeded, InputError, InvariantViolation
from .finalg import (
    Congruence,
    FiniteAlgebra,
    Homomorphism,
    Pair,
    cg_generate,
    evaluate,
    evaluate_array,
    greedy_generators,
)
from .terms import Equation, Signature, Term, app, desugar, eq, render, substitute, var

DEFAULT_FREE_BUDGET = 20_000


@dataclass(eq=False)
class VarietyHandle:
    """A variety given by generating algebras (HSP of them) or a named family.

    Only the generator form supports free-algebra workflows; a family handle
    is for refutation searches.
    """

    generators: tuple[FiniteAlgebra, ...] = ()
    family: str | None = None
    budget: int = DEFAULT_FREE_BUDGET
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.generators = tuple(self.generators)
        if not self.generators and self.family is None:
            raise InputError("a variety needs generators or a family name")
        if self.generators:
            sig = self.generators[0].sig
            if any(g.sig != sig for g in self.generators):
                raise InputError("generator algebras must share one signature")

    @property
    def sig(self) -> Signature:
        if not self.generators:
            raise InputError(f"family handle {self.family!r} has no generator signature")
        return self.generators[0].sig

    def free(self, variables: Sequence[str]) -> FreeAlgebra:
        key = tuple(variables)
        if key not in self._cache:
            self._cache[key] = build_free(self, key)
        return self._cache[key]


class FreeAlgebra:
    """Elements are term-function vectors; ``rep_terms[i]`` names element i."""

    def __init__(self, base: VarietyHandle, variables: tuple[str, ...], coords, vectors: np.ndarray,
                 rep_terms: list[Term], algebra: FiniteAlgebra):
        self.base = base
        self.variables = variables
        self.coords = coords  # (generator index, assignment tuple) per vector coordinate
        self.vectors = vectors
        self.rep_terms = rep_terms
        self.algebra = algebra
        self._index = {row.tobytes(): i for i, row in enumerate(vectors)}

    def __len__(self):
        return self.algebra.size

    def __repr__(self):
        return f"<FreeAlgebra vars={list(self.variables)} size={len(self)}>"

    @property
    def size(self) -> int:
        return self.algebra.size

    def vector_of(self, t: Term) -> np.ndarray:
        extra = t.variables() - set(self.variables)
        if extra:
            raise InputError(f"term uses variables {sorted(extra)} outside {list(self.variables)}")
        parts = []
        for g, A in enumerate(self.base.generators):
            env = _coordinate_env(self.variables, A.size)
            parts.append(np.broadcast_to(evaluate_array(t, A, env), (A.size ** len(self.variables),)))
        return np.concatenate(parts).astype(self.vectors.dtype)

    def element_of(self, t: Term) -> int:
        try:
            return self._index[self.vector_of(t).tobytes()]
        except KeyError:
            raise InvariantViolation(f"term {render(t)} evaluates outside the free algebra") from None

    def pair_of(self, e: Equation) -> Pair:
        e = desugar(e, self.algebra.sig)
        return self.element_of(e.lhs), self.element_of(e.rhs)

    def pairs_of(self, eqs: Iterable[Equation]) -> list[Pair]:
        return [self.pair_of(e) for e in eqs]

    def equation_of(self, pair: Pair) -> Equation:
        return eq(self.rep_terms[pair[0]], self.rep_terms[pair[1]])

    def projection(self, g: int, assignment: Mapping[str, int]) -> Homomorphism:
        """The evaluation F(x̄) → generator g induced by an assignment."""
        key = (g, tuple(assignment[v] for v in self.variables))
        col = self.coords.index(key)
        return Homomorphism(self.algebra, self.base.generators[g], tuple(int(v) for v in self.vectors[:, col]))


def _coordinate_env(variables: Sequence[str], n: int) -> dict[str, np.ndarray]:
    k = len(variables)
    if k == 0:
        return {}
    grids = np.indices((n,) * k).reshape(k, -1)
    return {v: grids[i] for i, v in enumerate(variables)}


def build_free(V: VarietyHandle, variables: Sequence[str], budget: int | None = None) -> FreeAlgebra:
    """Generate F(x̄) breadth-first by term size.

    Representative terms are the first term reaching each vector in the
    order: size, then operation name, then arguments by their own rank.
    """
    if not V.generators:
        raise InputError("free algebras need a variety in generator form")
    budget = V.budget if budget is None else budget
    variables = tuple(variables)
    if len(set(variables)) != len(variables):
        raise InputError("duplicate variables")
    sig = V.sig
    for v in variables:
        if v in sig.ops:
            raise InputError(f"variable {v!r} collides with an operation name")

    coords = [(g, asn) for g, A in enumerate(V.generators)
              for asn in itertools.product(range(A.size), repeat=len(variables))]
    m = len(coords)
    offsets = np.cumsum([0] + [A.size ** len(variables) for A in V.generators])
    dtype = np.int16 if max(A.size for A in V.generators) < 2**15 else np.int64

    def apply(op: str, arg_rows: list[np.ndarray]) -> np.ndarray:
        """Apply op to every combination of argument rows -> (count, m) array."""
        out = np.empty((int(np.prod([len(r) for r in arg_rows])), m), dtype=dtype)
        for g, A in enumerate(V.generators):
            lo, hi = offsets[g], offsets[g + 1]
            T = A.tables[op]
            k = len(arg_rows)
            if k == 0:
                out[:, lo:hi] = T
                continue
            idx = tuple(r[:, lo:hi].reshape((1,) * i + (len(r),) + (1,) * (k - i - 1) + (hi - lo,))
                        for i, r in enumerate(arg_rows))
            out[:, lo:hi] = T[idx].reshape(-1, hi - lo)
        return out

    seen: dict[bytes, int] = {}
    vectors: list[np.ndarray] = []
    reps: list[Term] = []
    sizes: list[int] = []

    def admit(row: np.ndarray, term: Term, size: int) -> bool:
        key = row.tobytes()
        if key in seen:
            return False
        if len(vectors) >= budget:
            raise BudgetExceeded(f"free algebra over {list(variables)} exceeds {budget} elements")
        seen[key] = len(vectors)
        vectors.append(row.copy())
        reps.append(term)
        sizes.append(size)
        return True

    for i, v in enumerate(variables):
        row = np.concatenate([_coordinate_env(variables, A.size)[v] for A in V.generators]).astype(dtype)
        admit(row, var(v), 1)
    for c in sorted(sig.constants):
        admit(apply(c, [])[0], app(c), 1)

    proper_ops = sorted(op for op, a in sig.ops.items() if a > 0)
    level = 1
    while True:
        level += 1
        grew = False
        by_size: dict[int, np.ndarray] = {}
        for s in set(sizes):
            by_size[s] = np.flatnonzero(np.asarray(sizes) == s)
        for op in proper_ops:
            k = sig.ops[op]
            for parts in _compositions(level - 1, k):
                if any(p not in by_size for p in parts):
                    continue
                idx_lists = [by_size[p] for p in parts]
                rows = apply(op, [np.asarray(vectors)[ix] for ix in idx_lists])
                # first occurrence of each distinct row, in candidate order
                view = np.ascontiguousarray(rows).view(np.dtype((np.void, rows.dtype.itemsize * m))).ravel()
                _, first = np.unique(view, return_index=True)
                for j in np.sort(first):
                    key = rows[j].tobytes()
                    if key in seen:
                        continue
                    combo = np.unravel_index(j, [len(ix) for ix in idx_lists])
                    args = [reps[idx_lists[a][combo[a]]] for a in range(k)]
                    grew |= admit(rows[j], app(op, *args), level)
        if not grew and _closed(vectors, proper_ops, sig, apply, seen):
            break
        if not vectors:
            break

    vec = np.asarray(vectors, dtype=dtype).reshape(len(vectors), m)
    tables = {}
    index = {row.tobytes(): i for i, row in enumerate(vec)}
    for op, k in sig.ops.items():
        if k == 0:
            tables[op] = index[apply(op, [])[0].tobytes()]
            continue
        rows = apply(op, [vec] * k)
        tables[op] = np.asarray([index[r.tobytes()] for r in rows], dtype=np.int64).reshape((len(vec),) * k)
    algebra = FiniteAlgebra(sig, len(vec), tables, name=f"F({','.join(variables)})")
    return FreeAlgebra(V, variables, coords, vec, reps, algebra)


def _compositions(total: int, k: int):
    """Ordered k-tuples of positive integers summing to ``total``, lexicographic."""
    if k == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - k + 2):
        for rest in _compositions(total - first, k - 1):
            yield (first,) + rest


def _closed(vectors, ops, sig, apply, seen) -> bool:
    if not vectors:
        return True
    arr = np.asarray(vectors)
    for op in ops:
        rows = apply(op, [arr] * sig.ops[op])
        if any(r.tobytes() not in seen for r in rows):
            return False
    return True


# -- maps between free algebras ------------------------------------------------

def free_inclusion(small: FreeAlgebra, big: FreeAlgebra) -> Homomorphism:
    if small.base is not big.base and small.base.generators != big.base.generators:
        raise InputError("free algebras belong to different varieties")
    if not set(small.variables) <= set(big.variables):
        raise InputError("inclusion needs the small variable set inside the big one")
    h = Homomorphism(small.algebra, big.algebra, tuple(big.element_of(t) for t in small.rep_terms))
    h.check()
    if not h.is_injective():
        raise InvariantViolation("free inclusion is not injective")
    return h


def lift_congruence(h: Homomorphism, psi: Congruence) -> Congruence:
    """h*(ψ): the congruence of the target generated by the image of ψ."""
    image = [(h(a), h(b)) for a, b in psi.spanning_pairs()]
    lifted = cg_generate(h.target, image)
    return Congruence(h.target, lifted.blocks, [(h(a), h(b)) for a, b in psi.generators])


def restrict_congruence(h: Homomorphism, theta: Congruence) -> Congruence:
    """h⁻¹(Θ) with a greedily chosen finite generating set."""
    blocks = [theta.blocks[h(a)] for a in range(h.source.size)]
    return Congruence(h.source, blocks, greedy_generators(h.source, blocks))


# -- interpolation --------------------------------------------------------------

@dataclass
class Interpolant:
    equations: list[Equation]
    theta: Congruence  # Cg(Σ) on F(x̄, ȳ)
    psi: Congruence  # its restriction to F(ȳ)
    big: FreeAlgebra
    small: FreeAlgebra
    inclusion: Homomorphism

    def certificate(self) -> dict:
        return {
            "vars_big": list(self.big.variables),
            "vars_small": list(self.small.variables),
            "theta": self.theta.to_json(),
            "psi": self.psi.to_json(),
            "pi": [str(e) for e in self.equations],
            "rep_terms_small": [render(t) for t in self.small.rep_terms],
        }


def interpolant(V: VarietyHandle, xs: Sequence[str], ys: Sequence[str], sigma: Iterable[Equation]) -> Interpolant:
    """A finite Π(ȳ) with Σ ⊨ ε ⟺ Π ⊨ ε for every equation ε(ȳ)."""
    sigma = list(sigma)
    big = V.free(tuple(xs) + tuple(ys))
    small = V.free(tuple(ys))
    i = free_inclusion(small, big)
    theta = cg_generate(big.algebra, big.pairs_of(sigma))
    psi = restrict_congruence(i, theta)
    pi = [small.equation_of(p) for p in psi.generators]
    return Interpolant(pi, theta, psi, big, small, i)


def entails(F: FreeAlgebra, premises: Iterable[Equation], conclusions: Iterable[Equation]) -> bool:
    """Σ ⊨_V Δ decided as Cg(Δ) ⊆ Cg(Σ) in the free algebra."""
    theta = cg_generate(F.algebra, F.pairs_of(premises))
    return all(theta.same(*F.pair_of(e)) for e in conclusions)


@dataclass
class SquareReport:
    results: list[bool]
    details: list[dict]

    @property
    def commutes(self) -> bool:
        return all(self.results)


def square_check(V: VarietyHandle, xs, ys, zs, sample: Iterable[Congruence]) -> SquareReport:
    """Check l*(i⁻¹(Θ)) = k⁻¹(j*(Θ)) for each sampled Θ on F(x̄, ȳ)."""
    xs, ys, zs = tuple(xs), tuple(ys), tuple(zs)
    f_xy, f_y = V.free(xs + ys), V.free(ys)
    f_xyz, f_yz = V.free(xs + ys + zs), V.free(ys + zs)
    i = free_inclusion(f_y, f_xy)
    j = free_inclusion(f_xy, f_xyz)
    k = free_inclusion(f_yz, f_xyz)
    l_ = free_inclusion(f_y, f_yz)
    results, details = [], []
    for theta in sample:
        if theta.parent.size != f_xy.size:
            raise InputError("sampled congruence does not live on F(x̄, ȳ)")
        left = lift_congruence(l_, restrict_congruence(i, theta))
        right = restrict_congruence(k, lift_congruence(j, theta))
        results.append(left == right)
        details.append({"theta": theta.block_list(), "via_y": left.block_list(), "via_xyz": right.block_list()})
    return SquareReport(results, details)


# -- presentations ----------------------------------------------------------------

def lemma22_translate(pi: Iterable[tuple[Term, Term] | Equation], r: Mapping[str, Term],
                      s: Mapping[str, Term]) -> list[Equation]:
    """Transport a presentation over x̄ to one over ȳ.

    Given Π generating ker(g) on F(x̄) and substitutions r: ȳ → Tm(x̄),
    s: x̄ → Tm(ȳ), returns {s(a) ≈ s(b) | (a, b) ∈ Π} ∪ {y ≈ s(r(y)) | y ∈ ȳ}.
    """
    out = []
    for item in pi:
        a, b = (item.lhs, item.rhs) if isinstance(item, Equation) else item
        out.append(eq(substitute(a, s), substitute(b, s)))
    for y in r:
        out.append(eq(var(y), substitute(r[y], s)))
    return out


def induced_map(F: FreeAlgebra, A: FiniteAlgebra, assignment: Mapping[str, int]) -> Homomorphism:
    """The homomorphism F(x̄) → A extending x ↦ assignment[x]."""
    return Homomorphism(F.algebra, A, tuple(evaluate(t, A, assignment) for t in F.rep_terms))


def all_congruences_generated_by(A: FiniteAlgebra, max_pairs: int) -> list[Congruence]:
    """Distinct congruences generated by at most ``max_pairs`` pairs (diagonal included)."""
    pairs = list(itertools.combinations(range(A.size), 2))
    found: dict[tuple, Congruence] = {}
    for r in range(max_pairs + 1):
        for combo in itertools.combinations(pairs, r):
            c = cg_generate(A, combo)
            found.setdefault(c.blocks, c)
    return list(found.values())
