"""n-potency failures, witness search over case-study families, and the
non-coherence counterexample package built from them."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .canext import FinitePoset, enumerate_posets
from .errors import BudgetExceeded, InputError, InvariantViolation
from .finalg import FiniteAlgebra, check_quasi, evaluate, evaluate_array, satisfies, term_function
from .structures import (
    MAX_WORLDS, NAMED_TERMS, chain_frame, complex_algebra, constants_as_variables, downset_algebra,
    downsets, enumerate_lattices, fence, lattice_const_expand, luk_chain, subset_of,
)
from .terms import (
    Equation, Signature, Term, iterate_term, le, parse_term, render, render_equation, substitute, var,
)

DEFAULT_BUDGET = 100_000

CITATIONS = {
    "potency": "n-potency of a decreasing expanding term",
    "coherence-criterion": "coherence iff compact congruences restrict to compact congruences",
    "potency-criterion": "coherent varieties with the fixpoint embedding condition make decreasing terms n-potent",
    "canonical-fixpoint": "decreasing isotone expanding terms fix meets of their orbits in canonical extensions",
    "interpolant-restriction": "uniform interpolants are restrictions of Cg(Sigma) to the smaller free algebra",
    "interpolation-square": "right uniform interpolation as commutation of the free-inclusion square",
    "presentation-transfer": "finite presentations transfer along surjections between free algebras",
    "completion": "canonical extensions are unique dense compact completions",
    "extension-shortcuts": "sigma and pi extensions via closed and open elements",
    "extension-composition": "composition inequalities and operator equalities for extended maps",
}


# -- n-potency ----------------------------------------------------------------------

def unary_table(t: Term, A: FiniteAlgebra) -> np.ndarray:
    vs = sorted(t.variables())
    if len(vs) > 1:
        raise InputError(f"term must be unary, found variables {vs}")
    return term_function(t, A, vs or ["x"]).astype(np.int64)


def iterate_table(f: np.ndarray, k: int) -> np.ndarray:
    out = np.arange(len(f))
    for _ in range(k):
        out = f[out]
    return out


def npotency_check(t: Term, A: FiniteAlgebra, n: int) -> tuple[bool, int | None]:
    """Whether t^{n+1}(x) ≈ t^n(x) holds in A; otherwise the least failing element."""
    if n < 0:
        raise InputError("n must be non-negative")
    f = unary_table(t, A)
    tn = iterate_table(f, n)
    bad = np.flatnonzero(f[tn] != tn)
    return (True, None) if not len(bad) else (False, int(bad[0]))


# -- families -----------------------------------------------------------------------

@dataclass
class Member:
    name: str
    algebra: FiniteAlgebra
    meta: dict = field(default_factory=dict)


def parse_family(spec: str) -> tuple[str, str | None]:
    kind, _, arg = spec.partition(":")
    if kind not in FAMILIES:
        raise InputError(f"unknown family {kind!r}; known: {sorted(FAMILIES)}")
    return kind, arg or None


def _int_arg(arg: str | None, default: int, kind: str) -> int:
    if arg is None:
        return default
    try:
        v = int(arg)
    except ValueError:
        raise InputError(f"family {kind!r} needs an integer bound, got {arg!r}") from None
    if v < 1:
        raise InputError(f"family bound must be positive, got {v}")
    return v


def _chain_frames(arg):
    for w in range(1, _int_arg(arg, MAX_WORLDS, "chain-frame") + 1):
        F = chain_frame(w)
        yield Member(f"chain-frame({w})", complex_algebra(F), {"frame": F.to_json()})


def _luk(arg):
    for k in range(2, _int_arg(arg, 64, "luk") + 1):
        yield Member(f"luk({k})", luk_chain(k), {"k": k})


def _fences(arg):
    for n in range(1, _int_arg(arg, 10, "fence") + 1):
        Q = fence(n)
        yield Member(f"fence({n})", downset_algebra(Q), {"poset": Q.to_json()})


def _posets(arg):
    for n in range(1, _int_arg(arg, 6, "posets") + 1):
        for i, Q in enumerate(enumerate_posets(n)):
            yield Member(f"downsets(poset {n}#{i})", downset_algebra(Q), {"poset": Q.to_json()})


def _downset_file(arg):
    if arg is None:
        raise InputError("family 'downset' needs a poset file: downset:<path>")
    Q = load_poset(arg)
    yield Member(f"downsets({arg})", downset_algebra(Q), {"poset": Q.to_json()})


def _lattice_search(arg):
    for L in enumerate_lattices(_int_arg(arg, 8, "lattice-search")):
        yield Member(L.name, L, {"lattice": L.name})


FAMILIES = {
    "chain-frame": _chain_frames,
    "luk": _luk,
    "fence": _fences,
    "posets": _posets,
    "downset": _downset_file,
    "lattice-search": _lattice_search,
}


def family_members(spec: str) -> Iterator[Member]:
    kind, arg = parse_family(spec)
    return FAMILIES[kind](arg)


def family_signature(spec: str) -> Signature:
    from .signatures import CONST_LATTICE, DOUBLE_HEYTING, FL, MODAL
    kind, _ = parse_family(spec)
    return {"chain-frame": MODAL, "luk": FL, "fence": DOUBLE_HEYTING, "posets": DOUBLE_HEYTING,
            "downset": DOUBLE_HEYTING, "lattice-search": CONST_LATTICE}[kind]


def load_poset(path: str | Path) -> FinitePoset:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: cannot read poset: {exc}") from None
    if not isinstance(data, dict) or "leq" not in data:
        raise InputError(f"{path}: poset JSON needs 'size' and 'leq'")
    P = FinitePoset(data["leq"])
    if "size" in data and int(data["size"]) != P.size:
        raise InputError(f"{path}: size {data['size']} does not match the relation")
    return P


def resolve_term(text: str, sig: Signature) -> Term:
    """A named case-study term, or term text parsed over ``sig``."""
    if text in NAMED_TERMS:
        return NAMED_TERMS[text][1]()
    return parse_term(text, sig)


# -- witnesses ------------------------------------------------------------------------

@dataclass
class Witness:
    family: str
    member: str
    position: int
    algebra: FiniteAlgebra
    element: int
    n: int
    before: int
    after: int
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "member": self.member,
            "position": self.position,
            "size": self.algebra.size,
            "element": self.element,
            "element_view": describe_element(self),
            "n": self.n,
            "t^n": self.before,
            "t^(n+1)": self.after,
            "meta": self.meta,
        }


@dataclass
class Exhausted:
    family: str
    n: int
    examined: int
    reason: str

    def to_json(self) -> dict:
        return {"family": self.family, "n": self.n, "exhausted": True,
                "examined": self.examined, "reason": self.reason}


def describe_element(w: Witness):
    if w.family.startswith("chain-frame"):
        return {"worlds": subset_of(w.element)}
    if w.family.startswith("luk"):
        k = w.algebra.size
        return {"value": f"{w.element}/{k - 1}"}
    if "poset" in w.meta:
        Q = FinitePoset(w.meta["poset"]["leq"])
        return {"downset": subset_of(downsets(Q)[w.element])}
    return {"index": w.element}


def witness_search(t: Term, family: str, n: int, budget: int = DEFAULT_BUDGET) -> Witness | Exhausted:
    """The first family member (enumeration order) and least element b with
    t^{n+1}(b) ≠ t^n(b); constants of lattice families range over all assignments."""
    if budget <= 0:
        raise InputError("budget must be positive")
    kind, _ = parse_family(family)
    examined = 0
    try:
        for pos, m in enumerate(family_members(family)):
            if kind == "lattice-search":
                found, examined = _lattice_member(t, m, pos, family, n, budget, examined)
                if isinstance(found, Witness):
                    return found
                continue
            examined += 1
            if examined > budget:
                return Exhausted(family, n, examined - 1, "budget")
            ok, b = npotency_check(t, m.algebra, n)
            if not ok:
                f = unary_table(t, m.algebra)
                tn = int(iterate_table(f, n)[b])
                return Witness(family, m.name, pos, m.algebra, b, n, tn, int(f[tn]), m.meta)
    except BudgetExceeded as exc:
        return Exhausted(family, n, examined, f"budget: {exc}")
    except _OutOfBudget as exc:
        return Exhausted(family, n, exc.examined, "budget")
    return Exhausted(family, n, examined, "family exhausted")


class _OutOfBudget(Exception):
    def __init__(self, examined: int):
        self.examined = examined


def _lattice_member(t, m: Member, pos, family, n, budget, examined):
    L = m.algebra
    s = constants_as_variables(t)
    names = ["c1", "c2", "c3"]
    k = L.size
    for cs in itertools.product(range(k), repeat=3):
        examined += 1
        if examined > budget:
            raise _OutOfBudget(examined - 1)
        env = dict(zip(names, cs))
        f = _const_table(s, L, cs)
        tn = iterate_table(f, n)
        bad = np.flatnonzero(f[tn] != tn)
        if len(bad):
            b = int(bad[0])
            A = lattice_const_expand(L, env).algebra
            meta = {**m.meta, "constants": env}
            return Witness(family, f"{m.name}{list(cs)}", pos, A, b, n, int(tn[b]), int(f[tn[b]]), meta), examined
    return None, examined


def _const_table(s: Term, L: FiniteAlgebra, cs) -> np.ndarray:
    x = np.arange(L.size)
    env = {"c1": np.full_like(x, cs[0]), "c2": np.full_like(x, cs[1]), "c3": np.full_like(x, cs[2]), "x": x}
    return np.asarray(evaluate_array(s, L, env), dtype=np.int64)


def potency_report(t: Term, family: str, n: int, budget: int = DEFAULT_BUDGET) -> dict:
    entries = []
    for k in range(n + 1):
        w = witness_search(t, family, k, budget)
        entries.append(w.to_json())
    return {"term": render(t), "family": family, "entries": entries}


# -- identities and consequences ---------------------------------------------------------

@dataclass
class Refutation:
    family: str
    member: str
    position: int
    assignment: dict
    algebra: FiniteAlgebra

    def to_json(self) -> dict:
        return {"family": self.family, "member": self.member, "position": self.position,
                "assignment": self.assignment, "size": self.algebra.size}


def refute_identity(e: Equation, family: str, budget: int = DEFAULT_BUDGET) -> Refutation | Exhausted:
    return refute_consequence([], e, family, budget)


def refute_consequence(sigma: list[Equation], eps: Equation, family: str,
                       budget: int = DEFAULT_BUDGET) -> Refutation | Exhausted:
    """First member and assignment satisfying Σ but not ε; never a validity claim."""
    examined = 0
    try:
        for pos, m in enumerate(family_members(family)):
            examined += 1
            if examined > budget:
                return Exhausted(family, -1, examined - 1, "budget")
            ok, wit = check_quasi(m.algebra, sigma, eps) if sigma else satisfies(m.algebra, eps)[:2]
            if not ok:
                return Refutation(family, m.name, pos, dict(wit), m.algebra)
    except BudgetExceeded as exc:
        return Exhausted(family, -1, examined, f"budget: {exc}")
    return Exhausted(family, -1, examined, "family exhausted")


# -- the counterexample package ------------------------------------------------------------

def _var_of(t: Term) -> str:
    vs = sorted(t.variables())
    if len(vs) > 1:
        raise InputError(f"term must be unary, found variables {vs}")
    return vs[0] if vs else "x"


def power_at(t: Term, arg: str, k: int) -> Term:
    """t^k applied to the variable ``arg``."""
    v = _var_of(t)
    return substitute(iterate_term(t, v, k), {v: var(arg)})


def coherence_premises(t: Term) -> tuple[list[Equation], Term, Term, Term]:
    x, y, z = var("x"), var("y"), var("z")
    return [le(y, x), le(x, z), Equation(x, power_at(t, "x", 1))], x, y, z


@dataclass
class Separator:
    n: int
    witness: Witness
    assignment: dict
    premise_holds: bool
    conclusion_fails: bool
    sigma_side: str

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "witness": self.witness.to_json(),
            "assignment": self.assignment,
            "premise": f"y <= t^{self.n}(z)",
            "conclusion": f"y <= t^{self.n + 1}(z)",
            "premise_holds": self.premise_holds,
            "conclusion_fails": self.conclusion_fails,
            "sigma_side": self.sigma_side,
        }


@dataclass
class CounterexamplePackage:
    term: Term
    family: str
    N: int
    sigma: list[Equation]
    pi: list[Equation]
    separators: list[Separator]
    exhausted: list[Exhausted]

    @property
    def complete(self) -> bool:
        return not self.exhausted and all(s.premise_holds and s.conclusion_fails for s in self.separators)

    def to_json(self) -> dict:
        return {
            "term": render(self.term),
            "family": self.family,
            "N": self.N,
            "sigma": [render_equation(e) for e in self.sigma],
            "pi_truncated": [f"y <= t^{k}(z)" for k in range(len(self.pi))],
            "separators": [s.to_json() for s in self.separators],
            "exhausted": [e.to_json() for e in self.exhausted],
            "complete": self.complete,
            "presentations": {
                "finitely_presented": "F(x,y,z)/Cg(Sigma)",
                "finitely_generated": "F(y,z)/Psi with Psi = Cg(Pi), Pi = {y <= t^k(z) | k >= 0}",
            },
            "conclusion": self.conclusion(),
            "citations": sorted(["coherence-criterion", "potency", "potency-criterion"]),
        }

    def conclusion(self) -> str:
        if not self.complete:
            return "incomplete: some separators are missing, no conclusion drawn"
        return (f"Cg(Pi_0) < Cg(Pi_1) < ... < Cg(Pi_{self.N + 1}) is strictly increasing in F(y,z) "
                f"(each step separated by a finite model), consistent with Psi not being compact; "
                f"by [coherence-criterion] a compact Psi is required for coherence")

    def markdown(self) -> str:
        data = self.to_json()
        lines = [
            f"# Non-coherence evidence for t(x) = {data['term']}",
            "",
            f"Family: `{self.family}`, N = {self.N}.",
            "",
            "## Sigma",
            "",
            *[f"- `{e}`" for e in data["sigma"]],
            "",
            "## Pi (truncated)",
            "",
            *[f"- `{e}`" for e in data["pi_truncated"]],
            "",
            "## Separators",
            "",
            "| n | member | z | y | y <= t^n(z) | y <= t^(n+1)(z) fails | Sigma side |",
            "|---|---|---|---|---|---|---|",
        ]
        for s in self.separators:
            lines.append(f"| {s.n} | {s.witness.member} | {s.assignment['z']} | {s.assignment['y']} "
                         f"| {s.premise_holds} | {s.conclusion_fails} | {s.sigma_side} |")
        for e in self.exhausted:
            lines.append(f"| {e.n} | exhausted after {e.examined} ({e.reason}) | | | | | |")
        lines += ["", "## Presentations", "",
                  f"- finitely presented: {data['presentations']['finitely_presented']}",
                  f"- finitely generated: {data['presentations']['finitely_generated']}",
                  "", "## Conclusion", "", data["conclusion"], "",
                  "Citations: " + ", ".join(f"[{c}] {CITATIONS[c]}" for c in data["citations"]), ""]
        return "\n".join(lines)


def _sigma_side_check(t: Term, A: FiniteAlgebra, N: int, budget: int) -> str:
    """Enumerate Σ-satisfying assignments and check y ≤ t^k(z) for k ≤ N+1."""
    f = unary_table(t, A)
    fix = np.flatnonzero(f == np.arange(A.size))
    leq = A.leq
    if len(fix) * A.size * A.size > budget * 100:
        return "skipped (budget)"
    for k in range(N + 2):
        tk = iterate_table(f, k)
        ok = leq[:, tk]  # y ≤ t^k(z)
        for x in fix:
            valid = leq[:, x][:, None] & leq[x, :][None, :]
            if (valid & ~ok).any():
                return f"violated at k={k}"
    return "verified"


def emit_counterexample(t: Term, family: str, N: int, budget: int = DEFAULT_BUDGET) -> CounterexamplePackage:
    if N < 0:
        raise InputError("N must be non-negative")
    sigma, x, y, z = coherence_premises(t)
    pi = [le(y, power_at(t, "z", k)) for k in range(N + 1)]
    seps, missing = [], []
    for n in range(N + 1):
        w = witness_search(t, family, n, budget)
        if isinstance(w, Exhausted):
            missing.append(w)
            continue
        A = w.algebra
        asn = {"y": w.before, "z": w.element}
        premise = le(y, power_at(t, "z", n))
        conclusion = le(y, power_at(t, "z", n + 1))
        p_ok = _holds_at(A, premise, asn)
        c_fails = not _holds_at(A, conclusion, asn)
        ok, _ = check_quasi(A, [premise], conclusion)
        if ok or not p_ok or not c_fails:
            raise InvariantViolation(f"separator for n={n} does not re-validate")
        seps.append(Separator(n, w, asn, p_ok, c_fails, _sigma_side_check(t, A, N, budget)))
    return CounterexamplePackage(t, family, N, sigma, pi, seps, missing)


def _holds_at(A: FiniteAlgebra, e: Equation, asn: dict) -> bool:
    lhs, rhs = evaluate(e.lhs, A, asn), evaluate(e.rhs, A, asn)
    return bool(A.leq[lhs, rhs]) if e.kind == "le" else lhs == rhs
