"""Property suites behind the acceptance criteria, shared by the CLI and tests.

Each suite returns a ``SuiteResult``; ``passed`` includes the time limit.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import canext as cx
from .errors import InputError
from .finalg import (
    FiniteAlgebra, all_pairs, brute_force_cg, cg_generate, diagonal, evaluate,
)
from .freealg import (
    VarietyHandle, all_congruences_generated_by, interpolant, lemma22_translate, square_check,
)
from .signatures import FL, LATTICE
from .structures import (
    NAMED_TERMS, boxhat, chain_frame, complex_algebra, d_term, heyting_residuation_check,
    lattice_const_expand, lattice_t, luk_chain, subset_of, whitman_leq,
)
from .terms import make_signature, parse_term, power_term, substitute, var
from .witness import (
    Witness, family_members, iterate_table, npotency_check, power_at,
    unary_table, witness_search,
)


@dataclass
class SuiteResult:
    key: int
    title: str
    ok: bool
    elapsed: float
    limit: float | None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.ok and (self.limit is None or self.elapsed < self.limit)

    def line(self, timing: bool = True) -> str:
        status = "PASS" if self.passed else "FAIL"
        took = f" in {self.elapsed:.2f} s" if timing else ""
        limit = f" (limit {self.limit:g} s)" if self.limit is not None else ""
        return f"[{status}] criterion {self.key}: {self.title}{took}{limit}"

    def to_json(self) -> dict:
        """Timing-free, so reports stay reproducible; only the limit verdict is kept."""
        return {"criterion": self.key, "title": self.title, "passed": self.passed, "ok": self.ok,
                "limit_s": self.limit, "within_limit": self.limit is None or self.elapsed < self.limit,
                "details": self.details}


def _timed(key: int, title: str, limit: float | None, body: Callable[[], tuple[bool, dict]]) -> SuiteResult:
    start = time.perf_counter()
    ok, details = body()
    return SuiteResult(key, title, ok, time.perf_counter() - start, limit, details)


# -- 1. modal ---------------------------------------------------------------------------

def suite_modal(max_n: int = 5) -> SuiteResult:
    def body():
        t = boxhat()
        rows = []
        for n in range(max_n + 1):
            w = witness_search(t, "chain-frame", n)
            ok = isinstance(w, Witness) and w.member == f"chain-frame({n + 2})" \
                and subset_of(w.element) == list(range(n + 1))
            if ok:
                f = unary_table(t, w.algebra)
                tn, tn1 = iterate_table(f, n)[w.element], iterate_table(f, n + 1)[w.element]
                ok = subset_of(tn) == [0] and int(tn1) == 0
            rows.append({"n": n, "ok": ok, "member": getattr(w, "member", None)})
        return all(r["ok"] for r in rows), {"rows": rows}
    return _timed(1, "boxhat fails n-potency on the (n+2)-world chain", 5.0, body)


# -- 2. residuated --------------------------------------------------------------------------

def luk_power_oracle(x: Fraction, n: int) -> Fraction:
    return max(Fraction(0), n * x - (n - 1))


def suite_residuated(max_n: int = 5) -> SuiteResult:
    def body():
        rows = []
        for n in range(1, max_n + 1):
            k = n + 2
            A = luk_chain(k)
            b = n  # the element n/(n+1)
            x = Fraction(b, k - 1)
            base = parse_term("e & x", FL)
            pn = evaluate(power_term(base, n), A, {"x": b})
            pn1 = evaluate(power_term(base, n + 1), A, {"x": b})
            ok = (Fraction(pn, k - 1) == luk_power_oracle(x, n)
                  and Fraction(pn1, k - 1) == luk_power_oracle(x, n + 1) and pn != pn1)
            rows.append({"n": n, "chain": k, "x": str(x), "x^n": f"{pn}/{k - 1}",
                         "x^(n+1)": f"{pn1}/{k - 1}", "ok": ok})
        return all(r["ok"] for r in rows), {"rows": rows}
    return _timed(2, "Łukasiewicz chains refute (e∧x)^n ≈ (e∧x)^(n+1)", 1.0, body)


# -- 3. lattices with constants ----------------------------------------------------------------

def suite_lattice(max_n: int = 3, search_n: int = 1, max_size: int = 10) -> SuiteResult:
    def body():
        t = lattice_t()
        rows = []
        for n in range(max_n + 1):
            tn, tn1 = power_at(t, "x", n), power_at(t, "x", n + 1)
            free_strict = not whitman_leq(tn, tn1) and whitman_leq(tn1, tn)
            row = {"n": n, "whitman_strict": free_strict}
            if n <= search_n:
                w = witness_search(t, f"lattice-search:{max_size}", n)
                row["finite_witness"] = w.member if isinstance(w, Witness) else None
                agree = isinstance(w, Witness) and free_strict
                if isinstance(w, Witness):
                    env = {**w.meta["constants"], "x": w.element}
                    from .structures import constants_as_variables
                    L = w.algebra
                    a = evaluate(constants_as_variables(tn), L, env)
                    b = evaluate(constants_as_variables(tn1), L, env)
                    agree = agree and bool(L.leq[b, a]) and a != b
                row["ok"] = agree
            else:
                row["ok"] = free_strict
            rows.append(row)
        return all(r["ok"] for r in rows), {"rows": rows}
    return _timed(3, "lattice term t^n(x) ≰ t^(n+1)(x): Whitman and finite search agree", 60.0, body)


# -- 4. double-Heyting ------------------------------------------------------------------------

def suite_double_heyting(n: int = 1, max_poset: int = 6) -> SuiteResult:
    def body():
        w = witness_search(d_term(), f"posets:{max_poset}", n)
        if not isinstance(w, Witness):
            return False, {"witness": w.to_json()}
        A = w.algebra
        imp, sub = A.tables["imp"], A.tables["sub"]
        top, bot = int(A.tables["top"]), int(A.tables["bot"])

        def d(u):
            return int(imp[sub[top, u], bot])
        chain = [w.element]
        for _ in range(n + 1):
            chain.append(d(chain[-1]))
        revalidated = chain[n + 1] != chain[n] and bool(A.leq[chain[n + 1], chain[n]])
        res_ok, _ = heyting_residuation_check(A)
        return revalidated and res_ok, {"witness": w.to_json(), "orbit": chain}
    return _timed(4, "down-set algebras: d fails 1-potency", 60.0, body)


# -- 5. canonical extensions ----------------------------------------------------------------------

def suite_canext(max_size: int = 5, maps: int = 500, seed: int = 0) -> SuiteResult:
    def body():
        rng = np.random.default_rng(seed)
        posets = [P for n in range(1, max_size + 1) for P in cx.enumerate_posets(n)]
        counts = {k: 0 for k in ("completion", "isomorphism", "sigma_le_pi", "k_o_equal", "shortcuts",
                                 "composition_bounds", "operator_composition", "dual_operator_composition",
                                 "operator_composition_on_lattices", "dual_operator_composition_on_lattices")}
        checked = {k: 0 for k in counts}
        examples: dict[str, dict] = {}
        per_poset = -(-maps // len(posets))
        total_maps = 0
        for P in posets:
            C = cx.canonical_extension(P)
            checked["completion"] += 1
            if not cx.verify_completion(C).ok:
                counts["completion"] += 1
            checked["isomorphism"] += 1
            if cx.find_isomorphism(cx.polarity_extension(P), C) is None:
                counts["isomorphism"] += 1
            points = sorted(set(C.embed))
            for j in range(per_poset):
                arity = 1 + (j % 2)
                dual = tuple(bool(rng.integers(2)) for _ in range(arity)) if arity > 1 else (False,)
                f = cx.random_isotone_map(P, rng, arity, dual)
                total_maps += 1
                fs, fp = cx.extend_map(f, "sigma", C), cx.extend_map(f, "pi", C)
                checked["sigma_le_pi"] += 1
                if not cx.pointwise_leq(fs, fp):
                    counts["sigma_le_pi"] += 1
                checked["k_o_equal"] += 1
                grid = tuple(np.meshgrid(*[points] * arity, indexing="ij"))
                if not np.array_equal(fs.table[grid], fp.table[grid]):
                    counts["k_o_equal"] += 1
                checked["shortcuts"] += 1
                if fs != cx.sigma_shortcut(f, C) or fp != cx.pi_shortcut(f, C):
                    counts["shortcuts"] += 1
                # the composition lemmas concern isotone maps without dualised coordinates
                h = f if not any(dual) else cx.random_isotone_map(P, rng, arity)
                k = 1 + int(rng.integers(2))
                g = [cx.random_isotone_map(P, rng, k) for _ in range(arity)]
                _composition_bounds(h, g, C, counts, checked)
                _operator_composition_check(h, g, C, counts, checked, examples)
        ok = all(v == 0 for v in counts.values())
        return ok, {"posets": len(posets), "maps": total_maps, "violations": counts, "checked": checked,
                    "examples": examples}
    return _timed(5, "canonical-extension suite on posets up to 5 elements", 120.0, body)


def _composites(f, g, C):
    fs, fp = cx.extend_map(f, "sigma", C), cx.extend_map(f, "pi", C)
    gs = [cx.extend_map(h, "sigma", C) for h in g]
    gp = [cx.extend_map(h, "pi", C) for h in g]
    return cx.compose(f, g), fs, fp, gs, gp


def _composition_bounds(f, g, C, counts, checked):
    fg, fs, fp, gs, gp = _composites(f, g, C)
    checked["composition_bounds"] += 1
    chain_a = [cx.extend_map(fg, "sigma", C), cx.compose(fs, gs), cx.compose(fs, gp)]
    chain_b = [cx.compose(fp, gs), cx.compose(fp, gp), cx.extend_map(fg, "pi", C)]
    if not all(cx.pointwise_leq(u, v) for ch in (chain_a, chain_b) for u, v in zip(ch, ch[1:])):
        counts["composition_bounds"] += 1


def _operator_composition_check(f, g, C, counts, checked, examples):
    kind = cx.operator_check(f)
    fg, fs, fp, gs, gp = _composites(f, g, C)
    for key, applies, lhs, rhs in (
        ("operator_composition", kind in ("operator", "both"), lambda: cx.extend_map(fg, "sigma", C), lambda: cx.compose(fs, gs)),
        ("dual_operator_composition", kind in ("dual_operator", "both"), lambda: cx.extend_map(fg, "pi", C),
         lambda: cx.compose(fp, gp)),
    ):
        if not applies:
            continue
        checked[key] += 1
        lattice = f.poset.is_lattice()
        checked[key + "_on_lattices"] += lattice
        if lhs() != rhs():
            counts[key] += 1
            counts[key + "_on_lattices"] += lattice
            examples.setdefault(key, {"poset": f.poset.to_json(), "f": f.table.tolist(),
                                      "g": [h.table.tolist() for h in g]})


# -- 6. congruence generation -------------------------------------------------------------------------

def random_algebra(rng: np.random.Generator, max_size: int = 5, max_ops: int = 2, max_arity: int = 2) -> FiniteAlgebra:
    n = int(rng.integers(1, max_size + 1))
    k = int(rng.integers(1, max_ops + 1))
    ops = {f"f{i}": int(rng.integers(1, max_arity + 1)) for i in range(k)}
    sig = make_signature(ops)
    tables = {op: rng.integers(0, n, size=(n,) * a) for op, a in ops.items()}
    return FiniteAlgebra(sig, n, tables)


def suite_congruence(cases: int = 200, seed: int = 0) -> SuiteResult:
    def body():
        rng = np.random.default_rng(seed)
        mismatches = []
        for i in range(cases):
            A = random_algebra(rng)
            pairs = all_pairs(A.size)
            m = int(rng.integers(0, 3))
            chosen = [pairs[j] for j in rng.choice(len(pairs), size=min(m, len(pairs)), replace=False)] if pairs else []
            if cg_generate(A, chosen) != brute_force_cg(A, chosen):
                mismatches.append(i)
        return not mismatches, {"cases": cases, "mismatches": mismatches}
    return _timed(6, "congruence closure matches brute force", 60.0, body)


# -- 7. interpolation -----------------------------------------------------------------------------------

def two_element_lattice() -> FiniteAlgebra:
    return chain_lattice(2)


def chain_lattice(k: int) -> FiniteAlgebra:
    i = np.arange(k)
    return FiniteAlgebra(LATTICE, k, {"meet": np.minimum.outer(i, i), "join": np.maximum.outer(i, i)},
                         name=f"C{k}")


def suite_interpolation() -> SuiteResult:
    def body():
        V = VarietyHandle((two_element_lattice(),))
        xs, ys = ("x",), ("y1", "y2")
        big, small = V.free(xs + ys), V.free(ys)
        thetas = all_congruences_generated_by(big.algebra, 2)
        bad_contract = 0
        for theta in thetas:
            sigma = [big.equation_of(p) for p in theta.generators]
            I = interpolant(V, xs, ys, sigma)
            if I.theta != theta:
                bad_contract += 1
                continue
            if not all(theta.same(*big.pair_of(e)) for e in I.equations):
                bad_contract += 1
                continue
            cg_pi = cg_generate(small.algebra, small.pairs_of(I.equations))
            for a, b in itertools.combinations(range(small.size), 2):
                lifted = (I.inclusion(a), I.inclusion(b))
                if theta.same(*lifted) != cg_pi.same(a, b):
                    bad_contract += 1
                    break
        V1 = VarietyHandle((two_element_lattice(),))
        f_xy = V1.free(("x", "y"))
        principal = [cg_generate(f_xy.algebra, [p]) for p in all_pairs(f_xy.size)] + [diagonal(f_xy.algebra)]
        report = square_check(V1, ("x",), ("y",), ("z",), principal)
        ok = bad_contract == 0 and report.commutes
        return ok, {"congruences": len(thetas), "contract_failures": bad_contract,
                    "square_samples": len(report.results), "square_commutes": report.commutes}
    return _timed(7, "interpolants over distributive lattices and the commuting square", 120.0, body)


# -- 8. presentation transfer ----------------------------------------------------------------------------

def suite_lemma22(cases: int = 100, seed: int = 0) -> SuiteResult:
    def body():
        rng = np.random.default_rng(seed)
        handles = {k: VarietyHandle((chain_lattice(k),)) for k in (2, 3)}
        done = failures = attempts = 0
        while done < cases:
            attempts += 1
            if attempts > 50 * cases:
                break
            V = handles[int(rng.choice([2, 3]))]
            xs = tuple(f"x{i}" for i in range(int(rng.integers(1, 4))))
            ys = tuple(f"y{i}" for i in range(int(rng.integers(1, 4))))
            ok = _lemma22_instance(V, xs, ys, rng)
            if ok is None:
                continue
            done += 1
            failures += not ok
        return failures == 0 and done >= cases, {"cases": done, "failures": failures, "attempts": attempts}
    return _timed(8, "translated presentations generate the kernel", 60.0, body)


def _lemma22_instance(V: VarietyHandle, xs, ys, rng) -> bool | None:
    Fx, Fy = V.free(xs), V.free(ys)
    pairs = all_pairs(Fx.size)
    m = int(rng.integers(0, 3))
    pi = [pairs[j] for j in rng.choice(len(pairs), size=min(m, len(pairs)), replace=False)] if pairs else []
    phi = cg_generate(Fx.algebra, pi)  # ker(g), g: F(x̄) → A = F(x̄)/Φ
    r = {y: Fx.rep_terms[int(rng.integers(Fx.size))] for y in ys}
    # f = g ∘ r on F(ȳ): the block of r(u) for each element u
    f = [phi.blocks[Fx.element_of(substitute(t, r))] for t in Fy.rep_terms]
    if set(f) != set(phi.blocks):
        return None  # f not surjective
    s = {}
    for x in xs:
        target = phi.blocks[Fx.element_of(var(x))]
        s[x] = Fy.rep_terms[f.index(target)]
    sigma = lemma22_translate([(Fx.rep_terms[a], Fx.rep_terms[b]) for a, b in pi], r, s)
    got = cg_generate(Fy.algebra, Fy.pairs_of(sigma))
    kernel = cg_generate(Fy.algebra, [(a, b) for a, b in itertools.combinations(range(Fy.size), 2) if f[a] == f[b]])
    return got == kernel


# -- 9. stabilization bound ------------------------------------------------------------------------------

def stabilization_cases() -> list[tuple[str, FiniteAlgebra, object]]:
    """Every algebra visited by the searches of criteria 1 to 4, with its decreasing term."""
    cases = []
    bh = boxhat()
    for w in range(1, 8):
        cases.append((f"chain-frame({w})", complex_algebra(chain_frame(w)), bh))
    sq = NAMED_TERMS["luk-sq"][1]()
    for k in range(2, 8):
        cases.append((f"luk({k})", luk_chain(k), sq))
    t = lattice_t()
    last = {n: witness_search(t, "lattice-search:10", n) for n in (0, 1)}
    stop = max(w.position for w in last.values() if isinstance(w, Witness))
    for pos, m in enumerate(family_members("lattice-search:10")):
        if pos > stop:
            break
        for cs in itertools.product(range(m.algebra.size), repeat=3):
            env = dict(zip(("c1", "c2", "c3"), cs))
            cases.append((f"{m.name}{list(cs)}", lattice_const_expand(m.algebra, env).algebra, t))
    d = d_term()
    w = witness_search(d, "posets:6", 1)
    stop = w.position if isinstance(w, Witness) else -1
    for pos, m in enumerate(family_members("posets:6")):
        if pos > stop:
            break
        cases.append((m.name, m.algebra, d))
    return cases


def suite_stabilization() -> SuiteResult:
    def body():
        failures = []
        cases = stabilization_cases()
        for name, A, t in cases:
            f = unary_table(t, A)
            decreasing = bool(A.leq[f, np.arange(A.size)].all())
            ok, _ = npotency_check(t, A, max(A.size - 1, 0))
            if not (decreasing and ok):
                failures.append(name)
        return not failures, {"algebras": len(cases), "failures": failures}
    return _timed(9, "decreasing terms are (|A|-1)-potent on every visited algebra", 30.0, body)


# -- 10. determinism ----------------------------------------------------------------------------------

def suite_determinism(argv: list[str] | None = None) -> SuiteResult:
    from .cli import build_report
    argv = argv or ["coherence-report", "--term", "boxhat", "--family", "chain-frame", "--N", "3", "--seed", "7"]

    def body():
        a, b = build_report(argv), build_report(argv)
        return a == b, {"argv": argv, "bytes": len(a)}
    return _timed(10, "coherence-report output is byte-identical across runs", None, body)


SUITES: dict[int, Callable[..., SuiteResult]] = {
    1: suite_modal,
    2: suite_residuated,
    3: suite_lattice,
    4: suite_double_heyting,
    5: suite_canext,
    6: suite_congruence,
    7: suite_interpolation,
    8: suite_lemma22,
    9: suite_stabilization,
    10: suite_determinism,
}
SEEDED = {5, 6, 8}


def run_suite(key: int, seed: int = 0) -> SuiteResult:
    if key not in SUITES:
        raise InputError(f"unknown suite {key}; known: {sorted(SUITES)}")
    return SUITES[key](seed=seed) if key in SEEDED else SUITES[key]()
