"""Batch command-line front end.

Every subcommand produces one JSON report (or a markdown rendering of it).
Reports carry the tool version, a hash of the configuration and input files,
the seed and the citation keys they rely on; they contain no timestamps, so
identical invocations give byte-identical output.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from . import canext as cx
from .errors import InputError, WorkbenchError
from .finalg import FiniteAlgebra, cg_generate, load_algebra, satisfies
from .freealg import VarietyHandle, all_congruences_generated_by, interpolant, square_check
from .signatures import BUILTIN, builtin_signature
from .structures import (
    NAMED_TERMS, chain_frame, complex_algebra, downset_algebra, fence, load_frame, luk_chain,
)
from .terms import Signature, load_signature, parse_equation, render, render_equation, render_infix
from .witness import (
    CITATIONS, Exhausted, emit_counterexample, family_signature, load_poset, npotency_check,
    potency_report, resolve_term, witness_search,
)

EXIT_SUITE_FAILED = 4

COMMAND_CITATIONS = {
    "parse": [],
    "check-id": [],
    "cg": [],
    "free": [],
    "interp": ["interpolant-restriction"],
    "square": ["interpolation-square"],
    "canext": ["completion"],
    "classify": ["extension-shortcuts", "canonical-fixpoint"],
    "npotency": ["potency"],
    "witness": ["potency", "potency-criterion"],
    "coherence-report": ["coherence-criterion", "potency", "potency-criterion"],
    "suite": ["completion", "extension-composition", "extension-shortcuts", "interpolant-restriction",
              "interpolation-square", "potency", "presentation-transfer"],
}


# -- input resolution ---------------------------------------------------------------

def resolve_signature(spec: str | None) -> Signature | None:
    if spec is None:
        return None
    if Path(spec).is_file():
        return load_signature(spec)
    return builtin_signature(spec)


_BUILTIN_ALG = re.compile(r"^(lattice|luk|chain-frame|fence):(\d+)$")


def resolve_algebra(spec: str) -> FiniteAlgebra:
    """A JSON file, ``frame:<file>`` for a complex algebra, or one of ``lattice:k``, ``luk:k``, ``chain-frame:k``, ``fence:k``."""
    if spec.startswith("frame:"):
        return complex_algebra(load_frame(spec[len("frame:"):]))
    if Path(spec).is_file():
        return load_algebra(spec)
    m = _BUILTIN_ALG.match(spec)
    if not m:
        raise InputError(f"{spec}: no such file, and not a built-in algebra (lattice:k, luk:k, chain-frame:k, fence:k)")
    kind, k = m.group(1), int(m.group(2))
    if k < 1:
        raise InputError(f"{spec}: size must be positive")
    if kind == "lattice":
        from .suites import chain_lattice
        return chain_lattice(k)
    if kind == "luk":
        return luk_chain(k)
    if kind == "chain-frame":
        return complex_algebra(chain_frame(k))
    if kind == "fence":
        return downset_algebra(fence(k))
    raise InputError(f"{spec}: unknown algebra kind")


def resolve_poset(spec: str) -> cx.FinitePoset:
    if Path(spec).is_file():
        return load_poset(spec)
    m = re.match(r"^(chain|antichain|fence):(\d+)$", spec)
    if not m:
        raise InputError(f"{spec}: no such file, and not chain:k, antichain:k or fence:k")
    kind, k = m.group(1), int(m.group(2))
    return {"chain": cx.FinitePoset.chain, "antichain": cx.FinitePoset.antichain, "fence": fence}[kind](k)


def _vars(text: str | None, flag: str) -> tuple[str, ...]:
    if not text:
        raise InputError(f"{flag} is required")
    names = tuple(v.strip() for v in text.split(",") if v.strip())
    if len(set(names)) != len(names):
        raise InputError(f"{flag} repeats a variable")
    return names


def _need(value, flag: str):
    if value is None:
        raise InputError(f"{flag} is required")
    return value


def _term_signature(args) -> Signature:
    sig = resolve_signature(args.sig)
    if sig is not None:
        return sig
    if args.term in NAMED_TERMS:
        return NAMED_TERMS[args.term][0]
    if getattr(args, "family", None):
        return family_signature(args.family)
    if getattr(args, "alg", None):
        return resolve_algebra(args.alg[0]).sig
    raise InputError("--sig is required to parse this term")


def _file_digests(args) -> dict[str, str]:
    out = {}
    for key in ("alg", "poset", "frame", "sig"):
        value = getattr(args, key, None)
        for item in value if isinstance(value, list) else [value]:
            if item and Path(item).is_file():
                out[item] = hashlib.sha256(Path(item).read_bytes()).hexdigest()
    return dict(sorted(out.items()))


# -- subcommands -----------------------------------------------------------------

def cmd_parse(args) -> tuple[dict, int]:
    sig = _need(resolve_signature(args.sig), "--sig")
    text = _need(args.term or args.eq, "--term or --eq")
    if args.eq:
        e = parse_equation(args.eq[0], sig)
        return {"equation": render_equation(e), "kind": e.kind}, 0
    t = resolve_term(text, sig)
    return {"term": render(t), "infix": render_infix(t), "size": t.size,
            "variables": sorted(t.variables())}, 0


def cmd_check_id(args) -> tuple[dict, int]:
    A = resolve_algebra(_need(args.alg, "--alg")[0])
    e = parse_equation(_need(args.eq, "--eq")[0], A.sig)
    ok, witness = satisfies(A, e, args.budget or 10**7)
    return {"equation": render_equation(e), "holds": ok, "variables": sorted(e.variables()),
            "counterexample": witness, "algebra_size": A.size}, 0


def _parse_pairs(text: str | None, n: int) -> list[tuple[int, int]]:
    pairs = []
    for chunk in (text or "").split(";"):
        if not chunk.strip():
            continue
        try:
            a, b = (int(v) for v in chunk.split(","))
        except ValueError:
            raise InputError(f"bad pair {chunk!r}; expected 'a,b'") from None
        if not (0 <= a < n and 0 <= b < n):
            raise InputError(f"pair {chunk!r} outside 0..{n - 1}")
        pairs.append((a, b))
    return pairs


def cmd_cg(args) -> tuple[dict, int]:
    A = resolve_algebra(_need(args.alg, "--alg")[0])
    theta = cg_generate(A, _parse_pairs(args.pairs, A.size))
    return {"congruence": theta.to_json(), "blocks": theta.block_list()}, 0


def _variety(args) -> VarietyHandle:
    algs = tuple(resolve_algebra(a) for a in _need(args.alg, "--alg"))
    return VarietyHandle(algs, budget=args.budget or 20_000)


def cmd_free(args) -> tuple[dict, int]:
    V = _variety(args)
    F = V.free(_vars(args.vars, "--vars"))
    return {"variables": list(F.variables), "size": F.size,
            "elements": [render(t) for t in F.rep_terms]}, 0


def _as_order(e, sig: Signature) -> str | None:
    """``a ≈ a ∨ b`` or ``a ≈ b ∧ a`` read back as an inequality."""
    for side, other in ((e.lhs, e.rhs), (e.rhs, e.lhs)):
        if other.args and len(other.args) == 2 and side in other.args:
            rest = other.args[1] if other.args[0] == side else other.args[0]
            if sig.join is not None and other.head == getattr(sig.join, "head", None):
                return f"{render(rest)} <= {render(side)}"
            if sig.meet is not None and other.head == getattr(sig.meet, "head", None):
                return f"{render(side)} <= {render(rest)}"
    return None


def cmd_interp(args) -> tuple[dict, int]:
    V = _variety(args)
    xs, ys = _vars(args.x, "--x"), _vars(args.y, "--y")
    sigma = [parse_equation(e, V.sig) for e in _need(args.eq, "--eq")]
    I = interpolant(V, xs, ys, sigma)
    return {"sigma": [render_equation(e) for e in sigma], "pi": [render_equation(e) for e in I.equations],
            "pi_order": [_as_order(e, V.sig) for e in I.equations], "certificate": I.certificate()}, 0


def cmd_square(args) -> tuple[dict, int]:
    V = _variety(args)
    xs, ys, zs = _vars(args.x, "--x"), _vars(args.y, "--y"), _vars(args.z, "--z")
    big = V.free(xs + ys)
    sample = all_congruences_generated_by(big.algebra, args.max_pairs)
    report = square_check(V, xs, ys, zs, sample)
    return {"commutes": report.commutes, "checked": len(report.results),
            "failures": [d for d, ok in zip(report.details, report.results) if not ok]}, 0


def cmd_canext(args) -> tuple[dict, int]:
    P = resolve_poset(_need(args.poset, "--poset"))
    C = cx.canonical_extension(P)
    rep = cx.verify_completion(C)
    iso = cx.find_isomorphism(cx.polarity_extension(P), C) if P.size <= cx.MAX_SUBSET_SCAN else None
    return {"completion": C.to_json(), "dense": rep.dense, "compact": rep.compact,
            "embedding_ok": rep.embedding_ok,
            "polarity_isomorphism": list(iso) if iso is not None else None}, 0


def cmd_classify(args) -> tuple[dict, int]:
    A = resolve_algebra(_need(args.alg, "--alg")[0])
    t = resolve_term(_need(args.term, "--term"), A.sig)
    c = cx.classify_extension(t, A)
    return {"term": render(t), "expanding": c.expanding, "contracting": c.contracting,
            "stable": c.stable, "smooth": c.smooth, "label": c.label}, 0


def _exit_for(found) -> int:
    return 2 if isinstance(found, Exhausted) and found.reason.startswith("budget") else 0


def cmd_npotency(args) -> tuple[dict, int]:
    n = _need(args.n, "--n")
    budget = args.budget or 100_000
    if args.family:
        t = resolve_term(_need(args.term, "--term"), _term_signature(args))
        report = potency_report(t, args.family, n, budget)
        code = 2 if any(e.get("reason", "").startswith("budget") for e in report["entries"]) else 0
        return report, code
    A = resolve_algebra(_need(args.alg, "--alg")[0])
    t = resolve_term(_need(args.term, "--term"), A.sig)
    ok, b = npotency_check(t, A, n)
    return {"term": render(t), "n": n, "potent": ok, "least_failure": b}, 0


def cmd_witness(args) -> tuple[dict, int]:
    t = resolve_term(_need(args.term, "--term"), _term_signature(args))
    found = witness_search(t, _need(args.family, "--family"), _need(args.n, "--n"), args.budget or 100_000)
    return {"term": render(t), "result": found.to_json()}, _exit_for(found)


def cmd_coherence(args) -> tuple[dict, int]:
    t = resolve_term(_need(args.term, "--term"), _term_signature(args))
    pkg = emit_counterexample(t, _need(args.family, "--family"), _need(args.N, "--N"), args.budget or 100_000)
    data = pkg.to_json()
    data["markdown"] = pkg.markdown()
    code = 2 if any(e.reason.startswith("budget") for e in pkg.exhausted) else 0
    return data, code


def cmd_suite(args) -> tuple[dict, int]:
    from .suites import SUITES, run_suite
    keys = sorted(SUITES) if not args.which or args.which == ["all"] else [int(k) for k in args.which]
    results = [run_suite(k, seed=args.seed) for k in keys]
    for r in results:
        print(r.line(), file=sys.stderr)
    data = {"results": [r.to_json() for r in results], "lines": [r.line(timing=False) for r in results]}
    return data, 0 if all(r.passed for r in results) else EXIT_SUITE_FAILED


COMMANDS = {
    "parse": cmd_parse,
    "check-id": cmd_check_id,
    "cg": cmd_cg,
    "free": cmd_free,
    "interp": cmd_interp,
    "square": cmd_square,
    "canext": cmd_canext,
    "classify": cmd_classify,
    "npotency": cmd_npotency,
    "witness": cmd_witness,
    "coherence-report": cmd_coherence,
    "suite": cmd_suite,
}


# -- plumbing -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--sig", help=f"signature file or built-in name ({', '.join(sorted(BUILTIN))})")
    common.add_argument("--alg", action="append", help="algebra file or lattice:k, luk:k, chain-frame:k, fence:k")
    common.add_argument("--poset", help="poset file or chain:k, antichain:k, fence:k")
    common.add_argument("--frame", help="Kripke frame file")
    common.add_argument("--term", help="term text or a named term (" + ", ".join(sorted(NAMED_TERMS)) + ")")
    common.add_argument("--eq", action="append", help="equation text (repeatable where a set is expected)")
    common.add_argument("--family")
    common.add_argument("--n", type=int)
    common.add_argument("--N", type=int)
    common.add_argument("--max-size", type=int)
    common.add_argument("--budget", type=int)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("json", "markdown"), default="json")
    common.add_argument("--out", help="write the report here instead of stdout")

    parser = argparse.ArgumentParser(prog="algebench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"algebench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "cg":
            p.add_argument("--pairs", help="generating pairs as 'a,b;c,d'")
        if name == "free":
            p.add_argument("--vars", help="comma-separated variables")
        if name in ("interp", "square"):
            p.add_argument("--x", help="variables to eliminate")
            p.add_argument("--y", help="variables to keep")
        if name == "square":
            p.add_argument("--z", help="fresh variables")
            p.add_argument("--max-pairs", type=int, default=1)
        if name == "suite":
            p.add_argument("which", nargs="*", help="criterion numbers, or 'all'")
    return parser


def _config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("format", "out")}
    cfg["inputs"] = _file_digests(args)
    return cfg


def execute(argv: Sequence[str]) -> tuple[str, int]:
    args = build_parser().parse_args(list(argv))
    frame = args.frame
    for key in ("budget", "max_size"):
        if getattr(args, key) is not None and getattr(args, key) < 1:
            raise InputError(f"--{key.replace('_', '-')} must be positive")
    for key in ("n", "N"):
        if getattr(args, key) is not None and getattr(args, key) < 0:
            raise InputError(f"--{key} must be non-negative")
    if args.max_size is not None and args.family and ":" not in args.family:
        args.family = f"{args.family}:{args.max_size}"
    if frame:
        args.alg = [f"frame:{frame}"] + (args.alg or [])
    result, code = COMMANDS[args.command](args)
    report = {
        "tool": "algebench",
        "version": __version__,
        "command": args.command,
        "seed": args.seed,
        "config": _config(args),
        "config_hash": hashlib.sha256(json.dumps(_config(args), sort_keys=True).encode()).hexdigest(),
        "citations": {k: CITATIONS[k] for k in sorted(COMMAND_CITATIONS[args.command])},
        "result": result,
    }
    if args.format == "markdown":
        text = _markdown(report)
    else:
        text = json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        return "", code
    return text, code


def _markdown(report: dict) -> str:
    result = report["result"]
    head = [f"<!-- algebench {report['version']} config {report['config_hash'][:16]} seed {report['seed']} -->", ""]
    if "markdown" in result:
        return "\n".join(head) + result["markdown"]
    body = json.dumps(result, sort_keys=True, indent=2, ensure_ascii=False)
    cites = [f"- [{k}] {v}" for k, v in report["citations"].items()]
    return "\n".join(head + [f"# {report['command']}", "", "```json", body, "```", "", *cites, ""])


def build_report(argv: Sequence[str]) -> str:
    return execute(argv)[0]


def main(argv: Sequence[str] | None = None) -> int:
    try:
        text, code = execute(sys.argv[1:] if argv is None else argv)
    except WorkbenchError as exc:
        print(f"algebench: error: {exc}", file=sys.stderr)
        return exc.exit_code
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
