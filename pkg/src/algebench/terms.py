"""Signatures, terms and equations.

Terms are immutable trees with a cached hash, so iterated terms such as
``t^k(x)`` (which share subtrees) can be used as dictionary keys cheaply.
The canonical concrete syntax is a prefix s-expression, ``(meet x (join y z))``;
an infix layer is accepted on input only.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import InputError, ParseError


class Term:
    """A variable (``args is None``) or an operation applied to arguments."""

    __slots__ = ("head", "args", "_hash", "_size")

    def __init__(self, head: str, args: tuple[Term, ...] | None = None):
        self.head = head
        self.args = args
        self._hash = hash((head, args))
        self._size = 1 if args is None else 1 + sum(a._size for a in args)

    @property
    def is_var(self) -> bool:
        return self.args is None

    @property
    def size(self) -> int:
        return self._size

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Term) or self._hash != other._hash:
            return False
        return self.head == other.head and self.args == other.args

    def __repr__(self):
        return f"Term({render(self)!r})"

    def variables(self) -> frozenset[str]:
        seen: dict[Term, frozenset[str]] = {}

        def walk(t: Term) -> frozenset[str]:
            if t.args is None:
                return frozenset([t.head])
            if t in seen:
                return seen[t]
            out = frozenset().union(*(walk(a) for a in t.args)) if t.args else frozenset()
            seen[t] = out
            return out

        return walk(self)

    def ops(self) -> frozenset[str]:
        out: set[str] = set()
        stack, seen = [self], set()
        while stack:
            t = stack.pop()
            if t.args is None or id(t) in seen:
                continue
            seen.add(id(t))
            out.add(t.head)
            stack.extend(t.args)
        return frozenset(out)


def var(name: str) -> Term:
    return Term(name, None)


def app(op: str, *args: Term) -> Term:
    return Term(op, tuple(args))


@dataclass(frozen=True)
class Equation:
    lhs: Term
    rhs: Term
    kind: str = "eq"  # "eq" for s ≈ t, "le" for s ≤ t

    def __post_init__(self):
        if self.kind not in ("eq", "le"):
            raise InputError(f"unknown equation kind {self.kind!r}")

    def variables(self) -> frozenset[str]:
        return self.lhs.variables() | self.rhs.variables()

    def __str__(self):
        return render_equation(self)


def eq(lhs: Term, rhs: Term) -> Equation:
    return Equation(lhs, rhs, "eq")


def le(lhs: Term, rhs: Term) -> Equation:
    return Equation(lhs, rhs, "le")


# -- signatures ---------------------------------------------------------------

_POLARITIES = ("+", "-", "?")


@dataclass(frozen=True, eq=False)
class Signature:
    """Operation symbols with arities plus optional order metadata.

    ``meet``/``join`` are designated binary terms in the variables ``x``, ``y``
    (usually just a basic operation applied to them).  ``ext`` records for each
    operation whether its canonical extension is the σ or the π one, and
    ``mono`` lists per-coordinate polarities ("+", "-" or "?").
    """

    ops: Mapping[str, int]
    meet: Term | None = None
    join: Term | None = None
    bottom: str | None = None
    top: str | None = None
    ext: Mapping[str, str] = field(default_factory=dict)
    mono: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "ops", dict(self.ops))
        object.__setattr__(self, "ext", dict(self.ext))
        object.__setattr__(self, "mono", {k: tuple(v) for k, v in self.mono.items()})
        for name, arity in self.ops.items():
            if not isinstance(arity, int) or arity < 0:
                raise InputError(f"operation {name!r} has invalid arity {arity!r}")
        for name, choice in self.ext.items():
            if name not in self.ops:
                raise InputError(f"ext choice for undeclared operation {name!r}")
            if choice not in ("sigma", "pi"):
                raise InputError(f"ext choice for {name!r} must be 'sigma' or 'pi'")
        for name, pols in self.mono.items():
            if name not in self.ops:
                raise InputError(f"monotonicity for undeclared operation {name!r}")
            if len(pols) != self.ops[name] or any(p not in _POLARITIES for p in pols):
                raise InputError(f"bad monotonicity list for {name!r}: {pols!r}")
        for label, t in (("meet", self.meet), ("join", self.join)):
            if t is None:
                continue
            if not t.variables() <= {"x", "y"} or not t.ops() <= set(self.ops):
                raise InputError(f"designated {label} must be a term over x, y in this signature")
        for label, c in (("bottom", self.bottom), ("top", self.top)):
            if c is not None and self.ops.get(c) != 0:
                raise InputError(f"designated {label} {c!r} is not a declared constant")

    @property
    def constants(self) -> list[str]:
        return sorted(n for n, a in self.ops.items() if a == 0)

    def arity(self, op: str) -> int:
        try:
            return self.ops[op]
        except KeyError:
            raise InputError(f"undeclared operation {op!r}") from None

    def meet_of(self, s: Term, t: Term) -> Term:
        if self.meet is None:
            raise InputError("signature has no designated meet")
        return substitute(self.meet, {"x": s, "y": t})

    def join_of(self, s: Term, t: Term) -> Term:
        if self.join is None:
            raise InputError("signature has no designated join")
        return substitute(self.join, {"x": s, "y": t})

    def with_constants(self, names: Iterable[str]) -> Signature:
        ops = dict(self.ops)
        for n in names:
            if n in ops:
                raise InputError(f"constant {n!r} collides with an existing operation")
            ops[n] = 0
        mono = dict(self.mono)
        mono.update({n: () for n in names})
        return Signature(ops, self.meet, self.join, self.bottom, self.top, self.ext, mono)

    def key(self) -> tuple:
        return (
            tuple(sorted(self.ops.items())),
            None if self.meet is None else render(self.meet),
            None if self.join is None else render(self.join),
            self.bottom,
            self.top,
            tuple(sorted(self.ext.items())),
            tuple(sorted(self.mono.items())),
        )

    def __eq__(self, other):
        return isinstance(other, Signature) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def to_json(self) -> dict:
        out: dict = {"ops": {k: v for k, v in sorted(self.ops.items()) if v > 0},
                     "constants": self.constants}
        if self.meet is not None:
            out["meet"] = _designated_text(self.meet)
        if self.join is not None:
            out["join"] = _designated_text(self.join)
        if self.bottom is not None:
            out["bottom"] = self.bottom
        if self.top is not None:
            out["top"] = self.top
        if self.ext:
            out["ext"] = dict(sorted(self.ext.items()))
        if self.mono:
            out["mono"] = {k: list(v) for k, v in sorted(self.mono.items()) if v}
        return out


def _designated_text(t: Term) -> str:
    if t.args is not None and len(t.args) == 2 and t.args == (var("x"), var("y")):
        return t.head
    return render(t)


def _designated(sig_ops: Mapping[str, int], value) -> Term | None:
    if value is None:
        return None
    if value in sig_ops:
        if sig_ops[value] != 2:
            raise InputError(f"designated operation {value!r} is not binary")
        return app(value, var("x"), var("y"))
    return parse_term(value, Signature(sig_ops))


def make_signature(
    ops: Mapping[str, int],
    *,
    meet: str | None = None,
    join: str | None = None,
    bottom: str | None = None,
    top: str | None = None,
    ext: Mapping[str, str] | None = None,
    mono: Mapping[str, Iterable[str]] | None = None,
) -> Signature:
    """Build a signature; ``meet``/``join`` may name a binary op or be term text."""
    ops = dict(ops)
    return Signature(
        ops,
        _designated(ops, meet),
        _designated(ops, join),
        bottom,
        top,
        dict(ext or {}),
        {k: tuple(v) for k, v in (mono or {}).items()},
    )


def signature_from_json(data: Mapping) -> Signature:
    if not isinstance(data, Mapping) or "ops" not in data:
        raise InputError("signature JSON needs an 'ops' object")
    ops = dict(data["ops"])
    for c in data.get("constants", []):
        if ops.get(c, 0) != 0:
            raise InputError(f"constant {c!r} declared with nonzero arity")
        ops[c] = 0
    return make_signature(
        ops,
        meet=data.get("meet"),
        join=data.get("join"),
        bottom=data.get("bottom"),
        top=data.get("top"),
        ext=data.get("ext"),
        mono={k: list(v) for k, v in data.get("mono", {}).items()},
    )


def load_signature(path: str | Path) -> Signature:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None
    return signature_from_json(data)


# -- parsing ------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<ident>[A-Za-z0-9_][A-Za-z0-9_'.]*)|(?P<sym>->|<=|→|≤|≈|=|∧|&|∨|\||¬|~|·|\*|\\|/|−|-|\(|\)|,))"
)

# infix sugar: symbol -> (conventional op name, binding power, right-assoc)
_INFIX = {
    "→": ("imp", 1, True), "->": ("imp", 1, True),
    "∨": ("join", 2, False), "|": ("join", 2, False),
    "−": ("sub", 2, False), "-": ("sub", 2, False),
    "∧": ("meet", 3, False), "&": ("meet", 3, False),
    "·": ("mul", 4, False), "*": ("mul", 4, False),
    "\\": ("ldiv", 4, False), "/": ("rdiv", 4, False),
}
_PREFIX = {"¬": "neg", "~": "neg"}
_RELATIONS = {"≈": "eq", "=": "eq", "≤": "le", "<=": "le"}


def _byte_offset(text: str, i: int) -> int:
    return len(text[:i].encode("utf-8"))


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks, i = [], 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        m = _TOKEN.match(text, i)
        if m is None or m.end() == i:
            raise ParseError(f"unexpected character {text[i]!r}", _byte_offset(text, i))
        kind = "ident" if m.group("ident") else "sym"
        start = m.start(kind)
        toks.append((kind, m.group(kind), _byte_offset(text, start)))
        i = m.end()
    return toks


class _Parser:
    def __init__(self, text: str, sig: Signature):
        self.text = text
        self.sig = sig
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def end_offset(self) -> int:
        return len(self.text.encode("utf-8"))

    def take(self):
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.end_offset())
        self.pos += 1
        return tok

    def expect(self, value: str):
        tok = self.take()
        if tok[1] != value:
            raise ParseError(f"expected {value!r}, found {tok[1]!r}", tok[2])

    def atom(self, name: str, offset: int) -> Term:
        arity = self.sig.ops.get(name)
        if arity is None:
            return var(name)
        if arity != 0:
            raise ParseError(f"operation {name!r} of arity {arity} used without arguments", offset)
        return app(name)

    def apply(self, name: str, args: list[Term], offset: int) -> Term:
        if name not in self.sig.ops:
            raise ParseError(f"undeclared operation {name!r} used with arguments", offset)
        arity = self.sig.ops[name]
        if arity != len(args):
            raise ParseError(f"arity mismatch: {name!r} takes {arity}, got {len(args)}", offset)
        return app(name, *args)

    # s-expressions
    def sexpr(self) -> Term:
        kind, value, off = self.take()
        if kind == "ident":
            return self.atom(value, off)
        if value != "(":
            raise ParseError(f"unexpected {value!r}", off)
        kind, name, noff = self.take()
        if kind != "ident":
            raise ParseError(f"expected operation name, found {name!r}", noff)
        args = []
        while True:
            tok = self.peek()
            if tok is None:
                raise ParseError("unbalanced parentheses", self.end_offset())
            if tok[1] == ")":
                self.pos += 1
                break
            args.append(self.sexpr())
        return self.apply(name, args, noff)

    # infix
    def sugar_op(self, sym: str) -> str:
        name = _INFIX[sym][0] if sym in _INFIX else _PREFIX[sym]
        designated = {"meet": self.sig.meet, "join": self.sig.join}.get(name)
        if designated is not None and designated.args == (var("x"), var("y")):
            return designated.head
        return name

    def infix(self, min_bp: int = 0) -> Term:
        lhs = self.prefix()
        while True:
            tok = self.peek()
            if tok is None or tok[0] != "sym" or tok[1] not in _INFIX:
                return lhs
            _, bp, right = _INFIX[tok[1]]
            if bp < min_bp:
                return lhs
            self.pos += 1
            rhs = self.infix(bp if right else bp + 1)
            lhs = self.apply(self.sugar_op(tok[1]), [lhs, rhs], tok[2])

    def prefix(self) -> Term:
        kind, value, off = self.take()
        if kind == "sym" and value in _PREFIX:
            return self.apply(self.sugar_op(value), [self.prefix()], off)
        if kind == "sym" and value == "(":
            inner = self.infix()
            self.expect(")")
            return inner
        if kind != "ident":
            raise ParseError(f"unexpected {value!r}", off)
        nxt = self.peek()
        if nxt is not None and nxt[1] == "(" and value in self.sig.ops:
            self.pos += 1
            args = []
            if self.peek() is not None and self.peek()[1] == ")":
                self.pos += 1
            else:
                while True:
                    args.append(self.infix())
                    tok = self.take()
                    if tok[1] == ")":
                        break
                    if tok[1] != ",":
                        raise ParseError(f"expected ',' or ')', found {tok[1]!r}", tok[2])
            return self.apply(value, args, off)
        return self.atom(value, off)

    def finish(self):
        tok = self.peek()
        if tok is not None:
            if tok[1] == ")":
                raise ParseError("unbalanced parentheses", tok[2])
            raise ParseError(f"trailing input {tok[1]!r}", tok[2])


def _is_infix(toks) -> bool:
    # an s-expression never starts with an identifier followed by more tokens
    if toks[0][0] == "ident" and len(toks) > 1:
        return True
    return any(kind == "sym" and (value in _INFIX or value in _PREFIX or value == ",")
               for kind, value, _ in toks)


def parse_term(text: str, sig: Signature) -> Term:
    """Parse a term; s-expression by default, infix if sugar symbols occur."""
    p = _Parser(text, sig)
    if not p.toks:
        raise ParseError("empty term", 0)
    t = p.infix() if _is_infix(p.toks) else p.sexpr()
    p.finish()
    return t


def parse_equation(text: str, sig: Signature) -> Equation:
    """Parse ``s = t``, ``s <= t`` (or ≈/≤), or the prefix forms ``(= s t)``."""
    toks = _tokenize(text)
    if len(toks) >= 2 and toks[0][1] == "(" and toks[1][1] in _RELATIONS:
        p = _Parser(text, sig)
        p.pos = 2
        lhs, rhs = p.sexpr(), p.sexpr()
        p.expect(")")
        p.finish()
        return Equation(lhs, rhs, _RELATIONS[toks[1][1]])
    depth, split = 0, None
    for i, (kind, value, off) in enumerate(toks):
        if value == "(":
            depth += 1
        elif value == ")":
            depth -= 1
        elif depth == 0 and kind == "sym" and value in _RELATIONS:
            if split is not None:
                raise ParseError("more than one relation symbol", off)
            split = i
    if split is None:
        raise ParseError("equation needs one of = ≈ <= ≤", toks[0][2] if toks else 0)
    cut = _char_index(text, toks[split][2])
    width = len(toks[split][1])
    lhs = parse_term(text[:cut], sig)
    rhs = parse_term(text[cut + width:], sig)
    return Equation(lhs, rhs, _RELATIONS[toks[split][1]])


def _char_index(text: str, byte_offset: int) -> int:
    return len(text.encode("utf-8")[:byte_offset].decode("utf-8"))


def read_terms(path: str | Path, sig: Signature) -> list[Term]:
    return [parse_term(line, sig) for line in _content_lines(path)]


def read_equations(path: str | Path, sig: Signature) -> list[Equation]:
    return [parse_equation(line, sig) for line in _content_lines(path)]


def _content_lines(path):
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


# -- rendering ----------------------------------------------------------------

def render(t: Term) -> str:
    if t.args is None:
        return t.head
    if not t.args:
        return t.head
    return "(" + " ".join([t.head] + [render(a) for a in t.args]) + ")"


def render_equation(e: Equation) -> str:
    return f"{render(e.lhs)} {'=' if e.kind == 'eq' else '<='} {render(e.rhs)}"


_PRETTY = {"meet": "∧", "join": "∨", "imp": "→", "sub": "−", "mul": "·", "ldiv": "\\", "rdiv": "/"}


def render_infix(t: Term) -> str:
    """Human-oriented infix rendering, fully parenthesised; not re-parsed by tools."""
    if t.args is None or not t.args:
        return t.head
    if t.head in _PRETTY and len(t.args) == 2:
        return f"({render_infix(t.args[0])} {_PRETTY[t.head]} {render_infix(t.args[1])})"
    if t.head == "neg" and len(t.args) == 1:
        return "¬" + render_infix(t.args[0])
    return f"{t.head}({', '.join(render_infix(a) for a in t.args)})"


# -- term operations ----------------------------------------------------------

def substitute(t: Term, bindings: Mapping[str, Term]) -> Term:
    """Simultaneous substitution; unbound variables stay fixed."""
    memo: dict[Term, Term] = {}

    def walk(s: Term) -> Term:
        if s.args is None:
            return bindings.get(s.head, s)
        hit = memo.get(s)
        if hit is None:
            hit = Term(s.head, tuple(walk(a) for a in s.args))
            memo[s] = hit
        return hit

    return walk(t)


def iterate_term(t: Term, x: str, k: int) -> Term:
    if k < 0:
        raise InputError("iteration count must be non-negative")
    out = var(x)
    for _ in range(k):
        out = substitute(t, {x: out})
    return out


def polarity(t: Term, x: str, sig: Signature) -> str:
    """Syntactic polarity of ``x`` in ``t``: '+', '-', 'both', 'none' or '?'.

    '?' flags an occurrence under a coordinate of unknown monotonicity, in
    which case nothing can be concluded.
    """
    signs: set[str] = set()
    memo: dict[tuple[Term, int], None] = {}

    def walk(s: Term, sign: int):
        if s.args is None:
            if s.head == x:
                signs.add("+" if sign > 0 else "-" if sign < 0 else "?")
            return
        if (s, sign) in memo:
            return
        memo[(s, sign)] = None
        pols = sig.mono.get(s.head, ("?",) * len(s.args))
        for p, a in zip(pols, s.args):
            if x not in a.variables():
                continue
            walk(a, 0 if p == "?" or sign == 0 else sign if p == "+" else -sign)

    walk(t, 1)
    if "?" in signs:
        return "?"
    if not signs:
        return "none"
    if signs == {"+", "-"}:
        return "both"
    return signs.pop()


def desugar(e: Equation, sig: Signature) -> Equation:
    """Rewrite ``s ≤ t`` as ``meet(s, t) ≈ s``; equalities pass through."""
    if e.kind == "eq":
        return e
    if sig.meet is None:
        raise InputError("inequality needs a signature with a designated meet")
    return Equation(sig.meet_of(e.lhs, e.rhs), e.lhs, "eq")


def power_term(base: Term, k: int, mul: str = "mul", unit: Term | None = None) -> Term:
    """Left-associated product base·base·…·base (k factors); k = 0 gives ``unit``."""
    if k == 0:
        if unit is None:
            raise InputError("zeroth power needs a unit")
        return unit
    out = base
    for _ in range(k - 1):
        out = app(mul, out, base)
    return out


def meet_all(terms: list[Term], sig: Signature) -> Term:
    out = terms[0]
    for t in terms[1:]:
        out = sig.meet_of(out, t)
    return out
