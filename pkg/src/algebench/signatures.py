"""Signatures of the case-study families, addressable by name from files."""
from __future__ import annotations

from .errors import InputError
from .terms import Signature, make_signature

_LAT_OPS = {"meet": 2, "join": 2}
_LAT_MONO = {"meet": "++", "join": "++"}
_LAT_EXT = {"meet": "sigma", "join": "sigma"}

LATTICE = make_signature(_LAT_OPS, meet="meet", join="join", ext=_LAT_EXT, mono=_LAT_MONO)

BOOLEAN = make_signature(
    {**_LAT_OPS, "neg": 1, "bot": 0, "top": 0},
    meet="meet", join="join", bottom="bot", top="top",
    ext={**_LAT_EXT, "neg": "sigma"},
    mono={**_LAT_MONO, "neg": "-"},
)

# □ preserves finite meets (a dual operator), hence the π extension
MODAL = make_signature(
    {**_LAT_OPS, "neg": 1, "bot": 0, "top": 0, "box": 1},
    meet="meet", join="join", bottom="bot", top="top",
    ext={**_LAT_EXT, "neg": "sigma", "box": "pi"},
    mono={**_LAT_MONO, "neg": "-", "box": "+"},
)

DOUBLE_HEYTING = make_signature(
    {**_LAT_OPS, "imp": 2, "sub": 2, "bot": 0, "top": 0},
    meet="meet", join="join", bottom="bot", top="top",
    ext={**_LAT_EXT, "imp": "pi", "sub": "sigma"},
    mono={**_LAT_MONO, "imp": "-+", "sub": "+-"},
)

RESIDUATED = make_signature(
    {**_LAT_OPS, "mul": 2, "ldiv": 2, "rdiv": 2, "e": 0},
    meet="meet", join="join",
    ext={**_LAT_EXT, "mul": "sigma", "ldiv": "pi", "rdiv": "pi"},
    mono={**_LAT_MONO, "mul": "++", "ldiv": "-+", "rdiv": "+-"},
)

FL = make_signature(
    {**RESIDUATED.ops, "zero": 0},
    meet="meet", join="join",
    ext=RESIDUATED.ext,
    mono=RESIDUATED.mono,
)

CONST_LATTICE = LATTICE.with_constants(["c1", "c2", "c3"])

BUILTIN = {
    "lattice": LATTICE,
    "boolean": BOOLEAN,
    "modal": MODAL,
    "double-heyting": DOUBLE_HEYTING,
    "residuated": RESIDUATED,
    "fl": FL,
    "const-lattice": CONST_LATTICE,
}


def builtin_signature(name: str) -> Signature:
    try:
        return BUILTIN[name]
    except KeyError:
        raise InputError(f"unknown built-in signature {name!r}; known: {sorted(BUILTIN)}") from None
