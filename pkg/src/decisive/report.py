"""Number formatting and serialisation shared by reports and the CLI."""

from __future__ import annotations

import json
from enum import Enum
from fractions import Fraction

import numpy as np


def number(x):
    """Exact rationals as ``"p/q"`` strings, floats to 12 significant digits."""
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    return float(f"{float(x):.12g}")


def text_number(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, int):
        return str(x)
    return f"{float(x):.12g}"


def _default(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, Enum):
        return o.value
    if isinstance(o, (frozenset, set)):
        return sorted(repr(v) for v in o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return number(float(o))
    raise TypeError(f"cannot serialise {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"
