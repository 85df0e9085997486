"""Nonnegative extended reals.

Distances and bounds are plain Python floats restricted to ``[0, inf]``.
The helpers here validate that range and make every NaN-producing
operation an error instead of a silent value.
"""

import math
from typing import Iterable

INF = math.inf


class ExtRealError(ValueError):
    """Raised when a value leaves [0, +inf] or an operation produces NaN."""


def ext(value) -> float:
    """Coerce ``value`` to a validated extended real."""
    if isinstance(value, str):
        return parse(value)
    v = float(value)
    if math.isnan(v):
        raise ExtRealError("NaN is not an extended real")
    if v < 0:
        raise ExtRealError(f"negative value {v!r} is not a nonnegative extended real")
    return v


def add(a: float, b: float) -> float:
    return ext(ext(a) + ext(b))


def mul(a: float, b: float) -> float:
    a, b = ext(a), ext(b)
    if (a == 0 and b == INF) or (a == INF and b == 0):
        raise ExtRealError("0 * inf is undefined")
    return a * b


def sup(values: Iterable[float]) -> float:
    """Supremum with the empty supremum taken as 0."""
    best = 0.0
    for v in values:
        v = ext(v)
        if v > best:
            best = v
    return best


def is_finite(v: float) -> bool:
    return v != INF


def fmt(v: float) -> str:
    """Shortest round-trip text, locale independent; infinity prints as ``inf``."""
    v = float(v)
    if v == INF:
        return "inf"
    if v == -INF:
        return "-inf"
    return repr(v)


def parse(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity", "+infinity"):
        return INF
    return ext(float(t))


def to_json(v: float):
    """JSON-safe encoding; infinity becomes the string ``"inf"``."""
    v = float(v)
    return "inf" if v == INF else v
