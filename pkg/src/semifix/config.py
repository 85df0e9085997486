"""JSON configuration loading and output writing.

Space document::

    {"domain": {"finite": {"points": [...], "dist": [[...]]}} | {"euclidean": {"dim": m}},
     "kind": {"power": p} | "metric" | {"scaled": {"factor": c, "power": p}},
     "phi": "additive" | {"scaled_additive": c} | {"power": p} | "basic",
     "phi_flags": {"usc": true, "regular": true}}

Comparison function: ``{"linear": q}`` or ``{"rational": c}``.

Map: ``{"affine": {"matrix": [[...]], "offset": [...]}}``,
``{"scale_about": {"ratio": r, "center": [...]}}`` or ``{"table": {"a": "b", ...}}``.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any

from . import extreal
from .fixpoint import ContractionMap
from .hutchinson import IFS
from .semimetric import (
    ComparisonFunction,
    DomainError,
    SemimetricKind,
    SemimetricSpace,
    TriangleFunction,
)
from .sets import PointSet


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (CLI exit status 2)."""


def read_json(path) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _one_key(doc, what: str):
    if isinstance(doc, str):
        return doc, None
    if not isinstance(doc, dict) or len(doc) != 1:
        raise ConfigError(f"{what} must be a string or an object with exactly one key, got {doc!r}")
    return next(iter(doc.items()))


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"{what} must be a number, got {value!r}")
    try:
        return float(extreal.parse(value)) if isinstance(value, str) else float(value)
    except ValueError:
        raise ConfigError(f"{what} must be a number, got {value!r}") from None


def load_triangle(doc, table=None) -> TriangleFunction:
    name, arg = _one_key(doc, "phi")
    try:
        if name == "additive":
            return TriangleFunction.additive()
        if name == "scaled_additive":
            return TriangleFunction.scaled_additive(_number(arg, "scaled_additive factor"))
        if name == "power":
            return TriangleFunction.power(_number(arg, "power exponent"))
        if name == "basic":
            if table is None:
                raise ConfigError("'basic' triangle function needs a finite domain")
            return TriangleFunction.basic(table)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown triangle function {name!r}")


def load_comparison(doc) -> ComparisonFunction:
    name, arg = _one_key(doc, "phi_cmp")
    try:
        if name == "linear":
            return ComparisonFunction.linear(_number(arg, "linear factor"))
        if name == "rational":
            return ComparisonFunction.rational(_number(arg, "rational constant"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown comparison function {name!r}")


def _load_kind(doc) -> SemimetricKind:
    name, arg = _one_key(doc, "kind")
    try:
        if name == "metric":
            return SemimetricKind.metric()
        if name == "power":
            return SemimetricKind.power_p(_number(arg, "power exponent"))
        if name == "scaled":
            if not isinstance(arg, dict):
                raise ConfigError("scaled kind needs {'factor': c, 'power': p}")
            return SemimetricKind.scaled(
                _number(arg.get("factor", 1.0), "factor"), _number(arg.get("power", 1.0), "power")
            )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown semimetric kind {name!r}")


def load_space(doc) -> SemimetricSpace:
    if not isinstance(doc, dict) or "domain" not in doc:
        raise ConfigError("space document needs a 'domain'")
    dname, dom = _one_key(doc["domain"], "domain")
    flags = doc.get("phi_flags", {}) or {}
    usc, regular = bool(flags.get("usc", True)), bool(flags.get("regular", True))
    if dname == "finite":
        if not isinstance(dom, dict) or "points" not in dom or "dist" not in dom:
            raise ConfigError("finite domain needs 'points' and 'dist'")
        points = [tuple(p) if isinstance(p, list) else p for p in dom["points"]]
        table = dom["dist"]
        if not isinstance(table, list) or not all(isinstance(r, list) for r in table):
            raise ConfigError("'dist' must be a list of rows")
        try:
            rows = [[_number(v, "distance") for v in row] for row in table]
            space = SemimetricSpace.finite(points, rows)
        except ValueError as exc:
            raise ConfigError(f"invalid distance table: {exc}") from None
        phi = load_triangle(doc.get("phi", "basic"), space.domain.table)
    elif dname == "euclidean":
        if not isinstance(dom, dict) or not isinstance(dom.get("dim"), int) or dom["dim"] < 1:
            raise ConfigError("euclidean domain needs an integer 'dim' >= 1")
        kind = _load_kind(doc.get("kind", "metric"))
        default_phi = {"power": kind.power} if kind.power > 1 else "additive"
        phi = load_triangle(doc.get("phi", default_phi))
        space = SemimetricSpace.euclidean(dom["dim"], kind, phi)
    else:
        raise ConfigError(f"unknown domain {dname!r}")
    phi = TriangleFunction(
        phi.kind, phi.param, usc, regular, phi.func, phi.table, phi.name
    )
    return SemimetricSpace(space.domain, space.kind, phi)


def load_point(space: SemimetricSpace, doc):
    if space.is_finite:
        return tuple(doc) if isinstance(doc, list) else doc
    try:
        space.encode(doc)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    return doc


def load_points(space: SemimetricSpace, doc, dedup_tol=None) -> PointSet:
    if not isinstance(doc, list) or not doc:
        raise ConfigError("a point set must be a nonempty JSON array")
    if space.is_finite:
        doc = [tuple(p) if isinstance(p, list) else p for p in doc]
    try:
        return PointSet(space, doc, dedup_tol)
    except (DomainError, ValueError) as exc:
        raise ConfigError(f"invalid point set: {exc}") from None


def load_map(space: SemimetricSpace, doc, phi: ComparisonFunction) -> ContractionMap:
    if isinstance(doc, dict) and "phi_cmp" in doc:
        phi = load_comparison(doc["phi_cmp"])
        doc = {k: v for k, v in doc.items() if k != "phi_cmp"}
    name, arg = _one_key(doc, "map")
    try:
        if name == "affine":
            m = ContractionMap.affine(arg["matrix"], arg["offset"], phi)
        elif name == "scale_about":
            m = ContractionMap.scale_about(_number(arg["ratio"], "ratio"), arg["center"], phi)
        elif name == "table":
            if not space.is_finite:
                raise ConfigError("table maps need a finite domain")
            if not isinstance(arg, dict):
                raise ConfigError("table map must be a JSON object")
            labels = space.domain.labels
            # JSON object keys are strings; match them against the labels' text
            by_text = {str(lab): lab for lab in labels}

            def label(v):
                if isinstance(v, list):
                    v = tuple(v)
                if v in labels:
                    return v
                if str(v) in by_text:
                    return by_text[str(v)]
                raise ConfigError(f"table map refers to unknown point {v!r}")

            mapping = {label(k): label(v) for k, v in arg.items()}
            if set(mapping) != set(labels):
                raise ConfigError("table map must be defined on every point")
            return ContractionMap.from_table(mapping, phi)
        else:
            raise ConfigError(f"unknown map type {name!r}")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed {name} map: {exc}") from None
    except (DomainError, ValueError) as exc:
        raise ConfigError(f"invalid {name} map: {exc}") from None
    if not space.is_euclidean or len(m.offset) != space.domain.dim:
        raise ConfigError("affine map dimension does not match the space")
    return m


def load_ifs(doc, space=None, shared_phi=None, seed: int = 0) -> IFS:
    """Build an IFS; maps without their own ``phi_cmp`` use the top-level one.

    ``shared_phi`` forces the system's comparison function; otherwise the
    pointwise maximum of the maps' functions is used.
    """
    space = space or load_space(_require(doc, "space"))
    default_phi = shared_phi or load_comparison(_require(doc, "phi_cmp"))
    maps_doc = _require(doc, "maps")
    if not isinstance(maps_doc, list) or not maps_doc:
        raise ConfigError("'maps' must be a nonempty array")
    maps = [load_map(space, m, default_phi) for m in maps_doc]
    try:
        return IFS(space, maps, shared_phi, cert_seed=seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _require(doc, key):
    if not isinstance(doc, dict) or key not in doc:
        raise ConfigError(f"configuration needs '{key}'")
    return doc[key]


# -- output -------------------------------------------------------------------


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def atomic_write(path, data) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
