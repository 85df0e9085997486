"""Semimetric spaces, triangle functions and comparison functions.

A semimetric is symmetric, nonnegative and vanishes exactly on the
diagonal; the triangle inequality is replaced by a declared *triangle
function* ``Phi`` with ``d(x, y) <= Phi(d(x, z), d(z, y))``.

Two kinds of domain are supported:

* :class:`FiniteDomain` - labelled points with an explicit distance table.
* :class:`EuclideanDomain` - points of ``R^m`` with a norm-based kind
  ``d(x, y) = scale * |x - y|^p`` or a custom evaluator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Optional, Sequence

import numpy as np

from . import extreal
from .extreal import INF

__all__ = [
    "Tolerances",
    "TriangleFunction",
    "ComparisonFunction",
    "FiniteDomain",
    "EuclideanDomain",
    "SemimetricKind",
    "SemimetricSpace",
    "DomainError",
    "distance",
    "ball_members",
    "diameter",
    "basic_triangle_function",
    "regularity_probe",
    "RegularityReport",
    "comparison_iterate",
    "validate_axioms",
    "ValidationReport",
    "Violation",
]


class DomainError(ValueError):
    """A point does not belong to the space's domain."""


@dataclass(frozen=True)
class Tolerances:
    zero: float = 1e-9
    rel: float = 1e-6

    def exceeds(self, lhs: float, rhs: float) -> bool:
        """True when ``lhs <= rhs`` fails beyond tolerance."""
        if rhs == INF:
            return False
        return lhs > rhs + self.zero + self.rel * rhs


DEFAULT_TOL = Tolerances()


# -- triangle functions -------------------------------------------------------


def _basic_from_table(table: np.ndarray, u: float, v: float) -> float:
    # sup{d(x,y) : exists p, d(p,x) <= u, d(p,y) <= v}; x = y = p is always admissible
    near_u = table <= u
    near_v = table <= v
    admissible = near_u[:, :, None] & near_v[:, None, :]
    vals = np.where(admissible, table[None, :, :], 0.0)
    return float(vals.max())


@dataclass(frozen=True)
class TriangleFunction:
    """Symmetric, monotone ``Phi`` with ``Phi(0, 0) = 0``.

    Use the constructors :meth:`additive`, :meth:`scaled_additive`,
    :meth:`power`, :meth:`basic` and :meth:`custom`.
    """

    kind: str
    param: float = 1.0
    usc_assumed: bool = True
    regular_assumed: bool = True
    func: Optional[Callable[[float, float], float]] = field(default=None, compare=False)
    table: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    name: str = ""

    @classmethod
    def additive(cls, **flags) -> "TriangleFunction":
        return cls("additive", 1.0, **flags)

    @classmethod
    def scaled_additive(cls, c: float, **flags) -> "TriangleFunction":
        if not c >= 1:
            raise ValueError(f"scaled-additive factor must be >= 1, got {c}")
        return cls("scaled-additive", float(c), **flags)

    @classmethod
    def power(cls, p: float, **flags) -> "TriangleFunction":
        if not p >= 1:
            raise ValueError(f"power exponent must be >= 1, got {p}")
        return cls("power", float(p), **flags)

    @classmethod
    def basic(cls, table, **flags) -> "TriangleFunction":
        """The exact basic triangle function of a finite distance table."""
        t = np.array(table, dtype=float)
        t.setflags(write=False)
        return cls("table", table=t, **flags)

    @classmethod
    def custom(cls, func: Callable[[float, float], float], name: str = "custom", **flags):
        return cls("custom", func=func, name=name, **flags)

    def __call__(self, u: float, v: float) -> float:
        u, v = extreal.ext(u), extreal.ext(v)
        if self.kind == "additive":
            return u + v
        if self.kind == "scaled-additive":
            return self.param * (u + v)
        if self.kind == "power":
            p = self.param
            if u == INF or v == INF:
                return INF
            return (u ** (1.0 / p) + v ** (1.0 / p)) ** p
        if self.kind == "table":
            return _basic_from_table(self.table, u, v)
        return extreal.ext(self.func(u, v))

    def many(self, u: float, vs: np.ndarray) -> np.ndarray:
        """``Phi(u, v)`` for an array of ``v`` values."""
        vs = np.asarray(vs, dtype=float)
        u = extreal.ext(u)
        if self.kind == "additive":
            return u + vs
        if self.kind == "scaled-additive":
            return self.param * (u + vs)
        if self.kind == "power" and u != INF:
            p = self.param
            return (u ** (1.0 / p) + vs ** (1.0 / p)) ** p
        return np.array([self(u, v) for v in vs])

    def probe(self, grid: Sequence[float], tol: Tolerances = DEFAULT_TOL) -> list[str]:
        """Check symmetry, monotonicity and ``Phi(0,0)=0`` on ``grid x grid``."""
        problems = []
        g = sorted(set(float(x) for x in grid))
        if abs(self(0.0, 0.0)) > tol.zero:
            problems.append(f"Phi(0,0) = {self(0.0, 0.0)!r} != 0")
        vals = {(u, v): self(u, v) for u in g for v in g}
        for (u, v), w in vals.items():
            if w != vals[(v, u)]:
                problems.append(f"not symmetric at ({u}, {v})")
        for i, u in enumerate(g):
            for j, v in enumerate(g):
                if i + 1 < len(g) and vals[(g[i + 1], v)] < vals[(u, v)]:
                    problems.append(f"not monotone in u at ({u}, {v})")
                if j + 1 < len(g) and vals[(u, g[j + 1])] < vals[(u, v)]:
                    problems.append(f"not monotone in v at ({u}, {v})")
        return problems

    def describe(self) -> str:
        if self.kind in ("scaled-additive", "power"):
            return f"{self.kind}({self.param:g})"
        return self.name or self.kind


# -- comparison functions -----------------------------------------------------


@dataclass(frozen=True)
class ComparisonFunction:
    """Increasing ``phi`` on ``[0, inf)`` whose iterates tend to 0."""

    kind: str
    param: float = 0.0
    usc_assumed: bool = True
    func: Optional[Callable[[float], float]] = field(default=None, compare=False)
    name: str = ""

    @classmethod
    def linear(cls, q: float, **flags) -> "ComparisonFunction":
        if not 0 <= q < 1:
            raise ValueError(f"linear comparison factor must lie in [0, 1), got {q}")
        return cls("linear", float(q), **flags)

    @classmethod
    def rational(cls, c: float, **flags) -> "ComparisonFunction":
        if not c > 0:
            raise ValueError(f"rational comparison constant must be > 0, got {c}")
        return cls("rational", float(c), **flags)

    @classmethod
    def custom(cls, func: Callable[[float], float], name: str = "custom", **flags):
        return cls("custom", func=func, name=name, **flags)

    def __call__(self, t: float) -> float:
        t = extreal.ext(t)
        if self.kind == "linear":
            if t == INF:
                return 0.0 if self.param == 0 else INF
            return self.param * t
        if self.kind == "rational":
            if t == INF:
                return 1.0 / self.param
            return t / (1.0 + self.param * t)
        return extreal.ext(self.func(t))

    def many(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.kind == "linear" and np.all(np.isfinite(ts)):
            return self.param * ts
        if self.kind == "rational" and np.all(np.isfinite(ts)):
            return ts / (1.0 + self.param * ts)
        return np.array([self(t) for t in ts])

    def iterate(self, t: float, n: int) -> float:
        return comparison_iterate(self, t, n)

    def probe(
        self,
        ts: Optional[Sequence[float]] = None,
        n_pairs: int = 1000,
        decay_steps: int = 200,
        tol: float = 1e-9,
    ) -> list[str]:
        """Probe-based validity check.

        Shipped kinds are valid by their parameter ranges (enforced at
        construction). Custom kinds are probed: monotone on ``n_pairs``
        ordered pairs, ``phi(t) < t`` and ``phi^decay_steps(t) <= tol``.
        """
        if self.kind in ("linear", "rational"):
            return []
        problems = []
        grid = np.geomspace(1e-6, 1e3, n_pairs + 1)
        prev = self(0.0)
        if prev > tol:
            problems.append(f"phi(0) = {prev!r} > 0")
        for a, b in zip(grid[:-1], grid[1:]):
            fa, fb = self(a), self(b)
            if fa > fb:
                problems.append(f"not monotone on ({a:g}, {b:g})")
            if fa >= a:
                problems.append(f"phi({a:g}) = {fa!r} is not below t")
        for t in ts if ts is not None else (1e-3, 1.0, 10.0, 1e3):
            if comparison_iterate(self, t, decay_steps) > tol:
                problems.append(f"phi^{decay_steps}({t:g}) did not decay below {tol:g}")
        return problems

    def describe(self) -> str:
        if self.kind == "linear":
            return f"linear({self.param:g})"
        if self.kind == "rational":
            return f"rational({self.param:g})"
        return self.name or self.kind


def comparison_iterate(phi: ComparisonFunction, t: float, n: int) -> float:
    """n-fold composition ``phi^n(t)``; closed forms for the shipped kinds."""
    if n < 0:
        raise ValueError("iteration count must be >= 0")
    t = extreal.ext(t)
    if n == 0:
        return t
    if t == INF:
        t = phi(t)
        n -= 1
        if n == 0:
            return t
    if phi.kind == "linear":
        return phi.param**n * t
    if phi.kind == "rational":
        return t / (1.0 + n * phi.param * t)
    for _ in range(n):
        t = phi(t)
    return t


# -- domains and spaces -------------------------------------------------------


@dataclass(frozen=True)
class FiniteDomain:
    labels: tuple
    table: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        n = len(self.labels)
        if n == 0:
            raise ValueError("a finite domain needs at least one point")
        if t.shape != (n, n):
            raise ValueError(f"distance table must be {n}x{n}, got shape {t.shape}")
        if np.isnan(t).any():
            raise ValueError("distance table contains NaN")
        if (t < 0).any():
            raise ValueError("distance table has negative entries")
        if not np.array_equal(t, t.T):
            raise ValueError("distance table is not symmetric")
        if np.any(np.diag(t) != 0):
            raise ValueError("distance table diagonal must be zero")
        off = t[~np.eye(n, dtype=bool)]
        if (off == 0).any():
            raise ValueError("distinct points at distance 0")
        if len(set(self.labels)) != n:
            raise ValueError("duplicate point labels")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(self.labels)})

    def index(self, label: Hashable) -> int:
        try:
            return self._index[label]
        except (KeyError, TypeError):
            raise DomainError(f"unknown point label {label!r}") from None

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class EuclideanDomain:
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")


@dataclass(frozen=True)
class SemimetricKind:
    """How ``d`` is evaluated.

    ``metric``/``power``/``scaled`` are ``scale * |x - y|^power`` and are
    increasing in the Euclidean norm, which lets set operations use a
    KD-tree. ``table`` is for finite domains; ``custom`` wraps a callable.
    """

    name: str
    power: float = 1.0
    scale: float = 1.0
    func: Optional[Callable[[Any, Any], float]] = field(default=None, compare=False)

    @classmethod
    def metric(cls):
        return cls("metric")

    @classmethod
    def power_p(cls, p: float):
        if not p >= 1:
            raise ValueError(f"power exponent must be >= 1, got {p}")
        return cls("power", power=float(p))

    @classmethod
    def scaled(cls, factor: float, p: float = 1.0):
        if not factor > 0 or not p >= 1:
            raise ValueError("scaled kind needs factor > 0 and power >= 1")
        return cls("scaled", power=float(p), scale=float(factor))

    @classmethod
    def custom(cls, func: Callable[[Any, Any], float]):
        return cls("custom", func=func)

    @property
    def norm_based(self) -> bool:
        return self.name in ("metric", "power", "scaled")

    def from_sq_norm(self, sq):
        """Semimetric value from a squared Euclidean norm (array-friendly)."""
        if self.power == 2.0:
            out = sq
        elif self.power == 1.0:
            out = np.sqrt(sq)
        else:
            out = np.power(sq, self.power / 2.0)
        return out * self.scale if self.scale != 1.0 else out

    def from_norm(self, r: float) -> float:
        return self.scale * r**self.power

    def to_norm(self, d: float) -> float:
        """Largest Euclidean norm whose semimetric value is ``d``."""
        return (d / self.scale) ** (1.0 / self.power)


@dataclass(frozen=True)
class SemimetricSpace:
    """Point domain plus distance evaluator and declared triangle function."""

    domain: Any
    kind: SemimetricKind
    phi: TriangleFunction

    @classmethod
    def finite(cls, labels, table, phi: Optional[TriangleFunction] = None) -> "SemimetricSpace":
        dom = FiniteDomain(tuple(labels), table)
        if phi is None:
            phi = TriangleFunction.basic(dom.table)
        return cls(dom, SemimetricKind("table"), phi)

    @classmethod
    def euclidean(cls, dim: int, kind: SemimetricKind, phi: Optional[TriangleFunction] = None):
        if phi is None:
            if not kind.norm_based:
                raise ValueError("custom Euclidean kinds must declare a triangle function")
            phi = TriangleFunction.power(kind.power) if kind.power > 1 else TriangleFunction.additive()
        return cls(EuclideanDomain(dim), kind, phi)

    @classmethod
    def power_line(cls, p: float = 2.0, dim: int = 1) -> "SemimetricSpace":
        """``R^dim`` with ``d(x,y) = |x-y|^p`` and its Minkowski triangle function."""
        return cls.euclidean(dim, SemimetricKind.power_p(p), TriangleFunction.power(p))

    @property
    def is_finite(self) -> bool:
        return isinstance(self.domain, FiniteDomain)

    @property
    def is_euclidean(self) -> bool:
        return isinstance(self.domain, EuclideanDomain)

    @property
    def default_dedup_tol(self) -> float:
        return 0.0 if self.is_finite else 1e-12

    # internal point encoding: row index for finite domains, float vector otherwise

    def encode(self, x):
        if self.is_finite:
            return self.domain.index(x)
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        if arr.shape != (self.domain.dim,):
            raise DomainError(f"expected a point of dimension {self.domain.dim}, got {np.shape(x)}")
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"non-finite coordinates {x!r}")
        return arr

    def decode(self, code):
        if self.is_finite:
            return self.domain.labels[int(code)]
        arr = np.asarray(code, dtype=float)
        return float(arr[0]) if self.domain.dim == 1 else tuple(float(c) for c in arr)

    def encode_many(self, points) -> np.ndarray:
        if self.is_finite:
            return np.array([self.domain.index(p) for p in points], dtype=np.intp)
        arr = np.asarray(points, dtype=float)
        if self.domain.dim == 1 and arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[1] != self.domain.dim:
            raise DomainError(f"expected points of dimension {self.domain.dim}, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("non-finite coordinates")
        return arr

    def _d_codes(self, a, b) -> float:
        if self.is_finite:
            return float(self.domain.table[a, b])
        if self.kind.norm_based:
            diff = a - b
            return float(self.kind.from_sq_norm(float(np.dot(diff, diff))))
        return extreal.ext(self.kind.func(self.decode(a), self.decode(b)))

    def distance(self, x, y) -> float:
        return self._d_codes(self.encode(x), self.encode(y))

    def pairwise(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Matrix of distances between encoded point arrays."""
        if self.is_finite:
            return self.domain.table[np.ix_(A, B)]
        if self.kind.norm_based:
            diff = A[:, None, :] - B[None, :, :]
            return self.kind.from_sq_norm(np.einsum("ijk,ijk->ij", diff, diff))
        out = np.empty((len(A), len(B)))
        for i, a in enumerate(A):
            for j, b in enumerate(B):
                out[i, j] = self._d_codes(a, b)
        return out


def distance(space: SemimetricSpace, x, y) -> float:
    """``d(x, y)`` for points given in the space's public representation."""
    return space.distance(x, y)


# -- balls, diameters, basic triangle function --------------------------------


def ball_members(space: SemimetricSpace, candidates, p, r: float):
    """Candidates strictly inside the ball ``B(p, r)``; ``None`` when empty."""
    r = extreal.ext(r)
    if r <= 0:
        raise ValueError("ball radius must be > 0")
    centre = space.encode(p)
    dists = space.pairwise(candidates.data, _as_row(space, centre))[:, 0]
    mask = dists < r
    if not mask.any():
        return None
    return candidates.subset(mask)


def _as_row(space, code):
    if space.is_finite:
        return np.array([code], dtype=np.intp)
    return np.asarray(code, dtype=float)[None, :]


def diameter(space: SemimetricSpace, H) -> float:
    """Largest pairwise distance in ``H``; 0 for singletons."""
    if len(H) == 1:
        return 0.0
    return float(space.pairwise(H.data, H.data).max())


def basic_triangle_function(space: SemimetricSpace, u: float, v: float) -> float:
    """Exact basic triangle function of a finite space by brute force."""
    if not space.is_finite:
        raise TypeError(
            "the basic triangle function is only computable on finite domains; "
            "declare a closed-form triangle function instead"
        )
    return _basic_from_table(space.domain.table, extreal.ext(u), extreal.ext(v))


@dataclass(frozen=True)
class RegularityReport:
    rows: list  # (radius, sup over sampled centres of the ball diameter)
    consistent: bool
    tol: float


def regularity_probe(space: SemimetricSpace, sample, radii: Sequence[float], tol: float = 1e-9):
    """Sample ``sup_p diam B(p, r)`` over decreasing radii.

    The verdict only says the data are *consistent with* a regular space:
    the last row must not exceed ``tol``.
    """
    if sample is None or len(sample) == 0:
        raise ValueError("regularity probe needs a nonempty sample")
    radii = [extreal.ext(r) for r in radii]
    if not radii:
        raise ValueError("at least one radius is required")
    if any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be positive and strictly decreasing")
    dm = space.pairwise(sample.data, sample.data)
    rows = []
    for r in radii:
        worst = 0.0
        for i in range(len(sample)):
            members = np.flatnonzero(dm[i] < r)
            if len(members) > 1:
                worst = max(worst, float(dm[np.ix_(members, members)].max()))
        rows.append((r, worst))
    return RegularityReport(rows, rows[-1][1] <= tol, tol)


# -- axiom validation ---------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str  # "triangle", "symmetry", "identity" or "negative"
    x: Any
    y: Any
    z: Any
    lhs: float
    rhs: float


@dataclass
class ValidationReport:
    exhaustive: bool
    checked: int
    seed: Optional[int]
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _check_triple(space, tol, a, b, c, labels, out):
    dab = space._d_codes(a, b)
    dac = space._d_codes(a, c)
    dcb = space._d_codes(c, b)
    rhs = space.phi(dac, dcb)
    if tol.exceeds(dab, rhs):
        out.append(Violation("triangle", *labels, dab, rhs))


def _check_pair(space, tol, a, b, la, lb, same, out):
    dab, dba = space._d_codes(a, b), space._d_codes(b, a)
    if dab < 0:
        out.append(Violation("negative", la, lb, None, dab, 0.0))
    if dab != dba:
        out.append(Violation("symmetry", la, lb, None, dab, dba))
    if same and dab != 0:
        out.append(Violation("identity", la, lb, None, dab, 0.0))
    if not same and dab == 0:
        out.append(Violation("identity", la, lb, None, dab, 0.0))


def validate_axioms(
    space: SemimetricSpace,
    triple_budget: int = 1000,
    seed: int = 0,
    tol: Tolerances = DEFAULT_TOL,
    exhaustive_limit: int = 20,
) -> ValidationReport:
    """Check the semimetric axioms and the declared triangle inequality.

    Finite domains of at most ``exhaustive_limit`` points are scanned
    exhaustively; otherwise ``triple_budget`` seeded random triples are
    drawn. Violations are returned as data.
    """
    if triple_budget < 1:
        raise ValueError("triple_budget must be >= 1")
    out: list = []
    if space.is_finite and len(space.domain) <= exhaustive_limit:
        labels = space.domain.labels
        n = len(labels)
        for a in range(n):
            for b in range(a, n):
                _check_pair(space, tol, a, b, labels[a], labels[b], a == b, out)
        for a, b, c in itertools.product(range(n), repeat=3):
            _check_triple(space, tol, a, b, c, (labels[a], labels[b], labels[c]), out)
        return ValidationReport(True, n**3, None, out)

    rng = np.random.default_rng(seed)
    for i in range(triple_budget):
        if space.is_finite:
            a, b, c = (int(k) for k in rng.integers(0, len(space.domain), size=3))
        else:
            m = space.domain.dim
            a = rng.uniform(-1.0, 1.0, size=m)
            b = rng.uniform(-1.0, 1.0, size=m)
            if i % 2:
                # points between x and y are where power kinds are tightest
                t = rng.uniform()
                c = (1 - t) * a + t * b
            else:
                c = rng.uniform(-1.0, 1.0, size=m)
        la, lb, lc = space.decode(a), space.decode(b), space.decode(c)
        _check_pair(space, tol, a, b, la, lb, space.is_finite and a == b, out)
        _check_triple(space, tol, a, b, c, (la, lb, lc), out)
    return ValidationReport(False, triple_budget, seed, out)
