"""Picard iteration for phi-contractions with certified error bounds.

The bounds all go through

    psi(t) = sup{ s >= 0 : s <= Phi(t, phi(s)) },

which turns a step length ``d(x, T(x))`` into a bound on ``d(x, x0)``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Optional

import numpy as np

from . import extreal
from .extreal import INF
from .semimetric import (
    DEFAULT_TOL,
    ComparisonFunction,
    SemimetricSpace,
    Tolerances,
    TriangleFunction,
    comparison_iterate,
)

__all__ = [
    "ContractionMap",
    "CertificationReport",
    "StoppingRule",
    "TraceRow",
    "IterationTrace",
    "ErrorBounds",
    "psi",
    "make_psi",
    "picard_iterate",
    "error_bounds",
    "certify_contraction",
    "TRACE_COLUMNS",
]

TRACE_COLUMNS = ("k", "x", "step", "apriori", "aposteriori", "speed_bound", "measured_error")


# -- psi ----------------------------------------------------------------------

_LINEAR_NODES = np.linspace(0.0, 1.0, 1025)
_GEOMETRIC_NODES = 2.0 ** -np.arange(1, 301, dtype=float)
_GRID = np.unique(np.concatenate([_LINEAR_NODES, _GEOMETRIC_NODES]))


def psi(
    phi_tri: TriangleFunction,
    phi_cmp: ComparisonFunction,
    t: float,
    s_max: Optional[float] = None,
    tol: float = 1e-12,
) -> float:
    """Evaluate ``psi(t)`` numerically.

    A coarse scan of ``[0, s_max]`` (linear plus geometric nodes) locates
    the largest node satisfying ``s <= Phi(t, phi(s))``; the gap to the
    next node is then bisected (at least 64 halvings, more until the
    bracket is below ``tol``). Returns ``inf`` when the predicate still
    holds at ``s_max``, since the supremum may lie beyond the cap.
    """
    t = extreal.ext(t)
    if t == INF:
        return INF
    if t == 0 and phi_tri.kind in ("additive", "power", "table"):
        # Phi(0, v) <= v and phi(s) < s leave only s = 0; float rounding of phi near 0 would not
        return 0.0
    if s_max is None:
        s_max = max(10.0 * t, 10.0 * phi_tri(t, t), 1.0)
    if not (0 < s_max < INF):
        raise ValueError(f"psi cap must be positive and finite, got {s_max!r}")
    if not tol > 0:
        raise ValueError(f"psi tolerance must be > 0, got {tol!r}")

    def holds(s: float) -> bool:
        return s <= phi_tri(t, phi_cmp(s))

    if holds(s_max):
        return INF
    grid = _GRID * s_max
    ok = grid <= phi_tri.many(t, phi_cmp.many(grid))
    i = int(np.flatnonzero(ok).max())  # grid[0] = 0 always holds
    lo, hi = float(grid[i]), float(grid[i + 1])
    if holds(hi):
        # vectorised and scalar evaluation disagreed by an ulp at the node
        lo, hi = hi, float(grid[min(i + 2, len(grid) - 1)])
    steps = 0
    while True:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if holds(mid):
            lo = mid
        else:
            hi = mid
        steps += 1
        if steps >= 64 and hi - lo <= tol:
            break
    return lo


def make_psi(phi_tri: TriangleFunction, phi_cmp: ComparisonFunction, s_max=None, tol=1e-12):
    """``psi`` as a one-argument callable."""
    return partial(psi, phi_tri, phi_cmp, s_max=s_max, tol=tol)


# -- contraction maps ---------------------------------------------------------


@dataclass(frozen=True)
class ContractionMap:
    """A self-map declared to be a phi-contraction.

    Build with :meth:`affine`, :meth:`scale_about`, :meth:`from_table` or
    :meth:`custom`. ``certification`` is ``"declared"`` until
    :func:`certify_contraction` upgrades it to ``"analytic"`` or
    ``"empirical"`` (or marks it ``"failed"``).
    """

    phi: ComparisonFunction
    matrix: Optional[np.ndarray] = field(default=None, compare=False)
    offset: Optional[np.ndarray] = field(default=None, compare=False)
    table: Optional[dict] = field(default=None, compare=False)
    func: Optional[Callable] = field(default=None, compare=False)
    certification: str = "declared"
    cert_seed: Optional[int] = None
    cert_samples: Optional[int] = None

    @classmethod
    def affine(cls, matrix, offset, phi: ComparisonFunction) -> "ContractionMap":
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        b = np.atleast_1d(np.asarray(offset, dtype=float))
        if m.shape != (len(b), len(b)):
            raise ValueError(f"affine matrix shape {m.shape} does not match offset length {len(b)}")
        m.setflags(write=False)
        b.setflags(write=False)
        return cls(phi, matrix=m, offset=b)

    @classmethod
    def scale_about(cls, ratio: float, center, phi: ComparisonFunction) -> "ContractionMap":
        """Homothety ``x -> ratio * x + (1 - ratio) * center``."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return cls.affine(ratio * np.eye(len(c)), (1.0 - ratio) * c, phi)

    @classmethod
    def from_table(cls, mapping: dict, phi: ComparisonFunction) -> "ContractionMap":
        return cls(phi, table=dict(mapping))

    @classmethod
    def custom(cls, func: Callable, phi: ComparisonFunction) -> "ContractionMap":
        return cls(phi, func=func)

    @property
    def is_affine(self) -> bool:
        return self.matrix is not None

    def similitude_ratio(self) -> Optional[float]:
        """``r`` when the linear part is ``r`` times an orthogonal matrix."""
        if not self.is_affine:
            return None
        m = self.matrix
        gram = m.T @ m
        r2 = float(np.trace(gram)) / len(gram)
        if np.allclose(gram, r2 * np.eye(len(gram)), rtol=0, atol=1e-12 * max(r2, 1e-300)):
            return math.sqrt(r2)
        return None

    def apply_codes(self, space: SemimetricSpace, data: np.ndarray) -> np.ndarray:
        """Apply to an array of encoded points."""
        if self.is_affine:
            if data.shape[1] != len(self.offset):
                raise ValueError("map dimension does not match the space")
            return data @ self.matrix.T + self.offset
        if self.table is not None:
            labels = space.domain.labels
            return np.array([space.domain.index(self.table[labels[i]]) for i in data], dtype=np.intp)
        out = [space.encode(self.func(space.decode(c))) for c in data]
        return np.array(out)

    def apply(self, space: SemimetricSpace, x):
        """Apply to one point in the public representation."""
        code = space.encode(x)
        if space.is_finite:
            return space.decode(self.apply_codes(space, np.array([code]))[0])
        return space.decode(self.apply_codes(space, code[None, :])[0])


@dataclass(frozen=True)
class CertificationReport:
    certification: str
    exhaustive: bool
    checked: int
    seed: Optional[int]
    violations: list
    ratio: Optional[float] = None
    certified_map: Optional[ContractionMap] = None

    @property
    def ok(self) -> bool:
        return not self.violations


def certify_contraction(
    space: SemimetricSpace,
    T: ContractionMap,
    samples: int = 1000,
    seed: int = 0,
    tol: Tolerances = DEFAULT_TOL,
    exhaustive_limit: int = 200,
) -> CertificationReport:
    """Check ``d(T(x), T(y)) <= phi(d(x, y))`` on pairs.

    Finite domains up to ``exhaustive_limit`` points are checked on every
    pair; otherwise ``samples`` seeded random pairs are drawn from
    ``[-1, 1]^m``. A violation-free affine similitude of ratio ``r`` in a
    norm-based power-``p`` space with linear ``phi`` of factor at least
    ``r^p`` is certified analytically, since then ``d(T(x), T(y)) = r^p d(x, y)``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    violations = []
    if space.is_finite and len(space.domain) <= exhaustive_limit:
        n = len(space.domain)
        idx = np.arange(n)
        images = T.apply_codes(space, idx)
        for a in range(n):
            for b in range(a + 1, n):
                lhs = space._d_codes(images[a], images[b])
                rhs = T.phi(space._d_codes(a, b))
                if tol.exceeds(lhs, rhs):
                    labels = space.domain.labels
                    violations.append((labels[a], labels[b], lhs, rhs))
        exhaustive, checked, used_seed = True, n * (n - 1) // 2, None
    else:
        rng = np.random.default_rng(seed)
        if space.is_finite:
            xs = rng.integers(0, len(space.domain), size=samples)
            ys = rng.integers(0, len(space.domain), size=samples)
        else:
            m = space.domain.dim
            xs = rng.uniform(-1.0, 1.0, size=(samples, m))
            ys = rng.uniform(-1.0, 1.0, size=(samples, m))
        tx, ty = T.apply_codes(space, xs), T.apply_codes(space, ys)
        for a, b, ta, tb in zip(xs, ys, tx, ty):
            lhs = space._d_codes(ta, tb)
            rhs = T.phi(space._d_codes(a, b))
            if tol.exceeds(lhs, rhs):
                violations.append((space.decode(a), space.decode(b), lhs, rhs))
        exhaustive, checked, used_seed = False, samples, seed

    ratio = T.similitude_ratio() if space.is_euclidean else None
    if violations:
        cert = "failed"
    elif (
        ratio is not None
        and space.kind.norm_based
        and T.phi.kind == "linear"
        and T.phi.param >= ratio**space.kind.power * (1 - 1e-12)
    ):
        cert = "analytic"
    else:
        cert = "empirical"
    certified = dataclasses.replace(
        T,
        certification=cert,
        cert_seed=used_seed if cert == "empirical" else None,
        cert_samples=checked if cert == "empirical" else None,
    )
    return CertificationReport(cert, exhaustive, checked, used_seed, violations, ratio, certified)


# -- Picard iteration ---------------------------------------------------------


@dataclass(frozen=True)
class StoppingRule:
    tol: float = 1e-12
    max_iter: int = 100
    psi_cap: Optional[float] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("stopping tolerance must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class TraceRow:
    k: int
    x: Any
    step: float
    apriori: float
    aposteriori: float
    speed_bound: float = INF
    measured_error: float = math.nan


@dataclass
class IterationTrace:
    """Per-step record of a Picard run.

    ``reference`` is a longer continuation of the run used for the
    ``measured_error`` column; it is a reference, not the exact fixed point.
    """

    space: SemimetricSpace
    phi_cmp: ComparisonFunction
    psi_fn: Callable[[float], float]
    rows: list
    converged: bool
    diverged: bool
    fixed_point: Any
    reference: Any = None
    codes: list = field(default_factory=list, repr=False)

    @property
    def flagged(self) -> bool:
        return self.diverged

    def row(self, k: int) -> TraceRow:
        if not 1 <= k <= len(self.rows):
            raise IndexError(f"row {k} outside 1..{len(self.rows)}")
        return self.rows[k - 1]

    def to_records(self) -> list[dict]:
        return [dataclasses.asdict(r) for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow(
                [
                    r.k,
                    _point_text(r.x),
                    extreal.fmt(r.step),
                    extreal.fmt(r.apriori),
                    extreal.fmt(r.aposteriori),
                    extreal.fmt(r.speed_bound),
                    extreal.fmt(r.measured_error),
                ]
            )
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "columns": list(TRACE_COLUMNS),
            "converged": self.converged,
            "diverged": self.diverged,
            "fixed_point": _point_json(self.fixed_point),
            "reference": _point_json(self.reference),
            "rows": [
                {
                    "k": r.k,
                    "x": _point_json(r.x),
                    "step": extreal.to_json(r.step),
                    "apriori": extreal.to_json(r.apriori),
                    "aposteriori": extreal.to_json(r.aposteriori),
                    "speed_bound": extreal.to_json(r.speed_bound),
                    "measured_error": extreal.to_json(r.measured_error),
                }
                for r in self.rows
            ],
        }


def _point_text(x) -> str:
    if isinstance(x, tuple):
        return " ".join(extreal.fmt(c) for c in x)
    if isinstance(x, float):
        return extreal.fmt(x)
    return str(x)


def _point_json(x):
    return list(x) if isinstance(x, tuple) else x


def _apply_one(space, T, code):
    if space.is_finite:
        return T.apply_codes(space, np.array([code], dtype=np.intp))[0]
    return T.apply_codes(space, code[None, :])[0]


def picard_iterate(
    space: SemimetricSpace,
    T: ContractionMap,
    x1,
    stop: StoppingRule = StoppingRule(),
    reference: bool = True,
) -> IterationTrace:
    """Iterate ``x_{k+1} = T(x_k)`` from ``x_1 = x1``.

    Stops once the a posteriori bound ``psi(d(x_k, x_{k+1}))`` is at most
    ``stop.tol``. A run whose bound is ``inf`` at every step is returned
    with ``diverged=True`` rather than looping silently.

    With ``reference=True`` the run is continued (until the iterate is
    stationary in floating point, at most ``10 * max_iter`` further steps)
    to fill the ``measured_error`` and ``speed_bound`` columns.
    """
    psi_fn = make_psi(space.phi, T.phi, s_max=stop.psi_cap)
    x = space.encode(x1)
    rows, codes = [], []
    first_step = None
    converged = False
    for k in range(1, stop.max_iter + 1):
        nxt = _apply_one(space, T, x)
        step = space._d_codes(x, nxt)
        if first_step is None:
            first_step = step
        apost = psi_fn(step)
        apriori = psi_fn(comparison_iterate(T.phi, first_step, k - 1))
        rows.append(TraceRow(k, space.decode(x), step, apriori, apost))
        codes.append(x)
        if apost <= stop.tol:
            converged = True
            break
        x = nxt
    diverged = all(r.aposteriori == INF for r in rows)
    trace = IterationTrace(
        space, T.phi, psi_fn, rows, converged, diverged, space.decode(codes[-1]), codes=codes
    )
    if reference:
        ref = codes[-1]
        for _ in range(10 * stop.max_iter):
            nxt = _apply_one(space, T, ref)
            if space._d_codes(ref, nxt) == 0:
                break
            ref = nxt
        trace.reference = space.decode(ref)
        for i, r in enumerate(rows):
            r.measured_error = space._d_codes(codes[i], ref)
            if i > 0:
                r.speed_bound = T.phi(space._d_codes(codes[i - 1], ref))
    return trace


@dataclass(frozen=True)
class ErrorBounds:
    apriori_from_l: float
    speed: float
    measured: float


def error_bounds(
    trace: IterationTrace,
    k: int,
    l: int,
    phi_cmp: Optional[ComparisonFunction] = None,
    psi_fn: Optional[Callable[[float], float]] = None,
) -> ErrorBounds:
    """Bounds on ``d(x_k, x0)`` from the information available at step ``l``.

    ``apriori_from_l = psi(phi^(k-l)(d(x_l, x_{l+1})))``; ``l = 1`` is the a
    priori estimate and ``l = k`` the a posteriori one. ``speed`` is
    ``phi(d(x_{k-1}, x_ref))`` (``inf`` for ``k = 1``). ``measured`` is
    ``d(x_k, x_ref)``; both use the trace's reference point.
    """
    if not 1 <= l <= k <= len(trace.rows):
        raise IndexError(f"need 1 <= l <= k <= {len(trace.rows)}, got l={l}, k={k}")
    phi_cmp = phi_cmp or trace.phi_cmp
    psi_fn = psi_fn or trace.psi_fn
    bound = psi_fn(comparison_iterate(phi_cmp, trace.row(l).step, k - l))
    space = trace.space
    if trace.reference is None:
        ref = trace.codes[-1]
    else:
        ref = space.encode(trace.reference)
    measured = space._d_codes(trace.codes[k - 1], ref)
    speed = INF if k == 1 else phi_cmp(space._d_codes(trace.codes[k - 2], ref))
    return ErrorBounds(bound, speed, measured)
