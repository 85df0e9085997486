"""Iterated function systems and the Hutchinson set map.

Iterates ``H_{k+1} = T_1(H_k) u ... u T_n(H_k)`` on finite point sets,
optionally snapping each iterate to a grid to keep the sets small. Every
coarsening step carries a certified Hausdorff-Pompeiu slack that is
accumulated and reported next to the error bounds.
"""

from __future__ import annotations

import csv
import dataclasses
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import extreal
from .extreal import INF
from .fixpoint import ContractionMap, certify_contraction, make_psi
from .semimetric import ComparisonFunction, SemimetricSpace, comparison_iterate
from .sets import PointSet, coarsen, hausdorff_distance, worker_count

__all__ = [
    "IFS",
    "FractalStop",
    "FractalRow",
    "FractalRun",
    "StabilityTable",
    "DivergentRunError",
    "hutchinson_step",
    "generate_fractal",
    "invariance_residual",
    "stability_run",
    "shared_comparison",
    "RUN_COLUMNS",
]

RUN_COLUMNS = ("k", "points", "step", "apriori", "aposteriori", "coarsen_slack")


class DivergentRunError(RuntimeError):
    """A fractal run whose psi bound stayed infinite."""


def shared_comparison(phis: Sequence[ComparisonFunction]) -> ComparisonFunction:
    """Pointwise maximum of comparison functions.

    A phi_i-contraction is a phi-contraction for every phi >= phi_i, so
    the maximum serves the whole system.
    """
    phis = list(phis)
    first = phis[0]
    if all(p == first for p in phis):
        return first
    kinds = {p.kind for p in phis}
    if kinds == {"linear"}:
        return ComparisonFunction.linear(max(p.param for p in phis))
    if kinds == {"rational"}:
        return ComparisonFunction.rational(min(p.param for p in phis))
    members = tuple(phis)
    return ComparisonFunction.custom(
        lambda t: max(p(t) for p in members),
        name="max(" + ", ".join(p.describe() for p in members) + ")",
    )


@dataclass(frozen=True)
class IFS:
    """A system of phi-contractions sharing one space and one comparison function.

    Maps declared with different comparison functions are re-declared
    against their pointwise maximum. Every map is certified at
    construction (analytically where possible, otherwise on seeded
    samples); a failed certification raises ``ValueError``.
    """

    space: SemimetricSpace
    maps: tuple
    phi: Optional[ComparisonFunction] = None
    cert_samples: int = 1000
    cert_seed: int = 0

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise ValueError("an IFS needs at least one map")
        phi = self.phi or shared_comparison([m.phi for m in maps])
        certified = []
        for i, m in enumerate(maps):
            m = dataclasses.replace(m, phi=phi)
            if m.certification not in ("analytic", "empirical"):
                report = certify_contraction(self.space, m, self.cert_samples, self.cert_seed)
                if not report.ok:
                    x, y, lhs, rhs = report.violations[0]
                    raise ValueError(
                        f"map {i} is not a {phi.describe()}-contraction: "
                        f"d(T{x!r}, T{y!r}) = {lhs!r} > {rhs!r}"
                    )
                m = report.certified_map
            certified.append(m)
        object.__setattr__(self, "maps", tuple(certified))
        object.__setattr__(self, "phi", phi)

    def __len__(self):
        return len(self.maps)


def hutchinson_step(space: SemimetricSpace, ifs: IFS, H: PointSet) -> PointSet:
    """Union of the images of ``H`` under every map of the system."""
    images = [m.apply_codes(space, H.data) for m in ifs.maps]
    return PointSet.from_encoded(space, np.concatenate(images), H.dedup_tol)


def invariance_residual(space: SemimetricSpace, ifs: IFS, H: PointSet) -> float:
    """``D(H, T(H))``; zero exactly when ``H`` is invariant."""
    return hausdorff_distance(space, H, hutchinson_step(space, ifs, H))


@dataclass(frozen=True)
class FractalStop:
    tol: float = 1e-4
    max_iter: int = 60
    psi_cap: Optional[float] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("stopping tolerance must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class FractalRow:
    k: int
    H: Optional[PointSet]
    points: int
    step: float  # D(H_k, T(H_k)), before any coarsening of the image
    apriori: float
    aposteriori: float
    coarsen_slack: float  # accumulated coarsening certificates embodied in H_k


@dataclass
class FractalRun:
    """Rows of a Hutchinson iteration plus the final (approximate) attractor.

    ``converged`` means ``aposteriori + coarsen_slack <= tol`` was reached.
    ``stationary`` means the coarsened iteration hit an exact fixed set of
    the snapped map, after which further steps change nothing.
    """

    space: SemimetricSpace
    ifs: IFS
    rows: list
    attractor: PointSet
    converged: bool
    diverged: bool
    stationary: bool
    cell: Optional[float]
    slack_per_step: float
    tol: float

    @property
    def flagged(self) -> bool:
        return self.diverged

    @property
    def total_slack(self) -> float:
        return self.rows[-1].coarsen_slack if self.rows else 0.0

    @property
    def residual(self) -> float:
        return invariance_residual(self.space, self.ifs, self.attractor)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for r in self.rows:
            w.writerow(
                [
                    r.k,
                    r.points,
                    extreal.fmt(r.step),
                    extreal.fmt(r.apriori),
                    extreal.fmt(r.aposteriori),
                    extreal.fmt(r.coarsen_slack),
                ]
            )
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "iterations": len(self.rows),
            "converged": self.converged,
            "diverged": self.diverged,
            "stationary": self.stationary,
            "tol": self.tol,
            "cell": self.cell,
            "attractor_points": len(self.attractor),
            "residual": extreal.to_json(self.residual),
            "total_slack": extreal.to_json(self.total_slack),
            "final_aposteriori": extreal.to_json(self.rows[-1].aposteriori),
        }


def generate_fractal(
    space: SemimetricSpace,
    ifs: IFS,
    H1: PointSet,
    stop: FractalStop = FractalStop(),
    cell: Optional[float] = None,
    keep_sets: bool = True,
) -> FractalRun:
    """Iterate the Hutchinson map from ``H1`` with psi-based stopping.

    Row ``k`` records ``step = D(H_k, T(H_k))`` with the image taken
    before coarsening, so the a posteriori bound ``psi(step)`` holds for
    ``H_k`` as stored. The a priori bound ``psi(phi^(k-1)(step_1))`` refers
    to the exact orbit; ``coarsen_slack`` is the accumulated grid slack
    separating ``H_k`` from it. Iteration stops when
    ``aposteriori + coarsen_slack <= tol``.
    """
    if cell is not None and not cell > 0:
        raise ValueError("cell must be > 0")
    psi_fn = make_psi(space.phi, ifs.phi, s_max=stop.psi_cap)
    H = H1
    rows = []
    slack = 0.0
    per_step = 0.0
    first_step = None
    converged = stationary = False
    for k in range(1, stop.max_iter + 1):
        image = hutchinson_step(space, ifs, H)
        step = hausdorff_distance(space, H, image)
        if first_step is None:
            first_step = step
        apost = psi_fn(step)
        apriori = psi_fn(comparison_iterate(ifs.phi, first_step, k - 1))
        rows.append(FractalRow(k, H if keep_sets else None, len(H), step, apriori, apost, slack))
        last = H
        if apost + slack <= stop.tol:
            converged = True
            break
        if cell is not None:
            nxt, per_step = coarsen(space, image, cell)
            slack += per_step
            if nxt.same_points(H):
                stationary = True
                break
        else:
            nxt = image
        H = nxt
    if not keep_sets:
        rows[-1].H = last
    diverged = all(r.aposteriori == INF for r in rows)
    return FractalRun(
        space, ifs, rows, last, converged, diverged, stationary, cell, per_step, stop.tol
    )


@dataclass
class StabilityTable:
    rows: list  # (j, D(attractor_j, attractor_0))
    runs: list = field(repr=False)
    limit_run: Optional[FractalRun] = field(default=None, repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("j", "distance"))
        for j, dist in self.rows:
            w.writerow([j, extreal.fmt(dist)])
        return buf.getvalue()


def stability_run(
    space: SemimetricSpace,
    ifs_seq: Sequence[IFS],
    ifs_0: IFS,
    H1: PointSet,
    stop: FractalStop = FractalStop(),
    cell: Optional[float] = None,
    indices: Optional[Sequence[int]] = None,
) -> StabilityTable:
    """Distances from each system's attractor to the limit system's attractor.

    All systems run with identical settings; runs execute concurrently
    (capped by ``SEMIFIX_THREADS``). ``indices`` label the rows and default
    to ``1..len(ifs_seq)``.
    """
    ifs_seq = list(ifs_seq)
    indices = list(indices) if indices is not None else list(range(1, len(ifs_seq) + 1))
    if len(indices) != len(ifs_seq):
        raise ValueError("indices and systems differ in length")
    for s in ifs_seq:
        if s.phi != ifs_0.phi:
            raise ValueError("all systems must share the comparison function of the limit system")
        if s.space.domain != space.domain or ifs_0.space.domain != space.domain:
            raise ValueError("all systems must share the space")

    def run(system):
        return generate_fractal(space, system, H1, stop, cell, keep_sets=False)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        runs = list(pool.map(run, [ifs_0] + ifs_seq))
    bad = [i for i, r in enumerate(runs) if r.diverged]
    if bad:
        which = ["limit" if i == 0 else str(indices[i - 1]) for i in bad]
        raise DivergentRunError(f"psi bound stayed infinite for system(s) {', '.join(which)}")
    limit = runs[0]
    rows = [
        (j, hausdorff_distance(space, r.attractor, limit.attractor))
        for j, r in zip(indices, runs[1:])
    ]
    return StabilityTable(rows, runs[1:], limit)
