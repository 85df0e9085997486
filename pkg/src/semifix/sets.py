"""Finite point sets as computable stand-ins for nonempty compact sets.

Provides the Hausdorff-Pompeiu distance, unions, greedy epsilon-nets and
grid coarsening with a certified distance bound.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from . import extreal
from .semimetric import DomainError, SemimetricSpace

__all__ = [
    "PointSet",
    "NetCertificate",
    "hausdorff_distance",
    "directed_distance",
    "union",
    "epsilon_net",
    "coarsen",
    "worker_count",
]


def worker_count() -> int:
    """Parallelism cap from ``SEMIFIX_THREADS`` (default: all cores)."""
    raw = os.environ.get("SEMIFIX_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _first_occurrence(keys: np.ndarray) -> np.ndarray:
    """Indices of first occurrences of exact duplicates (bitwise for rows)."""
    if keys.ndim == 2:
        keys = np.ascontiguousarray(keys)
        keys = keys.view(np.dtype((np.void, keys.dtype.itemsize * keys.shape[1])))[:, 0]
    _, idx = np.unique(keys, return_index=True)
    return np.sort(idx)


def _dedup(space: SemimetricSpace, data: np.ndarray, tol: float):
    """Merge points within ``tol``; returns ``(data, kdtree or None)``."""
    first = _first_occurrence(data)
    if len(first) < len(data):
        data = data[first]
    if tol <= 0 or len(data) < 2:
        return data, None
    if space.is_euclidean and space.kind.norm_based:
        radius = space.kind.to_norm(tol) * (1 + 1e-9)
        tree = cKDTree(data)
        pairs = tree.query_pairs(radius, output_type="ndarray")
        if len(pairs) == 0:
            return data, tree
        close = space.kind.from_sq_norm(np.sum((data[pairs[:, 0]] - data[pairs[:, 1]]) ** 2, axis=1))
        pairs = pairs[close <= tol]
        earlier: dict[int, list[int]] = {}
        for i, j in pairs:
            i, j = (int(i), int(j)) if i < j else (int(j), int(i))
            earlier.setdefault(j, []).append(i)
    else:
        dm = space.pairwise(data, data)
        earlier = {j: [i for i in range(j) if dm[i, j] <= tol] for j in range(len(data))}
    keep = np.ones(len(data), dtype=bool)
    for j in range(len(data)):
        if any(keep[i] for i in earlier.get(j, ())):
            keep[j] = False
    return data[keep], None


class PointSet:
    """Nonempty finite set of points of one semimetric space.

    Points closer than ``dedup_tol`` are merged at construction, keeping
    the first occurrence. Storage order is preserved otherwise; it only
    matters for deterministic tie-breaking (e.g. greedy nets).
    """

    __slots__ = ("space", "data", "dedup_tol", "_tree")

    def __init__(self, space: SemimetricSpace, points, dedup_tol: Optional[float] = None):
        data = space.encode_many(list(points) if not isinstance(points, np.ndarray) else points)
        self._init(space, data, dedup_tol, dedupe=True)

    @classmethod
    def from_encoded(cls, space, data, dedup_tol=None, dedupe=True) -> "PointSet":
        obj = cls.__new__(cls)
        obj._init(space, np.asarray(data), dedup_tol, dedupe)
        return obj

    def _init(self, space, data, dedup_tol, dedupe):
        if len(data) == 0:
            raise ValueError("point sets must be nonempty")
        tol = space.default_dedup_tol if dedup_tol is None else extreal.ext(dedup_tol)
        tree = None
        if dedupe:
            data, tree = _dedup(space, data, tol)
        data = np.array(data, copy=True)
        data.setflags(write=False)
        self.space = space
        self.data = data
        self.dedup_tol = tol
        self._tree = tree

    def __len__(self):
        return len(self.data)

    def __iter__(self):
        return (self.space.decode(c) for c in self.data)

    def __repr__(self):
        pts = list(self)
        shown = pts if len(pts) <= 6 else pts[:6] + ["..."]
        return f"PointSet({shown}, n={len(pts)})"

    @property
    def points(self) -> list:
        return list(self)

    def subset(self, mask) -> "PointSet":
        return PointSet.from_encoded(self.space, self.data[mask], self.dedup_tol, dedupe=False)

    def kdtree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.data)
        return self._tree

    def canonical(self) -> np.ndarray:
        """Storage-order independent view, for set equality."""
        if self.data.ndim == 1:
            return np.sort(self.data)
        return self.data[np.lexsort(self.data.T[::-1])]

    def same_points(self, other: "PointSet") -> bool:
        return len(self) == len(other) and np.array_equal(self.canonical(), other.canonical())

    def to_json(self) -> list:
        if self.space.is_finite:
            return list(self)
        if self.space.domain.dim == 1:
            return [float(c[0]) for c in self.data]
        return [[float(v) for v in c] for c in self.data]


def _check_same(A: PointSet, B: PointSet):
    if A.space is not B.space and A.space.domain != B.space.domain:
        raise DomainError("point sets live in different domains")


def directed_distance(space: SemimetricSpace, A: PointSet, B: PointSet) -> float:
    """``max_{a in A} min_{b in B} d(a, b)``."""
    if space.is_finite:
        return float(space.domain.table[np.ix_(A.data, B.data)].min(axis=1).max())
    if space.kind.norm_based:
        # nearest under |.| is nearest under any increasing function of |.|
        _, idx = B.kdtree().query(A.data, k=1, workers=worker_count())
        diff = A.data - B.data[idx]
        return float(space.kind.from_sq_norm(np.einsum("ij,ij->i", diff, diff)).max())
    best = 0.0
    for start in range(0, len(A), 256):
        block = space.pairwise(A.data[start : start + 256], B.data)
        best = max(best, float(block.min(axis=1).max()))
    return best


def hausdorff_distance(space: SemimetricSpace, A: PointSet, B: PointSet) -> float:
    """Hausdorff-Pompeiu distance of two finite sets.

    For finite sets the infimum over strict-ball covers equals the larger
    of the two directed max-min distances, which is what is computed.
    """
    _check_same(A, B)
    if A is B:
        return 0.0
    return max(directed_distance(space, A, B), directed_distance(space, B, A))


def union(A: PointSet, B: PointSet) -> PointSet:
    _check_same(A, B)
    data = np.concatenate([A.data, B.data])
    return PointSet.from_encoded(A.space, data, max(A.dedup_tol, B.dedup_tol))


@dataclass(frozen=True)
class NetCertificate:
    """Greedy epsilon-net of a point set with per-point witnesses."""

    eps: float
    covered: PointSet
    centers: np.ndarray  # indices into covered
    owner: np.ndarray  # for each covered point, index of its centre
    witness: np.ndarray  # d(point, owner)

    @property
    def net_points(self) -> PointSet:
        return self.covered.subset(self.centers)

    @property
    def assignment(self) -> list:
        """``(point, centre, distance)`` triples in storage order."""
        decode = self.covered.space.decode
        data = self.covered.data
        return [
            (decode(data[i]), decode(data[self.owner[i]]), float(self.witness[i]))
            for i in range(len(data))
        ]

    def verify(self) -> bool:
        """Re-scan: every point strictly within ``eps`` of some centre."""
        if not np.all(self.witness < self.eps):
            return False
        space = self.covered.space
        dm = space.pairwise(self.covered.data, self.covered.data[self.centers])
        return bool(np.all(dm.min(axis=1) < self.eps))

    def to_json(self) -> dict:
        space = self.covered.space
        enc = (lambda p: list(p) if isinstance(p, tuple) else p) if not space.is_finite else (lambda p: p)
        return {
            "eps": extreal.to_json(self.eps),
            "centers": self.net_points.to_json(),
            "assignment": [
                {"point": enc(p), "center": enc(c), "distance": d} for p, c, d in self.assignment
            ],
        }


def epsilon_net(space: SemimetricSpace, H: PointSet, eps: float) -> NetCertificate:
    """Greedy net: the first uncovered point in storage order becomes a centre."""
    eps = extreal.ext(eps)
    if eps <= 0:
        raise ValueError("eps must be > 0")
    n = len(H)
    covered = np.zeros(n, dtype=bool)
    owner = np.full(n, -1, dtype=np.intp)
    witness = np.full(n, np.inf)
    centers = []
    while not covered.all():
        i = int(np.argmin(covered))
        centers.append(i)
        dists = space.pairwise(H.data, H.data[i : i + 1])[:, 0]
        newly = ~covered & (dists < eps)
        owner[newly] = i
        witness[newly] = dists[newly]
        covered |= newly
    return NetCertificate(eps, H, np.array(centers, dtype=np.intp), owner, witness)


def coarsen(space: SemimetricSpace, H: PointSet, cell: float):
    """Snap points to centres of an axis-aligned grid of side ``cell``.

    Returns the snapped set and an upper bound on its Hausdorff-Pompeiu
    distance to ``H``: the semimetric value of half the cell diagonal,
    widened by the floating-point rounding of the snap.
    """
    if not space.is_euclidean:
        raise TypeError("coarsening needs a Euclidean domain")
    if not space.kind.norm_based:
        raise TypeError("coarsening bound needs a norm-based semimetric kind")
    if not cell > 0:
        raise ValueError("cell must be > 0")
    keys = np.floor(H.data / cell).astype(np.int64)
    keys = keys[_first_occurrence(keys)]
    snapped = (keys + 0.5) * cell
    m = space.domain.dim
    eps = np.finfo(float).eps
    # division, floor and the centre product each round relative to |x|, not to cell
    half = cell / 2.0 + 4 * eps * (float(np.abs(H.data).max()) + cell)
    bound = space.kind.from_norm(half * math.sqrt(m)) * (1 + 8 * eps)
    return PointSet.from_encoded(space, snapped, H.dedup_tol, dedupe=False), float(bound)
