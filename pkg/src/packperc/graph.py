"""Adjacency graphs of packings and the grid index used to build them."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import BOX, DISK, Packing, _box_linf_distance, _disk_linf_distance, distances_from, minkowski_intersects


class SpatialIndex:
    """Uniform grid over axis-aligned boxes keyed by integer cell coordinates.

    Every registered box is entered in all cells it meets, so two closed boxes
    that intersect always share at least one cell.
    """

    def __init__(self, lo: np.ndarray, hi: np.ndarray, cell: float, ids: np.ndarray | None = None):
        if not cell > 0:
            raise ValueError("cell size must be positive")
        self.cell = float(cell)
        self.ids = np.arange(len(lo)) if ids is None else np.asarray(ids)
        owner, cells = self.cells_of(lo, hi)
        self.owner = self.ids[owner]
        self.cells = cells

    def cells_of(self, lo: np.ndarray, hi: np.ndarray):
        """Expand boxes to (row index, cell coordinate) incidence pairs."""
        c0 = np.floor(np.asarray(lo) / self.cell).astype(np.int64)
        c1 = np.floor(np.asarray(hi) / self.cell).astype(np.int64)
        span = c1 - c0 + 1
        d = c0.shape[1]
        owners, cells = [], []
        for off in np.ndindex(*span.max(axis=0)):
            off = np.asarray(off)
            m = np.all(off < span, axis=1)
            idx = np.flatnonzero(m)
            owners.append(idx)
            cells.append(c0[idx] + off)
        if not owners:
            return np.empty(0, np.int64), np.empty((0, d), np.int64)
        return np.concatenate(owners), np.concatenate(cells)

    def query_pairs(self, lo: np.ndarray, hi: np.ndarray, ids: np.ndarray) -> np.ndarray:
        """All (query id, registered id) pairs sharing a cell."""
        qowner, qcells = self.cells_of(lo, hi)
        if len(qowner) == 0 or len(self.owner) == 0:
            return np.empty((0, 2), np.int64)
        allcells = np.concatenate([self.cells, qcells])
        _, key = np.unique(allcells, axis=0, return_inverse=True)
        key = key.ravel()
        rkey, qkey = key[: len(self.cells)], key[len(self.cells):]
        order = np.argsort(rkey, kind="stable")
        rsorted = rkey[order]
        start = np.searchsorted(rsorted, qkey, "left")
        stop = np.searchsorted(rsorted, qkey, "right")
        counts = stop - start
        total = int(counts.sum())
        if total == 0:
            return np.empty((0, 2), np.int64)
        qrep = np.repeat(np.arange(len(qkey)), counts)
        offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        ridx = order[np.repeat(start, counts) + offs]
        return np.column_stack([np.asarray(ids)[qowner[qrep]], self.owner[ridx]])


def candidate_pairs(P: Packing, tol: float) -> np.ndarray:
    """Pairs ``i < j`` whose bounding boxes, each inflated by ``tol * own diameter``, meet.

    Shapes are bucketed by power-of-two size classes and each class gets its
    own grid whose cells are at least as large as its members, so a single
    pass handles packings whose sizes span many orders of magnitude.
    """
    n = len(P)
    if n < 2:
        return np.empty((0, 2), np.int64)
    lo, hi = P.bboxes
    infl = (tol * P.diameters)[:, None]
    lo, hi = lo - infl, hi + infl
    extent = (hi - lo).max(axis=1)
    emin = extent.min()
    level = np.floor(np.log2(extent / emin)).astype(np.int64)
    out = []
    levels = np.unique(level)
    for b in levels:
        mb = np.flatnonzero(level == b)
        index = SpatialIndex(lo[mb], hi[mb], extent[mb].max(), ids=mb)
        mq = np.flatnonzero(level <= b)
        pairs = index.query_pairs(lo[mq], hi[mq], mq)
        out.append(pairs)
    pairs = np.concatenate(out)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    pairs.sort(axis=1)
    codes = np.unique(pairs[:, 0] * np.int64(n) + pairs[:, 1])
    return np.column_stack([codes // n, codes % n])


@dataclass(eq=False)
class AdjacencyGraph:
    """Undirected simple graph over shape indices.

    ``edges`` is an ``(E, 2)`` array with ``i < j`` sorted lexicographically;
    ``corner[e]`` marks contacts of boxes that touch only in a point (or, in
    higher dimension, in a face of dimension below ``d - 1``).
    """

    n: int
    edges: np.ndarray
    corner: np.ndarray | None = None
    tol: float = 0.0
    packing: Packing | None = field(default=None, repr=False)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
            e = np.sort(e, axis=1)
            order = np.lexsort((e[:, 1], e[:, 0]))
            e = e[order]
            corner = np.zeros(len(e), bool) if self.corner is None else np.asarray(self.corner, bool)[order]
            keep = np.ones(len(e), bool)
            keep[1:] = np.any(e[1:] != e[:-1], axis=1)
            e, corner = e[keep], corner[keep]
        else:
            corner = np.zeros(0, bool)
        self.edges = e
        self.corner = corner

    @classmethod
    def from_edges(cls, n: int, edges, corner=None) -> "AdjacencyGraph":
        return cls(n, np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges), corner)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(indptr, neighbour, edge id, corner flag) in compressed row form."""
        e = self.edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        eid = np.concatenate([np.arange(len(e)), np.arange(len(e))])
        order = np.lexsort((dst, src))
        src, dst, eid = src[order], dst[order], eid[order]
        indptr = np.zeros(self.n + 1, np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return indptr, dst.astype(np.int64), eid.astype(np.int64), self.corner[eid]

    def degree(self) -> np.ndarray:
        indptr = self.csr[0]
        return np.diff(indptr)

    def neighbors(self, i: int) -> np.ndarray:
        indptr, nbr, _, _ = self.csr
        return nbr[indptr[i]:indptr[i + 1]]

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in self.edges}

    def to_csv(self) -> str:
        buf = io.StringIO()
        for a, b in self.edges:
            buf.write(f"{a},{b}\n")
        return buf.getvalue()


def _pair_distances(P: Packing, pairs: np.ndarray) -> np.ndarray:
    i, j = pairs[:, 0], pairs[:, 1]
    kinds = P.kinds
    dist = np.full(len(pairs), np.nan)
    dd = (kinds[i] == DISK) & (kinds[j] == DISK)
    if dd.any():
        c, r = P.disk_arrays
        delta = c[j[dd]] - c[i[dd]]
        dist[dd] = _disk_linf_distance(delta[:, 0], delta[:, 1], r[i[dd]] + r[j[dd]])
    bb = (kinds[i] == BOX) & (kinds[j] == BOX)
    if bb.any():
        lo, hi = P.bboxes
        dist[bb] = _box_linf_distance(lo[i[bb]], hi[i[bb]], lo[j[bb]], hi[j[bb]])
    return dist


def build_graph(P: Packing, tol: float = 1e-9) -> AdjacencyGraph:
    """Adjacency graph of a packing.

    ``(i, j)`` is an edge iff ``set_distance(s_i, s_j) <= tol * max(diam_i, diam_j)``.
    """
    pairs = candidate_pairs(P, tol)
    if len(pairs) == 0:
        return AdjacencyGraph(len(P), np.empty((0, 2), np.int64), None, tol, P)
    thresh = tol * np.maximum(P.diameters[pairs[:, 0]], P.diameters[pairs[:, 1]])
    dist = _pair_distances(P, pairs)
    keep = dist <= thresh
    for k in np.flatnonzero(np.isnan(dist)):
        keep[k] = minkowski_intersects(P[int(pairs[k, 0])], P[int(pairs[k, 1])], float(thresh[k]))
    pairs, thresh = pairs[keep], thresh[keep]
    corner = np.zeros(len(pairs), bool)
    kinds = P.kinds
    bb = (kinds[pairs[:, 0]] == BOX) & (kinds[pairs[:, 1]] == BOX)
    if bb.any():
        lo, hi = P.bboxes
        i, j = pairs[bb, 0], pairs[bb, 1]
        overlap = np.minimum(hi[i], hi[j]) - np.maximum(lo[i], lo[j])
        solid = (overlap > thresh[bb, None]).sum(axis=1)
        corner[bb] = solid < P.dimension - 1
    return AdjacencyGraph(len(P), pairs, corner, tol, P)


def brute_force_graph(P: Packing, tol: float = 1e-9) -> AdjacencyGraph:
    """O(n^2) reference construction (no spatial index)."""
    from .geometry import set_distance

    n = len(P)
    edges = [
        (a, b)
        for a in range(n)
        for b in range(a + 1, n)
        if set_distance(P[a], P[b]) <= tol * max(P.diameters[a], P.diameters[b])
    ]
    return AdjacencyGraph(n, np.asarray(edges, np.int64).reshape(-1, 2), None, tol, P)


def shells(P: Packing, s0: int, ell0: float, m0: int = 0):
    """Partition the shapes other than ``s0`` by distance from ``s0``.

    Returns ``(near, shells)`` where ``near`` holds indices with
    ``d(s0, s) <= m0 * ell0`` and ``shells[m]`` (``m >= m0``) holds those with
    ``m * ell0 < d(s0, s) <= (m + 1) * ell0``.
    """
    if not ell0 > 0:
        raise ValueError("shell width must be positive")
    d = distances_from(P, s0)
    near: list[int] = []
    out: dict[int, list[int]] = {}
    for j, dj in enumerate(d):
        if j == s0:
            continue
        if dj <= m0 * ell0:
            near.append(j)
            continue
        m = max(int(math.ceil(dj / ell0)) - 1, m0)
        # guard against rounding at shell boundaries
        while dj <= m * ell0 and m > m0:
            m -= 1
        while dj > (m + 1) * ell0:
            m += 1
        out.setdefault(m, []).append(j)
    return near, out
