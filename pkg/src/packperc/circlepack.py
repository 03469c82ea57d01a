"""Circle packings of finite triangulations.

Rotation systems list neighbours in counter-clockwise order.  A face walk
arriving at ``v`` from ``u`` continues to the neighbour that precedes ``u``
in the rotation at ``v``, which keeps the face on the left.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Disk, Packing

TWO_PI = 2.0 * math.pi


class TriangulationError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(msg)
        self.residual = residual


class LayoutError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# planar maps and faces

def face_walks(rotation: list[list[int]]) -> list[list[int]]:
    """Faces of a planar map as vertex cycles, each with the face on its left."""
    pos = [{w: k for k, w in enumerate(nb)} for nb in rotation]
    used = set()
    faces = []
    for u, nb in enumerate(rotation):
        for v in nb:
            if (u, v) in used:
                continue
            walk = []
            a, b = u, v
            while (a, b) not in used:
                used.add((a, b))
                walk.append(a)
                rot = rotation[b]
                c = rot[(pos[b][a] - 1) % len(rot)]
                a, b = b, c
            faces.append(walk)
    return faces


@dataclass
class PlanarMap:
    """A simple graph with a counter-clockwise rotation system."""

    rotation: list[list[int]]

    def __post_init__(self):
        self.rotation = [list(map(int, nb)) for nb in self.rotation]
        for v, nb in enumerate(self.rotation):
            if len(set(nb)) != len(nb) or v in nb:
                raise TriangulationError(f"vertex {v} has a loop or multiple edge")
            for w in nb:
                if v not in self.rotation[w]:
                    raise TriangulationError(f"edge ({v}, {w}) is not symmetric")

    @property
    def n(self) -> int:
        return len(self.rotation)

    def degree(self, v: int) -> int:
        return len(self.rotation[v])

    def edges(self) -> list[tuple[int, int]]:
        return [(v, w) for v, nb in enumerate(self.rotation) for w in nb if v < w]

    def faces(self) -> list[list[int]]:
        return face_walks(self.rotation)

    def is_connected(self) -> bool:
        if self.n == 0:
            return False
        seen = {0}
        q = [0]
        while q:
            v = q.pop()
            for w in self.rotation[v]:
                if w not in seen:
                    seen.add(w)
                    q.append(w)
        return len(seen) == self.n

    @classmethod
    def from_embedding(cls, points, edges) -> "PlanarMap":
        """Rotation system of a straight-line drawing."""
        pts = np.asarray(points, float)
        nbrs = [[] for _ in range(len(pts))]
        for a, b in edges:
            nbrs[a].append(b)
            nbrs[b].append(a)
        rot = []
        for v, nb in enumerate(nbrs):
            ang = [math.atan2(*(pts[w] - pts[v])[::-1]) for w in nb]
            rot.append([w for _, w in sorted(zip(ang, nb))])
        return cls(rot)


def random_planar_map(n: int, extra: int, seed: int) -> PlanarMap:
    """Connected simple planar map: a random spanning tree of a Delaunay
    triangulation of random points plus ``extra`` further Delaunay edges."""
    from scipy.spatial import Delaunay

    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    tri = Delaunay(pts)
    dedges = set()
    for s in tri.simplices:
        for i in range(3):
            a, b = sorted((int(s[i]), int(s[(i + 1) % 3])))
            dedges.add((a, b))
    dedges = sorted(dedges)
    order = rng.permutation(len(dedges))
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree, rest = [], []
    for k in order:
        a, b = dedges[k]
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            tree.append((a, b))
        else:
            rest.append((a, b))
    return PlanarMap.from_embedding(pts, tree + rest[:extra])


# ---------------------------------------------------------------------------
# triangulations

@dataclass(eq=False)
class Triangulation:
    """A triangulated sphere or disk given by counter-clockwise faces.

    ``boundary`` is the outer cycle of a disk (counter-clockwise, interior on
    the left) or empty for a closed sphere.
    """

    n: int
    faces: np.ndarray
    boundary: list[int] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        self._check()

    def _check(self):
        F = self.faces
        if F.size and (F.min() < 0 or F.max() >= self.n):
            raise TriangulationError("face references an unknown vertex")
        if np.any((F[:, 0] == F[:, 1]) | (F[:, 1] == F[:, 2]) | (F[:, 0] == F[:, 2])):
            raise TriangulationError("degenerate face")
        half = {}
        for f, (a, b, c) in enumerate(F):
            for e in ((a, b), (b, c), (c, a)):
                e = (int(e[0]), int(e[1]))
                if e in half:
                    raise TriangulationError(f"directed edge {e} used twice (inconsistent orientation)")
                half[e] = f
        self._half = half
        outer = {(b, a) for (a, b) in half if (b, a) not in half}
        nxt = {}
        for a, b in outer:
            if a in nxt:
                raise TriangulationError(f"boundary is pinched at vertex {a}")
            nxt[a] = b
        if outer:
            start = next(iter(sorted(nxt)))
            cyc = [start]
            while nxt[cyc[-1]] != start:
                cyc.append(nxt[cyc[-1]])
                if len(cyc) > len(nxt):
                    raise TriangulationError("boundary is not a single cycle")
            if len(cyc) != len(nxt):
                raise TriangulationError("boundary is not a single cycle")
            # boundary edges (b, a) are missing: interior lies on the left of a->b reversed
            cyc = cyc[::-1]
            if self.boundary:
                k = cyc.index(self.boundary[0]) if self.boundary[0] in cyc else -1
                if k < 0 or cyc[k:] + cyc[:k] != list(self.boundary):
                    raise TriangulationError("declared boundary does not match the faces")
            self.boundary = [int(v) for v in cyc]
        elif self.boundary:
            raise TriangulationError("closed triangulation cannot have a boundary")
        used = np.zeros(self.n, bool)
        used[F.ravel()] = True
        if not used.all():
            raise TriangulationError(f"vertex {int(np.flatnonzero(~used)[0])} lies on no face")
        self.rotation  # builds and checks fans

    @classmethod
    def from_faces(cls, faces, n: int | None = None, **meta) -> "Triangulation":
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        return cls(int(faces.max()) + 1 if n is None else n, faces, [], meta)

    @property
    def is_closed(self) -> bool:
        return not self.boundary

    @property
    def is_boundary(self) -> np.ndarray:
        flags = np.zeros(self.n, bool)
        flags[self.boundary] = True
        return flags

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.is_boundary)

    @property
    def rotation(self) -> list[list[int]]:
        """Counter-clockwise neighbours per vertex; for boundary vertices the
        fan runs from one boundary neighbour to the other."""
        if getattr(self, "_rotation", None) is not None:
            return self._rotation
        # around v, face (v, a, b) means b follows a counter-clockwise
        succ = [dict() for _ in range(self.n)]
        for a, b, c in self.faces:
            for v, x, y in ((a, b, c), (b, c, a), (c, a, b)):
                if x in succ[v]:
                    raise TriangulationError(f"vertex {v} is not a manifold point")
                succ[v][int(x)] = int(y)
        rot = []
        bset = set(self.boundary)
        for v in range(self.n):
            s = succ[v]
            if v in bset:
                targets = set(s.values())
                starts = [x for x in s if x not in targets]
                if len(starts) != 1:
                    raise TriangulationError(f"boundary vertex {v} has a broken fan")
                x = starts[0]
                fan = [x]
                while x in s:
                    x = s[x]
                    fan.append(x)
                if len(fan) != len(s) + 1:
                    raise TriangulationError(f"boundary vertex {v} has a broken fan")
            else:
                x = next(iter(s))
                fan = [x]
                while s[fan[-1]] != x:
                    fan.append(s[fan[-1]])
                    if len(fan) > len(s):
                        break
                if len(fan) != len(s):
                    raise TriangulationError(f"interior vertex {v} has a broken fan")
            rot.append(fan)
        self._rotation = rot
        return rot

    def degree(self) -> np.ndarray:
        return np.array([len(f) for f in self.rotation])

    def edges(self) -> set[tuple[int, int]]:
        out = set()
        for a, b, c in self.faces:
            for x, y in ((a, b), (b, c), (c, a)):
                out.add((min(int(x), int(y)), max(int(x), int(y))))
        return out

    def map_faces(self) -> list[list[int]]:
        """Face walks of the underlying planar map (outer face included)."""
        return face_walks(self.rotation)

    def puncture(self, v: int) -> tuple["Triangulation", np.ndarray]:
        """Remove vertex ``v`` of a closed triangulation; its link becomes the boundary.

        Returns the disk triangulation and the old-to-new index map (-1 for ``v``).
        """
        if not self.is_closed:
            raise TriangulationError("only closed triangulations can be punctured")
        keep = ~np.any(self.faces == v, axis=1)
        remap = np.arange(self.n) - (np.arange(self.n) > v)
        remap[v] = -1
        faces = remap[self.faces[keep]]
        T = Triangulation(self.n - 1, faces, [], dict(self.meta))
        return T, remap


def extend_to_triangulation(H: PlanarMap) -> tuple[Triangulation, dict]:
    """Embed a simple connected planar map in a closed triangulation.

    Inside every face walk ``v_1 .. v_k`` a cycle ``w_1 .. w_k`` is added with
    ``w_j`` joined to ``v_j`` and ``v_{j+1}``, plus a hub joined to every
    ``w_j``.  Original degrees triple and each ``w_j`` has degree 5.

    Returns the triangulation and a dict with keys ``original`` (index map of
    H's vertices), ``cycles`` (the ``w`` vertices per face) and ``hubs``.
    """
    if H.n == 0 or not H.is_connected():
        raise TriangulationError("the map must be connected and non-empty")
    walks = H.faces()
    for f in walks:
        if len(f) < 3:
            raise TriangulationError(f"face walk {f} has length {len(f)} < 3")
    n = H.n
    faces = []
    cycles, hubs = [], []
    for walk in walks:
        k = len(walk)
        w = list(range(n, n + k))
        u = n + k
        n += k + 1
        for j in range(k):
            vj, vj1 = walk[j], walk[(j + 1) % k]
            wj, wj1 = w[j], w[(j + 1) % k]
            faces.append((vj, vj1, wj))
            faces.append((vj1, wj1, wj))
            faces.append((wj, wj1, u))
        cycles.append(w)
        hubs.append(u)
    T = Triangulation(n, np.asarray(faces), [], {"hubs": hubs})
    return T, {"original": np.arange(H.n), "cycles": cycles, "hubs": hubs}


# ---------------------------------------------------------------------------
# radii

def _corners(T: Triangulation):
    F = T.faces
    v = F.ravel()
    u = F[:, [1, 2, 0]].ravel()
    w = F[:, [2, 0, 1]].ravel()
    return v, u, w


def angle_sums(T: Triangulation, radii: np.ndarray) -> np.ndarray:
    v, u, w = _corners(T)
    rv, ru, rw = radii[v], radii[u], radii[w]
    t = np.sqrt((ru / rv) * (rw / (rv + ru + rw)))
    return np.bincount(v, weights=2.0 * np.arctan(t), minlength=T.n)


def corner_angle(rv, ru, rw):
    """Angle at the centre of ``v`` in the triangle of three mutually tangent circles."""
    return 2.0 * np.arctan(np.sqrt((ru / rv) * (rw / (rv + ru + rw))))


@dataclass
class RadiiAssignment:
    radii: np.ndarray
    residual: float
    sweeps: int = 0
    newton_steps: int = 0


def _residual(T, r, interior):
    if len(interior) == 0:
        return 0.0
    return float(np.abs(angle_sums(T, r)[interior] - TWO_PI).max())


def _sweep(T, r, interior, corners, inner_iters=64):
    """One synchronous sweep: every interior radius solves its own angle equation
    with neighbours frozen at the previous values."""
    v, u, w = corners
    mask = np.isin(v, interior)
    cv, cu, cw = v[mask], r[u[mask]], r[w[mask]]
    idx = np.searchsorted(interior, cv)
    m = len(interior)
    x = np.log(r[interior])
    lo, hi = x - 1.0, x + 1.0

    def theta(xs):
        rv = np.exp(xs)[idx]
        return np.bincount(idx, weights=corner_angle(rv, cu, cw), minlength=m)

    for _ in range(200):
        bad = theta(lo) <= TWO_PI
        if not bad.any():
            break
        lo[bad] -= 2.0 * (hi[bad] - lo[bad])
    for _ in range(200):
        bad = theta(hi) >= TWO_PI
        if not bad.any():
            break
        hi[bad] += 2.0 * (hi[bad] - lo[bad])
    for _ in range(inner_iters):
        mid = 0.5 * (lo + hi)
        big = theta(mid) > TWO_PI
        lo = np.where(big, mid, lo)
        hi = np.where(big, hi, mid)
        if np.max(hi - lo) < 1e-15:
            break
    out = r.copy()
    out[interior] = np.exp(0.5 * (lo + hi))
    return out


def _jacobian(T, r, interior):
    v, u, w = _corners(T)
    rv, ru, rw = r[v], r[u], r[w]
    s = rv + ru + rw
    t = np.sqrt((ru / rv) * (rw / s))
    c = t / (1.0 + t * t)
    rows = np.concatenate([v, v, v])
    cols = np.concatenate([v, u, w])
    vals = np.concatenate([c * (-1.0 - rv / s), c * (1.0 - ru / s), c * (1.0 - rw / s)])
    J = sp.csr_matrix((vals, (rows, cols)), shape=(T.n, T.n))
    return J[interior][:, interior]


def compute_radii(T: Triangulation, boundary_radii=1.0, tol: float = 1e-10, max_sweeps: int = 100_000,
                  method: str = "newton", initial=None) -> RadiiAssignment:
    """Interior radii making every interior angle sum equal 2*pi.

    ``method="sweep"`` runs synchronous per-vertex sweeps until the residual is
    below ``tol``.  ``method="newton"`` (default) takes damped Newton steps on
    the angle equations in log-radius coordinates and falls back to a burst of
    sweeps whenever the line search cannot reduce the residual.
    """
    if T.is_closed:
        raise TriangulationError("puncture a closed triangulation before packing it")
    r = np.ones(T.n) if initial is None else np.asarray(initial, float).copy()
    b = np.asarray(T.boundary)
    r[b] = np.broadcast_to(np.asarray(boundary_radii, float), b.shape)
    if np.any(r <= 0) or not np.all(np.isfinite(r)):
        raise ValueError("radii must be positive and finite")
    interior = T.interior
    if len(interior) == 0:
        return RadiiAssignment(r, 0.0)
    corners = _corners(T)
    res = _residual(T, r, interior)
    sweeps = steps = 0
    if method == "sweep":
        while res > tol and sweeps < max_sweeps:
            r = _sweep(T, r, interior, corners)
            sweeps += 1
            res = _residual(T, r, interior)
    elif method == "newton":
        # damped Newton; a short burst of sweeps whenever the line search stalls
        while res > tol and sweeps < max_sweeps:
            F = angle_sums(T, r)[interior] - TWO_PI
            delta = spla.spsolve(_jacobian(T, r, interior).tocsc(), -F)
            lam, accepted = 1.0, False
            while lam > 1e-4 and np.all(np.isfinite(delta)):
                trial = r.copy()
                trial[interior] = r[interior] * np.exp(np.clip(lam * delta, -50, 50))
                tres = _residual(T, trial, interior)
                if tres < res:
                    accepted = True
                    break
                lam *= 0.5
            if accepted:
                r, res = trial, tres
                steps += 1
                continue
            for _ in range(10):
                r = _sweep(T, r, interior, corners)
                sweeps += 1
            res = _residual(T, r, interior)
    else:
        raise ValueError(f"unknown method {method!r}")
    if res > tol:
        raise ConvergenceError(f"angle residual {res:.3g} above tolerance {tol:.3g}", res)
    return RadiiAssignment(r, res, sweeps, steps)


# ---------------------------------------------------------------------------
# layout

@dataclass(eq=False)
class LayoutPacking:
    centers: np.ndarray
    radii: RadiiAssignment
    triangulation: Triangulation
    residual: float

    def to_packing(self, **meta) -> Packing:
        disks = tuple(Disk((float(x), float(y)), float(r)) for (x, y), r in zip(self.centers, self.radii.radii))
        return Packing(disks, 2, meta=meta)

    def to_svg(self, margin: float = 0.05) -> str:
        r = self.radii.radii
        lo = (self.centers - r[:, None]).min(axis=0)
        hi = (self.centers + r[:, None]).max(axis=0)
        span = hi - lo
        pad = margin * span.max()
        x0, y0 = lo - pad
        w, h = span + 2 * pad
        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.6g} {-(y0 + h):.6g} {w:.6g} {h:.6g}">']
        sw = 0.002 * max(w, h)
        for (x, y), rr in zip(self.centers, r):
            parts.append(f'<circle cx="{x:.9g}" cy="{-y:.9g}" r="{rr:.9g}" fill="none" stroke="black" stroke-width="{sw:.3g}"/>')
        parts.append("</svg>")
        return "\n".join(parts)


def tangency_residuals(T: Triangulation, centers: np.ndarray, radii: np.ndarray):
    e = np.array(sorted(T.edges()))
    dist = np.hypot(*(centers[e[:, 0]] - centers[e[:, 1]]).T)
    rs = radii[e[:, 0]] + radii[e[:, 1]]
    return e, np.abs(dist - rs) / rs


def layout(T: Triangulation, radii: RadiiAssignment, root: int | None = None, tol: float = 1e-6) -> LayoutPacking:
    """Place centres face by face, starting with ``root`` at the origin and
    its first neighbour on the positive x-axis."""
    r = radii.radii
    if root is None:
        inner = T.interior
        pool = inner if len(inner) else np.arange(T.n)
        root = int(pool[np.argmin(r[pool])])
    rot = T.rotation
    first = rot[root][0]
    f0 = next(f for f, (a, b, c) in enumerate(T.faces) if (a, b) == (root, first) or (b, c) == (root, first) or (c, a) == (root, first))
    half = T._half
    centers = np.full((T.n, 2), np.nan)
    placed = np.zeros(T.n, bool)
    centers[root] = 0.0
    centers[first] = (r[root] + r[first], 0.0)
    placed[[root, first]] = True

    def place_third(a, b, c):
        d = centers[b] - centers[a]
        base = math.atan2(d[1], d[0])
        ang = base + float(corner_angle(r[a], r[b], r[c]))
        centers[c] = centers[a] + (r[a] + r[c]) * np.array([math.cos(ang), math.sin(ang)])
        placed[c] = True

    done = np.zeros(len(T.faces), bool)
    q = deque([f0])
    done[f0] = True
    while q:
        f = q.popleft()
        a, b, c = (int(x) for x in T.faces[f])
        for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
            if placed[x] and placed[y] and not placed[z]:
                place_third(x, y, z)
        for x, y in ((a, b), (b, c), (c, a)):
            g = half.get((y, x))
            if g is not None and not done[g]:
                done[g] = True
                q.append(g)
    if not placed.all():
        raise LayoutError("triangulation is not connected")
    e, res = tangency_residuals(T, centers, r)
    worst = int(np.argmax(res))
    if res[worst] > tol:
        raise LayoutError(f"tangency residual {res[worst]:.3g} on edge {tuple(e[worst])} exceeds {tol:g}")
    return LayoutPacking(centers, radii, T, float(res[worst]))


def ring_audit(L: LayoutPacking) -> dict[int, float]:
    """Minimum neighbour-to-centre radius ratio over interior vertices, per degree."""
    T = L.triangulation
    r = L.radii.radii
    out: dict[int, float] = {}
    for v in T.interior:
        nb = T.rotation[v]
        m = len(nb)
        ratio = float(min(r[w] for w in nb) / r[v])
        out[m] = min(out.get(m, math.inf), ratio)
    return dict(sorted(out.items()))


def flower(k: int) -> Triangulation:
    """One interior vertex (index 0) surrounded by ``k`` boundary vertices."""
    faces = [(0, 1 + j, 1 + (j + 1) % k) for j in range(k)]
    return Triangulation(k + 1, np.asarray(faces))
