"""Constructors for the concrete packing families.

Every generator is a pure function of its arguments.  Windows used by
crossing events are stored in ``meta["window"]`` as a parallelogram
``{origin, u, v}``.
"""
from __future__ import annotations

import math

import numpy as np

from .circlepack import Triangulation, compute_radii, layout
from .geometry import Box, Disk, Ellipse, Packing, invert_disk
from .graph import AdjacencyGraph

SQRT3 = math.sqrt(3.0)


class GeneratorCapacityError(ValueError):
    """Requested parameters exceed what double precision can represent faithfully."""


def _rect_window(x0, y0, x1, y1):
    return {"origin": [x0, y0], "u": [x1 - x0, 0.0], "v": [0.0, y1 - y0]}


def triangular_disk_lattice(n: int) -> Packing:
    """Unit disks at ``i*(2, 0) + j*(1, sqrt 3)`` for ``0 <= i, j < n``.

    The window is the rhombus whose four sides are tangent to the outer rows
    and columns, so left-right crossings are hex-board crossings.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    x = (2 * i + j).ravel().astype(float)
    y = (SQRT3 * j).ravel()
    disks = tuple(Disk((a, b), 1.0) for a, b in zip(x, y))
    side = 2.0 * (n - 1) + 4.0 / SQRT3
    window = {"origin": [-SQRT3, -1.0], "u": [side, 0.0], "v": [side / 2, side * SQRT3 / 2]}
    return Packing(disks, 2, meta={"family": "triangular", "n": n, "window": window,
                                   "index": "i*n + j"})


def moore_square_grid(n: int) -> Packing:
    """``n*n`` unit squares tiling ``[0, n]^2``; corner contacts make degree 8."""
    if n < 1:
        raise ValueError("n must be at least 1")
    boxes = tuple(Box((float(i), float(j)), (1.0, 1.0)) for i in range(n) for j in range(n))
    return Packing(boxes, 2, meta={"family": "moore", "n": n, "window": _rect_window(0.0, 0.0, float(n), float(n))})


def random_square_tiling(seed: int, depth: int, split: float = 0.5) -> Packing:
    """Random quadtree tiling of the unit square.

    The root is split whenever ``depth >= 1``; every other square above the
    depth limit is split into four with probability ``split``.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    rng = np.random.default_rng(seed)
    out = []
    stack = [(0.0, 0.0, 1.0, 0)]
    while stack:
        x, y, s, lvl = stack.pop()
        if lvl < depth and (lvl == 0 or rng.random() < split):
            h = s / 2
            stack.extend([(x, y, h, lvl + 1), (x + h, y, h, lvl + 1), (x, y + h, h, lvl + 1), (x + h, y + h, h, lvl + 1)])
        else:
            out.append(Box((x, y), (s, s)))
    out.sort(key=lambda b: (b.lo[1], b.lo[0]))
    return Packing(tuple(out), 2, meta={"family": "quadtree", "seed": seed, "depth": depth, "split": split,
                                        "window": _rect_window(0.0, 0.0, 1.0, 1.0)})


# ---------------------------------------------------------------------------
# circle-packed families

def triangle_times_n_triangulation(levels: int) -> Triangulation:
    """Triangulated prism over a triangle: rings of three vertices ``3k + i``,
    ring k joined to ring k+1 by the quads split along ``(i,k)-(i+1,k+1)``."""
    if levels < 1:
        raise ValueError("levels must be at least 1")
    faces = [(0, 1, 2)]
    for k in range(levels - 1):
        for i in range(3):
            a, b = 3 * k + (i + 1) % 3, 3 * k + i
            c, d = 3 * (k + 1) + i, 3 * (k + 1) + (i + 1) % 3
            faces.append((a, b, d))
            faces.append((b, c, d))
    return Triangulation(3 * levels, np.asarray(faces), meta={"rings": np.repeat(np.arange(levels), 3)})


def triangle_times_n_graph(levels: int) -> tuple[AdjacencyGraph, np.ndarray]:
    """Combinatorial graph of the same triangulation (no geometry) and each vertex's ring."""
    if levels < 1:
        raise ValueError("levels must be at least 1")
    edges = []
    for k in range(levels):
        for i in range(3):
            edges.append((3 * k + i, 3 * k + (i + 1) % 3))
            if k + 1 < levels:
                edges.append((3 * k + i, 3 * (k + 1) + i))
                edges.append((3 * k + i, 3 * (k + 1) + (i + 1) % 3))
    return AdjacencyGraph(3 * levels, np.asarray(edges)), np.repeat(np.arange(levels), 3)


def _pack(T: Triangulation, tol: float = 1e-10):
    R = compute_radii(T, 1.0, tol=tol)
    if not np.all(np.isfinite(R.radii)) or R.radii.max() / R.radii.min() > 1e250:
        raise GeneratorCapacityError("radius range exceeds double precision")
    return layout(T, R)


def _ring_growth(rings, radii):
    nring = int(rings.max()) + 1
    ring_max = np.array([radii[rings == k].max() for k in range(nring)])
    return ring_max


def triangle_times_n(levels: int) -> Packing:
    """Circle packing of the triangle-times-path triangulation with the outer
    ring as boundary (radius 1).

    The innermost triangle sits at the origin.  ``meta["radius_to_distance"]``
    holds, per ring, its largest radius divided by its largest distance
    ``|c| + r`` from the origin; a flat profile means radii grow linearly with
    distance.
    """
    if levels > 150:
        raise GeneratorCapacityError("radii shrink by about 10x per ring inward; more than 150 rings "
                                     "leave double precision; "
                                     "use triangle_times_n_graph for the combinatorics")
    T = triangle_times_n_triangulation(levels)
    L = _pack(T)
    rings = T.meta["rings"]
    r = L.radii.radii
    ring_max = _ring_growth(rings, r)
    c = L.centers - L.centers[:3].mean(axis=0)
    reach = np.hypot(c[:, 0], c[:, 1]) + r
    ratio = [float(ring_max[k] / reach[rings == k].max()) for k in range(levels)]
    meta = {"family": "triangle-times-n", "levels": levels, "rings": rings.tolist(),
            "ring_max_radius": ring_max.tolist(), "radius_to_distance": ratio,
            "growth_factor": float(np.median(ring_max[1:] / ring_max[:-1])) if levels > 1 else float("nan"),
            "layout_residual": L.residual}
    return L.to_packing(**meta)


def hyperbolic_triangulation(degree: int = 7, generations: int = 3) -> Triangulation:
    """Ball of the ``degree``-regular triangulation grown ring by ring."""
    if degree < 7:
        raise ValueError("degree must be at least 7 for a hyperbolic triangulation")
    if generations < 1:
        raise ValueError("generations must be at least 1")
    faces = [(0, 1 + j, 1 + (j + 1) % degree) for j in range(degree)]
    deg = [degree] + [3] * degree
    gen = [0] + [1] * degree
    ring = list(range(1, degree + 1))
    for g in range(2, generations + 1):
        m = len(ring)
        nxt = len(deg)
        # new ring in order: internal vertices of ring[0], shared(0, 1), internal of ring[1], ...
        new_ring, shared, internal = [], [], []
        for v in ring:
            k = degree - deg[v]
            if k < 2:
                raise ValueError("ring vertex already saturated")
            own = list(range(nxt, nxt + k - 2))
            nxt += k - 2
            internal.append(own)
            shared.append(nxt)
            nxt += 1
            new_ring.extend(own + [shared[-1]])
        for i, v in enumerate(ring):
            seq = [shared[i - 1]] + internal[i] + [shared[i]]
            for x, y in zip(seq[:-1], seq[1:]):
                faces.append((x, y, v))
            faces.append((ring[(i + 1) % m], v, shared[i]))
            deg[v] += len(seq)
        for i in range(m):
            deg.extend([3] * len(internal[i]) + [4])
        gen.extend([g] * len(new_ring))
        ring = new_ring
    T = Triangulation(len(deg), np.asarray(faces), meta={"generation": np.asarray(gen)})
    return T


def hyperbolic_ball(degree: int = 7, generations: int = 3) -> Packing:
    """Circle packing of a finite ball of the ``degree``-regular triangulation
    with unit boundary radii."""
    T = hyperbolic_triangulation(degree, generations)
    L = _pack(T)
    gen = T.meta["generation"]
    ring_max = _ring_growth(gen, L.radii.radii)
    meta = {"family": "hyperbolic-ball", "degree": degree, "generations": generations,
            "generation": gen.tolist(), "ring_max_radius": ring_max.tolist(), "layout_residual": L.residual}
    return L.to_packing(**meta)


# ---------------------------------------------------------------------------
# ellipse ladder

def ellipse_ladder(M: float, lines: int, length: int = 8, gap: float = 1e-3) -> Packing:
    """A vertical ellipse ``s0`` (diameter 1, aspect ``M``) with ``lines`` rows
    of horizontal ellipses of the same shape attached to its upper half.

    Row ``k`` touches ``s0`` at height ``k * (2b + gap) / 2`` (``b = 1/(2M)``),
    on the right for even ``k`` and on the left for odd ``k``; rows on the same
    side are therefore ``2b + gap`` apart.  Each row is a tangent chain of
    ``length`` ellipses with centres ``2a = 1`` apart.
    """
    if M < 1 or lines < 1 or length < 1:
        raise ValueError("need M >= 1, lines >= 1, length >= 1")
    a, b = 0.5, 0.5 / M
    s0 = Ellipse((0.0, 0.0), a, b, math.pi / 2)
    step = (2 * b + gap) / 2
    heights = step * np.arange(lines)
    if heights[-1] >= a:
        raise GeneratorCapacityError(f"{lines} rows do not fit on the upper half at aspect {M}")
    shapes = [s0]
    rows = []
    proto = Ellipse((0.0, 0.0), a, b, 0.0)
    for k, y in enumerate(heights):
        side = 1.0 if k % 2 == 0 else -1.0
        x = side * b * math.sqrt(max(0.0, 1.0 - (y / a) ** 2))
        q = np.array([x, y])
        n = np.array([x / b**2, y / a**2])
        n /= np.hypot(*n)
        c = q - proto.support_point(-n)
        row = []
        for j in range(length):
            row.append(len(shapes))
            shapes.append(Ellipse((c[0] + side * 2 * a * j, c[1]), a, b, 0.0))
        rows.append({"side": "right" if side > 0 else "left", "contact": q.tolist(), "normal": n.tolist(),
                     "indices": row})
    meta = {"family": "ellipse-ladder", "M": M, "lines": lines, "length": length, "gap": gap,
            "source": 0, "rows": rows}
    return Packing(tuple(shapes), 2, meta=meta)


# ---------------------------------------------------------------------------
# bond counterexample

def _lens_chain(q, axis, M, radius_floor=1e-7):
    """``M`` disks in the two cusps at the tangency point ``q`` of two unit disks
    whose centres are ``q -/+ axis``.  Built in the inverted picture, where the
    pair becomes the strip ``|x'| < 1/2`` and the chain is a column of circles
    of radius 1/2 with gaps."""
    qx, qy = q
    ax, ay = axis
    px, py = -ay, ax
    out = []
    for k in range(M):
        side = 1.0 if k % 2 == 0 else -1.0
        t = side * (2.2 + k * 1.05)
        img = Disk((qx + px * t, qy + py * t), 0.5)
        d = invert_disk(img, q)
        if d.radius < radius_floor:
            raise GeneratorCapacityError(f"lens disk {k} would have radius {d.radius:.6g}, below {radius_floor:g}")
        out.append(d)
    return out


def bond_counterexample(M: int, n: int) -> Packing:
    """Square-lattice unit disks at ``(2i, 2j)`` plus ``M`` disks tangent to
    both members of every tangent pair, alternating between the two cusps."""
    if M < 0 or n < 1:
        raise ValueError("need M >= 0 and n >= 1")
    shapes = [Disk((2.0 * i, 2.0 * j), 1.0) for i in range(n) for j in range(n)]
    for i in range(n):
        for j in range(n):
            if i + 1 < n:
                shapes.extend(_lens_chain((2.0 * i + 1, 2.0 * j), (1.0, 0.0), M))
            if j + 1 < n:
                shapes.extend(_lens_chain((2.0 * i, 2.0 * j + 1), (0.0, 1.0), M))
    window = _rect_window(-1.0, -1.0, 2.0 * n - 1, 2.0 * n - 1)
    return Packing(tuple(shapes), 2, meta={"family": "bond-counterexample", "M": M, "n": n,
                                           "lattice": n * n, "window": window})


FAMILIES = {
    "triangular": (triangular_disk_lattice, ("n",)),
    "moore": (moore_square_grid, ("n",)),
    "quadtree": (random_square_tiling, ("seed", "depth", "split")),
    "triangle-times-n": (triangle_times_n, ("levels",)),
    "ellipse-ladder": (ellipse_ladder, ("M", "lines", "length", "gap")),
    "bond-counterexample": (bond_counterexample, ("M", "n")),
    "hyperbolic-ball": (hyperbolic_ball, ("degree", "generations")),
}
