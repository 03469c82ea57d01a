"""Geometric primitives for packings measured in the l-infinity metric.

Three shape kinds are supported: disks and ellipses in the plane, and
axis-aligned boxes in any dimension.  All metric quantities (diameter,
distance between sets) use the sup-norm; Euclidean geometry appears only
inside disk tangency and inversion formulas.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

DISK, BOX, ELLIPSE = 0, 1, 2

DISTANCE_TOL = 1e-9
_ANGLE_SAMPLES = 512


class GeometryError(ValueError):
    pass


class OverlapError(GeometryError):
    """Raised when a packing has pairs whose interiors overlap."""

    def __init__(self, violations):
        self.violations = list(violations)
        i, j, depth = self.violations[0]
        super().__init__(
            f"{len(self.violations)} overlapping pair(s); first is ({i}, {j}) "
            f"with penetration depth {depth:.3g}"
        )


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    kind = DISK
    dimension = 2

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 2:
            raise GeometryError("disk center must be a point in the plane")
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise GeometryError(f"disk radius must be positive, got {self.radius}")

    def scaled(self, k: float) -> "Disk":
        return Disk((self.center[0] * k, self.center[1] * k), self.radius * k)

    def bbox(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def support(self, normals: np.ndarray) -> np.ndarray:
        return normals @ np.asarray(self.center) + self.radius * np.hypot(normals[..., 0], normals[..., 1])

    def to_dict(self):
        return {"type": "disk", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box ``[lo, lo + sides]``."""

    lo: tuple[float, ...]
    sides: tuple[float, ...]

    kind = BOX

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(c) for c in self.lo))
        object.__setattr__(self, "sides", tuple(float(c) for c in self.sides))
        if len(self.lo) != len(self.sides) or len(self.lo) < 1:
            raise GeometryError("box corner and sides must have the same dimension")
        if not all(s > 0 and math.isfinite(s) for s in self.sides):
            raise GeometryError(f"box sides must be positive, got {self.sides}")

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @property
    def hi(self) -> tuple[float, ...]:
        return tuple(a + s for a, s in zip(self.lo, self.sides))

    def scaled(self, k: float) -> "Box":
        return Box(tuple(a * k for a in self.lo), tuple(s * k for s in self.sides))

    def bbox(self):
        return np.asarray(self.lo), np.asarray(self.hi)

    def support(self, normals: np.ndarray) -> np.ndarray:
        lo, hi = self.bbox()
        return np.maximum(normals * lo, normals * hi).sum(axis=-1)

    def to_dict(self):
        return {"type": "box", "min": list(self.lo), "sides": list(self.sides)}


@dataclass(frozen=True)
class Ellipse:
    """Closed ellipse with semi-axes ``a >= b`` and major axis at ``angle``."""

    center: tuple[float, float]
    a: float
    b: float
    angle: float = 0.0

    kind = ELLIPSE
    dimension = 2

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not (self.b > 0 and self.a >= self.b and math.isfinite(self.a)):
            raise GeometryError(f"ellipse needs a >= b > 0, got a={self.a}, b={self.b}")
        angle = float(self.angle) % math.pi
        object.__setattr__(self, "angle", angle)

    @property
    def aspect(self) -> float:
        return self.a / self.b

    def half_widths(self) -> tuple[float, float]:
        c, s = math.cos(self.angle), math.sin(self.angle)
        wx = math.sqrt((self.a * c) ** 2 + (self.b * s) ** 2)
        wy = math.sqrt((self.a * s) ** 2 + (self.b * c) ** 2)
        return wx, wy

    def scaled(self, k: float) -> "Ellipse":
        return Ellipse((self.center[0] * k, self.center[1] * k), self.a * k, self.b * k, self.angle)

    def bbox(self):
        c = np.asarray(self.center)
        w = np.asarray(self.half_widths())
        return c - w, c + w

    def support(self, normals: np.ndarray) -> np.ndarray:
        u = np.array([math.cos(self.angle), math.sin(self.angle)])
        v = np.array([-u[1], u[0]])
        nu = normals @ u
        nv = normals @ v
        return normals @ np.asarray(self.center) + np.sqrt((self.a * nu) ** 2 + (self.b * nv) ** 2)

    def support_point(self, normal) -> np.ndarray:
        """Boundary point whose outward normal is ``normal``."""
        n = np.asarray(normal, dtype=float)
        u = np.array([math.cos(self.angle), math.sin(self.angle)])
        v = np.array([-u[1], u[0]])
        nu, nv = n @ u, n @ v
        h = math.sqrt((self.a * nu) ** 2 + (self.b * nv) ** 2)
        return np.asarray(self.center) + (self.a ** 2 * nu * u + self.b ** 2 * nv * v) / h

    def to_dict(self):
        return {"type": "ellipse", "center": list(self.center), "a": self.a, "b": self.b, "angle": self.angle}


Shape = Disk | Box | Ellipse


def shape_from_dict(d: dict) -> Shape:
    kind = d.get("type")
    if kind == "disk":
        return Disk(tuple(d["center"]), d["radius"])
    if kind == "box":
        return Box(tuple(d["min"]), tuple(d["sides"]))
    if kind == "ellipse":
        return Ellipse(tuple(d["center"]), d["a"], d["b"], d.get("angle", 0.0))
    raise GeometryError(f"unknown shape type {kind!r}")


def diameter(s: Shape) -> float:
    """Exact l-infinity diameter of a shape."""
    if s.kind == DISK:
        return 2.0 * s.radius
    if s.kind == BOX:
        return max(s.sides)
    return 2.0 * max(s.half_widths())


def volume(s: Shape) -> float:
    if s.kind == DISK:
        return math.pi * s.radius ** 2
    if s.kind == BOX:
        return math.prod(s.sides)
    return math.pi * s.a * s.b


# ---------------------------------------------------------------------------
# distances

def _disk_linf_distance(dx, dy, rsum):
    """l-infinity distance between two disks, vectorised.

    The disks meet ``D0 + [-t, t]^2`` iff the Euclidean distance from the
    centre offset to the square ``[-t, t]^2`` is at most ``rsum``.
    """
    a = np.maximum(np.abs(dx), np.abs(dy))
    b = np.minimum(np.abs(dx), np.abs(dy))
    t_far = a - rsum
    disc = np.maximum(2.0 * rsum ** 2 - (a - b) ** 2, 0.0)
    t_near = 0.5 * ((a + b) - np.sqrt(disc))
    t = np.where(t_far >= b, t_far, t_near)
    return np.where(np.hypot(dx, dy) <= rsum, 0.0, np.maximum(t, 0.0))


def _box_linf_distance(lo0, hi0, lo1, hi1):
    gap = np.maximum(np.maximum(lo1 - hi0, lo0 - hi1), 0.0)
    return gap.max(axis=-1)


def _unit_normals(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _min_over_directions(g) -> float:
    """Global minimum of a 2*pi-periodic function by sampling plus refinement."""
    theta = np.linspace(0.0, 2.0 * math.pi, _ANGLE_SAMPLES, endpoint=False)
    vals = g(theta)
    k = int(np.argmin(vals))
    step = 2.0 * math.pi / _ANGLE_SAMPLES
    res = minimize_scalar(
        lambda t: float(g(np.array([t]))[0]),
        bounds=(theta[k] - step, theta[k] + step),
        method="bounded",
        options={"xatol": 1e-13},
    )
    return min(float(vals[k]), float(res.fun))


def _generic_separation(s0: Shape, s1: Shape, t: float) -> float:
    """min over unit n of h_s0(n) + h_s1(-n) + t*|n|_1 (>= 0 iff the sets meet)."""

    def g(theta):
        n = _unit_normals(theta)
        return s0.support(n) + s1.support(-n) + t * (np.abs(n[:, 0]) + np.abs(n[:, 1]))

    return _min_over_directions(g)


def minkowski_intersects(s0: Shape, s1: Shape, t: float) -> bool:
    """True iff ``s0`` meets ``s1 + [-t, t]^d``."""
    if s0.dimension != s1.dimension:
        raise GeometryError("shapes live in different dimensions")
    if s0.kind == BOX and s1.kind == BOX:
        lo0, hi0 = s0.bbox()
        lo1, hi1 = s1.bbox()
        return bool(_box_linf_distance(lo0, hi0, lo1, hi1) <= t)
    return _generic_separation(s0, s1, t) >= 0.0


def set_distance_bisect(s0: Shape, s1: Shape, tol: float = DISTANCE_TOL) -> float:
    """l-infinity distance by bisection on the Minkowski-sum predicate.

    ``tol`` is absolute after normalising the pair by its larger diameter.
    """
    if s0.dimension != s1.dimension:
        raise GeometryError("shapes live in different dimensions")
    scale = max(diameter(s0), diameter(s1))
    if minkowski_intersects(s0, s1, 0.0):
        return 0.0
    lo0, hi0 = s0.bbox()
    lo1, hi1 = s1.bbox()
    lo, hi = 0.0, float(np.max(np.abs(0.5 * (lo0 + hi0) - 0.5 * (lo1 + hi1)))) + 1e-12 * scale
    while hi - lo > tol * scale:
        mid = 0.5 * (lo + hi)
        if minkowski_intersects(s0, s1, mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def set_distance(s0: Shape, s1: Shape) -> float:
    """Minimum l-infinity distance between two shapes.

    Disk pairs and box pairs use exact closed forms; every other pairing goes
    through :func:`set_distance_bisect`.
    """
    if s0.dimension != s1.dimension:
        raise GeometryError(f"dimension mismatch: {s0.dimension} vs {s1.dimension}")
    if s0.kind == DISK and s1.kind == DISK:
        dx = s1.center[0] - s0.center[0]
        dy = s1.center[1] - s0.center[1]
        return float(_disk_linf_distance(dx, dy, s0.radius + s1.radius))
    if s0.kind == BOX and s1.kind == BOX:
        lo0, hi0 = s0.bbox()
        lo1, hi1 = s1.bbox()
        return float(_box_linf_distance(lo0, hi0, lo1, hi1))
    return set_distance_bisect(s0, s1)


def penetration_depth(s0: Shape, s1: Shape) -> float:
    """Euclidean depth of interior overlap; zero or negative means disjoint interiors."""
    if s0.kind == DISK and s1.kind == DISK:
        return s0.radius + s1.radius - math.dist(s0.center, s1.center)
    if s0.kind == BOX and s1.kind == BOX:
        lo0, hi0 = s0.bbox()
        lo1, hi1 = s1.bbox()
        overlap = np.minimum(hi0, hi1) - np.maximum(lo0, lo1)
        return float(overlap.min())
    return _generic_separation(s0, s1, 0.0)


# ---------------------------------------------------------------------------
# packings

@dataclass(frozen=True, eq=False)
class Packing:
    """A finite, ordered collection of shapes with disjoint interiors.

    ``tol`` is the relative overlap tolerance: a pair may overlap by at most
    ``tol * max(diam_i, diam_j)``.  Construction only checks shapes and
    dimensions; call :func:`validate_packing` (or :meth:`validated`) for the
    pairwise overlap check.
    """

    shapes: tuple
    dimension: int = 0
    tol: float = 1e-9
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = tuple(self.shapes)
        if not shapes:
            raise GeometryError("a packing needs at least one shape")
        dim = self.dimension or shapes[0].dimension
        if dim < 2:
            raise GeometryError("packings live in dimension >= 2")
        for s in shapes:
            if s.dimension != dim:
                raise GeometryError(f"shape {s} does not live in dimension {dim}")
            if s.kind != BOX and dim != 2:
                raise GeometryError("disks and ellipses need dimension 2")
        object.__setattr__(self, "shapes", shapes)
        object.__setattr__(self, "dimension", dim)

    def __len__(self):
        return len(self.shapes)

    def __getitem__(self, i):
        return self.shapes[i]

    def __iter__(self):
        return iter(self.shapes)

    @cached_property
    def kinds(self) -> np.ndarray:
        return np.fromiter((s.kind for s in self.shapes), dtype=np.int8, count=len(self.shapes))

    @cached_property
    def diameters(self) -> np.ndarray:
        return np.fromiter((diameter(s) for s in self.shapes), dtype=float, count=len(self.shapes))

    @cached_property
    def bboxes(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.empty((len(self), self.dimension))
        hi = np.empty((len(self), self.dimension))
        for i, s in enumerate(self.shapes):
            lo[i], hi[i] = s.bbox()
        return lo, hi

    @cached_property
    def disk_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Centres and radii (NaN for non-disks)."""
        c = np.full((len(self), 2), np.nan)
        r = np.full(len(self), np.nan)
        for i, s in enumerate(self.shapes):
            if s.kind == DISK:
                c[i] = s.center
                r[i] = s.radius
        return c, r

    def scaled(self, k: float) -> "Packing":
        return Packing(tuple(s.scaled(k) for s in self.shapes), self.dimension, self.tol, dict(self.meta))

    def validated(self) -> "Packing":
        bad = validate_packing(self)
        if bad:
            raise OverlapError(bad)
        return self

    def to_dict(self) -> dict:
        d = {"dimension": self.dimension, "shapes": [s.to_dict() for s in self.shapes]}
        if self.meta:
            d["meta"] = self.meta
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict, tol: float = 1e-9) -> "Packing":
        shapes = tuple(shape_from_dict(s) for s in d["shapes"])
        return cls(shapes, int(d.get("dimension", 0)), tol, dict(d.get("meta", {})))

    @classmethod
    def from_json(cls, text: str, tol: float = 1e-9) -> "Packing":
        return cls.from_dict(json.loads(text), tol)


def distances_from(P: Packing, s0: int) -> np.ndarray:
    """l-infinity distances from shape ``s0`` to every shape of ``P``."""
    src = P[s0]
    out = np.empty(len(P))
    kinds = P.kinds
    if src.kind == DISK:
        c, r = P.disk_arrays
        m = kinds == DISK
        out[m] = _disk_linf_distance(c[m, 0] - src.center[0], c[m, 1] - src.center[1], r[m] + src.radius)
        rest = np.flatnonzero(~m)
    elif src.kind == BOX:
        lo, hi = P.bboxes
        m = kinds == BOX
        slo, shi = src.bbox()
        out[m] = _box_linf_distance(slo, shi, lo[m], hi[m])
        rest = np.flatnonzero(~m)
    else:
        rest = np.arange(len(P))
    for j in rest:
        out[j] = 0.0 if j == s0 else set_distance(src, P[j])
    out[s0] = 0.0
    return out


def validate_packing(P: Packing) -> list[tuple[int, int, float]]:
    """Pairs ``(i, j, depth)`` whose interiors overlap by more than the tolerance."""
    from .graph import candidate_pairs

    pairs = candidate_pairs(P, 0.0)
    if len(pairs) == 0:
        return []
    i, j = pairs[:, 0], pairs[:, 1]
    allow = P.tol * np.maximum(P.diameters[i], P.diameters[j])
    depth = np.full(len(pairs), -np.inf)
    kinds = P.kinds
    dd = (kinds[i] == DISK) & (kinds[j] == DISK)
    if dd.any():
        c, r = P.disk_arrays
        depth[dd] = r[i[dd]] + r[j[dd]] - np.hypot(*(c[i[dd]] - c[j[dd]]).T)
    bb = (kinds[i] == BOX) & (kinds[j] == BOX)
    if bb.any():
        lo, hi = P.bboxes
        depth[bb] = (np.minimum(hi[i[bb]], hi[j[bb]]) - np.maximum(lo[i[bb]], lo[j[bb]])).min(axis=1)
    for k in np.flatnonzero(~(dd | bb)):
        depth[k] = penetration_depth(P[int(i[k])], P[int(j[k])])
    bad = np.flatnonzero(depth > allow)
    return [(int(i[k]), int(j[k]), float(depth[k])) for k in bad]


@dataclass(frozen=True)
class RegularityReport:
    epsilon: float
    argmin: int
    max_diameter: float


def regularity(P: Packing) -> RegularityReport:
    d = P.dimension
    ratios = np.fromiter((volume(s) / diameter(s) ** d for s in P), dtype=float, count=len(P))
    k = int(np.argmin(ratios))
    return RegularityReport(float(ratios[k]), k, float(P.diameters.max()))


# ---------------------------------------------------------------------------
# inversion

def invert_disk(disk: Disk, q0: Sequence[float]) -> Disk:
    """Image of ``disk`` under inversion in the unit circle about ``q0``.

    The map ``z -> q0 + (z - q0)/|z - q0|^2`` is an involution sending ``q0``
    to infinity.
    """
    qx, qy = float(q0[0]), float(q0[1])
    cx, cy = disk.center[0] - qx, disk.center[1] - qy
    den = cx * cx + cy * cy - disk.radius ** 2
    return Disk((qx + cx / den, qy + cy / den), disk.radius / abs(den))


def mobius_invert(P: Packing, q0: Sequence[float]) -> Packing:
    """Invert a disk packing about ``q0``, which must lie outside every disk."""
    out = []
    for i, s in enumerate(P):
        if s.kind != DISK:
            raise GeometryError(f"shape {i} is not a disk")
        gap = math.dist(s.center, q0) - s.radius
        if gap <= 1e-12 * s.radius:
            raise GeometryError(f"point {tuple(q0)} lies inside or on disk {i}")
        out.append(invert_disk(s, q0))
    return Packing(tuple(out), 2, P.tol, dict(P.meta))


def packing_from_shapes(shapes: Iterable[Shape], **meta) -> Packing:
    return Packing(tuple(shapes), meta=meta)
