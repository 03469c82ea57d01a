"""Site and bond samples, connection events, and Monte Carlo estimation."""
from __future__ import annotations

import math
import os
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..geometry import BOX, DISK, Packing, distances_from
from ..graph import AdjacencyGraph, build_graph
from . import _kernels
from .rng import BOND_STREAM, SITE_STREAM, uniforms

Z95 = 1.959963984540054


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("PACKPERC_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# samples

@dataclass(frozen=True)
class SiteSample:
    open: np.ndarray
    p: float
    seed: int
    trial: int


@dataclass(frozen=True)
class BondSample:
    open: np.ndarray
    p: float
    seed: int
    trial: int


def _check_p(p):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")


def sample_sites(G: AdjacencyGraph, p: float, seed: int, trial: int) -> SiteSample:
    """Open/closed bit per vertex: open iff ``u(seed, trial, index) < p``."""
    _check_p(p)
    u = uniforms(seed, SITE_STREAM, trial, np.arange(G.n))
    return SiteSample(u < p, p, seed, trial)


def sample_bonds(G: AdjacencyGraph, p: float, seed: int, trial: int) -> BondSample:
    _check_p(p)
    u = uniforms(seed, BOND_STREAM, trial, np.arange(G.num_edges))
    return BondSample(u < p, p, seed, trial)


# ---------------------------------------------------------------------------
# windows and events

@dataclass(frozen=True)
class Window:
    """Parallelogram ``origin + s*u + t*v`` for ``s, t`` in [0, 1].

    Left/right sides are ``s = 0`` / ``s = 1``; bottom/top are ``t = 0`` /
    ``t = 1``.  An axis-aligned rectangle has ``u = (w, 0)``, ``v = (0, h)``.
    """

    origin: tuple[float, float]
    u: tuple[float, float]
    v: tuple[float, float]

    @classmethod
    def rect(cls, x0, y0, x1, y1) -> "Window":
        return cls((float(x0), float(y0)), (float(x1 - x0), 0.0), (0.0, float(y1 - y0)))

    @classmethod
    def bounding(cls, P: Packing) -> "Window":
        lo, hi = P.bboxes
        a, b = lo.min(axis=0), hi.max(axis=0)
        return cls.rect(a[0], a[1], b[0], b[1])

    @classmethod
    def from_dict(cls, d) -> "Window":
        return cls(tuple(d["origin"]), tuple(d["u"]), tuple(d["v"]))

    def to_dict(self):
        return {"origin": list(self.origin), "u": list(self.u), "v": list(self.v)}

    def side(self, name: str):
        """(point on side, inward unit normal)."""
        o, u, v = (np.asarray(x, float) for x in (self.origin, self.u, self.v))

        def inward(edge, other):
            n = np.array([-edge[1], edge[0]])
            n /= np.hypot(*n)
            return n if n @ other > 0 else -n

        if name == "left":
            return o, inward(v, u)
        if name == "right":
            return o + u, inward(v, -u)
        if name == "bottom":
            return o, inward(u, v)
        if name == "top":
            return o + v, inward(u, -v)
        raise ValueError(f"unknown side {name!r}")


def window_of(P: Packing) -> Window:
    w = P.meta.get("window")
    return Window.from_dict(w) if w else Window.bounding(P)


def touching_side(P: Packing, window: Window, side: str, tol: float = 1e-9) -> np.ndarray:
    """Shapes whose distance to a window side is at most ``tol * diameter``."""
    if P.dimension != 2:
        raise ValueError("crossing windows are planar")
    point, n = window.side(side)
    kinds = P.kinds
    near = np.empty(len(P))  # min over the shape of n.(x - point)
    c, r = P.disk_arrays
    m = kinds == DISK
    near[m] = (c[m] - point) @ n - r[m]
    m = kinds == BOX
    lo, hi = P.bboxes
    near[m] = np.minimum(lo[m] * n, hi[m] * n).sum(axis=1) - point @ n
    for i in np.flatnonzero(~((kinds == DISK) | (kinds == BOX))):
        near[i] = -float(P[i].support(-n[None, :])[0]) - point @ n
    return near <= tol * P.diameters


DIRECTIONS = {"left-right": ("left", "right"), "top-bottom": ("top", "bottom")}
_DIR_ALIASES = {"lr": "left-right", "tb": "top-bottom", "left-right": "left-right", "top-bottom": "top-bottom"}


def _direction(d: str) -> str:
    try:
        return _DIR_ALIASES[d]
    except KeyError:
        raise ValueError(f"unknown crossing direction {d!r}") from None


@dataclass(frozen=True)
class ReachDistance:
    source: int
    r: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("reach distance must be non-negative")

    label = "reach"


@dataclass(frozen=True)
class ReachAnyOf:
    source: int
    targets: tuple[int, ...]

    label = "reach-any"


@dataclass(frozen=True)
class Crossing:
    window: Window | None = None
    direction: str = "left-right"
    color: str = "open"
    diagonal: bool = True

    def __post_init__(self):
        object.__setattr__(self, "direction", _direction(self.direction))
        if self.color not in ("open", "closed"):
            raise ValueError(f"colour must be 'open' or 'closed', got {self.color!r}")

    label = "crossing"


@dataclass(frozen=True)
class EventSpec:
    event: ReachDistance | ReachAnyOf | Crossing
    mode: str = "site"

    def __post_init__(self):
        if self.mode not in ("site", "bond"):
            raise ValueError(f"mode must be 'site' or 'bond', got {self.mode!r}")


def _bfs(G: AdjacencyGraph, sample, sources, allowed_edge=None, stop=None):
    """Vertices reachable from ``sources`` through usable vertices/edges."""
    indptr, nbr, eid, corner = G.csr
    site = isinstance(sample, SiteSample)
    seen = np.zeros(G.n, bool)
    q = deque()
    for s in sources:
        if site and not sample.open[s]:
            continue
        if not seen[s]:
            seen[s] = True
            q.append(s)
    while q:
        v = q.popleft()
        if stop is not None and stop[v]:
            return seen, True
        for k in range(indptr[v], indptr[v + 1]):
            w = nbr[k]
            if seen[w] or (allowed_edge is not None and not allowed_edge[k]):
                continue
            if site and not sample.open[w]:
                continue
            if not site and not sample.open[eid[k]]:
                continue
            seen[w] = True
            q.append(w)
    return seen, False


def reach_event(P: Packing, G: AdjacencyGraph, sample, s0: int, r: float) -> bool:
    """Whether ``s0`` is joined by an open path to a shape at distance >= ``r``."""
    if isinstance(sample, SiteSample) and not sample.open[s0]:
        return False
    target = distances_from(P, s0) >= r
    _, hit = _bfs(G, sample, [s0], stop=target)
    return hit


def crossing_event(P: Packing, sample, window: Window | None = None, direction: str = "left-right",
                   color: str = "open", diagonal: bool = True, G: AdjacencyGraph | None = None) -> bool:
    """Whether shapes of the given colour join the two opposite sides of ``window``.

    Corner-only contacts between boxes are usable iff ``diagonal``.
    """
    G = build_graph(P) if G is None else G
    window = window_of(P) if window is None else window
    a, b = DIRECTIONS[_direction(direction)]
    src = touching_side(P, window, a, G.tol or 1e-9)
    dst = touching_side(P, window, b, G.tol or 1e-9)
    if color == "closed":
        flipped = ~sample.open
        sample = type(sample)(flipped, sample.p, sample.seed, sample.trial)
    allowed = None if diagonal else ~G.csr[3]
    _, hit = _bfs(G, sample, np.flatnonzero(src), allowed_edge=allowed, stop=dst)
    return hit


# ---------------------------------------------------------------------------
# estimation

def wilson_interval(hits: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("need at least one trial")
    ph = hits / trials
    z2 = z * z
    den = 1.0 + z2 / trials
    mid = (ph + z2 / (2 * trials)) / den
    half = z * math.sqrt(ph * (1 - ph) / trials + z2 / (4 * trials * trials)) / den
    lo = 0.0 if hits == 0 else max(0.0, mid - half)
    hi = 1.0 if hits == trials else min(1.0, mid + half)
    return lo, hi


@dataclass
class Estimate:
    hits: int
    trials: int
    phat: float
    ci: tuple[float, float]
    seed: int
    p: float
    event: str = ""
    wall_time: float = field(default=0.0, compare=False)

    def record(self) -> dict:
        """Deterministic fields only (no timing)."""
        return {
            "event": self.event, "p": self.p, "trials": self.trials, "hits": self.hits,
            "phat": self.phat, "ci_lo": self.ci[0], "ci_hi": self.ci[1], "seed": self.seed,
        }


def _run_chunks(fn, trials: int, workers: int, chunks_per_worker: int = 4) -> np.ndarray:
    workers = max(1, int(workers))
    nchunks = max(1, min(trials, workers * chunks_per_worker))
    bounds = np.linspace(0, trials, nchunks + 1).astype(np.int64)
    spans = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if workers == 1:
        parts = [fn(a, b) for a, b in spans]
    else:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda ab: fn(*ab), spans))
    return np.concatenate(parts)


def trial_outcomes(E: EventSpec, P: Packing | None, G: AdjacencyGraph, p: float, trials: int,
                   seed: int, workers: int | None = None) -> np.ndarray:
    """Per-trial event indicators for trials ``0 .. trials-1``."""
    _check_p(p)
    if trials < 1:
        raise ValueError("need at least one trial")
    workers = default_workers() if workers is None else workers
    indptr, nbr, eid, corner = G.csr
    mode = _kernels.SITE if E.mode == "site" else _kernels.BOND
    ev = E.event
    if isinstance(ev, (ReachDistance, ReachAnyOf)):
        if isinstance(ev, ReachDistance):
            if P is None:
                raise ValueError("distance events need the packing")
            target = distances_from(P, ev.source) >= ev.r
        else:
            target = np.zeros(G.n, np.bool_)
            target[list(ev.targets)] = True

        def fn(a, b):
            return _kernels.reach_trials(indptr, nbr, eid, target, ev.source, p, seed, a, b, mode)
    else:
        if P is None:
            raise ValueError("crossing events need the packing")
        window = window_of(P) if ev.window is None else ev.window
        sa, sb = DIRECTIONS[ev.direction]
        src = touching_side(P, window, sa, G.tol or 1e-9)
        dst = touching_side(P, window, sb, G.tol or 1e-9)
        want_open = ev.color == "open"

        def fn(a, b):
            return _kernels.crossing_trials(indptr, nbr, eid, corner, src, dst, p, seed, a, b,
                                            mode, want_open, ev.diagonal)
    return _run_chunks(fn, trials, workers)


def monte_carlo(E: EventSpec, P: Packing | None, G: AdjacencyGraph, p: float, trials: int,
                seed: int, workers: int | None = None) -> Estimate:
    """Hit frequency of an event with a 95% Wilson interval."""
    t = time.perf_counter()
    out = trial_outcomes(E, P, G, p, trials, seed, workers)
    hits = int(out.sum())
    return Estimate(hits, trials, hits / trials, wilson_interval(hits, trials), seed, p,
                    E.event.label, time.perf_counter() - t)


# ---------------------------------------------------------------------------
# decay fits

class DecayUndetectable(ValueError):
    """Too few radii with a nonzero hit count to fit a slope."""


@dataclass
class DecayFit:
    slope: float
    intercept: float
    r2: float
    slope_stderr: float
    radii: np.ndarray
    estimates: list[Estimate]


def cluster_extent(P: Packing, G: AdjacencyGraph, s0: int, p: float, trials: int, seed: int,
                   workers: int | None = None, mode: str = "site") -> np.ndarray:
    """Per trial, the largest distance from ``s0`` reached by its open cluster (-1: ``s0`` closed)."""
    _check_p(p)
    workers = default_workers() if workers is None else workers
    indptr, nbr, eid, _ = G.csr
    dist = distances_from(P, s0)
    m = _kernels.SITE if mode == "site" else _kernels.BOND
    return _run_chunks(lambda a, b: _kernels.cluster_reach(indptr, nbr, eid, dist, s0, p, seed, a, b, m),
                       trials, workers)


def fit_decay(P: Packing, G: AdjacencyGraph, s0: int, p: float, radii: Sequence[float], trials: int,
              seed: int, workers: int | None = None) -> DecayFit:
    """Least-squares fit of ``log P(reach r)`` against ``r``.

    All radii are read off the same trials (the cluster extent of each trial
    decides every radius at once).
    """
    radii = np.asarray(sorted(radii), float)
    if len(radii) < 4:
        raise ValueError("need at least four radii")
    ext = cluster_extent(P, G, s0, p, trials, seed, workers)
    ests = []
    for r in radii:
        hits = int(np.count_nonzero(ext >= r))
        ests.append(Estimate(hits, trials, hits / trials, wilson_interval(hits, trials), seed, p, f"reach:{r:g}"))
    ph = np.array([e.phat for e in ests])
    ok = ph > 0
    if ok.sum() < 4:
        raise DecayUndetectable(f"only {int(ok.sum())} radii with hits at p={p}, trials={trials}")
    x, y = radii[ok], np.log(ph[ok])
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    dof = len(x) - 2
    s2 = float((resid ** 2).sum()) / dof if dof > 0 else 0.0
    se = math.sqrt(s2 / float(((x - x.mean()) ** 2).sum()))
    return DecayFit(float(coef[0]), float(coef[1]), r2, se, radii, ests)


# ---------------------------------------------------------------------------
# critical point bisection

class NonBracketingError(ValueError):
    pass


@dataclass
class PcEstimate:
    lo: float
    hi: float
    probes: list[tuple[float, float]]

    @property
    def estimate(self) -> float:
        return 0.5 * (self.lo + self.hi)


def estimate_pc(family: Callable[[int], Packing] | Packing, n: int | None = None, *, trials: int = 10_000,
                seed: int = 0, direction: str = "left-right", color: str = "open", diagonal: bool = True,
                lo: float = 0.0, hi: float = 1.0, width: float = 0.01, threshold: float = 0.5,
                workers: int | None = None) -> PcEstimate:
    """Bisect on ``p`` for the crossing probability of a window to cross ``threshold``.

    The same seed is used at every probe, so with the monotone coupling the
    estimated crossing probability is non-decreasing in ``p``.
    """
    P = family if isinstance(family, Packing) else family(n)
    if len(P) < 2:
        raise ValueError("degenerate family: a single shape has no meaningful crossing threshold")
    G = build_graph(P)
    E = EventSpec(Crossing(window_of(P), direction, color, diagonal))
    probes = []

    def f(q):
        ph = monte_carlo(E, P, G, q, trials, seed, workers).phat
        probes.append((q, ph))
        return ph

    if not (f(lo) < threshold <= f(hi)):
        raise NonBracketingError(f"crossing probability does not cross {threshold} on [{lo}, {hi}]")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if f(mid) >= threshold:
            hi = mid
        else:
            lo = mid
    return PcEstimate(lo, hi, probes)
