"""Compiled per-trial loops.  Bits are drawn lazily from the counter-based
generator, so a trial only pays for the vertices and edges it inspects."""
import numba as nb
import numpy as np

from .rng import BOND_STREAM, SITE_STREAM, uniform_nb

SITE, BOND = 0, 1


@nb.njit(nogil=True, cache=True)
def reach_trials(indptr, nbr, eid, target, s0, p, seed, t0, t1, mode):
    """1 per trial in which ``s0`` reaches any vertex flagged in ``target``."""
    n = indptr.shape[0] - 1
    out = np.zeros(t1 - t0, np.uint8)
    seen = np.zeros(n, np.int64)
    queue = np.empty(n, np.int64)
    for t in range(t0, t1):
        stamp = t - t0 + 1
        if mode == SITE and not uniform_nb(seed, SITE_STREAM, t, s0) < p:
            continue
        if target[s0]:
            out[t - t0] = 1
            continue
        seen[s0] = stamp
        head, tail = 0, 1
        queue[0] = s0
        hit = False
        while head < tail and not hit:
            v = queue[head]
            head += 1
            for k in range(indptr[v], indptr[v + 1]):
                w = nbr[k]
                if seen[w] == stamp:
                    continue
                if mode == SITE:
                    seen[w] = stamp
                    if not uniform_nb(seed, SITE_STREAM, t, w) < p:
                        continue
                else:
                    if not uniform_nb(seed, BOND_STREAM, t, eid[k]) < p:
                        continue
                    seen[w] = stamp
                if target[w]:
                    hit = True
                    break
                queue[tail] = w
                tail += 1
        if hit:
            out[t - t0] = 1
    return out


@nb.njit(nogil=True, cache=True)
def cluster_reach(indptr, nbr, eid, dist, s0, p, seed, t0, t1, mode):
    """Largest ``dist`` over the open cluster of ``s0`` per trial (-1 if ``s0`` is closed)."""
    n = indptr.shape[0] - 1
    out = np.full(t1 - t0, -1.0)
    seen = np.zeros(n, np.int64)
    queue = np.empty(n, np.int64)
    for t in range(t0, t1):
        stamp = t - t0 + 1
        if mode == SITE and not uniform_nb(seed, SITE_STREAM, t, s0) < p:
            continue
        seen[s0] = stamp
        head, tail = 0, 1
        queue[0] = s0
        best = dist[s0]
        while head < tail:
            v = queue[head]
            head += 1
            if dist[v] > best:
                best = dist[v]
            for k in range(indptr[v], indptr[v + 1]):
                w = nbr[k]
                if seen[w] == stamp:
                    continue
                if mode == SITE:
                    seen[w] = stamp
                    if not uniform_nb(seed, SITE_STREAM, t, w) < p:
                        continue
                else:
                    if not uniform_nb(seed, BOND_STREAM, t, eid[k]) < p:
                        continue
                    seen[w] = stamp
                queue[tail] = w
                tail += 1
        out[t - t0] = best
    return out


@nb.njit(nogil=True, cache=True)
def crossing_trials(indptr, nbr, eid, corner, src, dst, p, seed, t0, t1, mode, want_open, diagonal):
    """1 per trial with a path of matching colour from a ``src`` vertex to a ``dst`` vertex."""
    n = indptr.shape[0] - 1
    out = np.zeros(t1 - t0, np.uint8)
    seen = np.zeros(n, np.int64)
    queue = np.empty(n, np.int64)
    for t in range(t0, t1):
        stamp = t - t0 + 1
        head, tail = 0, 0
        hit = False
        for v in range(n):
            if not src[v]:
                continue
            seen[v] = stamp
            if mode == SITE and (uniform_nb(seed, SITE_STREAM, t, v) < p) != want_open:
                continue
            if dst[v]:
                hit = True
                break
            queue[tail] = v
            tail += 1
        while head < tail and not hit:
            v = queue[head]
            head += 1
            for k in range(indptr[v], indptr[v + 1]):
                if corner[k] and not diagonal:
                    continue
                w = nbr[k]
                if seen[w] == stamp:
                    continue
                if mode == SITE:
                    seen[w] = stamp
                    if (uniform_nb(seed, SITE_STREAM, t, w) < p) != want_open:
                        continue
                else:
                    if (uniform_nb(seed, BOND_STREAM, t, eid[k]) < p) != want_open:
                        continue
                    seen[w] = stamp
                if dst[w]:
                    hit = True
                    break
                queue[tail] = w
                tail += 1
        if hit:
            out[t - t0] = 1
    return out
