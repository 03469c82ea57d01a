"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines appear even when
output is captured.
"""
import io
import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from packperc.certify import certify_general_theorem, certify_square_theorem, max_certified_p
from packperc.circlepack import (PlanarMap, compute_radii, extend_to_triangulation, flower, layout,
                                 random_planar_map, ring_audit, tangency_residuals)
from packperc.cli import main
from packperc.generators import (bond_counterexample, ellipse_ladder, moore_square_grid, triangle_times_n_graph,
                                 triangular_disk_lattice)
from packperc.geometry import distances_from, mobius_invert
from packperc.graph import build_graph
from packperc.percolation import (Crossing, EventSpec, ReachAnyOf, ReachDistance, estimate_pc, fit_decay,
                                  monte_carlo, window_of)

E26 = math.exp(-26)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def direct_tail(x, m0, terms=1000):
    return math.fsum(m * x**m for m in range(m0, m0 + terms))


def test_c01_square_certificate(report):
    t = time.perf_counter()
    cert = certify_square_theorem(E26)
    dt = time.perf_counter() - t
    by = {e.name: e for e in cert.entries}
    oracle_c = 4 * math.exp(-2) + 544 * E26 * math.exp(18) + 80 * math.exp(4) * direct_tail(math.exp(-2), 8)
    oracle_d = 361 * E26 + 24 * direct_tail(math.exp(-1), 8)
    agree = (abs(by["c_induction"].lhs - oracle_c) <= 1e-12 * oracle_c
             and abs(by["d_infinity"].lhs - oracle_d) <= 1e-12 * oracle_d)
    margins = [e.margin for e in cert.entries]
    ok = cert.overall and len(margins) == 4 and min(margins) > 0 and agree and dt < 1.0
    report(1, ok, f"min margin {min(margins):.3g}, oracle agreement {agree}, {dt:.3f} s")


def test_c02_max_certified_p(report):
    ps = max_certified_p()
    with ThreadPoolExecutor(8) as ex:
        runs = set(ex.map(lambda _: max_certified_p(), range(8)))
    ok = E26 <= ps < 0.5 and runs == {ps} and max_certified_p() == ps
    report(2, ok, f"p* = {ps!r}, distinct values across runs/threads: {len(runs | {ps})}")


def test_c03_general_theorem(report):
    t = time.perf_counter()
    res = {}
    for d, eps in ((2, math.pi / 4), (3, 1.0)):
        m0, p, cert = certify_general_theorem(d, eps)
        res[(d, eps)] = p > 0 and cert.overall and all(e.passed for e in cert.entries)
    grid = [0.1, 0.25, 0.5, 0.75, 1.0]
    mono = all(np.all(np.diff([certify_general_theorem(d, e)[1] for e in grid]) >= 0) for d in (2, 3))
    dt = time.perf_counter() - t
    ok = all(res.values()) and mono and dt < 10
    report(3, ok, f"certificates {list(res.values())}, monotone in epsilon {mono}, {dt:.2f} s")


def test_c04_rhombus_crossing(report):
    t = time.perf_counter()
    P = triangular_disk_lattice(16)
    G = build_graph(P)
    e = monte_carlo(EventSpec(Crossing(window_of(P), "left-right")), P, G, 0.5, 10_000, 2024)
    dt = time.perf_counter() - t
    ok = abs(e.phat - 0.5) <= 0.02 and dt < 30
    report(4, ok, f"phat {e.phat:.4f} (target 0.50 +- 0.02), {dt:.2f} s")


def test_c05_moore_threshold(report):
    t = time.perf_counter()
    est = estimate_pc(moore_square_grid, 64, trials=10_000, seed=5)
    dt = time.perf_counter() - t
    ok = 0.39 <= est.estimate <= 0.42 and dt < 300
    report(5, ok, f"p_c ~ {est.estimate:.4f} in [{est.lo:.4f}, {est.hi:.4f}], {dt:.1f} s")


def test_c06_subcritical_decay(report):
    n = 50
    P = triangular_disk_lattice(n)
    G = build_graph(P)
    s0 = (n // 2) * n + n // 2
    fit = fit_decay(P, G, s0, 0.35, list(range(4, 33, 4)), 100_000, 6)
    ok = fit.slope < 0 and fit.r2 >= 0.95
    report(6, ok, f"slope {fit.slope:.4f} +- {fit.slope_stderr:.4f}, R^2 {fit.r2:.4f}")


def ladder_exact(P, p, r):
    """Exact reach probability by enumerating every state of each independent row."""
    d = distances_from(P, 0)
    miss = 1.0
    for row in P.meta["rows"]:
        far = [d[i] >= r for i in row["indices"]]
        L = len(far)
        q = 0.0
        for bits in itertools.product((0, 1), repeat=L):
            k = 0
            while k < L and bits[k]:
                k += 1
            if any(far[:k]):
                q += p ** sum(bits) * (1 - p) ** (L - sum(bits))
        miss *= 1 - q
    return p * (1 - miss)


def test_c07_ellipse_ladder(report):
    M, p = 16, 0.5
    P = ellipse_ladder(M, 16)
    G = build_graph(P)
    r = math.floor(math.log2(M)) * 1.0
    exact = ladder_exact(P, p, r)
    e = monte_carlo(EventSpec(ReachDistance(0, r)), P, G, p, 20_000, 7)
    ok = exact / 2 <= e.phat <= 2 * exact and e.phat >= math.exp(-1) * p / 2
    report(7, ok, f"measured {e.phat:.4f}, exact {exact:.4f}, floor e^-1 p/2 = {math.exp(-1) * p / 2:.4f}")


def test_c08_triangle_times_n(report):
    n, p = 5000, 0.9
    G, rings = triangle_times_n_graph(n)
    targets = tuple(np.flatnonzero(rings == n - 1).tolist())
    e = monte_carlo(EventSpec(ReachAnyOf(0, targets)), None, G, p, 1000, 8)
    bound = (1 - (1 - p) ** 3) ** n
    ok = e.phat < 0.05 and e.ci[0] <= bound
    report(8, ok, f"P(reach ring {n - 1}) = {e.phat:.4f} [{e.ci[0]:.4f}, {e.ci[1]:.4f}], bound {bound:.4f}")


def test_c09_bond_counterexample(report):
    P = bond_counterexample(50, 50)
    G = build_graph(P)
    W = window_of(P)
    bond = monte_carlo(EventSpec(Crossing(W, "left-right"), "bond"), P, G, 0.3, 1000, 9).phat
    site = monte_carlo(EventSpec(Crossing(W, "left-right"), "site"), P, G, 0.3, 1000, 9).phat
    eff = 1 - (1 - 0.3**2) ** 50
    ok = bond > 0.9 and site < 0.1
    report(9, ok, f"bond {bond:.3f}, site {site:.3f}, effective pair probability {eff:.4f}")


def test_c10_circle_packer(report):
    r7 = compute_radii(flower(7), 1.0).radii[0]
    seven = abs(r7 - (1 / math.sin(math.pi / 7) - 1)) <= 1e-9
    T, info = extend_to_triangulation(random_planar_map(120, 60, 3))
    D, _ = T.puncture(info["hubs"][0])
    R = compute_radii(D, 1.0)
    L = layout(D, R)
    _, res = tangency_residuals(D, L.centers, R.radii)
    hexa = ring_audit(layout(flower(6), compute_radii(flower(6), 1.0)))
    ok = seven and D.n >= 500 and res.max() <= 1e-6 and hexa.get(6) == 1.0
    report(10, ok, f"7-flower error {abs(r7 - (1 / math.sin(math.pi / 7) - 1)):.2g}, "
                   f"{D.n} vertices max tangency residual {res.max():.2g}, c_emp(6) = {hexa.get(6)}")


def test_c11_extension_degrees(report):
    k4 = PlanarMap.from_embedding([(0, 0), (1, 0), (0.5, 1), (0.5, 0.4)],
                                  [(0, 1), (1, 2), (2, 0), (0, 3), (1, 3), (2, 3)])
    c4 = PlanarMap([[3, 1], [0, 2], [1, 3], [2, 0]])
    ok, detail = True, []
    for name, H in (("K4", k4), ("C4", c4)):
        T, info = extend_to_triangulation(H)
        deg = T.degree()
        tripled = all(int(deg[v]) == 3 * H.degree(v) for v in info["original"])
        new = {w for v in info["original"] for w in T.rotation[v] if w >= H.n}
        five = all(int(deg[w]) == 5 for w in new)
        ok &= tripled and five
        detail.append(f"{name}: tripled {tripled}, new neighbours degree 5 {five}")
    report(11, ok, "; ".join(detail))


def test_c12_mobius_round_trip(report):
    P = triangular_disk_lattice(10)
    q0 = (1.0, 1.0 / math.sqrt(3.0))  # centre of the interstice between disks 0, 1 and 10
    Q = mobius_invert(P, q0)
    back = mobius_invert(Q, q0)
    c0 = np.array([s.center for s in P])
    c1 = np.array([s.center for s in back])
    rad0 = np.array([s.radius for s in P])
    rad1 = np.array([s.radius for s in back])
    err = max(np.abs(c1 - c0).max() / np.abs(c0).max(), np.abs(rad1 / rad0 - 1).max())
    e0, e1 = build_graph(P, 1e-9).num_edges, build_graph(Q, 1e-9).num_edges
    ok = len(P) == 100 and err <= 1e-9 and e0 == e1
    report(12, ok, f"round-trip relative error {err:.2g}, tangencies {e0} -> {e1}")


def test_c13_cli_determinism(report):
    outs = []
    for w in (1, 4, 8):
        buf = io.StringIO()
        code = main(["estimate", "--family", "triangular", "--n", "16", "--event", "crossing", "--p", "0.5",
                     "--trials", "10000", "--seed", "7", "--workers", str(w)], buf)
        outs.append((code, buf.getvalue().encode("utf-8")))
    ok = all(c == 0 for c, _ in outs) and len({b for _, b in outs}) == 1
    report(13, ok, f"exit codes {[c for c, _ in outs]}, distinct outputs {len({b for _, b in outs})}")
