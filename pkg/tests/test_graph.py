import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from packperc.geometry import Box, Disk, Ellipse, Packing
from packperc.graph import AdjacencyGraph, brute_force_graph, build_graph, candidate_pairs, shells


def random_disk_packing(seed, n=120):
    """Greedy random packing with many exact tangencies and mixed sizes."""
    rng = np.random.default_rng(seed)
    disks = [Disk((0.0, 0.0), 1.0)]
    while len(disks) < n:
        parent = disks[rng.integers(len(disks))]
        r = float(rng.choice([0.05, 0.3, 1.0, 2.5]))
        ang = rng.uniform(0, 2 * math.pi)
        d = parent.radius + r
        c = (parent.center[0] + d * math.cos(ang), parent.center[1] + d * math.sin(ang))
        ok = all(math.dist(c, q.center) >= r + q.radius - 1e-12 for q in disks)
        if ok:
            disks.append(Disk(c, r))
    return Packing(tuple(disks))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_indexed_graph_matches_brute_force(seed):
    P = random_disk_packing(seed)
    assert build_graph(P).edge_set() == brute_force_graph(P).edge_set()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_candidate_pairs_superset_of_edges(seed):
    P = random_disk_packing(seed, 40)
    cand = {tuple(x) for x in candidate_pairs(P, 1e-9)}
    assert brute_force_graph(P).edge_set() <= cand


def test_mixed_shapes_match_brute_force():
    shapes = [Box((0, 0), (1, 1)), Box((1, 0), (2, 2)), Disk((4, 1), 1.0),
              Ellipse((1.5, 3.0), 1.5, 0.5, 0.0), Disk((6.0, 1.0), 1.0), Box((10, 10), (0.01, 0.01))]
    P = Packing(tuple(shapes))
    assert build_graph(P).edge_set() == brute_force_graph(P).edge_set()


def test_moore_grid_degrees_and_corner_flags():
    P = Packing(tuple(Box((float(i), float(j)), (1.0, 1.0)) for i in range(3) for j in range(3)))
    G = build_graph(P)
    assert G.degree().tolist() == [3, 5, 3, 5, 8, 5, 3, 5, 3]
    assert int(G.corner.sum()) == 8
    corner_pairs = {tuple(e) for e, c in zip(G.edges.tolist(), G.corner) if c}
    assert (0, 4) in corner_pairs and (1, 3) in corner_pairs


def test_multiscale_tangencies_found():
    big = Disk((0.0, 0.0), 1e4)
    small = Disk((1e4 + 1e-3, 0.0), 1e-3)
    tiny = Disk((1e4 + 2e-3 + 1e-6, 0.0), 1e-6)
    P = Packing((big, small, tiny))
    assert build_graph(P).edge_set() == {(0, 1), (1, 2)}


def test_tolerance_is_relative_to_larger_diameter():
    a, b = Disk((0, 0), 1.0), Disk((2.0 + 1e-7, 0), 1.0)
    P = Packing((a, b))
    assert build_graph(P, 1e-9).num_edges == 0
    assert build_graph(P, 1e-7).num_edges == 1


def test_graph_normalizes_and_exports():
    G = AdjacencyGraph.from_edges(4, [(2, 1), (0, 3), (1, 2)])
    assert G.edges.tolist() == [[0, 3], [1, 2]]
    assert G.to_csv() == "0,3\n1,2\n"
    assert G.neighbors(2).tolist() == [1]
    with pytest.raises(ValueError):
        AdjacencyGraph.from_edges(2, [(1, 1)])


def test_shells_on_a_chain():
    # unit disks centred at (2k, 0): d(s0, s_k) = 2k - 2
    P = Packing(tuple(Disk((2.0 * k, 0.0), 1.0) for k in range(7)))
    near, sh = shells(P, 0, 2.0)
    assert near == [1]
    assert sh == {0: [2], 1: [3], 2: [4], 3: [5], 4: [6]}
    near, sh = shells(P, 0, 2.0, m0=2)
    assert near == [1, 2, 3]
    assert sh == {2: [4], 3: [5], 4: [6]}
    with pytest.raises(ValueError):
        shells(P, 0, 0.0)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_unit_square_packings_have_degree_at_most_8(seed):
    # stacked rows of unit squares, each row shifted by a random offset (0 allowed, giving corner contacts)
    rng = np.random.default_rng(seed)
    shifts = rng.choice([0.0, 0.25, 0.5, rng.uniform()], size=6)
    P = Packing(tuple(Box((i + s, float(j)), (1.0, 1.0)) for j, s in enumerate(shifts) for i in range(6)))
    assert build_graph(P).degree().max() <= 8


@pytest.mark.parametrize("seed", [0, 1])
def test_unit_diameter_disks_respect_regularity_degree_bound(seed):
    # 3^d / eps with d = 2, eps = pi/4
    rng = np.random.default_rng(seed)
    disks = [Disk((0.0, 0.0), 0.5)]
    for _ in range(4000):
        parent = disks[rng.integers(len(disks))]
        ang = rng.uniform(0, 2 * math.pi)
        c = (parent.center[0] + math.cos(ang), parent.center[1] + math.sin(ang))
        if all(math.dist(c, q.center) >= 1 - 1e-12 for q in disks):
            disks.append(Disk(c, 0.5))
    G = build_graph(Packing(tuple(disks)))
    assert G.degree().max() <= 9 / (math.pi / 4)
