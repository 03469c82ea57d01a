import math

import numpy as np
import pytest

from packperc.geometry import Box, set_distance, validate_packing, volume
from packperc.generators import (FAMILIES, GeneratorCapacityError, bond_counterexample, ellipse_ladder,
                                 hyperbolic_ball, hyperbolic_triangulation, moore_square_grid,
                                 random_square_tiling, triangle_times_n, triangle_times_n_graph,
                                 triangular_disk_lattice)
from packperc.graph import build_graph


def test_triangular_lattice_small_cases():
    assert len(triangular_disk_lattice(1)) == 1
    assert build_graph(triangular_disk_lattice(1)).num_edges == 0
    P = triangular_disk_lattice(2)
    # rhombus of 4 disks: 4 sides plus the short diagonal
    assert build_graph(P).edge_set() == {(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)}


def test_triangular_lattice_interior_degree():
    n = 10
    G = build_graph(triangular_disk_lattice(n))
    deg = G.degree().reshape(n, n)
    assert (deg[1:-1, 1:-1] == 6).all()
    assert validate_packing(triangular_disk_lattice(n)) == []


def test_triangular_window_tangent_to_outer_disks():
    P = triangular_disk_lattice(5)
    w = P.meta["window"]
    o, u, v = (np.asarray(w[k]) for k in ("origin", "u", "v"))
    c = np.array([s.center for s in P])
    # signed distances to the two pairs of sides
    nu = np.array([-u[1], u[0]]) / np.hypot(*u)
    nv = np.array([v[1], -v[0]]) / np.hypot(*v)
    du, dv = (c - o) @ nu, (c - o) @ nv
    assert du.min() == pytest.approx(1.0) and (abs(nu @ v) - du).min() == pytest.approx(1.0)
    assert dv.min() == pytest.approx(1.0) and (abs(nv @ u) - dv).min() == pytest.approx(1.0)


def test_moore_grid():
    G = build_graph(moore_square_grid(3))
    assert G.degree()[4] == 8
    assert build_graph(moore_square_grid(1)).num_edges == 0
    for n in (2, 5):
        deg = build_graph(moore_square_grid(n)).degree().reshape(n, n)
        assert deg[0, 0] == deg[-1, -1] == 3
        assert (deg[1:-1, 1:-1] == 8).all()


@pytest.mark.parametrize("seed", [0, 1, 17])
def test_random_square_tiling(seed):
    assert len(random_square_tiling(seed, 0)) == 1
    P = random_square_tiling(seed, 5)
    assert math.fsum(volume(s) for s in P) == pytest.approx(1.0, abs=1e-12)
    assert validate_packing(P) == []
    Q = random_square_tiling(seed, 5)
    assert [s.to_dict() for s in P] == [s.to_dict() for s in Q]
    assert all(isinstance(s, Box) for s in P)


def test_random_square_tiling_seed_changes_output():
    assert {len(random_square_tiling(s, 6)) for s in range(8)} != {len(random_square_tiling(0, 6))}


def test_triangle_times_n():
    P = triangle_times_n(12)
    rings = np.asarray(P.meta["rings"])
    assert len(P) == 36 and np.bincount(rings).tolist() == [3] * 12
    rmax = np.asarray(P.meta["ring_max_radius"])
    assert np.all(np.diff(rmax[3:]) > 0)
    assert validate_packing(P) == []
    assert P.meta["layout_residual"] <= 1e-6
    # every vertex of T is a tangency of the packing
    G = build_graph(P, 1e-6)
    assert G.num_edges == 3 * 12 + 6 * 11  # a triangle per ring, 6 rungs between consecutive rings
    with pytest.raises(GeneratorCapacityError):
        triangle_times_n(151)


def test_triangle_times_n_graph_matches_packing():
    G, rings = triangle_times_n_graph(12)
    assert G.edge_set() == build_graph(triangle_times_n(12), 1e-6).edge_set()
    assert rings.tolist() == np.repeat(np.arange(12), 3).tolist()


def test_ellipse_ladder():
    P = ellipse_ladder(16, 16)
    assert validate_packing(P) == []
    s0 = P[0]
    assert max(s0.half_widths()) * 2 == pytest.approx(1.0)
    for row in P.meta["rows"]:
        first = P[row["indices"][0]]
        assert set_distance(s0, first) <= 1e-9
    G = build_graph(P)
    # star of chains: s0 touches each row head, chains are paths
    assert sorted(G.neighbors(0).tolist()) == sorted(r["indices"][0] for r in P.meta["rows"])
    deg = G.degree()
    for row in P.meta["rows"]:
        idx = row["indices"]
        assert deg[idx[0]] == 2 and deg[idx[-1]] == 1
        assert all(deg[i] == 2 for i in idx[1:-1])
    assert G.num_edges == 16 * 8
    with pytest.raises(GeneratorCapacityError):
        ellipse_ladder(4, 40)


def test_bond_counterexample():
    P0 = bond_counterexample(0, 4)
    assert len(P0) == 16
    assert build_graph(P0).num_edges == 2 * 4 * 3
    P = bond_counterexample(6, 3)
    assert validate_packing(P) == []
    lattice = [s.center for s in P[:9]]
    for s in P[9:]:
        d = [math.dist(s.center, c) - 1 - s.radius for c in lattice]
        touching = [x for x in d if abs(x) <= 1e-9 * 2]
        assert len(touching) == 2
    with pytest.raises(GeneratorCapacityError):
        bond_counterexample(4000, 2)


def test_hyperbolic_ball():
    T = hyperbolic_triangulation(7, 3)
    deg = T.degree()
    assert (deg[T.interior] == 7).all()
    P = hyperbolic_ball(7, 3)
    assert validate_packing(P) == []
    rmax = np.asarray(P.meta["ring_max_radius"])
    assert np.all(np.diff(rmax) < 0)
    with pytest.raises(ValueError):
        hyperbolic_triangulation(6, 2)


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_generators_are_pure_and_valid(name):
    fn, keys = FAMILIES[name]
    small = {"n": 4, "seed": 3, "depth": 3, "split": 0.5, "levels": 6, "M": 4, "lines": 3, "length": 3,
             "gap": 1e-3, "degree": 7, "generations": 2}
    args = [small[k] for k in keys]
    P, Q = fn(*args), fn(*args)
    assert P.to_json() == Q.to_json()
    assert validate_packing(P) == []
