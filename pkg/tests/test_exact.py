from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxglue import exact


def test_simplex_small_lp():
    # min -x - y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6  -> x = 8/5, y = 6/5
    res = exact.simplex([-1, -1, 0, 0], [[1, 2, 1, 0], [3, 1, 0, 1]], [4, 6])
    assert res.status == "optimal"
    assert res.x[:2] == [F(8, 5), F(6, 5)]
    assert res.objective == F(-14, 5)


def test_simplex_infeasible_and_unbounded():
    assert exact.simplex([1, 1], [[1, 1]], [-1]).status == "infeasible"
    assert exact.simplex([-1, 0], [[1, -1]], [0]).status == "unbounded"


def test_simplex_redundant_rows():
    res = exact.simplex([1, 2, 0], [[1, 1, 1], [2, 2, 2], [1, 0, 0]], [1, 2, F(1, 3)])
    assert res.status == "optimal" and res.x == [F(1, 3), 0, F(2, 3)]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_simplex_optimum_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(0, 4, size=(2, 5)).tolist()
    x0 = rng.integers(0, 3, size=5)
    b = (np.array(A) @ x0).tolist()
    c = rng.integers(-3, 4, size=5).tolist()
    res = exact.simplex(c, A, b)
    bfs = list(exact.basic_feasible_solutions(A, b))
    assert bfs  # x0 is feasible, so some vertex exists
    best = min(sum(F(ci) * xi for ci, xi in zip(c, x)) for x in bfs)
    if res.status == "optimal":
        assert res.objective == best
    else:
        assert res.status == "unbounded"


def test_hull_distance_and_interior():
    verts = [[1, 0], [0, 1]]
    d, w = exact.hull_distance_exact(verts, [F(1, 3), F(2, 3)])
    assert d == 0 and w == [F(1, 3), F(2, 3)]
    t, w = exact.hull_interior_exact(verts, [F(1, 3), F(2, 3)])
    assert t == F(1, 3)
    d, _ = exact.hull_distance_exact(verts, [F(1), F(1)])
    assert d == 1  # every point (a, 1 - a) of the segment is at L1 distance 1
    assert exact.hull_interior_exact(verts, [F(1), F(1)]) is None


def test_solve_and_rank():
    assert exact.solve_exact([[2, 1], [1, 3]], [3, 5]) == [F(4, 5), F(7, 5)]
    assert exact.solve_exact([[1, 1], [2, 2]], [1, 3]) is None
    assert exact.rank_exact([[1, 2], [2, 4], [0, 1]]) == 2


def test_dimension_mismatch():
    with pytest.raises(exact.LPError):
        exact.simplex([1, 2], [[1]], [1])
