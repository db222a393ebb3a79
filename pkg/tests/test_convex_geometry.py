import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from reachtime.convex_geometry import (
    DirectionGrid, GeometryError, Polytope, box, convex_hull_normalize, direction_grid, hausdorff_distance,
    interval_direction_grid, linear_image, minkowski_sum, point, point_distance,
    polytope_from_directions, scale, support_function, support_values, supporting_point,
    uniform_direction_grid, vertex_set_equal, HausdorffBracket,
)

SQ = box([-1, -1], [1, 1])
R2 = 1 / math.sqrt(2)


def as_set(P):
    return {tuple(np.round(v, 12)) for v in P.vertices}


# --- support function / supporting point ----------------------------------

def test_support_function_square():
    assert support_function(SQ, [1, 0]) == 1.0
    assert support_function(SQ, [R2, R2]) == pytest.approx(math.sqrt(2), abs=1e-15)
    assert support_function(point([0, 0]), [0.6, 0.8]) == 0.0


def test_supporting_point_tie_break_is_lexicographic_max():
    assert supporting_point(SQ, [1, 0]).tolist() == [1, 1]
    assert supporting_point(SQ, [R2, R2]).tolist() == [1, 1]
    seg = convex_hull_normalize([[-1, 0], [1, 0]], 2)
    assert supporting_point(seg, [0, 1]).tolist() == [1, 0]


def test_support_requires_unit_direction():
    with pytest.raises(GeometryError):
        support_function(SQ, [2, 0])
    with pytest.raises(GeometryError):
        supporting_point(SQ, [1, 0, 0])


def test_empty_polytope_rejected():
    with pytest.raises(GeometryError):
        Polytope(np.empty((0, 2)))


# --- set operations -----------------------------------------------------------

def test_minkowski_translation():
    P = minkowski_sum(SQ, point([2, 0]))
    assert as_set(P) == {(1, -1), (3, -1), (3, 1), (1, 1)}


def test_minkowski_intervals():
    P = minkowski_sum(box([-1], [1]), box([-1], [1]))
    assert sorted(P.vertices.ravel().tolist()) == [-2, 2]


def test_minkowski_segments_give_square():
    a = convex_hull_normalize([[-1, 0], [1, 0]], 2)
    b = convex_hull_normalize([[0, -1], [0, 1]], 2)
    assert vertex_set_equal(minkowski_sum(a, b), SQ)


def test_minkowski_dimension_mismatch():
    with pytest.raises(GeometryError):
        minkowski_sum(SQ, box([-1], [1]))


def test_linear_images():
    assert vertex_set_equal(linear_image(np.eye(2), SQ), SQ)
    assert vertex_set_equal(linear_image(2 * np.eye(2), SQ), box([-2, -2], [2, 2]))
    seg = convex_hull_normalize([[0, 0], [1, 0]], 2)
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert as_set(linear_image(rot, seg)) == {(0, 0), (0, 1)}
    with pytest.raises(GeometryError):
        linear_image(np.eye(3), SQ)


# --- hull normalization --------------------------------------------------------

def test_hull_drops_interior_point():
    P = convex_hull_normalize([[0, 0], [1, 0], [0.5, 0.25], [0, 1], [1, 1]], 2)
    assert as_set(P) == {(0, 0), (1, 0), (0, 1), (1, 1)}
    assert P.area() == pytest.approx(1.0)  # CCW order


def test_hull_keeps_end_point_of_near_vertical_cloud():
    P = convex_hull_normalize([[0, 0], [0, 1], [-4e-38, 0.5]], 2)
    assert support_function(P, [0, -1]) == 0.0
    assert support_function(P, [0, 1]) == 1.0


def test_hull_singleton_and_collinear():
    assert convex_hull_normalize([[0, 0]], 2).n_vertices == 1
    P = convex_hull_normalize([[0, 0], [1, 1], [2, 2], [0.5, 0.5]], 2)
    assert as_set(P) == {(0, 0), (2, 2)}


def test_hull_random_disc_points_against_brute_force():
    rng = np.random.default_rng(3)
    r = np.sqrt(rng.random(100))
    a = 2 * np.pi * rng.random(100)
    pts = np.c_[r * np.cos(a), r * np.sin(a)]
    P = convex_hull_normalize(pts, 2)
    # brute force: a point is extreme iff some direction makes it the strict unique maximizer
    ang = np.linspace(0, 2 * np.pi, 200_000, endpoint=False)
    D = np.c_[np.cos(ang), np.sin(ang)]
    extreme = set(np.unique((D @ pts.T).argmax(axis=1)).tolist())
    assert as_set(P) == {tuple(np.round(pts[i], 12)) for i in extreme}


def test_hull_three_d_filters_interior():
    cube = box([0, 0, 0], [1, 1, 1])
    P = convex_hull_normalize(np.vstack([cube.vertices, [[0.5, 0.5, 0.5], [0.2, 0.3, 0.1]]]), 3)
    assert P.n_vertices == 8


# --- Hausdorff distance -----------------------------------------------------------

def test_hausdorff_nested_squares():
    assert hausdorff_distance(box([0, 0], [1, 1]), box([0, 0], [2, 2])) == pytest.approx(math.sqrt(2))
    assert hausdorff_distance(SQ, SQ) == 0.0


def test_hausdorff_hexagon_inscribed_in_circle():
    # regular hexagon vs fine 4096-gon approximating the unit circle: 1 - cos(pi/6)
    ang = np.arange(6) * np.pi / 3
    hexa = convex_hull_normalize(np.c_[np.cos(ang), np.sin(ang)], 2)
    a = np.arange(4096) * 2 * np.pi / 4096
    circ = convex_hull_normalize(np.c_[np.cos(a), np.sin(a)], 2)
    assert hausdorff_distance(hexa, circ) == pytest.approx(0.1339745962155613, abs=1e-6)


def test_hausdorff_dimension_mismatch():
    with pytest.raises(GeometryError):
        hausdorff_distance(SQ, box([0], [1]))


def test_hausdorff_bracket_three_d():
    a = box([0, 0, 0], [1, 1, 1])
    b = box([0, 0, 0], [2, 2, 2])
    br = hausdorff_distance(a, b)
    assert isinstance(br, HausdorffBracket)
    assert br.lower <= math.sqrt(3) + 1e-9 <= br.upper + 1e-6
    assert br.width >= 0


def test_square_vs_circle_approximation_bound():
    G = uniform_direction_grid(64)
    disc = convex_hull_normalize(np.c_[np.cos(np.linspace(0, 2 * np.pi, 2000)), np.sin(np.linspace(0, 2 * np.pi, 2000))], 2)
    approx = polytope_from_directions(disc, G)
    assert hausdorff_distance(disc, approx) <= 2 * disc.diameter() * G.density_eps


# --- direction grids ------------------------------------------------------------------

def test_uniform_grid_four():
    G = uniform_direction_grid(4)
    np.testing.assert_allclose(G.directions, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)
    assert G.density_eps == pytest.approx(0.76537, abs=1e-5)


@pytest.mark.parametrize("n", [4, 7, 360])
def test_grid_density_matches_angular_scan(n):
    G = uniform_direction_grid(n)
    a = np.linspace(0, 2 * np.pi, 720_001)
    probe = np.c_[np.cos(a), np.sin(a)]
    chord = np.sqrt(np.maximum(2 - 2 * (probe @ G.directions.T).max(axis=1), 0)).max()
    assert chord == pytest.approx(G.density_eps, rel=1e-6)
    if n == 360:
        assert G.density_eps == pytest.approx(0.008727, abs=1e-6)


def test_grid_needs_three_directions():
    with pytest.raises(GeometryError):
        uniform_direction_grid(2)
    assert interval_direction_grid().density_eps == 0.0


def test_polytope_from_directions_examples():
    # exact axis directions: every face is a two-vertex tie, lexicographic max picks 3 corners
    axes = DirectionGrid(np.array([[1.0, 0], [0, 1], [-1, 0], [0, -1]]), 2 * math.sin(math.pi / 8))
    assert as_set(polytope_from_directions(SQ, axes)) == {(1, 1), (-1, 1), (1, -1)}
    assert vertex_set_equal(polytope_from_directions(SQ, uniform_direction_grid(8)), SQ)
    p = point([0.3, -0.2])
    assert vertex_set_equal(polytope_from_directions(p, uniform_direction_grid(17)), p)


def test_polytope_from_directions_random_hexagon():
    rng = np.random.default_rng(11)
    ang = np.sort(rng.random(6)) * 2 * np.pi
    P = convex_hull_normalize(np.c_[np.cos(ang), np.sin(ang)] * (1 + rng.random((6, 1))), 2)
    G = uniform_direction_grid(256)
    assert hausdorff_distance(P, polytope_from_directions(P, G)) <= 2 * P.diameter() * G.density_eps


def test_json_roundtrip():
    P = convex_hull_normalize([[0, 0], [2, 0], [1, 3]], 2)
    Q = Polytope.from_json(P.to_json())
    assert vertex_set_equal(P, Q)
    with pytest.raises(GeometryError):
        Polytope.from_json({"dim": 3, "vertices": [[0, 0]]})


# --- properties -----------------------------------------------------------------------

coords = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
clouds = arrays(np.float64, st.tuples(st.integers(1, 12), st.just(2)), elements=coords)
angles = st.floats(0, 2 * np.pi, allow_nan=False)


def unit(a):
    return np.array([math.cos(a), math.sin(a)])


@settings(max_examples=200, deadline=None)
@given(clouds, clouds, st.lists(angles, min_size=1, max_size=8))
def test_support_additivity(p, q, alist):
    P, Q = convex_hull_normalize(p, 2), convex_hull_normalize(q, 2)
    S = minkowski_sum(P, Q)
    L = np.array([unit(a) for a in alist])
    lhs = support_values(S, L)
    rhs = support_values(P, L) + support_values(Q, L)
    assert np.all(np.abs(lhs - rhs) <= 1e-10 * (1 + np.abs(lhs)))


@settings(max_examples=200, deadline=None)
@given(clouds, arrays(np.float64, (2, 2), elements=st.floats(-3, 3)), angles)
def test_linear_image_adjoint_identity(p, M, a):
    P = convex_hull_normalize(p, 2)
    l = unit(a)
    lhs = support_values(linear_image(M, P), l[None])[0]
    rhs = support_values(P, (M.T @ l)[None])[0]
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))


@settings(max_examples=100, deadline=None)
@given(clouds, angles)
def test_supporting_point_is_vertex_and_attains_support(p, a):
    P = convex_hull_normalize(p, 2)
    l = unit(a)
    y = supporting_point(P, l)
    assert any(np.array_equal(y, v) for v in P.vertices)
    assert float((l * y).sum()) == support_function(P, l)


@settings(max_examples=100, deadline=None)
@given(clouds, st.integers(3, 64))
def test_inner_approximation_and_bound(p, n):
    P = convex_hull_normalize(p, 2)
    G = uniform_direction_grid(n)
    A = polytope_from_directions(P, G)
    probe = uniform_direction_grid(720).directions
    assert np.all(support_values(A, probe) <= support_values(P, probe) + 1e-10)
    assert hausdorff_distance(P, A) <= 2 * P.diameter() * G.density_eps + 1e-9


@settings(max_examples=100, deadline=None)
@given(clouds, clouds, clouds)
def test_hausdorff_metric_axioms(a, b, c):
    A, B, C = (convex_hull_normalize(x, 2) for x in (a, b, c))
    assert hausdorff_distance(A, B) == hausdorff_distance(B, A)
    assert hausdorff_distance(A, C) <= hausdorff_distance(A, B) + hausdorff_distance(B, C) + 1e-10


@settings(max_examples=100, deadline=None)
@given(clouds, st.floats(0, 4))
def test_scaling_identity(p, lam):
    P = convex_hull_normalize(p, 2)
    L = uniform_direction_grid(16).directions
    assert np.allclose(support_values(scale(lam, P), L), lam * support_values(P, L), atol=1e-10 * (1 + lam * 5))


def test_point_distance_inside_and_outside():
    d = point_distance(np.array([[0, 0], [2, 0], [2, 2]]), SQ)
    np.testing.assert_allclose(d, [0, 1, math.sqrt(2)])


def test_direction_grid_three_d_is_unit():
    G = direction_grid(3, 200)
    np.testing.assert_allclose(np.linalg.norm(G.directions, axis=1), 1)
    assert 0 < G.density_eps < 0.5


def test_hull_merges_near_duplicates_far_apart_in_sort_order():
    pts = [[-1.2070121628679507, 1.2350053831068375], [1.6252815102263343, -0.583589470544526],
           [0.7058861219626138, 1.0993524990712671], [0.0, -1.175494351e-38], [-2.354324402575911e-244, 0.0]]
    P = convex_hull_normalize(pts, 2)
    assert P.n_vertices == 4
    d = np.abs(P.vertices[:, None] - P.vertices[None]).max(-1) + np.eye(4)
    assert d.min() > 1e-3


def test_hull_of_near_vertical_cloud_is_convex():
    pts = [[-1.2070121628679507, 1.2350053831068375], [1.6252815102263343, -0.583589470544526],
           [0.7058861219626138, 1.0993524990712671], [0.0, 0.0], [0.0, 2.0], [7.348422959289663e-42, 1.0]]
    P = convex_hull_normalize(pts, 2)
    v = P.vertices
    e = np.roll(v, -1, axis=0) - v
    assert np.all(e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0] > 0)
    assert P.n_vertices == 5
