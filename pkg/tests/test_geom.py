"""Geometry kernel tests.

Oracles used here are deliberately dumb: dense parameter grids for segment
distances, surface-point sampling for hull distances, and face-sum volume
for hulls. None of them share code with the kernel.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from chainlock.geom import (
    DegenerateContact,
    DegenerateHull,
    DegenerateSegment,
    DegenerateTriangle,
    Plane,
    Segment,
    Triangle,
    angle_between_lines,
    convex_hull,
    hull_distance,
    point_plane_side,
    seg_seg_distance,
    seg_triangle_pierce,
)

coord = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
point = st.tuples(coord, coord, coord).map(np.array)


def seg(a, b):
    return Segment(np.array(a, float), np.array(b, float))


def grid_oracle(p0, p1, q0, q1, n=41, rounds=12):
    """Grid refinement over s of the convex function s -> dist(p(s), [q0, q1]).

    The inner distance uses an explicit clamped projection. For a convex
    function the true minimiser lies between the neighbours of the grid
    argmin, so shrinking to that bracket each round is safe.
    """
    e = q1 - q0

    def inner(P):
        t = np.clip(((P - q0) @ e) / (e @ e), 0.0, 1.0)
        return np.linalg.norm(P - (q0 + t[:, None] * e), axis=1)

    lo, hi = 0.0, 1.0
    best = math.inf
    for _ in range(rounds):
        s = np.linspace(lo, hi, n)
        d = inner(p0 + s[:, None] * (p1 - p0))
        i = int(np.argmin(d))
        best = min(best, d[i])
        lo, hi = s[max(i - 1, 0)], s[min(i + 1, n - 1)]
    return best


# -- segment distance --------------------------------------------------------

def test_collinear_gap():
    assert seg_seg_distance(seg((0, 0, 0), (1, 0, 0)), seg((2, 0, 0), (3, 0, 0))) == pytest.approx(1.0)


def test_crossing_segments_touch():
    assert seg_seg_distance(seg((0, 0, 0), (1, 0, 0)), seg((0.5, -1, 0), (0.5, 1, 0))) == pytest.approx(0.0, abs=1e-12)


def test_skew_segments_match_grid_oracle():
    p0, p1 = np.zeros(3), np.array([1.0, 0, 0])
    q0, q1 = np.array([0.5, -0.5, 1]), np.array([0.5, 0.5, 1])
    d = seg_seg_distance(Segment(p0, p1), Segment(q0, q1))
    assert d == pytest.approx(1.0, abs=1e-12)
    assert d == pytest.approx(grid_oracle(p0, p1, q0, q1), abs=1e-6)


def test_degenerate_segment_rejected():
    with pytest.raises(DegenerateSegment):
        seg((1, 1, 1), (1, 1, 1))


def test_random_pairs_against_grid_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10_000):
        p0, p1, q0, q1 = rng.uniform(-1, 1, (4, 3))
        d = seg_seg_distance(Segment(p0, p1), Segment(q0, q1))
        worst = max(worst, abs(d - grid_oracle(p0, p1, q0, q1)))
    assert worst < 1e-6


@settings(max_examples=300, deadline=None)
@given(point, point, point, point, st.integers(0, 2**31 - 1))
def test_distance_symmetric_and_rigid_invariant(a, b, c, d, seed):
    if np.linalg.norm(b - a) < 1e-6 or np.linalg.norm(d - c) < 1e-6:
        return
    s1, s2 = Segment(a, b), Segment(c, d)
    base = seg_seg_distance(s1, s2)
    assert seg_seg_distance(s2, s1) == pytest.approx(base, abs=1e-9)
    R = Rotation.random(random_state=seed).as_matrix()
    t = np.random.default_rng(seed).uniform(-3, 3, 3)
    moved = seg_seg_distance(Segment(R @ a + t, R @ b + t), Segment(R @ c + t, R @ d + t))
    assert moved == pytest.approx(base, abs=1e-9)


# -- piercing ---------------------------------------------------------------

UNIT_TRI = Triangle(np.array([0.0, 0, 0]), np.array([1.0, 0, 0]), np.array([0.0, 1, 0]))


def test_centroid_crossing_pierces_positive():
    c, n = UNIT_TRI.centroid, UNIT_TRI.normal
    r = seg_triangle_pierce(Segment(c - n, c + n), UNIT_TRI)
    assert r.pierces and r.sign == 1
    assert np.allclose(r.point, c)


def test_parallel_offset_segment_misses():
    r = seg_triangle_pierce(seg((5, 5, 1), (6, 5, 1)), UNIT_TRI)
    assert not r.pierces


def test_endpoint_on_plane_is_degenerate():
    with pytest.raises(DegenerateContact):
        seg_triangle_pierce(seg((0.2, 0.2, 0), (0.2, 0.2, 1)), UNIT_TRI)


def test_boundary_hit_is_degenerate():
    with pytest.raises(DegenerateContact):
        seg_triangle_pierce(seg((0.5, 0, -1), (0.5, 0, 1)), UNIT_TRI)


def test_collinear_triangle_rejected():
    with pytest.raises(DegenerateTriangle):
        Triangle(np.zeros(3), np.array([1.0, 0, 0]), np.array([2.0, 0, 0]))


@settings(max_examples=300, deadline=None)
@given(point, point, point, point, point)
def test_sign_flips_with_orientation(p, q, r, a, b):
    try:
        t, t_rev = Triangle(p, q, r), Triangle(p, r, q)
        s = Segment(a, b)
        fwd, rev = seg_triangle_pierce(s, t), seg_triangle_pierce(s, t_rev)
    except (DegenerateContact, DegenerateTriangle, DegenerateSegment):
        return
    assert fwd.pierces == rev.pierces
    if fwd.pierces:
        assert fwd.sign == -rev.sign


def test_piercing_agrees_with_barycentric_oracle():
    rng = np.random.default_rng(3)
    for _ in range(2000):
        p, q, r, a, b = rng.uniform(-1, 1, (5, 3))
        try:
            res = seg_triangle_pierce(Segment(a, b), Triangle(p, q, r))
        except (DegenerateContact, DegenerateTriangle):
            continue
        # oracle: solve a + s (b - a) = p + u (q - p) + v (r - p)
        M = np.column_stack([b - a, p - q, p - r])
        s, u, v = np.linalg.solve(M, p - a)
        hit = 0 < s < 1 and u > 0 and v > 0 and u + v < 1
        assert res.pierces == hit


# -- plane side -------------------------------------------------------------

@pytest.mark.parametrize("p, expected", [((0, 0, 1), 1), ((0, 0, -1), -1), ((0, 0, 0), 0)])
def test_point_plane_side(p, expected):
    assert point_plane_side(np.array(p, float), Plane(np.array([0.0, 0, 1]), 0.0)) == expected


# -- hulls -------------------------------------------------------------------

TETRA = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float)
CUBE = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], float)


def test_tetrahedron_has_four_faces():
    assert len(convex_hull(TETRA).faces) == 4


def test_tetrahedron_plus_centroid_same_faces():
    h = convex_hull(np.vstack([TETRA, TETRA.mean(0)]))
    assert len(h.faces) == 4
    n, off = h.face_planes()
    assert np.all(n @ TETRA.mean(0) - off < 0)


def test_cube_volume_from_faces():
    h = convex_hull(CUBE)
    assert len(h.faces) == 12
    assert h.volume() == pytest.approx(1.0, abs=1e-12)


def test_coplanar_points_rejected():
    with pytest.raises(DegenerateHull):
        convex_hull(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], float))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(4, 32))
def test_hull_contains_inputs(seed, n):
    pts = np.random.default_rng(seed).normal(size=(n, 3))
    h = convex_hull(pts)
    nrm, off = h.face_planes()
    assert np.all(pts @ nrm.T - off <= 1e-9)


def test_cubes_offset_by_three():
    assert hull_distance(convex_hull(CUBE), convex_hull(CUBE + [3, 0, 0])) == pytest.approx(2.0, abs=1e-9)


def test_overlapping_cubes():
    assert hull_distance(convex_hull(CUBE), convex_hull(CUBE + 0.5)) == 0.0


def _surface_samples(hull, n, rng):
    tri = hull.points[hull.faces]
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    f = rng.choice(len(tri), n, p=area / area.sum())
    u, v = rng.random(n), rng.random(n)
    flip = u + v > 1
    u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
    t = tri[f]
    return t[:, 0] + u[:, None] * (t[:, 1] - t[:, 0]) + v[:, None] * (t[:, 2] - t[:, 0])


def test_cube_tetra_distance_matches_sampling_oracle():
    from scipy.optimize import minimize
    from scipy.spatial import cKDTree

    tet = 0.4 * TETRA + [2.5, 0.3, 0.7]
    hc, ht = convex_hull(CUBE), convex_hull(tet)
    d = hull_distance(hc, ht)
    rng = np.random.default_rng(0)
    A, B = _surface_samples(hc, 40_000, rng), _surface_samples(ht, 40_000, rng)
    dd, _ = cKDTree(B).query(A)
    coarse = dd.min()
    assert d <= coarse + 1e-12
    assert coarse - d < 0.05

    # polish: distance to the unit cube is exact by clamping, so minimise it
    # over barycentric weights of the tetrahedron
    def g(w):
        p = w @ tet
        return np.linalg.norm(p - np.clip(p, 0.0, 1.0))

    res = minimize(g, np.full(4, 0.25), method="SLSQP", bounds=[(0, 1)] * 4,
                   constraints={"type": "eq", "fun": lambda w: w.sum() - 1},
                   options={"ftol": 1e-15, "maxiter": 500})
    assert d == pytest.approx(res.fun, abs=1e-6)


# -- angles ------------------------------------------------------------------

@pytest.mark.parametrize("u, v, expected", [
    ((1, 0, 0), (1, 0, 0), 0.0),
    ((1, 0, 0), (0, 1, 0), math.pi / 2),
    ((1, 0, 0), (1, 1, 0), math.pi / 4),
    ((1, 0, 0), (-1, 0, 0), 0.0),
])
def test_angle_between_lines(u, v, expected):
    assert angle_between_lines(np.array(u, float), np.array(v, float)) == pytest.approx(expected, abs=1e-12)
