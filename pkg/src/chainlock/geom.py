"""Small 3D geometry kernel: distances, piercing tests, hulls.

All predicates share one absolute tolerance, ``TOL``. When an input sits
inside the tolerance band a predicate reports the degeneracy instead of
guessing a side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.spatial import ConvexHull, QhullError

TOL = 1e-9


class GeometryError(ValueError):
    """Base class for degenerate geometric input."""


class DegenerateContact(GeometryError):
    """A segment touches a triangle's plane or boundary within tolerance."""


class DegenerateHull(GeometryError):
    """Hull input is (nearly) coplanar."""


class DegenerateSegment(GeometryError):
    pass


class DegenerateTriangle(GeometryError):
    pass


def vec3(x, y=None, z=None) -> np.ndarray:
    """Return a finite float64 3-vector from a triple or three scalars."""
    if y is None:
        v = np.asarray(x, dtype=float).reshape(3)
    else:
        v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise GeometryError(f"non-finite coordinates {v}")
    return v


@dataclass(frozen=True)
class Segment:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a, b = vec3(self.a), vec3(self.b)
        if np.linalg.norm(b - a) <= TOL:
            raise DegenerateSegment("segment endpoints coincide")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.b - self.a))


@dataclass(frozen=True)
class Triangle:
    p: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        p, q, r = vec3(self.p), vec3(self.q), vec3(self.r)
        if 0.5 * np.linalg.norm(np.cross(q - p, r - p)) <= TOL:
            raise DegenerateTriangle("triangle vertices are collinear")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)

    @property
    def normal(self) -> np.ndarray:
        """Unit normal, right-handed with respect to the order p, q, r."""
        n = np.cross(self.q - self.p, self.r - self.p)
        return n / np.linalg.norm(n)

    @property
    def centroid(self) -> np.ndarray:
        return (self.p + self.q + self.r) / 3.0


@dataclass(frozen=True)
class Plane:
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = vec3(self.normal)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise GeometryError("plane normal must have unit length")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def through(cls, point, normal) -> "Plane":
        n = vec3(normal)
        n = n / np.linalg.norm(n)
        return cls(n, float(n @ vec3(point)))

    def signed_distance(self, p) -> float:
        return float(self.normal @ vec3(p) - self.offset)


@dataclass(frozen=True)
class Pierce:
    pierces: bool
    sign: int = 0
    point: np.ndarray | None = None


# -- distances ---------------------------------------------------------------


@njit(cache=True)
def _point_seg_sq(px, py, pz, ax, ay, az, bx, by, bz):
    ux, uy, uz = bx - ax, by - ay, bz - az
    wx, wy, wz = px - ax, py - ay, pz - az
    uu = ux * ux + uy * uy + uz * uz
    t = 0.0
    if uu > 0.0:
        t = (wx * ux + wy * uy + wz * uz) / uu
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    dx, dy, dz = wx - t * ux, wy - t * uy, wz - t * uz
    return dx * dx + dy * dy + dz * dz


@njit(cache=True)
def _seg_seg(p0, p1, q0, q1):
    # Minimum over the four endpoint-to-segment distances and, when it is
    # interior to both segments, the common-perpendicular foot pair.
    best = _point_seg_sq(p0[0], p0[1], p0[2], q0[0], q0[1], q0[2], q1[0], q1[1], q1[2])
    d = _point_seg_sq(p1[0], p1[1], p1[2], q0[0], q0[1], q0[2], q1[0], q1[1], q1[2])
    if d < best:
        best = d
    d = _point_seg_sq(q0[0], q0[1], q0[2], p0[0], p0[1], p0[2], p1[0], p1[1], p1[2])
    if d < best:
        best = d
    d = _point_seg_sq(q1[0], q1[1], q1[2], p0[0], p0[1], p0[2], p1[0], p1[1], p1[2])
    if d < best:
        best = d
    ux, uy, uz = p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]
    vx, vy, vz = q1[0] - q0[0], q1[1] - q0[1], q1[2] - q0[2]
    wx, wy, wz = p0[0] - q0[0], p0[1] - q0[1], p0[2] - q0[2]
    a = ux * ux + uy * uy + uz * uz
    b = ux * vx + uy * vy + uz * vz
    c = vx * vx + vy * vy + vz * vz
    dd = ux * wx + uy * wy + uz * wz
    e = vx * wx + vy * wy + vz * wz
    den = a * c - b * b
    if den > 1e-14 * a * c:
        s = (b * e - c * dd) / den
        t = (a * e - b * dd) / den
        if 0.0 < s < 1.0 and 0.0 < t < 1.0:
            dx = wx + s * ux - t * vx
            dy = wy + s * uy - t * vy
            dz = wz + s * uz - t * vz
            d = dx * dx + dy * dy + dz * dz
            if d < best:
                best = d
    return math.sqrt(best)


@njit(cache=True)
def pair_distances(joints, ea, eb):
    """Distances between edge pairs; ``ea``/``eb`` hold (n, 2) joint indices."""
    out = np.empty(ea.shape[0])
    for k in range(ea.shape[0]):
        out[k] = _seg_seg(joints[ea[k, 0]], joints[ea[k, 1]],
                          joints[eb[k, 0]], joints[eb[k, 1]])
    return out


def seg_seg_distance(s1: Segment, s2: Segment) -> float:
    """Euclidean distance between two closed segments (0 when they touch)."""
    return float(_seg_seg(s1.a, s1.b, s2.a, s2.b))


def point_segment_distance(p, s: Segment) -> float:
    p = vec3(p)
    return math.sqrt(_point_seg_sq(*p, *s.a, *s.b))


# -- side and piercing predicates -------------------------------------------


def point_plane_side(p, pl: Plane) -> int:
    d = pl.signed_distance(p)
    if abs(d) <= TOL:
        return 0
    return 1 if d > 0 else -1


def seg_triangle_pierce(s: Segment, t: Triangle) -> Pierce:
    """Test whether the open segment crosses the open triangle interior.

    The returned sign is the side of the triangle's plane, oriented by the
    counterclockwise order ``p, q, r``, that holds the segment's end point
    ``b``. A segment crossing against the normal gets ``-1``.

    Raises
    ------
    DegenerateContact
        If an endpoint lies on the plane, or the crossing point lies on the
        triangle's boundary, within ``TOL``.
    """
    n = t.normal
    da = float(n @ (s.a - t.p))
    db = float(n @ (s.b - t.p))
    if abs(da) <= TOL or abs(db) <= TOL:
        raise DegenerateContact("segment endpoint lies on the triangle plane")
    if (da > 0) == (db > 0):
        return Pierce(False)
    x = s.a + (da / (da - db)) * (s.b - s.a)
    # in-plane distance of x to each edge line, positive inside
    h = []
    for u, v in ((t.p, t.q), (t.q, t.r), (t.r, t.p)):
        e = v - u
        h.append(float(np.cross(e, x - u) @ n) / np.linalg.norm(e))
    if min(h) < -TOL:
        return Pierce(False)
    if min(h) <= TOL:
        raise DegenerateContact("crossing point lies on the triangle boundary")
    return Pierce(True, 1 if db > 0 else -1, x)


def angle_between_lines(u, v) -> float:
    """Unsigned angle in [0, pi/2] between the lines spanned by u and v."""
    u, v = vec3(u), vec3(v)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu <= TOL or nv <= TOL:
        raise GeometryError("zero direction vector")
    c = min(1.0, abs(float(u @ v)) / (nu * nv))
    return min(math.acos(c), math.pi / 2)


# -- convex hulls ------------------------------------------------------------


@dataclass(frozen=True)
class Hull:
    """Closed triangulated hull. ``faces`` index ``points`` counterclockwise
    seen from outside."""

    points: np.ndarray
    faces: np.ndarray

    def face_planes(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.points[self.faces]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        n /= np.linalg.norm(n, axis=1)[:, None]
        return n, np.einsum("ij,ij->i", n, p[:, 0])

    def volume(self) -> float:
        p = self.points[self.faces]
        return float(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)

    @property
    def vertices(self) -> np.ndarray:
        return self.points[np.unique(self.faces)]


def convex_hull(points) -> Hull:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or not 4 <= len(pts) <= 32:
        raise ValueError("convex_hull takes between 4 and 32 points in 3D")
    c = pts.mean(axis=0)
    extent = np.linalg.svd(pts - c, compute_uv=False)
    if extent[-1] <= TOL:
        raise DegenerateHull("points are coplanar")
    try:
        qh = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateHull(str(exc)) from exc
    faces = qh.simplices.copy()
    tri = pts[faces]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    flip = np.einsum("ij,ij->i", n, tri[:, 0] - c) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return Hull(pts, faces)


@njit(cache=True)
def _closest_on_simplex(w, m):
    """Closest point to the origin on conv(w[:m]), 1 <= m <= 4.

    Enumerates every sub-simplex (at most 15). Returns the point and a
    bitmask of the supporting vertices.
    """
    best = np.zeros(3)
    best_sq = np.inf
    best_mask = 0
    for mask in range(1, 1 << m):
        idx = np.empty(4, dtype=np.int64)
        k = 0
        for i in range(m):
            if mask & (1 << i):
                idx[k] = i
                k += 1
        lam = np.zeros(4)
        if k == 1:
            lam[0] = 1.0
        else:
            g = np.empty((k - 1, k - 1))
            rhs = np.empty(k - 1)
            for a in range(k - 1):
                da = w[idx[a + 1]] - w[idx[0]]
                rhs[a] = -(da @ w[idx[0]])
                for b in range(k - 1):
                    g[a, b] = da @ (w[idx[b + 1]] - w[idx[0]])
            if abs(np.linalg.det(g)) <= 1e-300:
                continue
            mu = np.linalg.solve(g, rhs)
            lam[0] = 1.0 - mu.sum()
            for a in range(k - 1):
                lam[a + 1] = mu[a]
        ok = True
        for a in range(k):
            if lam[a] < -1e-12:
                ok = False
        if not ok:
            continue
        x = np.zeros(3)
        for a in range(k):
            x += lam[a] * w[idx[a]]
        sq = x @ x
        if sq < best_sq - 1e-18:
            best, best_sq, best_mask = x, sq, mask
    return best, best_mask


@njit(cache=True)
def _gjk(A, B, tol, max_iter):
    v = A[0] - B[0]
    w = np.zeros((4, 3))
    w[0] = v
    m = 1
    for _ in range(max_iter):
        vv = v @ v
        if vv <= 1e-24:
            return 0.0
        ia = np.argmax(A @ -v)
        ib = np.argmax(B @ v)
        p = A[ia] - B[ib]
        if vv - v @ p <= tol * max(vv, 1.0):
            break
        w[m] = p
        m += 1
        v, mask = _closest_on_simplex(w, m)
        k = 0
        for i in range(m):
            if mask & (1 << i):
                w[k] = w[i]
                k += 1
        m = k
        if m == 4:
            return 0.0
    return np.sqrt(max(v @ v, 0.0))


def point_set_distance(A, B, tol: float = 1e-12, max_iter: int = 100) -> float:
    """Distance between conv(A) and conv(B) by GJK on the vertex sets."""
    A = np.ascontiguousarray(A, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    return float(_gjk(A, B, tol, max_iter))


def hull_distance(A, B) -> float:
    """Minimum distance between two convex bodies, 0 when they intersect.

    ``A`` and ``B`` may be :class:`Hull` instances or raw point arrays; in the
    latter case their convex hulls are meant.
    """
    pa = A.vertices if isinstance(A, Hull) else np.asarray(A, dtype=float)
    pb = B.vertices if isinstance(B, Hull) else np.asarray(B, dtype=float)
    return point_set_distance(pa, pb)


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """Right-handed rotation about a unit axis (Rodrigues)."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)
