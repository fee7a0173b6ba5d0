"""Open polygonal chains with universal joints, fold moves and scene checks.

A :class:`Scene` is an immutable value. Every move produces a new scene; the
caller decides whether to keep it. Moves come in three kinds:

``suffix``
    joints after ``pivot`` rotate rigidly about an axis through joint ``pivot``.
``prefix``
    joints before ``pivot`` rotate about an axis through joint ``pivot``.
``rigid``
    the whole chain rotates about its joint centroid, then translates.

All three preserve every link length exactly (up to rounding) and are
inverted by negating ``angle`` and ``translation`` (for ``rigid`` moves the
inverse is applied in reverse order, see :func:`inverse_move`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from numba import njit

from .geom import (
    TOL,
    DegenerateContact,
    GeometryError,
    Segment,
    Triangle,
    pair_distances,
    rotation_matrix,
    seg_triangle_pierce,
)

ROLES = ("trapezoid16", "two_chain", "tangle3", "tangle4", "generic")
MOVE_KINDS = ("suffix", "prefix", "rigid")
STEP_CAP = 0.05


class ChainError(ValueError):
    pass


class RepeatedJoint(ChainError):
    pass


class BadPivot(ChainError):
    pass


class InvalidMove(ChainError):
    pass


@dataclass(frozen=True, eq=False)
class Chain:
    joints: np.ndarray
    reference_lengths: np.ndarray
    role: str = "generic"

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def n_edges(self) -> int:
        return len(self.joints) - 1

    def lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.joints, axis=0), axis=1)

    def segment(self, i: int) -> Segment:
        return Segment(self.joints[i], self.joints[i + 1])

    def with_joints(self, joints: np.ndarray) -> "Chain":
        joints = np.asarray(joints, dtype=float)
        joints.flags.writeable = False
        return Chain(joints, self.reference_lengths, self.role)


def make_chain(joints, role: str = "generic") -> Chain:
    """Build a chain, taking its reference link lengths from ``joints``."""
    pts = np.array(joints, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
        raise ChainError("a chain needs at least two 3D joints")
    if not np.all(np.isfinite(pts)):
        raise ChainError("non-finite joint coordinates")
    if role not in ROLES:
        raise ChainError(f"unknown role {role!r}")
    lengths = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(lengths <= TOL):
        raise RepeatedJoint("consecutive joints coincide")
    pts.flags.writeable = False
    lengths.flags.writeable = False
    return Chain(pts, lengths, role)


@dataclass(frozen=True)
class FoldMove:
    chain: int
    pivot: int
    axis: tuple[float, float, float]
    angle: float
    kind: str = "suffix"
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in MOVE_KINDS:
            raise InvalidMove(f"unknown move kind {self.kind!r}")
        ax = np.asarray(self.axis, dtype=float)
        if abs(np.linalg.norm(ax) - 1.0) > 1e-9:
            raise InvalidMove("move axis must be a unit vector")
        if not -math.pi < self.angle <= math.pi:
            raise InvalidMove("move angle must lie in (-pi, pi]")

    def to_dict(self) -> dict:
        return {
            "chain": self.chain,
            "pivot": self.pivot,
            "axis": [float(a) for a in self.axis],
            "angle": float(self.angle),
            "kind": self.kind,
            "translation": [float(t) for t in self.translation],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FoldMove":
        return cls(
            int(d["chain"]),
            int(d["pivot"]),
            tuple(float(a) for a in d["axis"]),
            float(d["angle"]),
            d.get("kind", "suffix"),
            tuple(float(t) for t in d.get("translation", (0.0, 0.0, 0.0))),
        )


def inverse_move(move: FoldMove) -> FoldMove:
    if move.kind == "rigid" and any(move.translation):
        raise InvalidMove("rigid moves with translation have no single-move inverse")
    return replace(move, angle=-move.angle if move.angle != -math.pi else math.pi)


def _move_plan(chain: Chain, move: FoldMove):
    """(moving-joint slice, rotation centre) for a move on ``chain``."""
    n = chain.n_joints
    if move.kind == "rigid":
        return slice(0, n), chain.joints.mean(axis=0)
    if not 1 <= move.pivot <= n - 2:
        raise BadPivot(f"pivot {move.pivot} is not interior to a {n}-joint chain")
    c = chain.joints[move.pivot]
    if move.kind == "suffix":
        return slice(move.pivot + 1, n), c
    return slice(0, move.pivot), c


def apply_fold(chain: Chain, move: FoldMove) -> Chain:
    sl, c = _move_plan(chain, move)
    R = rotation_matrix(move.axis, move.angle)
    joints = chain.joints.copy()
    joints[sl] = (joints[sl] - c) @ R.T + c + np.asarray(move.translation, dtype=float)
    return chain.with_joints(joints)


@dataclass(frozen=True)
class PiercingCertificate:
    """Edge ``piercer[1]`` of chain ``piercer[0]`` pierces the triangle spanned
    by joints ``target[1]`` of chain ``target[0]``, ending on side
    ``expected_sign`` of it."""

    piercer: tuple[int, int]
    target: tuple[int, tuple[int, int, int]]
    expected_sign: int
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "piercer": list(self.piercer),
            "target": [self.target[0], list(self.target[1])],
            "expected_sign": self.expected_sign,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PiercingCertificate":
        ch, tri = d["target"]
        return cls(
            (int(d["piercer"][0]), int(d["piercer"][1])),
            (int(ch), tuple(int(i) for i in tri)),
            int(d["expected_sign"]),
            d.get("label", ""),
        )


@dataclass(frozen=True, eq=False)
class Scene:
    chains: tuple[Chain, ...]
    epsilon: float
    tau: float
    certificates: tuple[PiercingCertificate, ...] = ()
    provenance: dict = field(default_factory=dict)

    def with_chain(self, index: int, chain: Chain) -> "Scene":
        chains = list(self.chains)
        chains[index] = chain
        return replace(self, chains=tuple(chains))

    def role_index(self, role: str) -> int:
        for i, ch in enumerate(self.chains):
            if ch.role == role:
                return i
        raise KeyError(role)

    def all_joints(self) -> np.ndarray:
        if not self.chains:
            return np.zeros((0, 3))
        return np.concatenate([c.joints for c in self.chains])


# -- validity ----------------------------------------------------------------


@dataclass(frozen=True)
class _Layout:
    offsets: np.ndarray  # first global joint index per chain
    edges: np.ndarray  # (E, 2) global joint indices
    edge_chain: np.ndarray
    pairs: np.ndarray  # (P, 2) non-adjacent edge index pairs
    corners: np.ndarray  # (K, 3) global joints a, b, c of adjacent edges


@lru_cache(maxsize=64)
def _layout(sizes: tuple[int, ...]) -> _Layout:
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    edges, owner, corners = [], [], []
    for ci, (off, n) in enumerate(zip(offsets, sizes)):
        for i in range(n - 1):
            edges.append((off + i, off + i + 1))
            owner.append(ci)
        for i in range(1, n - 1):
            corners.append((off + i - 1, off + i, off + i + 1))
    edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
    owner = np.array(owner, dtype=np.int64)
    pairs = []
    for i in range(len(edges)):
        for j in range(i + 1, len(edges)):
            if owner[i] == owner[j] and edges[j][0] == edges[i][1]:
                continue
            pairs.append((i, j))
    return _Layout(
        offsets,
        edges,
        owner,
        np.array(pairs, dtype=np.int64).reshape(-1, 2),
        np.array(corners, dtype=np.int64).reshape(-1, 3),
    )


def _scene_layout(scene: Scene) -> _Layout:
    return _layout(tuple(c.n_joints for c in scene.chains))


def _corner_gaps(J: np.ndarray, corners: np.ndarray) -> np.ndarray:
    """For adjacent edges ab, bc: min(dist(a, bc), dist(c, ab))."""
    if len(corners) == 0:
        return np.zeros(0)
    ab = np.stack([corners[:, 0], corners[:, 1]], axis=1)
    bc = np.stack([corners[:, 1], corners[:, 2]], axis=1)
    aa = np.stack([corners[:, 0], corners[:, 0]], axis=1)
    cc = np.stack([corners[:, 2], corners[:, 2]], axis=1)
    return np.minimum(pair_distances(J, aa, bc), pair_distances(J, cc, ab))


def min_clearance(scene: Scene) -> float:
    """Smallest distance between two non-adjacent links anywhere in the scene."""
    lay = _scene_layout(scene)
    if len(lay.pairs) == 0:
        return math.inf
    J = scene.all_joints()
    d = pair_distances(J, lay.edges[lay.pairs[:, 0]], lay.edges[lay.pairs[:, 1]])
    return float(d.min())


def scene_valid(scene: Scene) -> bool:
    lay = _scene_layout(scene)
    J = scene.all_joints()
    for ch in scene.chains:
        if not np.allclose(ch.lengths(), ch.reference_lengths, rtol=0.0, atol=1e-9):
            return False
    if len(lay.corners) and _corner_gaps(J, lay.corners).min() < scene.tau:
        return False
    return min_clearance(scene) >= scene.tau


def certificate_pierce(scene: Scene, cert: PiercingCertificate):
    ch, e = cert.piercer
    tc, (i, j, k) = cert.target
    tj = scene.chains[tc].joints
    return seg_triangle_pierce(scene.chains[ch].segment(e), Triangle(tj[i], tj[j], tj[k]))


def check_certificates(scene: Scene) -> bool:
    """True iff every certificate's edge still pierces its triangle with the
    recorded sign. Propagates :class:`DegenerateContact`."""
    for cert in scene.certificates:
        res = certificate_pierce(scene, cert)
        if not res.pierces or res.sign != cert.expected_sign:
            return False
    return True


# -- random moves and swept validity -------------------------------------------


def random_unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    while np.linalg.norm(v) < 1e-12:
        v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def random_fold(rng: np.random.Generator, scene: Scene, sigma: float) -> FoldMove:
    """Suffix fold at a uniformly chosen chain and interior pivot.

    The angle is normal with standard deviation ``sigma``, wrapped into
    (-pi, pi].
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    candidates = [i for i, c in enumerate(scene.chains) if c.n_joints >= 3]
    if not candidates:
        raise InvalidMove("no chain has an interior joint")
    ci = candidates[int(rng.integers(len(candidates)))]
    pivot = int(rng.integers(1, scene.chains[ci].n_joints - 1))
    axis = random_unit(rng)
    angle = float(rng.normal(0.0, sigma)) if sigma > 0 else 0.0
    angle = math.remainder(angle, 2 * math.pi)
    if angle == -math.pi:
        angle = math.pi
    return FoldMove(ci, pivot, tuple(axis), angle)


def sweep_move(scene: Scene, move: FoldMove, max_iter: int = 64) -> Scene | None:
    """Apply ``move`` if the whole motion keeps links at least ``tau`` apart.

    The motion is followed by conservative advancement: with every moving
    link's displacement bounded by its distance to the rotation axis times
    the angle (plus the translation), each step is sized so no moving link
    can close the gap to a static one. Returns ``None`` when the motion
    would bring links closer than ``tau`` or needs more than ``max_iter``
    steps.
    """
    if not 0 <= move.chain < len(scene.chains):
        raise InvalidMove(f"no chain with id {move.chain}")
    chain = scene.chains[move.chain]
    sl, c = _move_plan(chain, move)
    lay = _scene_layout(scene)
    off = int(lay.offsets[move.chain])
    J0 = scene.all_joints()
    moving = np.zeros(len(J0), dtype=bool)
    moving[off + sl.start: off + sl.stop] = True

    em = moving[lay.edges].any(axis=1)
    watch = lay.pairs[em[lay.pairs[:, 0]] != em[lay.pairs[:, 1]]]
    # orient as (moving edge, static edge)
    swap = ~em[watch[:, 0]]
    watch = np.where(swap[:, None], watch[:, ::-1], watch)
    ea = lay.edges[watch[:, 0]]
    eb = lay.edges[watch[:, 1]]

    axis = np.asarray(move.axis, dtype=float)
    trans = np.asarray(move.translation, dtype=float)
    rel = J0 - c
    radial = np.linalg.norm(rel - np.outer(rel @ axis, axis), axis=1)
    speed = radial[ea].max(axis=1) * abs(move.angle) + np.linalg.norm(trans)

    final_chain = apply_fold(chain, move)
    J1 = J0.copy()
    J1[moving] = final_chain.joints[sl]
    if len(watch) and not _advance(J0, np.flatnonzero(moving), c, axis, float(move.angle),
                                   trans, ea, eb, speed, float(scene.tau), max_iter, J1):
        return None

    if len(lay.corners):
        touched = moving[lay.corners].any(axis=1) & ~moving[lay.corners].all(axis=1)
        if touched.any() and _corner_gaps(J1, lay.corners[touched]).min() < scene.tau:
            return None
    return scene.with_chain(move.chain, final_chain)


@njit(cache=True)
def _advance(J0, mov, c, axis, angle, trans, ea, eb, speed, tau, max_iter, J1):
    """Conservative advancement along the move; True if it stays clear."""
    kx, ky, kz = axis[0], axis[1], axis[2]
    J = J0.copy()
    s = 0.0
    for _ in range(max_iter):
        d = pair_distances(J, ea, eb)
        if d.min() < tau:
            return False
        if s >= 1.0:
            return True
        step = np.inf
        for i in range(d.shape[0]):
            if speed[i] > 0.0:
                step = min(step, (d[i] - 0.5 * tau) / speed[i])
        s = min(1.0, s + step)
        if s >= 1.0:
            J[:] = J1
        else:
            a = s * angle
            sa, ca = math.sin(a), 1.0 - math.cos(a)
            for j in mov:
                px, py, pz = J0[j, 0] - c[0], J0[j, 1] - c[1], J0[j, 2] - c[2]
                # Rodrigues: p + sin a (k x p) + (1 - cos a) k x (k x p)
                cx, cy, cz = ky * pz - kz * py, kz * px - kx * pz, kx * py - ky * px
                ccx, ccy, ccz = ky * cz - kz * cy, kz * cx - kx * cz, kx * cy - ky * cx
                J[j, 0] = c[0] + px + sa * cx + ca * ccx + s * trans[0]
                J[j, 1] = c[1] + py + sa * cy + ca * ccy + s * trans[1]
                J[j, 2] = c[2] + pz + sa * cz + ca * ccz + s * trans[2]
    return False


def try_move(scene: Scene, move: FoldMove, enforce_certificates: bool = False,
             max_iter: int = 64) -> Scene | None:
    """:func:`sweep_move`, optionally also rejecting states that lose a
    certificate or touch a certificate triangle degenerately."""
    new = sweep_move(scene, move, max_iter=max_iter)
    if new is None or not enforce_certificates:
        return new
    try:
        return new if check_certificates(new) else None
    except (DegenerateContact, GeometryError):
        return None
