"""Explicit coordinates for the tangle, jag, trapezoid and threaded 2-chain.

Length unit conventions
-----------------------
Inside a tangle the short links ``BC``, ``CD`` and ``xy`` have length
``lam`` (1 in unit mode, ``eps / 6`` in epsilon mode) and the end bars have
length ``3 * lam``.

The trapezoid lies in the plane ``z = 0`` with its long base on the x axis:
``T1 = (B, 0, 0)`` and ``T2 = (-B, 0, 0)`` are the base corners and
``T4``, ``T3`` sit a distance ``L`` up the right and left sides. The sides
extended meet at the apex ``(0, B tan(theta), 0)``. The 2-chain runs along
the two side lines shifted a little towards the interior: ``uv`` passes
``T1`` then ``T4``, ``vw`` passes ``T3`` then ``T2``.

Wiring of the 16-link chain (joint index: name @ corner)::

     0 S   far start          6 B2 @T2   12 b3 @T3 (jag)
     1 w4  @T4                7 C2 @T2   13 c3 @T3 (jag)
     2 x4  @T4                8 D2 @T2   14 x2 @T2
     3 y4  @T4                9 B4 @T4   15 y2 @T2
     4 b1  @T1 (jag)         10 C4 @T4   16 F   far end
     5 c1  @T1 (jag)         11 D4 @T4

The path runs T4 -> T1 -> T2 -> T4 -> T3 -> T2 over the skeleton links
y4-b1 (right side), c1-B2 (base), D2-B4 (diagonal), D4-b3 (top) and
c3-x2 (left side). At T4 the 3-chain is (w4, x4, y4, b1) and the 4-chain
(D2, B4, C4, D4, b3); the tangle costs five extra links (S-w4, w4-x4,
x4-y4, B4-C4, C4-D4). At T2 the 4-chain is (c1, B2, C2, D2, B4) and the
3-chain (c3, x2, y2, F); four extra links (B2-C2, C2-D2, x2-y2, y2-F).
The jags b1-c1 and b3-c3 add one each: 5 + (5 + 4 + 1 + 1) = 16.

Each tangle is a clasp: the 3-chain's short link passes through the
4-chain's triangle BCD while the 4-chain's bend passes through the loop
the 3-chain forms with its two end bars.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .chains import (
    Chain,
    PiercingCertificate,
    Scene,
    certificate_pierce,
    make_chain,
    min_clearance,
    scene_valid,
)
from .geom import TOL, DegenerateContact, Segment, Triangle, seg_triangle_pierce


class ConstructionError(ValueError):
    pass


class ParameterDomain(ConstructionError):
    pass


class ConstructionClearance(ConstructionError):
    pass


class DegenerateJag(ConstructionError):
    pass


class ThreadingFailure(ConstructionError):
    pass


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


# -- 3/4-tangle --------------------------------------------------------------

# Core of the tangle in a local (f, l, z) frame, units of the short link.
# B-C-D is a bend in the (f, z) plane with its tip C pointing along f; x-y
# runs along l through the origin, inside triangle BCD.
_CORE = {
    "B": np.array([-0.3, 0.0, -math.sqrt(0.51)]),
    "C": np.array([0.4, 0.0, 0.0]),
    "D": np.array([-0.3, 0.0, math.sqrt(0.51)]),
    "x": np.array([0.0, 0.5, 0.0]),
    "y": np.array([0.0, -0.5, 0.0]),
}


def _planar(deg: float) -> np.ndarray:
    r = math.radians(deg)
    return np.array([math.cos(r), math.sin(r), 0.0])


# End-bar directions of the stand-alone tangle in the same frame: A and E
# leave backwards, w and z forwards, so the two bends hook into each other.
# They match the directions the trapezoid links take at T4 by default.
_BAR_DIRS = {"A": _planar(195.0), "E": _planar(165.0), "w": _planar(45.0), "z": _planar(-75.0)}


@dataclass(frozen=True)
class TangleParams:
    mode: str = "unit"
    epsilon: float = 6.0
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    axes: tuple[tuple[float, ...], ...] = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))

    def __post_init__(self):
        if self.mode not in ("unit", "epsilon"):
            raise ParameterDomain(f"unknown tangle mode {self.mode!r}")
        if self.mode == "epsilon" and not self.epsilon > 0:
            raise ParameterDomain("epsilon must be positive")
        ax = np.asarray(self.axes, dtype=float)
        if ax.shape != (3, 3) or not np.allclose(ax @ ax.T, np.eye(3), atol=1e-9):
            raise ParameterDomain("frame axes must be orthonormal")

    @property
    def short(self) -> float:
        """Length of BC, CD and xy."""
        return 1.0 if self.mode == "unit" else self.epsilon / 6.0

    @property
    def bar(self) -> float:
        """Length of AB, DE, xw and yz."""
        return 3.0 if self.mode == "unit" else self.epsilon / 2.0

    @property
    def scene_epsilon(self) -> float:
        # unit mode is the epsilon mode with eps = 6
        return 6.0 if self.mode == "unit" else self.epsilon


def build_tangle34(p: TangleParams = TangleParams()):
    """Return ``(chain3, chain4, certificate)`` for one 3/4-tangle.

    ``chain3`` is (w, x, y, z) with chain id 0, ``chain4`` is (A, B, C, D, E)
    with chain id 1 and the certificate says ``xy`` pierces triangle BCD. The
    midpoint P of ``xy`` sits at the frame origin.
    """
    lam = p.short
    R = np.asarray(p.axes, dtype=float).T
    o = np.asarray(p.origin, dtype=float)

    def place(local):
        return o + R @ (lam * local)

    pts = {k: place(v) for k, v in _CORE.items()}
    bar = p.bar
    pts["A"] = pts["B"] + bar * (R @ _BAR_DIRS["A"])
    pts["E"] = pts["D"] + bar * (R @ _BAR_DIRS["E"])
    pts["w"] = pts["x"] + bar * (R @ _BAR_DIRS["w"])
    pts["z"] = pts["y"] + bar * (R @ _BAR_DIRS["z"])
    c3 = make_chain([pts[k] for k in "wxyz"], "tangle3")
    c4 = make_chain([pts[k] for k in "ABCDE"], "tangle4")
    cert = PiercingCertificate((0, 1), (1, (1, 2, 3)), 0, "xy through BCD")
    res = seg_triangle_pierce(c3.segment(1), Triangle(pts["B"], pts["C"], pts["D"]))
    if not res.pierces:
        raise ConstructionError("tangle core does not pierce")
    cert = PiercingCertificate(cert.piercer, cert.target, res.sign, cert.label)
    eps = p.scene_epsilon
    scene = Scene((c3, c4), eps, eps / 100.0, (cert,))
    if not scene_valid(scene):
        raise ConstructionClearance(f"tangle clearance {min_clearance(scene):.3g} < {eps / 100:.3g}")
    return c3, c4, cert


# -- jag ---------------------------------------------------------------------


@dataclass(frozen=True)
class JagSpec:
    corner: tuple[float, float, float] = (0.0, 0.0, 0.0)
    incoming: tuple[float, float, float] = (-1.0, 0.0, 0.0)
    outgoing: tuple[float, float, float] = (0.5, math.sqrt(3) / 2, 0.0)
    epsilon: float = 0.01
    arm: float = 1.0
    theta: float = math.pi / 3


def build_jag(s: JagSpec = JagSpec()) -> np.ndarray:
    """Joints (a, b, c, d) of a 1-link jag at ``corner``.

    ``a`` lies ``arm`` along ``incoming`` and ``d`` lies ``arm`` along
    ``outgoing``; the short link ``bc`` of length ``epsilon`` is normal to the
    plane of the two directions, centred on the corner.
    """
    din, dout = _unit(s.incoming), _unit(s.outgoing)
    nrm = np.cross(din, dout)
    if np.linalg.norm(nrm) <= 1e-9:
        raise DegenerateJag("incoming and outgoing directions are parallel")
    if not s.epsilon > 0:
        raise DegenerateJag("jag link length must be positive")
    nrm /= np.linalg.norm(nrm)
    c0 = np.asarray(s.corner, dtype=float)
    b = c0 - 0.5 * s.epsilon * nrm
    c = c0 + 0.5 * s.epsilon * nrm
    a = b + s.arm * din
    d = c + s.arm * dout
    return np.array([a, b, c, d])


def line_gap(p0, d0, p1, d1) -> float:
    """Distance between the infinite lines p0 + t d0 and p1 + t d1."""
    n = np.cross(d0, d1)
    if np.linalg.norm(n) <= TOL:
        w = np.asarray(p1) - p0
        d0 = _unit(d0)
        return float(np.linalg.norm(w - (w @ d0) * d0))
    return float(abs((np.asarray(p1) - p0) @ n) / np.linalg.norm(n))


# -- trapezoid ---------------------------------------------------------------


@dataclass(frozen=True)
class TrapezoidParams:
    B: float = 1.0
    L: float = 1.0
    theta: float = math.pi / 3
    epsilon: float = 0.01
    extension: float | None = None  # length of the two end links, default 10 L

    def __post_init__(self):
        if not (self.B > 0 and self.L > 0 and self.epsilon > 0):
            raise ParameterDomain("B, L and epsilon must be positive")
        if not 0 < self.theta < math.pi / 2:
            raise ParameterDomain("base angle must lie in (0, pi/2)")
        if self.epsilon > min(self.B, self.L) / 100 * (1 + 1e-12):
            raise ParameterDomain("epsilon must be at most min(B, L) / 100")
        if 2 * self.epsilon / self.L >= 1 or self.theta - math.asin(2 * self.epsilon / self.L) <= 0:
            raise ParameterDomain("theta - asin(2 eps / L) must be positive")
        if self.L * math.cos(self.theta) >= self.B - 2 * self.epsilon:
            raise ParameterDomain("sides of length L meet before the top edge; need L cos(theta) < B")

    @property
    def h(self) -> float:
        return self.B * math.tan(self.theta)

    @property
    def alpha(self) -> float:
        return math.pi / 2 - self.theta

    @property
    def ext(self) -> float:
        return 10.0 * self.L if self.extension is None else self.extension

    def corners(self) -> dict[str, np.ndarray]:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return {
            "T1": np.array([self.B, 0.0, 0.0]),
            "T2": np.array([-self.B, 0.0, 0.0]),
            "T3": np.array([-self.B + self.L * c, self.L * s, 0.0]),
            "T4": np.array([self.B - self.L * c, self.L * s, 0.0]),
        }

    def apex(self) -> np.ndarray:
        return np.array([0.0, self.h, 0.0])


# joint name -> index in the 16-link chain
JOINTS16 = ("S", "w4", "x4", "y4", "b1", "c1", "B2", "C2", "D2",
            "B4", "C4", "D4", "b3", "c3", "x2", "y2", "F")
IDX = {name: i for i, name in enumerate(JOINTS16)}
CORNER_JOINTS = {
    "T1": ("b1", "c1"),
    "T2": ("B2", "C2", "D2", "x2", "y2"),
    "T3": ("b3", "c3"),
    "T4": ("w4", "x4", "y4", "B4", "C4", "D4"),
}
# tangle members as (w, x, y, z) and (A, B, C, D, E) joint names
TANGLES16 = {
    "T4": {"three": ("w4", "x4", "y4", "b1"), "four": ("D2", "B4", "C4", "D4", "b3")},
    "T2": {"three": ("c3", "x2", "y2", "F"), "four": ("c1", "B2", "C2", "D2", "B4")},
}


@dataclass(frozen=True)
class Trapezoid:
    chain: Chain
    params: TrapezoidParams
    corners: dict
    ball_centers: dict
    tangle_certificates: tuple[PiercingCertificate, ...] = field(default=())

    def joint(self, name: str) -> np.ndarray:
        return self.chain.joints[IDX[name]]


def _threading_lines(tp: TrapezoidParams):
    """Anchor points and directions of the uv and vw lines."""
    eta = tp.epsilon / 4.0
    T = tp.corners()
    c, s = math.cos(tp.theta), math.sin(tp.theta)
    d_right = np.array([-c, s, 0.0])  # T1 -> T4
    d_left = np.array([c, s, 0.0])  # T2 -> T3
    ex = np.array([1.0, 0.0, 0.0])
    return {
        "X1": T["T1"] - eta * ex,
        "X4": T["T4"] - eta * ex,
        "X2": T["T2"] + eta * ex,
        "X3": T["T3"] + eta * ex,
        "d_right": d_right,
        "d_left": d_left,
    }


def build_trapezoid16(tp: TrapezoidParams = TrapezoidParams()) -> Trapezoid:
    lam = tp.epsilon / 6.0
    eps = tp.epsilon
    T = tp.corners()
    ln = _threading_lines(tp)
    ez = np.array([0.0, 0.0, 1.0])
    ex = np.array([1.0, 0.0, 0.0])
    P = {}

    # T4 core: f4 points away from the 4-chain's two bars (top, diagonal).
    # uv crosses triangle (D2, B4, C4) just behind the middle of B4-C4.
    toT2 = _unit(T["T2"] - T["T4"])
    f4 = -_unit(_unit(T["T3"] - T["T4"]) + toT2)
    F4 = np.column_stack([f4, np.cross(ez, f4), ez])
    q = 0.5 * (_CORE["B"] + _CORE["C"]) + 0.4 * (F4.T @ toT2)
    O4 = ln["X4"] - lam * (F4 @ q)
    for k in "BCDxy":
        P[k + "4"] = O4 + lam * (F4 @ _CORE[k])
    dS = F4 @ _planar(45.0)
    P["w4"] = P["x4"] + 3 * lam * dS
    P["S"] = P["w4"] + tp.ext * _unit(dS + 0.3 * ez)

    # T2 core: x2-y2 vertical, the bend B2-C2-D2 an equilateral triangle
    # around it at height lam / 4. vw crosses triangle (F, y2, x2) half a
    # short link from x2-y2; F leaves square to the left side.
    dF = np.cross(ez, ln["d_left"])
    O2 = ln["X2"] - 0.5 * lam * dF
    P["x2"] = O2 - 0.5 * lam * ez
    P["y2"] = O2 + 0.5 * lam * ez
    cen = O2 + 0.25 * lam * ez
    rho = lam / math.sqrt(3.0)
    for k, deg in (("B2", -60.0), ("C2", 180.0), ("D2", 60.0)):
        P[k] = cen + rho * _planar(deg)
    P["F"] = P["y2"] + tp.ext * _unit(dF + 0.3 * ez)

    # jags: the short link is vertical, centred on the ideal corner; the
    # long link towards the 2-chain's next corner runs above the 2-chain
    P["b1"] = T["T1"] + 0.5 * eps * ez
    P["c1"] = T["T1"] - 0.5 * eps * ez
    P["b3"] = T["T3"] - 0.5 * eps * ez
    P["c3"] = T["T3"] + 0.5 * eps * ez

    chain = make_chain([P[k] for k in JOINTS16], "trapezoid16")
    certs = []
    for corner, t in TANGLES16.items():
        x, y = t["three"][1:3]
        b, c, d = t["four"][1:4]
        cert = PiercingCertificate(
            (0, IDX[x]), (0, (IDX[b], IDX[c], IDX[d])), 0, f"tangle {corner}: {x}{y} through {b}{c}{d}")
        res = seg_triangle_pierce(Segment(P[x], P[y]), Triangle(P[b], P[c], P[d]))
        if not res.pierces:
            raise ConstructionError(f"tangle at {corner} is not pierced")
        certs.append(PiercingCertificate(cert.piercer, cert.target, res.sign, cert.label))

    scene = Scene((chain,), eps, eps / 100.0)
    if not scene_valid(scene):
        raise ConstructionClearance(f"trapezoid clearance {min_clearance(scene):.3g} < tau")
    for name, members in CORNER_JOINTS.items():
        dist = max(np.linalg.norm(P[m] - T[name]) for m in members)
        if dist >= eps:
            raise ConstructionError(f"corner {name} realised {dist:.3g} from its ideal position")
    return Trapezoid(chain, tp, T, {k: v.copy() for k, v in T.items()}, tuple(certs))


def thread_two_chain(tp: TrapezoidParams, trap: Trapezoid):
    """Return ``(two_chain, certificates)`` threaded through all four corners.

    The certificates refer to the trapezoid chain as chain 0 and the 2-chain
    as chain 1.
    """
    ln = _threading_lines(tp)
    # apex: intersection of the two threading lines (both in z = 0)
    A = np.column_stack([ln["d_right"][:2], -ln["d_left"][:2]])
    t = np.linalg.solve(A, (ln["X2"] - ln["X1"])[:2])
    v = ln["X1"] + t[0] * ln["d_right"]
    u = ln["X1"] - 10.0 * tp.L * ln["d_right"]
    w = ln["X2"] - 10.0 * tp.L * ln["d_left"]
    two = make_chain([u, v, w], "two_chain")
    if min(two.reference_lengths) < 10 * tp.L:
        raise ThreadingFailure("2-chain links shorter than 10 L")
    targets = [
        ((1, 0), ("B2", "c1", "b1"), "uv through jag at T1"),
        ((1, 0), ("D2", "B4", "C4"), "uv through 4-chain jag loop at T4"),
        ((1, 1), ("D4", "b3", "c3"), "vw through jag at T3"),
        ((1, 1), ("F", "y2", "x2"), "vw through 3-chain jag loop at T2"),
    ]
    scene = Scene((trap.chain, two), tp.epsilon, tp.epsilon / 100.0)
    certs = []
    for piercer, names, label in targets:
        cert = PiercingCertificate(piercer, (0, tuple(IDX[n] for n in names)), 0, label)
        try:
            res = certificate_pierce(scene, cert)
        except DegenerateContact as exc:
            raise ThreadingFailure(f"{label}: {exc}") from exc
        if not res.pierces:
            raise ThreadingFailure(f"{label}: link does not pierce")
        certs.append(PiercingCertificate(piercer, cert.target, res.sign, label))
    if not scene_valid(scene):
        raise ThreadingFailure(f"threaded clearance {min_clearance(scene):.3g} < tau")
    return two, tuple(certs)


# -- scenes ------------------------------------------------------------------

SCENE_KINDS = ("interlocked", "control", "tangle_only")


def build_scene(kind: str = "interlocked", params=None) -> Scene:
    """Build one of the three scene kinds.

    ``params`` is a :class:`TrapezoidParams` for ``interlocked`` and
    ``control`` and a :class:`TangleParams` for ``tangle_only``.
    """
    if kind == "tangle_only":
        p = params if params is not None else TangleParams()
        c3, c4, cert = build_tangle34(p)
        eps = p.scene_epsilon
        prov = {"kind": kind, "params": _params_record(p)}
        return Scene((c3, c4), eps, eps / 100.0, (cert,), prov)
    if kind not in SCENE_KINDS:
        raise ParameterDomain(f"unknown scene kind {kind!r}")
    tp = params if params is not None else TrapezoidParams()
    trap = build_trapezoid16(tp)
    two, certs = thread_two_chain(tp, trap)
    prov = {
        "kind": kind,
        "params": _params_record(tp),
        "wiring": list(JOINTS16),
        "tangle_certificates": [c.to_dict() for c in trap.tangle_certificates],
    }
    if kind == "control":
        # same 2-chain lifted clear of the trapezoid: nothing is threaded
        offset = np.array([0.0, 0.0, -tp.L])
        two = two.with_joints(two.joints + offset)
        certs = ()
    scene = Scene((trap.chain, two), tp.epsilon, tp.epsilon / 100.0, tuple(certs), prov)
    if not scene_valid(scene):
        raise ConstructionClearance(f"scene clearance {min_clearance(scene):.3g} < tau")
    return scene


def _params_record(p) -> dict:
    d = asdict(p)
    d["type"] = type(p).__name__
    return d


def params_from_record(d: dict):
    d = dict(d)
    kind = d.pop("type")
    if kind == "TangleParams":
        d["origin"] = tuple(d["origin"])
        d["axes"] = tuple(tuple(a) for a in d["axes"])
        return TangleParams(**d)
    if kind == "TrapezoidParams":
        return TrapezoidParams(**d)
    raise ValueError(f"unknown parameter record {kind!r}")


def trapezoid_params_of(scene: Scene) -> TrapezoidParams | None:
    rec = scene.provenance.get("params")
    if rec and rec.get("type") == "TrapezoidParams":
        return params_from_record(rec)
    return None
