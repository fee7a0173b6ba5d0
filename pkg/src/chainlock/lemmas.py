"""Numeric checks of the tangle distance bounds, the deviation lemma and the
trapezoid height bounds, each paired with a brute-force sampling oracle.

Every sampler takes an explicit seed and draws from its own
``numpy.random.Generator``, so all reports are reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .chains import (
    STEP_CAP,
    PiercingCertificate,
    Scene,
    certificate_pierce,
    random_fold,
    try_move,
)
from .constructions import CORNER_JOINTS, IDX, ParameterDomain, trapezoid_params_of
from .geom import DegenerateContact, GeometryError
from .escape import apex_height


class NotPierced(ValueError):
    """The tangle's short link xy no longer pierces triangle BCD."""


# -- Lemma 1 -----------------------------------------------------------------

# unit-mode bounds on the distance from P (midpoint of xy)
TANGLE_BOUNDS = {"w": 3.5, "z": 3.5, "B": 2.5, "C": 2.5, "D": 2.5, "x": 2.5, "y": 2.5,
                 "A": 5.5, "E": 5.5}


def _tangle_chains(scene: Scene):
    try:
        return scene.chains[scene.role_index("tangle3")], scene.chains[scene.role_index("tangle4")]
    except KeyError:
        raise ValueError("scene has no 3/4-tangle") from None


def tangle_distance_bounds(scene: Scene) -> dict:
    """Distances from P to the nine tangle joints against their bounds.

    Bounds are the unit-mode ones scaled by the reference length of ``xy``,
    so in epsilon mode (``xy = eps / 6``) every bound is at most ``eps``.
    """
    c3, c4 = _tangle_chains(scene)
    cert = PiercingCertificate((scene.role_index("tangle3"), 1),
                               (scene.role_index("tangle4"), (1, 2, 3)), 0)
    try:
        res = certificate_pierce(scene, cert)
    except DegenerateContact as exc:
        raise NotPierced(str(exc)) from exc
    if not res.pierces:
        raise NotPierced("xy does not pierce triangle BCD")
    scale = float(c3.reference_lengths[1])
    pts = dict(zip("wxyz", c3.joints)) | dict(zip("ABCDE", c4.joints))
    P = 0.5 * (pts["x"] + pts["y"])
    dist = {k: float(np.linalg.norm(pts[k] - P)) for k in TANGLE_BOUNDS}
    bound = {k: b * scale for k, b in TANGLE_BOUNDS.items()}
    return {
        "distances": dist,
        "bounds": bound,
        "ok": all(dist[k] < bound[k] for k in dist),
        "max_distance": max(dist.values()),
    }


# -- deviation lemma ---------------------------------------------------------


@dataclass(frozen=True)
class DeviationResult:
    formula_delta: float
    sampled_max: float
    samples: int

    def to_dict(self) -> dict:
        return {"formula_delta": self.formula_delta, "sampled_max": self.sampled_max,
                "samples": self.samples}


def deviation_formula(epsilon: float, L: float) -> float:
    """Largest angle between the centre line and a line through two disks of
    radius ``epsilon`` whose centres are ``L`` apart."""
    if epsilon < 0 or not L > 0:
        raise ParameterDomain("need epsilon >= 0 and L > 0")
    r = 2 * epsilon / L
    if r > 1:
        raise ParameterDomain("2 epsilon / L exceeds 1")
    return math.asin(r)


def _disk_points(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    a = rng.uniform(0.0, 2 * math.pi, n)
    return np.column_stack([r * np.cos(a), r * np.sin(a)])


def deviation_oracle(epsilon: float, L: float, n: int, seed: int = 0) -> DeviationResult:
    """Sample ``n`` lines through a uniform point of each disk."""
    if n < 1:
        raise ValueError("n must be at least 1")
    delta = deviation_formula(epsilon, L)
    rng = np.random.default_rng(seed)
    p = _disk_points(rng, n, epsilon)
    q = _disk_points(rng, n, epsilon) + [L, 0.0]
    d = q - p
    dev = np.abs(np.arctan2(d[:, 1], d[:, 0]))
    return DeviationResult(delta, float(dev.max()), n)


# -- trapezoid heights -------------------------------------------------------


@dataclass(frozen=True)
class HeightBounds:
    h: float
    delta: float
    h_min: float
    h_max: float
    oracle_min: float | None = None
    oracle_max: float | None = None
    widened: tuple[str, ...] = ()

    def band(self, slack: float = 0.1) -> tuple[float, float]:
        """``[h_min, h_max]`` widened by ``slack * h`` on both sides."""
        return self.h_min - slack * self.h, self.h_max + slack * self.h

    def to_dict(self) -> dict:
        return {"h": self.h, "delta": self.delta, "h_min": self.h_min, "h_max": self.h_max,
                "oracle_min": self.oracle_min, "oracle_max": self.oracle_max,
                "widened": list(self.widened)}


def _height_formulas(B, theta, epsilon, L):
    delta = deviation_formula(epsilon, L)
    if not (theta - delta > 0 and theta + delta < math.pi / 2):
        raise ParameterDomain("need 0 < theta - delta and theta + delta < pi/2")
    lo, hi = theta - delta, theta + delta
    # the lowest side line meets the base line b beyond the ideal corner
    b = epsilon / math.sin(lo)
    h_min = (B + b) * math.tan(lo)
    h_max = B * math.tan(hi) + epsilon / math.cos(hi)
    return B * math.tan(theta), delta, h_min, h_max


def height_bounds(B: float, theta: float, epsilon: float, L: float,
                  oracle_n: int = 10_000, seed: int = 0) -> HeightBounds:
    """Closed-form apex height bounds, widened if the oracle falls outside.

    Set ``oracle_n=0`` to skip the cross-check.
    """
    if not B > 0:
        raise ParameterDomain("B must be positive")
    h, delta, h_min, h_max = _height_formulas(B, theta, epsilon, L)
    if oracle_n <= 0:
        return HeightBounds(h, delta, h_min, h_max)
    omin, omax, _ = height_oracle(B, theta, epsilon, oracle_n, seed, L=L)
    widened = []
    if omin < h_min:
        h_min, widened = omin, widened + ["h_min"]
    if omax > h_max:
        h_max, widened = omax, widened + ["h_max"]
    return HeightBounds(h, delta, h_min, h_max, omin, omax, tuple(widened))


def ideal_corners(B: float, theta: float, L: float) -> dict[str, np.ndarray]:
    c, s = math.cos(theta), math.sin(theta)
    return {"T1": np.array([B, 0.0]), "T2": np.array([-B, 0.0]),
            "T3": np.array([-B + L * c, L * s]), "T4": np.array([B - L * c, L * s])}


def height_oracle(B: float, theta: float, epsilon: float, n: int, seed: int = 0,
                  L: float = 2.0) -> tuple[float, float, int]:
    """Apex-height extremes over ``n`` sampled pairs of side lines.

    Each side line passes through a uniform point of the base-corner disk
    and one of the top-corner disk (radius ``epsilon``). Returns
    ``(min_h, max_h, skipped)`` where ``skipped`` counts near-parallel pairs.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    T = ideal_corners(B, theta, L)
    rng = np.random.default_rng(seed)
    p1 = T["T1"] + _disk_points(rng, n, epsilon)
    p4 = T["T4"] + _disk_points(rng, n, epsilon)
    p2 = T["T2"] + _disk_points(rng, n, epsilon)
    p3 = T["T3"] + _disk_points(rng, n, epsilon)
    d1, d2 = p4 - p1, p3 - p2
    det = d1[:, 0] * (-d2[:, 1]) - d1[:, 1] * (-d2[:, 0])
    ok = np.abs(det) > 1e-12 * np.linalg.norm(d1, axis=1) * np.linalg.norm(d2, axis=1)
    r = p2 - p1
    t = (r[:, 0] * (-d2[:, 1]) - r[:, 1] * (-d2[:, 0]))[ok] / det[ok]
    y = p1[ok, 1] + t * d1[ok, 1]
    if y.size == 0:
        return math.nan, math.nan, int(n)
    return float(y.min()), float(y.max()), int(n - ok.sum())


# -- sampled foldings --------------------------------------------------------


def tracked_certificates(scene: Scene) -> tuple[PiercingCertificate, ...]:
    """Scene certificates plus the tangle piercings recorded at build time."""
    extra = scene.provenance.get("tangle_certificates", ())
    return tuple(scene.certificates) + tuple(PiercingCertificate.from_dict(d) for d in extra)


def _holds(scene: Scene, certs) -> bool:
    try:
        for c in certs:
            r = certificate_pierce(scene, c)
            if not r.pierces or r.sign != c.expected_sign:
                return False
    except (DegenerateContact, GeometryError):
        return False
    return True


def _walk(scene: Scene, n: int, sigma: float, seed: int, max_attempts: int | None = None):
    rng = np.random.default_rng(seed)
    certs = tracked_certificates(scene)
    states = [scene]
    rejected = 0
    limit = 200 * max(n, 1) if max_attempts is None else max_attempts
    state = scene
    while len(states) <= n and len(states) + rejected <= limit:
        move = random_fold(rng, state, sigma)
        capped = float(np.clip(move.angle, -STEP_CAP, STEP_CAP))
        if capped != move.angle:
            move = type(move)(move.chain, move.pivot, move.axis, capped, move.kind)
        new = try_move(state, move)
        if new is None or not _holds(new, certs):
            rejected += 1
            continue
        states.append(new)
        state = new
    return states, rejected


def sample_foldings(scene: Scene, n: int, sigma: float = 0.02, seed: int = 0) -> list[Scene]:
    """Initial state followed by up to ``n`` accepted fold moves.

    Moves are suffix folds with angles capped at ``STEP_CAP``; a move is kept
    when the swept motion is collision free and every tracked certificate
    (see :func:`tracked_certificates`) still holds with its recorded sign.
    The walk gives up after ``200 n`` attempts.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    return _walk(scene, n, sigma, seed)[0]


# -- scene verification ------------------------------------------------------


@dataclass
class VerificationReport:
    checks: list[dict] = field(default_factory=list)
    states: int = 0
    rejected: int = 0
    seed: int = 0
    sigma: float = 0.02

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def add(self, name: str, measured: float, bound: float, relation: str = "<=") -> None:
        ok = {"<": measured < bound, "<=": measured <= bound, ">=": measured >= bound}[relation]
        self.checks.append({"name": name, "passed": bool(ok), "measured": float(measured),
                            "relation": relation, "bound": float(bound)})

    def to_dict(self) -> dict:
        return {"passed": self.passed, "states": self.states, "rejected": self.rejected,
                "seed": self.seed, "sigma": self.sigma, "checks": self.checks}


def corner_offsets(scene: Scene) -> dict[str, float]:
    """Largest distance of each corner's joints from its ideal corner.

    The 16-link chain is first moved rigidly onto the ideal trapezoid
    (least-squares fit of the four corner centroids), so a rigid motion of the
    whole structure does not count as drift.
    """
    tp = trapezoid_params_of(scene)
    J = scene.chains[scene.role_index("trapezoid16")].joints
    ideal = tp.corners()
    names = sorted(CORNER_JOINTS)
    cur = np.array([J[[IDX[m] for m in CORNER_JOINTS[k]]].mean(axis=0) for k in names])
    ref = np.array([ideal[k] for k in names])
    rot, _ = Rotation.align_vectors(ref - ref.mean(axis=0), cur - cur.mean(axis=0))
    moved = rot.apply(J - cur.mean(axis=0)) + ref.mean(axis=0)
    return {k: float(max(np.linalg.norm(moved[IDX[m]] - ideal[k]) for m in CORNER_JOINTS[k]))
            for k in names}


def verify_scene(scene: Scene, n: int = 1000, seed: int = 0, sigma: float = 0.02) -> VerificationReport:
    """Sample foldings and check every applicable bound on every state.

    Tangle scenes get the distance bounds; trapezoid scenes get the corner
    confinement and (when a 2-chain is present) the apex-height band
    ``[h_min - 0.1 h, h_max + 0.1 h]``.
    """
    states, rejected = _walk(scene, n, sigma, seed)
    rep = VerificationReport(states=len(states), rejected=rejected, seed=seed, sigma=sigma)

    certs = tracked_certificates(scene)
    rep.add("certificates: failing states", sum(not _holds(s, certs) for s in states), 0)

    roles = {c.role for c in scene.chains}
    if {"tangle3", "tangle4"} <= roles:
        worst: dict[str, float] = {}
        bounds: dict[str, float] = {}
        unpierced = 0
        for s in states:
            try:
                r = tangle_distance_bounds(s)
            except NotPierced:
                unpierced += 1
                continue
            bounds = r["bounds"]
            for k, d in r["distances"].items():
                worst[k] = max(worst.get(k, 0.0), d)
        rep.add("tangle: unpierced states", unpierced, 0)
        for k in sorted(worst):
            rep.add(f"tangle: |P{k}|", worst[k], bounds[k], "<")

    tp = trapezoid_params_of(scene)
    if tp is not None and "trapezoid16" in roles:
        worst = {}
        for s in states:
            for k, d in corner_offsets(s).items():
                worst[k] = max(worst.get(k, 0.0), d)
        for k in sorted(worst):
            rep.add(f"corner {k}: offset", worst[k], tp.epsilon, "<")
        if "two_chain" in roles:
            hb = height_bounds(tp.B, tp.theta, tp.epsilon, tp.L, oracle_n=0)
            lo, hi = hb.band(0.1)
            hs = [apex_height(s) for s in states]
            rep.add("apex height: min", min(hs), lo, ">=")
            rep.add("apex height: max", max(hs), hi, "<=")
    return rep
