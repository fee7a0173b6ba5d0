"""Randomised separation attempts between the 2-chain and the 16-link chain.

The search maximises the distance between the convex hulls of the two
chains with a greedy random walk: a proposed move is kept when it is
physically valid (see :func:`chainlock.chains.sweep_move`) and does not
lower the objective. Piercing certificates are deliberately *not*
enforced, so a run is free to discover an escape if one is reachable.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .chains import (
    STEP_CAP,
    FoldMove,
    InvalidMove,
    Scene,
    apply_fold,
    check_certificates,
    random_unit,
    sweep_move,
)
from .constructions import CORNER_JOINTS, IDX, trapezoid_params_of
from .geom import DegenerateContact, point_set_distance


class MissingRole(KeyError):
    pass


@dataclass(frozen=True)
class SearchConfig:
    budget: int = 100_000
    restarts: int = 8
    sigma_start: float = 0.5
    sigma_end: float = 1e-3
    sep_threshold: float | None = None  # default 5 L
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.budget < 0 or self.restarts < 1:
            raise ValueError("need budget >= 0 and restarts >= 1")
        if self.sep_threshold is not None and not self.sep_threshold > 0:
            raise ValueError("sep_threshold must be positive")
        if not (self.sigma_start > 0 and self.sigma_end > 0):
            raise ValueError("sigma schedule must be positive")

    def threshold(self, scene: Scene) -> float:
        if self.sep_threshold is not None:
            return self.sep_threshold
        tp = trapezoid_params_of(scene)
        return 5.0 * (tp.L if tp is not None else 1.0)

    def to_dict(self) -> dict:
        return {
            "budget": self.budget,
            "restarts": self.restarts,
            "sigma_start": self.sigma_start,
            "sigma_end": self.sigma_end,
            "sep_threshold": self.sep_threshold,
            "seed": self.seed,
        }


@dataclass
class RestartResult:
    index: int
    seed: int
    best_objective: float
    accepted: int
    rejected: int
    apex_min: float
    apex_max: float
    cert_min: float
    cert_max: float
    certified_moves: int
    moves: list[FoldMove] = field(default_factory=list)
    best_joints: list = field(default_factory=list)


@dataclass
class EscapeReport:
    separated: bool
    best_objective: float
    initial_objective: float
    apex_height_range: tuple[float, float]
    certified_apex_range: tuple[float, float]
    accepted: int
    rejected: int
    best_trajectory: list[FoldMove]
    best_restart: int
    seed: int
    sep_threshold: float
    config: dict
    restarts: list[dict]

    def to_dict(self) -> dict:
        return {
            "separated": self.separated,
            "best_objective": self.best_objective,
            "initial_objective": self.initial_objective,
            "apex_height_range": list(self.apex_height_range),
            "certified_apex_range": _json_range(self.certified_apex_range),
            "accepted": self.accepted,
            "rejected": self.rejected,
            "best_restart": self.best_restart,
            "best_trajectory": [m.to_dict() for m in self.best_trajectory],
            "seed": self.seed,
            "sep_threshold": self.sep_threshold,
            "config": self.config,
            "restarts": self.restarts,
        }


def _roles(scene: Scene) -> tuple[int, int]:
    try:
        return scene.role_index("two_chain"), scene.role_index("trapezoid16")
    except KeyError as exc:
        raise MissingRole(f"scene lacks a chain with role {exc}") from None


def objective(scene: Scene) -> float:
    """Distance between the hulls of the 2-chain and the 16-link chain."""
    i2, i16 = _roles(scene)
    return point_set_distance(scene.chains[i2].joints, scene.chains[i16].joints)


def apex_height(scene: Scene) -> float:
    """Signed distance of the 2-chain apex from the trapezoid's base plane.

    The base plane contains the current base line (through the centroids of
    the T1 and T2 corner joints) and is perpendicular to the current
    trapezoid plane; positive towards the top corners.
    """
    i2, i16 = _roles(scene)
    J = scene.chains[i16].joints
    cen = {k: J[[IDX[n] for n in names]].mean(axis=0) for k, names in CORNER_JOINTS.items()}
    base = cen["T1"] - cen["T2"]
    top = 0.5 * (cen["T3"] + cen["T4"]) - cen["T2"]
    nrm = np.cross(base, top)
    up = np.cross(nrm, base)
    up /= np.linalg.norm(up)
    mid = 0.5 * (cen["T1"] + cen["T2"])
    return float((scene.chains[i2].joints[1] - mid) @ up)


def _propose(rng: np.random.Generator, scene: Scene, sigma: float) -> FoldMove:
    ci = int(rng.integers(len(scene.chains)))
    ch = scene.chains[ci]
    n = ch.n_joints
    r = rng.random()
    if n >= 3 and r < 0.8:
        kind = "suffix" if r < 0.4 else "prefix"
        pivot = int(rng.integers(1, n - 1))
        sl = slice(pivot + 1, n) if kind == "suffix" else slice(0, pivot)
        reach = np.linalg.norm(ch.joints[sl] - ch.joints[pivot], axis=1).max()
        angle = float(np.clip(rng.normal(0.0, sigma / reach), -STEP_CAP, STEP_CAP))
        return FoldMove(ci, pivot, tuple(random_unit(rng)), angle, kind)
    reach = np.linalg.norm(ch.joints - ch.joints.mean(axis=0), axis=1).max()
    angle = float(np.clip(rng.normal(0.0, sigma / reach), -STEP_CAP, STEP_CAP))
    trans = rng.normal(0.0, sigma / math.sqrt(3.0), 3)
    return FoldMove(ci, 0, tuple(random_unit(rng)), angle, "rigid", tuple(trans))


def _has_apex(scene: Scene) -> bool:
    try:
        _roles(scene)
    except MissingRole:
        return False
    return True


def _certs_hold(scene: Scene) -> bool:
    try:
        return check_certificates(scene)
    except DegenerateContact:
        return False


def _run_restart(scene: Scene, cfg: SearchConfig, index: int) -> RestartResult:
    seed = cfg.seed + index
    rng = np.random.default_rng(seed)
    thr = cfg.threshold(scene)
    cur = objective(scene)
    best, best_len = cur, 0
    track = _has_apex(scene)
    h0 = apex_height(scene) if track else math.nan
    hmin = hmax = h0
    # apex range over the prefix of the walk in which every certificate holds
    certified = track and bool(scene.certificates) and _certs_hold(scene)
    cmin = cmax = h0 if certified else math.nan
    n_cert = 0
    moves: list[FoldMove] = []
    best_joints = [c.joints for c in scene.chains]
    acc = rej = 0
    state = scene
    ratio = cfg.sigma_end / cfg.sigma_start
    for k in range(cfg.budget):
        if best >= thr:
            break
        sigma = cfg.sigma_start * ratio ** (k / max(cfg.budget - 1, 1))
        move = _propose(rng, state, sigma)
        new = sweep_move(state, move)
        if new is None:
            rej += 1
            continue
        val = objective(new)
        if val < cur:
            rej += 1
            continue
        acc += 1
        state, cur = new, val
        moves.append(move)
        if track:
            h = apex_height(state)
            hmin, hmax = min(hmin, h), max(hmax, h)
            if certified:
                certified = _certs_hold(state)
                if certified:
                    cmin, cmax = min(cmin, h), max(cmax, h)
                    n_cert = len(moves)
        if cur > best:
            best, best_len = cur, len(moves)
            best_joints = [c.joints for c in state.chains]
    return RestartResult(index, seed, best, acc, rej, hmin, hmax, cmin, cmax, n_cert,
                         moves[:best_len],
                         [j.tolist() for j in best_joints])


def run_escape(scene: Scene, cfg: SearchConfig = SearchConfig()) -> EscapeReport:
    """Run ``cfg.restarts`` independent greedy walks and merge them.

    Restart ``i`` uses seed ``cfg.seed + i``; results are merged by restart
    index, so the report does not depend on ``cfg.workers``.
    """
    init = objective(scene)
    if cfg.workers > 1 and cfg.restarts > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            results = list(ex.map(_run_restart, [scene] * cfg.restarts, [cfg] * cfg.restarts,
                                  range(cfg.restarts)))
    else:
        results = [_run_restart(scene, cfg, i) for i in range(cfg.restarts)]
    results.sort(key=lambda r: r.index)
    top = max(results, key=lambda r: (r.best_objective, -r.index))
    thr = cfg.threshold(scene)
    return EscapeReport(
        separated=top.best_objective >= thr,
        best_objective=top.best_objective,
        initial_objective=init,
        apex_height_range=(min(r.apex_min for r in results), max(r.apex_max for r in results)),
        certified_apex_range=(_nanmin(r.cert_min for r in results),
                              _nanmax(r.cert_max for r in results)),
        accepted=sum(r.accepted for r in results),
        rejected=sum(r.rejected for r in results),
        best_trajectory=top.moves,
        best_restart=top.index,
        seed=cfg.seed,
        sep_threshold=thr,
        config=cfg.to_dict(),
        restarts=[
            {"index": r.index, "seed": r.seed, "best_objective": r.best_objective,
             "accepted": r.accepted, "rejected": r.rejected,
             "apex_height_range": [r.apex_min, r.apex_max],
             "certified_apex_range": _json_range((r.cert_min, r.cert_max)),
             "certified_moves": r.certified_moves, "moves_to_best": len(r.moves)}
            for r in results
        ],
    )


def _json_range(r) -> list | None:
    return None if any(math.isnan(x) for x in r) else list(r)


def _nanmin(xs) -> float:
    xs = [x for x in xs if not math.isnan(x)]
    return min(xs) if xs else math.nan


def _nanmax(xs) -> float:
    xs = [x for x in xs if not math.isnan(x)]
    return max(xs) if xs else math.nan


def replay(scene: Scene, moves) -> Scene:
    """Re-apply ``moves`` in order without validity filtering."""
    state = scene
    for m in moves:
        if not 0 <= m.chain < len(state.chains):
            raise InvalidMove(f"no chain with id {m.chain}")
        state = state.with_chain(m.chain, apply_fold(state.chains[m.chain], m))
    return state
