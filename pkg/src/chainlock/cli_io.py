"""Scene and report files, OBJ export and the ``chainlock`` command line.

Scene documents are JSON::

    {"format": "chainlock.scene", "version": 1,
     "epsilon": ..., "tau": ...,
     "chains": [{"role": ..., "joints": [[x, y, z], ...],
                 "reference_lengths": [...]}, ...],
     "certificates": [{"piercer": [chain, edge],
                       "target": [chain, [i, j, k]],
                       "expected_sign": +1 or -1, "label": ...}, ...],
     "provenance": {...}}

Floats are written with Python's shortest round-trip representation (at
most 17 significant digits), keys are sorted and the layout is fixed, so
``save(load(save(x)))`` is byte-identical to ``save(x)``. Reports use the
same envelope with ``"format": "chainlock.report"``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .chains import Chain, ChainError, PiercingCertificate, Scene
from .constructions import (
    SCENE_KINDS,
    ConstructionError,
    TangleParams,
    TrapezoidParams,
    build_scene,
)
from .escape import MissingRole, SearchConfig, run_escape
from .lemmas import deviation_oracle, height_bounds, height_oracle, verify_scene

FORMAT_VERSION = 1
SCENE_FORMAT = "chainlock.scene"
REPORT_FORMAT = "chainlock.report"
LENGTH_TOL = 1e-9


class SchemaError(ValueError):
    """Malformed, truncated or wrong-version document."""


class InvariantViolation(ValueError):
    """A loaded scene breaks a chain or certificate invariant."""


def _dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def _write(text: str, path) -> None:
    Path(path).write_text(text, encoding="utf-8")


def scene_to_dict(scene: Scene) -> dict:
    return {
        "format": SCENE_FORMAT,
        "version": FORMAT_VERSION,
        "epsilon": float(scene.epsilon),
        "tau": float(scene.tau),
        "chains": [
            {"role": c.role, "joints": c.joints.tolist(),
             "reference_lengths": c.reference_lengths.tolist()}
            for c in scene.chains
        ],
        "certificates": [c.to_dict() for c in scene.certificates],
        "provenance": scene.provenance,
    }


def _check_envelope(doc, fmt: str) -> None:
    if not isinstance(doc, dict) or doc.get("format") != fmt:
        raise SchemaError(f"not a {fmt} document")
    if doc.get("version") != FORMAT_VERSION:
        raise SchemaError(f"unsupported {fmt} version {doc.get('version')!r}")


def scene_from_dict(doc: dict) -> Scene:
    _check_envelope(doc, SCENE_FORMAT)
    try:
        chains = []
        for c in doc["chains"]:
            J = np.array(c["joints"], dtype=float)
            ref = np.array(c["reference_lengths"], dtype=float)
            if J.ndim != 2 or J.shape[1] != 3 or len(J) < 2 or ref.shape != (len(J) - 1,):
                raise SchemaError("chain joints and reference lengths do not match")
            chains.append((J, ref, str(c["role"])))
        eps, tau = float(doc["epsilon"]), float(doc["tau"])
        certs = tuple(PiercingCertificate.from_dict(d) for d in doc["certificates"])
        prov = doc["provenance"]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"bad scene document: {exc}") from exc

    built = []
    for J, ref, role in chains:
        if not np.all(np.isfinite(J)):
            raise InvariantViolation("non-finite joint coordinates")
        if np.any(ref <= 0) or np.any(np.abs(np.linalg.norm(np.diff(J, axis=0), axis=1) - ref) > LENGTH_TOL):
            raise InvariantViolation(f"{role} chain: link lengths differ from reference")
        J.flags.writeable = False
        ref.flags.writeable = False
        built.append(Chain(J, ref, role))
    if not (eps > 0 and tau > 0):
        raise InvariantViolation("epsilon and tau must be positive")
    for c in certs:
        (pc, pe), (tc, tri) = c.piercer, c.target
        if not (0 <= pc < len(built) and 0 <= pe < built[pc].n_edges):
            raise InvariantViolation(f"certificate piercer {c.piercer} out of range")
        if not (0 <= tc < len(built) and all(0 <= i < built[tc].n_joints for i in tri)):
            raise InvariantViolation(f"certificate target {c.target} out of range")
        if c.expected_sign not in (-1, 1):
            raise InvariantViolation("certificate sign must be +1 or -1")
    return Scene(tuple(built), eps, tau, certs, prov)


def save_scene(scene: Scene, path) -> None:
    _write(_dumps(scene_to_dict(scene)), path)


def load_scene(path) -> Scene:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc.msg})") from exc
    return scene_from_dict(doc)


def report_document(kind: str, params: dict, result: dict) -> dict:
    return {"format": REPORT_FORMAT, "version": FORMAT_VERSION, "kind": kind,
            "params": params, "result": result}


def save_report(doc: dict, path) -> None:
    _write(_dumps(doc), path)


def load_report(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc.msg})") from exc
    _check_envelope(doc, REPORT_FORMAT)
    return doc


def export_obj(scene: Scene, path) -> None:
    """Write joints as ``v`` records and links as ``l`` records."""
    lines = ["# chainlock scene", f"# chains {len(scene.chains)}"]
    base = 0
    for i, c in enumerate(scene.chains):
        lines.append(f"# chain {i} role {c.role}")
        lines.extend("v {!r} {!r} {!r}".format(*map(float, p)) for p in c.joints)
        lines.extend(f"l {base + k + 1} {base + k + 2}" for k in range(c.n_edges))
        base += c.n_joints
    _write("\n".join(lines) + "\n", path)


# -- command line ------------------------------------------------------------


class _Usage(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chainlock", description="2-chain / 16-chain interlocking toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build a scene and save it")
    b.add_argument("--kind", choices=SCENE_KINDS, default="interlocked")
    b.add_argument("--B", type=float, default=TrapezoidParams.B)
    b.add_argument("--L", type=float, default=TrapezoidParams.L)
    b.add_argument("--theta", type=float, default=TrapezoidParams.theta)
    b.add_argument("--epsilon", type=float, default=None,
                   help="default 0.01 for trapezoid scenes; selects epsilon mode for tangle_only")
    b.add_argument("--out", required=True)

    v = sub.add_parser("verify", help="sample foldings and check all bounds")
    v.add_argument("--scene", required=True)
    v.add_argument("--samples", type=int, default=1000)
    v.add_argument("--sigma", type=float, default=0.02)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--report", default=None)

    e = sub.add_parser("escape", help="randomised separation search")
    e.add_argument("--scene", required=True)
    e.add_argument("--budget", type=int, default=SearchConfig.budget)
    e.add_argument("--restarts", type=int, default=SearchConfig.restarts)
    e.add_argument("--sigma-start", type=float, default=SearchConfig.sigma_start)
    e.add_argument("--sigma-end", type=float, default=SearchConfig.sigma_end)
    e.add_argument("--sep-threshold", type=float, default=None)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    e.add_argument("--report", default=None)
    e.add_argument("--expect", choices=("separated", "not-separated"), default=None,
                   help="exit 1 unless the outcome matches")

    o = sub.add_parser("oracle", help="sampling oracles for the lemmas")
    osub = o.add_subparsers(dest="oracle", required=True)
    d = osub.add_parser("deviation")
    d.add_argument("--epsilon", type=float, required=True)
    d.add_argument("--length", type=float, required=True)
    d.add_argument("--n", type=int, default=100_000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--report", default=None)
    h = osub.add_parser("height")
    h.add_argument("--B", type=float, default=1.0)
    h.add_argument("--theta", type=float, default=math.pi / 3)
    h.add_argument("--epsilon", type=float, required=True)
    h.add_argument("--length", type=float, default=2.0)
    h.add_argument("--n", type=int, default=100_000)
    h.add_argument("--seed", type=int, default=0)
    h.add_argument("--report", default=None)

    x = sub.add_parser("export", help="write an OBJ file of a scene")
    x.add_argument("--scene", required=True)
    x.add_argument("--out", required=True)
    return p


def _emit(doc: dict, path) -> None:
    if path:
        save_report(doc, path)


def _cmd_build(a) -> int:
    if a.kind == "tangle_only":
        p = TangleParams() if a.epsilon is None else TangleParams("epsilon", a.epsilon)
    else:
        eps = TrapezoidParams.epsilon if a.epsilon is None else a.epsilon
        p = TrapezoidParams(a.B, a.L, a.theta, eps)
    save_scene(build_scene(a.kind, p), a.out)
    print(f"wrote {a.kind} scene to {a.out}")
    return 0


def _cmd_verify(a) -> int:
    scene = load_scene(a.scene)
    rep = verify_scene(scene, a.samples, a.seed, a.sigma)
    params = {"scene": scene.provenance, "samples": a.samples, "sigma": a.sigma, "seed": a.seed}
    _emit(report_document("verify", params, rep.to_dict()), a.report)
    for c in rep.checks:
        mark = "ok  " if c["passed"] else "FAIL"
        print(f"{mark} {c['name']}: {c['measured']:.6g} {c['relation']} {c['bound']:.6g}")
    print(f"{rep.states} states, {rep.rejected} rejected moves: {'PASS' if rep.passed else 'FAIL'}")
    return 0 if rep.passed else 1


def _cmd_escape(a) -> int:
    scene = load_scene(a.scene)
    cfg = SearchConfig(a.budget, a.restarts, a.sigma_start, a.sigma_end, a.sep_threshold,
                       a.seed, max(1, a.workers))
    rep = run_escape(scene, cfg)
    _emit(report_document("escape", {"scene": scene.provenance, **cfg.to_dict()}, rep.to_dict()),
          a.report)
    lo, hi = rep.apex_height_range
    print(f"separated={str(rep.separated).lower()} best_objective={rep.best_objective:.6g} "
          f"threshold={rep.sep_threshold:.6g} apex_height=[{lo:.6g}, {hi:.6g}] "
          f"accepted={rep.accepted} rejected={rep.rejected}")
    if not math.isnan(rep.certified_apex_range[0]):
        clo, chi = rep.certified_apex_range
        print(f"apex_height while certificates hold=[{clo:.6g}, {chi:.6g}]")
    if a.expect is None:
        return 0
    return 0 if rep.separated == (a.expect == "separated") else 1


def _cmd_oracle(a) -> int:
    if a.oracle == "deviation":
        r = deviation_oracle(a.epsilon, a.length, a.n, a.seed)
        ok = r.sampled_max <= r.formula_delta + 1e-9
        params = {"epsilon": a.epsilon, "L": a.length, "n": a.n, "seed": a.seed}
        _emit(report_document("oracle-deviation", params, r.to_dict() | {"ok": ok}), a.report)
        print(f"formula delta = {r.formula_delta:.7g} rad, sampled max = {r.sampled_max:.7g} rad "
              f"({r.sampled_max / r.formula_delta:.4f} of delta)" if r.formula_delta > 0 else
              f"formula delta = 0, sampled max = {r.sampled_max:.7g}")
        return 0 if ok else 1
    hb = height_bounds(a.B, a.theta, a.epsilon, a.length, oracle_n=a.n, seed=a.seed)
    _, _, skipped = height_oracle(a.B, a.theta, a.epsilon, a.n, a.seed, L=a.length)
    params = {"B": a.B, "theta": a.theta, "epsilon": a.epsilon, "L": a.length, "n": a.n, "seed": a.seed}
    _emit(report_document("oracle-height", params, hb.to_dict() | {"skipped": skipped}), a.report)
    print(f"h = {hb.h:.7g}, h_min = {hb.h_min:.7g}, h_max = {hb.h_max:.7g}")
    print(f"oracle min = {hb.oracle_min:.7g}, oracle max = {hb.oracle_max:.7g}, skipped = {skipped}")
    print(f"widened: {', '.join(hb.widened) if hb.widened else 'none'}")
    return 0 if not hb.widened else 1


def _cmd_export(a) -> int:
    export_obj(load_scene(a.scene), a.out)
    print(f"wrote {a.out}")
    return 0


def run_cli(argv=None) -> int:
    parser = _parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = {"build": _cmd_build, "verify": _cmd_verify, "escape": _cmd_escape,
               "oracle": _cmd_oracle, "export": _cmd_export}[a.command]
    try:
        return handler(a)
    except (SchemaError, InvariantViolation, ConstructionError, ChainError, MissingRole,
            ValueError, OSError) as exc:
        print(f"chainlock: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())
