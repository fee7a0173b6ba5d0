"""
Trying to pull the chains apart
===============================

A greedy random walk maximises the distance between the convex hulls of
the 2-chain and the 16-link chain. Certificates are not enforced, only
physical validity, so any escape the walk finds is a real one.

The default budget here is small so the demo finishes in well under a
minute; ``chainlock escape --budget 100000 --restarts 8`` runs the full
experiment.
"""
import sys

from chainlock.constructions import build_scene, trapezoid_params_of
from chainlock.escape import SearchConfig, replay, run_escape, objective
from chainlock.lemmas import height_bounds

budget = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000
cfg = SearchConfig(budget=budget, restarts=2, seed=0)

# %% Control: the 2-chain is not threaded and walks away
control = build_scene("control")
rc = run_escape(control, cfg)
print(f"control: separated={rc.separated} best={rc.best_objective:.3f} "
      f"(threshold {rc.sep_threshold}) after {len(rc.best_trajectory)} accepted moves")
# the recorded trajectory replays to the same state
print("replayed objective:", round(objective(replay(control, rc.best_trajectory)), 9))

# %% Interlocked: the hulls stay overlapped; watch the apex height
scene = build_scene("interlocked")
ri = run_escape(scene, cfg)
tp = trapezoid_params_of(scene)
lo, hi = height_bounds(tp.B, tp.theta, tp.epsilon, tp.L, oracle_n=0).band(0.1)
print(f"interlocked: separated={ri.separated} best={ri.best_objective:.3f}")
print(f"apex height range {[round(x, 4) for x in ri.apex_height_range]} vs band [{lo:.4f}, {hi:.4f}]")
print(f"while all four certificates held: {[round(x, 4) for x in ri.certified_apex_range]}")
for r in ri.restarts:
    print(f"  restart {r['index']}: apex {[round(x, 4) for x in r['apex_height_range']]}, "
          f"certificates held for {r['certified_moves']} accepted moves")

# With the full budget the apex drifts below the band: the corner tangles
# hold the hulls together but do not keep the trapezoid rigid. The
# decisions ledger records the diagnosis.
