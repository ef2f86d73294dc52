"""Plan one blocked merge and look at what the swarm changed.

The ego starts in the top lane at 10 m/s.  Two vehicles run in the bottom
lane at 12 m/s, and the naive lane change (a smooth cubic ending 20 m ahead)
would pass too close to one of them.  We compare that initial plan with the
planner's answer and write the run files next to this script.

    python3 demos/blocked_merge.py [seed]
"""

import dataclasses
import sys
from pathlib import Path

import numpy as np

from swarmlane import harness
from swarmlane.planner import assess, initial_plan, track

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 20

template = harness.build_scenario("nominal")
# only keep draws where the naive plan is unsafe, and drop the wall-clock cap
template = dataclasses.replace(
    template,
    traffic=dataclasses.replace(template.traffic, require_blocked=True),
    planner=dataclasses.replace(template.planner, time_budget_ms=None))
scn = template.realize(seed)
req = scn.request()
predictor = scn.build_predictor()
print(f"seed {seed}: other vehicles start at x = {np.round(scn.others_x, 2)} m in lane {scn.traffic.lane}")

naive = track(req, initial_plan(req))
a = assess(req, predictor, naive)
print(f"initial plan: clearance {a.clearance:.2f} m at step {a.clearance_step} "
      f"(needs >= {scn.epsilon} m) -> {'safe' if a.feasible(req.safety) else 'unsafe'}")

res = harness.run_plan(scn)
print(f"swarm planner: feasible={res.feasible} after {res.rounds} round(s), "
      f"clearance {res.min_clearance:.2f} m, merged after {res.steps_to_merge} steps, "
      f"{1000 * res.wall_time:.0f} ms")
if res.breakdown is not None:
    terms = {k: round(v, 2) for k, v in res.breakdown.to_dict().items() if k.startswith("f_")}
    print("cost terms:", terms)

# lateral profiles side by side, every third step
print("\n step   naive y   planned y")
for k in range(0, len(naive), 3):
    print(f"{k:5d} {naive.y[k]:9.2f} {res.trajectory.y[k]:11.2f}")

out = Path(__file__).with_name("out") / f"blocked_merge_{seed}"
paths = harness.export_run(res, out, scn.dt)
print("\nwrote", ", ".join(p.name for p in paths.values()), "to", out)
