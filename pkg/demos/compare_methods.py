"""Swarm planner against the random target-shift baseline on the same seeds.

Both methods plan on identical traffic draws.  Success means a feasible
plan returned within the 200 ms budget.  Keep ``workers=1`` on small
machines: parallel trials share cores and inflate the timed plan calls.

    python3 demos/compare_methods.py [trials]
"""

import sys

from swarmlane import harness

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 20
template = harness.build_scenario("nominal")

reports = {m: harness.run_batch(template, m, trials) for m in harness.METHODS}
for method, rep in reports.items():
    a = rep.aggregates()
    print(f"{method:>4}: success {a['success_rate_pct']:5.1f}%  feasible {a['feasible']}/{a['trials']}  "
          f"mean clearance {a['mean_min_clearance_m'] or float('nan'):.2f} m  "
          f"mean time {a['mean_time_ms']:.0f} ms  median steps {a['median_steps_to_merge']}")

# where do the two disagree?
pso, mc = (reports[m].records for m in harness.METHODS)
only_mc = [p.seed for p, m in zip(pso, mc) if m.success and not p.success]
only_pso = [p.seed for p, m in zip(pso, mc) if p.success and not m.success]
print(f"\nseeds only the baseline solved: {len(only_mc)}; only the swarm solved: {len(only_pso)}")
if only_mc:
    print(f"inspect one with: swarmlane plan --seed {only_mc[0]}")
