"""How the swarm size trades success against planning time.

Every swarm size plans on the same seeds, so differences come from the
search alone.

    python3 demos/particle_sweep.py [trials] [counts]
"""

import sys

from swarmlane import harness

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 20
counts = [int(c) for c in (sys.argv[2] if len(sys.argv) > 2 else "1,2,3,4,5").split(",")]

template = harness.build_scenario("nominal")
sweep = harness.particle_sweep(template, counts, trials)

print("particles  success  feasible  mean ms  median ms")
for n, rep in sweep.items():
    times = sorted(r.wall_time for r in rep.records)
    median = 1000 * times[len(times) // 2]
    print(f"{n:9d}  {rep.success_rate:6.1f}%  {sum(r.feasible for r in rep.records):8d}  "
          f"{rep.mean_time_ms:7.1f}  {median:9.1f}")
