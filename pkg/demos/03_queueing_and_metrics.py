"""Delay accounting and the load metrics.

An instance with capacity C serves up to C simultaneous connections
without queueing.  Past that, the overload model kicks in: the backlog
waits  lam' / (2C(C - lam'))  time units, diverging at twice the
capacity.  Load factor and Jain's index summarize how failover load is
spread over the surviving instances.
"""

import numpy as np

from edgefail import jain_fairness, queue_delay, service_delay

CAP = 30.0

print("queue waiting time (raw units) for one instance, capacity 30:")
print(f"{'arrival':>8} {'wait':>12}")
for arrival in (10, 30, 32, 36, 40, 48, 55, 59):
    w = queue_delay(arrival, CAP)
    print(f"{arrival:8d} {w:12.6f}")
print("nothing below capacity, divergence toward 2x capacity")
print("reference point: arrival 40 ->", queue_delay(40, CAP), "= 1/120")

# --- per-vehicle service delay -------------------------------------------
# 65 vehicles of one service split over two instances, 6 ms and 7 ms away
loads = [32.0, 33.0]
prop = [6.0, 7.0]
d = service_delay(loads, prop, CAP, ms_per_unit=1000.0)
print(f"\nload-weighted per-vehicle delay for loads {loads}: {d:.3f} ms")
print("  both instances sit just past capacity, so small queue terms appear")

d_idle = service_delay([20.0, 0.0], prop, CAP, ms_per_unit=1000.0)
print(f"same service fully on the near instance, under capacity: {d_idle:.3f} ms")

# --- fairness over failover shares ----------------------------------------
print("\nJain's index over per-candidate load shares:")
for shares in ([1.0, 0.0, 0.0], [0.5, 0.3, 0.2], [1 / 3, 1 / 3, 1 / 3]):
    print(f"  {np.round(shares, 3)} -> {jain_fairness(shares):.4f}")
print("1/n for a single loaded node, 1 for a perfectly even spread")
