"""How many snapshots does the solver need? Sweep the window for d=0.

Below the minimum window some key bytes are not pinned down and a second
key fits the observations (AMBIGUOUS).
"""

from snapshot_attack import driver

rows = driver.bench_table([0], range(14, 19), trials=3, budget_s=60, seed=5)
for r in rows:
    print(f"cycles={r.cycles:2d} trial={r.trial} {r.outcome}")
print("minimum window:", driver.minimum_windows(rows))
