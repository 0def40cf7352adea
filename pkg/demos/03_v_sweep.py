"""
Sweeping the trade-off weight V
===============================

``V`` scales the per-decision cost of each extra transmission against the
queue backlog and the risk budget.  With ``V = 0`` nothing penalises an
extra transmission, so backlog and risk alone set the cluster size.  As
``V`` grows the controller settles on the smallest allowed cluster.

Two things to watch in the table: the mean number of transmissions per TB
(``f_obj``) and the mean backlog in packets.  In this model only one TB is
ever in flight, and a large cluster keeps the radio busy until its grouped
feedback, so the backlog tends to *shrink* as ``V`` grows rather than rise.
"""

import os

import numpy as np

from proharq import run_many, summarize
from proharq.scenario import Scenario

grid = list(range(0, 130, 10))
seeds = range(3)
base = Scenario(strategy="adaptive")

logs = run_many([base.replace(v_param=float(v), seed=s) for v in grid for s in seeds], os.cpu_count() or 1)
reps = [summarize(lg) for lg in logs]

###############################################################################

print(f"{'V':>5}{'f_obj':>8}{'eff':>7}{'queue':>8}{'p95 ms':>8}{'zeta_bar':>10}")
k = len(seeds)
for i, v in enumerate(grid):
    m = {f: np.mean([getattr(r, f) for r in reps[i * k:(i + 1) * k]])
         for f in ("f_obj", "resource_efficiency", "mean_queue", "p95_latency_ms", "zeta_bar")}
    print(f"{v:5d}{m['f_obj']:8.3f}{m['resource_efficiency']:7.3f}{m['mean_queue']:8.3f}"
          f"{m['p95_latency_ms']:8.1f}{m['zeta_bar']:10.4f}")

###############################################################################
# Cluster sizes actually chosen, from the controller trace of the first seed.

for v in (0, 60, 120):
    lg = logs[grid.index(v) * k]
    sizes = [r for _, _, _, r, _ in lg.controller]
    counts = np.bincount(sizes, minlength=6)[2:]
    print(f"V={v:3d}: cluster sizes 2..5 chosen {counts.tolist()}")
