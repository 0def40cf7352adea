"""
Reactive, fixed-proactive and adaptive HARQ side by side
========================================================

All strategies see the same seeds, hence the same traffic and the same
channel draws.  A reactive scheme spends one slot per NACK and waits a full
round trip each time.  Fixed proactive patterns send several copies per
feedback round, which cuts latency but wastes slots once the TB has already
decoded.  The adaptive controller picks the cluster size per NACK.
"""

import os

import numpy as np

from proharq import run_many, summarize
from proharq.metrics import outage_latency, ran_latency_series
from proharq.scenario import Scenario

strategies = ["reactive", "fixed(2,2,2,2,2)", "fixed(3,3,3,1)", "adaptive"]
seeds = range(5)
base = Scenario()          # 2e4 slots, V = 60

scenarios = [base.replace(strategy=s, seed=k) for s in strategies for k in seeds]
logs = run_many(scenarios, os.cpu_count() or 1)

###############################################################################
# Per-strategy aggregates over the five seeds.  Latencies are pooled across
# seeds before taking quantiles.

print(f"{'strategy':<18}{'eff':>7}{'f_obj':>7}{'mean ms':>9}{'std ms':>8}{'p90 ms':>8}{'p95 ms':>8}{'loss':>7}")
for i, name in enumerate(strategies):
    group = logs[i * len(seeds):(i + 1) * len(seeds)]
    reps = [summarize(lg) for lg in group]
    lat = np.concatenate([ran_latency_series(lg) for lg in group])
    print(f"{name:<18}"
          f"{np.mean([r.resource_efficiency for r in reps]):7.3f}"
          f"{np.mean([r.f_obj for r in reps]):7.3f}"
          f"{lat.mean():9.2f}{lat.std():8.2f}"
          f"{outage_latency(lat, 0.9):8.1f}{outage_latency(lat, 0.95):8.1f}"
          f"{np.mean([r.app_loss for r in reps]):7.3f}")

###############################################################################
# The lowest possible latency is one preparation delay plus the slot itself.

print(f"\nfloor: {(1 + base.l12_slots) * base.slot_ms} ms")
