"""
Estimating the risk of a cluster
================================

After a NACK the controller needs, for each candidate cluster size ``r``,
the probability that ``r`` more transmissions still leave the TB short of
the decoding threshold.  It learns the per-transmission SINR gain online
and resamples it.  Here the gains come straight from the channel model at
the start distance, so the estimate can be compared with a brute-force
simulation of fresh transmissions.
"""

import numpy as np

from proharq.channel import ChannelModel, eesm_combine
from proharq.controller import IncrementModel
from proharq.scenario import Scenario

sc = Scenario()
chan = ChannelModel(sc)
rng = np.random.default_rng(7)


def gain(d=sc.d0_m):
    link = chan.initial_state((d, 0.0), rng)
    return eesm_combine(chan.per_rb_sinr(link, rng=rng), 0.0, sc.beta_eesm)


target = 10 ** (sc.sinr_target_db / 10)
model = IncrementModel()
for _ in range(500):            # one full window of observed gains
    model.observe(gain())

###############################################################################
# Suppose the first transmission reached only a quarter of the threshold.

gap = 0.75 * target
rs = range(1, 6)
est = model.shortfall(gap, rs)
sims = 20000
check = {r: np.mean([sum(gain() for _ in range(r)) < gap for _ in range(sims)]) for r in (1, 2, 3)}

print(f"threshold {sc.sinr_target_db} dB = {target:.1f} linear, remaining gap {gap:.1f}")
print(f"{'r':>3}{'estimate':>10}{'simulated':>11}")
for r in rs:
    sim = f"{check[r]:11.4f}" if r in check else f"{'':>11}"
    print(f"{r:3d}{est[r]:10.4f}{sim}")

###############################################################################
# Before 30 gains have been seen a Gaussian fit stands in for the sample.

young = IncrementModel()
for _ in range(10):
    young.observe(gain())
mu, sd = young.gaussian()
print(f"\nwarm-up Gaussian from 10 gains: mean {mu:.1f}, std {sd:.1f}")
print("shortfall:", {r: round(p, 4) for r, p in young.shortfall(gap, rs).items()})
