"""
How often does a first transmission fail?
=========================================

The decoding threshold is the one free knob of the link abstraction.  This
script estimates the single-shot block error rate (BLER) for a few
thresholds at the distances the UE covers during a default run, so the
choice of ``sinr_target_db`` can be checked by eye.

Each trial draws a fresh LOS state, a shadowing value and one slot of
per-RB Rayleigh fading, folds the RBs into one effective SINR and compares
it with the threshold.
"""

import numpy as np

from proharq.channel import ChannelModel, decode, eesm_combine
from proharq.engine import ue_position
from proharq.scenario import Scenario

sc = Scenario()
chan = ChannelModel(sc)
rng = np.random.default_rng(1)

# Distance from the gNB at the start, middle and end of a default run.
distances = [float(np.hypot(*ue_position(sc, t))) for t in (0, sc.sim_slots // 2, sc.sim_slots)]
targets = [13.0, 15.0, 17.0, 19.0]
trials = 20000

###############################################################################
# Effective SINR samples per distance; the threshold is applied afterwards.

samples = {}
for d in distances:
    eff = np.empty(trials)
    for i in range(trials):
        link = chan.initial_state((d, 0.0), rng)
        eff[i] = eesm_combine(chan.per_rb_sinr(link, rng=rng), 0.0, sc.beta_eesm)
    samples[d] = eff

print(f"single-shot BLER, {trials} trials per cell (default target {sc.sinr_target_db} dB)")
print("target dB " + "".join(f"{d:>10.0f} m" for d in distances))
for tgt in targets:
    row = [np.mean([not decode(s, tgt) for s in samples[d]]) for d in distances]
    print(f"{tgt:9.1f} " + "".join(f"{b:12.3f}" for b in row))

###############################################################################
# Median effective SINR, for orientation.

for d in distances:
    print(f"median effective SINR at {d:.0f} m: {10 * np.log10(np.median(samples[d])):.1f} dB")
