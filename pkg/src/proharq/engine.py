"""
Slot-by-slot simulation loop.

Within a slot the order is fixed: feedback delivery, cluster decisions,
transmissions, traffic arrivals, TB assembly and queue bookkeeping,
mobility, logging.  Every random draw comes from a named Philox substream of
the scenario seed, so a run is a pure function of its scenario.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelModel, decode, eesm_combine
from .controller import DecisionContext
from .mac import (DECODED, DROPPED, ClusterDecision, ProtocolError, QueueState, RlcBuffer,
                  apply_queue_dynamics, build_tb, compute_tb_size, handle_feedback, schedule_cluster)
from .metrics import PKT_CENSORED, PKT_DELIVERED, PKT_DROPPED, MetricsLog
from .strategies import make_strategy
from .traffic import OnOffSource

STREAMS = ("traffic", "los", "shadowing", "fading", "controller")


class RngStreams:
    """Independent counter-based generators, one per named stream.

    Stream ``name`` of seed ``s`` is ``Philox(SeedSequence(s, spawn_key=(i,)))``
    with ``i`` its position in :data:`STREAMS`.
    ``overrides`` re-seeds individual streams (used to test isolation).
    """

    def __init__(self, seed: int, overrides=None):
        overrides = overrides or {}
        for i, name in enumerate(STREAMS):
            ss = np.random.SeedSequence(overrides.get(name, seed), spawn_key=(i,))
            setattr(self, name, np.random.Generator(np.random.Philox(ss)))


class _LinkRng:
    """LOS draws from one stream, shadowing innovations from another."""

    def __init__(self, los, shadowing):
        self.random = los.random
        self.standard_normal = shadowing.standard_normal


@dataclass
class SimClock:
    """Current slot and its duration; advanced once per loop iteration."""

    slot: int
    slot_ms: float

    @property
    def time_s(self) -> float:
        return self.slot * self.slot_ms / 1000.0

    def advance(self):
        self.slot += 1


def ue_position(scenario, slot: int):
    """UE starts on the x axis at ``d0`` and moves with constant velocity."""
    t = slot * scenario.slot_ms / 1000.0
    vx, vy = scenario.velocity_mps
    return scenario.d0_m + vx * t, vy * t


def run(scenario, rng_overrides=None, channel_trace=None) -> MetricsLog:
    """Simulate ``scenario.sim_slots`` slots and return the full log.

    ``channel_trace``, if a list, receives one dict per slot with the link
    state and the effective SINR of the slot's transmission (``None`` when
    nothing useful was sent).
    """
    sc = scenario
    rngs = RngStreams(sc.seed, rng_overrides)
    link_rng = _LinkRng(rngs.los, rngs.shadowing)
    tb_size = compute_tb_size(sc)
    chan = ChannelModel(sc)
    source = OnOffSource(sc, rngs.traffic)
    strategy = make_strategy(sc)
    ctrl = getattr(strategy, "controller", None)
    k1, l12, r_max = sc.k1_slots, sc.l12_slots, sc.r_max_total
    packet_unit = sc.queue_unit == "packet"
    n = sc.sim_slots

    link = chan.initial_state(ue_position(sc, 0), link_rng)
    buffer = RlcBuffer()

    # per-packet records
    p_size, p_arrival, p_delivery, p_status = [], [], [], []
    tb_rows = []
    # per-slot records
    s_q1 = np.zeros(n, dtype=np.int64)
    s_q2 = np.zeros(n, dtype=np.int64)
    s_q1p = np.zeros(n, dtype=np.int64)
    s_q2p = np.zeros(n, dtype=np.int64)
    s_z = np.zeros(n)
    s_dist = np.zeros(n)

    tb = None            # the single HARQ process in flight
    tb_in_q2 = False
    tx_slots = []
    feedback = None
    decision_at = None
    radio_free_from = 0
    next_tb_id = 0

    q = QueueState()
    frame = {"alpha": None, "served": 0, "arrivals": 0}

    def close_frame(decoded=False, c0_failed=False, dropped=False):
        nonlocal q
        q = apply_queue_dynamics(q, frame["alpha"], frame["served"], frame["arrivals"],
                                 decoded=decoded, c0_failed=c0_failed, dropped=dropped)
        frame.update(alpha=None, served=0, arrivals=0)
        want_q2 = 1 if tb_in_q2 else 0
        if q.q1_bytes != buffer.bytes or q.q2_tbs != want_q2:
            raise ProtocolError(f"queue bookkeeping diverged: {q} vs Q1={buffer.bytes} Q2={want_q2}")

    def finish(t, status):
        nonlocal tb, tb_in_q2, radio_free_from
        if status == DROPPED:
            for pid, _, _, _ in tb.segments:
                p_status[pid] = PKT_DROPPED
                p_delivery[pid] = -1
        zeta = 0.0 if tb.n_clusters == 1 else tb.last_risk
        if ctrl is not None:
            ctrl.complete(tb.total_rtx, zeta)
        tb_rows.append((tb.tb_id, tb.built_slot, tb.first_tx_slot,
                        -1 if tb.decode_slot is None else tb.decode_slot, t, tb.status,
                        tb.allocated, tb.needed, tb.n_clusters,
                        "-".join(str(d.r) for d, _ in tb.clusters), tb.payload_bytes,
                        len(set(tb.packet_ids)), zeta))
        tb = None
        tb_in_q2 = False
        radio_free_from = t + 1

    clock = SimClock(0, sc.slot_ms)
    while clock.slot < n:
        t = clock.slot
        a2_now = 0.0
        eff = None

        # (1) grouped feedback
        if feedback is not None and feedback.deliver_at_slot == t:
            ev = feedback
            feedback = None
            outcome = handle_feedback(ev, tb, r_max, strategy.max_cluster_index)
            c0_failed = ev.cluster_index == 0 and not ev.ack and outcome != DROPPED
            if c0_failed:
                tb_in_q2 = True
                a2_now = float(len(set(tb.packet_ids))) if packet_unit else 1.0
            if outcome == DECODED:
                was_q2 = tb_in_q2
                tb_in_q2 = False
                close_frame(decoded=was_q2)
                finish(t, DECODED)
            elif outcome == DROPPED:
                was_q2 = tb_in_q2
                tb_in_q2 = False
                close_frame(dropped=was_q2)
                finish(t, DROPPED)
            else:
                close_frame(c0_failed=c0_failed)
                frame["alpha"] = 0
                decision_at = t + 1

        # (2) cluster decision
        if decision_at == t:
            decision_at = None
            q = replace(q, q1_packets=len(buffer), q2_packets=len(set(tb.packet_ids)),
                        z=ctrl.state.z if ctrl else 0.0)
            ctx = DecisionContext(q, tb.n_clusters, tb.total_rtx, tb.sinr_state.accumulated_sinr_linear,
                                  sc.sinr_target_db, t, len(set(tb.packet_ids)), tb_size)
            decision = strategy.decide(ctx)
            if decision is None:
                tb.status = DROPPED
                tb.needed = tb.total_rtx
                tb_in_q2 = False
                close_frame(dropped=True)
                finish(t, DROPPED)
            else:
                if ctrl is not None:
                    tb.last_risk = strategy.last_risk
                tx_slots, feedback = schedule_cluster(tb, decision, t, l12, k1)

        # (3) transmissions
        if tx_slots and tx_slots[0] == t:
            tx_slots.pop(0)
            if tb.decode_slot is None:
                rb = chan.per_rb_sinr(link, rng=rngs.fading)
                before = tb.sinr_state.accumulated_sinr_linear
                after = eesm_combine(rb, before, sc.beta_eesm)
                eff = after - before
                tb.sinr_state = replace(tb.sinr_state, accumulated_sinr_linear=after,
                                        rtx_count=tb.sinr_state.rtx_count + 1)
                tb.needed += 1
                if ctrl is not None:
                    ctrl.observe_increment(eff)
                if decode(after, sc.sinr_target_db):
                    tb.decode_slot = t
                    for pid, _, _, last in tb.segments:
                        if last and p_status[pid] != PKT_DROPPED:
                            p_status[pid] = PKT_DELIVERED
                            p_delivery[pid] = t + 1
            if not tx_slots:
                feedback = replace(feedback, ack=tb.decode_slot is not None)

        # (4) arrivals
        arrived = source(t)
        a1_bytes = 0
        for pkt in arrived:
            buffer.push(pkt)
            p_size.append(pkt.size_bytes)
            p_arrival.append(pkt.arrival_slot)
            p_delivery.append(-1)
            p_status.append(PKT_CENSORED)
            a1_bytes += pkt.size_bytes
        frame["arrivals"] += a1_bytes

        # (5) TB assembly from Q1 when the radio is idle
        if tb is None and t >= radio_free_from and buffer.bytes > 0:
            close_frame()
            tb = build_tb(buffer, tb_size, t, l12, next_tb_id)
            next_tb_id += 1
            frame.update(alpha=1, served=tb.payload_bytes)
            tx_slots, feedback = schedule_cluster(tb, ClusterDecision(0, 1, t), t, l12, k1)

        if ctrl is not None:
            a1 = float(len(arrived)) if packet_unit else a1_bytes / tb_size
            ctrl.observe_arrivals(a1, a2_now)

        # (6) mobility and channel evolution
        s_dist[t] = link.distance_m
        if channel_trace is not None:
            channel_trace.append({
                "slot": t, "distance_m": link.distance_m, "is_los": int(link.is_los),
                "shadowing_db": link.shadowing_db, "mean_sinr_db": chan.mean_sinr_db(link),
                "effective_sinr_db": None if eff is None else 10 * math.log10(max(eff, 1e-300)),
            })
        link = chan.sample_link_state(link, ue_position(sc, t + 1), link_rng)

        # (7) per-slot log
        s_q1[t] = buffer.bytes
        s_q2[t] = 1 if tb_in_q2 else 0
        s_q1p[t] = len(buffer)
        s_q2p[t] = len(set(tb.packet_ids)) if tb_in_q2 else 0
        s_z[t] = ctrl.state.z if ctrl else 0.0
        clock.advance()

    meta = {
        "scenario": sc.digest(),
        "seed": sc.seed,
        "strategy": sc.strategy,
        "v": sc.v_param if sc.strategy_name == "adaptive" else float("nan"),
        "slot_ms": sc.slot_ms,
        "tb_size": tb_size,
        "sim_slots": n,
        "in_flight_tb": None if tb is None else tb.tb_id,
        "in_flight_bytes": 0 if tb is None else tb.payload_bytes,
        "std": "population",
        "quantile": "nearest-rank",
    }
    if ctrl is not None:
        meta.update(zeta_bar=ctrl.state.zeta_bar, z_final=ctrl.state.z, f_obj_running=ctrl.state.f_obj_running)
    packets = {
        "size": np.asarray(p_size, dtype=np.int64),
        "arrival_slot": np.asarray(p_arrival, dtype=np.int64),
        "delivery_slot": np.asarray(p_delivery, dtype=np.int64),
        "status": np.asarray(p_status, dtype=np.int8),
    }
    slots = {"q1_bytes": s_q1, "q2_tbs": s_q2, "q1_packets": s_q1p, "q2_packets": s_q2p,
             "z": s_z, "distance_m": s_dist}
    return MetricsLog(meta, packets, tb_rows, slots, list(ctrl.trace) if ctrl else [])


@dataclass
class RunFailure:
    scenario: object
    error: str


def _safe_run(sc):
    try:
        return run(sc)
    except Exception as exc:  # reported per scenario, siblings keep running
        return RunFailure(sc, f"{type(exc).__name__}: {exc}")


def run_many(scenarios, parallelism: int = 1):
    """Run scenarios (in order) and return their logs or :class:`RunFailure` entries."""
    scenarios = list(scenarios)
    if parallelism <= 1 or len(scenarios) <= 1:
        return [_safe_run(s) for s in scenarios]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_safe_run, scenarios))
