"""
gNB MAC/HARQ bookkeeping: transport blocks, the RLC buffer (Q1), HARQ
processes awaiting retransmission (Q2), cluster timing and grouped feedback.

Timing convention (all in slots):

* a TB assembled at slot ``b`` is first sent at ``b + L12``;
* a cluster whose last slot is ``e`` gets one grouped feedback delivered at
  ``e + K1``;
* the gNB acts on feedback delivered at ``d`` from slot ``d + 1``, so a
  retransmission cluster decided then starts at ``d + 1 + L12``.

One reactive attempt therefore costs exactly ``1 + K1 + L12`` slots.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

from .channel import TbSinrState

IN_FLIGHT, DECODED, DROPPED = "in-flight", "decoded", "dropped"


class ProtocolError(RuntimeError):
    """Internal HARQ state machine inconsistency (a bug, not a user error)."""


def compute_tb_size(scenario) -> int:
    """Transport block size in bytes for one slot of ``n_ofdm`` symbols."""
    sc = scenario
    return math.floor(sc.n_ofdm * sc.bw_hz / (8 * sc.scs_hz) * sc.modulation_order * sc.code_rate)


@dataclass(frozen=True)
class QueueState:
    """Queue backlogs seen by the scheduler and the controller.

    ``q1_bytes`` is the RLC backlog, ``q2_tbs`` the number of NACKed HARQ
    processes not yet decoded or dropped, ``z`` the virtual risk queue.  The
    packet counts let the controller work in packet units.
    """

    q1_bytes: int = 0
    q2_tbs: int = 0
    z: float = 0.0
    q1_packets: int = 0
    q2_packets: int = 0

    def __post_init__(self):
        if min(self.q1_bytes, self.q2_tbs, self.z, self.q1_packets, self.q2_packets) < 0:
            raise ValueError(f"negative queue component in {self}")


def select_queue(q: QueueState):
    """Return 0 (serve Q2), 1 (serve Q1) or ``None`` when both queues are empty.

    HARQ processes take priority over fresh data.
    """
    if q.q2_tbs > 0:
        return 0
    if q.q1_bytes > 0:
        return 1
    return None


def apply_queue_dynamics(q: QueueState, alpha, served_bytes: int = 0, arrivals_bytes: int = 0,
                         decoded: bool = False, c0_failed: bool = False,
                         dropped: bool = False) -> QueueState:
    """Queue update at the end of a frame.

    ``Q1' = max(Q1 - alpha * served, 0) + A1`` and
    ``Q2' = max(Q2 - (1 - alpha) * 1{decoded}, 0) + A2`` with ``A2 = 1`` when the
    frame's first transmission failed.  A dropped HARQ process leaves Q2 like
    a decoded one.  ``alpha=None`` marks an idle frame (nothing served).
    """
    serve_q1 = alpha == 1
    serve_q2 = alpha == 0
    q1 = max(q.q1_bytes - (served_bytes if serve_q1 else 0), 0) + arrivals_bytes
    left = 1 if (serve_q2 and (decoded or dropped)) else 0
    q2 = max(q.q2_tbs - left, 0) + (1 if c0_failed else 0)
    return replace(q, q1_bytes=q1, q2_tbs=q2)


class RlcBuffer:
    """FIFO of application packets measured in bytes; the head may be segmented."""

    def __init__(self):
        self._q = deque()  # [packet, remaining_bytes]
        self.bytes = 0

    def __len__(self):
        return len(self._q)

    def push(self, packet):
        self._q.append([packet, packet.size_bytes])
        self.bytes += packet.size_bytes

    def pop_bytes(self, n: int):
        """Dequeue up to ``n`` bytes as ``(packet, nbytes, is_last_segment)`` tuples."""
        out = []
        while n > 0 and self._q:
            head = self._q[0]
            take = min(n, head[1])
            head[1] -= take
            n -= take
            self.bytes -= take
            done = head[1] == 0
            out.append((head[0], take, done))
            if done:
                self._q.popleft()
        return out


@dataclass(frozen=True)
class ClusterDecision:
    cluster_index: int
    r: int
    decided_at_slot: int


@dataclass(frozen=True)
class FeedbackEvent:
    tb_id: int
    cluster_index: int
    ack: bool
    deliver_at_slot: int


@dataclass
class TbRecord:
    tb_id: int
    size_bytes: int
    built_slot: int
    first_tx_slot: int
    segments: list = field(default_factory=list)  # (packet_id, nbytes, arrival_slot, last)
    sinr_state: TbSinrState = field(default_factory=TbSinrState)
    clusters: list = field(default_factory=list)  # (ClusterDecision, start_slot)
    total_rtx: int = 0
    status: str = IN_FLIGHT
    decode_slot: int | None = None
    done_slot: int | None = None
    needed: int = 0
    last_risk: float = 0.0

    @property
    def payload_bytes(self) -> int:
        return sum(s[1] for s in self.segments)

    @property
    def packet_ids(self):
        return [s[0] for s in self.segments]

    @property
    def allocated(self) -> int:
        return self.total_rtx

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)


def build_tb(q1: RlcBuffer, tb_size: int, slot: int, l12: int, tb_id: int = 0) -> TbRecord:
    """Fill a TB with up to ``tb_size`` bytes from the head of ``q1``.

    An under-full TB is sent as is.  The first transmission is ``l12`` slots
    after ``slot``.
    """
    if q1.bytes <= 0:
        raise ProtocolError("build_tb called with an empty RLC buffer")
    segs = [(p.id, n, p.arrival_slot, last) for p, n, last in q1.pop_bytes(tb_size)]
    return TbRecord(tb_id=tb_id, size_bytes=tb_size, built_slot=slot, first_tx_slot=slot + l12,
                    segments=segs)


def schedule_cluster(tb: TbRecord, decision: ClusterDecision, now: int, l12: int, k1: int):
    """Reserve the slots of one cluster and create its grouped feedback event.

    The initial transmission (cluster 0) uses the slot fixed by
    :func:`build_tb`; later clusters start ``l12`` slots after ``now``.
    Returns ``(slots, feedback)``.  The ``ack`` flag of the returned event is
    a placeholder that the engine fills in once the cluster has been sent.
    """
    if tb.status != IN_FLIGHT:
        raise ProtocolError(f"TB {tb.tb_id} is {tb.status}; cannot schedule")
    if decision.r < 1:
        raise ProtocolError("cluster must contain at least one slot")
    start = tb.first_tx_slot if decision.cluster_index == 0 else now + l12
    slots = list(range(start, start + decision.r))
    tb.clusters.append((decision, start))
    tb.total_rtx += decision.r
    return slots, FeedbackEvent(tb.tb_id, decision.cluster_index, False, slots[-1] + k1)


def handle_feedback(ev: FeedbackEvent, tb: TbRecord, r_max_total: int, max_cluster_index=None) -> str:
    """Apply grouped feedback; returns ``'decoded'``, ``'dropped'`` or ``'continue'``.

    A NACK drops the TB once the RTX budget is spent or when the last
    permitted cluster (``max_cluster_index``; ``None`` = unlimited) failed.
    """
    if ev.tb_id != tb.tb_id:
        raise ProtocolError(f"feedback for unknown TB {ev.tb_id} (in flight: {tb.tb_id})")
    if ev.ack:
        tb.status = DECODED
        tb.done_slot = ev.deliver_at_slot
        return DECODED
    if tb.total_rtx >= r_max_total or (max_cluster_index is not None
                                        and ev.cluster_index >= max_cluster_index):
        tb.status = DROPPED
        tb.done_slot = ev.deliver_at_slot
        tb.needed = tb.total_rtx
        return DROPPED
    return "continue"
