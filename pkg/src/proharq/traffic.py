"""ON-OFF downlink packet source feeding the RLC buffer."""

from __future__ import annotations

import math
from dataclasses import dataclass

ON, OFF = "ON", "OFF"


@dataclass(frozen=True)
class AppPacket:
    id: int
    size_bytes: int
    arrival_slot: int


@dataclass(frozen=True)
class OnOffState:
    phase: str
    slots_remaining: int


class OnOffSource:
    """Alternating ON/OFF periods with geometric durations (in slots).

    Geometric durations are the slotted analogue of exponential periods and
    have exactly the configured mean.  During ON the number of packets per
    slot is Poisson(``lambda_on``) (or exactly ``round(lambda_on)`` for
    deterministic arrivals); sizes are exponential and rounded up to whole
    bytes.
    """

    def __init__(self, scenario, rng):
        sc = scenario
        self.rng = rng
        self.mean_on = sc.t_on_ms / sc.slot_ms
        self.mean_off = sc.t_off_ms / sc.slot_ms
        self.lambda_on = sc.lambda_on
        self.deterministic = sc.arrivals == "deterministic"
        self.mean_size = sc.mean_packet_bytes
        self.enabled = sc.traffic_enabled
        self.next_id = 0
        p_on = self.mean_on / (self.mean_on + self.mean_off)
        phase = ON if rng.random() < p_on else OFF
        self.state = OnOffState(phase, self._duration(phase))

    def _duration(self, phase) -> int:
        mean = self.mean_on if phase == ON else self.mean_off
        return int(self.rng.geometric(min(1.0, 1.0 / mean)))

    def _sizes(self, n):
        return [max(1, math.ceil(x)) for x in self.rng.exponential(self.mean_size, n)]

    def step(self, state: OnOffState, slot: int) -> tuple[OnOffState, list[AppPacket]]:
        """Advance ``state`` by one slot and return the packets that arrived in it."""
        if state.slots_remaining <= 0:
            phase = OFF if state.phase == ON else ON
            state = OnOffState(phase, self._duration(phase))
        packets = []
        if state.phase == ON and self.enabled:
            n = int(round(self.lambda_on)) if self.deterministic else int(self.rng.poisson(self.lambda_on))
            if n:
                for size in self._sizes(n):
                    packets.append(AppPacket(self.next_id, size, slot))
                    self.next_id += 1
        return OnOffState(state.phase, state.slots_remaining - 1), packets

    def __call__(self, slot: int) -> list[AppPacket]:
        self.state, packets = self.step(self.state, slot)
        return packets
