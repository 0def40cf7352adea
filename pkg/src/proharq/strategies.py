"""Cluster-size policies applied after a NACK: reactive, fixed pattern, adaptive."""

from __future__ import annotations

from .controller import DecisionContext, LyapunovController
from .mac import ClusterDecision


def _budget(ctx: DecisionContext, r_max_total: int) -> int:
    return r_max_total - ctx.rtx_so_far


def reactive_decide(ctx: DecisionContext, r_max_total: int):
    """One retransmission per NACK; ``None`` once the budget is spent."""
    if _budget(ctx, r_max_total) < 1:
        return None
    return ClusterDecision(ctx.cluster_index, 1, ctx.slot)


def fixed_decide(ctx: DecisionContext, pattern, r_max_total: int):
    """Next entry of ``pattern``, clipped to the remaining budget.

    Returns ``None`` (drop) when the pattern or the budget is exhausted.
    """
    budget = _budget(ctx, r_max_total)
    if ctx.cluster_index > len(pattern) or budget < 1:
        return None
    return ClusterDecision(ctx.cluster_index, min(pattern[ctx.cluster_index - 1], budget), ctx.slot)


class Reactive:
    name = "reactive"
    max_cluster_index = None

    def __init__(self, scenario):
        self.r_max_total = scenario.r_max_total

    def decide(self, ctx):
        return reactive_decide(ctx, self.r_max_total)


class Fixed:
    name = "fixed"

    def __init__(self, scenario):
        self.pattern = scenario.pattern
        self.r_max_total = scenario.r_max_total
        self.max_cluster_index = len(self.pattern)

    def decide(self, ctx):
        return fixed_decide(ctx, self.pattern, self.r_max_total)


class Adaptive:
    """Delegates every decision to a :class:`LyapunovController`."""

    name = "adaptive"

    def __init__(self, scenario):
        self.controller = LyapunovController(scenario)
        self.max_cluster_index = scenario.c_max
        self.last_risk = 0.0

    def decide(self, ctx):
        decision, scores = self.controller.decide(ctx)
        if decision is not None:
            self.last_risk = next(s.risk_estimate for s in scores if s.r == decision.r)
        return decision


def make_strategy(scenario):
    return {"reactive": Reactive, "fixed": Fixed, "adaptive": Adaptive}[scenario.strategy_name](scenario)
