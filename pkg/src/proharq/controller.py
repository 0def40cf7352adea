"""
Drift-plus-penalty decision maker for the size of proactive retransmission
clusters.

At every NACK the controller scores each feasible cluster size ``r`` with

    gamma(r) = V*r + Z*(risk(r) - zeta_o) + sum_i Q_i*(A_i - b_i(r))

and picks the smallest minimiser.  ``risk(r)`` is the probability that ``r``
more transmissions still leave the TB below its decode threshold, estimated
from the SINR increments observed so far.  The additive constant of the
drift bound does not depend on ``r`` and is left out of the score.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .mac import ClusterDecision, QueueState

_RISK_SEED = 0x5EED
_EXACT_SUPPORT = 8


def lyapunov_value(theta) -> float:
    """Quadratic Lyapunov function ``(Q1**2 + Q2**2 + Z**2) / 2``."""
    q1, q2, z = theta
    return 0.5 * (q1 * q1 + q2 * q2 + z * z)


def _normal_cdf(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


class IncrementModel:
    """Distribution of the per-transmission gain in effective SINR (linear).

    Holds the last ``window`` observed increments.  With fewer than
    ``min_obs`` observations a Gaussian is used instead: the configured prior
    until two samples exist, then the warm-up sample mean and deviation.
    """

    def __init__(self, window=500, min_obs=30, prior_mean=150.0, prior_std=150.0, mc_samples=2000):
        self.obs = deque(maxlen=window)
        self.min_obs = min_obs
        self.prior_mean = prior_mean
        self.prior_std = prior_std
        self.mc_samples = mc_samples

    @classmethod
    def from_values(cls, values, **kw):
        m = cls(window=max(len(values), 1), min_obs=min(len(values), kw.pop("min_obs", 1)), **kw)
        for v in values:
            m.observe(v)
        return m

    def observe(self, x: float):
        self.obs.append(float(x))

    def __len__(self):
        return len(self.obs)

    @property
    def empirical(self) -> bool:
        return len(self.obs) >= max(self.min_obs, 1)

    def gaussian(self):
        if len(self.obs) >= 2:
            a = np.asarray(self.obs)
            return float(a.mean()), float(a.std())
        return self.prior_mean, self.prior_std

    def shortfall(self, gap: float, rs) -> dict[int, float]:
        """``P[sum of r increments < gap]`` for each ``r`` in ``rs``."""
        rs = sorted(set(int(r) for r in rs))
        if gap <= 0:
            return {r: 0.0 for r in rs}
        if not self.empirical:
            mu, sd = self.gaussian()
            out = {}
            for r in rs:
                if sd <= 0:
                    out[r] = 1.0 if r * mu < gap else 0.0
                else:
                    out[r] = _normal_cdf((gap - r * mu) / (sd * math.sqrt(r)))
            return out

        values, counts = np.unique(np.asarray(self.obs), return_counts=True)
        if len(values) <= _EXACT_SUPPORT:
            return _exact_shortfall(values, counts / counts.sum(), gap, rs)
        # common random numbers across r keep the estimate monotone in r
        rng = np.random.default_rng(_RISK_SEED)
        draws = np.asarray(self.obs)[rng.integers(0, len(self.obs), (self.mc_samples, rs[-1]))]
        sums = np.cumsum(draws, axis=1)
        return {r: float(np.mean(sums[:, r - 1] < gap)) for r in rs}


def _exact_shortfall(values, probs, gap, rs):
    dist = {0.0: 1.0}
    out = {}
    for k in range(1, max(rs) + 1):
        nxt = {}
        for s, p in dist.items():
            for v, q in zip(values, probs):
                key = s + float(v)
                nxt[key] = nxt.get(key, 0.0) + p * float(q)
        dist = nxt
        if k in rs:
            out[k] = min(1.0, sum(p for s, p in dist.items() if s < gap))
    return out


@dataclass(frozen=True)
class DecisionContext:
    """What the scheduler knows when a cluster NACK arrives."""

    queue_state: QueueState
    cluster_index: int
    rtx_so_far: int
    accumulated_sinr_linear: float
    sinr_target_db: float
    slot: int
    tb_packets: int = 1
    tb_size_bytes: int = 1

    @property
    def gap_linear(self) -> float:
        return 10.0 ** (self.sinr_target_db / 10.0) - self.accumulated_sinr_linear


@dataclass(frozen=True)
class ControllerParams:
    v: float
    zeta_o: float
    r_min: int
    r_max_cluster: int
    r_max_total: int
    c_max: int
    queue_unit: str = "packet"

    @classmethod
    def from_scenario(cls, sc):
        return cls(sc.v_param, sc.zeta_o, sc.r_min, sc.r_max_cluster, sc.r_max_total, sc.c_max,
                   sc.queue_unit)


@dataclass(frozen=True)
class ControllerState:
    z: float = 0.0
    zeta_bar: float = 0.0
    f_obj_running: float = 0.0
    tb_count: int = 0
    zeta_count: int = 0


@dataclass(frozen=True)
class ActionScore:
    r: int
    gamma: float
    risk_estimate: float
    expected_service: tuple[float, float]


def queue_terms(ctx: DecisionContext, unit: str):
    """Return ``(Q1, Q2, service)`` in the controller's queue unit.

    ``service`` is what leaves Q2 if the current HARQ process decodes.
    """
    q = ctx.queue_state
    if unit == "tb":
        return q.q1_bytes / ctx.tb_size_bytes, float(q.q2_tbs), 1.0
    return float(q.q1_packets), float(q.q2_packets), float(ctx.tb_packets)


def feasible_actions(ctx: DecisionContext, params: ControllerParams) -> list[int]:
    """Cluster sizes allowed by the per-cluster bounds and the RTX budget.

    When the remaining budget is below ``r_min`` the last cluster is shortened
    to exactly exhaust it.
    """
    budget = params.r_max_total - ctx.rtx_so_far
    if budget <= 0:
        return []
    hi = min(params.r_max_cluster, budget)
    if hi < params.r_min:
        return [budget]
    return list(range(params.r_min, hi + 1))


def gamma_score(ctx: DecisionContext, state: ControllerState, r: int, params: ControllerParams,
                risk: float, arrivals=(0.0, 0.0)) -> ActionScore:
    """Drift-plus-penalty bound for cluster size ``r`` (constant term omitted).

    ``risk`` is the shortfall probability after ``r`` more transmissions and
    ``arrivals`` the expected per-slot arrivals ``(A1, A2)`` in queue units.
    """
    if r not in feasible_actions(ctx, params):
        raise ValueError(f"cluster size {r} infeasible for this context")
    q1, q2, service = queue_terms(ctx, params.queue_unit)
    b1 = 0.0  # Q1 is not served while a HARQ process is pending
    b2 = (1.0 - risk) * service
    g = (params.v * r + state.z * (risk - params.zeta_o)
         + q1 * (arrivals[0] - b1) + q2 * (arrivals[1] - b2))
    return ActionScore(r, g, risk, (b1, b2))


def choose_action(ctx: DecisionContext, state: ControllerState, params: ControllerParams,
                  risks: dict[int, float], arrivals=(0.0, 0.0)):
    """Exhaustive argmin of :func:`gamma_score`; ties go to the smallest ``r``.

    Returns ``(decision, scores)``; ``decision`` is ``None`` when no cluster is
    feasible (the TB must be dropped).
    """
    scores = [gamma_score(ctx, state, r, params, risks[r], arrivals)
              for r in feasible_actions(ctx, params)]
    if not scores:
        return None, []
    best = min(scores, key=lambda s: (s.gamma, s.r))
    return ClusterDecision(ctx.cluster_index, best.r, ctx.slot), scores


def update_virtual_queue(state: ControllerState, zeta_realized: float, zeta_o: float) -> ControllerState:
    """Fold one completed TB's risk into the running mean, then update Z."""
    if not 0.0 <= zeta_realized <= 1.0:
        raise ValueError("zeta_realized must lie in [0,1]")
    n = state.zeta_count + 1
    zeta_bar = state.zeta_bar + (zeta_realized - state.zeta_bar) / n
    z = max(state.z + zeta_bar - zeta_o, 0.0)
    return replace(state, z=z, zeta_bar=zeta_bar, zeta_count=n)


def record_allocation(state: ControllerState, total_rtx: int) -> ControllerState:
    """Running mean of transmissions per TB."""
    n = state.tb_count + 1
    return replace(state, tb_count=n, f_obj_running=state.f_obj_running + (total_rtx - state.f_obj_running) / n)


class LyapunovController:
    """Stateful wrapper used by the adaptive strategy during a run."""

    def __init__(self, scenario):
        sc = scenario
        self.params = ControllerParams.from_scenario(sc)
        self.state = ControllerState()
        self.model = IncrementModel(sc.risk_window, sc.risk_min_obs, sc.prior_increment_mean,
                                    sc.prior_increment_std, sc.risk_mc_samples)
        self._a1 = deque(maxlen=sc.arrival_window_slots)
        self._a2 = deque(maxlen=sc.arrival_window_slots)
        self.trace = []

    # observations ------------------------------------------------------
    def observe_increment(self, x: float):
        self.model.observe(x)

    def observe_arrivals(self, a1: float, a2: float):
        self._a1.append(a1)
        self._a2.append(a2)

    @property
    def arrival_rates(self):
        if not self._a1:
            return 0.0, 0.0
        return float(np.mean(self._a1)), float(np.mean(self._a2))

    # decisions -----------------------------------------------------------
    def risks(self, ctx: DecisionContext) -> dict[int, float]:
        acts = feasible_actions(ctx, self.params)
        return self.model.shortfall(ctx.gap_linear, acts) if acts else {}

    def decide(self, ctx: DecisionContext):
        ctx = replace(ctx, queue_state=replace(ctx.queue_state, z=self.state.z))
        decision, scores = choose_action(ctx, self.state, self.params, self.risks(ctx),
                                         self.arrival_rates)
        if decision is not None:
            self.trace.append((ctx.slot, self.state.z, self.state.zeta_bar, decision.r,
                               {s.r: s.gamma for s in scores}))
        return decision, scores

    def complete(self, total_rtx: int, zeta: float):
        self.state = record_allocation(self.state, total_rtx)
        self.state = update_virtual_queue(self.state, zeta, self.params.zeta_o)


def check_slater_bound(queue_series, v, delta_f, c=1.0, epsilon=1.0, arrivals=None, service=None,
                       zeta_excess=None):
    """Empirical check of the O(1/epsilon) time-average backlog bound.

    ``queue_series`` holds Q1+Q2 per slot.  ``arrivals``/``service`` are
    optional ``(n_slots, 2)`` arrays of per-queue arrivals and services (same
    unit as the queues) used to estimate the drift constant; ``zeta_excess``
    the per-slot ``zeta_bar - zeta_o``.  Diagnostic only.
    """
    q = np.asarray(queue_series, dtype=float)
    time_avg = float(q.mean()) if q.size else 0.0
    b_hat = 0.0
    if arrivals is not None and service is not None and len(arrivals):
        a = np.asarray(arrivals, dtype=float).reshape(-1, 2)
        b = np.asarray(service, dtype=float).reshape(-1, 2)
        # per-queue backlog is not separated in queue_series; use the total as an upper bound
        qq = np.repeat(q[: len(a), None], 2, axis=1)
        b_hat = 0.5 * float(np.sum(np.mean(a * a - b * b, axis=0)))
        b_hat -= float(np.sum(np.mean(a * np.minimum(qq, b), axis=0)))
        if zeta_excess is not None and len(zeta_excess):
            b_hat += 0.5 * float(np.mean(zeta_excess))
    bound = (max(b_hat, 0.0) + c + v * delta_f) / epsilon
    return {
        "time_avg_queue": time_avg,
        "b_hat": b_hat,
        "c": float(c),
        "epsilon": float(epsilon),
        "v": float(v),
        "delta_f": float(delta_f),
        "bound": float(bound),
        "satisfied": bool(time_avg <= bound),
    }
