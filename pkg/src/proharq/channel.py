"""
Indoor-factory (sparse clutter, low BS) link model and IR-HARQ SINR combining.

All SINR values passed between functions are linear; dB appears only in the
link budget and in the decode threshold.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np


def _check_positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise ValueError(f"{name} must be > 0, got {v!r}")


def path_loss_los(d: float, fc: float) -> float:
    """LOS path loss in dB for 3D distance ``d`` (m) and carrier ``fc`` (GHz)."""
    _check_positive(d=d, fc=fc)
    return 31.84 + 21.50 * math.log10(d) + 19.00 * math.log10(fc)


def path_loss_nlos(d: float, fc: float) -> float:
    """NLOS path loss in dB for 3D distance ``d`` (m) and carrier ``fc`` (GHz)."""
    _check_positive(d=d, fc=fc)
    return 33.0 + 25.50 * math.log10(d) + 20.00 * math.log10(fc)


def los_probability(d: float, d_clutter: float = 10.0, clutter_density: float = 0.3) -> float:
    """Probability of line of sight at distance ``d``: ``exp(-d / k)``.

    ``k = -d_clutter / ln(1 - clutter_density)`` is the mean clutter-free run.
    """
    if not 0 < clutter_density < 1:
        raise ValueError(f"clutter_density must lie in (0,1), got {clutter_density!r}")
    if d < 0:
        raise ValueError(f"distance must be >= 0, got {d!r}")
    k = -d_clutter / math.log(1.0 - clutter_density)
    return math.exp(-d / k)


def db_to_lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin_to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


@dataclass(frozen=True)
class LinkState:
    distance_m: float
    is_los: bool
    shadowing_db: float
    position_m: tuple[float, float]
    # position of the last LOS draw, for distance-gated redraws
    los_anchor_m: tuple[float, float] = (math.nan, math.nan)

    def __post_init__(self):
        if not self.distance_m > 0:
            raise ValueError("distance_m must be > 0")
        if not math.isfinite(self.shadowing_db):
            raise ValueError("shadowing_db must be finite")


@dataclass(frozen=True)
class TbSinrState:
    """Effective SINR accumulated over the transmissions of one TB so far."""

    accumulated_sinr_linear: float = 0.0
    rtx_count: int = 0


def shadowing_correlation(delta_d: float, decorrelation_dist: float) -> float:
    """Gudmundson correlation between shadowing samples ``delta_d`` metres apart."""
    if math.isinf(delta_d):
        return 0.0
    return math.exp(-abs(delta_d) / decorrelation_dist)


class ChannelModel:
    """Link budget, LOS/shadowing evolution and per-RB fading for one scenario."""

    def __init__(self, scenario):
        sc = scenario
        self.sc = sc
        self.fc = sc.fc_ghz
        self.n_rb = sc.n_rb
        self.bw_per_rb_hz = 12 * sc.scs_hz
        self.antenna_gain_db = 10.0 * math.log10(sc.utx * sc.srx)
        self.noise_dbm = -174.0 + 10.0 * math.log10(self.bw_per_rb_hz) + sc.noise_figure_db
        self.sigma = {True: sc.shadowing_sigma_los_db, False: sc.shadowing_sigma_nlos_db}
        if not sc.shadowing_enabled:
            self.sigma = {True: 0.0, False: 0.0}

    # ------------------------------------------------------------------
    def initial_state(self, position, rng) -> LinkState:
        pos = (float(position[0]), float(position[1]))
        d = math.hypot(*pos)
        is_los = bool(rng.random() < los_probability(d, self.sc.d_clutter_m, self.sc.clutter_density))
        shadow = self.sigma[is_los] * float(rng.standard_normal())
        return LinkState(d, is_los, shadow, pos, pos)

    def sample_link_state(self, prev: LinkState, new_position, rng) -> LinkState:
        """Advance the link to ``new_position``.

        LOS is redrawn from :func:`los_probability` (every call when
        ``los_redraw == 'slot'``, otherwise once the UE has moved a
        decorrelation distance since the last draw).  Shadowing follows a
        first-order autoregression in travelled distance, so its marginal
        variance stays at sigma**2.
        """
        pos = (float(new_position[0]), float(new_position[1]))
        d = math.hypot(*pos)
        step = math.hypot(pos[0] - prev.position_m[0], pos[1] - prev.position_m[1])

        is_los, anchor = prev.is_los, prev.los_anchor_m
        moved = math.hypot(pos[0] - anchor[0], pos[1] - anchor[1])
        if self.sc.los_redraw == "slot" or not moved < self.sc.decorrelation_dist_m:
            is_los = bool(rng.random() < los_probability(d, self.sc.d_clutter_m, self.sc.clutter_density))
            anchor = pos

        # a LOS flip keeps the normalised shadowing level, rescaled to the new sigma
        s = prev.shadowing_db
        old_sigma, new_sigma = self.sigma[prev.is_los], self.sigma[is_los]
        if is_los != prev.is_los and old_sigma > 0:
            s *= new_sigma / old_sigma
        rho = shadowing_correlation(step, self.sc.decorrelation_dist_m)
        if rho < 1.0:
            s = rho * s + math.sqrt(1.0 - rho * rho) * new_sigma * float(rng.standard_normal())
        return LinkState(d, is_los, s, pos, anchor)

    # ------------------------------------------------------------------
    def path_loss(self, link: LinkState) -> float:
        f = path_loss_los if link.is_los else path_loss_nlos
        return f(link.distance_m, self.fc)

    def mean_sinr_db(self, link: LinkState) -> float:
        """Average per-RB SINR (dB) before fast fading; noise limited, single cell."""
        return (self.sc.ptx_dbm - self.path_loss(link) - link.shadowing_db
                + self.antenna_gain_db - self.noise_dbm)

    def per_rb_sinr(self, link: LinkState, n_rb: int | None = None, rng=None) -> np.ndarray:
        """Linear SINR of each RB for one slot (unit-mean Rayleigh power fading)."""
        n = self.n_rb if n_rb is None else n_rb
        if n < 1:
            raise ValueError("n_rb must be >= 1")
        mean = 10.0 ** (self.mean_sinr_db(link) / 10.0)
        if not self.sc.fading_enabled:
            return np.full(n, mean)
        return mean * rng.standard_exponential(n)


def eesm_combine(rb_sinrs, prior: TbSinrState | float = 0.0, beta: float = 1.0) -> float:
    """Incremental-redundancy EESM update of a TB's effective SINR.

    Returns ``-beta * ln(mean_x exp(-(s_x + s_prev) / beta))`` evaluated as a
    log-sum-exp, which equals ``s_prev + EESM(rb_sinrs)``.
    """
    s = np.asarray(rb_sinrs, dtype=float)
    if s.size == 0:
        raise ValueError("rb_sinrs must not be empty")
    if not beta > 0:
        raise ValueError("beta must be > 0")
    prev = prior.accumulated_sinr_linear if isinstance(prior, TbSinrState) else float(prior)
    # shift by the smallest exponent so the largest term is exp(0)
    x = (s + prev) / beta
    lo = x.min()
    return float(beta * (lo - math.log(np.mean(np.exp(lo - x)))))


def accumulate(state: TbSinrState, rb_sinrs, beta: float) -> TbSinrState:
    """Fold one more transmission into ``state``."""
    return replace(state, accumulated_sinr_linear=eesm_combine(rb_sinrs, state, beta),
                   rtx_count=state.rtx_count + 1)


def decode(tb: TbSinrState | float, sinr_target_db: float) -> bool:
    """True once the effective SINR reaches the target (inclusive)."""
    s = tb.accumulated_sinr_linear if isinstance(tb, TbSinrState) else float(tb)
    # compare in linear scale so a value equal to 10**(target/10) decodes exactly
    return s > 0 and s >= 10.0 ** (sinr_target_db / 10.0)


TRACE_COLUMNS = ("slot", "distance_m", "is_los", "shadowing_db", "mean_sinr_db", "effective_sinr_db")


def export_channel_trace(rows, path):
    """Write per-slot channel rows (dicts keyed by ``TRACE_COLUMNS``) to CSV.

    ``effective_sinr_db`` is empty on slots without a transmission.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for r in rows:
            w.writerow([r.get(c, "") for c in TRACE_COLUMNS])
