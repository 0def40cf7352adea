"""
Post-processing of a run: latency series, outage quantiles, resource
efficiency, loss and CSV export.

Conventions: standard deviations are population (``ddof=0``); quantiles use
the nearest-rank rule ``x[ceil(level * n) - 1]`` on the sorted series.
Packets still queued or in flight at the end of a run are *censored*: they
count neither as delivered nor as lost.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

PKT_CENSORED, PKT_DELIVERED, PKT_DROPPED = 0, 1, 2

TB_COLUMNS = ("tb_id", "built_slot", "first_tx_slot", "decode_slot", "done_slot", "status",
              "allocated", "needed", "n_clusters", "clusters", "payload_bytes", "n_packets", "zeta")


@dataclass
class MetricsLog:
    """Everything recorded during one run.

    ``packets`` maps column name to an array (one entry per generated packet);
    ``tbs`` is a list of row tuples in ``TB_COLUMNS`` order; ``slots`` maps
    column name to per-slot arrays; ``controller`` holds
    ``(slot, z, zeta_bar, r, {r: gamma})`` tuples for adaptive runs.
    """

    meta: dict
    packets: dict = field(default_factory=dict)
    tbs: list = field(default_factory=list)
    slots: dict = field(default_factory=dict)
    controller: list = field(default_factory=list)

    @property
    def slot_ms(self) -> float:
        return self.meta["slot_ms"]

    def tb_array(self, col):
        i = TB_COLUMNS.index(col)
        return np.array([row[i] for row in self.tbs])

    def digest(self) -> str:
        """SHA-256 over a canonical encoding of the whole log."""
        h = hashlib.sha256()
        h.update(json.dumps(self.meta, sort_keys=True, default=str).encode())
        for name in sorted(self.packets):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.packets[name]).tobytes())
        h.update(json.dumps(self.tbs, default=str).encode())
        for name in sorted(self.slots):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.slots[name]).tobytes())
        h.update(json.dumps([(s, z, zb, r, sorted(g.items())) for s, z, zb, r, g in self.controller]).encode())
        return h.hexdigest()


@dataclass
class SummaryReport:
    strategy: str
    seed: int
    v: float
    n_packets: int
    n_delivered: int
    n_dropped: int
    n_censored: int
    mean_latency_ms: float
    std_latency_ms: float
    p90_latency_ms: float
    p95_latency_ms: float
    resource_efficiency: float
    app_loss: float
    f_obj: float
    mean_queue: float
    mean_queue_tb: float
    n_tbs: int
    zeta_bar: float
    z_final: float

    def as_dict(self):
        return asdict(self)


def _completed(log):
    st = log.tb_array("status") if log.tbs else np.array([])
    return st != "in-flight" if st.size else st.astype(bool)


def resource_efficiency(log: MetricsLog):
    """Needed over allocated transmission slots, over completed TBs.

    A dropped TB counts all of its slots as needed.  ``None`` without TBs.
    """
    if not log.tbs:
        return None
    done = _completed(log)
    if not done.any():
        return None
    alloc = log.tb_array("allocated")[done].sum()
    needed = log.tb_array("needed")[done].sum()
    return float(needed / alloc)


def ran_latency_series(log: MetricsLog) -> np.ndarray:
    """Per-packet RLC-arrival to UE-delivery latency in ms, in arrival order."""
    p = log.packets
    if not p or len(p["arrival_slot"]) == 0:
        return np.zeros(0)
    ok = p["status"] == PKT_DELIVERED
    return (p["delivery_slot"][ok] - p["arrival_slot"][ok]) * log.slot_ms


def mac_delay_series(log: MetricsLog):
    """``(first_tx_slot, delay_ms)`` for each decoded TB: MAC departure to decode."""
    rows = [(r[2], (r[3] - r[2] + 1) * log.slot_ms) for r in log.tbs if r[5] == "decoded"]
    if not rows:
        return np.zeros(0, dtype=int), np.zeros(0)
    a = np.array(rows)
    return a[:, 0].astype(int), a[:, 1]


def outage_latency(series, level: float):
    """Nearest-rank ``level`` quantile of ``series``; ``None`` when empty."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0,1)")
    x = np.sort(np.asarray(series, dtype=float))
    if x.size == 0:
        return None
    return float(x[max(math.ceil(level * x.size), 1) - 1])


def f_obj(log: MetricsLog):
    """Mean number of transmissions per completed TB."""
    if not log.tbs:
        return None
    done = _completed(log)
    if not done.any():
        return None
    return float(log.tb_array("allocated")[done].mean())


def app_loss(log: MetricsLog):
    st = log.packets.get("status", np.zeros(0))
    exited = np.count_nonzero(st != PKT_CENSORED)
    return float(np.count_nonzero(st == PKT_DROPPED) / exited) if exited else 0.0


def summarize(log: MetricsLog) -> SummaryReport:
    lat = ran_latency_series(log)
    st = log.packets.get("status", np.zeros(0))
    nan = float("nan")
    eff = resource_efficiency(log)
    fo = f_obj(log)
    q = log.slots.get("q1_packets")
    mean_q = float(np.mean(q + log.slots["q2_packets"])) if q is not None and q.size else 0.0
    qt = log.slots.get("q1_bytes")
    if qt is not None and qt.size:
        mean_qt = float(np.mean(qt / log.meta["tb_size"] + log.slots["q2_tbs"]))
    else:
        mean_qt = 0.0
    return SummaryReport(
        strategy=log.meta["strategy"],
        seed=log.meta["seed"],
        v=log.meta["v"],
        n_packets=int(st.size),
        n_delivered=int(np.count_nonzero(st == PKT_DELIVERED)),
        n_dropped=int(np.count_nonzero(st == PKT_DROPPED)),
        n_censored=int(np.count_nonzero(st == PKT_CENSORED)),
        mean_latency_ms=float(lat.mean()) if lat.size else nan,
        std_latency_ms=float(lat.std()) if lat.size else nan,
        p90_latency_ms=outage_latency(lat, 0.9) if lat.size else nan,
        p95_latency_ms=outage_latency(lat, 0.95) if lat.size else nan,
        resource_efficiency=eff if eff is not None else nan,
        app_loss=app_loss(log),
        f_obj=fo if fo is not None else nan,
        mean_queue=mean_q,
        mean_queue_tb=mean_qt,
        n_tbs=len(log.tbs),
        zeta_bar=float(log.meta.get("zeta_bar", 0.0)),
        z_final=float(log.meta.get("z_final", 0.0)),
    )


def latency_cdf(series):
    """Empirical CDF points ``(latency_ms, cumulative_fraction)``."""
    x = np.sort(np.asarray(series, dtype=float))
    if x.size == 0:
        return []
    vals, counts = np.unique(x, return_counts=True)
    cum = np.cumsum(counts) / x.size
    cum[-1] = 1.0
    return list(zip(vals.tolist(), cum.tolist()))


# CSV export -------------------------------------------------------------

SUMMARY_COLUMNS = tuple(SummaryReport.__dataclass_fields__)


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def _write(path, header, rows):
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def export_summary_csv(reports, path, extra_rows=()):
    """One row per :class:`SummaryReport` (plus any preformatted ``extra_rows``)."""
    rows = [[getattr(r, c) for c in SUMMARY_COLUMNS] for r in reports]
    return _write(path, SUMMARY_COLUMNS, rows + list(extra_rows))


def export_latency_cdf_csv(series, path):
    return _write(path, ("latency_ms", "cumulative_fraction"), latency_cdf(series))


def export_mac_delay_csv(log, path):
    slots, delay = mac_delay_series(log)
    return _write(path, ("tx_slot", "time_ms", "mac_delay_ms"),
                  [(int(s), float(s) * log.slot_ms, float(d)) for s, d in zip(slots, delay)])


def export_controller_csv(log, path, r_values=None):
    """Columns: slot, z, zeta_bar, chosen_r, then ``gamma_r<k>`` per candidate."""
    if r_values is None:
        r_values = sorted({r for *_, g in log.controller for r in g})
    header = ("slot", "z", "zeta_bar", "chosen_r") + tuple(f"gamma_r{r}" for r in r_values)
    rows = [(s, z, zb, r) + tuple(g.get(k, float("nan")) for k in r_values)
            for s, z, zb, r, g in log.controller]
    return _write(path, header, rows)


def export_tb_csv(log, path):
    return _write(path, TB_COLUMNS, log.tbs)


VSWEEP_COLUMNS = ("v", "seed", "f_obj", "resource_efficiency", "mean_queue", "mean_queue_tb",
                  "p90_latency_ms", "p95_latency_ms", "mean_latency_ms", "app_loss", "zeta_bar", "z_final")


def export_vsweep_csv(reports, path):
    return _write(path, VSWEEP_COLUMNS, [[getattr(r, c) for c in VSWEEP_COLUMNS] for r in reports])
