"""
Command-line entry point.

Three verbs: ``run`` (one scenario, several seeds), ``sweep-v`` (adaptive
strategy over a grid of V values) and ``compare`` (several strategies on
paired seeds).  Every invocation writes into its own timestamped directory
under the output root together with the resolved configuration.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import shutil
import sys

import numpy as np

from . import metrics
from .engine import RunFailure, run_many
from .scenario import (ScenarioError, dump_scenario, load_scenario, load_scenario_file, overrides_to_dict,
                       parse_strategy)

ENV_OUT = "PROHARQ_OUT"
DEFAULT_OUT = "runs"
DEFAULT_V_GRID = "0,10,20,30,40,50,60,70,80,90,100,110,120"
DEFAULT_STRATEGIES = "reactive;fixed(2,2,2,2,2);fixed(3,3,3,1);adaptive"


class UsageError(Exception):
    pass


def _parser():
    p = argparse.ArgumentParser(
        prog="proharq",
        description="Simulate downlink HARQ with reactive, fixed-proactive and adaptive retransmission.")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("--config", help="scenario file (INI, optional [scenario] header)")
        sp.add_argument("--out", help=f"output root (default ${ENV_OUT} or ./{DEFAULT_OUT})")
        sp.add_argument("--seed", type=int, action="append", dest="seeds",
                        help="seed to run; repeat for several (default 0)")
        sp.add_argument("--set", action="append", default=[], dest="overrides", metavar="KEY=VALUE",
                        help="override one scenario field; repeatable, wins over --config")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")

    sp = sub.add_parser("run", help="run one scenario for each seed")
    common(sp)
    sp.add_argument("--traces", action="store_true",
                    help="also write latency CDF, MAC delay, TB and controller traces per seed")

    sp = sub.add_parser("sweep-v", help="adaptive strategy over a grid of V values")
    common(sp)
    sp.add_argument("--v-grid", default=DEFAULT_V_GRID, help=f"comma-separated V values (default {DEFAULT_V_GRID})")

    sp = sub.add_parser("compare", help="several strategies on the same seeds")
    common(sp)
    sp.add_argument("--strategies", default=DEFAULT_STRATEGIES,
                    help=f"semicolon-separated strategy list (default {DEFAULT_STRATEGIES!r})")
    return p


def _out_dir(args, verb):
    root = args.out or os.environ.get(ENV_OUT) or DEFAULT_OUT
    stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    path = os.path.join(root, f"{verb}-{stamp}")
    os.makedirs(path)
    return path


def _base(args):
    overrides = overrides_to_dict(args.overrides)
    if args.config:
        sc = load_scenario_file(args.config, overrides)
    else:
        sc = load_scenario("", overrides)
    seeds = args.seeds or [0]
    return sc, overrides, seeds


def _run_all(scenarios, jobs):
    logs = run_many(scenarios, jobs)
    bad = [r for r in logs if isinstance(r, RunFailure)]
    if bad:
        msgs = "; ".join(f"seed {f.scenario.seed} {f.scenario.strategy}: {f.error}" for f in bad)
        raise RuntimeError(f"{len(bad)} run(s) failed: {msgs}")
    return logs


def _aggregate_row(reports):
    row = []
    for c in metrics.SUMMARY_COLUMNS:
        vals = [getattr(r, c) for r in reports]
        if c == "strategy":
            row.append(vals[0] if len(set(vals)) == 1 else "mixed")
        elif c == "seed":
            row.append("aggregate")
        else:
            a = np.array(vals, dtype=float)
            a = a[~np.isnan(a)]
            row.append(f"{float(a.mean())!r}±{float(a.std())!r}" if a.size else "")
    return row


def _write_meta(out, args, sc, overrides, logs):
    with open(os.path.join(out, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(dump_scenario(sc))
    meta = {"verb": args.verb, "overrides": overrides, "seeds": args.seeds or [0],
            "runs": [lg.meta for lg in logs]}
    with open(os.path.join(out, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True, default=str)


def cmd_run(args):
    sc, overrides, seeds = _base(args)
    out = _out_dir(args, "run")
    try:
        logs = _run_all([sc.replace(seed=s) for s in seeds], args.jobs)
        reports = [metrics.summarize(lg) for lg in logs]
        extra = [_aggregate_row(reports)] if len(reports) > 1 else []
        metrics.export_summary_csv(reports, os.path.join(out, "summary.csv"), extra)
        if args.traces:
            for lg in logs:
                tag = f"seed{lg.meta['seed']}"
                metrics.export_latency_cdf_csv(metrics.ran_latency_series(lg),
                                               os.path.join(out, f"latency_cdf_{tag}.csv"))
                metrics.export_mac_delay_csv(lg, os.path.join(out, f"mac_delay_trace_{tag}.csv"))
                metrics.export_tb_csv(lg, os.path.join(out, f"tb_log_{tag}.csv"))
                if lg.controller:
                    metrics.export_controller_csv(lg, os.path.join(out, f"controller_trace_{tag}.csv"))
        _write_meta(out, args, sc, overrides, logs)
    except BaseException:
        shutil.rmtree(out, ignore_errors=True)
        raise
    return out


def _parse_grid(text):
    try:
        grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --v-grid {text!r}: {exc}") from None
    if not grid or any(v < 0 for v in grid):
        raise UsageError("--v-grid needs at least one value, all >= 0")
    return grid


def cmd_sweep_v(args):
    grid = _parse_grid(args.v_grid)
    sc, overrides, seeds = _base(args)
    if sc.strategy_name != "adaptive":
        raise UsageError(f"sweep-v needs the adaptive strategy, config has {sc.strategy!r}")
    out = _out_dir(args, "sweep-v")
    try:
        scenarios = [sc.replace(v_param=v, seed=s) for v in grid for s in seeds]
        logs = _run_all(scenarios, args.jobs)
        reports = [metrics.summarize(lg) for lg in logs]
        metrics.export_vsweep_csv(reports, os.path.join(out, "vsweep.csv"))
        _write_meta(out, args, sc, overrides, logs)
    except BaseException:
        shutil.rmtree(out, ignore_errors=True)
        raise
    return out


def _safe_name(strategy):
    return strategy.replace("(", "_").replace(")", "").replace(",", "-")


def cmd_compare(args):
    strategies = [s.strip() for s in args.strategies.split(";") if s.strip()]
    if len(strategies) < 2:
        raise UsageError("compare needs at least two strategies")
    for s in strategies:
        try:
            parse_strategy(s)
        except ScenarioError as exc:
            raise UsageError(str(exc)) from None
    sc, overrides, seeds = _base(args)
    out = _out_dir(args, "compare")
    try:
        scenarios = [sc.replace(strategy=st, seed=s) for st in strategies for s in seeds]
        logs = _run_all(scenarios, args.jobs)
        reports = [metrics.summarize(lg) for lg in logs]
        metrics.export_summary_csv(reports, os.path.join(out, "summary.csv"))
        k = len(seeds)
        for i, st in enumerate(strategies):
            group = logs[i * k:(i + 1) * k]
            name = _safe_name(group[0].meta["strategy"])
            lat = np.concatenate([metrics.ran_latency_series(lg) for lg in group])
            metrics.export_latency_cdf_csv(lat, os.path.join(out, f"latency_cdf_{name}.csv"))
            # MAC delay trace of the first seed only; it is a time series
            metrics.export_mac_delay_csv(group[0], os.path.join(out, f"mac_delay_trace_{name}.csv"))
            if group[0].controller:
                metrics.export_controller_csv(group[0], os.path.join(out, f"controller_trace_{name}.csv"))
        _write_meta(out, args, sc, overrides, logs)
    except BaseException:
        shutil.rmtree(out, ignore_errors=True)
        raise
    return out


COMMANDS = {"run": cmd_run, "sweep-v": cmd_sweep_v, "compare": cmd_compare}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        out = COMMANDS[args.verb](args)
    except (ScenarioError, UsageError) as exc:
        print(f"proharq: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as exc:
        print(f"proharq: failed: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0
