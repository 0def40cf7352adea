import csv
import json
import os

import pytest

from proharq.cli import main

FAST = ["--set", "sim_slots=400"]


def _only_dir(root):
    (d,) = os.listdir(root)
    return os.path.join(root, d)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_one_seed(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path)] + FAST) == 0
    out = _only_dir(tmp_path)
    assert capsys.readouterr().out.strip() == out
    assert len(_rows(os.path.join(out, "summary.csv"))) == 1
    assert os.path.exists(os.path.join(out, "config.ini"))


def test_run_five_seeds_adds_aggregate(tmp_path):
    seeds = [a for s in range(5) for a in ("--seed", str(s))]
    assert main(["run", "--out", str(tmp_path), "--jobs", "2"] + seeds + FAST) == 0
    rows = _rows(os.path.join(_only_dir(tmp_path), "summary.csv"))
    assert len(rows) == 6
    assert [r["seed"] for r in rows] == ["0", "1", "2", "3", "4", "aggregate"]
    assert "±" in rows[-1]["f_obj"]


def test_run_traces(tmp_path):
    assert main(["run", "--out", str(tmp_path), "--traces", "--seed", "3"] + FAST) == 0
    names = set(os.listdir(_only_dir(tmp_path)))
    assert {"latency_cdf_seed3.csv", "mac_delay_trace_seed3.csv", "tb_log_seed3.csv",
            "controller_trace_seed3.csv"} <= names


def test_bad_key_exits_nonzero_and_cleans_up(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path), "--set", "bogus_key=1"]) == 2
    assert "bogus_key" in capsys.readouterr().err
    assert os.listdir(tmp_path) == []


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[scenario]\nn_ofdm = 20\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "n_ofdm" in capsys.readouterr().err


def test_config_file_and_override_precedence(tmp_path):
    cfg = tmp_path / "s.ini"
    cfg.write_text("[scenario]\nsim_slots = 300\nv_param = 5\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--set", "v_param=7"]) == 0
    out = _only_dir(tmp_path / "o")
    meta = json.load(open(os.path.join(out, "meta.json")))
    assert meta["overrides"] == {"v_param": 7.0}
    assert meta["runs"][0]["v"] == 7.0
    assert "v_param = 7" in open(os.path.join(out, "config.ini")).read()


def test_sweep_grid_cardinality_and_order(tmp_path):
    seeds = [a for s in range(5) for a in ("--seed", str(s))]
    assert main(["sweep-v", "--out", str(tmp_path), "--v-grid", "0,20,40,60,80,100,120"] + seeds
                + ["--set", "sim_slots=200"]) == 0
    rows = _rows(os.path.join(_only_dir(tmp_path), "vsweep.csv"))
    assert len(rows) == 35
    vs = [float(r["v"]) for r in rows]
    assert vs == sorted(vs)


@pytest.mark.parametrize("grid", ["", "1,-2", "a,b"])
def test_sweep_bad_grid(tmp_path, grid):
    assert main(["sweep-v", "--out", str(tmp_path), "--v-grid", grid] + FAST) == 2


def test_sweep_needs_adaptive(tmp_path, capsys):
    assert main(["sweep-v", "--out", str(tmp_path), "--set", "strategy=reactive"] + FAST) == 2
    assert "adaptive" in capsys.readouterr().err


def test_compare_four_strategies(tmp_path):
    assert main(["compare", "--out", str(tmp_path), "--seed", "0", "--seed", "1"] + FAST) == 0
    out = _only_dir(tmp_path)
    cdfs = [f for f in os.listdir(out) if f.startswith("latency_cdf_")]
    assert len(cdfs) == 4
    assert len([f for f in os.listdir(out) if f.startswith("mac_delay_trace_")]) == 4
    rows = _rows(os.path.join(out, "summary.csv"))
    assert len(rows) == 8
    # paired seeds: the traffic is identical whatever the strategy
    for seed in ("0", "1"):
        assert len({r["n_packets"] for r in rows if r["seed"] == seed}) == 1


def test_compare_single_strategy_is_usage_error(tmp_path, capsys):
    assert main(["compare", "--out", str(tmp_path), "--strategies", "reactive"] + FAST) == 2
    assert "two strategies" in capsys.readouterr().err


def test_compare_bad_strategy(tmp_path):
    assert main(["compare", "--out", str(tmp_path), "--strategies", "reactive;fixed()"] + FAST) == 2


def test_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("PROHARQ_OUT", str(tmp_path / "env"))
    assert main(["run"] + FAST) == 0
    assert len(os.listdir(tmp_path / "env")) == 1


def test_help_mentions_verbs(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    assert all(v in text for v in ("run", "sweep-v", "compare"))
