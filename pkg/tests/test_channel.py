import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from proharq.channel import (ChannelModel, LinkState, TbSinrState, accumulate, decode, eesm_combine,
                             export_channel_trace, los_probability, path_loss_los, path_loss_nlos,
                             shadowing_correlation)
from proharq.engine import RngStreams, _LinkRng
from proharq.scenario import Scenario

REL = 1e-9


def test_path_loss_values(derived):
    for key, want in derived["path_loss_los"].items():
        d, fc = map(float, key.split(","))
        assert path_loss_los(d, fc) == pytest.approx(want, rel=REL)
    for key, want in derived["path_loss_nlos"].items():
        d, fc = map(float, key.split(","))
        assert path_loss_nlos(d, fc) == pytest.approx(want, rel=REL)


def test_path_loss_rounded_reference_values():
    assert round(path_loss_los(100, 3.5), 2) == 85.18
    assert round(path_loss_los(110, 3.5), 2) == 86.07
    assert round(path_loss_nlos(100, 3.5), 2) == 94.88


@pytest.mark.parametrize("f", [path_loss_los, path_loss_nlos])
def test_path_loss_rejects_nonpositive(f):
    with pytest.raises(ValueError):
        f(0.0, 3.5)
    with pytest.raises(ValueError):
        f(10.0, -1.0)


@given(d=st.floats(1, 1e4), fc=st.floats(1, 100))
def test_nlos_never_below_los(d, fc):
    assert path_loss_nlos(d, fc) >= path_loss_los(d, fc)


def test_los_probability(derived):
    assert los_probability(0.0) == 1.0
    k = derived["los_k"]
    assert los_probability(k) == pytest.approx(derived["los_prob_at_k"], rel=REL)
    assert los_probability(110.0) == pytest.approx(derived["los_prob_110"], rel=REL)
    assert round(k, 4) == 28.0367


@given(d1=st.floats(0, 1e3), d2=st.floats(0, 1e3))
def test_los_probability_monotone(d1, d2):
    lo, hi = sorted((d1, d2))
    assert 0 < los_probability(hi) <= los_probability(lo) <= 1


def test_los_fraction_monte_carlo(derived):
    rng = np.random.default_rng(11)
    n = 1_000_000
    p = los_probability(28.04)
    frac = np.mean(rng.random(n) < p)
    assert abs(frac - 0.368) <= 0.005


def test_shadowing_correlation_limits():
    assert shadowing_correlation(0.0, 10.0) == 1.0
    assert shadowing_correlation(math.inf, 10.0) == 0.0


def _model(**kw):
    return ChannelModel(Scenario(**kw))


def _rng(seed=0):
    s = RngStreams(seed)
    return s, _LinkRng(s.los, s.shadowing)


def test_zero_step_keeps_link():
    ch = _model()
    _, lr = _rng()
    link = ch.initial_state((110.0, 0.0), lr)
    nxt = ch.sample_link_state(link, link.position_m, lr)
    assert nxt.distance_m == link.distance_m
    assert nxt.shadowing_db == link.shadowing_db
    assert nxt.is_los == link.is_los


def test_far_step_gives_fresh_shadowing():
    ch = _model()
    s, lr = _rng(3)
    vals = []
    for _ in range(4000):
        link = LinkState(110.0, False, 30.0, (110.0, 0.0), (110.0, 0.0))
        # a 10 km jump makes rho ~ 0; LOS stays NLOS with overwhelming probability
        vals.append(ch.sample_link_state(link, (10110.0, 0.0), lr).shadowing_db)
    vals = np.array(vals)
    assert abs(vals.mean()) < 0.3
    assert vals.std() == pytest.approx(5.7, rel=0.05)


def test_shadowing_marginal_is_stationary():
    ch = _model()
    _, lr = _rng(5)
    link = LinkState(110.0, False, 0.0, (110.0, 0.0), (110.0, 0.0))
    seq = []
    x = 110.0
    for _ in range(20000):
        x += 2.0
        link = ch.sample_link_state(link, (x, 0.0), lr)
        if not link.is_los:
            seq.append(link.shadowing_db)
    assert np.std(seq) == pytest.approx(5.7, rel=0.1)


def test_deterministic_budget_when_random_parts_disabled(derived):
    sc = Scenario(fading_enabled=False, shadowing_enabled=False)
    ch = ChannelModel(sc)
    link = LinkState(1.0, True, 0.0, (1.0, 0.0))
    rb = ch.per_rb_sinr(link)
    assert rb.shape == (sc.n_rb,) and np.all(rb == rb[0])
    want_db = sc.ptx_dbm - path_loss_los(1.0, sc.fc_ghz) + derived["antenna_gain_db"] - derived["noise_per_rb_dbm"]
    assert 10 * math.log10(rb[0]) == pytest.approx(want_db, rel=REL)


def test_antenna_gain(derived):
    assert _model().antenna_gain_db == pytest.approx(derived["antenna_gain_db"], rel=REL)
    assert round(_model().antenna_gain_db, 2) == 18.06


def test_fading_is_unit_mean():
    ch = _model()
    link = LinkState(110.0, False, 0.0, (110.0, 0.0))
    rng = np.random.default_rng(9)
    draws = np.concatenate([ch.per_rb_sinr(link, rng=rng) for _ in range(800)])[:100_000]
    mean = 10 ** (ch.mean_sinr_db(link) / 10)
    assert draws.mean() == pytest.approx(mean, rel=0.01)


def test_eesm_reference_values(derived):
    assert eesm_combine([7.5]) == pytest.approx(7.5, rel=REL)
    assert eesm_combine([4.2] * 17) == pytest.approx(4.2, rel=REL)
    assert eesm_combine([1.0, 3.0]) == pytest.approx(derived["eesm_two_rb"], rel=REL)
    assert round(eesm_combine([1.0, 3.0]), 4) == 1.5662


def test_eesm_extreme_values_are_finite():
    assert math.isfinite(eesm_combine([1e5, 1e-5, 3e4]))
    assert eesm_combine([1e5, 1e5]) == pytest.approx(1e5, rel=REL)


@given(s=st.lists(st.floats(0, 1e4), min_size=1, max_size=40), prev=st.floats(0, 1e3),
       beta=st.floats(0.1, 10))
def test_eesm_properties(s, prev, beta):
    out = eesm_combine(s, prev, beta)
    # prior shifts the result additively, and the value lies within the per-RB range
    assert out == pytest.approx(prev + eesm_combine(s, 0.0, beta), rel=1e-9, abs=1e-9)
    assert min(s) + prev - 1e-9 <= out <= max(s) + prev + 1e-9


@given(s=st.lists(st.floats(0, 1e3), min_size=1, max_size=10))
def test_accumulate_is_nondecreasing(s):
    st0 = TbSinrState(12.0, 1)
    st1 = accumulate(st0, s, 1.0)
    assert st1.accumulated_sinr_linear >= st0.accumulated_sinr_linear
    assert st1.rtx_count == 2


def test_eesm_rejects_bad_input():
    with pytest.raises(ValueError):
        eesm_combine([])
    with pytest.raises(ValueError):
        eesm_combine([1.0], beta=0.0)


def test_decode_threshold(derived):
    assert decode(TbSinrState(10 ** 1.5), 15.0)
    assert not decode(TbSinrState(0.0), -30.0)
    assert derived["minus3db_linear"] > 0.5
    assert not decode(0.5, -3.0)
    assert decode(derived["minus3db_linear"], -3.0)


def test_channel_trace_export(tmp_path):
    path = tmp_path / "trace.csv"
    export_channel_trace([{"slot": 0, "distance_m": 110.0, "is_los": 0, "shadowing_db": 1.0,
                           "mean_sinr_db": 20.0, "effective_sinr_db": None}], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "slot,distance_m,is_los,shadowing_db,mean_sinr_db,effective_sinr_db"
    assert lines[1].endswith(",")
