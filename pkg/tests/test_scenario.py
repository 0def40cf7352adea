import pytest
from hypothesis import given, strategies as st

from proharq.scenario import (Scenario, ScenarioError, dump_scenario, load_scenario, load_scenario_file,
                              overrides_to_dict, parse_strategy, slot_duration_ms, subcarrier_spacing_hz)


def test_empty_config_gives_table_defaults():
    sc = load_scenario("")
    assert sc == Scenario()
    assert (sc.fc_ghz, sc.bw_hz, sc.ptx_dbm) == (3.5, 50e6, 8.0)
    assert (sc.k1_slots, sc.l12_slots, sc.r_max_total, sc.c_max) == (2, 2, 10, 5)
    assert (sc.r_min, sc.r_max_cluster, sc.zeta_o, sc.numerology) == (2, 5, 0.05, 1)
    assert (sc.d0_m, sc.mean_packet_bytes, sc.t_on_ms, sc.t_off_ms) == (110.0, 50.0, 2.5, 2.5)


def test_n_ofdm_out_of_range():
    with pytest.raises(ScenarioError) as exc:
        load_scenario("n_ofdm = 13")
    assert "n_ofdm out of range [1,12]" in exc.value.problems


def test_fixed_pattern_summing_to_budget_is_accepted():
    sc = load_scenario("strategy = fixed(2,2,2,2,2)")
    assert sc.pattern == (2, 2, 2, 2, 2) and sum(sc.pattern) == sc.r_max_total


def test_terminal_short_cluster_only_when_it_exhausts_budget():
    assert Scenario(strategy="fixed(3,3,3,1)").pattern == (3, 3, 3, 1)
    with pytest.raises(ScenarioError):
        Scenario(strategy="fixed(3,1)")          # 1 < r_min and budget not exhausted
    with pytest.raises(ScenarioError):
        Scenario(strategy="fixed(5,5,5)")        # over the RTX budget
    with pytest.raises(ScenarioError):
        Scenario(strategy="fixed(6)")            # above r_max_cluster


@pytest.mark.parametrize("mu", range(5))
def test_slot_duration(mu, derived):
    assert slot_duration_ms(mu) == pytest.approx(derived["slot_ms"][str(mu)], rel=1e-9)
    assert subcarrier_spacing_hz(mu) == 15e3 * 2**mu


def test_bad_numerology():
    with pytest.raises(ScenarioError):
        slot_duration_ms(7)
    with pytest.raises(ScenarioError):
        Scenario(numerology=5)


def test_unknown_key_is_named():
    with pytest.raises(ScenarioError, match="frobnicate"):
        load_scenario("frobnicate = 3")
    with pytest.raises(ScenarioError, match="frobnicate"):
        overrides_to_dict(["frobnicate=3"])


def test_all_problems_reported_at_once():
    with pytest.raises(ScenarioError) as exc:
        load_scenario("n_ofdm = 0\nzeta_o = 2\nv_param = -1")
    assert len(exc.value.problems) == 3


def test_overrides_win_over_file(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text("[scenario]\nv_param = 10  # inline comment\nseed = 3\n")
    sc = load_scenario_file(str(p), ["v_param=80"])
    assert sc.v_param == 80.0 and sc.seed == 3


def test_other_sections_rejected():
    with pytest.raises(ScenarioError):
        load_scenario("[scenario]\nseed=1\n[extra]\nx=1\n")


def test_strategy_parsing():
    assert parse_strategy("fixed( 3, 3,3 ,1)") == ("fixed", (3, 3, 3, 1))
    assert Scenario(strategy="fixed( 2,2 )").strategy == "fixed(2,2)"
    with pytest.raises(ScenarioError):
        parse_strategy("greedy")


@given(v=st.floats(0, 500), seed=st.integers(0, 2**31), zeta=st.floats(0.001, 0.999),
       vx=st.floats(-20, 20), strat=st.sampled_from(["reactive", "adaptive", "fixed(2,2,2,2,2)",
                                                      "fixed(3,3,3,1)", "fixed(5)"]),
       los=st.booleans())
def test_dump_load_roundtrip(v, seed, zeta, vx, strat, los):
    sc = Scenario(v_param=v, seed=seed, zeta_o=zeta, velocity_mps=(vx, 1.0), strategy=strat,
                  fading_enabled=los)
    assert load_scenario(dump_scenario(sc)) == sc
    assert load_scenario(dump_scenario(sc)).digest() == sc.digest()
