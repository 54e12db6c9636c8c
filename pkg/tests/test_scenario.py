import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ubopt.scenario import (EhModel, Scenario, ScenarioError, default_scenario,
                            load_scenario, save_scenario)


def test_default_values_match_baseline():
    sc = default_scenario()
    assert sc.w_s == (5.0, 0.0) and sc.w_d == (15.0, 0.0)
    assert sc.q_I == (0.0, 10.0) and sc.q_F == (20.0, 10.0)
    assert sc.H == 10.0 and sc.V_max == 20.0
    assert sc.P_c == 1e-6 and sc.eta_max == 0.5
    assert sc.delta_t == 0.5 and sc.B == 1e6
    assert sc.Xi == 2.8e-3 and sc.beta == 1500.0 and sc.nu == 0.0022
    assert sc.epsilon == 1e-4
    # -30 dB reference gain and 0.9 harvest efficiency, linear scale
    assert sc.omega0 == pytest.approx(10 ** (-30 / 10))
    assert sc.mu == 0.9
    assert sc.alpha == 2.0
    # -90 dBm destination noise floor in watts
    assert sc.sigma_d2 == pytest.approx(1e-12)


def test_slot_grid_is_exact():
    sc = default_scenario()
    assert sc.delta_t * sc.N == pytest.approx(sc.T, abs=0.0, rel=np.finfo(float).eps)


def test_sigma_out_of_range_names_field(tmp_path):
    path = tmp_path / "bad.cfg"
    save_scenario(default_scenario(), path)
    text = path.read_text().replace("sigma = 0.5", "sigma = 1.5")
    path.write_text(text)
    with pytest.raises(ScenarioError, match="sigma"):
        load_scenario(path)


def test_hover_mission_is_valid():
    sc = Scenario(q_I=(3.0, 3.0), q_F=(3.0, 3.0), V_max=0.0)
    assert sc.V_max == 0.0
    assert math.dist(sc.q_I, sc.q_F) == 0.0


def test_unreachable_endpoints_rejected():
    with pytest.raises(ScenarioError, match="unreachable"):
        Scenario(T=1.0, N=2, V_max=1.0)  # 20 m apart, 1 m reachable


def test_roundtrip_is_field_exact(tmp_path, rng):
    sc = Scenario(P_s=math.pi, S=1234567.891, sigma=0.123456789012345,
                  T=97.3, N=131, eh_model=EhModel.NONLINEAR,
                  w_s=(5.000000001, -0.25))
    path = tmp_path / "sc.cfg"
    save_scenario(sc, path)
    assert load_scenario(path) == sc


@settings(max_examples=40, deadline=None)
@given(p_s=st.floats(0.1, 100.0), sigma=st.floats(0.0, 1.0),
       t=st.floats(10.0, 500.0), n=st.integers(5, 400))
def test_roundtrip_property(tmp_path_factory, p_s, sigma, t, n):
    sc = Scenario(P_s=p_s, sigma=sigma, T=t, N=n)
    path = tmp_path_factory.mktemp("rt") / "sc.cfg"
    save_scenario(sc, path)
    assert load_scenario(path) == sc


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "sc.cfg"
    path.write_text("P_s = 5\nbogus_key = 1\n")
    with pytest.raises(ScenarioError, match="bogus_key"):
        load_scenario(path)


def test_parse_error_reports_line(tmp_path):
    path = tmp_path / "sc.cfg"
    path.write_text("P_s 5\n")
    with pytest.raises(ScenarioError, match="line 1"):
        load_scenario(path)


def test_eh_model_parse(tmp_path):
    path = tmp_path / "sc.cfg"
    path.write_text("eh_model = NonLinear\n")
    assert load_scenario(path).eh_model is EhModel.NONLINEAR


def test_overrides_revalidate():
    sc = default_scenario()
    with pytest.raises(ScenarioError):
        sc.with_overrides(eta_max=1.0)
