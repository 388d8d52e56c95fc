import configparser

import pytest

from pmsgsim.config import (ConfigError, ConfigParseError, config_from_text, dump_ini,
                            load_config, reference_config, replace, scenario_text)


def test_reference_loads():
    cfg = load_config()
    assert cfg.fault_spec.t_on == 0.5
    assert cfg.fault_spec.t_off == 1.2
    assert cfg.sim.turbine_connected


def test_fault_window_override():
    cfg = load_config(None, ["fault.t_on=0.5", "fault.t_off=1.2"])
    spec = cfg.fault_spec
    assert (spec.t_on, spec.t_off) == (0.5, 1.2)
    cfg = load_config(None, ["fault.t_on=0.6", "fault.t_off=0.9"])
    assert (cfg.fault_spec.t_on, cfg.fault_spec.t_off) == (0.6, 0.9)


def test_validation_error_names_key():
    with pytest.raises(ConfigError) as exc:
        load_config(None, ["pmsg.l_d=0"])
    assert exc.value.key == "pmsg.l_d"
    assert "pmsg.l_d" in str(exc.value)


@pytest.mark.parametrize("override, key", [
    ("grid.l_g=0", "grid.l_g"),
    ("converter.c_dc=-1", "converter.c_dc"),
    ("msc.speed_mode=fast", "msc.speed_mode"),
    ("pmsg.bogus=1", "pmsg.bogus"),
    ("nosuch.key=1", "nosuch.key"),
])
def test_bad_values_are_validation_errors(override, key):
    with pytest.raises(ConfigError) as exc:
        load_config(None, [override])
    assert exc.value.key == key


def test_scenario_level_validation():
    with pytest.raises(ConfigError):
        load_config(None, ["sim.dt_ctrl=3e-5"])
    with pytest.raises(ConfigError):
        load_config(None, ["sim.t_end=0.3"])


@pytest.mark.parametrize("override", ["fault.t_on", "pmsg", "=3", "sim.t_end=abc"])
def test_parse_errors(override):
    with pytest.raises((ConfigParseError, ConfigError)):
        load_config(None, [override])


def test_malformed_text_is_parse_error():
    with pytest.raises(ConfigParseError):
        config_from_text("this is not ini")
    with pytest.raises(ConfigParseError):
        load_config("/nonexistent/scenario.ini")


def test_dump_round_trip(tmp_path):
    cfg = reference_config()
    path = tmp_path / "cfg.ini"
    path.write_text(dump_ini(cfg))
    again = load_config(path)
    assert again == cfg
    assert again.digest() == cfg.digest()


def test_replace_and_digest_change():
    cfg = reference_config()
    other = replace(cfg, **{"fault.r_fault": 0.1})
    assert other.fault.r_fault == 0.1
    assert other.digest() != cfg.digest()


def test_wind_steps():
    cfg = load_config(None, ["wind.steps=1.0:12, 1.5:9"])
    assert cfg.wind.at(0.5) == cfg.wind.speed
    assert cfg.wind.at(1.0) == 12.0
    assert cfg.wind.at(2.0) == 9.0


def _values(name):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    parser.read_string(scenario_text(name))
    return {f"{s}.{k}": v for s in parser.sections() for k, v in parser[s].items()}


@pytest.mark.parametrize("name, changed", [
    ("reference_normal", {"sim.t_end", "fault.enabled"}),
    ("high_support", {"converter.c_dc", "gsc.v_dc_ref", "gsc.kp_v", "gsc.ki_v", "gsc.i_max",
                      "droop.k_q", "droop.q_max"}),
])
def test_shipped_variants_differ_only_where_intended(name, changed):
    ref, var = _values("reference"), _values(name)
    assert ref.keys() == var.keys()
    assert {k for k in ref if ref[k] != var[k]} == changed
