import math
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sstikit import engine as en
from sstikit import plant as pl
from sstikit import scenario_io as sio
from sstikit.errors import ScenarioError


def test_bundled_case_loads(study, aramon):
    assert aramon.name == "aramon"
    assert aramon.n_masses() == 6
    assert aramon.grid.ssc_mva == 1550.0
    assert aramon.grid.events == ((2.0, -200.0),)
    assert aramon.hvdc.p_ref == -0.9
    assert aramon.ssdc is None and aramon.filter is None
    assert study.tuning.centering == "geometric"
    assert study.protection.channel == "p_gen"


def test_round_trip_bundled(study):
    again = sio.loads(sio.dumps(study))
    assert again == study
    assert sio.dumps(again) == sio.dumps(study)


def test_round_trip_with_optional_sections(study, tmp_path):
    sc = study.scenario.with_(
        ssdc=pl.SSDCParams(), filter=pl.design_blocking_filter(14.07, 50.0),
        injections=(en.Tone(14.07, 1e-3, 1.0, 0.5), en.Tone(20.0, 2e-3)))
    s = replace(study, scenario=sc, scan=replace(study.scan, frequencies=(10.0, 14.07)))
    path = tmp_path / "x.scn"
    sio.save(s, path)
    back = sio.load(path)
    assert back == s
    assert math.isinf(back.scenario.injections[1].t_off)


@given(ssc=st.floats(600.0, 5000.0), xr=st.floats(1.0, 30.0), p=st.floats(0.0, 770.0),
       kp=st.floats(1e-3, 1.0), amp=st.floats(1e-5, 0.05), variant=st.sampled_from(["restart", "multitone"]))
def test_round_trip_property(study, ssc, xr, p, kp, amp, variant):
    sc = study.scenario
    sc = sc.with_(grid=replace(sc.grid, ssc_mva=ssc, x_over_r=xr),
                  machine=replace(sc.machine, p_mw=p), hvdc=replace(sc.hvdc, pll_kp=kp))
    s = replace(study, scenario=sc, scan=replace(study.scan, amplitude=amp, variant=variant))
    assert sio.loads(sio.dumps(s)) == s


def _text():
    return sio.bundled_path().read_text()


def _err(text):
    with pytest.raises(ScenarioError) as exc:
        sio.loads(text)
    return str(exc.value)


def test_unknown_key_reports_position():
    text = _text().replace("ssc_mva = 1550.0", "ssc_mva = 1550.0\nssc_mvaa = 1.0")
    line = text.splitlines().index("ssc_mvaa = 1.0") + 1
    msg = _err(text)
    assert f"line {line}, column 1" in msg and "grid.ssc_mvaa: unknown key" in msg


def test_unknown_section():
    assert "[grd]: unknown section" in _err(_text() + "\n[grd]\nx = 1\n")


def test_wrong_type():
    msg = _err(_text().replace("ssc_mva = 1550.0", 'ssc_mva = "big"'))
    assert "grid.ssc_mva: expected a number" in msg


def test_bool_is_not_a_number():
    assert "expected a number" in _err(_text().replace("ra = 0.002", "ra = true"))


def test_invariant_violation_names_field():
    msg = _err(_text().replace("length_km = 10.0", "length_km = -1.0"))
    assert "[gen_line] line.length_km: must be >= 0" in msg
    line = _text().splitlines().index("length_km = 10.0") + 1
    assert msg.startswith(f"line {line}, column 1")


def test_toml_syntax_error():
    assert "<string>" in _err("[scenario\nname = 1")


def test_inherited_base_frequency_not_allowed_in_shaft():
    text = _text().replace("generator_index = 5", "generator_index = 5\nbase_frequency = 60.0")
    assert "shaft.base_frequency: unknown key" in _err(text)


def test_missing_optional_sections_mean_absent():
    text = _text().split("[hvdc]")[0]
    s = sio.loads(text)
    assert s.scenario.hvdc is None
    assert s.scan == sio.ScanSettings()


def test_source_prefixes_errors(tmp_path):
    p = tmp_path / "bad.scn"
    p.write_text("[nope]\n")
    with pytest.raises(ScenarioError, match="bad.scn"):
        sio.load(p)


def test_owners_cover_sections():
    for sec in sio.to_dict(sio.bundled()):
        assert sio.section_owner(sec)
