import csv
import math

import numpy as np
import pytest

from sstikit import cli
from sstikit import engine as en
from sstikit import scenario_io as sio
from sstikit.scan import DampingCurve, DampingPoint

SCN = str(sio.bundled_path())


def _run(*argv):
    return cli.main([str(a) for a in argv])


def _curve(path, de):
    pts = [DampingPoint(float(f), de, 0.0, abs(de), 1.0, 0.0, 0.0) for f in range(1, 60)]
    DampingCurve(pts).to_csv(path)
    return path


def test_screen(tmp_path, capsys):
    assert _run("screen", SCN, "--out", tmp_path) == 0
    assert "0.44" in capsys.readouterr().out
    rows = dict(csv.reader(open(tmp_path / "uif.csv")))
    assert float(rows["UIF"]) == pytest.approx(0.44, abs=0.01)


def test_modal(tmp_path):
    assert _run("modal", SCN, "--out", tmp_path) == 0
    rows = list(csv.reader(open(tmp_path / "modal.csv")))
    assert len(rows) == 6
    assert float(rows[1][1]) == pytest.approx(14.07, rel=0.02)


@pytest.mark.parametrize("de,code,word", [(1.0, 0, "stable"), (-1.5, 2, "UNSTABLE")])
def test_verdict_exit_codes(tmp_path, capsys, de, code, word):
    c = _curve(tmp_path / "c.csv", de)
    assert _run("verdict", SCN, "--curve", c, "--out", tmp_path) == code
    assert f"verdict: {word}" in capsys.readouterr().out
    assert (tmp_path / "verdict.csv").exists()


def test_conservative_flag(tmp_path):
    # De = -0.5 is outweighed by D_m1 ~ 0.98 only when mechanical damping is counted
    c = _curve(tmp_path / "c.csv", -0.5)
    assert _run("verdict", SCN, "--curve", c, "--out", tmp_path) == 0
    assert _run("verdict", SCN, "--curve", c, "--out", tmp_path, "--conservative") == 2


def test_errors_exit_one(tmp_path, capsys):
    assert _run("screen", tmp_path / "missing.scn", "--out", tmp_path) == 1
    bad = tmp_path / "bad.scn"
    bad.write_text(open(SCN).read().replace("ssc_mva = 1550.0", "ssc_mva = -5.0"))
    assert _run("screen", bad, "--out", tmp_path) == 1
    assert "bad.scn" in capsys.readouterr().err
    bad.write_text("[scenario]\nname = 'x'\n")  # no shaft
    assert _run("modal", bad, "--out", tmp_path) == 1
    assert _run("screen", SCN, "--out", tmp_path, "--jobs", "-1") == 1


def test_simulate_short(tmp_path, capsys):
    assert _run("simulate", SCN, "--out", tmp_path, "--duration", "0.5", "--no-events") == 0
    tr = en.SimTrace.from_csv(tmp_path / "trace.csv")
    assert tr.time[-1] == pytest.approx(0.5, abs=1e-3)
    assert np.max(np.abs(tr["dw"])) < 1e-5


def _synthetic_trace(path, amp):
    dt = 2e-4
    t = np.arange(int(6.0 / dt)) * dt
    p = 0.9 + amp * np.sin(2 * math.pi * 14.0704 * t)
    en.SimTrace(t, {"p_gen": p}, dt).to_csv(path)
    return path


@pytest.mark.parametrize("amp,code,word", [(0.001, 0, "never-armed"), (0.2, 2, "TRIP")])
def test_protection_check(tmp_path, capsys, amp, code, word):
    tr = _synthetic_trace(tmp_path / "tr.csv", amp)
    assert _run("protection-check", SCN, "--trace", tr, "--out", tmp_path) == code
    assert word in capsys.readouterr().out
    rows = list(csv.reader(open(tmp_path / "protection.csv")))
    assert rows[0] == ["mode", "f_hz", "time", "decision", "envelope", "allowance"]
    if word == "TRIP":
        assert [r[3] for r in rows[1:]] == ["armed", "TRIP"]


def test_protection_check_missing_channel(tmp_path):
    dt = 1e-3
    t = np.arange(100) * dt
    en.SimTrace(t, {"dw": 0 * t}, dt).to_csv(tmp_path / "tr.csv")
    assert _run("protection-check", SCN, "--trace", tmp_path / "tr.csv", "--out", tmp_path) == 1


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "sstikit", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "tune-ssdc" in r.stdout
