import math

import numpy as np
import pytest
from scipy import signal
from hypothesis import given
from hypothesis import strategies as st

from sstikit import engine as en
from sstikit import plant as pl
from sstikit import scan
from sstikit.errors import CoverageError, InvalidModelError, InvalidWindowError, SettleError
from sstikit.scan import DampingCurve, DampingPoint, ScanPlan

WS = 2 * math.pi * 50
F1 = 14.0704


def _standin(sc, num, den):
    return sc.with_(standin=en.LinearStandin(num, den))


# --- measure_tone ------------------------------------------------------------------

def test_pure_tone_amplitude_and_phase():
    dt = 2e-4
    t = np.arange(int(3.0 / dt)) * dt
    x = 0.002 * np.sin(2 * math.pi * 14.07 * t)
    a, ph = scan.measure_tone(x, dt, 14.07, 0.5, 20)
    assert a == pytest.approx(0.002, abs=1e-9)
    assert ph == pytest.approx(-math.pi / 2, abs=1e-9)


def test_second_tone_does_not_leak():
    dt = 1e-3
    t = np.arange(int(101.0 / dt)) * dt
    one = 0.002 * np.sin(2 * math.pi * 14.07 * t)
    two = one + 0.005 * np.cos(2 * math.pi * 22.09 * t + 0.3)
    # 100 s holds 1407 and 2209 whole periods
    a1, p1 = scan.measure_tone(one, dt, 14.07, 0.0, 1407)
    a2, p2 = scan.measure_tone(two, dt, 14.07, 0.0, 1407)
    assert abs(a2 - a1) < 1e-6 and abs(p2 - p1) < 1e-6


def test_zero_signal():
    assert scan.measure_tone(np.zeros(5000), 1e-3, 14.07, 0.0, 10)[0] == 0.0


def test_window_errors():
    x = np.zeros(1000)
    with pytest.raises(InvalidWindowError):
        scan.measure_tone(x, 1e-3, 14.07, 0.0, 0.4)
    with pytest.raises(InvalidWindowError):
        scan.measure_tone(x, 1e-3, 14.07, 0.5, 20)


@given(st.floats(1.0, 49.0), st.floats(1e-4, 1.0), st.floats(-math.pi, math.pi))
def test_measure_tone_recovers_any_tone(f, a, ph):
    dt = 5e-4
    t = np.arange(int(2.5 / dt)) * dt
    x = a * np.cos(2 * math.pi * f * t + ph) + 0.3
    got_a, got_ph = scan.measure_tone(x, dt, f, 0.1, max(1, round(2.0 * f)))
    assert got_a == pytest.approx(a, rel=1e-8)
    assert abs(np.angle(np.exp(1j * (got_ph - ph)))) < 1e-7


@given(st.floats(0.01, 10.0), st.floats(-math.pi, math.pi), st.floats(1e-5, 1.0), st.floats(-math.pi, math.pi))
def test_damping_point_definition(gte, pte, aw, pw):
    te = gte * aw * np.exp(1j * pte)
    w = aw * np.exp(1j * pw)
    p = DampingPoint.from_phasors(14.0, te, w)
    assert p.De == pytest.approx(p.amp_te / p.amp_w * math.cos(p.phase_te - p.phase_w), rel=1e-12, abs=1e-12)
    assert complex(p.De, p.Ke) == pytest.approx(te / w, rel=1e-9)


# --- scans on linear stand-ins ---------------------------------------------------------

def test_standin_constant_damping(aramon):
    # Ge = 2 + K ws/s: real part 2 at every frequency, synchronizing term keeps the shaft anchored
    sc = _standin(aramon, (2.0, 15.0 * WS), (1.0, 0.0))
    freqs = tuple(np.round(np.linspace(1.5, 59.0, 50), 3))
    curve = scan.electrical_damping_curve(sc, ScanPlan(freqs))
    assert len(curve.points) == 50
    np.testing.assert_allclose(curve.De, 2.0, rtol=0.01)


def test_standin_matches_transfer_function(aramon):
    # (1.5 s^2 + 300 s + 2e5) / (s^2 + 120 s + 8e3) plus the anchoring term 15 ws / s
    k = 15.0 * WS
    num = (1.5, 300.0 + k, 2.0e5 + 120.0 * k, 8.0e3 * k)
    den = (1.0, 120.0, 8.0e3, 0.0)
    sc = _standin(aramon, num, den)
    freqs = (3.0, 8.0, 14.07, 20.0, 33.0, 47.0)
    curve = scan.electrical_damping_curve(sc, ScanPlan(freqs))
    _, h = signal.freqs(num, den, worN=2 * np.pi * np.array(freqs))
    np.testing.assert_allclose(curve.De, h.real, rtol=0.01)


def test_journal_resume(aramon, tmp_path, monkeypatch):
    sc = _standin(aramon, (2.0, 15.0 * WS), (1.0, 0.0))
    j = tmp_path / "scan.jsonl"
    first = scan.electrical_damping_curve(sc, ScanPlan((10.0, 20.0)), journal=j)
    calls = []
    real = scan._run_batch

    def counting(args):
        calls.append(args[2])
        return real(args)

    monkeypatch.setattr(scan, "_run_batch", counting)
    again = scan.electrical_damping_curve(sc, ScanPlan((10.0, 20.0, 30.0)), journal=j)
    assert calls == [(30.0,)]
    assert again.points[:2] == first.points
    # a different plan must not reuse the journal
    scan.electrical_damping_curve(sc, ScanPlan((10.0,), amplitude=2e-3), journal=j)
    assert calls[-1] == (10.0,)


def test_settle_error_when_never_settled(aramon):
    sc = _standin(aramon, (2.0, 15.0 * WS), (1.0, 0.0))
    plan = ScanPlan((14.0,), settle_tol=1e-14, min_settle_s=1.0, max_settle_s=1.0)
    with pytest.raises(SettleError, match="drifting"):
        scan.electrical_damping_curve(sc, plan)


# --- scans on the plant --------------------------------------------------------------------

@pytest.fixture(scope="module")
def probe():
    return (10.0, F1, 22.0, 33.0)


@pytest.fixture(scope="module")
def restart_curve(aramon, probe):
    return scan.electrical_damping_curve(aramon, ScanPlan(probe))


@pytest.mark.slow
@pytest.mark.parametrize("variant", ["progressive", "multitone"])
def test_variant_equivalence(aramon, probe, restart_curve, variant):
    other = scan.electrical_damping_curve(aramon, ScanPlan(probe, variant=variant))
    assert all(p.variant == variant or p.variant == "restart" for p in other.points)
    np.testing.assert_allclose(other.De, restart_curve.De, rtol=0.02)


@pytest.mark.slow
def test_small_signal_linearity(aramon, probe, restart_curve):
    half = scan.electrical_damping_curve(aramon, ScanPlan(probe, amplitude=5e-4))
    np.testing.assert_allclose(half.De, restart_curve.De, rtol=0.02)


@pytest.mark.slow
def test_settle_insensitivity(aramon, probe, restart_curve):
    long = scan.electrical_damping_curve(aramon, ScanPlan(probe, settle_periods=20, min_settle_s=6.0))
    np.testing.assert_allclose(long.De, restart_curve.De, rtol=0.005)


def test_limiter_activity_flags_point(aramon):
    sc = aramon.with_(ssdc=pl.SSDCParams(center_hz=F1, gain=50.0, limit=1e-4))
    curve = scan.electrical_damping_curve(sc, ScanPlan((F1,)))
    assert curve.points[0].nonlinear
    with pytest.raises(CoverageError):
        curve.de_at(F1)


# --- plan / batches / curve -------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(frequencies=()), dict(frequencies=(0.0,)), dict(frequencies=(5.0, 5.0)),
                                dict(frequencies=(5.0,), variant="fft"), dict(frequencies=(5.0,), amplitude=0.0)])
def test_plan_invariants(kw):
    with pytest.raises(InvalidModelError):
        ScanPlan(**kw)


def test_default_grid_contains_refinement():
    g = scan.default_grid((F1,))
    assert g[0] == 1.0 and g[-1] == 59.0
    assert np.all(np.diff(g) > 0)
    near = [f for f in g if abs(f - F1) <= 1.0 + 1e-9]
    assert len(near) >= 21


@given(st.lists(st.floats(1.0, 59.0), min_size=1, max_size=25, unique=True), st.integers(1, 4))
def test_batches_partition_without_interaction(freqs, size):
    freqs = sorted({round(f, 3) for f in freqs})
    batches = scan.make_batches(freqs, size)
    flat = sorted(f for b in batches for f in b)
    assert flat == freqs
    for b in batches:
        assert len(b) <= size
        assert len(b) == 1 or not scan._interacts(list(b))


def test_batches_example():
    b = scan.make_batches([10.0, 20.0, 30.0, 13.0, 47.0], 3)
    for batch in b:
        # harmonics of 10 Hz, and 30 = 10 + 20
        assert not ({10.0, 20.0} <= set(batch) or {10.0, 30.0} <= set(batch))
        assert not {10.0, 20.0, 30.0} <= set(batch)


def test_curve_csv_round_trip(tmp_path):
    pts = [DampingPoint.from_phasors(f, (1 + 0.1 * f) * np.exp(0.2j * f), 1e-4 + 0j) for f in (3.0, 1.0, 2.0)]
    pts[1] = DampingPoint(**{**pts[1].__dict__, "nonlinear": True})
    c = DampingCurve(pts)
    assert list(c.f) == [1.0, 2.0, 3.0]
    p = tmp_path / "c.csv"
    c.to_csv(p)
    back = DampingCurve.from_csv(p)
    np.testing.assert_array_equal(back.De, c.De)
    assert [q.nonlinear for q in back.points] == [q.nonlinear for q in c.points]
    p.write_text("f_hz,De\nx,1\n")
    with pytest.raises(InvalidModelError, match="line 2"):
        DampingCurve.from_csv(p)


# --- verdict ---------------------------------------------------------------------

def _flat(values, freqs=(10.0, 20.0)):
    return DampingCurve([DampingPoint(f, v, 0.0, abs(v), 1.0, 0.0, 0.0) for f, v in zip(freqs, values)])


def test_verdict_negative_total_damping():
    v = scan.stability_verdict(_flat((-1.18, -1.18)), frequencies=(14.07,), mechanical_damping=(0.98,))
    assert v.modes[0].Dt == pytest.approx(-0.2)
    assert not v.stable


def test_verdict_conservative_positive():
    v = scan.stability_verdict(_flat((0.1, 0.3)), frequencies=(12.0, 18.0), mechanical_damping=(-5.0, -5.0),
                               conservative=True)
    assert v.stable and v.conservative and all(m.Dm == 0.0 for m in v.modes)
    v = scan.stability_verdict(_flat((0.0, 0.3)), frequencies=(10.0,), mechanical_damping=(5.0,),
                               conservative=True)
    assert not v.stable


def test_verdict_boundary_is_unstable():
    v = scan.stability_verdict(_flat((-0.5, -0.5)), frequencies=(15.0,), mechanical_damping=(0.5,))
    assert v.modes[0].Dt == 0.0 and not v.stable


def test_verdict_interpolates_linearly():
    v = scan.stability_verdict(_flat((-1.0, 1.0)), frequencies=(12.5,), mechanical_damping=(0.0,))
    assert v.modes[0].De == pytest.approx(-0.5)


def test_verdict_coverage(modal):
    with pytest.raises(CoverageError):
        scan.stability_verdict(_flat((1.0, 1.0)), modal)


def test_verdict_uses_modal_result(modal):
    c = _flat((1.0, 1.0), freqs=(1.0, 59.0))
    v = scan.stability_verdict(c, modal)
    assert len(v.modes) == len(modal.frequency_hz)
    np.testing.assert_allclose([m.Dt for m in v.modes], 1.0 + np.asarray(modal.mechanical_damping))
