import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from sstikit import protection as pr
from sstikit.errors import InvalidModelError

DT = 2e-4
F1 = 14.07


def _t(duration):
    return np.arange(int(round(duration / DT))) * DT


# --- curve ---------------------------------------------------------------------------

@pytest.mark.parametrize("kw", [
    dict(pickup=0.0),
    dict(pickup=0.01, reset=0.01),
    dict(allowance=()),
    dict(allowance=((1.0, 0.05),)),
    dict(allowance=((0.0, 0.05), (1.0, 0.06))),
    dict(allowance=((0.0, 0.05), (0.0, 0.04))),
    dict(allowance=((0.0, 0.05), (1.0, 0.0))),
])
def test_curve_invariants(kw):
    with pytest.raises(InvalidModelError):
        pr.DetectionCurve(**kw)


def test_required_decay():
    assert pr.required_decay(0.1, 1.25) == pytest.approx(-0.02)


def test_default_curve_shape():
    c = pr.default_curve(1.25, pickup=0.01, multiple=5.0, damping_pu=0.1)
    tau = 5.0 / 0.02
    assert c.allowed(0.0) == pytest.approx(0.05)
    assert c.allowed(tau) == pytest.approx(0.05 * math.exp(-1), rel=0.01)
    assert c.reset == pytest.approx(0.005)
    mags = [m for _, m in c.allowance]
    assert all(b <= a for a, b in zip(mags, mags[1:]))
    assert c.allowed(1e9) == mags[-1]


# --- magnitude estimation ---------------------------------------------------------------

def test_rejects_50hz_when_watching_mode_one():
    t = _t(6.0)
    env = pr.oscillation_magnitude(np.sin(2 * math.pi * 50 * t), F1, DT)
    assert np.max(env[t > 2.0]) < 1e-3


def test_constant_signal_reads_zero():
    env = pr.oscillation_magnitude(np.full(20000, 0.7), F1, DT)
    assert np.max(np.abs(env)) < 1e-12


def test_pure_tone_amplitude():
    t = _t(6.0)
    env = pr.oscillation_magnitude(0.02 * np.sin(2 * math.pi * F1 * t), F1, DT)
    np.testing.assert_allclose(env[t > 2.0], 0.02, rtol=0.10)


def test_onset_does_not_overshoot():
    # a tone switched on from rest must not read far above its amplitude
    t = _t(4.0)
    env = pr.oscillation_magnitude(0.9 + 0.03 * np.sin(2 * math.pi * F1 * t), F1, DT)
    assert env.max() < 1.1 * 0.03


def test_sustained_tone_below_allowance_does_not_trip():
    t = _t(10.0)
    env = pr.oscillation_magnitude(0.03 * np.sin(2 * math.pi * F1 * t), F1, DT)
    assert pr.evaluate_trip(env, DT, pr.default_curve(1.25)).outcome == "armed"


@pytest.mark.parametrize("f", [14.0704, 22.0917, 32.3382, 34.9303])
def test_decaying_tone_tracked(f):
    t = _t(7.0)
    env = pr.oscillation_magnitude(np.exp(-t) * np.sin(2 * math.pi * f * t), f, DT)
    sel = (t > 1.5) & (t < 6.0)
    np.testing.assert_allclose(env[sel], np.exp(-t[sel]), rtol=0.15)


def test_chunked_equals_whole():
    t = _t(3.0)
    x = np.exp(-0.5 * t) * np.sin(2 * math.pi * F1 * t) + 0.1
    whole = pr.EnvelopeTracker(F1, DT).process(x)
    tr = pr.EnvelopeTracker(F1, DT)
    parts = [tr.process(c) for c in np.array_split(x, 7)]
    np.testing.assert_array_equal(np.concatenate(parts), whole)
    assert tr.process([]).size == 0


@pytest.mark.parametrize("f,dt", [(0.0, DT), (3000.0, DT), (F1, 0.0)])
def test_tracker_preconditions(f, dt):
    with pytest.raises(InvalidModelError):
        pr.EnvelopeTracker(f, dt)


# --- trip logic ---------------------------------------------------------------------

CURVE = pr.DetectionCurve(pickup=0.01, allowance=((0.0, 0.05), (1.0, 0.02)), reset=0.005)


def test_below_pickup_never_arms():
    r = pr.evaluate_trip(np.full(5000, 0.009), DT, CURVE)
    assert r.outcome == "never-armed" and not r.events and not r.tripped
    assert np.all(r.state == pr.IDLE)


def test_fast_decay_arms_then_clears():
    curve = pr.default_curve(1.25)
    t = _t(10.0)
    env = 0.03 * np.exp(-t)
    r = pr.evaluate_trip(env, DT, curve)
    assert [e.kind for e in r.events] == ["armed", "clear"]
    assert r.outcome == "clear" and r.trip_time is None
    assert r.events[1].time == pytest.approx(math.log(0.03 / 0.005), abs=2 * DT)


def test_sustained_oscillation_trips_at_first_exceedance():
    env = np.full(10000, 0.03)
    r = pr.evaluate_trip(env, DT, CURVE, t0=1.0)
    # allowance falls linearly 0.05 -> 0.02 over 1 s: 0.03 is crossed at 2/3 s
    k = np.argmax(CURVE.allowed(np.arange(10000) * DT) < 0.03)
    assert r.outcome == "TRIP"
    assert r.trip_time == pytest.approx(1.0 + k * DT, abs=1e-12)
    assert np.all(r.state[k:] == pr.TRIPPED) and np.all(r.state[:k] == pr.ARMED)


def test_trip_latches():
    env = np.concatenate([np.full(100, 0.06), np.zeros(100)])
    r = pr.evaluate_trip(env, DT, CURVE)
    assert [e.kind for e in r.events] == ["armed", "TRIP"]
    assert r.state[-1] == pr.TRIPPED


def test_rearm_restarts_allowance():
    env = np.concatenate([np.full(100, 0.02), np.full(10, 0.001), np.full(100, 0.02)])
    r = pr.evaluate_trip(env, DT, CURVE)
    assert [e.kind for e in r.events] == ["armed", "clear", "armed"]
    assert r.outcome == "armed"


def test_decision_csv():
    r = pr.evaluate_trip(np.full(10, 0.06), DT, CURVE)
    lines = r.to_csv().splitlines()
    assert lines[0] == "time,decision,envelope,allowance"
    assert [ln.split(",")[1] for ln in lines[1:]] == ["armed", "TRIP"]


envelopes = hnp.arrays(np.float64, st.integers(1, 300), elements=st.floats(0.0, 0.08))


def _trip_time(env):
    t = pr.evaluate_trip(env, DT, CURVE).trip_time
    return math.inf if t is None else t


@settings(max_examples=100)
@given(envelopes, st.data())
def test_larger_envelope_never_trips_later(env, data):
    extra = data.draw(hnp.arrays(np.float64, len(env), elements=st.floats(0.0, 0.05)))
    assert _trip_time(env + extra) <= _trip_time(env)


@given(envelopes)
def test_no_trip_without_arming(env):
    kinds = [e.kind for e in pr.evaluate_trip(env, DT, CURVE).events]
    for i, k in enumerate(kinds):
        if k == "TRIP":
            assert i > 0 and kinds[i - 1] == "armed"
        if k == "clear":
            assert kinds[i - 1] == "armed"


@given(envelopes, st.integers(1, 5))
def test_deterministic_and_streaming(env, n):
    a = pr.evaluate_trip(env, DT, CURVE)
    b = pr.evaluate_trip(env.copy(), DT, CURVE)
    assert a.events == b.events
    ev = pr.TripEvaluator(CURVE, DT)
    st_ = np.concatenate([ev.feed(c) for c in np.array_split(env, n)])
    assert ev.events == a.events
    np.testing.assert_array_equal(st_, a.state)
