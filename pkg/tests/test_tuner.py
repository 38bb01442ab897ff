import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sstikit import tuner as tn
from sstikit.errors import TuningError, UnrealizablePhaseError
from sstikit.plant import SSDCParams

F1 = 14.07


def _phase_at_f1(p: SSDCParams) -> float:
    w = 2 * math.pi * p.center_hz
    return math.degrees(math.atan(w * p.t1) - math.atan(w * p.t2))


def cosine_plant(peak_deg):
    """De as a function of the SSDC phase at f1 only: cos(dphi - peak) times
    the gain sign."""
    def evaluate(p):
        return math.copysign(1.0, p.gain) * math.cos(math.radians(_phase_at_f1(p) - peak_deg)), False
    return evaluate


# --- lead-lag ------------------------------------------------------------------------

def test_zero_phase_is_identity():
    ll = tn.leadlag_from_phase(0.0, F1)
    assert ll.a == 1.0 and ll.orientation == "neutral"
    assert ll.t1 == pytest.approx(1 / (2 * math.pi * F1)) and ll.t2 == ll.t1


def test_thirty_degree_lead():
    ll = tn.leadlag_from_phase(math.radians(30), F1)
    assert ll.a == pytest.approx(1 / 3, rel=1e-12)
    assert ll.t1 == pytest.approx(3 / (2 * math.pi * F1), rel=1e-12)
    assert ll.t1 == pytest.approx(0.03394, abs=1e-5)
    assert ll.t2 == pytest.approx(ll.a * ll.t1)
    assert ll.orientation == "lead"


def test_negative_phase_is_lag():
    ll = tn.leadlag_from_phase(math.radians(-30), F1)
    assert ll.a == pytest.approx(3.0, rel=1e-12)
    assert ll.orientation == "lag"


@pytest.mark.parametrize("deg", [90.0, -90.0, 120.0])
def test_unrealizable_phase(deg):
    with pytest.raises(UnrealizablePhaseError):
        tn.leadlag_from_phase(math.radians(deg), F1)


def test_unknown_centering():
    with pytest.raises(ValueError):
        tn.leadlag_from_phase(0.1, F1, "arith")


@given(st.floats(0.0, 89.0))
def test_lead_ratio_in_unit_interval(deg):
    a = tn.leadlag_from_phase(math.radians(deg), F1).a
    assert 0 < a <= 1


@given(st.floats(-60.0, 60.0), st.floats(5.0, 60.0))
def test_geometric_centering_round_trip(deg, f1):
    ll = tn.leadlag_from_phase(math.radians(deg), f1, "geometric")
    assert ll.phase_deg(f1) == pytest.approx(deg, abs=1.0)


@given(st.floats(-60.0, 60.0), st.floats(5.0, 60.0))
def test_classic_centering_phase(deg, f1):
    # T1 = 1/(w1 a) puts atan(1/a) - 45 deg at f1, not dphi itself
    ll = tn.leadlag_from_phase(math.radians(deg), f1, "classic")
    assert ll.phase_deg(f1) == pytest.approx(math.degrees(math.atan(1 / ll.a)) - 45.0, abs=1e-9)


def test_classic_centering_misses_round_trip():
    ll = tn.leadlag_from_phase(math.radians(60), F1, "classic")
    assert abs(ll.phase_deg(F1) - 60.0) > 1.0


def test_gain_normalized_at_f1():
    p = tn.ssdc_for(None, 40.0, F1, 2.5, "geometric")
    ll = tn.LeadLag(p.t2 / p.t1, p.t1, p.t2)
    assert p.gain * ll.gain(F1) == pytest.approx(2.5, rel=1e-12)
    assert p.center_hz == F1


# --- phase sweep -------------------------------------------------------------------------

def test_one_point_grid():
    r = tn.tune_phase(None, F1, grid=[40.0], both_polarities=False, evaluate=cosine_plant(0.0))
    assert r.best_phase == 40.0
    assert len(r.rows) == 1


@pytest.mark.parametrize("centering", ["geometric", "classic"])
def test_cosine_plant_peak_found(centering):
    r = tn.tune_phase(None, F1, evaluate=cosine_plant(25.0), centering=centering)
    # 2 deg refinement on the requested shift
    got = _phase_at_f1(tn.ssdc_for(None, r.best_phase, F1, 0.1, centering))
    assert abs(got - 25.0) <= 2.0 + 1e-9
    assert r.best_gain_sign == 1.0


def test_cosine_plant_negative_polarity():
    # peak at 25 - 180 deg: reachable only with the gain sign flipped
    r = tn.tune_phase(None, F1, evaluate=cosine_plant(25.0 - 180.0), centering="geometric")
    assert r.best_gain_sign == -1.0
    assert abs(r.best_phase - 25.0) <= 2.0


def test_all_nonlinear_fails():
    with pytest.raises(TuningError, match="lower gain_fixed"):
        tn.tune_phase(None, F1, evaluate=lambda p: (1.0, True))


# --- gain sweep ---------------------------------------------------------------------------

def _peaked(k_best):
    return lambda p: (-(abs(p.gain) * tn.leadlag_from_phase(0.0, F1).gain(F1) - k_best) ** 2, False)


def _saturation(amp=1e-3):
    # the SSDC output during the disturbance scales with its gain
    return lambda p: (1.0 if abs(p.gain) * amp > p.limit else 0.0, -1.0)


def test_gain_unconstrained_takes_argmax():
    grid = tn.default_gain_grid()
    best = min(grid, key=lambda k: abs(k - 1.3))
    # with the default 0.05 pu limit the large gains saturate ...
    capped = tn.tune_gain(SimpleNamespace(ssdc=SSDCParams()), F1, 0.0, evaluate=_peaked(1.3),
                          disturbance=_saturation(1.0))
    assert capped.best_gain < best
    # ... with no limit the best De wins outright
    free = tn.tune_gain(SimpleNamespace(ssdc=SSDCParams(limit=math.inf)), F1, 0.0, evaluate=_peaked(1.3),
                        disturbance=_saturation(1.0))
    assert free.best_gain == best


def test_gain_limited_by_saturation():
    def sat(p):
        return (1.0 if abs(p.gain) > 0.5 else 0.0, -1.0)
    r = tn.tune_gain(None, F1, 0.0, evaluate=_peaked(3.0), disturbance=sat)
    assert r.best_gain <= 0.5
    assert all(row[3] > 0 for row in r.rows if row[0] > 0.5)


def test_gain_all_saturated_fails():
    with pytest.raises(TuningError, match="output limit"):
        tn.tune_gain(None, F1, 0.0, evaluate=_peaked(1.0), disturbance=lambda p: (0.2, -1.0))


def test_gain_tiny_limit_on_plant(aramon):
    sc = aramon.with_(ssdc=SSDCParams(center_hz=F1, limit=1e-6))
    with pytest.raises(TuningError):
        tn.tune_gain(sc, F1, 0.0, grid=[0.5, 2.0], centering="geometric")
