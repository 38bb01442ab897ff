"""Empirical SSDC tuning: phase sweep at the target mode, then gain sweep
under a no-saturation constraint.

Lead-lag centering from a desired phase shift dphi:

    a  = (1 - sin dphi) / (1 + sin dphi),   T2 = a T1
    T1 = 1 / (2 pi f1 a)          ("classic")
    T1 = 1 / (2 pi f1 sqrt(a))    ("geometric", maximum phase exactly at f1)

Only the geometric form puts a phase of exactly dphi at f1; the other
yields atan(1/a) - 45 deg.  Both are available.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import engine as en
from . import scan as sc_mod
from .errors import InitializationError, SettleError, SSTIError, TuningError, UnrealizablePhaseError
from .plant import SSDCParams

CENTERINGS = ("classic", "geometric")


@dataclass(frozen=True)
class LeadLag:
    a: float
    t1: float
    t2: float

    @property
    def orientation(self) -> str:
        if abs(self.a - 1.0) < 1e-12:
            return "neutral"
        return "lead" if self.a < 1 else "lag"

    def phase_deg(self, f: float) -> float:
        w = 2 * math.pi * f
        return math.degrees(math.atan(w * self.t1) - math.atan(w * self.t2))

    def gain(self, f: float) -> float:
        w = 2 * math.pi * f
        return math.hypot(1, w * self.t1) / math.hypot(1, w * self.t2)


def leadlag_from_phase(dphi: float, f1: float, centering: str = "classic") -> LeadLag:
    """Lead-lag constants for a phase shift ``dphi`` (rad) at ``f1`` (Hz).

    Negative ``dphi`` gives a > 1 (lag orientation).
    """
    if centering not in CENTERINGS:
        raise ValueError(f"centering: one of {', '.join(CENTERINGS)}")
    if not abs(dphi) < math.pi / 2 - 1e-12:
        raise UnrealizablePhaseError(f"phase shift {math.degrees(dphi):.1f} deg is not realizable (|dphi| < 90)")
    s = math.sin(dphi)
    a = (1 - s) / (1 + s)
    w1 = 2 * math.pi * f1
    t1 = 1 / (w1 * a) if centering == "classic" else 1 / (w1 * math.sqrt(a))
    return LeadLag(a, t1, a * t1)


def ssdc_for(base: SSDCParams | None, dphi_deg: float, f1: float, gain: float,
             centering: str = "classic", *, gain_at_f1: bool = True) -> SSDCParams:
    """SSDC centered on f1 with the lead-lag for ``dphi_deg``.

    With ``gain_at_f1`` the gain is the loop gain at f1, i.e. the stored
    K is ``gain / |LL(j 2 pi f1)|``; sweeps then compare phases at equal
    gain instead of rewarding the large lead-lag gain near +-90 deg.
    """
    ll = leadlag_from_phase(math.radians(dphi_deg), f1, centering)
    base = base or SSDCParams()
    k = gain / ll.gain(f1) if gain_at_f1 else gain
    return replace(base, center_hz=f1, t1=ll.t1, t2=ll.t2, gain=k)


# ---------------------------------------------------------------------------
# evaluation helpers (picklable so sweeps can use worker processes)

@dataclass(frozen=True)
class ScanEvaluator:
    """De at f1 of ``scenario`` with a given SSDC, from a single-tone scan."""

    scenario: en.Scenario
    f1: float
    plan: sc_mod.ScanPlan | None = None

    def __call__(self, params: SSDCParams) -> tuple[float, bool]:
        plan = self.plan or sc_mod.ScanPlan((self.f1,))
        plan = replace(plan, frequencies=(self.f1,), variant="restart")
        try:
            curve = sc_mod.electrical_damping_curve(self.scenario.with_(ssdc=params), plan)
        except (SettleError, InitializationError):  # unstable closed loop, no steady state
            return -math.inf, True
        p = curve.points[0]
        return p.De, p.nonlinear


@dataclass(frozen=True)
class DisturbanceRun:
    """Fraction of samples with the SSDC limiter active during the
    disturbance (S_sc step) run, and the growth rate at f1 afterwards."""

    scenario: en.Scenario
    f1: float
    duration: float = 10.0

    def __call__(self, params: SSDCParams) -> tuple[float, float]:
        s = self.scenario.with_(ssdc=params, duration=self.duration)
        tr = en.run(s)
        frac = float(np.mean(tr["limiter_active"] > 0)) if len(tr.time) else 1.0
        if tr.diverged:
            return max(frac, 1e-9), math.inf
        t_ev = max([t for t, _ in self.scenario.grid.events] or [0.0])
        lo = t_ev + 1.0
        try:
            g = en.growth_rate(tr["dw"], tr.sample_interval, self.f1, (lo, tr.time[-1]))
        except SSTIError:
            g = -math.inf  # nothing left at f1
        return frac, g


def _map(fn, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


@dataclass(frozen=True)
class _PhaseTask:
    evaluate: Callable
    base: SSDCParams | None
    f1: float
    gain: float
    centering: str

    def __call__(self, dphi):
        return self.evaluate(ssdc_for(self.base, dphi, self.f1, self.gain, self.centering))


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class PhaseSweep:
    rows: list[tuple[float, float, float, bool]]  # (dphi deg, gain, De, nonlinear)
    best_phase: float
    best_gain_sign: float
    best_de: float


def tune_phase(scenario: en.Scenario | None, f1: float, gain_fixed: float = 0.1, grid=None, *,
               refine: bool = True, centering: str = "classic", both_polarities: bool = True,
               evaluate: Callable | None = None, jobs: int = 1) -> PhaseSweep:
    """Phase shift maximizing De(f1) at a fixed small gain.

    Coarse sweep (default -80..80 deg, 10 deg; +-90 is unrealizable) then a
    +-10 deg refinement in 2 deg steps around the best point.  Both gain
    polarities are tried unless ``both_polarities`` is False, since the sign
    of the loop depends on the converter's power convention.
    """
    if evaluate is None:
        evaluate = ScanEvaluator(scenario.after_events(), f1)
    base = scenario.ssdc if scenario is not None else None
    grid = list(np.arange(-80.0, 80.0 + 1e-9, 10.0)) if grid is None else [float(g) for g in grid]
    grid = [g for g in grid if abs(g) < 90]
    if not grid:
        raise TuningError("phase grid is empty after removing unrealizable points")
    signs = (1.0, -1.0) if both_polarities else (1.0,)
    rows: list[tuple[float, float, float, bool]] = []

    def sweep(phases, sign):
        task = _PhaseTask(evaluate, base, f1, sign * gain_fixed, centering)
        res = _map(task, list(phases), jobs)
        for p, (de, nl) in zip(phases, res):
            rows.append((float(p), sign * gain_fixed, float(de), bool(nl)))

    for s in signs:
        sweep(grid, s)

    def best():
        ok = [r for r in rows if not r[3] and math.isfinite(r[2])]
        if not ok:
            raise TuningError("all phase-sweep points are nonlinear; lower gain_fixed")
        return max(ok, key=lambda r: r[2])

    b = best()
    if refine and len(grid) > 1:
        done = {(r[0], r[1]) for r in rows}
        fine = [b[0] + d for d in np.arange(-10.0, 10.0 + 1e-9, 2.0)]
        fine = [p for p in fine if abs(p) < 90 and (p, b[1]) not in done]
        if fine:
            sweep(fine, math.copysign(1.0, b[1]))
            b = best()
    rows.sort(key=lambda r: (r[1], r[0]))
    return PhaseSweep(rows, b[0], math.copysign(1.0, b[1]), b[2])


@dataclass
class GainSweep:
    # (gain at f1, De, nonlinear, limiter fraction, growth)
    rows: list[tuple[float, float, bool, float, float]]
    best_gain: float
    best_de: float


@dataclass(frozen=True)
class _GainTask:
    evaluate: Callable
    disturb: Callable | None
    params: SSDCParams

    def __call__(self, k):
        p = replace(self.params, gain=k * self.params.gain)
        de, nl = self.evaluate(p)
        frac, g = self.disturb(p) if self.disturb is not None else (0.0, math.nan)
        return de, nl, frac, g


def default_gain_grid(sign: float = 1.0) -> list[float]:
    return [float(sign * k) for k in np.logspace(math.log10(0.05), math.log10(5.0), 12)]


def tune_gain(scenario: en.Scenario | None, f1: float, dphi_deg: float, grid=None, *, sign: float = 1.0,
              centering: str = "classic", evaluate: Callable | None = None,
              disturbance: Callable | None = None, jobs: int = 1) -> GainSweep:
    """Gain maximizing De(f1) among candidates whose disturbance run never
    drives the SSDC output into its limit."""
    if evaluate is None:
        evaluate = ScanEvaluator(scenario.after_events(), f1)
    if disturbance is None and scenario is not None:
        disturbance = DisturbanceRun(scenario, f1)
    base = scenario.ssdc if scenario is not None else None
    params = ssdc_for(base, dphi_deg, f1, 1.0, centering)  # unit gain at f1, scaled per candidate
    grid = default_gain_grid(sign) if grid is None else [float(k) for k in grid]
    res = _map(_GainTask(evaluate, disturbance, params), grid, jobs)
    rows = [(k, float(de), bool(nl), float(fr), float(g)) for k, (de, nl, fr, g) in zip(grid, res)]
    ok = [r for r in rows if r[3] == 0.0 and not r[2] and math.isfinite(r[1])]
    if not ok:
        raise TuningError("every gain saturates the SSDC output during the disturbance run; "
                          "raise the output limit or use a different input signal")
    b = max(ok, key=lambda r: r[1])
    return GainSweep(rows, b[0], b[1])


# ---------------------------------------------------------------------------
# full workflow

@dataclass
class TuneReport:
    f1: float
    centering: str
    phase: PhaseSweep
    gain: GainSweep
    ssdc: SSDCParams
    mode_frequencies: tuple[float, ...] = ()
    de_before: tuple[float, ...] = ()
    de_after: tuple[float, ...] = ()
    limiter_fraction: float = 0.0
    growth_after: float = math.nan
    extra: dict = field(default_factory=dict)

    @property
    def leadlag(self) -> LeadLag:
        return leadlag_from_phase(math.radians(self.phase.best_phase), self.f1, self.centering)

    def phase_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dphi_deg", "gain", "De", "nonlinear"])
        for r in self.phase.rows:
            w.writerow([repr(r[0]), repr(r[1]), repr(r[2]), int(r[3])])
        return buf.getvalue()

    def gain_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gain", "De", "nonlinear", "limiter_fraction", "growth_rate"])
        for r in self.gain.rows:
            w.writerow([repr(r[0]), repr(r[1]), int(r[2]), repr(r[3]), repr(r[4])])
        return buf.getvalue()

    def modes_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["f_hz", "De_before", "De_after"])
        for f, b, a in zip(self.mode_frequencies, self.de_before, self.de_after):
            w.writerow([repr(f), repr(b), repr(a)])
        return buf.getvalue()

    def fragment(self) -> str:
        s = self.ssdc
        return ("[ssdc]\n"
                f"center_hz = {s.center_hz!r}\nquality = {s.quality!r}\nt1 = {s.t1!r}\nt2 = {s.t2!r}\n"
                f"gain = {s.gain!r}\nlimit = {s.limit!r}\n")

    def summary(self) -> str:
        ll = self.leadlag
        out = [
            f"SSDC tuning at f1 = {self.f1:.3f} Hz ({self.centering} centering)",
            f"  phase shift   {self.phase.best_phase:+.1f} deg  (a = {ll.a:.4f}, {ll.orientation})",
            f"  T1, T2        {ll.t1:.6f} s, {ll.t2:.6f} s",
            f"  gain at f1    {self.gain.best_gain:+.4f}  (K_SSDC = {self.ssdc.gain:+.6f})",
            f"  limiter       {self.limiter_fraction:.3%} of disturbance-run samples",
        ]
        if math.isfinite(self.growth_after):
            out.append(f"  growth rate   {self.growth_after:+.4f} 1/s at f1 after the disturbance")
        if self.mode_frequencies:
            out.append("  mode      f_hz     De before   De after")
            for i, (f, b, a) in enumerate(zip(self.mode_frequencies, self.de_before, self.de_after)):
                out.append(f"  {i + 1:4d} {f:9.3f} {b:+11.4f} {a:+10.4f}")
        return "\n".join(out) + "\n"


def tune_ssdc(scenario: en.Scenario, f1: float, mode_frequencies=(), *, gain_fixed: float = 0.1,
              centering: str = "classic", jobs: int = 1, plan: sc_mod.ScanPlan | None = None) -> TuneReport:
    """Phase sweep, gain sweep, then before/after De at every mode."""
    post = scenario.after_events()
    evaluate = ScanEvaluator(post, f1, plan)
    ph = tune_phase(scenario, f1, gain_fixed, centering=centering, evaluate=evaluate, jobs=jobs)
    gs = tune_gain(scenario, f1, ph.best_phase, sign=ph.best_gain_sign, centering=centering,
                   evaluate=evaluate, jobs=jobs)
    best = ssdc_for(scenario.ssdc, ph.best_phase, f1, gs.best_gain, centering)
    row = next(r for r in gs.rows if r[0] == gs.best_gain)
    rep = TuneReport(f1, centering, ph, gs, best, limiter_fraction=row[3], growth_after=row[4])
    if mode_frequencies:
        freqs = tuple(float(f) for f in mode_frequencies)
        p = replace(plan or sc_mod.ScanPlan(freqs), frequencies=freqs, variant="restart")
        before = sc_mod.electrical_damping_curve(post.with_(ssdc=None), p, jobs=jobs)
        after = sc_mod.electrical_damping_curve(post.with_(ssdc=best), p, jobs=jobs)
        rep.mode_frequencies = freqs
        rep.de_before = tuple(float(x) for x in before.De)
        rep.de_after = tuple(float(x) for x in after.De)
    return rep
