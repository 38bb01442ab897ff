"""Electrical damping by torque-perturbation frequency scans.

A small sinusoidal torque is added on the generator mass; after the
transient has settled, the electrical torque and speed responses are
projected on the injected frequency and

    De(f) = |dTe|/|dw| cos(phi_Te - phi_w),   Ke(f) = |dTe|/|dw| sin(...)

The stability criterion compares De with the modal mechanical damping:
the mode is stable when De(f_i) + D_mi > 0.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import engine as en
from .errors import CoverageError, InvalidModelError, InvalidWindowError, SettleError
from .shaft import ModalResult

VARIANTS = ("restart", "progressive", "multitone")


@dataclass(frozen=True)
class ScanPlan:
    frequencies: tuple[float, ...]
    amplitude: float = 1e-3
    settle_periods: int = 10
    measure_periods: int = 20
    variant: str = "restart"
    tones_per_batch: int = 3
    min_settle_s: float = 3.0  # floor so slow electrical modes die out
    preroll_s: float = 0.2
    # consecutive-window agreement required on Te/w, and the speed left after
    # removing the tones must be small against them; settle time doubles
    # until both hold (restart and multitone only)
    settle_tol: float = 2e-3
    resid_tol: float = 1e-3
    max_settle_s: float = 48.0
    lumped_rotor: bool = True
    base_frequency: float = 50.0

    def __post_init__(self):
        fs = tuple(float(f) for f in self.frequencies)
        object.__setattr__(self, "frequencies", fs)
        if not fs:
            raise InvalidModelError("scan.frequencies: empty")
        # torsional modes may sit above the base frequency (up to ~60 Hz)
        if any(not 0 < f < 2 * self.base_frequency for f in fs):
            raise InvalidModelError("scan.frequencies: must lie in (0, 2*base_frequency)")
        if len(set(round(f, 9) for f in fs)) != len(fs):
            raise InvalidModelError("scan.frequencies: must be distinct")
        if self.variant not in VARIANTS:
            raise InvalidModelError(f"scan.variant: one of {', '.join(VARIANTS)}")
        if self.amplitude <= 0 or self.amplitude > 0.05:
            raise InvalidModelError("scan.amplitude: must lie in (0, 0.05] pu")
        if self.settle_periods < 1 or self.measure_periods < 1:
            raise InvalidModelError("scan: settle_periods and measure_periods must be >= 1")
        if self.tones_per_batch < 1:
            raise InvalidModelError("scan.tones_per_batch: must be >= 1")
        if self.settle_tol <= 0 or self.resid_tol <= 0 or self.max_settle_s < self.min_settle_s:
            raise InvalidModelError("scan: settle_tol, resid_tol must be > 0 and max_settle_s >= min_settle_s")

    def settle_time(self, f: float) -> float:
        return max(self.settle_periods / f, self.min_settle_s)

    def measure_time(self, f: float) -> float:
        return self.measure_periods / f


def default_grid(mode_hz=(), coarse=(1.0, 59.0), step=1.0, refine=1.0, refine_step=0.1) -> tuple[float, ...]:
    """Coarse 1 Hz grid plus a fine grid around each mode frequency."""
    pts = set(np.round(np.arange(coarse[0], coarse[1] + 1e-9, step), 6))
    for f in mode_hz:
        n = int(round(refine / refine_step))
        pts.update(np.round(f + refine_step * np.arange(-n, n + 1), 6))
    return tuple(float(p) for p in sorted(pts) if p > 0)


@dataclass(frozen=True)
class DampingPoint:
    f: float
    De: float
    Ke: float
    amp_te: float
    amp_w: float
    phase_te: float
    phase_w: float
    nonlinear: bool = False
    variant: str = "restart"
    window: tuple[float, float] = (0.0, 0.0)

    @classmethod
    def from_phasors(cls, f, te: complex, w: complex, **kw) -> DampingPoint:
        a_te, a_w = abs(te), abs(w)
        p_te, p_w = math.atan2(te.imag, te.real), math.atan2(w.imag, w.real)
        g = a_te / a_w if a_w > 0 else math.nan
        return cls(float(f), float(g * math.cos(p_te - p_w)), float(g * math.sin(p_te - p_w)), float(a_te),
                   float(a_w), float(p_te), float(p_w), **kw)


@dataclass
class DampingCurve:
    points: list[DampingPoint] = field(default_factory=list)
    label: str = ""

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: p.f)

    @property
    def f(self) -> np.ndarray:
        return np.array([p.f for p in self.points])

    @property
    def De(self) -> np.ndarray:
        return np.array([p.De for p in self.points])

    @property
    def Ke(self) -> np.ndarray:
        return np.array([p.Ke for p in self.points])

    def valid(self) -> DampingCurve:
        return DampingCurve([p for p in self.points if not p.nonlinear and math.isfinite(p.De)], self.label)

    def de_at(self, f: float) -> float:
        """Linear interpolation on the linear-regime points."""
        v = self.valid()
        fs = v.f
        if len(fs) == 0 or f < fs[0] - 1e-9 or f > fs[-1] + 1e-9:
            raise CoverageError(f"{f:.3f} Hz is outside the scanned range")
        return float(np.interp(f, fs, v.De))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["f_hz", "De", "Ke", "amp_te", "amp_w", "phase_te", "phase_w", "flags"])
        for p in self.points:
            w.writerow([repr(float(v)) for v in (p.f, p.De, p.Ke, p.amp_te, p.amp_w, p.phase_te, p.phase_w)]
                       + ["nonlinear" if p.nonlinear else ""])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path, label: str = "") -> DampingCurve:
        pts = []
        with open(path, encoding="utf-8") as fh:
            for k, row in enumerate(csv.DictReader(fh)):
                try:
                    vals = [float(row[c]) for c in ("f_hz", "De", "Ke", "amp_te", "amp_w", "phase_te", "phase_w")]
                    flag = row["flags"] == "nonlinear"
                except (KeyError, TypeError, ValueError) as exc:
                    raise InvalidModelError(f"{path}: line {k + 2}: not a damping-curve row ({exc})") from exc
                pts.append(DampingPoint(*vals, nonlinear=flag))
        return cls(pts, label)


# ---------------------------------------------------------------------------
# tone measurement

def _window_indices(n: int, dt: float, t0: float, start: float, length: float) -> slice:
    i0 = int(math.ceil((start - t0) / dt - 1e-9))
    m = int(round(length / dt))
    if i0 < 0 or i0 + m > n:
        raise InvalidWindowError("measurement window exceeds the record")
    return slice(i0, i0 + m)


def fit_tones(x, dt: float, freqs, start: float, length: float, t0: float = 0.0) -> np.ndarray:
    """Joint least-squares phasors (x = Re(X e^{j w t})) of several tones
    plus an offset; ``t`` is absolute time."""
    x = np.asarray(x, dtype=float)
    sl = _window_indices(len(x), dt, t0, start, length)
    t = t0 + dt * np.arange(sl.start, sl.stop)
    cols = [np.ones_like(t)]
    for f in freqs:
        cols += [np.cos(2 * np.pi * f * t), np.sin(2 * np.pi * f * t)]
    basis = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(basis, x[sl], rcond=None)
    return np.array([complex(coef[1 + 2 * k], -coef[2 + 2 * k]) for k in range(len(freqs))])


def measure_tone(x, dt: float, f: float, start: float, periods: float, t0: float = 0.0,
                 others=()) -> tuple[float, float]:
    """Amplitude and phase of the component of ``x`` at ``f`` over a window
    of ``periods`` whole periods (rounded) starting at ``start``.

    With an integer number of periods this is the single-bin DFT; the
    projection is done by least squares so that it stays exact when the
    window is not an integer number of samples.  Phase refers to
    ``A cos(2 pi f t + phase)`` in absolute time.
    """
    n_per = round(periods)
    if n_per < 1:
        raise InvalidWindowError("window must cover at least one period")
    length = n_per / f
    if length < 2 * dt:
        raise InvalidWindowError("window shorter than two samples")
    ph = fit_tones(x, dt, (f,) + tuple(others), start, length, t0)[0]
    return abs(ph), math.atan2(ph.imag, ph.real)


# ---------------------------------------------------------------------------
# scan runs

def _scan_base(sc: en.Scenario, plan: ScanPlan) -> en.Scenario:
    g = replace(sc.grid, events=())
    return sc.with_(grid=g, single_mass=plan.lumped_rotor or sc.single_mass, injections=())


def _check_preroll(tr: en.SimTrace, plan: ScanPlan, t_end: float):
    sel = tr.time <= t_end
    if tr.diverged or np.max(np.abs(tr["dw"][sel])) > 1e-6:
        raise SettleError("plant is not at equilibrium before the injection starts")


def _measure(tr: en.SimTrace, plan: ScanPlan, freqs, start: float, length: float, variant: str):
    if tr.diverged and tr.divergence_time is not None and tr.divergence_time < start + length:
        raise SettleError(f"plant diverged at t={tr.divergence_time:.3f} s during the scan")
    dt = tr.sample_interval
    te = fit_tones(tr["te"], dt, freqs, start, length)
    w = fit_tones(tr["dw"], dt, freqs, start, length)
    sl = _window_indices(len(tr.time), dt, 0.0, start, length)
    nonlin = bool(tr["limiter_active"][sl].max() > 0 or tr["current_limited"][sl].max() > 0
                  or tr["vsc_blocked"][sl].max() > 0)
    return [DampingPoint.from_phasors(f, te[k], w[k], nonlinear=nonlin, variant=variant,
                                      window=(start, start + length))
            for k, f in enumerate(freqs)]


def _residual(tr: en.SimTrace, freqs, start: float, length: float) -> float:
    """RMS of the speed left after removing offset and tones, relative to
    the weakest tone.  A decaying transient shows up here even when it
    leaks into both measurement windows alike."""
    dt = tr.sample_interval
    ph = fit_tones(tr["dw"], dt, freqs, start, length)
    sl = _window_indices(len(tr.time), dt, 0.0, start, length)
    t = tr.time[sl]
    x = tr["dw"][sl].copy()
    for f, p in zip(freqs, ph):
        x -= (p * np.exp(2j * np.pi * f * t)).real
    x -= x.mean()
    return float(np.sqrt(np.mean(x * x)) / max(np.min(np.abs(ph)), 1e-300))


def _run_batch(args) -> list[DampingPoint]:
    sc, plan, freqs = args
    t_on = plan.preroll_s
    settle = max(plan.settle_time(f) for f in freqs)
    length = max(plan.measure_time(f) for f in freqs)
    variant = "restart" if len(freqs) == 1 and plan.variant == "restart" else plan.variant
    while True:
        tones = tuple(en.Tone(f, plan.amplitude, t_on=t_on, ramp=0.5 * settle) for f in freqs)
        start = t_on + settle
        run_sc = sc.with_(injections=tones, duration=start + 2 * length + 2 * sc.dt * sc.decimation)
        tr = en.run(run_sc)
        _check_preroll(tr, plan, t_on)
        first = _measure(tr, plan, freqs, start, length, variant)
        last = _measure(tr, plan, freqs, start + length, length, variant)
        drift = max(_ratio_change(p, q) for p, q in zip(first, last))
        resid = _residual(tr, freqs, start + length, length)
        settled = drift <= plan.settle_tol and resid <= plan.resid_tol
        if any(p.nonlinear for p in first + last):
            # clipped: no small-signal answer to wait for
            return [replace(p, nonlinear=True) for p in last]
        if settled or settle >= plan.max_settle_s:
            break
        settle = min(2 * settle, plan.max_settle_s)
    if not settled:
        raise SettleError(f"response at {', '.join(f'{f:g}' for f in freqs)} Hz still drifting "
                          f"({drift:.2%} between windows, residual {resid:.2%}) after {settle:g} s")
    return last


def _ratio_change(p: DampingPoint, q: DampingPoint) -> float:
    gp = complex(p.De, p.Ke)
    gq = complex(q.De, q.Ke)
    return abs(gp - gq) / max(abs(gq), 1e-12)


def _run_progressive(sc: en.Scenario, plan: ScanPlan, freqs) -> list[DampingPoint]:
    """All tones in one run: each tone fades in while the previous fades out."""
    tones, windows = [], []
    t = plan.preroll_s
    for f in freqs:
        settle = plan.settle_time(f)
        start = t + settle
        length = plan.measure_time(f)
        tones.append(en.Tone(f, plan.amplitude, t_on=t, ramp=0.5 * settle, t_off=start + length,
                             ramp_off=0.5 * settle))
        windows.append((start, length))
        t = start + length
    run_sc = sc.with_(injections=tuple(tones), duration=t + 2 * sc.dt * sc.decimation)
    tr = en.run(run_sc)
    _check_preroll(tr, plan, plan.preroll_s)
    out = []
    for f, (start, length) in zip(freqs, windows):
        out += _measure(tr, plan, (f,), start, length, "progressive")
    return out


def _conflicts(a: float, b: float, tol: float = 0.3) -> bool:
    """True if two tones are too close or (near) harmonics of one another."""
    lo, hi = min(a, b), max(a, b)
    if hi - lo < 2.0:
        return True
    r = hi / lo
    return abs(r - round(r)) * lo < tol


def _interacts(tones, tol: float = 0.3) -> bool:
    for i, a in enumerate(tones):
        for b in tones[i + 1:]:
            if _conflicts(a, b, tol):
                return True
    # x = y + z covers sums and differences alike
    for x in tones:
        for y in tones:
            for z in tones:
                if len({x, y, z}) == 3 and abs(x - (y + z)) < tol:
                    return True
    return False


def make_batches(freqs, size: int) -> list[tuple[float, ...]]:
    """Greedy grouping of tones with no harmonic, sum or difference relation
    inside a batch."""
    srt = sorted(freqs)
    order = srt[::2] + srt[1::2]  # mixes low and high tones
    batches: list[list[float]] = []
    for f in order:
        for b in batches:
            if len(b) < size and not _interacts(b + [f]):
                b.append(f)
                break
        else:
            batches.append([f])
    return [tuple(sorted(b)) for b in batches]


def _fingerprint(sc: en.Scenario, plan: ScanPlan) -> str:
    settings = {k: v for k, v in asdict(plan).items() if k != "frequencies"}
    rep = repr((sc, sorted(settings.items())))
    return hashlib.sha256(rep.encode()).hexdigest()[:16]


def _journal_load(path, key: str) -> dict[float, DampingPoint]:
    done = {}
    if path is None or not os.path.exists(path):
        return done
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("key") != key:
                continue
            p = rec["point"]
            p["window"] = tuple(p["window"])
            done[p["f"]] = DampingPoint(**p)
    return done


def _journal_append(path, key: str, points):
    if path is None:
        return
    with open(path, "a", encoding="utf-8") as fh:
        for p in points:
            fh.write(json.dumps({"key": key, "point": asdict(p)}) + "\n")


def electrical_damping_curve(sc: en.Scenario, plan: ScanPlan, *, jobs: int = 1, journal=None,
                             label: str = "") -> DampingCurve:
    """Scan De(f) over ``plan.frequencies``.

    The scenario's S_sc events are ignored (scans need a steady operating
    point; use ``Scenario.after_events`` for the post-event network).  By
    default the rotor is lumped into a single mass so that the torsional
    modes cannot swamp, or destabilize, the measurement.
    """
    base = _scan_base(sc, plan)
    en.initialize(base)  # fail early on an infeasible operating point
    key = _fingerprint(base, plan)
    done = _journal_load(journal, key)
    todo = [f for f in plan.frequencies if f not in done]
    points = [done[f] for f in plan.frequencies if f in done]
    if todo:
        if plan.variant == "progressive":
            new = _run_progressive(base, plan, todo)
            _journal_append(journal, key, new)
            points += new
        else:
            size = 1 if plan.variant == "restart" else plan.tones_per_batch
            batches = [(f,) for f in todo] if size == 1 else make_batches(todo, size)
            tasks = [(base, plan, b) for b in batches]
            if jobs > 1 and len(tasks) > 1:
                with ProcessPoolExecutor(max_workers=jobs) as ex:
                    for pts in ex.map(_run_batch, tasks):
                        _journal_append(journal, key, pts)
                        points += pts
            else:
                for task in tasks:
                    pts = _run_batch(task)
                    _journal_append(journal, key, pts)
                    points += pts
    return DampingCurve(points, label)


# ---------------------------------------------------------------------------
# verdict

@dataclass(frozen=True)
class ModeVerdict:
    f: float
    De: float
    Dm: float
    Dt: float
    stable: bool


@dataclass(frozen=True)
class StabilityVerdict:
    modes: tuple[ModeVerdict, ...]
    conservative: bool = False

    @property
    def stable(self) -> bool:
        return all(m.stable for m in self.modes)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "f_hz", "De", "Dm", "Dt", "stable"])
        for i, m in enumerate(self.modes):
            w.writerow([i + 1, repr(m.f), repr(m.De), repr(m.Dm), repr(m.Dt), int(m.stable)])
        return buf.getvalue()


def stability_verdict(curve: DampingCurve, modal: ModalResult | None = None, *, frequencies=None,
                      mechanical_damping=None, conservative: bool = False) -> StabilityVerdict:
    """Total damping De(f_i) + D_mi per mode; stable only if strictly positive.

    In conservative mode the mechanical damping is taken as zero.
    """
    if modal is not None:
        freqs, dm = modal.frequency_hz, modal.mechanical_damping
    else:
        freqs, dm = frequencies, mechanical_damping
    if freqs is None or dm is None:
        raise InvalidModelError("stability_verdict: modal data missing")
    modes = []
    for f, d in zip(freqs, dm):
        de = curve.de_at(float(f))
        d_used = 0.0 if conservative else float(d)
        dt = de + d_used
        modes.append(ModeVerdict(float(f), de, d_used, dt, dt > 0))
    return StabilityVerdict(tuple(modes), conservative)
