"""Command-line entry point.

    sstikit <command> SCENARIO [options]

Exit codes: 0 completed, 2 completed with an unstable verdict (or a trip),
1 error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import engine as en
from . import plant as pl
from . import protection as prot
from . import scan
from . import scenario_io as sio
from . import screening, shaft, tuner
from .errors import SSTIError

EXIT_OK, EXIT_ERROR, EXIT_UNSTABLE = 0, 1, 2
ADJACENT_HZ = (48.0, 49.0, 51.0, 52.0)


# ---------------------------------------------------------------------------
# helpers

class Context:
    def __init__(self, args):
        self.args = args
        self.study = sio.load(args.scenario)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.jobs = args.jobs or os.cpu_count() or 1
        self._modal = None

    @property
    def scenario(self) -> en.Scenario:
        return self.study.scenario

    @property
    def modal(self) -> shaft.ModalResult:
        if self._modal is None:
            if self.scenario.shaft is None:
                raise SSTIError("the scenario has no [shaft] section")
            self._modal = shaft.modal_inertia_and_damping(self.scenario.shaft)
        return self._modal

    def plan(self, freqs=None) -> scan.ScanPlan:
        over = {}
        if getattr(self.args, "variant", None):
            over["variant"] = self.args.variant
        base = self.study.scan
        if freqs is not None:
            base = replace(base, frequencies=tuple(freqs))
        return base.plan(self.modal.frequency_hz if base.frequencies == () else (),
                         self.scenario.base_frequency, **over)

    def write(self, name: str, text: str) -> Path:
        p = self.out / name
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        return p

    def say(self, msg: str = ""):
        print(msg)


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _event_time(sc: en.Scenario) -> float:
    return max([t for t, _ in sc.grid.events] or [0.0])


def _growth(tr: en.SimTrace, sc: en.Scenario, f: float) -> float:
    lo = _event_time(sc) + 1.0
    if tr.diverged:
        return math.inf
    try:
        return en.growth_rate(tr["dw"], tr.sample_interval, f, (lo, tr.time[-1]))
    except SSTIError:
        return -math.inf


# ---------------------------------------------------------------------------
# commands

def cmd_screen(ctx: Context) -> tuple[int, dict]:
    res = screening.screen(ctx.scenario)
    s_all, s_wo = res.inputs.s_sc, res.inputs.s_sc_minus_i
    ctx.write("uif.csv", _rows_csv(["quantity", "value"], [
        ("S_HVDC_MVA", res.inputs.s_hvdc), ("S_Gen_MVA", res.inputs.s_gen), ("S_sc_MVA", s_all),
        ("S_sc_minus_i_MVA", s_wo), ("UIF", res.value), ("threshold", res.inputs.threshold),
        ("risk", int(res.risk))]))
    report = res.report()
    ctx.write("uif_report.txt", report)
    ctx.say(report.rstrip())
    return EXIT_OK, {"uif": res}


def cmd_modal(ctx: Context) -> tuple[int, dict]:
    m = ctx.modal
    ctx.write("modal.csv", m.to_csv())
    ctx.say("mode   f (Hz)    sigma (1/s)     H_m (s)       D_m (pu)")
    for k in range(m.n_modes):
        ctx.say(f"{k + 1:4d} {m.frequency_hz[k]:9.4f} {m.sigma[k]:12.5f} {m.modal_inertia[k]:12.5g} "
                f"{m.mechanical_damping[k]:14.5g}")
    if ctx.args.plot:
        from .plotting import plot_modes
        plot_modes(m, ctx.out / "modal.svg", ctx.scenario.shaft.names)
    return EXIT_OK, {"modal": m}


def _simulate(ctx: Context, sc: en.Scenario, name: str) -> tuple[en.SimTrace, float]:
    tr = en.run(sc)
    tr.to_csv(ctx.out / f"{name}.csv")
    if ctx.args.plot:
        tr.to_svg(ctx.out / f"{name}.svg", ("dw", "te", "w_net"))
    f1 = ctx.modal.frequency_hz[0] if ctx.scenario.shaft is not None else None
    g = _growth(tr, sc, f1) if f1 is not None else math.nan
    return tr, g


def cmd_simulate(ctx: Context) -> tuple[int, dict]:
    a = ctx.args
    sc = ctx.scenario
    if a.single_mass:
        sc = sc.with_(single_mass=True)
    if a.no_events:
        sc = sc.with_(grid=replace(sc.grid, events=()))
    if a.duration:
        sc = sc.with_(duration=a.duration)
    tr, g = _simulate(ctx, sc, a.name)
    ctx.say(f"simulated {tr.time[-1]:.3f} s" + (f" (diverged at {tr.divergence_time:.3f} s)" if tr.diverged else ""))
    if math.isfinite(g) or math.isinf(g):
        ctx.say(f"growth rate at mode 1: {g:+.4f} 1/s")
    return EXIT_OK, {"trace": tr, "growth": g}


def _scan(ctx: Context, sc: en.Scenario, plan: scan.ScanPlan, label: str, journal=None) -> scan.DampingCurve:
    return scan.electrical_damping_curve(sc, plan, jobs=ctx.jobs, journal=journal, label=label)


def cmd_scan(ctx: Context) -> tuple[int, dict]:
    a = ctx.args
    sc = ctx.scenario.after_events() if a.post_event else ctx.scenario
    label = "post-event" if a.post_event else "pre-event"
    plan = ctx.plan(a.frequencies)
    name = a.name or ("scan_post" if a.post_event else "scan_pre")
    curve = _scan(ctx, sc, plan, label, a.journal)
    curve.to_csv(ctx.out / f"{name}.csv")
    if a.plot:
        from .plotting import plot_curves
        plot_curves([curve], ctx.out / f"{name}.svg", ctx.modal.frequency_hz, ctx.modal.mechanical_damping)
    bad = sum(p.nonlinear for p in curve.points)
    ctx.say(f"{label} scan: {len(curve.points)} points ({bad} nonlinear, discarded)")
    return EXIT_OK, {"curve": curve}


def _verdict(ctx: Context, curve: scan.DampingCurve, name: str) -> scan.StabilityVerdict:
    v = scan.stability_verdict(curve, ctx.modal, conservative=ctx.args.conservative)
    ctx.write(f"{name}.csv", v.to_csv())
    ctx.say(f"{name}: {'stable' if v.stable else 'UNSTABLE'}")
    for i, m in enumerate(v.modes):
        ctx.say(f"  mode {i + 1} {m.f:8.3f} Hz  De {m.De:+9.4f}  Dm {m.Dm:12.5g}  Dt {m.Dt:+12.5g}  "
                f"{'stable' if m.stable else 'UNSTABLE'}")
    return v


def cmd_verdict(ctx: Context) -> tuple[int, dict]:
    curve = scan.DampingCurve.from_csv(ctx.args.curve)
    name = ctx.args.name or "verdict"
    v = _verdict(ctx, curve, name)
    return (EXIT_OK if v.stable else EXIT_UNSTABLE), {"verdict": v}


def cmd_filter_design(ctx: Context) -> tuple[int, dict]:
    t = ctx.study.tuning
    m = ctx.modal
    f_mode = float(m.frequency_hz[t.filter_mode - 1])
    fb = ctx.scenario.base_frequency
    filt = pl.design_blocking_filter(f_mode, fb, quality=t.filter_quality, peak_impedance=t.filter_peak_impedance)
    fs = np.round(np.arange(1.0, 2 * fb + 1e-9, 0.5), 6)
    z = pl.blocking_filter_response(filt, fs)
    ctx.write("filter_response.csv", _rows_csv(["f_hz", "abs_z_pu", "angle_deg"],
                                               [(float(f), float(abs(v)), float(np.degrees(np.angle(v))))
                                                for f, v in zip(fs, z)]))
    ctx.write("filter.toml", "[filter]\n" f"tuned_hz = {filt.tuned_hz!r}\nquality = {filt.quality!r}\n"
              f"peak_impedance = {filt.peak_impedance!r}\n")
    ratio = abs(pl.blocking_filter_response(filt, fb)) / filt.peak_impedance
    ctx.say(f"notch tuned at {filt.tuned_hz:.3f} Hz (mode {t.filter_mode} at {f_mode:.3f} Hz), Q = {filt.quality:g}, "
            f"peak {filt.peak_impedance:g} pu; |Z({fb:g} Hz)| = {ratio:.2%} of peak")
    info = {"filter": filt, "ratio50": ratio}
    code = EXIT_OK
    if ctx.args.verify:
        code, more = _verify_filter(ctx, filt, f_mode)
        info.update(more)
    return code, info


def _verify_filter(ctx: Context, filt: pl.BlockingFilter, f_mode: float):
    post = ctx.scenario.after_events()
    k = ctx.study.tuning.filter_mode - 1
    freqs = tuple(sorted({f_mode, *ADJACENT_HZ}))
    plan = ctx.plan(freqs)
    without = _scan(ctx, post, plan, "post-event")
    with_f = _scan(ctx, post.with_(filter=filt), plan, "post-event + filter")
    rows = []
    for p, q in zip(without.points, with_f.points):
        rel = abs(q.De - p.De) / max(abs(p.De), 1e-12)
        rows.append((p.f, p.De, q.De, rel))
    ctx.write("filter_check.csv", _rows_csv(["f_hz", "De_without", "De_with", "rel_change"], rows))
    dm = float(ctx.modal.mechanical_damping[k])
    de_mode = with_f.de_at(f_mode)
    dt = de_mode + (0.0 if ctx.args.conservative else dm)
    worst = max(r[3] for r in rows if r[0] in ADJACENT_HZ)
    ctx.say(f"with filter: De({f_mode:.3f} Hz) = {de_mode:+.4f}, Dt = {dt:+.4f}; "
            f"largest change at 48-52 Hz points {worst:.2%}")
    return (EXIT_OK if dt > 0 else EXIT_UNSTABLE), {"filter_dt": dt, "filter_worst": worst, "filter_rows": rows}


def cmd_tune_ssdc(ctx: Context) -> tuple[int, dict]:
    t = ctx.study.tuning
    m = ctx.modal
    f1 = float(m.frequency_hz[t.mode - 1])
    sc = ctx.scenario
    base_plan = ctx.plan((f1,))
    post = sc.after_events()
    evaluate = tuner.ScanEvaluator(post, f1, base_plan)
    ph = tuner.tune_phase(sc, f1, t.gain_fixed, list(t.phase_grid) or None, centering=t.centering,
                          evaluate=evaluate, jobs=ctx.jobs)
    gs = tuner.tune_gain(sc, f1, ph.best_phase, list(t.gain_grid) or None, sign=ph.best_gain_sign,
                         centering=t.centering, evaluate=evaluate, jobs=ctx.jobs)
    best = tuner.ssdc_for(sc.ssdc, ph.best_phase, f1, gs.best_gain, t.centering)
    row = next(r for r in gs.rows if r[0] == gs.best_gain)
    rep = tuner.TuneReport(f1, t.centering, ph, gs, best, limiter_fraction=row[3], growth_after=row[4])
    freqs = tuple(float(f) for f in m.frequency_hz)
    plan = ctx.plan(freqs)
    before = _scan(ctx, post.with_(ssdc=None), plan, "post-event")
    after = _scan(ctx, post.with_(ssdc=best), plan, "post-event + SSDC")
    rep.mode_frequencies = freqs
    rep.de_before = tuple(float(x) for x in before.De)
    rep.de_after = tuple(float(x) for x in after.De)
    ctx.write("tune_phase.csv", rep.phase_csv())
    ctx.write("tune_gain.csv", rep.gain_csv())
    ctx.write("tune_modes.csv", rep.modes_csv())
    ctx.write("ssdc.toml", rep.fragment())
    ctx.write("tune_summary.txt", rep.summary())
    ctx.say(rep.summary().rstrip())
    k = t.mode - 1
    dt = rep.de_after[k] + (0.0 if ctx.args.conservative else float(m.mechanical_damping[k]))
    ok = rep.growth_after < 0 and dt > 0
    return (EXIT_OK if ok else EXIT_UNSTABLE), {"tune": rep, "tune_dt": dt}


def _protection(ctx: Context, tr: en.SimTrace, name: str) -> tuple[int, list]:
    p = ctx.study.protection
    m = ctx.modal if ctx.scenario.shaft is not None else None
    if p.channel not in tr.channels:
        raise SSTIError(f"protection.channel: trace has no channel {p.channel!r}")
    rows, results = [], []
    for mode in p.modes:
        curve = p.curve(m, mode)
        f = curve.mode_hz
        env = prot.oscillation_magnitude(tr[p.channel], f, tr.sample_interval)
        res = prot.evaluate_trip(env, tr.sample_interval, curve, float(tr.time[0]))
        results.append((mode, f, res))
        for e in res.events:
            rows.append((mode, f, e.time, e.kind, e.envelope, e.allowance))
        ctx.say(f"{name}: mode {mode} ({f:.3f} Hz) on {p.channel}: {res.outcome}"
                + (f" at {res.trip_time:.4f} s" if res.tripped else "")
                + f", peak envelope {float(env.max()):.4g} pu")
        if ctx.args.plot:
            from .plotting import plot_protection
            plot_protection(tr.time, env, curve, res, ctx.out / f"{name}_mode{mode}.svg")
    ctx.write(f"{name}.csv", _rows_csv(["mode", "f_hz", "time", "decision", "envelope", "allowance"], rows))
    code = EXIT_UNSTABLE if any(r.tripped for _, _, r in results) else EXIT_OK
    return code, results


def cmd_protection_check(ctx: Context) -> tuple[int, dict]:
    if ctx.args.trace:
        tr = en.SimTrace.from_csv(ctx.args.trace)
    else:
        tr = en.run(ctx.scenario)
    code, res = _protection(ctx, tr, ctx.args.name or "protection")
    return code, {"protection": res}


def cmd_all(ctx: Context) -> tuple[int, dict]:
    """Screen, modal, simulate (multi and single mass), pre/post scans and
    verdicts, blocking filter, SSDC tuning, protection; writes report.md.
    Exit 2 when the post-event verdict of the unmitigated system is unstable."""
    a = ctx.args
    rep = ["# Torsional interaction study: " + ctx.scenario.name, ""]
    if ctx.scenario.description:
        rep += [ctx.scenario.description, ""]

    ctx.say("== screening")
    _, r = cmd_screen(ctx)
    u = r["uif"]
    rep += ["## Screening", "", f"- S_sc = {u.inputs.s_sc:.1f} MVA, S_sc-i = {u.inputs.s_sc_minus_i:.1f} MVA",
            f"- UIF = {u.value:.4f} (threshold {u.inputs.threshold:g}): "
            + ("risk, detailed study required" if u.risk else "no significant interaction"),
            "- the threshold comes from LCC practice; for VSC it is indicative only", ""]

    ctx.say("== modal analysis")
    _, r = cmd_modal(ctx)
    m = r["modal"]
    rep += ["## Shaft modes", "", "| mode | f (Hz) | H_m (s) | D_m (pu) |", "|---|---|---|---|"]
    rep += [f"| {k + 1} | {m.frequency_hz[k]:.3f} | {m.modal_inertia[k]:.4g} | {m.mechanical_damping[k]:.4g} |"
            for k in range(m.n_modes)]
    rep.append("")

    ctx.say("== time-domain runs")
    f1 = float(m.frequency_hz[0])
    tr_multi, g_multi = _simulate(ctx, ctx.scenario, "trace_multimass")
    _, g_single = _simulate(ctx, ctx.scenario.with_(single_mass=True), "trace_singlemass")
    ctx.say(f"growth at {f1:.3f} Hz: multi-mass {g_multi:+.4f} 1/s, single mass {g_single:+.4f} 1/s")
    rep += ["## S_sc step", "", f"Growth rate of the {f1:.2f} Hz component after the event:",
            f"- multi-mass shaft: {g_multi:+.4f} 1/s" + (" (diverged)" if tr_multi.diverged else ""),
            f"- single-mass rotor: {g_single:+.4f} 1/s", ""]

    ctx.say("== damping scans")
    plan = ctx.plan()
    pre = _scan(ctx, ctx.scenario, plan, "pre-event")
    post = _scan(ctx, ctx.scenario.after_events(), plan, "post-event")
    pre.to_csv(ctx.out / "scan_pre.csv")
    post.to_csv(ctx.out / "scan_post.csv")
    v_pre = _verdict(ctx, pre, "verdict_pre")
    v_post = _verdict(ctx, post, "verdict_post")
    if a.plot:
        from .plotting import plot_curves
        plot_curves([pre, post], ctx.out / "scans.svg", m.frequency_hz, m.mechanical_damping)
    rep += ["## Electrical damping", "", f"{len(plan.frequencies)} scan points, variant {plan.variant}"
            + (", mechanical damping ignored (conservative)" if a.conservative else ""), "",
            "| mode | f (Hz) | De pre | Dt pre | De post | Dt post |", "|---|---|---|---|---|---|"]
    for k, (p, q) in enumerate(zip(v_pre.modes, v_post.modes)):
        rep.append(f"| {k + 1} | {p.f:.3f} | {p.De:+.4f} | {p.Dt:+.4g} | {q.De:+.4f} | {q.Dt:+.4g} |")
    rep += ["", f"Verdict before the event: {'stable' if v_pre.stable else 'UNSTABLE'}; "
            f"after: {'stable' if v_post.stable else 'UNSTABLE'}", ""]

    ctx.say("== blocking filter")
    a.verify = True
    _, r = cmd_filter_design(ctx)
    filt = r["filter"]
    rep += ["## Blocking filter", "",
            f"- notch at {filt.tuned_hz:.3f} Hz, Q {filt.quality:g}, peak {filt.peak_impedance:g} pu; "
            f"|Z(50 Hz)| = {r['ratio50']:.2%} of peak",
            f"- post-event total damping of mode {ctx.study.tuning.filter_mode} with the filter: {r['filter_dt']:+.4f}",
            f"- largest De change at 48/49/51/52 Hz: {r['filter_worst']:.2%}", ""]

    ctx.say("== SSDC tuning")
    _, r = cmd_tune_ssdc(ctx)
    t = r["tune"]
    rep += ["## SSDC", "", "```", t.summary().rstrip(), "```", "",
            f"Post-event total damping of mode {ctx.study.tuning.mode} with the SSDC: {r['tune_dt']:+.4f}", ""]

    ctx.say("== protection")
    _, res_unmitigated = _protection(ctx, tr_multi, "protection_multimass")
    tuned = ctx.scenario.with_(ssdc=t.ssdc)
    tr_tuned, g_tuned = _simulate(ctx, tuned, "trace_ssdc")
    _, res_tuned = _protection(ctx, tr_tuned, "protection_ssdc")
    rep += ["## Protection", "", f"Monitored channel {ctx.study.protection.channel}:"]
    for label, res in (("without mitigation", res_unmitigated), ("with SSDC", res_tuned)):
        for mode, f, rr in res:
            rep.append(f"- {label}, mode {mode} ({f:.2f} Hz): {rr.outcome}"
                       + (f" at {rr.trip_time:.3f} s" if rr.tripped else ""))
    rep += ["", f"Growth rate at mode 1 with the tuned SSDC: {g_tuned:+.4f} 1/s", ""]
    ctx.write("report.md", "\n".join(rep))
    ctx.say(f"report written to {ctx.out / 'report.md'}")
    return (EXIT_OK if v_post.stable else EXIT_UNSTABLE), {}


# ---------------------------------------------------------------------------
# argument parsing

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario file (TOML)")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--plot", action="store_true", help="also write SVG figures")
    common.add_argument("--jobs", type=int, default=0, help="worker processes (default: all cores)")
    common.add_argument("--variant", choices=scan.VARIANTS, help="override the scan variant")
    common.add_argument("--conservative", action="store_true", help="ignore mechanical damping in verdicts")

    p = argparse.ArgumentParser(prog="sstikit", description="Subsynchronous torsional interaction studies.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("screen", parents=[common], help="UIF screening")
    sub.add_parser("modal", parents=[common], help="shaft modal analysis")
    s = sub.add_parser("simulate", parents=[common], help="time-domain run")
    s.add_argument("--single-mass", action="store_true")
    s.add_argument("--no-events", action="store_true")
    s.add_argument("--duration", type=float)
    s.add_argument("--name", default="trace")
    s = sub.add_parser("scan", parents=[common], help="electrical damping scan")
    s.add_argument("--post-event", action="store_true", help="scan the network after the S_sc events")
    s.add_argument("--frequencies", type=float, nargs="+")
    s.add_argument("--journal", help="checkpoint file for resumable scans")
    s.add_argument("--name")
    s = sub.add_parser("verdict", parents=[common], help="stability verdict from a scan CSV")
    s.add_argument("--curve", required=True)
    s.add_argument("--name")
    s = sub.add_parser("filter-design", parents=[common], help="blocking filter for a torsional mode")
    s.add_argument("--verify", action="store_true", help="check the filter with post-event scans")
    sub.add_parser("tune-ssdc", parents=[common], help="SSDC phase and gain tuning")
    s = sub.add_parser("protection-check", parents=[common], help="SSO detection on a trace")
    s.add_argument("--trace", help="SimTrace CSV (default: simulate the scenario)")
    s.add_argument("--name")
    sub.add_parser("all", parents=[common], help="full workflow with a consolidated report")
    return p


COMMANDS = {
    "screen": cmd_screen, "modal": cmd_modal, "simulate": cmd_simulate, "scan": cmd_scan,
    "verdict": cmd_verdict, "filter-design": cmd_filter_design, "tune-ssdc": cmd_tune_ssdc,
    "protection-check": cmd_protection_check, "all": cmd_all,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.jobs < 0:
        print("error: --jobs must be >= 0", file=sys.stderr)
        return EXIT_ERROR
    try:
        ctx = Context(args)
        code, _ = COMMANDS[args.command](ctx)
    except (SSTIError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return code


if __name__ == "__main__":
    raise SystemExit(main())
