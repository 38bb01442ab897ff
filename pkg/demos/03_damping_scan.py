"""
Electrical damping before and after the event
=============================================

The complex torque coefficient method: inject a small torque tone on the
generator rotor, measure the electrical torque and speed it produces at the
same frequency, and take the real part of their ratio.  Adding the shaft's
own modal damping gives the total damping of each mode; a negative total
means the mode grows.
"""

# %%
import time
from dataclasses import replace

from sstikit import scan, scenario_io, shaft

study = scenario_io.bundled()
sc = study.scenario
modal = shaft.modal_inertia_and_damping(sc.shaft)

# %%
# A short grid around every mode keeps the demo quick.  The full default
# grid (1 Hz steps plus 0.1 Hz around each mode) is what the CLI uses.
freqs = sorted({round(f + d, 3) for f in modal.frequency_hz for d in (-0.3, 0.0, 0.3)})
plan = replace(study.scan, frequencies=tuple(freqs)).plan(base_frequency=sc.base_frequency)

t0 = time.perf_counter()
pre = scan.electrical_damping_curve(sc, plan, label="S_sc 1550 MVA")
post = scan.electrical_damping_curve(sc.after_events(), plan, label="S_sc 1350 MVA")
print(f"{2 * len(freqs)} scan points in {time.perf_counter() - t0:.0f} s")

# %%
for curve in (pre, post):
    v = scan.stability_verdict(curve, modal)
    print(f"{curve.label}: {'stable' if v.stable else 'UNSTABLE'}")
    for k, m in enumerate(v.modes):
        print(f"  mode {k + 1}  De {m.De:+.3f}  D_t {m.Dt:+.4g}")

# %%
# Ignoring the mechanical damping is the cautious reading when D_m is not
# known well; here it flags every mode with negative electrical damping.
v = scan.stability_verdict(pre, modal, conservative=True)
print("conservative, before the event:", "stable" if v.stable else "UNSTABLE")
