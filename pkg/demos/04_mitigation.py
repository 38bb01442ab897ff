"""
Two ways out: a blocking filter or a damping controller
=======================================================

After the short-circuit step mode 1 has negative total damping.  Two fixes
are tried on the post-event network.

A passive notch in series with the generator, tuned so that the rotor
mode seen from the stator side (f_base - f_mode) is blocked.

A supplementary damping controller on the converter: band-pass around the
mode, lead-lag for phase, gain, added to the active-power reference.  The
phase is chosen first at a small gain, then the gain, subject to the
controller output never hitting its limit during the disturbance.
"""

# %%
import numpy as np

from sstikit import plant, scan, scenario_io, shaft, tuner

study = scenario_io.bundled()
sc = study.scenario
post = sc.after_events()
modal = shaft.modal_inertia_and_damping(sc.shaft)
f1 = float(modal.frequency_hz[0])
dm1 = float(modal.mechanical_damping[0])
probe = scan.ScanPlan((f1, 48.0, 52.0))

base = scan.electrical_damping_curve(post, probe)
print(f"post-event, no mitigation: D_t(f1) = {base.de_at(f1) + dm1:+.3f}")

# %%
filt = plant.design_blocking_filter(f1, sc.base_frequency, quality=200.0, peak_impedance=3.0)
z = plant.blocking_filter_response(filt, np.array([filt.tuned_hz, sc.base_frequency]))
print(f"notch at {filt.tuned_hz:.2f} Hz, |Z(50 Hz)| / |Z(peak)| = {abs(z[1]) / abs(z[0]):.2%}")

with_f = scan.electrical_damping_curve(post.with_(filter=filt), probe)
print(f"with the notch: D_t(f1) = {with_f.de_at(f1) + dm1:+.3f}")
for f in (48.0, 52.0):
    print(f"  De at {f:g} Hz: {base.de_at(f):+.4f} -> {with_f.de_at(f):+.4f}")

# %%
# Phase sweep on a coarse grid (the CLI uses -80..80 deg plus refinement)
ph = tuner.tune_phase(sc, f1, 0.1, grid=(-80, -60, -40, 0, 40), centering="geometric")
print(f"best phase {ph.best_phase:+.0f} deg, sign {ph.best_gain_sign:+.0f}, De {ph.best_de:+.3f}")

# %%
gs = tuner.tune_gain(sc, f1, ph.best_phase, grid=(0.5, 2.0, 5.0), sign=ph.best_gain_sign,
                     centering="geometric")
for k, de, nl, frac, g in gs.rows:
    print(f"gain {k:+.2f}: De {de:+.3f}, limiter {frac:.1%}, growth after the event {g:+.3f} 1/s")

best = tuner.ssdc_for(sc.ssdc, ph.best_phase, f1, gs.best_gain, "geometric")
with_c = scan.electrical_damping_curve(post.with_(ssdc=best), scan.ScanPlan(tuple(modal.frequency_hz)))
print("De at each mode with the controller:", np.round(with_c.De, 3))
