"""
The short-circuit step: multi-mass against single-mass
======================================================

The grid loses 200 MVA of short-circuit power at t = 2 s.  With the full
shaft model the 14 Hz torsional mode slowly grows; with the shaft lumped
into one inertia there is no torsional mode to excite and the same event
is harmless.  This is why a rigid-rotor model cannot answer the question.
"""

# %%
import numpy as np

from sstikit import engine, scenario_io, shaft
from sstikit.errors import NoComponentError

sc = scenario_io.bundled().scenario
f1 = shaft.modal_inertia_and_damping(sc.shaft).frequency_hz[0]

# %%
# 30 s is needed: the event also kicks a ~1 Hz electromechanical swing
# (there is no AVR or PSS in the model) that hides the torsional mode for
# about ten seconds.
multi = engine.run(sc.with_(duration=30.0))
single = engine.run(sc.with_(duration=12.0, single_mass=True))

for name, tr in (("multi-mass", multi), ("single mass", single)):
    try:
        g = engine.growth_rate(tr["dw"], tr.sample_interval, f1, (4.0, tr.time[-1]))
    except NoComponentError:
        print(f"{name:12s} nothing left at {f1:.2f} Hz")
        continue
    print(f"{name:12s} growth at {f1:.2f} Hz: {g:+.4f} 1/s")

# %%
# Where the energy sits over the last ten seconds
tr = multi
sel = tr.time > 20.0
x = tr["dw"][sel] - tr["dw"][sel].mean()
spec = np.abs(np.fft.rfft(x * np.hanning(x.size)))
freqs = np.fft.rfftfreq(x.size, tr.sample_interval)
print("spectral peak of the rotor speed, 20-30 s:", round(float(freqs[spec.argmax()]), 2), "Hz")

# %%
# Figures need matplotlib (pip install sstikit[plot])
try:
    multi.to_svg("ssc_step_multimass.svg", ("dw", "te"))
    print("wrote ssc_step_multimass.svg")
except ImportError:
    pass
