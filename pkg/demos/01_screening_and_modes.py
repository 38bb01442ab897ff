"""
Screening a plant and looking at its shaft
==========================================

A first look at the bundled study case: a 778 MVA turbine-generator close to
a 1000 MVA VSC-HVDC converter.  Before running any transient simulation we
ask two cheap questions: is the converter large against the generator's
share of the network strength, and where are the torsional modes?
"""

# %%
from dataclasses import replace

import numpy as np

from sstikit import scenario_io, screening, shaft

study = scenario_io.bundled()
sc = study.scenario

# %%
# The unit interaction factor compares converter and generator ratings,
# weighted by how much the short-circuit level at the converter drops
# when the generator is out.
res = screening.screen(sc)
print(res.report())

# %%
# Sensitivity: the generator transformer sets how much the unit contributes
# to the converter bus.  A stiffer coupling means a larger interaction factor.
for x in (0.05, 0.08, 0.12, 0.2):
    u = screening.screen(sc.with_(transformer=replace(sc.transformer, x_pu=x))).value
    print(f"x_T = {x:.2f} pu -> UIF {u:.3f}")

# %%
# Reactance that gives exactly 0.44 with the rest of the network unchanged
print("x_T for UIF = 0.44:", round(screening.transformer_reactance_for_uif(sc, 0.44), 4))

# %%
# Torsional modes of the six-mass shaft.  Mechanical damping per mode is
# small for mode 1 and grows quickly with the mode order, because the high
# modes barely move the generator rotor (huge modal inertia).
m = shaft.modal_inertia_and_damping(sc.shaft)
for k in range(m.n_modes):
    print(f"mode {k + 1}: {m.frequency_hz[k]:7.3f} Hz  H_m {m.modal_inertia[k]:10.4g} s  "
          f"D_m {m.mechanical_damping[k]:10.4g} pu")

# %%
# Mode shapes, normalised to the generator mass
shapes = np.real(m.mode_shapes)
with np.printoptions(precision=3):
    print(shapes / shapes[sc.shaft.generator_index - 1])
