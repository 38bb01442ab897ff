"""Unit interaction factor screening.

    UIF_i = (S_HVDC / S_Gen) * (1 - S_sc-i / S_sc)^2

S_sc is the short-circuit power at the converter bus with every source in
service and S_sc-i the same with unit i disconnected.
"""

from __future__ import annotations

from dataclasses import dataclass

from scipy import optimize

from .engine import Scenario
from .errors import InvalidModelError, TopologyError

BUSES = ("T", "N", "H")  # machine terminal, network node, converter PCC
SOURCES = ("grid", "machine")


@dataclass(frozen=True)
class UIFInputs:
    s_hvdc: float
    s_gen: float
    s_sc: float
    s_sc_minus_i: float
    threshold: float = 0.1

    def __post_init__(self):
        for name in ("s_hvdc", "s_gen", "s_sc", "s_sc_minus_i"):
            if not getattr(self, name) > 0:
                raise InvalidModelError(f"uif.{name}: must be > 0")
        if self.s_sc_minus_i > self.s_sc * (1 + 1e-12):
            raise InvalidModelError("uif.s_sc_minus_i: must not exceed s_sc")


@dataclass(frozen=True)
class UIFResult:
    value: float
    risk: bool
    inputs: UIFInputs

    def report(self) -> str:
        i = self.inputs
        lines = [
            "Unit interaction factor screening",
            f"  S_HVDC          {i.s_hvdc:10.1f} MVA",
            f"  S_Gen           {i.s_gen:10.1f} MVA",
            f"  S_sc            {i.s_sc:10.1f} MVA (all units in service)",
            f"  S_sc-i          {i.s_sc_minus_i:10.1f} MVA (unit disconnected)",
            f"  UIF             {self.value:10.4f}",
            f"  threshold       {i.threshold:10.4f}",
            f"  verdict         {'RISK: detailed study required' if self.risk else 'no significant interaction'}",
            "",
            "Note: the 0.1 threshold is an empirical value established for line-commutated",
            "converters. Its relevance for voltage-source converters is not established; a",
            "value below it does not rule out torsional interaction with VSC controls.",
        ]
        return "\n".join(lines) + "\n"


def uif(inputs: UIFInputs) -> UIFResult:
    v = inputs.s_hvdc / inputs.s_gen * (1.0 - inputs.s_sc_minus_i / inputs.s_sc) ** 2
    return UIFResult(v, v > inputs.threshold, inputs)


def _par(a: complex, b: complex) -> complex:
    return a * b / (a + b)


def short_circuit_power(sc: Scenario, bus: str = "H", exclude=(), include_filter: bool = True) -> float:
    """Three-phase short-circuit power (MVA) at ``bus`` from a Thevenin
    reduction of the radial network.  The machine feeds through its
    subtransient reactance."""
    if bus not in BUSES:
        raise InvalidModelError(f"bus: one of {', '.join(BUSES)}")
    exclude = set(exclude)
    if exclude - set(SOURCES):
        raise InvalidModelError(f"exclude: sources are {', '.join(SOURCES)}")
    z_gen_src = complex(sc.machine.ra, sc.machine.xpp_d)
    z_tn = sc.generator_branch() if include_filter else \
        complex(sc.transformer.r_pu, sc.transformer.x_pu) + sc.gen_line.impedance_ohm() / sc.z_base
    z_nh = sc.hvdc_branch()
    z_grid = sc.grid_impedance()
    grid_in = "grid" not in exclude
    gen_in = "machine" not in exclude
    if not (grid_in or gen_in):
        raise TopologyError(f"bus {bus} is isolated: no source in service")
    # reduce everything to the network node first
    paths = []
    if grid_in:
        paths.append(z_grid)
    if gen_in and bus != "T":
        paths.append(z_gen_src + z_tn)
    if bus == "T":
        z_n = None
        if grid_in:
            z_n = z_grid
        z = None if z_n is None else z_n + z_tn
        if gen_in:
            z = z_gen_src if z is None else _par(z, z_gen_src)
    else:
        z = paths[0]
        for p in paths[1:]:
            z = _par(z, p)
        if bus == "H":
            z = z + z_nh
    v = 1.0  # nominal voltage in pu
    return v * v * sc.machine.rated_mva / abs(z)


def screen(sc: Scenario, threshold: float = 0.1) -> UIFResult:
    """UIF of the scenario's machine seen from the converter bus; S_sc-i is
    recomputed with the machine excluded."""
    if sc.hvdc is None:
        raise InvalidModelError("screening needs an HVDC converter in the scenario")
    s_all = short_circuit_power(sc, "H")
    s_wo = short_circuit_power(sc, "H", exclude=("machine",))
    return uif(UIFInputs(sc.hvdc.rated_mva, sc.machine.rated_mva, s_all, s_wo, threshold))


def transformer_reactance_for_uif(sc: Scenario, target: float, bracket=(1e-4, 2.0)) -> float:
    """Step-up transformer reactance (pu) that makes the scenario's UIF equal
    ``target``; used to calibrate a network whose S_sc-i is not known."""
    from dataclasses import replace

    def f(x):
        s = sc.with_(transformer=replace(sc.transformer, x_pu=x))
        return screen(s).value - target

    lo, hi = bracket
    if f(lo) * f(hi) > 0:
        raise InvalidModelError(f"no transformer reactance in {bracket} gives UIF = {target}")
    return float(optimize.brentq(f, lo, hi, xtol=1e-12))
