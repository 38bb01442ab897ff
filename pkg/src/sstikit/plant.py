"""Electrical component models: synchronous machine, VSC-HVDC, SSDC, blocking filter.

All quantities are per unit.  Network and machine quantities use the machine
rating as power base and the grid nominal voltage as voltage base; converter
controls work on the converter rating.  Complex phasors live in a frame
rotating at the base frequency (positive-sequence dq).

The numerical cores are compiled with numba and shared with the simulation
engine; the Python wrappers below expose them one step at a time.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .errors import InvalidModelError, NumericError


# ---------------------------------------------------------------------------
# parameter types

@dataclass(frozen=True)
class MachineElec:
    """Round-rotor machine, subtransient model with one d-axis field winding,
    one d-axis and one q-axis damper.  ``xpp_q`` must equal ``xpp_d``: the
    machine is interfaced to the network as an emf behind a single
    subtransient reactance.
    """

    rated_mva: float = 778.0
    rated_kv: float = 20.0
    xd: float = 2.0
    xq: float = 1.9
    xp_d: float = 0.3
    xpp_d: float = 0.2
    xpp_q: float = 0.2
    tp_d0: float = 6.0
    tpp_d0: float = 0.03
    tpp_q0: float = 0.07
    ra: float = 0.002
    p_mw: float = 700.0  # operating point
    v_terminal: float = 1.0

    def __post_init__(self):
        if not (self.xd >= self.xp_d >= self.xpp_d > 0):
            raise InvalidModelError("machine: require xd >= xp_d >= xpp_d > 0")
        if not self.xq >= self.xpp_q > 0:
            raise InvalidModelError("machine: require xq >= xpp_q > 0")
        if abs(self.xpp_q - self.xpp_d) > 1e-12:
            raise InvalidModelError("machine.xpp_q: must equal xpp_d (no subtransient saliency)")
        for name in ("tp_d0", "tpp_d0", "tpp_q0", "rated_mva", "rated_kv", "v_terminal"):
            if getattr(self, name) <= 0:
                raise InvalidModelError(f"machine.{name}: must be > 0")
        if self.ra < 0:
            raise InvalidModelError("machine.ra: must be >= 0")


@dataclass(frozen=True)
class GridEquivalent:
    """Thevenin source at the network bus; S_sc steps are scheduled events."""

    nominal_kv: float = 400.0
    ssc_mva: float = 1550.0
    x_over_r: float = 10.0
    emf: float = 1.0
    events: tuple[tuple[float, float], ...] = ()  # (time s, delta S_sc MVA)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(tuple(map(float, e)) for e in self.events))
        if self.nominal_kv <= 0 or self.x_over_r <= 0 or self.emf <= 0:
            raise InvalidModelError("grid: nominal_kv, x_over_r and emf must be > 0")
        level = self.ssc_mva
        if level <= 0:
            raise InvalidModelError("grid.ssc_mva: must be > 0")
        for t, ds in sorted(self.events):
            level += ds
            if level <= 0:
                raise InvalidModelError(f"grid.events: S_sc becomes {level:g} MVA at t={t:g} s")

    def levels(self) -> list[tuple[float, float]]:
        """Piecewise-constant S_sc as (start time, MVA)."""
        out = [(0.0, self.ssc_mva)]
        for t, ds in sorted(self.events):
            out.append((t, out[-1][1] + ds))
        return out

    def final_ssc(self) -> float:
        return self.levels()[-1][1]


@dataclass(frozen=True)
class Line:
    r_ohm_per_km: float = 0.027
    x_ohm_per_km: float = 0.27  # at base frequency
    length_km: float = 10.0

    def __post_init__(self):
        for name in ("r_ohm_per_km", "x_ohm_per_km", "length_km"):
            if getattr(self, name) < 0:
                raise InvalidModelError(f"line.{name}: must be >= 0")

    def impedance_ohm(self) -> complex:
        return complex(self.r_ohm_per_km, self.x_ohm_per_km) * self.length_km


@dataclass(frozen=True)
class Transformer:
    x_pu: float = 0.08  # machine base
    r_pu: float = 0.0

    def __post_init__(self):
        if self.x_pu <= 0 or self.r_pu < 0:
            raise InvalidModelError("transformer: x_pu must be > 0 and r_pu >= 0")


@dataclass(frozen=True)
class HvdcConverter:
    """Averaged VSC with SRF-PLL, PI power loops and a first-order current loop.

    ``p_ref`` follows the injection convention: negative values draw power
    from the AC network (rectifier).
    """

    rated_mva: float = 1000.0
    p_ref: float = -0.9
    q_ref: float = 0.0
    pll_kp: float = 0.0672
    pll_ki: float = 18.09
    current_bandwidth: float = 628.3  # rad/s
    power_kp: float = 0.05
    power_ki: float = 50.0
    q_kp: float = 0.5
    q_ki: float = 20.0
    current_limit: float = 1.1
    voltage_filter_tau: float = 5e-4
    blocking_voltage: float = 0.2

    def __post_init__(self):
        if self.current_limit < 1.0:
            raise InvalidModelError("hvdc.current_limit: must be >= 1.0 pu")
        if self.rated_mva <= 0 or self.current_bandwidth <= 0 or self.voltage_filter_tau <= 0:
            raise InvalidModelError("hvdc: rated_mva, current_bandwidth, voltage_filter_tau must be > 0")
        if self.pll_kp <= 0 or self.pll_ki <= 0:
            raise InvalidModelError("hvdc: PLL gains must be > 0")
        if self.pll_bandwidth() >= self.current_bandwidth:
            raise InvalidModelError("hvdc: PLL bandwidth must stay below the current-loop bandwidth")
        if abs(self.p_ref) > self.current_limit or abs(self.q_ref) > self.current_limit:
            raise InvalidModelError("hvdc: setpoints exceed the current limit")

    def pll_bandwidth(self, base_frequency: float = 50.0) -> float:
        """Natural frequency of the locked PLL at 1 pu voltage (rad/s)."""
        return math.sqrt(2 * math.pi * base_frequency * self.pll_ki)

    @staticmethod
    def pll_gains(natural_hz: float, damping: float, base_frequency: float = 50.0) -> tuple[float, float]:
        ws = 2 * math.pi * base_frequency
        wn = 2 * math.pi * natural_hz
        return 2 * damping * wn / ws, wn * wn / ws


@dataclass(frozen=True)
class SSDCParams:
    """Narrow-band SSDC: band-pass -> lead-lag -> gain -> limiter."""

    center_hz: float = 14.07
    quality: float = 50.0
    t1: float = 0.01131
    t2: float = 0.01131
    gain: float = 0.0
    limit: float = 0.05

    def __post_init__(self):
        if self.t1 <= 0 or self.t2 <= 0:
            raise InvalidModelError("ssdc: t1 and t2 must be > 0")
        if self.limit <= 0:
            raise InvalidModelError("ssdc.limit: must be > 0")
        if self.quality <= 0 or self.center_hz <= 0:
            raise InvalidModelError("ssdc: quality and center_hz must be > 0")


@dataclass(frozen=True)
class BlockingFilter:
    """Parallel-RLC notch in series with the generator, on the low-voltage
    side of the step-up transformer."""

    tuned_hz: float = 35.93
    quality: float = 200.0
    peak_impedance: float = 3.0  # pu, machine base
    base_frequency: float = 50.0

    def __post_init__(self):
        if not 0 < self.tuned_hz < self.base_frequency:
            raise InvalidModelError("filter.tuned_hz: must lie in (0, base_frequency)")
        if self.quality <= 0 or self.peak_impedance <= 0:
            raise InvalidModelError("filter: quality and peak_impedance must be > 0")

    def reactances(self) -> tuple[float, float]:
        """Inductor reactance and capacitor susceptance at base frequency."""
        ratio = self.base_frequency / self.tuned_hz
        x_l = self.peak_impedance * ratio / self.quality
        b_c = self.quality * ratio / self.peak_impedance
        return x_l, b_c


def blocking_filter_response(filt: BlockingFilter, f) -> complex | np.ndarray:
    """Impedance of the notch at frequency ``f`` (Hz); negative f allowed."""
    f = np.asarray(f, dtype=float)
    x_l, b_c = filt.reactances()
    scale = np.where(f == 0, 1.0, f / filt.base_frequency)
    y = 1.0 / filt.peak_impedance + 1j * b_c * scale + 1.0 / (1j * x_l * scale)
    z = np.where(f == 0, 0j, 1.0 / y)
    return complex(z) if z.ndim == 0 else z


def design_blocking_filter(mode_hz: float, base_frequency: float = 50.0, *,
                           quality: float = 200.0, peak_impedance: float = 3.0) -> BlockingFilter:
    """Notch that blocks the stator current induced by a torsional mode.

    A shaft oscillation at ``mode_hz`` modulates the stator currents at
    ``base - mode`` and ``base + mode``; the subsynchronous one is blocked.
    """
    if not 0 < mode_hz < base_frequency:
        raise InvalidModelError("mode frequency must lie in (0, base_frequency)")
    return BlockingFilter(tuned_hz=base_frequency - mode_hz, quality=quality,
                          peak_impedance=peak_impedance, base_frequency=base_frequency)


# ---------------------------------------------------------------------------
# compiled cores.  Parameter and state vectors use the index layouts below.

MP_XD, MP_XQ, MP_XDP, MP_XPP, MP_TD0P, MP_TD0PP, MP_TQ0PP, MP_RA, MP_EFD = range(9)
N_MP = 9
MS_EQP, MS_EQPP, MS_EDPP = range(3)

VP_KP_PLL, VP_KI_PLL, VP_ALPHA, VP_KP_P, VP_KI_P, VP_KP_Q, VP_KI_Q, VP_IMAX, VP_TAU_V, \
    VP_KBASE, VP_WS, VP_VBLOCK = range(12)
N_VP = 12
(VS_VM_RE, VS_VM_IM, VS_TH, VS_XPLL, VS_DW, VS_ERR, VS_XP, VS_XQ, VS_EP, VS_EQ,
 VS_IC_RE, VS_IC_IM, VS_IR_RE, VS_IR_IM, VS_BLOCKED, VS_LIMITED) = range(16)
N_VS = 16

SP_B0, SP_B2, SP_A1, SP_A2, SP_L0, SP_L1, SP_LA, SP_K, SP_LIM = range(9)
N_SP = 9
SS_S1, SS_S2, SS_L = range(3)
N_SS = 3


def machine_params(m: MachineElec, efd: float) -> np.ndarray:
    p = np.zeros(N_MP)
    p[MP_XD], p[MP_XQ], p[MP_XDP], p[MP_XPP] = m.xd, m.xq, m.xp_d, m.xpp_d
    p[MP_TD0P], p[MP_TD0PP], p[MP_TQ0PP], p[MP_RA] = m.tp_d0, m.tpp_d0, m.tpp_q0, m.ra
    p[MP_EFD] = efd
    return p


@njit(cache=True)
def _lag_step(x, u, tau, h):
    """Trapezoidal step of tau x' = u - x with u held over the step."""
    c = 0.5 * h / tau
    return ((1.0 - c) * x + 2.0 * c * u) / (1.0 + c)


@njit(cache=True)
def rotor_flux_step(x, p, i_d, i_q, h):
    """Advance (E'q, E''q, E''d) one step with stator currents held."""
    eqp0 = x[MS_EQP]
    eqp1 = _lag_step(eqp0, p[MP_EFD] - (p[MP_XD] - p[MP_XDP]) * i_d, p[MP_TD0P], h)
    u = 0.5 * (eqp0 + eqp1) - (p[MP_XDP] - p[MP_XPP]) * i_d
    x[MS_EQPP] = _lag_step(x[MS_EQPP], u, p[MP_TD0PP], h)
    x[MS_EDPP] = _lag_step(x[MS_EDPP], (p[MP_XQ] - p[MP_XPP]) * i_q, p[MP_TQ0PP], h)
    x[MS_EQP] = eqp1


@njit(cache=True)
def subtransient_flux(x):
    return complex(x[MS_EQPP], -x[MS_EDPP])


@njit(cache=True)
def machine_emf(x, speed, theta):
    """Speed voltage behind the subtransient reactance, network frame."""
    return 1j * speed * subtransient_flux(x) * cmath.exp(1j * theta)


@njit(cache=True)
def air_gap_torque(x, i_rotor):
    psi = subtransient_flux(x)
    return (psi.conjugate() * i_rotor).imag


@njit(cache=True)
def _machine_step_core(x, i, theta, v0, v1, speed0, speed1, p, ws, h):
    """Standalone machine: rotor fluxes plus stator current driven by the
    terminal voltage.  Trapezoidal in both; the rotor/stator coupling is
    resolved by fixed-point iteration on the end-of-step current."""
    x0 = x.copy()
    ir0 = i * cmath.exp(-1j * theta)
    e0 = machine_emf(x0, speed0, theta)
    theta1 = theta + h * ws * 0.5 * (speed0 + speed1 - 2.0)
    xpp = p[MP_XPP]
    a = -(p[MP_RA] + 1j * xpp) * ws / xpp
    i1 = i
    for _ in range(4):
        ir = 0.5 * (ir0 + i1 * cmath.exp(-1j * theta1))
        x[:] = x0
        rotor_flux_step(x, p, ir.real, ir.imag, h)
        e1 = machine_emf(x, speed1, theta1)
        etr = (subtransient_flux(x) - subtransient_flux(x0)) / (h * ws) * cmath.exp(0.5j * (theta + theta1))
        i1 = ((1.0 + 0.5 * h * a) * i + 0.5 * h * ws / xpp * ((e0 - v0) + (e1 - v1) + 2.0 * etr)) \
            / (1.0 - 0.5 * h * a)
    te = air_gap_torque(x, i1 * cmath.exp(-1j * theta1))
    return i1, theta1, te


@njit(cache=True)
def vsc_step_core(s, p, vh, p_ref, q_ref, h):
    """Advance the converter one step.

    ``vh`` is the PCC voltage (network pu) from the previous step.  Returns
    the injected current and its time derivative in network pu.
    """
    ws = p[VP_WS]
    kb = p[VP_KBASE]
    vm_old = complex(s[VS_VM_RE], s[VS_VM_IM])
    c = 0.5 * h / p[VP_TAU_V]
    vm = ((1.0 - c) * vm_old + 2.0 * c * vh) / (1.0 + c)
    s[VS_VM_RE] = vm.real
    s[VS_VM_IM] = vm.imag
    blocked = abs(vm) < p[VP_VBLOCK]

    th0 = s[VS_TH]
    err = (vm * cmath.exp(-1j * th0)).imag
    xpll = s[VS_XPLL] + 0.5 * h * p[VP_KI_PLL] * (err + s[VS_ERR])
    dw = p[VP_KP_PLL] * err + xpll
    th1 = th0 + 0.5 * h * ws * (dw + s[VS_DW])
    s[VS_XPLL] = xpll
    s[VS_ERR] = err
    s[VS_DW] = dw
    s[VS_TH] = th1

    ic = complex(s[VS_IC_RE], s[VS_IC_IM])
    sp = vm * (ic * cmath.exp(1j * th1)).conjugate()
    e_p = p_ref - sp.real
    e_q = q_ref - sp.imag
    xp = s[VS_XP] + 0.5 * h * p[VP_KI_P] * (e_p + s[VS_EP])
    xq = s[VS_XQ] + 0.5 * h * p[VP_KI_Q] * (e_q + s[VS_EQ])
    s[VS_XP] = xp
    s[VS_XQ] = xq
    s[VS_EP] = e_p
    s[VS_EQ] = e_q
    i_d = p_ref + p[VP_KP_P] * e_p + xp
    i_q = -(q_ref + p[VP_KP_Q] * e_q + xq)
    imax = p[VP_IMAX]
    limited = i_d * i_d + i_q * i_q > imax * imax
    if i_d > imax:
        i_d = imax
    elif i_d < -imax:
        i_d = -imax
    q_room = math.sqrt(max(imax * imax - i_d * i_d, 0.0))
    if i_q > q_room:
        i_q = q_room
    elif i_q < -q_room:
        i_q = -q_room
    if blocked:
        i_d = 0.0
        i_q = 0.0
    iref0 = complex(s[VS_IR_RE], s[VS_IR_IM])
    iref1 = complex(i_d, i_q)
    a = 0.5 * h * p[VP_ALPHA]
    ic1 = ((1.0 - a) * ic + a * (iref0 + iref1)) / (1.0 + a)
    s[VS_IC_RE] = ic1.real
    s[VS_IC_IM] = ic1.imag
    s[VS_IR_RE] = i_d
    s[VS_IR_IM] = i_q
    s[VS_BLOCKED] = 1.0 if blocked else 0.0
    s[VS_LIMITED] = 1.0 if limited else 0.0
    rot = cmath.exp(1j * th1)
    ih = kb * ic1 * rot
    dih = kb * (p[VP_ALPHA] * (iref1 - ic1) + 1j * ws * dw * ic1) * rot
    return ih, dih, 1.0 + dw


def ssdc_coefficients(prm: SSDCParams, h: float) -> np.ndarray:
    """Bilinear-transform coefficients of the band-pass and lead-lag."""
    c = 2.0 / h
    w0 = 2 * math.pi * prm.center_hz
    bw = w0 / prm.quality
    a0 = c * c + bw * c + w0 * w0
    p = np.zeros(N_SP)
    p[SP_B0] = bw * c / a0
    p[SP_B2] = -bw * c / a0
    p[SP_A1] = (2 * w0 * w0 - 2 * c * c) / a0
    p[SP_A2] = (c * c - bw * c + w0 * w0) / a0
    den = 1 + prm.t2 * c
    p[SP_L0] = (1 + prm.t1 * c) / den
    p[SP_L1] = (1 - prm.t1 * c) / den
    p[SP_LA] = (1 - prm.t2 * c) / den
    p[SP_K] = prm.gain
    p[SP_LIM] = prm.limit
    return p


@njit(cache=True)
def ssdc_step_core(s, p, w_net):
    x = w_net - 1.0
    y = p[SP_B0] * x + s[SS_S1]
    s[SS_S1] = -p[SP_A1] * y + s[SS_S2]
    s[SS_S2] = p[SP_B2] * x - p[SP_A2] * y
    z = p[SP_L0] * y + s[SS_L]
    s[SS_L] = p[SP_L1] * y - p[SP_LA] * z
    u = p[SP_K] * z
    lim = p[SP_LIM]
    if u > lim:
        return lim, True
    if u < -lim:
        return -lim, True
    return u, False


# ---------------------------------------------------------------------------
# step-by-step Python API

@dataclass
class MachineState:
    fluxes: np.ndarray  # E'q, E''q, E''d
    current: complex  # stator current, network frame, generator convention
    theta: float  # d-axis angle w.r.t. the rotating frame (rad)
    speed: float = 1.0
    efd: float = 1.0


def machine_state_from_terminal(m: MachineElec, v: complex, i: complex) -> MachineState:
    """Back-initialize the machine from terminal voltage and current."""
    e_q = v + (m.ra + 1j * m.xq) * i
    theta = cmath.phase(e_q) - math.pi / 2
    rot = cmath.exp(-1j * theta)
    ir, vr = i * rot, v * rot
    edpp = (m.xq - m.xpp_q) * ir.imag
    eqpp = vr.imag + m.ra * ir.imag + m.xpp_d * ir.real
    eqp = eqpp + (m.xp_d - m.xpp_d) * ir.real
    efd = eqp + (m.xd - m.xp_d) * ir.real
    return MachineState(fluxes=np.array([eqp, eqpp, edpp]), current=complex(i),
                        theta=theta, speed=1.0, efd=efd)


def machine_torque(m: MachineElec, st: MachineState) -> float:
    return float(air_gap_torque(st.fluxes, st.current * cmath.exp(-1j * st.theta)))


def machine_step(m: MachineElec, state: MachineState, v_terminal: complex, speed: float, dt: float,
                 *, v_next: complex | None = None, base_frequency: float = 50.0,
                 ) -> tuple[MachineState, float, complex]:
    """Advance the machine one step against a terminal voltage.

    Returns (new state, electromagnetic torque, stator current).
    """
    if dt > 50e-6:
        raise InvalidModelError("machine_step: dt must not exceed 50 us")
    p = machine_params(m, state.efd)
    x = state.fluxes.copy()
    v1 = v_terminal if v_next is None else v_next
    i1, th1, te = _machine_step_core(x, complex(state.current), float(state.theta), complex(v_terminal),
                                     complex(v1), float(state.speed), float(speed), p,
                                     2 * math.pi * base_frequency, dt)
    for name, val in (("flux", x), ("current", i1), ("torque", te)):
        if not np.all(np.isfinite(val)):
            raise NumericError(f"machine_step diverged: non-finite {name}")
    new = MachineState(fluxes=x, current=complex(i1), theta=float(th1), speed=float(speed), efd=state.efd)
    return new, float(te), complex(i1)


@dataclass
class VscState:
    vector: np.ndarray = field(default_factory=lambda: np.zeros(N_VS))

    @property
    def blocked(self) -> bool:
        return bool(self.vector[VS_BLOCKED])

    @property
    def current(self) -> complex:
        """Converter current in its own PLL frame (converter pu)."""
        return complex(self.vector[VS_IC_RE], self.vector[VS_IC_IM])


def vsc_params(c: HvdcConverter, network_mva: float, base_frequency: float = 50.0) -> np.ndarray:
    p = np.zeros(N_VP)
    p[VP_KP_PLL], p[VP_KI_PLL] = c.pll_kp, c.pll_ki
    p[VP_ALPHA] = c.current_bandwidth
    p[VP_KP_P], p[VP_KI_P], p[VP_KP_Q], p[VP_KI_Q] = c.power_kp, c.power_ki, c.q_kp, c.q_ki
    p[VP_IMAX] = c.current_limit
    p[VP_TAU_V] = c.voltage_filter_tau
    p[VP_KBASE] = c.rated_mva / network_mva
    p[VP_WS] = 2 * math.pi * base_frequency
    p[VP_VBLOCK] = c.blocking_voltage
    return p


def vsc_state_from_operating_point(c: HvdcConverter, v_pcc: complex, i_inj: complex,
                                   network_mva: float) -> VscState:
    """Equilibrium converter state for a given PCC voltage and injected current
    (network pu)."""
    kb = c.rated_mva / network_mva
    s = np.zeros(N_VS)
    th = cmath.phase(v_pcc)
    ic = i_inj / kb * cmath.exp(-1j * th)
    sp = v_pcc * (ic * cmath.exp(1j * th)).conjugate()
    s[VS_VM_RE], s[VS_VM_IM] = v_pcc.real, v_pcc.imag
    s[VS_TH] = th
    s[VS_IC_RE], s[VS_IC_IM] = ic.real, ic.imag
    s[VS_IR_RE], s[VS_IR_IM] = ic.real, ic.imag
    s[VS_XP] = ic.real - sp.real
    s[VS_XQ] = -ic.imag - sp.imag
    return VscState(s)


def vsc_operating_point(c: HvdcConverter, v_pcc: complex, network_mva: float,
                        p_ref: float | None = None, q_ref: float | None = None) -> VscState:
    """Equilibrium state reproducing the converter setpoints at ``v_pcc``."""
    kb = c.rated_mva / network_mva
    p_ref = c.p_ref if p_ref is None else p_ref
    q_ref = c.q_ref if q_ref is None else q_ref
    i_inj = kb * ((p_ref + 1j * q_ref) / v_pcc).conjugate()
    return vsc_state_from_operating_point(c, v_pcc, i_inj, network_mva)


def vsc_step(c: HvdcConverter, state: VscState, v_pcc: complex, p_ref: float, q_ref: float,
             dt: float, *, network_mva: float | None = None, base_frequency: float = 50.0,
             ) -> tuple[VscState, complex, float]:
    """Advance the converter one step.

    Returns (new state, injected current in network pu, PLL frequency in pu).
    A blocked converter is reported through ``state.blocked``.
    """
    p = vsc_params(c, c.rated_mva if network_mva is None else network_mva, base_frequency)
    s = state.vector.copy()
    ih, _, w_net = vsc_step_core(s, p, complex(v_pcc), float(p_ref), float(q_ref), dt)
    if not (np.all(np.isfinite(s)) and cmath.isfinite(ih)):
        raise NumericError("vsc_step diverged: non-finite converter state")
    return VscState(s), complex(ih), float(w_net)


@dataclass
class SsdcState:
    vector: np.ndarray = field(default_factory=lambda: np.zeros(N_SS))


def ssdc_step(params: SSDCParams, state: SsdcState, w_net: float, dt: float) -> tuple[SsdcState, float, bool]:
    """One sample of the SSDC; returns (new state, P_SSDC pu, limiter active)."""
    s = state.vector.copy()
    u, active = ssdc_step_core(s, ssdc_coefficients(params, dt), float(w_net))
    return SsdcState(s), float(u), bool(active)


def with_ssdc_phase(params: SSDCParams, t1: float, t2: float, gain: float | None = None) -> SSDCParams:
    return replace(params, t1=t1, t2=t2, gain=params.gain if gain is None else gain)
