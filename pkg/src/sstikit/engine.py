"""Fixed-step time-domain simulation of the shaft + machine + network + VSC plant.

Coupling order inside one step (t_n -> t_n+1), fixed:

1. shaft (trapezoidal) with Te(t_n) held: one-step delay on the
   electrical torque;
2. machine rotor fluxes with stator currents at t_n held;
3. converter: voltage measurement, PLL, power loops and current loop driven
   by the PCC voltage at t_n; SSDC output from the previous step;
4. network (trapezoidal, exact for the linear branch equations) with the
   new machine emf and converter current;
5. algebraic outputs (bus voltages, Te, powers) at t_n+1.

The network state is the flux-like quantity ``(Xg+Xs) i_g + Xs i_h`` so that
the converter current enters the branch equations without its derivative.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy import optimize, signal

from . import plant as pl
from .errors import InitializationError, InvalidModelError, InvalidWindowError, NoComponentError
from .shaft import ShaftModel

CHANNELS = (
    "dw", "te", "tm", "p_gen", "q_gen", "v_term", "p_pcc", "q_pcc", "v_pcc", "w_net",
    "p_ssdc", "limiter_active", "current_limited", "i_vsc", "vsc_blocked",
    "shaft_energy", "shaft_work",
)
(CH_DW, CH_TE, CH_TM, CH_PG, CH_QG, CH_VT, CH_PH, CH_QH, CH_VH, CH_WNET, CH_PSSDC, CH_LIM,
 CH_ILIM, CH_IVSC, CH_BLK, CH_EN, CH_WORK) = range(len(CHANNELS))
N_FIXED = len(CHANNELS)
DIVERGENCE_LIMIT = 100.0


@dataclass(frozen=True)
class Tone:
    """Sinusoidal torque injection on the generator mass (pu, machine base)."""

    frequency: float
    amplitude: float
    t_on: float = 0.0
    ramp: float = 0.0
    t_off: float = math.inf
    ramp_off: float = 0.0

    def __post_init__(self):
        if self.frequency <= 0:
            raise InvalidModelError("tone.frequency: must be > 0")
        if self.ramp < 0 or self.ramp_off < 0:
            raise InvalidModelError("tone ramps must be >= 0")
        if self.t_off < self.t_on + self.ramp:
            raise InvalidModelError("tone.t_off: must follow the ramp-in")

    def as_row(self) -> list[float]:
        return [self.frequency, self.amplitude, self.t_on, self.ramp,
                self.t_off if math.isfinite(self.t_off) else 1e300, self.ramp_off]


@dataclass(frozen=True)
class LinearStandin:
    """Replaces machine, network and converter by a rational transfer
    function ``Ge(s) = num(s)/den(s)`` from generator speed deviation to
    electrical torque (pu), polynomial coefficients highest power first."""

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "num", tuple(float(c) for c in self.num))
        object.__setattr__(self, "den", tuple(float(c) for c in self.den))
        if not self.den or self.den[0] == 0:
            raise InvalidModelError("standin.den: leading coefficient must be non-zero")
        if len(self.num) > len(self.den):
            raise InvalidModelError("standin: transfer function must be proper")

    def response(self, f) -> np.ndarray:
        s = 2j * np.pi * np.asarray(f, dtype=float)
        return np.polyval(self.num, s) / np.polyval(self.den, s)


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    description: str = ""
    base_frequency: float = 50.0
    shaft: ShaftModel | None = None
    single_mass: bool = False
    inertia_h: float = 3.85  # used when no shaft is given
    machine: pl.MachineElec = field(default_factory=pl.MachineElec)
    transformer: pl.Transformer = field(default_factory=pl.Transformer)
    gen_line: pl.Line = field(default_factory=lambda: pl.Line(length_km=10.0))
    hvdc_line: pl.Line = field(default_factory=lambda: pl.Line(length_km=30.0))
    grid: pl.GridEquivalent = field(default_factory=pl.GridEquivalent)
    hvdc: pl.HvdcConverter | None = field(default_factory=pl.HvdcConverter)
    ssdc: pl.SSDCParams | None = None
    filter: pl.BlockingFilter | None = None
    standin: LinearStandin | None = None
    dt: float = 20e-6
    duration: float = 5.0
    decimation: int = 10
    injections: tuple[Tone, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "injections", tuple(self.injections))
        if self.dt <= 0:
            raise InvalidModelError("dt: must be > 0")
        if self.dt > 50e-6:
            raise InvalidModelError("dt: must not exceed 50 us")
        if self.duration <= self.dt:
            raise InvalidModelError("duration: must exceed dt")
        if self.decimation < 1:
            raise InvalidModelError("decimation: must be >= 1")
        if self.inertia_h <= 0:
            raise InvalidModelError("inertia_h: must be > 0")
        if self.shaft is not None and abs(self.shaft.base_frequency - self.base_frequency) > 1e-12:
            raise InvalidModelError("shaft.base_frequency: must match the scenario base frequency")
        if self.filter is not None and abs(self.filter.base_frequency - self.base_frequency) > 1e-12:
            raise InvalidModelError("filter.base_frequency: must match the scenario base frequency")
        if self.ssdc is not None and self.hvdc is None:
            raise InvalidModelError("ssdc: requires an HVDC converter")

    # convenience -----------------------------------------------------------
    @property
    def omega_s(self) -> float:
        return 2 * math.pi * self.base_frequency

    @property
    def z_base(self) -> float:
        return self.grid.nominal_kv ** 2 / self.machine.rated_mva

    def n_masses(self) -> int:
        if self.shaft is None or self.single_mass:
            return 1
        return self.shaft.n

    def with_(self, **kw) -> Scenario:
        return replace(self, **kw)

    def after_events(self) -> Scenario:
        """Same network with all scheduled S_sc steps already applied."""
        g = replace(self.grid, ssc_mva=self.grid.final_ssc(), events=())
        return replace(self, grid=g)

    def grid_impedance(self, ssc_mva: float | None = None) -> complex:
        ssc = self.grid.ssc_mva if ssc_mva is None else ssc_mva
        z = self.machine.rated_mva / ssc * (self.grid.nominal_kv ** 2 / self.grid.nominal_kv ** 2)
        ang = math.atan(self.grid.x_over_r)
        return z * complex(math.cos(ang), math.sin(ang))

    def generator_branch(self) -> complex:
        """Series impedance from the machine terminal to the network bus at
        base frequency (filter included)."""
        z = complex(self.transformer.r_pu, self.transformer.x_pu) + self.gen_line.impedance_ohm() / self.z_base
        if self.filter is not None:
            z += pl.blocking_filter_response(self.filter, self.base_frequency)
        return z

    def hvdc_branch(self) -> complex:
        return self.hvdc_line.impedance_ohm() / self.z_base


# ---------------------------------------------------------------------------
# power flow

@dataclass(frozen=True)
class PowerFlow:
    v_term: complex
    i_gen: complex
    v_net: complex
    v_pcc: complex
    i_hvdc: complex
    e_grid: complex
    residual: float


def power_flow(sc: Scenario, ssc_mva: float | None = None, tol: float = 1e-8) -> PowerFlow:
    """Steady state of the radial network T - N - (H, S) in network pu."""
    m = sc.machine
    pg = m.p_mw / m.rated_mva
    vt = m.v_terminal
    if sc.hvdc is not None:
        sh = complex(sc.hvdc.p_ref, sc.hvdc.q_ref) * sc.hvdc.rated_mva / m.rated_mva
    else:
        sh = 0j
    zt = sc.generator_branch()
    zh = sc.hvdc_branch()
    zs = sc.grid_impedance(ssc_mva)
    es = complex(sc.grid.emf, 0.0)

    def unpack(x):
        return vt * cmath.exp(1j * x[0]), x[1], complex(x[2], x[3]), complex(x[4], x[5])

    def mismatch(x):
        v_t, q, v_n, v_h = unpack(x)
        ig = ((pg + 1j * q) / v_t).conjugate()
        ih = (sh / v_h).conjugate()
        r1 = v_t - zt * ig - v_n
        r2 = v_n + zh * ih - v_h
        r3 = ig + ih + (es - v_n) / zs
        return [r1.real, r1.imag, r2.real, r2.imag, r3.real, r3.imag]

    x0 = [0.0, 0.0, 1.0, 0.0, 1.0, 0.0]
    sol = optimize.root(mismatch, x0, method="hybr", tol=1e-14)
    res = float(np.max(np.abs(mismatch(sol.x))))
    v_t, q, v_n, v_h = unpack(sol.x)
    if not res <= tol or not 0.5 < abs(v_n) < 1.5 or not 0.5 < abs(v_h) < 1.5:
        raise InitializationError(
            f"power flow did not converge: max mismatch {res:.3e} pu "
            f"(|V_N|={abs(v_n):.3f}, |V_H|={abs(v_h):.3f}, S_sc={ssc_mva or sc.grid.ssc_mva:g} MVA)")
    ig = ((pg + 1j * q) / v_t).conjugate()
    ih = (sh / v_h).conjugate()
    if sc.hvdc is not None:
        i_conv = abs(ih) * m.rated_mva / sc.hvdc.rated_mva
        if i_conv > sc.hvdc.current_limit:
            raise InitializationError(f"converter current {i_conv:.3f} pu exceeds its limit")
    return PowerFlow(v_t, ig, v_n, v_h, ih, es, res)


# ---------------------------------------------------------------------------
# compiled kernel

@njit(cache=True)
def _envelope(t, tn):
    t_on, ramp, t_off, ramp_off = tn[2], tn[3], tn[4], tn[5]
    if t <= t_on:
        return 0.0
    if t < t_on + ramp:
        return 0.5 * (1.0 - math.cos(math.pi * (t - t_on) / ramp))
    if t <= t_off:
        return 1.0
    if t < t_off + ramp_off:
        return 0.5 * (1.0 + math.cos(math.pi * (t - t_off) / ramp_off))
    return 0.0


@njit(cache=True)
def _perturbation(t, tones):
    out = 0.0
    for k in range(tones.shape[0]):
        env = _envelope(t, tones[k])
        if env != 0.0:
            out += tones[k, 1] * env * math.sin(2.0 * math.pi * tones[k, 0] * (t - tones[k, 2]))
    return out


@njit(cache=True)
def _shaft_step(x, sP, sQ, sR, torque):
    return sP @ x + sQ @ torque + sR


@njit(cache=True)
def _shaft_energy(x, hm, kpu, ws):
    n = hm.shape[0]
    w = x[:n]
    th = x[n:]
    return np.sum(hm * w * w) + 0.5 * (th @ (kpu @ th)) / ws


@njit(cache=True)
def _run_plant(n_steps, h, decim, ws, out,
               sP, sQ, sR, xs, shares, tm0, gi, hm, kpu, tones,
               mp, mx,
               seg_steps, NP, NQ, NA, NB, xs_seg, zs_seg, zg, xg, zm, xpp, zh, xh, es, z,
               has_vsc, vp, vs, p_ref, q_ref,
               has_ssdc, spar, sst):
    n = hm.shape[0]
    nz = z.shape[0]
    has_filter = nz > 1
    seg = 0
    e0 = 1j * xs[gi] * pl.subtransient_flux(mx) * cmath.exp(1j * xs[n + gi])
    ih = 0j
    dih = 0j
    w_net = 1.0
    p_ssdc = 0.0
    lim_flag = 0.0
    if has_vsc:
        kb = vp[pl.VP_KBASE]
        ih = kb * complex(vs[pl.VS_IC_RE], vs[pl.VS_IC_IM]) * cmath.exp(1j * vs[pl.VS_TH])
    xsum = zg.imag + xs_seg[0]
    ig = (z[0] - xs_seg[0] * ih) / xsum
    # algebraics at t0
    u = np.zeros(3, dtype=np.complex128)
    u[0] = e0
    u[1] = es
    u[2] = ih
    dz = NA[0] @ z + NB[0] @ u
    dig = (dz[0] - xs_seg[0] * dih) / xsum
    vf = z[1] if has_filter else 0j
    vn = e0 - zg * ig - (xg / ws) * dig - vf
    vh = vn + zh * ih + (xh / ws) * dih
    vt = e0 - zm * ig - (xpp / ws) * dig
    te = pl.air_gap_torque(mx, ig * cmath.exp(-1j * xs[n + gi]))
    e_start = _shaft_energy(xs, hm, kpu, ws)
    work = 0.0
    torque = np.zeros(n)
    n_log = 0
    div_step = -1
    ilim_flag = 0.0
    th_prev = xs[n + gi]
    for step in range(n_steps + 1):
        if step > 0:
            t0 = (step - 1) * h
            t1 = step * h
            # 1. shaft
            dtm = 0.5 * (_perturbation(t0, tones) + _perturbation(t1, tones))
            for i in range(n):
                torque[i] = shares[i] * tm0
            torque[gi] += dtm - te
            x_new = _shaft_step(xs, sP, sQ, sR, torque)
            for i in range(n):
                work += h * torque[i] * 0.5 * (xs[i] + x_new[i])
            xs = x_new
            w_g = xs[gi]
            th_g = xs[n + gi]
            # 2. machine rotor
            ir = ig * cmath.exp(-1j * th_prev)
            psi0 = pl.subtransient_flux(mx)
            pl.rotor_flux_step(mx, mp, ir.real, ir.imag, h)
            psi1 = pl.subtransient_flux(mx)
            # speed voltage plus the transformer voltage of the rotor flux
            e1 = (1j * w_g * psi1 + (psi1 - psi0) / (h * ws)) * cmath.exp(1j * th_g)
            # 3. converter + SSDC
            if has_vsc:
                ih, dih, w_net = pl.vsc_step_core(vs, vp, vh, p_ref + p_ssdc, q_ref, h)
                if vs[pl.VS_LIMITED] > 0:
                    ilim_flag = 1.0
                if has_ssdc:
                    p_ssdc, act = pl.ssdc_step_core(sst, spar, w_net)
                    if act:
                        lim_flag = 1.0
            # 4. network
            if seg + 1 < seg_steps.shape[0] and step - 1 == seg_steps[seg + 1]:
                seg += 1
                z[0] = (zg.imag + xs_seg[seg]) * ig + xs_seg[seg] * u[2]
            u_new = np.empty(3, dtype=np.complex128)
            u_new[0] = e1
            u_new[1] = es
            u_new[2] = ih
            z = NP[seg] @ z + NQ[seg] @ (u + u_new)
            u = u_new
            # 5. algebraics
            xsum = zg.imag + xs_seg[seg]
            ig = (z[0] - xs_seg[seg] * ih) / xsum
            dz = NA[seg] @ z + NB[seg] @ u
            dig = (dz[0] - xs_seg[seg] * dih) / xsum
            vf = z[1] if has_filter else 0j
            vn = e1 - zg * ig - (xg / ws) * dig - vf
            vh = vn + zh * ih + (xh / ws) * dih
            vt = e1 - zm * ig - (xpp / ws) * dig
            te = pl.air_gap_torque(mx, ig * cmath.exp(-1j * th_g))
        th_prev = xs[n + gi]
        if step % decim == 0:
            row = out[n_log]
            row[CH_DW] = xs[gi] - 1.0
            row[CH_TE] = te
            row[CH_TM] = tm0 + _perturbation(step * h, tones)
            sg = vt * ig.conjugate()
            row[CH_PG] = sg.real
            row[CH_QG] = sg.imag
            row[CH_VT] = abs(vt)
            if has_vsc:
                kb = vp[pl.VP_KBASE]
                sh = vh * ih.conjugate() / kb
                row[CH_PH] = sh.real
                row[CH_QH] = sh.imag
                row[CH_IVSC] = abs(ih) / kb
                row[CH_BLK] = vs[pl.VS_BLOCKED]
            row[CH_VH] = abs(vh)
            row[CH_WNET] = w_net
            row[CH_PSSDC] = p_ssdc
            row[CH_LIM] = lim_flag
            row[CH_ILIM] = ilim_flag
            row[CH_EN] = _shaft_energy(xs, hm, kpu, ws) - e_start
            row[CH_WORK] = work
            for i in range(n):
                row[N_FIXED + i] = xs[i] - 1.0
            lim_flag = 0.0
            ilim_flag = 0.0
            n_log += 1
            bad = False
            for k in range(row.shape[0]):
                v = row[k]
                if not (abs(v) <= DIVERGENCE_LIMIT):
                    bad = True
            if bad:
                div_step = step
                break
    return n_log, div_step, xs, z


@njit(cache=True)
def _run_standin(n_steps, h, decim, ws, out, sP, sQ, sR, xs, gi, hm, kpu, tones, gP, gQ, gC, gD, g):
    n = hm.shape[0]
    torque = np.zeros(n)
    e_start = _shaft_energy(xs, hm, kpu, ws)
    work = 0.0
    u_old = xs[gi] - 1.0
    te = gC @ g + gD * u_old
    n_log = 0
    div_step = -1
    for step in range(n_steps + 1):
        if step > 0:
            t0 = (step - 1) * h
            t1 = step * h
            torque[:] = 0.0
            torque[gi] = 0.5 * (_perturbation(t0, tones) + _perturbation(t1, tones)) - te
            x_new = _shaft_step(xs, sP, sQ, sR, torque)
            for i in range(n):
                work += h * torque[i] * 0.5 * (xs[i] + x_new[i])
            xs = x_new
            u_new = xs[gi] - 1.0
            g = gP @ g + gQ * (u_old + u_new)
            u_old = u_new
            te = gC @ g + gD * u_new
        if step % decim == 0:
            row = out[n_log]
            row[CH_DW] = xs[gi] - 1.0
            row[CH_TE] = te
            row[CH_TM] = _perturbation(step * h, tones)
            row[CH_WNET] = 1.0
            row[CH_EN] = _shaft_energy(xs, hm, kpu, ws) - e_start
            row[CH_WORK] = work
            for i in range(n):
                row[N_FIXED + i] = xs[i] - 1.0
            n_log += 1
            bad = False
            for k in range(row.shape[0]):
                if not (abs(row[k]) <= DIVERGENCE_LIMIT):
                    bad = True
            if bad:
                div_step = step
                break
    return n_log, div_step


# ---------------------------------------------------------------------------
# assembly

def _trapezoid(a: np.ndarray, b: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    eye = np.eye(a.shape[0])
    m = np.linalg.inv(eye - 0.5 * h * a)
    return m @ (eye + 0.5 * h * a), m @ b * (0.5 * h)


@dataclass
class _Mechanics:
    h_const: np.ndarray
    k_pu: np.ndarray
    d_pu: np.ndarray
    shares: np.ndarray
    gen: int
    torque_scale: float  # machine-base torque -> shaft-base torque


def _mechanics(sc: Scenario) -> _Mechanics:
    if sc.shaft is None or sc.single_mass:
        h = sc.inertia_h if sc.shaft is None else sc.shaft.total_inertia()
        scale = 1.0 if sc.shaft is None else sc.machine.rated_mva / sc.shaft.base_power
        return _Mechanics(np.array([h]), np.zeros((1, 1)), np.zeros((1, 1)), np.ones(1), 0, scale)
    s = sc.shaft
    return _Mechanics(s.inertia_constants(), s.stiffness_pu(), s.damping_pu(), s.shares(),
                      s.generator_index - 1, sc.machine.rated_mva / s.base_power)


def _shaft_discrete(mech: _Mechanics, ws: float, h: float):
    n = len(mech.h_const)
    inv2h = 1.0 / (2.0 * mech.h_const)
    a = np.zeros((2 * n, 2 * n))
    a[:n, :n] = -inv2h[:, None] * mech.d_pu
    a[:n, n:] = -inv2h[:, None] * mech.k_pu
    a[n:, :n] = ws * np.eye(n)
    b = np.zeros((2 * n, n))
    b[:n, :] = np.diag(inv2h)
    c = np.zeros(2 * n)
    c[n:] = -ws
    eye = np.eye(2 * n)
    m = np.linalg.inv(eye - 0.5 * h * a)
    return m @ (eye + 0.5 * h * a), m @ b * h, m @ c * h


def _shaft_initial(mech: _Mechanics, torque: np.ndarray, theta_gen: float) -> np.ndarray:
    """Equilibrium twist for a balanced torque vector (K theta = T)."""
    n = len(mech.h_const)
    if n == 1:
        th = np.array([theta_gen])
    else:
        th = np.linalg.lstsq(mech.k_pu, torque, rcond=None)[0]
        th += theta_gen - th[mech.gen]
    return np.concatenate([np.ones(n), th])


def _network_matrices(sc: Scenario, ssc: float):
    """Continuous branch equations z' = A z + B [e, e_s, i_h]."""
    ws = sc.omega_s
    zg = complex(sc.machine.ra, sc.machine.xpp_d) + complex(sc.transformer.r_pu, sc.transformer.x_pu) \
        + sc.gen_line.impedance_ohm() / sc.z_base
    zs = sc.grid_impedance(ssc)
    xsum = zg.imag + zs.imag
    ztot = zg + zs
    if sc.filter is None:
        a = np.array([[-ws * ztot / xsum]], dtype=complex)
        b = np.array([[ws, -ws, ws * (ztot * zs.imag / xsum - zs)]], dtype=complex)
    else:
        xl, bc = sc.filter.reactances()
        r = sc.filter.peak_impedance
        a = ws * np.array([
            [-ztot / xsum, -1.0, 0.0],
            [1.0 / (bc * xsum), -(1.0 / r + 1j * bc) / bc, -1.0 / bc],
            [0.0, 1.0 / xl, -1j],
        ], dtype=complex)
        b = ws * np.array([
            [1.0, -1.0, ztot * zs.imag / xsum - zs],
            [0.0, 0.0, -zs.imag / (bc * xsum)],
            [0.0, 0.0, 0.0],
        ], dtype=complex)
    return a, b, zg, zs


@dataclass
class EngineState:
    """Everything needed to start the kernel, plus the power-flow solution."""

    scenario: Scenario
    flow: PowerFlow | None
    arrays: dict
    derivative_norm: float = 0.0


def _segments(sc: Scenario) -> list[tuple[int, float]]:
    out = []
    for t, ssc in sc.grid.levels():
        k = int(round(t / sc.dt))
        if out and k <= out[-1][0]:
            out[-1] = (out[-1][0], ssc)
        else:
            out.append((k, ssc))
    return out


def _tone_table(sc: Scenario) -> np.ndarray:
    if not sc.injections:
        return np.zeros((0, 6))
    return np.array([t.as_row() for t in sc.injections], dtype=float)


def _standin_arrays(sc: Scenario):
    h = sc.dt
    a, b, c, d = signal.tf2ss(np.asarray(sc.standin.num), np.asarray(sc.standin.den))
    if a.size == 0:
        a = np.zeros((1, 1))
        b = np.zeros((1, 1))
        c = np.zeros((1, 1))
    p, q = _trapezoid(a, b, h)
    return p, q[:, 0].copy(), c[0].copy(), float(np.atleast_2d(d)[0, 0]), np.zeros(a.shape[0])


def initialize(sc: Scenario, check: bool = True) -> EngineState:
    """Power flow plus back-initialization of every component state."""
    ws = sc.omega_s
    h = sc.dt
    mech = _mechanics(sc)
    sP, sQ, sR = _shaft_discrete(mech, ws, h)
    common = dict(sP=sP, sQ=sQ, sR=sR, gi=mech.gen, hm=mech.h_const, kpu=mech.k_pu,
                  tones=_tone_table(sc))
    if sc.standin is not None:
        xs = _shaft_initial(mech, np.zeros(len(mech.h_const)), 0.0)
        gP, gQ, gC, gD, g = _standin_arrays(sc)
        arrays = dict(common, xs=xs, gP=gP, gQ=gQ, gC=gC, gD=gD, g=g)
        return EngineState(sc, None, arrays)

    flow = power_flow(sc)
    ms = pl.machine_state_from_terminal(sc.machine, flow.v_term, flow.i_gen)
    mx = ms.fluxes.copy()
    mp = pl.machine_params(sc.machine, ms.efd)
    te0 = pl.machine_torque(sc.machine, ms)
    tm0 = te0 * mech.torque_scale
    bal = mech.shares * tm0
    bal[mech.gen] -= te0 * mech.torque_scale
    xs = _shaft_initial(mech, bal, ms.theta)

    segs = _segments(sc)
    mats = [_network_matrices(sc, ssc) for _, ssc in segs]
    NA = np.array([m[0] for m in mats])
    NB = np.array([m[1] for m in mats])
    disc = [_trapezoid(m[0], m[1], h) for m in mats]
    NP = np.array([d[0] for d in disc])
    NQ = np.array([d[1] for d in disc])
    zg = mats[0][2]
    xs_seg = np.array([m[3].imag for m in mats])
    zs_seg = np.array([m[3] for m in mats])
    ih = flow.i_hvdc
    nz = NA.shape[1]
    z = np.zeros(nz, dtype=complex)
    z[0] = (zg.imag + xs_seg[0]) * flow.i_gen + xs_seg[0] * ih
    if sc.filter is not None:
        xl, _ = sc.filter.reactances()
        vf = pl.blocking_filter_response(sc.filter, sc.base_frequency) * flow.i_gen
        z[1] = vf
        z[2] = vf / (1j * xl)

    if sc.hvdc is not None:
        vsc = pl.vsc_state_from_operating_point(sc.hvdc, flow.v_pcc, ih, sc.machine.rated_mva)
        vp = pl.vsc_params(sc.hvdc, sc.machine.rated_mva, sc.base_frequency)
        vs = vsc.vector.copy()
        p_ref = (flow.v_pcc * ih.conjugate()).real * sc.machine.rated_mva / sc.hvdc.rated_mva
        q_ref = (flow.v_pcc * ih.conjugate()).imag * sc.machine.rated_mva / sc.hvdc.rated_mva
    else:
        vp = np.zeros(pl.N_VP)
        vs = np.zeros(pl.N_VS)
        p_ref = q_ref = 0.0
    if sc.ssdc is not None:
        spar = pl.ssdc_coefficients(sc.ssdc, h)
    else:
        spar = np.zeros(pl.N_SP)
    sst = np.zeros(pl.N_SS)

    arrays = dict(common, xs=xs, shares=mech.shares.copy(), tm0=tm0, mp=mp, mx=mx,
                  seg_steps=np.array([k for k, _ in segs], dtype=np.int64), NP=NP, NQ=NQ, NA=NA, NB=NB,
                  xs_seg=xs_seg, zs_seg=zs_seg, zg=zg, xg=zg.imag,
                  zm=complex(sc.machine.ra, sc.machine.xpp_d), xpp=sc.machine.xpp_d,
                  zh=sc.hvdc_branch(), xh=sc.hvdc_branch().imag, es=flow.e_grid, z=z,
                  has_vsc=sc.hvdc is not None, vp=vp, vs=vs, p_ref=p_ref, q_ref=q_ref,
                  has_ssdc=sc.ssdc is not None, spar=spar, sst=sst)
    state = EngineState(sc, flow, arrays)
    if check:
        state.derivative_norm = _first_step_rate(state)
        if state.derivative_norm > 1e-6:
            raise InitializationError(
                f"initial state is not an equilibrium: max state rate {state.derivative_norm:.3e} pu/s")
    return state


def _first_step_rate(state: EngineState) -> float:
    """Largest state rate of change over one undisturbed step."""
    a = _copy_arrays(state.arrays)
    a["tones"] = np.zeros((0, 6))
    a["seg_steps"] = a["seg_steps"][:1]
    before = np.concatenate([a["xs"], a["mx"], a["z"].view(float), a["vs"]])
    out = np.zeros((2, N_FIXED + len(a["hm"])))
    _call_plant(state.scenario, a, 1, 1, out)
    after = np.concatenate([a["xs_out"], a["mx"], a["z_out"].view(float), a["vs"]])
    diff = np.abs(after - before)
    n = len(a["hm"])
    diff[n:2 * n] = np.abs(np.angle(np.exp(1j * (after[n:2 * n] - before[n:2 * n]))))
    return float(diff.max() / state.scenario.dt)


def _copy_arrays(arrays: dict) -> dict:
    return {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in arrays.items()}


def _call_plant(sc: Scenario, a: dict, n_steps: int, decim: int, out: np.ndarray):
    n_log, div, xs_out, z_out = _run_plant(
        n_steps, sc.dt, decim, sc.omega_s, out,
        a["sP"], a["sQ"], a["sR"], a["xs"], a["shares"], a["tm0"], a["gi"], a["hm"], a["kpu"], a["tones"],
        a["mp"], a["mx"], a["seg_steps"], a["NP"], a["NQ"], a["NA"], a["NB"], a["xs_seg"], a["zs_seg"],
        a["zg"], a["xg"], a["zm"], a["xpp"], a["zh"], a["xh"], a["es"], a["z"],
        a["has_vsc"], a["vp"], a["vs"], a["p_ref"], a["q_ref"], a["has_ssdc"], a["spar"], a["sst"])
    a["xs_out"] = xs_out
    a["z_out"] = z_out
    return n_log, div


# ---------------------------------------------------------------------------
# traces

@dataclass
class SimTrace:
    time: np.ndarray
    channels: dict[str, np.ndarray]
    dt: float
    diverged: bool = False
    divergence_time: float | None = None

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    @property
    def sample_interval(self) -> float:
        return float(self.time[1] - self.time[0]) if len(self.time) > 1 else self.dt

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(self.channels)
        w.writerow(["time"] + names)
        cols = [self.channels[k] for k in names]
        for i, t in enumerate(self.time):
            w.writerow([repr(float(t))] + [repr(float(c[i])) for c in cols])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> SimTrace:
        with open(path, encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        head, body = rows[0], np.array(rows[1:], dtype=float)
        if head[0] != "time":
            raise InvalidModelError(f"{path}: first column must be 'time'")
        t = body[:, 0]
        dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
        return cls(t, {k: body[:, i + 1] for i, k in enumerate(head[1:])}, dt)

    def to_svg(self, path, names=("dw",)):
        from .plotting import plot_trace
        plot_trace(self, path, names)


def run(sc: Scenario, state: EngineState | None = None) -> SimTrace:
    """Simulate ``sc.duration`` seconds.  Divergence beyond 100 pu ends the
    run early and is reported in the trace, not raised."""
    if state is None:
        state = initialize(sc)
    a = _copy_arrays(state.arrays)
    n_steps = int(round(sc.duration / sc.dt))
    n_mass = len(a["hm"])
    n_rows = n_steps // sc.decimation + 1
    out = np.zeros((n_rows, N_FIXED + n_mass))
    if sc.standin is not None:
        n_log, div = _run_standin(n_steps, sc.dt, sc.decimation, sc.omega_s, out, a["sP"], a["sQ"], a["sR"],
                                  a["xs"].copy(), a["gi"], a["hm"], a["kpu"], a["tones"], a["gP"], a["gQ"],
                                  a["gC"], a["gD"], a["g"].copy())
    else:
        n_log, div = _call_plant(sc, a, n_steps, sc.decimation, out)
    out = out[:n_log]
    time = np.arange(n_log) * sc.dt * sc.decimation
    names = list(CHANNELS) + [f"dw_{i + 1}" for i in range(n_mass)]
    channels = {k: out[:, i].copy() for i, k in enumerate(names)}
    trace = SimTrace(time, channels, sc.dt)
    if div >= 0:
        trace.diverged = True
        trace.divergence_time = div * sc.dt
    return trace


# ---------------------------------------------------------------------------
# envelope growth estimate

def growth_rate(x: np.ndarray, dt: float, f_target: float, window: tuple[float, float] | None = None,
                t0: float = 0.0, noise_floor: float = 1e-9) -> float:
    """Exponential growth rate (1/s) of the component of ``x`` at ``f_target``.

    The signal is shifted to base band, smoothed by three cascaded
    one-period moving averages and the log-magnitude fitted by a straight
    line over ``window`` (absolute times; whole record when omitted).
    """
    x = np.asarray(x, dtype=float)
    t = t0 + np.arange(len(x)) * dt
    if window is None:
        window = (t[0], t[-1])
    lo, hi = window
    if hi - lo < 10.0 / f_target - 1e-12:
        raise InvalidWindowError("window must cover at least 10 cycles of the target frequency")
    if dt * 2 * f_target >= 1:
        raise InvalidWindowError("target frequency above the Nyquist limit of the record")
    period = max(int(round(1.0 / (f_target * dt))), 1)
    bb = (x - np.mean(x[(t >= lo) & (t <= hi)])) * np.exp(-2j * np.pi * f_target * t)
    kern = np.ones(period) / period
    env = bb
    for _ in range(3):
        env = np.convolve(env, kern, mode="valid")
    # the cascade delays by 1.5 periods on average
    delay = 3 * (period - 1) / 2
    te = t[0] + (np.arange(len(env)) + delay) * dt
    mag = 2 * np.abs(env)
    sel = (te >= lo + 1.5 / f_target) & (te <= hi - 1.5 / f_target)
    if sel.sum() < 2:
        raise InvalidWindowError("window too short after smoothing")
    if np.min(mag[sel]) < noise_floor:
        raise NoComponentError(f"no detectable component at {f_target:g} Hz (envelope below {noise_floor:g})")
    slope, _ = np.polyfit(te[sel], np.log(mag[sel]), 1)
    return float(slope)
