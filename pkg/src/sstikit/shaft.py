"""Multi-mass torsional shaft model and modal analysis.

The shaft is a chain of rigid inertias ``J_i`` coupled by torsional springs
``K_{i,i+1}`` and dampers ``D_{i,i+1}``::

    J d2(delta)/dt2 + D d(delta)/dt + K delta = T_m - T_e

Modal quantities are expressed in per unit on the machine base.  With a
two-pole machine the rated mechanical speed equals the electrical base
speed ``w_m0 = 2 pi f_base`` and

    H_i  = J_i w_m0^2 / (2 S_base)       [s]
    K_pu = K w_m0 / S_base               [pu torque / rad]
    D_pu = D w_m0^2 / S_base             [pu torque / pu speed]
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidModelError, NormalizationError, NumericError, PairingError

RIGID_BODY_THRESHOLD = 0.01  # rad/s


@dataclass(frozen=True)
class ShaftModel:
    """Lumped torsional chain.

    Stiffness is in N*m/rad and damping in N*m*s/rad.  ``generator_index``
    is 1-based.
    """

    masses: tuple[float, ...]
    mutual_stiffness: tuple[float, ...]
    mutual_damping: tuple[float, ...]
    generator_index: int
    base_power: float = 778.0  # MVA
    base_frequency: float = 50.0  # Hz
    names: tuple[str, ...] = field(default=())
    # share of the mechanical torque applied on each mass; empty -> all on
    # the masses before the generator, proportional to inertia
    torque_shares: tuple[float, ...] = field(default=())

    def __post_init__(self):
        for name in ("masses", "mutual_stiffness", "mutual_damping", "names", "torque_shares"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        n = len(self.masses)
        if n < 2:
            raise InvalidModelError("shaft.masses: at least two masses are required")
        if len(self.mutual_stiffness) != n - 1:
            raise InvalidModelError("shaft.mutual_stiffness: expected N-1 values")
        if len(self.mutual_damping) != n - 1:
            raise InvalidModelError("shaft.mutual_damping: expected N-1 values")
        if any(not np.isfinite(j) or j <= 0 for j in self.masses):
            raise InvalidModelError("shaft.masses: all inertias must be > 0")
        if any(not np.isfinite(k) or k <= 0 for k in self.mutual_stiffness):
            raise InvalidModelError("shaft.mutual_stiffness: all stiffnesses must be > 0")
        if any(not np.isfinite(d) or d < 0 for d in self.mutual_damping):
            raise InvalidModelError("shaft.mutual_damping: all dampings must be >= 0")
        if not 1 <= self.generator_index <= n:
            raise InvalidModelError("shaft.generator_index: must lie in [1, N]")
        if self.base_power <= 0 or self.base_frequency <= 0:
            raise InvalidModelError("shaft.base_power/base_frequency: must be > 0")
        if self.names and len(self.names) != n:
            raise InvalidModelError("shaft.names: expected one name per mass")
        if self.torque_shares:
            if len(self.torque_shares) != n:
                raise InvalidModelError("shaft.torque_shares: expected one share per mass")
            if any(s < 0 for s in self.torque_shares) or abs(sum(self.torque_shares) - 1) > 1e-9:
                raise InvalidModelError("shaft.torque_shares: shares must be >= 0 and sum to 1")

    @property
    def n(self) -> int:
        return len(self.masses)

    @property
    def omega_base(self) -> float:
        return 2 * np.pi * self.base_frequency

    def inertia_constants(self) -> np.ndarray:
        """Per-mass inertia constants H_i in seconds."""
        j = np.asarray(self.masses, dtype=float)
        return j * self.omega_base**2 / (2 * self.base_power * 1e6)

    def stiffness_pu(self) -> np.ndarray:
        return tridiagonal(self.mutual_stiffness) * self.omega_base / (self.base_power * 1e6)

    def damping_pu(self) -> np.ndarray:
        return tridiagonal(self.mutual_damping) * self.omega_base**2 / (self.base_power * 1e6)

    def shares(self) -> np.ndarray:
        if self.torque_shares:
            return np.asarray(self.torque_shares, dtype=float)
        g = self.generator_index - 1
        s = np.zeros(self.n)
        drive = np.arange(self.n) < g
        if not drive.any():
            s[g] = 1.0
            return s
        j = np.asarray(self.masses, dtype=float)
        s[drive] = j[drive] / j[drive].sum()
        return s

    def total_inertia(self) -> float:
        """Lumped inertia constant H in seconds (single-mass equivalent)."""
        return float(self.inertia_constants().sum())


@dataclass(frozen=True)
class StateMatrices:
    A: np.ndarray
    B: np.ndarray


@dataclass(frozen=True)
class ModalResult:
    frequency_hz: np.ndarray
    sigma: np.ndarray
    modal_inertia: np.ndarray
    mechanical_damping: np.ndarray
    mode_shapes: np.ndarray  # columns, normalized to 1 at the generator

    @property
    def n_modes(self) -> int:
        return len(self.frequency_hz)

    def to_csv(self) -> str:
        """Modal report: mode, f_hz, sigma, H_m, D_m, shape entries."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n_mass = self.mode_shapes.shape[0]
        w.writerow(["mode", "f_hz", "sigma", "H_m", "D_m"] + [f"q{i + 1}" for i in range(n_mass)])
        for k in range(self.n_modes):
            w.writerow(
                [k + 1]
                + [_fmt(v) for v in (self.frequency_hz[k], self.sigma[k], self.modal_inertia[k],
                                     self.mechanical_damping[k])]
                + [_fmt(v) for v in self.mode_shapes[:, k]]
            )
        return buf.getvalue()


def _fmt(v: float) -> str:
    return repr(float(v))


def tridiagonal(coupling) -> np.ndarray:
    """Assemble the chain coupling matrix from N-1 mutual coefficients."""
    c = np.asarray(coupling, dtype=float)
    n = len(c) + 1
    m = np.zeros((n, n))
    idx = np.arange(n - 1)
    m[idx, idx] += c
    m[idx + 1, idx + 1] += c
    m[idx, idx + 1] -= c
    m[idx + 1, idx] -= c
    return m


def build_state_matrices(shaft: ShaftModel) -> StateMatrices:
    """State-space form with X = (d(delta)/dt, delta) in SI units."""
    j = np.asarray(shaft.masses, dtype=float)
    if np.any(j == 0):
        raise InvalidModelError("shaft.masses: singular inertia matrix")
    n = shaft.n
    j_inv = np.diag(1.0 / j)
    k = tridiagonal(shaft.mutual_stiffness)
    d = tridiagonal(shaft.mutual_damping)
    a = np.block([[-j_inv @ d, -j_inv @ k], [np.eye(n), np.zeros((n, n))]])
    b = np.vstack([-j_inv, np.zeros((n, n))])
    return StateMatrices(A=a, B=b)


def modal_frequencies(sm: StateMatrices) -> list[tuple[float, float]]:
    """Torsional modes as (f_hz, sigma) pairs sorted by frequency.

    Conjugate pairs are collapsed and the rigid-body mode is dropped.
    """
    a = np.asarray(sm.A, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NumericError("state matrix contains non-finite entries")
    try:
        ev = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericError(f"eigenvalue solver did not converge: {exc}") from exc
    ev = ev[ev.imag > RIGID_BODY_THRESHOLD]
    ev = ev[np.argsort(ev.imag)]
    return [(float(e.imag / (2 * np.pi)), float(e.real)) for e in ev]


def _undamped_modes(shaft: ShaftModel) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of 1/2 H^-1 K_pu via the symmetric similar matrix."""
    h = shaft.inertia_constants()
    k_pu = shaft.stiffness_pu()
    h_isqrt = 1.0 / np.sqrt(h)
    sym = 0.5 * h_isqrt[:, None] * k_pu * h_isqrt[None, :]
    lam, v = np.linalg.eigh(sym)
    q = h_isqrt[:, None] * v
    return lam, q


def modal_inertia_and_damping(shaft: ShaftModel) -> ModalResult:
    lam, q = _undamped_modes(shaft)
    # lambda carries rad/s^2 per pu of w_base: w^2 = lambda * w_base
    w_undamped = np.sqrt(np.clip(lam, 0.0, None) * shaft.omega_base)
    keep = w_undamped > RIGID_BODY_THRESHOLD
    w_undamped, q = w_undamped[keep], q[:, keep]
    g = shaft.generator_index - 1
    scale = q[g, :]
    if np.any(np.abs(scale) < 1e-12 * np.abs(q).max(axis=0)):
        bad = int(np.argmin(np.abs(scale))) + 1
        raise NormalizationError(f"torsional mode {bad} has no participation at the generator mass")
    q = q / scale[None, :]
    h = shaft.inertia_constants()
    hq = np.sqrt(h)[:, None] * q
    h_m = np.diag(hq.T @ hq).copy()

    modes = modal_frequencies(build_state_matrices(shaft))
    if len(modes) != len(w_undamped):
        raise PairingError(f"{len(modes)} damped modes for {len(w_undamped)} mode shapes")
    w_damped = np.array([2 * np.pi * f for f, _ in modes])
    sigma_all = np.array([s for _, s in modes])
    sigma = np.empty(len(w_undamped))
    for i, w in enumerate(w_undamped):
        dist = np.abs(w_damped - w)
        order = np.argsort(dist)
        j = order[0]
        if len(order) > 1:
            spacing = np.min(np.abs(np.diff(np.sort(w_damped)))) if len(w_damped) > 1 else w
            if dist[order[1]] - dist[j] < 0.01 * spacing:
                raise PairingError(f"ambiguous pairing for mode at {w / (2 * np.pi):.3f} Hz")
        sigma[i] = sigma_all[j]
    order = np.argsort(w_undamped)
    d_m = -4.0 * sigma[order] * h_m[order]
    freq = np.array([modes[int(np.argmin(np.abs(w_damped - w)))][0] for w in w_undamped[order]])
    return ModalResult(
        frequency_hz=freq,
        sigma=sigma[order],
        modal_inertia=h_m[order],
        mechanical_damping=d_m,
        mode_shapes=q[:, order],
    )
