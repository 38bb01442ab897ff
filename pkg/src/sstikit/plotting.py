"""SVG figures (matplotlib, optional dependency)."""

from __future__ import annotations

import numpy as np


def _plt():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover
        raise RuntimeError("plotting needs matplotlib: pip install sstikit[plot]") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    # stable SVG output
    plt.rcParams["svg.hashsalt"] = "sstikit"
    return plt


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    fig.clf()
    import matplotlib.pyplot as plt
    plt.close(fig)


def plot_trace(trace, path, names=("dw",)):
    plt = _plt()
    names = list(names)
    fig, axes = plt.subplots(len(names), 1, figsize=(8, 2.2 * len(names)), sharex=True, squeeze=False)
    for ax, n in zip(axes[:, 0], names):
        ax.plot(trace.time, trace[n], lw=0.6)
        ax.set_ylabel(n)
        ax.grid(True, lw=0.3)
    axes[-1, 0].set_xlabel("time (s)")
    _save(fig, path)


def plot_curves(curves, path, mode_hz=(), mechanical_damping=()):
    """Overlay of De(f) curves with the -D_m markers at each mode."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(8, 4))
    for c in curves:
        v = c.valid()
        ax.plot(v.f, v.De, marker=".", ms=3, lw=0.8, label=c.label or None)
    for f, d in zip(mode_hz, mechanical_damping):
        ax.axvline(f, color="0.7", lw=0.5)
        if d < 50:
            ax.plot([f], [-d], "kx")
    ax.axhline(0, color="k", lw=0.5)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("De (pu)")
    if any(c.label for c in curves):
        ax.legend()
    ax.grid(True, lw=0.3)
    _save(fig, path)


def plot_modes(modal, path, names=()):
    plt = _plt()
    q = modal.mode_shapes
    x = np.arange(1, q.shape[0] + 1)
    fig, ax = plt.subplots(figsize=(7, 4))
    for k in range(q.shape[1]):
        ax.plot(x, q[:, k] / np.max(np.abs(q[:, k])), marker="o", label=f"{modal.frequency_hz[k]:.2f} Hz")
    ax.set_xticks(x)
    if names:
        ax.set_xticklabels(names)
    ax.axhline(0, color="k", lw=0.5)
    ax.set_ylabel("normalized mode shape")
    ax.legend(fontsize=8)
    ax.grid(True, lw=0.3)
    _save(fig, path)


def plot_protection(time, envelope, curve, result, path):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(time, envelope, lw=0.8, label="envelope")
    ax.axhline(curve.pickup, color="C1", lw=0.6, ls="--", label="pickup")
    armed = [e for e in result.events if e.kind == "armed"]
    for e in armed:
        tt = np.linspace(0, max(time[-1] - e.time, 0.0), 200)
        ax.plot(e.time + tt, curve.allowed(tt), color="C3", lw=0.6)
    for e in result.events:
        if e.kind == "TRIP":
            ax.axvline(e.time, color="C3", lw=1.0)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("magnitude (pu)")
    ax.legend(fontsize=8)
    ax.grid(True, lw=0.3)
    _save(fig, path)
