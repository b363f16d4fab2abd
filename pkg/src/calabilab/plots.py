"""Self-contained SVG figures; the Agg backend keeps them free of any display."""
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .energy import DecayFit, EnergySample  # noqa: E402
from .potentials import TailReport  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "calabilab"
_SVG_METADATA = {"Date": None}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)
    return path


def plot_energies(
    samples: Sequence[EnergySample], path: Path, failure_time: Optional[float] = None
) -> Path:
    t = np.array([s.t for s in samples])
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    calabi = np.array([s.calabi for s in samples])
    gradk = np.array([s.gradk for s in samples])
    positive = calabi > 0
    if positive.any():
        top.semilogy(t[positive], calabi[positive], label="Ca")
    if (gradk > 0).any():
        top.semilogy(t[gradk > 0], gradk[gradk > 0], label=r"$\int|\nabla K|^2$")
    top.set_ylabel("energy")
    top.legend(loc="upper right")
    bottom.plot(t, [s.mabuchi_closed for s in samples], label="Ma (closed)")
    bottom.plot(t, [s.mabuchi_integrated for s in samples], "--", label="Ma (integrated)")
    bottom.plot(t, [s.liouville for s in samples], label="F")
    bottom.set_xlabel("t")
    bottom.legend(loc="upper right")
    if failure_time is not None:
        for ax in (top, bottom):
            ax.axvline(failure_time, color="red", linestyle=":")
    fig.tight_layout()
    return _save(fig, path)


def plot_decay(samples: Sequence[EnergySample], fit: DecayFit, path: Path) -> Path:
    t = np.array([s.t for s in samples])
    calabi = np.array([s.calabi for s in samples])
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(t[calabi > 0], calabi[calabi > 0], ".", label="Ca")
    window = np.linspace(fit.t_start, fit.t_end, 50)
    ax.semilogy(window, fit(window), label=f"fit, alpha={fit.alpha:.4g}")
    ax.set_xlabel("t")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_tail(rows: Sequence[TailReport], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    s = [r.s for r in rows]
    ax.semilogy(s, [max(r.length, 1e-300) for r in rows], "o-", label=r"$\int_s^t \sqrt{Ca}$")
    if all(r.sqrt_bound is not None for r in rows):
        ax.semilogy(s, [max(r.sqrt_bound, 1e-300) for r in rows], "--", label="fitted bound")
    ax.set_xlabel("s")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
