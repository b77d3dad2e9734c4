"""Figures written next to the CSV outputs of a registration run."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .field import ScalarField, VectorField  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 110,
    "savefig.bbox": "tight",
}


def plot_trace(trace, path) -> Path:
    """Objective history of every continuation stage, one curve per stage,
    plus the final objective parts per stage."""
    path = Path(path)
    with plt.rc_context(RC):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(8.0, 3.2), layout="constrained")
        offset = 0
        for rec in trace.stages:
            hist = np.asarray(rec.history)
            steps = offset + np.arange(len(hist))
            ax0.semilogy(steps, hist, label=f"level {rec.level}, gamma={rec.gamma:g}")
            offset += len(hist)
        ax0.set_xlabel("accepted iterate (cumulative)")
        ax0.set_ylabel("objective")
        ax0.legend()

        levels = [rec.level for rec in trace.stages]
        for key, marker in (("j", "o"), ("reg_psi", "s"), ("reg_hs", "^"), ("f", "x")):
            ax1.semilogy(levels, [max(getattr(r, key), 1e-300) for r in trace.stages], marker=marker, label=key)
        ax1.set_xlabel("level")
        ax1.set_xticks(levels)
        ax1.legend()
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_images(phi0: ScalarField, target: ScalarField, phiT: ScalarField, v: VectorField, path) -> Path | None:
    """Source, target, transported image and velocity magnitude (2-D only)."""
    if phi0.grid.ndim != 2:
        return None
    path = Path(path)
    extent = (0.0, phi0.grid.lengths[1], phi0.grid.lengths[0], 0.0)
    speed = np.sqrt(np.sum(v.components ** 2, axis=0))
    panels = [
        ("source", phi0.values),
        ("target", target.values),
        ("transported", phiT.values),
        ("|v|", speed),
    ]
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 4, figsize=(12.0, 3.0), layout="constrained")
        for ax, (title, img) in zip(axes, panels):
            im = ax.imshow(img, extent=extent, cmap="gray" if title != "|v|" else "viridis")
            ax.set_title(title)
            fig.colorbar(im, ax=ax, shrink=0.8)
        fig.savefig(path)
        plt.close(fig)
    return path
