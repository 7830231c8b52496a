"""Figures for violation reports.  Uses the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_noise_curve(deltas: Sequence[float], values: Sequence[float], local_max: float,
                     path, claimed: float | None = None, title: str = "") -> Path:
    """Bell value against the uniform-noise weight, with the local bound drawn in."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5.0, 3.5), dpi=100)
    ax.plot(deltas, values, marker="o", color="tab:blue", label="B(mixed family)")
    ax.axhline(local_max, color="tab:red", linestyle="--", label="local maximum")
    if claimed is not None:
        ax.axhline(claimed, color="tab:green", linestyle=":", label="claimed value")
    ax.set_xlabel("noise weight delta")
    ax.set_ylabel("Bell value")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    # no Software/date chunks, so identical inputs give identical files
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path
