"""SVG charts of 1D measures and potentials."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

try:  # pragma: no cover - optional dependency
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    _MATPLOTLIB_AVAILABLE = True
except Exception:  # pragma: no cover - optional dependency
    plt = None  # type: ignore
    _MATPLOTLIB_AVAILABLE = False

from .convexfn import ConvexFunction
from .measures import DiscreteMeasure

logger = logging.getLogger(__name__)

Series = Tuple[str, DiscreteMeasure]


def plotting_available() -> bool:
    return _MATPLOTLIB_AVAILABLE


def plot_measures(
    path: Path,
    measures: Sequence[Series],
    potential: Optional[ConvexFunction] = None,
    title: str = "",
) -> bool:
    """Bar chart of 1D measures with an optional potential drawn as a line on a twin axis.

    Returns False (after logging a warning) when the chart cannot be produced.
    """

    if not _MATPLOTLIB_AVAILABLE:
        logger.warning("matplotlib is not installed; skipping plot %s", path)
        return False
    if any(p.dim != 1 for _, p in measures):
        logger.warning("Only measures on R can be plotted; skipping plot %s", path)
        return False

    fig, ax = plt.subplots(figsize=(8, 4.5))
    lo = min(float(p.points_1d.min()) for _, p in measures)
    hi = max(float(p.points_1d.max()) for _, p in measures)
    width = 0.8 * (hi - lo) / max(sum(p.size for _, p in measures), 1) or 0.05
    for offset, (label, p) in enumerate(measures):
        ax.bar(p.points_1d + offset * width / len(measures), p.weights, width=width, alpha=0.6, label=label)
    ax.set_xlabel("x")
    ax.set_ylabel("mass")
    if potential is not None and potential.dim == 1:
        grid = np.linspace(lo - 0.1 * (hi - lo + 1.0), hi + 0.1 * (hi - lo + 1.0), 400)
        values = potential.values(grid[:, None])
        twin = ax.twinx()
        twin.plot(grid[np.isfinite(values)], values[np.isfinite(values)], color="black", lw=1.5, label="potential")
        twin.set_ylabel("potential")
    ax.legend(loc="upper left")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(str(path), format="svg")
    plt.close(fig)
    logger.info("Wrote plot %s", path)
    return True


__all__ = ["plot_measures", "plotting_available"]
