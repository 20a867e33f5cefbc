"""Report figures (rendered off-screen to files)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import OUTCOME_KEYS, EvalReport  # noqa: E402
from .heatmap_io import DIFFICULTIES  # noqa: E402

OUTCOME_LABELS = ("1st", "2nd", "3rd", "none")


def plot_outcome_counts(report: EvalReport, path: str | os.PathLike) -> None:
    """Grouped bars of outcome counts, one panel per difficulty plus overall."""
    groups = list(DIFFICULTIES) + ["overall"]
    fig, axes = plt.subplots(1, len(groups), figsize=(3.2 * len(groups), 3.0), sharey=False)
    x = np.arange(len(OUTCOME_KEYS))
    for ax, group in zip(axes, groups):
        counts = report.overall if group == "overall" else report.per_difficulty[group]
        vals = [counts[k] for k in OUTCOME_KEYS]
        ax.bar(x, vals, color="#4c72b0", width=0.6, label=report.method)
        ax.set_xticks(x)
        ax.set_xticklabels(OUTCOME_LABELS)
        ax.set_title(group)
        ax.set_ylim(0, max(1, max(vals)) * 1.15)
        for xi, v in zip(x, vals):
            ax.text(xi, v, str(v), ha="center", va="bottom", fontsize=8)
    axes[0].set_ylabel("expressions")
    axes[-1].legend(loc="upper right", fontsize=8, frameon=False)
    fig.tight_layout()
    # No timestamp in metadata so files are reproducible.
    fig.savefig(path, format="png", dpi=100, metadata={"Software": None})
    plt.close(fig)
