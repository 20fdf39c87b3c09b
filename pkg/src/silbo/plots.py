"""Figure rendering for experiment reports.

Figures are written to files next to the CSV output; nothing here opens a
display.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_COLORS = {
    "silbo-bu": "tab:blue",
    "silbo-td": "tab:orange",
    "rembo": "tab:green",
    "random": "tab:gray",
}


def convergence_figure(summary, path, title=""):
    """Mean incumbent per iteration with a +-1 std band per method.

    ``summary`` maps method name -> (t, mean_best, std_best) arrays.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for method, (ts, mean, std) in summary.items():
        color = _COLORS.get(method)
        ax.plot(ts, mean, label=method, color=color)
        ax.fill_between(ts, mean - std, mean + std, alpha=0.18, color=color)
    ax.set_xlabel("iteration")
    ax.set_ylabel("best value found")
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right", fontsize=9)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def embedding_figure(z, y, path, title=""):
    """Scatter of response values against each embedded direction."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    y = np.asarray(y, dtype=float)
    r = z.shape[1]
    fig, axes = plt.subplots(1, r, figsize=(4.2 * r, 3.6), squeeze=False)
    for i in range(r):
        ax = axes[0, i]
        ax.scatter(z[:, i], y, s=18, alpha=0.8)
        ax.set_xlabel(f"z_{i + 1}")
        ax.set_ylabel("y" if i == 0 else "")
        ax.grid(alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
