"""Figure rendering for run reports.

Every renderer writes a PNG next to the delimited outputs and closes its
figure, so batch runs do not accumulate matplotlib state. The Agg backend
is forced at import time; these functions never open a window.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# explicit format: callers may hand over a temp path without a .png suffix
# fixed metadata keeps PNGs byte-stable across reruns on one machine
_SAVEFIG = dict(dpi=120, format="png", metadata={"Software": "kernelfuse"})
_LOG_FLOOR = 1e-20


def render_spectrum(values, out_path, retained=None, title: str = ""):
    """Plot eigenvalues by rank on a log scale.

    `retained` draws a cut line after the kept leading directions.
    """
    vals = np.asarray(values, dtype=np.float64)
    ranks = np.arange(1, vals.size + 1)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.semilogy(ranks, np.maximum(vals, _LOG_FLOOR), "o-", color="tab:blue", ms=4)
    if retained is not None and 0 < retained < vals.size:
        ax.axvline(retained + 0.5, color="gray", ls="--", lw=1)
    ax.set_xlabel("rank")
    ax.set_ylabel("eigenvalue")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVEFIG)
    plt.close(fig)


def render_error_curves(ps, curve, baseline, out_path, ylabel: str = "RMSE",
                        diagonal_curve=None, title: str = ""):
    """Plot error against the number of kept directions.

    Blue: per-p errors of the reduced models. Red: all-features baseline.
    Green (optional): the companion diagonal-mode curve.
    """
    ps = np.asarray(ps)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.semilogy(ps, np.maximum(np.asarray(curve, dtype=np.float64), _LOG_FLOOR),
                "o-", color="tab:blue", ms=4, label="reduced")
    if diagonal_curve is not None:
        ax.semilogy(ps, np.maximum(np.asarray(diagonal_curve, dtype=np.float64), _LOG_FLOOR),
                    "s-", color="tab:green", ms=4, label="diagonal")
    ax.axhline(max(float(baseline), _LOG_FLOOR), color="tab:red", ls="-",
               lw=1.5, label="all features")
    ax.set_xlabel("kept directions p")
    ax.set_ylabel(ylabel)
    ax.set_xticks(ps)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVEFIG)
    plt.close(fig)


def render_trace(losses, grad_norms, out_path, title: str = ""):
    """Plot optimizer loss and gradient norm per iteration."""
    losses = np.asarray(losses, dtype=np.float64)
    its = np.arange(losses.size)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.semilogy(its, np.maximum(losses, _LOG_FLOOR), color="tab:blue", lw=1.2,
                label="loss")
    if grad_norms is not None:
        gn = np.asarray(grad_norms, dtype=np.float64)
        ax2 = ax.twinx()
        ax2.semilogy(its, np.maximum(gn, _LOG_FLOOR), color="tab:orange",
                     lw=0.9, alpha=0.7, label="|grad|")
        ax2.set_ylabel("gradient norm")
    ax.set_xlabel("iteration")
    ax.set_ylabel("LOOCV loss")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVEFIG)
    plt.close(fig)
