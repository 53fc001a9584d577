"""Self-contained SVG figures for CLI reports."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp, so identical inputs give identical files
matplotlib.rcParams["svg.hashsalt"] = "sbmkit"
matplotlib.rcParams["svg.fonttype"] = "path"


def emit_plot(series, path, scale="loglog", reference=None, xlabel="r", ylabel="", title=None):
    """Write an SVG with one line per (label, x, y) in ``series``.

    ``reference`` adds a dashed horizontal line at that value (e.g. the
    predicted constant 1 for ratio plots).
    """
    series = [s for s in series if len(s[1]) > 0]
    if not series:
        raise ValueError("nothing to plot: empty series")
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, x, y in series:
        ax.plot(np.asarray(x, float), np.asarray(y, float), marker="o", ms=3, label=str(label))
    if reference is not None:
        ax.axhline(reference, color="k", ls="--", lw=0.8, label="predicted")
    if scale in ("loglog", "logx"):
        ax.set_xscale("log")
    if scale in ("loglog", "logy"):
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
