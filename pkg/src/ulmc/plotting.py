"""Histogram figure for estimate results."""
from __future__ import annotations

import os
import tempfile

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_histogram(result, path: str, title: str = "", unit: str = "") -> None:
    """Write a bar chart of ``result.histogram()`` to ``path`` (format from
    the extension).  The file is replaced atomically."""
    counts, edges = result.histogram()
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.bar(edges[:-1], counts, width=edges[1:] - edges[:-1], align="edge",
           color="#4c72b0", edgecolor="#2a3f66", linewidth=0.4)
    ax.set_xlabel("value" + (f" [{unit}]" if unit else ""))
    ax.set_ylabel("runs")
    ax.set_title(title or f"{len(result.samples)} runs")
    fig.tight_layout()
    d = os.path.dirname(os.path.abspath(path))
    ext = os.path.splitext(path)[1] or ".png"
    fd, tmp = tempfile.mkstemp(dir=d, suffix=ext)
    os.close(fd)
    try:
        # fixed metadata keeps repeated renders byte-identical
        meta = {"Software": None} if ext.lower() == ".png" else None
        fig.savefig(tmp, metadata=meta)
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)
