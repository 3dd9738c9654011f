"""Plot bundles for scaling data.

Each bundle is a stem with three files next to each other:

- ``<stem>.dat``: two whitespace-separated columns with a ``#`` header,
- ``<stem>.gp``: a gnuplot script that reads the ``.dat`` file,
- ``<stem>.png``: the same figure rendered with matplotlib (Agg).

The ``.dat``/``.gp`` pair is the portable output; the PNG is a convenience.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = ["write_plot_bundle"]


def _gnuplot_script(dat_name: str, png_name: str, xlabel: str, ylabel: str,
                    title: str, fit) -> str:
    lines = [
        "# log-log scatter with optional power-law fit",
        "set terminal pngcairo size 800,600",
        f"set output '{png_name}'",
        "set logscale xy",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        f"set title '{title}'",
        "set key left top",
        "set grid",
    ]
    plot = f"plot '{dat_name}' using 1:2 with points pt 7 title 'data'"
    if fit is not None:
        slope, intercept = float(fit[0]), float(fit[1])
        lines.append(f"a = {intercept!r}")
        lines.append(f"b = {slope!r}")
        plot += ", exp(a) * x**b with lines title sprintf('slope %.3f', b)"
    lines.append(plot)
    return "\n".join(lines) + "\n"


def write_plot_bundle(stem, x: Sequence[float], y: Sequence[float], fit=None,
                      xlabel: str = "x", ylabel: str = "y", title: str = "",
                      png: bool = True) -> list[Path]:
    """Write ``stem.dat``, ``stem.gp`` and (optionally) ``stem.png``.

    Parameters
    ----------
    stem : str or Path
        Output path without extension.
    x, y : sequences of positive floats
    fit : (slope, intercept, ...) or None
        Coefficients of ``log y = intercept + slope * log x``; drawn as a line.

    Returns
    -------
    list of Path
        The files written, in the order above.
    """
    stem = Path(stem)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d and of equal length")
    stem.parent.mkdir(parents=True, exist_ok=True)
    dat = stem.with_suffix(".dat")
    gp = stem.with_suffix(".gp")
    out_png = stem.with_suffix(".png")

    rows = [f"# {xlabel} {ylabel}"] + [f"{a!r} {b!r}" for a, b in zip(x.tolist(), y.tolist())]
    dat.write_text("\n".join(rows) + "\n")
    gp.write_text(_gnuplot_script(dat.name, out_png.name, xlabel, ylabel, title, fit))
    written = [dat, gp]
    if png:
        _render_png(out_png, x, y, fit, xlabel, ylabel, title)
        written.append(out_png)
    return written


def _render_png(path: Path, x, y, fit: Optional[Sequence[float]], xlabel, ylabel, title):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    try:
        ax.loglog(x, y, "o", label="data")
        if fit is not None and len(x):
            xs = np.geomspace(x.min(), x.max(), 100)
            ax.loglog(xs, np.exp(fit[1]) * xs ** fit[0], "-", label=f"slope {fit[0]:.3f}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(loc="upper left")
        fig.tight_layout()
        # no Software/date metadata, so repeated runs give identical bytes
        fig.savefig(path, dpi=100, metadata={"Software": None})
    finally:
        plt.close(fig)
