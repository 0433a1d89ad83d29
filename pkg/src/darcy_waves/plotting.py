"""Figures: a gnuplot script over the CSV outputs, plus optional PNGs via matplotlib (Agg)."""
from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .io import read_table

RC = {
    "font.size": 9,
    "axes.labelsize": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "figure.dpi": 120,
    "savefig.bbox": "tight",
}


def gnuplot_script(profiles: Sequence[str] = (), branch: Optional[str] = None,
                   timeseries: Optional[str] = None, title: str = "") -> str:
    """Script rendering profile CSVs, the branch diagram and a norm time series to PNG files."""
    lines = ["# gnuplot script; run with: gnuplot plot.gp",
             "set datafile separator ','",
             "set terminal pngcairo size 900,600",
             "set key outside right"]
    if profiles:
        plots = ", ".join(f"'{p}' using 1:2 skip 1 with lines title '{Path(p).stem}'" for p in profiles)
        lines += ["set output 'profiles.png'", f"set title '{title} profiles'", "set xlabel 'x'",
                  "set ylabel 'eta'", f"plot {plots}"]
    if branch:
        lines += ["set output 'branch_c1.png'", "set title 'branch: kappa vs C1 norm'", "set xlabel 'kappa'",
                  "set ylabel 'C1 norm'", f"plot '{branch}' using 1:4 skip 1 with linespoints title 'c1_norm'",
                  "set output 'branch_clearance.png'", "set title 'branch: kappa vs clearance'",
                  "set ylabel 'min(eta + b)'",
                  f"plot '{branch}' using 1:6 skip 1 with linespoints title 'clearance'"]
    if timeseries:
        lines += ["set output 'timeseries.png'", "set title 'norms and drift'", "set xlabel 't'",
                  "set ylabel 'value'", "set logscale y",
                  f"plot '{timeseries}' using 1:2 skip 1 with lines title 'sup', "
                  f"'{timeseries}' using 1:6 skip 1 with lines title 'drift'",
                  "unset logscale y"]
    lines.append("unset output")
    return "\n".join(lines) + "\n"


def render(out_dir, profiles: Sequence[str] = (), branch: Optional[str] = None,
           timeseries: Optional[str] = None, title: str = "") -> List[Path]:
    """Render the same figures as :func:`gnuplot_script` with matplotlib; returns written paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    written: List[Path] = []
    with plt.rc_context(RC):
        if profiles:
            fig, ax = plt.subplots(figsize=(6, 3.5))
            for p in profiles:
                _, d = read_table(out_dir / p)
                ax.plot(d[:, 0], d[:, 1], label=Path(p).stem)
            ax.set_xlabel("x")
            ax.set_ylabel(r"$\eta$")
            ax.set_title(f"{title} profiles".strip())
            if len(profiles) <= 10:
                ax.legend(fontsize=7)
            written.append(_save(fig, out_dir / "profiles.png"))
        if branch:
            _, d = read_table(out_dir / branch)
            fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
            axes[0].plot(d[:, 0], d[:, 3], "o-", ms=3)
            axes[0].set_xlabel(r"$\kappa$")
            axes[0].set_ylabel(r"$C^1$ norm")
            if np.all(np.isfinite(d[:, 5])):
                axes[1].plot(d[:, 0], d[:, 5], "o-", ms=3)
                axes[1].set_ylabel(r"$\min(\eta + b)$")
            else:
                axes[1].semilogy(d[:, 0], np.maximum(d[:, 2], 1e-300), "o-", ms=3)
                axes[1].set_ylabel("residual")
            axes[1].set_xlabel(r"$\kappa$")
            written.append(_save(fig, out_dir / "branch.png"))
        if timeseries:
            _, d = read_table(out_dir / timeseries)
            fig, ax = plt.subplots(figsize=(6, 3.5))
            ax.semilogy(d[:, 0], np.maximum(d[:, 1], 1e-300), label="sup")
            if np.all(np.isfinite(d[:, 5])):
                ax.semilogy(d[:, 0], np.maximum(d[:, 5], 1e-300), label="drift")
            ax.set_xlabel("t")
            ax.legend()
            written.append(_save(fig, out_dir / "timeseries.png"))
    return written


def _save(fig, path: Path) -> Path:
    import matplotlib.pyplot as plt

    fig.savefig(path)
    plt.close(fig)
    return path
