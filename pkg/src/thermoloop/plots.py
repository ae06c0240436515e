"""Figure output: a standalone script that redraws every figure from the emitted CSVs.

The script embeds :func:`draw` verbatim, so figures rendered here and figures
regenerated later from the script come from the same code.
"""

from __future__ import annotations

import inspect
import pprint
from dataclasses import asdict, dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class PlotSpec:
    """One figure: stacked panels, each plotting CSV columns against ``t``."""

    name: str
    csv: str
    panels: tuple[tuple[str, ...], ...]
    title: str = ""
    ylabels: tuple[str, ...] = ()
    logy: bool = False
    styles: dict = field(default_factory=dict)


def draw(spec: dict, data_dir: str, out_dir: str) -> str:
    import csv
    import os

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(os.path.join(data_dir, spec["csv"]), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {name: [float(r[i]) for r in body] for i, name in enumerate(header)}
    panels = spec["panels"]
    fig, axes = plt.subplots(len(panels), 1, figsize=(7, 2.4 * len(panels) + 0.6), sharex=True, squeeze=False)
    for ax, names, ylabel in zip(axes[:, 0], panels, list(spec["ylabels"]) + [""] * len(panels)):
        for name in names:
            ys = cols[name]
            if spec["logy"]:
                ys = [abs(v) if v != 0 else float("nan") for v in ys]
            ax.plot(cols["t"], ys, label=name, linewidth=0.9, **spec["styles"].get(name, {}))
        if spec["logy"]:
            ax.set_yscale("log")
        ax.set_ylabel(ylabel)
        ax.legend(loc="upper right", fontsize=8, ncol=min(len(names), 3))
        ax.grid(True, alpha=0.3)
    axes[-1, 0].set_xlabel("t")
    if spec["title"]:
        axes[0, 0].set_title(spec["title"])
    fig.tight_layout()
    path = os.path.join(out_dir, spec["name"] + ".png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


_SCRIPT = '''"""Regenerate figures from the CSV files in this directory (needs matplotlib)."""

import os
import sys

SPECS = {specs}


{draw_source}

if __name__ == "__main__":
    here = os.path.dirname(os.path.abspath(__file__))
    out = sys.argv[1] if len(sys.argv) > 1 else here
    os.makedirs(out, exist_ok=True)
    for spec in SPECS:
        print(draw(spec, here, out))
'''


def emit_plots(specs: list[PlotSpec], out_dir, render: bool = True, script_name: str = "plot_figures.py") -> list[Path]:
    """Write the plot script next to the CSVs and optionally render PNGs now."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = [asdict(s) for s in specs]
    script = _SCRIPT.format(specs=pprint.pformat(payload, indent=1, width=100), draw_source=inspect.getsource(draw))
    script_path = out_dir / script_name
    script_path.write_text(script)
    written = [script_path]
    if render:
        for spec in payload:
            written.append(Path(draw(spec, str(out_dir), str(out_dir))))
    return written
