"""Multi-panel figures from the simulator/CLI CSV bundles.

Three layouts are supported:

- ``comparison``: 3x2 panels (Q_g & T_r / rho_th & T_hx / rho_ext & average
  velocity) from one ``comparison.csv``;
- ``error``: overlaid thermal-power error curves from one or more
  ``error.csv`` files, one legend entry per input;
- ``precursors``: the six precursor-group concentrations from
  ``precursors.csv``.

Rendering is read-only on the inputs, deterministic under the pinned style,
and writes the output image atomically (temp file + rename).
"""

from __future__ import annotations

import csv
import os
import tempfile

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

# pinned style so that re-rendering the same inputs is byte-identical
STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "figure.constrained_layout.use": True,
}


class ColumnError(ValueError):
    """An input CSV is missing a required column."""


def read_csv(path: str, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Load a headered CSV into named float columns, checking `required`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ColumnError(f"{path}: empty file")
    header = rows[0]
    for name in required:
        if name not in header:
            raise ColumnError(f"{path}: missing column {name!r}")
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    if data.ndim != 2 or data.shape[0] == 0:
        raise ColumnError(f"{path}: no data rows")
    return {name: data[:, j] for j, name in enumerate(header)}


COMPARISON_COLUMNS = ("t", "Q_g_MW", "T_r", "rho_th", "T_hx",
                      "rho_ext_pcm", "v_avg_mps")
ERROR_COLUMNS = ("t", "dQ_g_MW")
PRECURSOR_COLUMNS = ("t", "C_1", "C_2", "C_3", "C_4", "C_5", "C_6")


def build_comparison(bundles: list[tuple[str, dict]]) -> plt.Figure:
    """3x2 panel figure; multiple bundles are overlaid with a legend."""
    panels = [
        ("Q_g_MW", "Q_g [MW]"), ("T_r", "T_r [K]"),
        ("rho_th", "rho_th [-]"), ("T_hx", "T_hx [K]"),
        ("rho_ext_pcm", "rho_ext [pcm]"), ("v_avg_mps", "v_avg [m/s]"),
    ]
    fig, axes = plt.subplots(3, 2, figsize=(8.0, 7.5), sharex=True)
    for ax, (column, ylabel) in zip(axes.ravel(), panels):
        for label, data in bundles:
            ax.plot(data["t"], data[column], label=label)
        ax.set_ylabel(ylabel)
    for ax in axes[-1]:
        ax.set_xlabel("t [s]")
    if len(bundles) > 1:
        axes[0, 0].legend()
    return fig


def build_error(bundles: list[tuple[str, dict]]) -> plt.Figure:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, data in bundles:
        ax.plot(data["t"], data["dQ_g_MW"], label=label)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("dQ_g [MW]")
    ax.legend()
    return fig


def build_precursors(bundles: list[tuple[str, dict]]) -> plt.Figure:
    if len(bundles) != 1:
        raise ValueError("the precursor layout takes exactly one input CSV")
    _, data = bundles[0]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for i in range(1, 7):
        ax.plot(data["t"], data[f"C_{i}"], label=f"C_{i}")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("precursor concentration [-]")
    ax.legend(ncols=2)
    return fig


LAYOUTS = {
    "comparison": (COMPARISON_COLUMNS, build_comparison),
    "error": (ERROR_COLUMNS, build_error),
    "precursors": (PRECURSOR_COLUMNS, build_precursors),
}


def render(layout: str, inputs: list[str], out_path: str,
           labels: list[str] | None = None) -> None:
    """Render one figure from the input CSVs and write it atomically."""
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}; expected one of {sorted(LAYOUTS)}")
    if not inputs:
        raise ValueError("at least one input CSV is required")
    if labels is not None and len(labels) != len(inputs):
        raise ValueError("one label per input CSV is required when labels are given")
    required, builder = LAYOUTS[layout]
    names = labels if labels is not None else [
        os.path.splitext(os.path.basename(p))[0] for p in inputs]
    bundles = [(name, read_csv(path, required))
               for name, path in zip(names, inputs)]
    with plt.rc_context(STYLE):
        fig = builder(bundles)
        try:
            _atomic_savefig(fig, out_path)
        finally:
            plt.close(fig)


def _atomic_savefig(fig: plt.Figure, out_path: str) -> None:
    out_dir = os.path.dirname(out_path) or "."
    os.makedirs(out_dir, exist_ok=True)
    suffix = os.path.splitext(out_path)[1] or ".png"
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fig.savefig(fh, format=suffix.lstrip("."), metadata={"Software": None})
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
