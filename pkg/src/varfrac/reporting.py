"""Delimited-text reports and the figures rendered alongside them.

CSV files are the data boundary: a header comment carries the manifest
hash and code version, floats are written in shortest round-trip form, and
identical inputs produce byte-identical files.  Each report path also
renders a matplotlib figure next to the CSV (same basename, .png), purely
derived from the CSV content.
"""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import __version__

__all__ = ["write_csv", "figure_path", "render_field", "render_series",
           "render_matrix", "render_summary"]


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float) or isinstance(value, np.floating):
        v = float(value)
        if math.isnan(v):
            return "nan"
        return repr(v)
    text = str(value)
    if "," in text or '"' in text or "\n" in text:
        text = '"' + text.replace('"', '""') + '"'
    return text


def write_csv(path, columns, rows, manifest_hash, extra_comments=()):
    """Write a deterministic CSV with a '#'-prefixed manifest header."""
    lines = [f"# manifest_hash={manifest_hash}", f"# varfrac={__version__}"]
    for comment in extra_comments:
        lines.append(f"# {comment}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def figure_path(csv_path):
    base, _ = os.path.splitext(str(csv_path))
    return base + ".png"


def _new_axes(title):
    fig, ax = plt.subplots(figsize=(6.0, 4.0), constrained_layout=True)
    ax.set_title(title)
    return fig, ax


def _save(fig, out):
    fig.savefig(out, dpi=130)
    plt.close(fig)


def render_field(csv_path, grid, values, title, overlay=None, overlay_label=None):
    """Plot a nodal field: a line in 1D, a pixel map in 2D."""
    out = figure_path(csv_path)
    fig, ax = _new_axes(title)
    if grid.dim == 1:
        x = grid.coords[:, 0]
        ax.plot(x, values, lw=1.2, label="value")
        if overlay is not None:
            ax.plot(x, overlay, lw=1.0, ls="--", label=overlay_label or "overlay")
            ax.legend(frameon=False)
        ax.set_xlabel("x")
    else:
        img = np.full(grid.shape, np.nan)
        idx = np.arange(grid.n_nodes)
        img[tuple(np.array([grid.multi_index(i) for i in idx]).T)] = np.where(
            grid.interior, values, np.nan
        )
        pc = ax.imshow(img.T, origin="lower", aspect="equal",
                       extent=[grid.origin[0], grid.origin[0] + grid.dx * (grid.shape[0] - 1),
                               grid.origin[1], grid.origin[1] + grid.dx * (grid.shape[1] - 1)])
        fig.colorbar(pc, ax=ax, shrink=0.85)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    _save(fig, out)
    return out


def render_series(csv_path, xs, ys, title, xlabel, ylabel, logy=False, fit=None):
    """Plot one or more named series; ``ys`` maps label -> array."""
    out = figure_path(csv_path)
    fig, ax = _new_axes(title)
    for label, y in ys.items():
        ax.plot(xs, y, marker="." if len(xs) < 60 else None, lw=1.1, label=label)
    if fit is not None:
        ax.plot(xs, fit[1], lw=1.0, ls="--", label=fit[0])
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(ys) > 1 or fit is not None:
        ax.legend(frameon=False)
    _save(fig, out)
    return out


def render_matrix(csv_path, matrix, title):
    out = figure_path(csv_path)
    fig, ax = _new_axes(title)
    dense = np.asarray(matrix if isinstance(matrix, np.ndarray) else matrix.todense())
    mag = np.abs(dense)
    pc = ax.imshow(np.log10(mag + mag.max() * 1e-16), origin="upper", aspect="equal")
    fig.colorbar(pc, ax=ax, shrink=0.85, label="log10 |A|")
    _save(fig, out)
    return out


def render_summary(csv_path, names, passed, title):
    out = figure_path(csv_path)
    fig, ax = plt.subplots(figsize=(7.0, 0.42 * len(names) + 1.2),
                           constrained_layout=True)
    colors = ["#2a9d2a" if p else "#cc3333" for p in passed]
    ax.barh(range(len(names)), [1] * len(names), color=colors)
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=8)
    ax.set_xticks([])
    ax.invert_yaxis()
    ax.set_title(title)
    _save(fig, out)
    return out
