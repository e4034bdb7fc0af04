"""CSV tables with '#' metadata headers, and SVG figures."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .. import __version__
from .. import _kernels


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def base_metadata(cfg) -> dict:
    return {
        "version": f"v{__version__}",
        "backend": _kernels.BACKEND,
        "config": cfg.to_json(),
        "seed": cfg.seed,
        "target_location": repr(cfg.target),
        "stopping_rule": f"max|x^(t+1) - x^(t)| <= {cfg.convergence.tol!r}, max_iter {cfg.convergence.max_iter}",
    }


def write_table(path: str | Path, columns, rows, metadata: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key}: {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_table(path: str | Path):
    """(metadata, header, rows) from a file written by :func:`write_table`."""
    meta, body = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition(": ")
                meta[key] = value
            else:
                body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "meanshift-lab"
    return plt


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def plot_qq(path: str | Path, rows, title: str = "") -> Path:
    plt = _pyplot()
    fig, axes = plt.subplots(1, len(rows), figsize=(3.2 * len(rows), 3.2), squeeze=False)
    for ax, row in zip(axes[0], rows):
        est = np.asarray(row.sorted_estimates)
        q = np.asarray(row.normal_quantiles)
        ax.plot(q, est, ".", ms=3)
        if est.size > 1:
            slope, icpt = np.polyfit(q, est, 1)
            ax.plot(q, slope * q + icpt, "-", lw=1)
        ax.set_title(f"{row.kind}  r={row.correlation:.4f}" if row.correlation == row.correlation else row.kind)
        ax.set_xlabel("normal quantile")
    axes[0][0].set_ylabel("estimate")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    out = _save(fig, Path(path))
    plt.close(fig)
    return out


def plot_mse(path: str | Path, rows, title: str = "") -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.6))
    kinds = list(dict.fromkeys(r.kind for r in rows))
    for kind in kinds:
        sel = sorted((r for r in rows if r.kind == kind), key=lambda r: r.n)
        ax.plot([math.sqrt(r.n) for r in sel], [r.n_mse for r in sel], "o-", label=kind, ms=3)
    ax.set_xlabel("sqrt(n)")
    ax.set_ylabel("n x MSE")
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    out = _save(fig, Path(path))
    plt.close(fig)
    return out
