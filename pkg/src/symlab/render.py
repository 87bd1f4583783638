"""Figure rendering: montage strips and diversity x iteration grid tables.

A montage is a grayscale strip with one row per sequence (ground truth
first, then selected runs) and one column per selected time step, with
1-pixel separators between adjacent frames.  Values are clamped to [0,1]
and scaled to 8 bits on write.
"""

from __future__ import annotations

import csv
import math
import os

import numpy as np

from .io import write_pgm, write_png

SEPARATOR_VALUE = 0.5


def render_montage(
    sequences: list[list[np.ndarray]],
    out_path: str | None = None,
    separator_value: float = SEPARATOR_VALUE,
) -> np.ndarray:
    """Assemble rows x columns of equal-sized frames into one image.

    For R rows of C frames of size (fh, fw) the result is
    (R*fh + (R-1)) x (C*fw + (C-1)): single separator pixels between
    adjacent frames, no outer border.
    """
    if not sequences or not sequences[0]:
        raise ValueError("montage needs at least one sequence with one frame")
    ncols = len(sequences[0])
    if any(len(seq) != ncols for seq in sequences):
        raise ValueError("all sequences must have the same number of frames")
    fh, fw = sequences[0][0].shape
    nrows = len(sequences)
    out = np.full(
        (nrows * fh + (nrows - 1), ncols * fw + (ncols - 1)),
        separator_value,
        dtype=np.float32,
    )
    for r, seq in enumerate(sequences):
        for c, frame in enumerate(seq):
            if frame.shape != (fh, fw):
                raise ValueError(
                    f"frame {r},{c} has shape {frame.shape}, expected {(fh, fw)}"
                )
            out[r * (fh + 1) : r * (fh + 1) + fh,
                c * (fw + 1) : c * (fw + 1) + fw] = np.clip(frame, 0.0, 1.0)
    if out_path:
        if out_path.endswith(".png"):
            write_png(out, out_path)
        else:
            write_pgm(out, out_path)
    return out


def _diversity_key(d: str):
    return (1, 0.0) if d == "inf" else (0, float(d))


def metric_grid(
    rows: list[dict], task: str, time_step: int, metric: str = "accuracy"
) -> tuple[list[str], list[int], np.ndarray]:
    """Pivot eval metric rows into a diversity x iteration table.

    Returns (diversities, iterations, matrix); cells with no data are NaN,
    cells with several runs (seeds) are averaged.
    """
    cells: dict[tuple[str, int], list[float]] = {}
    for r in rows:
        if (r["task"] == task and r["phase"] == "eval"
                and r["metric"] == metric and r["step_or_time"] == time_step):
            cells.setdefault((r["diversity"], r["max_iter"]), []).append(r["value"])
    if not cells:
        raise ValueError(f"no eval rows for task={task} t={time_step} metric={metric}")
    divs = sorted({d for d, _ in cells}, key=_diversity_key)
    iters = sorted({m for _, m in cells})
    mat = np.full((len(divs), len(iters)), np.nan)
    for (d, m), vals in cells.items():
        mat[divs.index(d), iters.index(m)] = float(np.mean(vals))
    return divs, iters, mat


def write_grid_csv(divs, iters, mat, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["diversity"] + [f"it_{m}" for m in iters])
        for d, row in zip(divs, mat):
            wr.writerow([d] + ["" if math.isnan(v) else repr(float(v)) for v in row])


def write_grid_heatmap(mat: np.ndarray, path: str, cell: int = 24) -> None:
    """Grid table as a grayscale heatmap image; NaN cells render black."""
    img = np.where(np.isnan(mat), 0.0, np.clip(mat, 0.0, 1.0))
    big = np.kron(img, np.ones((cell, cell)))
    write_pgm(big, path)
