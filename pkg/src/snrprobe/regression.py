"""Ordinary least squares and Spearman rank correlation for SNR trends.

Per-layer CKA-vs-SNR profiles get a straight-line fit whose slope and
0 dB intercept summarize noise sensitivity; Spearman rho is used where
only monotonicity matters (diffusion coordinate vs SNR).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import (AllTied, ConstantPredictor, IncompleteGrid, LengthMismatch,
                     TooFewRows)


@dataclass
class RegressionSummary:
    slope: float
    intercept: float
    r_squared: float
    n: int
    degenerate: bool = False


def ols_fit(x, y) -> RegressionSummary:
    """Least-squares line y = slope * x + intercept.

    The intercept is the fitted value at x = 0, so with SNR in dB on the
    x axis it reads as the 0 dB level. A constant response is reported as
    slope 0 with ``r_squared`` 0 and ``degenerate`` set, rather than the
    0/0 form.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"shapes {x.shape} and {y.shape} do not align")
    if x.size < 3:
        raise TooFewRows("need at least 3 points for a meaningful line")
    x_var = np.sum((x - x.mean()) ** 2)
    if x_var == 0.0:
        raise ConstantPredictor("predictor has zero variance")
    slope = float(np.sum((x - x.mean()) * (y - y.mean())) / x_var)
    intercept = float(y.mean() - slope * x.mean())
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    # a target that is constant up to rounding has no meaningful R^2;
    # the threshold is relative so genuinely small slopes still count
    if ss_tot <= 1e-24 * max(1.0, float(np.sum(y * y))):
        return RegressionSummary(0.0, float(y.mean()), 0.0, x.size, degenerate=True)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    r_squared = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return RegressionSummary(slope, intercept, r_squared, x.size)


def spearman_rho(x, y) -> float:
    """Pearson correlation of average ranks; ties share their mean rank."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"shapes {x.shape} and {y.shape} do not align")
    if x.size < 2:
        raise TooFewRows("need at least 2 points")
    rx = stats.rankdata(x, method="average")
    ry = stats.rankdata(y, method="average")
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        raise AllTied("all values tied in one argument; rank correlation undefined")
    return float(np.corrcoef(rx, ry)[0, 1])


@dataclass
class LayerFit:
    layer_id: str
    block: str
    depth_index: int
    summary: RegressionSummary
    is_skip_input: bool
    is_skip_output: bool
    is_local_slope_max: bool


def profile_layers(cka_points, embeddings, fit_mode: str = "averaged_cka") -> list[LayerFit]:
    """Fit CKA vs SNR per layer, in manifest depth order.

    ``averaged_cka`` fits the noise-averaged profile (the values stored in
    the similarity table). ``per_noise_fits`` instead fits each noise
    type's profile separately and averages slope, intercept, and R^2;
    this needs the embeddings, not just the table. A layer is a local
    slope maximum when its slope strictly exceeds both same-block
    neighbours (one-sided at block edges).
    """
    if fit_mode not in ("averaged_cka", "per_noise_fits"):
        raise ValueError(f"unknown fit_mode {fit_mode!r}")
    grid = list(embeddings.snr_grid_db)
    by_layer: dict[str, dict[int, float]] = {}
    for p in cka_points:
        by_layer.setdefault(p.layer_id, {})[p.snr_db] = p.cka

    fits = []
    for info in embeddings.layers:
        cell = by_layer.get(info.layer_id, {})
        missing = [s for s in grid if s not in cell]
        if missing:
            raise IncompleteGrid(f"layer {info.layer_id} lacks SNRs {missing}")
        x = np.array(grid, dtype=np.float64)
        if fit_mode == "averaged_cka":
            y = np.array([cell[s] for s in grid])
            summary = ols_fit(x, y)
        else:
            from .cka import per_noise_cka
            per_noise = {s: per_noise_cka(embeddings, info.layer_id, s) for s in grid}
            parts = [ols_fit(x, np.array([per_noise[s][m] for s in grid]))
                     for m in embeddings.noise_types]
            summary = RegressionSummary(
                slope=float(np.mean([p.slope for p in parts])),
                intercept=float(np.mean([p.intercept for p in parts])),
                r_squared=float(np.mean([p.r_squared for p in parts])),
                n=len(grid),
                degenerate=any(p.degenerate for p in parts))
        fits.append(LayerFit(info.layer_id, info.block, embeddings.depth_index(info.layer_id),
                             summary, info.skip_input, info.skip_output, False))

    # local slope maxima within each block, one-sided at the edges
    for i, fit in enumerate(fits):
        left = fits[i - 1] if i > 0 and fits[i - 1].block == fit.block else None
        right = fits[i + 1] if i + 1 < len(fits) and fits[i + 1].block == fit.block else None
        above_left = left is None or fit.summary.slope > left.summary.slope
        above_right = right is None or fit.summary.slope > right.summary.slope
        fit.is_local_slope_max = above_left and above_right
    return fits


FIT_CSV_COLUMNS = ["layer_id", "block", "depth_index", "slope", "intercept",
                   "r_squared", "is_skip_input", "is_skip_output", "is_local_slope_max"]


def write_fit_csv(fits: list[LayerFit], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIT_CSV_COLUMNS)
        for f in sorted(fits, key=lambda f: f.depth_index):
            writer.writerow([f.layer_id, f.block, f.depth_index,
                             repr(f.summary.slope), repr(f.summary.intercept),
                             repr(f.summary.r_squared),
                             str(f.is_skip_input).lower(), str(f.is_skip_output).lower(),
                             str(f.is_local_slope_max).lower()])


def read_fit_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != FIT_CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        out = []
        for row in reader:
            out.append({
                "layer_id": row["layer_id"],
                "block": row["block"],
                "depth_index": int(row["depth_index"]),
                "slope": float(row["slope"]),
                "intercept": float(row["intercept"]),
                "r_squared": float(row["r_squared"]),
                "is_skip_input": row["is_skip_input"] == "true",
                "is_skip_output": row["is_skip_output"] == "true",
                "is_local_slope_max": row["is_local_slope_max"] == "true",
            })
        return out
