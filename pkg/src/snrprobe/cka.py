"""Linear centered kernel alignment between clean and noisy embeddings.

For matrices X (n x d1) and Y (n x d2) with column-centered versions Xc,
Yc, the similarity is

    CKA(X, Y) = ||Yc' Xc||_F^2 / (||Xc' Xc||_F * ||Yc' Yc||_F)

which lies in [0, 1], is symmetric, and is invariant to orthogonal
transforms, isotropic scaling, and translation of either argument. Per
(layer, SNR) cell the default sample unit is one row per utterance,
computed per noise type and averaged across noise types; confidence
intervals come from a seeded percentile bootstrap over noise types.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .embeddings import CLEAN, EmbeddingSet
from .errors import DegenerateInput, MissingCell, RowMismatch, TooFewRows
from .util import derive_rng

ROW_MODES = ("utterances", "centroids")


@dataclass
class CKAConfig:
    bootstrap_resamples: int = 1000
    ci_level: float = 0.95
    rng_seed: int = 0
    rows: str = "utterances"

    def __post_init__(self):
        if self.bootstrap_resamples < 1:
            raise ValueError("bootstrap_resamples must be >= 1")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must be in (0, 1)")
        if self.rows not in ROW_MODES:
            raise ValueError(f"rows must be one of {ROW_MODES}")


@dataclass
class CKAPoint:
    layer_id: str
    snr_db: int
    cka: float
    ci_low: float
    ci_high: float
    n_rows: int


def center_columns(X: np.ndarray) -> np.ndarray:
    """Subtract each column's mean; requires at least two rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TooFewRows("need an n x d matrix with n >= 2")
    return X - X.mean(axis=0, keepdims=True)


def linear_cka(X: np.ndarray, Y: np.ndarray) -> float:
    X, Y = np.asarray(X, dtype=np.float64), np.asarray(Y, dtype=np.float64)
    if X.shape[0] != Y.shape[0]:
        raise RowMismatch(f"row counts differ: {X.shape[0]} vs {Y.shape[0]}")
    Xc, Yc = center_columns(X), center_columns(Y)
    x_norm = np.linalg.norm(Xc.T @ Xc)
    y_norm = np.linalg.norm(Yc.T @ Yc)
    if x_norm == 0.0 or y_norm == 0.0:
        raise DegenerateInput("centered matrix is identically zero")
    cross = np.linalg.norm(Yc.T @ Xc) ** 2
    return float(cross / (x_norm * y_norm))


def _aligned_utterances(embeddings: EmbeddingSet, layer_id: str, noise_type: str,
                        snr_db: int) -> list[str]:
    noisy = set(embeddings.cell_utterances(layer_id, noise_type, snr_db))
    clean = set(embeddings.cell_utterances(layer_id, CLEAN, None))
    utts = sorted(noisy & clean)
    if not utts:
        raise MissingCell(
            f"no aligned utterances for layer={layer_id} noise={noise_type} snr={snr_db}")
    return utts


def per_noise_cka(embeddings: EmbeddingSet, layer_id: str, snr_db: int) -> dict[str, float]:
    """Clean-vs-noisy CKA per noise type, rows = aligned utterances."""
    out = {}
    for noise_type in embeddings.noise_types:
        utts = _aligned_utterances(embeddings, layer_id, noise_type, snr_db)
        X = embeddings.matrix(layer_id, CLEAN, None, utts)
        Y = embeddings.matrix(layer_id, noise_type, snr_db, utts)
        out[noise_type] = min(1.0, max(0.0, linear_cka(X, Y)))
    return out


def _percentile_ci(samples: np.ndarray, point: float, ci_level: float):
    alpha = 1.0 - ci_level
    low, high = np.percentile(samples, [100.0 * alpha / 2.0, 100.0 * (1.0 - alpha / 2.0)])
    # enforce the CKAPoint invariant 0 <= low <= point <= high <= 1
    return max(0.0, min(float(low), point)), min(1.0, max(float(high), point))


def cka_profile(embeddings: EmbeddingSet, layer_id: str, snr_db: int,
                config: CKAConfig) -> CKAPoint:
    """One (layer, SNR) cell: point estimate plus bootstrap CI.

    ``rows="utterances"``: per-noise CKA over utterance rows, averaged
    across noise types; the bootstrap resamples the per-noise values.
    ``rows="centroids"``: rows are still utterances, but each noisy row is
    the utterance's centroid across noise types (noise averaging happens
    before the kernel instead of after); the bootstrap resamples which
    noise types enter the centroid. The bootstrap stream is derived from
    (seed, layer, snr) so evaluation order is irrelevant.
    """
    rng = derive_rng(config.rng_seed, f"cka|{layer_id}|{snr_db}")

    if config.rows == "utterances":
        per_noise = per_noise_cka(embeddings, layer_id, snr_db)
        values = np.array([per_noise[m] for m in sorted(per_noise)])
        point = float(values.mean())
        n_rows = min(
            len(_aligned_utterances(embeddings, layer_id, m, snr_db))
            for m in embeddings.noise_types)
        if values.size == 1:
            low = high = point
        else:
            idx = rng.integers(0, values.size, size=(config.bootstrap_resamples, values.size))
            low, high = _percentile_ci(values[idx].mean(axis=1), point, config.ci_level)
        return CKAPoint(layer_id, int(snr_db), point, low, high, n_rows)

    # centroid rows: utterances common to every noise type; each noisy row
    # is that utterance's centroid over noise types
    aligned = [set(_aligned_utterances(embeddings, layer_id, m, snr_db))
               for m in embeddings.noise_types]
    utts = sorted(set.intersection(*aligned))
    if len(utts) < 2:
        raise TooFewRows("centroid mode needs two utterances shared by all noise types")
    X = embeddings.matrix(layer_id, CLEAN, None, utts)
    stacks = np.stack([embeddings.matrix(layer_id, m, snr_db, utts)
                       for m in embeddings.noise_types])
    point = min(1.0, max(0.0, linear_cka(X, stacks.mean(axis=0))))
    n_noise = stacks.shape[0]
    if n_noise == 1:
        low = high = point
    else:
        boots = []
        for _ in range(config.bootstrap_resamples):
            pick = rng.integers(0, n_noise, size=n_noise)
            try:
                boots.append(min(1.0, max(0.0, linear_cka(X, stacks[pick].mean(axis=0)))))
            except DegenerateInput:
                continue  # resampled centroid collapsed to a constant matrix
        if boots:
            low, high = _percentile_ci(np.array(boots), point, config.ci_level)
        else:
            low = high = point
    return CKAPoint(layer_id, int(snr_db), point, low, high, len(utts))


def cka_table(embeddings: EmbeddingSet, config: CKAConfig) -> list[CKAPoint]:
    """Evaluate the full (layer x SNR grid) similarity table."""
    points = []
    for info in embeddings.layers:
        for snr in embeddings.snr_grid_db:
            points.append(cka_profile(embeddings, info.layer_id, snr, config))
    return points


CKA_CSV_COLUMNS = ["layer_id", "block", "depth_index", "snr_db",
                   "cka", "ci_low", "ci_high", "n_rows"]


def write_cka_csv(points: list[CKAPoint], embeddings: EmbeddingSet, path) -> None:
    rows = sorted(points, key=lambda p: (embeddings.depth_index(p.layer_id), p.snr_db))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CKA_CSV_COLUMNS)
        for p in rows:
            info = embeddings.layer(p.layer_id)
            writer.writerow([p.layer_id, info.block, embeddings.depth_index(p.layer_id),
                             p.snr_db, repr(p.cka), repr(p.ci_low), repr(p.ci_high),
                             p.n_rows])


def read_cka_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CKA_CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        out = []
        for row in reader:
            out.append({
                "layer_id": row["layer_id"],
                "block": row["block"],
                "depth_index": int(row["depth_index"]),
                "snr_db": int(row["snr_db"]),
                "cka": float(row["cka"]),
                "ci_low": float(row["ci_low"]),
                "ci_high": float(row["ci_high"]),
                "n_rows": int(row["n_rows"]),
            })
        return out
