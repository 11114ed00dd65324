"""Diffusion-map geometry over embedding centroids.

Points are compared through a random walk on a Gaussian affinity graph:
W_ij = exp(-||x_i - x_j||^2 / epsilon), row-normalized to a Markov matrix
P = D^-1 W. Eigenpairs come from the symmetric conjugate
S = D^-1/2 W D^-1/2, and the right eigenvectors psi = D^-1/2 v are scaled
so that sum_i pi_i psi_i^2 = 1 with pi the stationary distribution. The
embedding coordinate for eigenpair j at diffusion time t is
lambda_j^t * psi_j, and Euclidean distance over all n-1 nontrivial
coordinates equals the diffusion distance

    D_t(i, j)^2 = sum_k (P^t_ik - P^t_jk)^2 / pi_k.

Two drivers cover the probing study: ``intra_layer`` embeds one layer's
per-SNR centroids and tracks the dominant coordinate against SNR, and
``inter_layer`` embeds the layers themselves at a fixed SNR alongside
their clean-speech reference points.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from collections import Counter

import numpy as np
from scipy import linalg

from .embeddings import CLEAN, CentroidSet, LayerInfo
from .errors import (AllTied, BadEpsilon, EigenFailure, EmptyMatrix,
                     IncompleteGrid, MissingCell, TooFewRows, ZeroRow)
from .regression import RegressionSummary, ols_fit, spearman_rho

EPSILON_MODES = ("median", "fixed")
INTRA_ROW_MODES = ("noise_averaged", "per_noise")
INTER_LAYER_MODES = ("first_in_block", "all")
MAP_FAMILIES = ("both", "intra", "inter")

UNIT_EIGTOL = 1e-8
EIG_SLACK = 1e-10


@dataclass
class DiffusionConfig:
    epsilon_mode: str = "median"
    epsilon_value: float | None = None
    n_coords: int = 5
    diffusion_time: int = 1
    intra_rows: str = "noise_averaged"
    inter_layers: str = "first_in_block"
    include_clean: bool = True
    maps: str = "both"

    def __post_init__(self):
        if self.epsilon_mode not in EPSILON_MODES:
            raise ValueError(f"epsilon_mode must be one of {EPSILON_MODES}")
        if self.epsilon_mode == "fixed":
            if self.epsilon_value is None or not self.epsilon_value > 0:
                raise BadEpsilon("fixed epsilon_mode needs epsilon_value > 0")
        if self.n_coords < 1:
            raise ValueError("n_coords must be >= 1")
        if int(self.diffusion_time) != self.diffusion_time or self.diffusion_time < 1:
            raise ValueError("diffusion_time must be a positive integer")
        if self.intra_rows not in INTRA_ROW_MODES:
            raise ValueError(f"intra_rows must be one of {INTRA_ROW_MODES}")
        if self.inter_layers not in INTER_LAYER_MODES:
            raise ValueError(f"inter_layers must be one of {INTER_LAYER_MODES}")
        if self.maps not in MAP_FAMILIES:
            raise ValueError(f"maps must be one of {MAP_FAMILIES}")


def pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, exactly symmetric with a zero diagonal."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyMatrix("need a nonempty n x d matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("points contain non-finite values")
    sq = np.sum(X * X, axis=1)
    D2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D2, 0.0, out=D2)
    D2 = 0.5 * (D2 + D2.T)
    np.fill_diagonal(D2, 0.0)
    return D2


def median_epsilon(D2: np.ndarray) -> float:
    """Median of the strictly positive squared distances."""
    iu = np.triu_indices(D2.shape[0], k=1)
    vals = D2[iu]
    vals = vals[vals > 0.0]
    if vals.size == 0:
        raise BadEpsilon("all points coincide; no positive distance to take a median of")
    return float(np.median(vals))


def gaussian_affinity(D2: np.ndarray, epsilon: float) -> np.ndarray:
    if not np.isfinite(epsilon) or epsilon <= 0.0:
        raise BadEpsilon(f"epsilon must be finite and positive, got {epsilon}")
    return np.exp(-D2 / epsilon)


def markov_normalize(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalize a symmetric nonnegative affinity into (P, degrees)."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] == 0:
        raise EmptyMatrix("affinity must be square and nonempty")
    if np.any(W < 0.0) or not np.allclose(W, W.T, atol=1e-12):
        raise ValueError("affinity must be symmetric and nonnegative")
    degrees = W.sum(axis=1)
    if np.any(degrees <= 0.0):
        raise ZeroRow("a point has zero total affinity; graph is not connected")
    return W / degrees[:, None], degrees


@dataclass
class DiffusionEmbedding:
    point_ids: list[str]
    eigenvalues: np.ndarray  # retained, descending |lambda|
    coords: np.ndarray       # n x k, column j = lambda_j^t * psi_j
    stationary: np.ndarray   # pi, sums to 1
    diffusion_time: int


def diffusion_embed(P: np.ndarray, degrees: np.ndarray, config: DiffusionConfig,
                    point_ids: list[str] | None = None) -> DiffusionEmbedding:
    """Spectral embedding of a reversible Markov matrix.

    The trivial pair (eigenvalue 1, constant eigenvector) is dropped; a
    missing or non-constant unit pair means the graph is disconnected or
    P is malformed, reported as EigenFailure. Retained coordinate columns
    have their sign fixed so the largest-magnitude entry is positive.
    """
    P = np.asarray(P, dtype=np.float64)
    degrees = np.asarray(degrees, dtype=np.float64)
    n = P.shape[0]
    if P.ndim != 2 or P.shape[1] != n or n < 2:
        raise EmptyMatrix("need a square Markov matrix over at least 2 points")
    if degrees.shape != (n,) or np.any(degrees <= 0.0):
        raise ZeroRow("degrees must be positive, one per point")
    if not np.allclose(P.sum(axis=1), 1.0, atol=1e-8):
        raise ValueError("rows of P must sum to 1")
    if point_ids is None:
        point_ids = [str(i) for i in range(n)]
    if len(point_ids) != n:
        raise ValueError("point_ids length must match P")

    sqrt_d = np.sqrt(degrees)
    S = sqrt_d[:, None] * P / sqrt_d[None, :]
    S = 0.5 * (S + S.T)
    try:
        w, V = linalg.eigh(S)
    except linalg.LinAlgError as exc:  # pragma: no cover - scipy rarely fails here
        raise EigenFailure(str(exc)) from exc
    if np.max(np.abs(w)) > 1.0 + EIG_SLACK:
        raise EigenFailure(f"spectrum escapes [-1, 1]: max |lambda| = {np.max(np.abs(w))}")
    w = np.clip(w, -1.0, 1.0)

    pi = degrees / degrees.sum()
    psi = (V / sqrt_d[:, None]) * np.sqrt(degrees.sum())  # sum_i pi_i psi_ij^2 = 1

    unit = np.flatnonzero(np.abs(w - 1.0) <= UNIT_EIGTOL)
    if unit.size == 0:
        raise EigenFailure("no unit eigenvalue; P is not a proper Markov matrix")
    deviations = [np.max(np.abs(psi[:, j] - psi[:, j].mean())) for j in unit]
    trivial = unit[int(np.argmin(deviations))]
    if min(deviations) > UNIT_EIGTOL:
        raise EigenFailure("unit eigenvector is not constant; graph looks disconnected")

    keep = [j for j in np.argsort(-np.abs(w), kind="stable") if j != trivial]
    k = min(config.n_coords, n - 1)
    keep = keep[:k]

    t = int(config.diffusion_time)
    coords = np.empty((n, len(keep)))
    for out_j, j in enumerate(keep):
        col = (w[j] ** t) * psi[:, j]
        peak = int(np.argmax(np.abs(col)))
        if col[peak] < 0.0:
            col = -col
        coords[:, out_j] = col
    return DiffusionEmbedding(list(point_ids), w[keep].copy(), coords, pi, t)


@dataclass
class DistanceMatrix:
    labels: list[str]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        n = len(self.labels)
        if v.shape != (n, n):
            raise EmptyMatrix(f"distance matrix shape {v.shape} does not match {n} labels")
        if np.any(v < 0.0) or not np.allclose(v, v.T, atol=1e-9):
            raise ValueError("distances must be symmetric and nonnegative")
        if not np.allclose(np.diag(v), 0.0, atol=1e-12):
            raise ValueError("self-distances must be zero")
        self.values = v

    def get(self, a: str, b: str) -> float:
        return float(self.values[self.labels.index(a), self.labels.index(b)])


def diffusion_distances(embedding: DiffusionEmbedding) -> DistanceMatrix:
    D2 = pairwise_sq_dists(embedding.coords)
    return DistanceMatrix(list(embedding.point_ids), np.sqrt(D2))


def embed_points(X: np.ndarray, config: DiffusionConfig,
                 point_ids: list[str] | None = None) -> tuple[DiffusionEmbedding, float]:
    """Full path from raw points: distances, epsilon, affinity, spectrum."""
    D2 = pairwise_sq_dists(X)
    epsilon = (config.epsilon_value if config.epsilon_mode == "fixed"
               else median_epsilon(D2))
    W = gaussian_affinity(D2, epsilon)
    P, degrees = markov_normalize(W)
    return diffusion_embed(P, degrees, config, point_ids), epsilon


@dataclass
class IntraResult:
    layer_id: str
    snr_grid_db: list[int]
    dc1: np.ndarray
    rho: float
    summary: RegressionSummary
    distances: DistanceMatrix
    epsilon: float
    degenerate: bool
    mode: str


def _noise_mean_centroid(centroids: CentroidSet, layer_id: str,
                         noise_types: list[str], snr_db: int | None) -> np.ndarray:
    rows = [centroids.get(layer_id, m, snr_db) for m in noise_types]
    return np.mean(rows, axis=0)


def _orient_and_fit(coords: np.ndarray, snrs: np.ndarray):
    """Flip DC1 so it increases with SNR; returns (coords, rho, degenerate)."""
    dc1 = coords[:, 0]
    try:
        rho = spearman_rho(dc1, snrs)
    except AllTied:
        return coords, 0.0, True
    if rho < 0.0:
        coords = coords.copy()
        coords[:, 0] = -coords[:, 0]
        rho = -rho
    return coords, rho, False


def _intra_single(X: np.ndarray, snr_grid: list[int], layer_id: str,
                  config: DiffusionConfig, mode: str) -> IntraResult:
    snrs = np.array(snr_grid, dtype=np.float64)
    ids = [str(s) for s in snr_grid]
    embedding, epsilon = embed_points(X, config, ids)
    coords, rho, degenerate = _orient_and_fit(embedding.coords, snrs)
    embedding.coords = coords
    summary = ols_fit(snrs, coords[:, 0])
    degenerate = degenerate or summary.degenerate
    return IntraResult(layer_id, list(snr_grid), coords[:, 0].copy(), rho, summary,
                       diffusion_distances(embedding), epsilon, degenerate, mode)


def intra_layer(centroids: CentroidSet, layer_id: str, noise_types: list[str],
                snr_grid_db: list[int], config: DiffusionConfig) -> IntraResult:
    """Per-SNR centroid trajectory for one layer.

    ``noise_averaged`` embeds the across-noise mean centroid per SNR.
    ``per_noise`` runs the embedding separately per noise type and
    averages the oriented DC1 curves, correlations, fit statistics, and
    distance matrices.
    """
    if len(snr_grid_db) < 3:
        raise TooFewRows("need at least 3 SNR levels for a trajectory")
    for snr in snr_grid_db:
        for m in noise_types:
            if not centroids.has(layer_id, m, snr):
                raise IncompleteGrid(f"missing centroid ({layer_id}, {m}, {snr})")

    if config.intra_rows == "noise_averaged":
        X = np.stack([_noise_mean_centroid(centroids, layer_id, noise_types, snr)
                      for snr in snr_grid_db])
        return _intra_single(X, snr_grid_db, layer_id, config, "noise_averaged")

    parts = []
    for m in noise_types:
        X = np.stack([centroids.get(layer_id, m, snr) for snr in snr_grid_db])
        parts.append(_intra_single(X, snr_grid_db, layer_id, config, "per_noise"))
    summary = RegressionSummary(
        slope=float(np.mean([p.summary.slope for p in parts])),
        intercept=float(np.mean([p.summary.intercept for p in parts])),
        r_squared=float(np.mean([p.summary.r_squared for p in parts])),
        n=len(snr_grid_db),
        degenerate=any(p.summary.degenerate for p in parts))
    values = np.mean([p.distances.values for p in parts], axis=0)
    return IntraResult(
        layer_id, list(snr_grid_db),
        np.mean([p.dc1 for p in parts], axis=0),
        float(np.mean([p.rho for p in parts])),
        summary,
        DistanceMatrix([str(s) for s in snr_grid_db], values),
        float(np.mean([p.epsilon for p in parts])),
        any(p.degenerate for p in parts),
        "per_noise")


@dataclass
class InterResult:
    snr_db: int
    labels: list[str]
    distances: DistanceMatrix
    excluded: list[str]
    dist_to_clean: dict[str, float]
    epsilon: float


def inter_layer(centroids: CentroidSet, layers: list[LayerInfo], noise_types: list[str],
                snr_db: int, config: DiffusionConfig) -> InterResult:
    """Embed the layers themselves at one SNR, plus clean reference points.

    Candidate layers are the first of each block by default. Layers whose
    embedding dimension differs from the modal dimension across candidates
    cannot share a distance matrix and are excluded (reported, not
    silently dropped); a tie on the modal count resolves to the earliest
    candidate's dimension. With ``include_clean`` each layer also
    contributes its clean-speech centroid labelled ``<layer>@clean``, and
    the per-layer distance to that reference is reported.
    """
    if config.inter_layers == "first_in_block":
        candidates = [info for info in layers if info.first_in_block]
    else:
        candidates = list(layers)
    if not candidates:
        raise MissingCell("no candidate layers")

    dims = {}
    for info in candidates:
        dims[info.layer_id] = _noise_mean_centroid(
            centroids, info.layer_id, noise_types, snr_db).shape[0]
    counts = Counter(dims.values())
    top = max(counts.values())
    modal = next(dims[info.layer_id] for info in candidates
                 if counts[dims[info.layer_id]] == top)
    participants = [info for info in candidates if dims[info.layer_id] == modal]
    excluded = [info.layer_id for info in candidates if dims[info.layer_id] != modal]
    if len(participants) < 2:
        raise TooFewRows("fewer than 2 layers share the modal dimension")

    rows, labels = [], []
    for info in participants:
        rows.append(_noise_mean_centroid(centroids, info.layer_id, noise_types, snr_db))
        labels.append(info.layer_id)
    if config.include_clean:
        for info in participants:
            rows.append(centroids.get(info.layer_id, CLEAN, None))
            labels.append(f"{info.layer_id}@clean")

    embedding, epsilon = embed_points(np.stack(rows), config, labels)
    distances = diffusion_distances(embedding)
    dist_to_clean = {}
    if config.include_clean:
        for info in participants:
            dist_to_clean[info.layer_id] = distances.get(
                info.layer_id, f"{info.layer_id}@clean")
    return InterResult(int(snr_db), labels, distances, excluded, dist_to_clean, epsilon)


INTRA_CSV_COLUMNS = ["layer_id", "snr_db", "dc1", "rho", "r2"]


def write_intra_csv(results: list[IntraResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(INTRA_CSV_COLUMNS)
        for res in results:
            for snr, dc1 in zip(res.snr_grid_db, res.dc1):
                writer.writerow([res.layer_id, snr, repr(float(dc1)),
                                 repr(res.rho), repr(res.summary.r_squared)])


def read_intra_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != INTRA_CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [{"layer_id": row["layer_id"], "snr_db": int(row["snr_db"]),
                 "dc1": float(row["dc1"]), "rho": float(row["rho"]),
                 "r2": float(row["r2"])} for row in reader]


def write_dist_csv(matrix: DistanceMatrix, path, label_column: str = "label") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([label_column] + list(matrix.labels))
        for label, row in zip(matrix.labels, matrix.values):
            writer.writerow([label] + [repr(float(v)) for v in row])


def read_dist_csv(path) -> DistanceMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    labels = rows[0][1:]
    values = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    return DistanceMatrix(labels, values)


REPORT_SCHEMA = "snrprobe-diffusion-v1"


def write_report_json(intra_results: list[IntraResult], inter_results: list[InterResult],
                      config: DiffusionConfig, path) -> None:
    doc = {
        "schema": REPORT_SCHEMA,
        "config": {
            "epsilon_mode": config.epsilon_mode,
            "epsilon_value": config.epsilon_value,
            "n_coords": config.n_coords,
            "diffusion_time": config.diffusion_time,
            "intra_rows": config.intra_rows,
            "inter_layers": config.inter_layers,
            "include_clean": config.include_clean,
            "maps": config.maps,
        },
        "intra": [{
            "layer_id": res.layer_id,
            "rho": res.rho,
            "r_squared": res.summary.r_squared,
            "slope": res.summary.slope,
            "intercept": res.summary.intercept,
            "degenerate": res.degenerate,
            "epsilon": res.epsilon,
            "mode": res.mode,
        } for res in intra_results],
        "inter": [{
            "snr_db": res.snr_db,
            "labels": res.labels,
            "excluded": res.excluded,
            "epsilon": res.epsilon,
            "dist_to_clean": res.dist_to_clean,
        } for res in inter_results],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
