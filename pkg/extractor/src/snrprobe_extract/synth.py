"""Synthetic activation trees with planted structure.

Full-model extraction is a heavyweight way to exercise the analysis side,
so this generator writes activation tensors whose pooled embeddings are
known in closed form:

    x(layer, noise, snr, utt) = base(layer) + utterance jitter
                                + amplitude(layer) * g(snr) * u(layer)
                                + measurement noise

with g falling from 1 at the grid minimum to 0 at the maximum and the
noise term scaled by the same amplitude * g envelope. Larger amplitude
means more per-utterance scatter at low SNR, so similarity fits recover
the planted amplitude ordering, while a linear g walks centroids along a
straight line. Everything is a pure function of (spec, seed); two runs
write identical bytes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadSpec
from .extract import ACTIVATIONS_SCHEMA, CLEAN, validate_manifest

log = logging.getLogger("snrprobe_extract")

SYNTH_SCHEMA = "snrprobe-synth-v1"
_CURVES = ("linear", "quadratic")


@dataclass(frozen=True)
class SynthLayer:
    layer_id: str
    block: str
    dim: int
    amplitude: float
    first_in_block: bool = False


@dataclass(frozen=True)
class SynthSpec:
    snr_grid_db: list[int]
    noise_types: list[str]
    utterances: list[str]
    layers: list[SynthLayer]
    drift_curve: str = "linear"
    utterance_sigma: float = 0.05
    noise_sigma: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.snr_grid_db:
            raise BadSpec("snr_grid_db must be non-empty")
        if list(self.snr_grid_db) != sorted(set(int(s) for s in self.snr_grid_db)):
            raise BadSpec("snr_grid_db must be strictly increasing integers")
        if not self.noise_types or CLEAN in self.noise_types:
            raise BadSpec(f"noise_types must be non-empty and not include {CLEAN!r}")
        if len(set(self.noise_types)) != len(self.noise_types):
            raise BadSpec("duplicate noise types")
        if not self.utterances or len(set(self.utterances)) != len(self.utterances):
            raise BadSpec("utterances must be non-empty and unique")
        if not self.layers:
            raise BadSpec("layers must be non-empty")
        ids = [l.layer_id for l in self.layers]
        if len(set(ids)) != len(ids):
            raise BadSpec("duplicate layer_ids")
        for l in self.layers:
            if l.dim < 1:
                raise BadSpec(f"layer {l.layer_id}: dim must be >= 1")
            if not np.isfinite(l.amplitude) or l.amplitude < 0:
                raise BadSpec(f"layer {l.layer_id}: amplitude must be finite and >= 0")
        if self.drift_curve not in _CURVES:
            raise BadSpec(f"drift_curve must be one of {_CURVES}")
        if self.utterance_sigma < 0 or self.noise_sigma < 0:
            raise BadSpec("sigmas must be >= 0")


def load_spec(path) -> SynthSpec:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise BadSpec(f"cannot read spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadSpec(f"spec {path} is not valid JSON: {exc}") from exc
    return spec_from_dict(doc, where=str(path))


def spec_from_dict(doc: dict, where: str = "spec") -> SynthSpec:
    if not isinstance(doc, dict) or doc.get("schema") != SYNTH_SCHEMA:
        raise BadSpec(f"{where}: expected schema {SYNTH_SCHEMA!r}")
    try:
        layers = [SynthLayer(layer_id=str(d["layer_id"]), block=str(d["block"]),
                             dim=int(d["dim"]), amplitude=float(d["amplitude"]),
                             first_in_block=bool(d.get("first_in_block", False)))
                  for d in doc["layers"]]
        return SynthSpec(
            snr_grid_db=[int(s) for s in doc["snr_grid_db"]],
            noise_types=[str(n) for n in doc["noise_types"]],
            utterances=[str(u) for u in doc["utterances"]],
            layers=layers,
            drift_curve=str(doc.get("drift_curve", "linear")),
            utterance_sigma=float(doc.get("utterance_sigma", 0.05)),
            noise_sigma=float(doc.get("noise_sigma", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise BadSpec(f"{where}: {exc}") from exc


def drift_gain(curve: str, snr_db: int, lo: int, hi: int) -> float:
    """1 at the grid minimum, 0 at the maximum, monotone between."""
    if hi == lo:
        return 0.0
    x = (hi - snr_db) / (hi - lo)
    return x * x if curve == "quadratic" else x


def _unit(v: np.ndarray) -> np.ndarray:
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        out = np.zeros_like(v)
        out[0] = 1.0
        return out
    return v / nrm


def _layer_frame(spec: SynthSpec, seed: int, li: int):
    rng = np.random.default_rng([seed, 11, li])
    dim = spec.layers[li].dim
    base = rng.normal(size=dim)
    return base, _unit(rng.normal(size=dim))


def clean_vector(spec: SynthSpec, seed: int, li: int, ui: int) -> np.ndarray:
    base, _ = _layer_frame(spec, seed, li)
    jitter = np.random.default_rng([seed, 23, li, ui]).normal(size=base.size)
    return base + spec.utterance_sigma * jitter


def noisy_vector(spec: SynthSpec, seed: int, li: int, ni: int, si: int,
                 ui: int) -> np.ndarray:
    """Planted embedding for one (layer, noise, snr, utterance) cell.

    The drift term shifts whole cells (visible to centroid geometry,
    invisible to translation-invariant similarity); the noise term is
    per-utterance scatter under the same amplitude * g envelope, so it is
    what similarity profiles respond to. Zero noise leaves similarity at
    exactly 1 while centroids still walk the drift line.
    """
    _, u = _layer_frame(spec, seed, li)
    layer = spec.layers[li]
    grid = spec.snr_grid_db
    g = drift_gain(spec.drift_curve, grid[si], grid[0], grid[-1])
    vec = clean_vector(spec, seed, li, ui) + layer.amplitude * g * u
    if spec.noise_sigma > 0:
        wob = np.random.default_rng([seed, 37, li, ni, si, ui]).normal(size=layer.dim)
        vec = vec + layer.amplitude * g * spec.noise_sigma * wob
    return vec


def synth_activations(spec: SynthSpec, seed: int, out_dir) -> dict:
    """Write the activation tree plus manifest; returns the manifest."""
    if seed < 0:
        raise BadSpec("seed must be >= 0")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files: list[dict] = []

    def put(vec: np.ndarray, layer_id: str, noise_type: str, snr_db, utt: str):
        tag = CLEAN if noise_type == CLEAN else f"{noise_type}_snr{snr_db:+03d}"
        rel = f"{layer_id}/{tag}_{utt}.npy"
        (out_dir / layer_id).mkdir(exist_ok=True)
        # one token per tensor: pooling returns the vector untouched
        np.save(out_dir / rel, vec[None, :])
        files.append({"layer_id": layer_id, "noise_type": noise_type,
                      "snr_db": snr_db, "utterance_id": utt, "path": rel})

    for li, layer in enumerate(spec.layers):
        for ui, utt in enumerate(spec.utterances):
            put(clean_vector(spec, seed, li, ui), layer.layer_id, CLEAN, None, utt)
            for ni, noise in enumerate(spec.noise_types):
                for si, snr in enumerate(spec.snr_grid_db):
                    put(noisy_vector(spec, seed, li, ni, si, ui),
                        layer.layer_id, noise, int(snr), utt)

    files.sort(key=lambda e: (e["layer_id"], e["noise_type"],
                              e["snr_db"] is not None, e["snr_db"] or 0,
                              e["utterance_id"], e["path"]))
    doc = {
        "schema": ACTIVATIONS_SCHEMA,
        "layers": [{"layer_id": l.layer_id, "block": l.block, "token_axis": 0,
                    "first_in_block": l.first_in_block, "skip_input": False,
                    "skip_output": False} for l in spec.layers],
        "noise_types": sorted(spec.noise_types),
        "snr_grid_db": list(spec.snr_grid_db),
        "utterances": sorted(spec.utterances),
        "files": files,
    }
    validate_manifest(doc, root=out_dir)
    out_path = out_dir / "activations_manifest.json"
    out_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    log.info("wrote %d synthetic tensors and %s", len(files), out_path)
    return doc
