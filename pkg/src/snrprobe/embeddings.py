"""Pooled activation embeddings, centroids, and their on-disk container.

The activations manifest (JSON) is the single source of truth for layer
order, block membership, token-axis index, and skip/first-in-block tags;
tensors themselves carry none of that. The ``clean`` pseudo noise type
(with a null SNR) holds the reference condition.

``embeddings.bin`` layout: magic ``EMBS1`` | u64 header length | UTF-8
JSON header | float64 payload. The header indexes every record by element
offset, and records are written in sorted key order so identical inputs
produce identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadMagic, DimensionMismatch, EmptyAxis, MissingCell
from .tensors import read_tensor

ACTIVATIONS_SCHEMA = "snrprobe-activations-v1"
EMBEDDINGS_SCHEMA = "snrprobe-embeddings-v1"
CLEAN = "clean"

_EMBS_MAGIC = b"EMBS1"


@dataclass(frozen=True)
class LayerInfo:
    layer_id: str
    block: str
    token_axis: int = 0
    first_in_block: bool = False
    skip_input: bool = False
    skip_output: bool = False

    def to_dict(self) -> dict:
        return {
            "layer_id": self.layer_id,
            "block": self.block,
            "token_axis": self.token_axis,
            "first_in_block": self.first_in_block,
            "skip_input": self.skip_input,
            "skip_output": self.skip_output,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LayerInfo":
        return cls(
            layer_id=d["layer_id"],
            block=d["block"],
            token_axis=int(d.get("token_axis", 0)),
            first_in_block=bool(d.get("first_in_block", False)),
            skip_input=bool(d.get("skip_input", False)),
            skip_output=bool(d.get("skip_output", False)),
        )


def global_average_pool(data: np.ndarray, token_axis: int) -> np.ndarray:
    """Mean over the token axis, remaining axes flattened C-order to a vector."""
    data = np.asarray(data)
    if not -data.ndim <= token_axis < data.ndim:
        raise EmptyAxis(f"token axis {token_axis} out of range for shape {data.shape}")
    if data.shape[token_axis] == 0:
        raise EmptyAxis(f"token axis {token_axis} has zero length")
    return data.mean(axis=token_axis, dtype=np.float64).reshape(-1)


def _key(layer_id: str, noise_type: str, snr_db, utterance_id: str) -> tuple:
    # snr None means clean no matter how the caller labels the noise column
    if snr_db is None:
        return (layer_id, CLEAN, None, utterance_id)
    return (layer_id, noise_type, int(snr_db), utterance_id)


def _key_order(key: tuple):
    # clean cells carry snr None; order them before any numeric SNR
    return (key[0], key[1], key[2] is not None, key[2] or 0) + key[3:]


@dataclass
class EmbeddingSet:
    """Pooled vectors indexed by (layer, noise type, SNR, utterance)."""

    layers: list[LayerInfo]
    noise_types: list[str]
    snr_grid_db: list[int]
    utterances: list[str]
    vectors: dict[tuple, np.ndarray] = field(default_factory=dict)

    def put(self, layer_id, noise_type, snr_db, utterance_id, vec) -> None:
        vec = np.asarray(vec, dtype=np.float64).reshape(-1)
        key = _key(layer_id, noise_type, snr_db, utterance_id)
        existing_dim = self.dim(layer_id)
        if existing_dim is not None and vec.size != existing_dim:
            raise DimensionMismatch(
                f"layer {layer_id}: vector of dim {vec.size}, expected {existing_dim}")
        self.vectors[key] = vec

    def get(self, layer_id, noise_type, snr_db, utterance_id) -> np.ndarray:
        key = _key(layer_id, noise_type, snr_db, utterance_id)
        if key not in self.vectors:
            raise MissingCell(f"no embedding for {key}")
        return self.vectors[key]

    def has(self, layer_id, noise_type, snr_db, utterance_id) -> bool:
        return _key(layer_id, noise_type, snr_db, utterance_id) in self.vectors

    def dim(self, layer_id) -> int | None:
        for key, vec in self.vectors.items():
            if key[0] == layer_id:
                return vec.size
        return None

    def layer(self, layer_id) -> LayerInfo:
        for info in self.layers:
            if info.layer_id == layer_id:
                return info
        raise MissingCell(f"unknown layer {layer_id!r}")

    def depth_index(self, layer_id) -> int:
        for i, info in enumerate(self.layers):
            if info.layer_id == layer_id:
                return i
        raise MissingCell(f"unknown layer {layer_id!r}")

    def cell_utterances(self, layer_id, noise_type, snr_db) -> list[str]:
        """Utterances present for the cell, in fixed sorted order."""
        prefix = _key(layer_id, noise_type, snr_db, "")[:3]
        return sorted(k[3] for k in self.vectors if k[:3] == prefix)

    def matrix(self, layer_id, noise_type, snr_db, utterance_ids) -> np.ndarray:
        """Stack per-utterance vectors as rows, in the given order."""
        return np.stack([self.get(layer_id, noise_type, snr_db, u) for u in utterance_ids])

    # --- persistence ---

    def save(self, path) -> None:
        records = []
        chunks = []
        offset = 0
        for key in sorted(self.vectors, key=_key_order):
            vec = self.vectors[key]
            records.append({
                "layer_id": key[0], "noise_type": key[1], "snr_db": key[2],
                "utterance_id": key[3], "dim": int(vec.size), "offset": offset,
            })
            chunks.append(vec.astype("<f8").tobytes())
            offset += vec.size
        header = json.dumps({
            "schema": EMBEDDINGS_SCHEMA,
            "layers": [info.to_dict() for info in self.layers],
            "noise_types": list(self.noise_types),
            "snr_grid_db": list(self.snr_grid_db),
            "utterances": list(self.utterances),
            "records": records,
        }).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(_EMBS_MAGIC)
            fh.write(struct.pack("<Q", len(header)))
            fh.write(header)
            for chunk in chunks:
                fh.write(chunk)

    @classmethod
    def load(cls, path) -> "EmbeddingSet":
        data = Path(path).read_bytes()
        if data[:5] != _EMBS_MAGIC:
            raise BadMagic(f"{path}: not an embeddings container")
        (hlen,) = struct.unpack_from("<Q", data, 5)
        header = json.loads(data[13:13 + hlen].decode("utf-8"))
        if header.get("schema") != EMBEDDINGS_SCHEMA:
            raise BadMagic(f"{path}: unknown schema {header.get('schema')!r}")
        payload = np.frombuffer(data[13 + hlen:], dtype="<f8")
        out = cls(
            layers=[LayerInfo.from_dict(d) for d in header["layers"]],
            noise_types=list(header["noise_types"]),
            snr_grid_db=[int(s) for s in header["snr_grid_db"]],
            utterances=list(header["utterances"]),
        )
        for rec in header["records"]:
            lo, dim = rec["offset"], rec["dim"]
            if lo + dim > payload.size:
                raise BadMagic(f"{path}: record overruns payload")
            out.put(rec["layer_id"], rec["noise_type"], rec["snr_db"],
                    rec["utterance_id"], payload[lo:lo + dim])
        return out


@dataclass
class CentroidSet:
    """Per-(layer, noise type, SNR) mean vectors with their sample counts."""

    means: dict[tuple, np.ndarray] = field(default_factory=dict)
    counts: dict[tuple, int] = field(default_factory=dict)

    def get(self, layer_id, noise_type, snr_db) -> np.ndarray:
        key = _key(layer_id, noise_type, snr_db, "")[:3]
        if key not in self.means:
            raise MissingCell(f"no centroid for {key}")
        return self.means[key]

    def has(self, layer_id, noise_type, snr_db) -> bool:
        return _key(layer_id, noise_type, snr_db, "")[:3] in self.means


def build_centroids(embeddings: EmbeddingSet) -> CentroidSet:
    """Average embeddings across utterances for every (layer, noise, SNR) cell.

    Summation runs in sorted utterance order so the result is bitwise
    deterministic for a given embedding set.
    """
    cells: dict[tuple, list[str]] = {}
    for layer_id, noise_type, snr_db, utt in sorted(embeddings.vectors, key=_key_order):
        cells.setdefault((layer_id, noise_type, snr_db), []).append(utt)
    out = CentroidSet()
    for cell, utts in cells.items():
        layer_id, noise_type, snr_db = cell
        acc = None
        for utt in utts:  # already sorted by utterance
            vec = embeddings.get(layer_id, noise_type, snr_db, utt)
            if acc is None:
                acc = vec.copy()
            elif acc.size != vec.size:
                raise DimensionMismatch(
                    f"layer {layer_id}: dim {vec.size} vs {acc.size} within one cell")
            else:
                acc += vec
        out.means[cell] = acc / len(utts)
        out.counts[cell] = len(utts)
    return out


def load_activations_manifest(path) -> dict:
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    if manifest.get("schema") != ACTIVATIONS_SCHEMA:
        raise BadMagic(f"{path}: expected schema {ACTIVATIONS_SCHEMA!r}, "
                       f"got {manifest.get('schema')!r}")
    for field_name in ("layers", "files"):
        if field_name not in manifest:
            raise BadMagic(f"{path}: manifest lacks {field_name!r}")
    return manifest


def pool_activations(activations_dir, manifest_path) -> EmbeddingSet:
    """Pool every tensor named by the manifest into one embedding set.

    Multiple files for one (layer, noise, SNR, utterance) key (one per
    analysis window) are pooled individually and averaged in sorted path
    order, yielding one vector per utterance.
    """
    activations_dir = Path(activations_dir)
    manifest = load_activations_manifest(manifest_path)
    layers = [LayerInfo.from_dict(d) for d in manifest["layers"]]
    by_id = {info.layer_id: info for info in layers}

    grouped: dict[tuple, list[str]] = {}
    for entry in manifest["files"]:
        snr = entry.get("snr_db")
        key = _key(entry["layer_id"], entry["noise_type"], snr, entry["utterance_id"])
        if key[0] not in by_id:
            raise MissingCell(f"manifest file entry names unknown layer {key[0]!r}")
        grouped.setdefault(key, []).append(entry["path"])

    out = EmbeddingSet(
        layers=layers,
        noise_types=sorted(n for n in manifest.get("noise_types", []) if n != CLEAN),
        snr_grid_db=[int(s) for s in manifest.get("snr_grid_db", [])],
        utterances=sorted(manifest.get("utterances", [])),
    )
    for key in sorted(grouped):
        layer_id = key[0]
        pooled = []
        for rel in sorted(grouped[key]):
            data = read_tensor(activations_dir / rel)
            if not np.all(np.isfinite(data)):
                raise ValueError(f"{rel}: non-finite activation values")
            pooled.append(global_average_pool(data, by_id[layer_id].token_axis))
        dims = {v.size for v in pooled}
        if len(dims) != 1:
            raise DimensionMismatch(f"{key}: window vectors disagree on dim {sorted(dims)}")
        out.put(*key, np.mean(pooled, axis=0) if len(pooled) > 1 else pooled[0])
    return out
