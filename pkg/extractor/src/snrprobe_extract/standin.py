"""Bundled stand-in enhancement model.

A real checkpoint is a few hundred MB of weights nobody wants in a test
fixture. The stand-in replaces it with a stack of tanh projections whose
weights are derived from a seed in the checkpoint file, so inference is a
pure function of (checkpoint, samples) and every layer has a stable name
that hooks can match. It is not a speech model; it only has the shape of
one: framed input, named layers grouped into blocks, a narrow latent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import BadCheckpoint

CHECKPOINT_SCHEMA = "snrprobe-standin-v1"


@dataclass(frozen=True)
class StandinLayer:
    name: str
    dim: int


class StandinModel:
    """Deterministic layer stack over framed audio.

    Frames of ``frame_len`` samples are projected to ``feature_dim``
    features, then passed through one tanh projection per layer. Every
    layer output has shape (tokens, layer dim) with tokens first.
    """

    def __init__(self, seed: int, frame_len: int, feature_dim: int,
                 layers: list[StandinLayer]):
        if frame_len < 1 or feature_dim < 1:
            raise BadCheckpoint("frame_len and feature_dim must be positive")
        if not layers:
            raise BadCheckpoint("checkpoint declares no layers")
        names = [layer.name for layer in layers]
        if len(set(names)) != len(names):
            raise BadCheckpoint("duplicate layer names in checkpoint")
        if any(layer.dim < 1 for layer in layers):
            raise BadCheckpoint("layer dims must be positive")
        self.seed = int(seed)
        self.frame_len = int(frame_len)
        self.feature_dim = int(feature_dim)
        self.layers = list(layers)
        self._weights = self._derive_weights()

    @property
    def layer_names(self) -> list[str]:
        return [layer.name for layer in self.layers]

    def _derive_weights(self):
        # index 0 is the input projection, then one entry per layer
        weights = []
        rng = np.random.default_rng([self.seed, 0])
        weights.append((rng.normal(size=(self.frame_len, self.feature_dim))
                        / np.sqrt(self.frame_len),
                        0.05 * rng.normal(size=self.feature_dim)))
        prev = self.feature_dim
        for k, layer in enumerate(self.layers, start=1):
            rng = np.random.default_rng([self.seed, k])
            weights.append((rng.normal(size=(prev, layer.dim)) / np.sqrt(prev),
                            0.05 * rng.normal(size=layer.dim)))
            prev = layer.dim
        return weights

    def forward(self, samples: np.ndarray) -> dict[str, np.ndarray]:
        """Run one window and return every layer's output, name-keyed."""
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"expected a 1-D window, got shape {samples.shape}")
        tokens = len(samples) // self.frame_len
        if tokens < 1:
            raise ValueError(
                f"window of {len(samples)} samples is shorter than one "
                f"{self.frame_len}-sample frame")
        frames = samples[:tokens * self.frame_len].reshape(tokens, self.frame_len)
        w, b = self._weights[0]
        h = np.tanh(frames @ w + b)
        captured: dict[str, np.ndarray] = {}
        for layer, (w, b) in zip(self.layers, self._weights[1:]):
            h = np.tanh(h @ w + b)
            captured[layer.name] = h
        return captured


def load_checkpoint(path) -> StandinModel:
    """Build the stand-in model described by a checkpoint JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise BadCheckpoint(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadCheckpoint(f"checkpoint {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != CHECKPOINT_SCHEMA:
        raise BadCheckpoint(
            f"checkpoint {path}: expected schema {CHECKPOINT_SCHEMA!r}, "
            f"got {doc.get('schema') if isinstance(doc, dict) else type(doc).__name__!r}")
    try:
        layers = [StandinLayer(str(d["name"]), int(d["dim"]))
                  for d in doc["layers"]]
        return StandinModel(int(doc["seed"]), int(doc["frame_len"]),
                            int(doc["feature_dim"]), layers)
    except (KeyError, TypeError, ValueError) as exc:
        raise BadCheckpoint(f"checkpoint {path}: {exc}") from exc


def bundled_checkpoint_path() -> Path:
    return Path(str(resources.files(__package__) / "data" / "standin_checkpoint.json"))


def bundled_hooks_path() -> Path:
    return Path(str(resources.files(__package__) / "data" / "hooks_standin.json"))
