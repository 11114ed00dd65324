"""Hooked activation extraction over a mixture sweep.

Walks the sweep manifest, runs the model once per analysis window, and
writes one .npy tensor per (layer, condition, utterance, window), or one
window-averaged tensor per utterance. The clean source audio is processed
through the same windows as a "clean" pseudo-condition so downstream
similarity has its reference column. Output is a tensor tree plus an
activations_manifest.json naming every file.

Extraction is deterministic: same checkpoint, same inputs, same bytes.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .audioio import center_trim, read_wav
from .errors import BadHooks, BadMixtures, HookMiss, InvalidManifest, ShapeDrift
from .hooks import HookSpec, resolve_hooks

log = logging.getLogger("snrprobe_extract")

MIXTURES_SCHEMA = "snrprobe-mixtures-v1"
ACTIVATIONS_SCHEMA = "snrprobe-activations-v1"
CLEAN = "clean"


def load_mixtures_manifest(mixtures_dir) -> dict:
    path = Path(mixtures_dir) / "manifest.json"
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise BadMixtures(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadMixtures(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != MIXTURES_SCHEMA:
        raise BadMixtures(f"{path}: expected schema {MIXTURES_SCHEMA!r}")
    if not doc.get("entries"):
        raise BadMixtures(f"{path}: sweep produced no mixtures")
    return doc


def _resolve_clean_dir(mixtures_dir: Path, manifest: dict, override) -> Path:
    if override is not None:
        root = Path(override)
        if not root.is_dir():
            raise BadMixtures(f"clean directory {root} does not exist")
        return root
    recorded = manifest.get("clean_dir")
    if not recorded:
        raise BadMixtures("manifest records no clean_dir; pass one explicitly")
    # the sweep recorded the path as it was given, so a relative value is
    # tried against the likely anchors before giving up
    candidates = [Path(recorded)] if Path(recorded).is_absolute() else [
        mixtures_dir / recorded, mixtures_dir.parent / recorded, Path(recorded)]
    for root in candidates:
        if root.is_dir():
            return root
    raise BadMixtures(f"clean directory {recorded!r} not found; pass one explicitly")


def _trailing_shape(shape: tuple, token_axis: int, layer_id: str) -> tuple:
    if not -len(shape) <= token_axis < len(shape):
        raise BadHooks(f"layer {layer_id}: token axis {token_axis} out of "
                       f"range for shape {shape}")
    axis = token_axis % len(shape)
    return shape[:axis] + shape[axis + 1:]


class _Capture:
    """Runs windows through the model and guards shape stability."""

    def __init__(self, model, resolved: dict[str, HookSpec], window_s: float):
        self.model = model
        self.resolved = resolved
        self.window_s = window_s
        self.trailing: dict[str, tuple] = {}

    def run(self, samples: np.ndarray, rate: int, where: str) -> dict[str, list[np.ndarray]]:
        win_len = round(self.window_s * rate)
        if win_len < 1:
            raise BadMixtures(f"window of {self.window_s} s is empty at {rate} Hz")
        count = len(samples) // win_len
        if count < 1:
            raise BadMixtures(f"{where}: clip of {len(samples)} samples is "
                              f"shorter than one {win_len}-sample window")
        grabbed: dict[str, list[np.ndarray]] = {
            h.layer_id: [] for h in self.resolved.values()}
        for w in range(count):
            out = self.model.forward(samples[w * win_len:(w + 1) * win_len])
            for name, hook in self.resolved.items():
                if name not in out:
                    raise HookMiss(f"model emitted nothing for hooked layer {name!r}")
                tensor = np.asarray(out[name], dtype=np.float64)
                tail = _trailing_shape(tensor.shape, hook.token_axis, hook.layer_id)
                seen = self.trailing.setdefault(hook.layer_id, tail)
                if tail != seen:
                    raise ShapeDrift(f"layer {hook.layer_id}: trailing shape "
                                     f"{tail} at {where} differs from {seen}")
                grabbed[hook.layer_id].append(tensor)
        return grabbed


def _write_cell(grabbed: list[np.ndarray], out_dir: Path, layer_id: str,
                tag: str, utt: str, window_average: bool) -> list[str]:
    shapes = {a.shape for a in grabbed}
    if len(shapes) != 1:
        raise ShapeDrift(f"layer {layer_id}: window shapes disagree: {sorted(shapes)}")
    (out_dir / layer_id).mkdir(parents=True, exist_ok=True)
    paths = []
    if window_average:
        rel = f"{layer_id}/{tag}_{utt}.npy"
        np.save(out_dir / rel, np.mean(grabbed, axis=0).astype(np.float32))
        paths.append(rel)
    else:
        for w, arr in enumerate(grabbed):
            rel = f"{layer_id}/{tag}_{utt}_w{w:02d}.npy"
            np.save(out_dir / rel, arr.astype(np.float32))
            paths.append(rel)
    return paths


def extract(model, mixtures_dir, hooks: list[HookSpec], out_dir,
            window_average: bool = False, clean_dir=None) -> dict:
    """Dump hooked activations for a sweep plus its clean sources.

    Returns the activations manifest, which is also written to
    ``out_dir/activations_manifest.json``.
    """
    mixtures_dir, out_dir = Path(mixtures_dir), Path(out_dir)
    manifest = load_mixtures_manifest(mixtures_dir)
    resolved = resolve_hooks(hooks, model.layer_names)
    cfg = manifest.get("config", {})
    window_s = float(cfg.get("window_duration_s", 1.9))
    clip_s = float(cfg.get("clip_duration_s", 10.0))
    utterances = sorted(manifest.get("utterances", []))
    clean_root = _resolve_clean_dir(mixtures_dir, manifest, clean_dir)
    capture = _Capture(model, resolved, window_s)
    out_dir.mkdir(parents=True, exist_ok=True)

    files: list[dict] = []

    def emit(grabbed, noise_type, snr_db, utt):
        tag = CLEAN if noise_type == CLEAN else f"{noise_type}_snr{snr_db:+03d}"
        for layer_id, arrs in grabbed.items():
            for rel in _write_cell(arrs, out_dir, layer_id, tag, utt,
                                   window_average):
                files.append({"layer_id": layer_id, "noise_type": noise_type,
                              "snr_db": snr_db, "utterance_id": utt, "path": rel})

    for utt in utterances:
        src = clean_root / f"{utt}.wav"
        if not src.is_file():
            raise BadMixtures(f"clean source {src} missing for utterance {utt!r}")
        samples, rate = read_wav(src)
        samples = center_trim(samples, round(clip_s * rate))
        emit(capture.run(samples, rate, str(src)), CLEAN, None, utt)

    for entry in manifest["entries"]:
        samples, rate = read_wav(mixtures_dir / entry["path"])
        emit(capture.run(samples, rate, entry["path"]),
             entry["noise_type"], int(entry["target_snr_db"]), entry["utterance_id"])

    files.sort(key=lambda e: (e["layer_id"], e["noise_type"],
                              e["snr_db"] is not None, e["snr_db"] or 0,
                              e["utterance_id"], e["path"]))
    doc = {
        "schema": ACTIVATIONS_SCHEMA,
        "layers": [hook.manifest_entry() for hook in hooks],
        "noise_types": sorted(manifest.get("noise_types", [])),
        "snr_grid_db": [int(s) for s in cfg.get("snr_grid_db", [])],
        "utterances": utterances,
        "files": files,
    }
    validate_manifest(doc, root=out_dir)
    out_path = out_dir / "activations_manifest.json"
    out_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    log.info("wrote %d tensors and %s", len(files), out_path)
    return doc


def validate_manifest(doc: dict, root=None) -> None:
    """Check an activations manifest against the consumer's schema.

    With ``root`` given, also checks that every named tensor file exists.
    """
    if not isinstance(doc, dict) or doc.get("schema") != ACTIVATIONS_SCHEMA:
        raise InvalidManifest(f"expected schema {ACTIVATIONS_SCHEMA!r}")
    layers = doc.get("layers")
    if not isinstance(layers, list) or not layers:
        raise InvalidManifest("'layers' must be a non-empty list")
    ids = set()
    for layer in layers:
        for field in ("layer_id", "block", "token_axis", "first_in_block"):
            if field not in layer:
                raise InvalidManifest(f"layer entry lacks {field!r}: {layer}")
        if layer["layer_id"] in ids:
            raise InvalidManifest(f"duplicate layer_id {layer['layer_id']!r}")
        ids.add(layer["layer_id"])
    entries = doc.get("files")
    if not isinstance(entries, list) or not entries:
        raise InvalidManifest("'files' must be a non-empty list")
    for entry in entries:
        for field in ("layer_id", "noise_type", "snr_db", "utterance_id", "path"):
            if field not in entry:
                raise InvalidManifest(f"file entry lacks {field!r}: {entry}")
        if entry["layer_id"] not in ids:
            raise InvalidManifest(f"file entry names unknown layer "
                                  f"{entry['layer_id']!r}")
        if (entry["snr_db"] is None) != (entry["noise_type"] == CLEAN):
            raise InvalidManifest(f"snr_db must be null exactly for clean "
                                  f"entries: {entry}")
        if Path(entry["path"]).is_absolute():
            raise InvalidManifest(f"tensor path must be relative: {entry['path']}")
        if root is not None and not (Path(root) / entry["path"]).is_file():
            raise InvalidManifest(f"tensor file missing: {entry['path']}")
