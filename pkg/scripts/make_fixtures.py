#!/usr/bin/env python3
"""Regenerate the committed test fixtures.

Everything here is seeded, so re-running the script reproduces the
fixture tree byte for byte. Two families are produced:

* ``fixtures/audio``: four small mono 16 kHz WAVs. One clean utterance is
  shorter than the 10 s analysis clip (exercises center padding) and one
  noise file is shorter than the clip (exercises wraparound tiling).
* ``fixtures/activations``: a synthetic activation tree over a reduced
  5-point SNR grid, following a drift model where deeper layers move
  further from their clean state as SNR falls and the refinement block
  moves back toward it. Tensor files mix .npy and .tnsr containers, and
  one cell is split into two window files.

Also writes ``fixtures/pipeline.json``, the config used by the demo
script and the end-to-end tests.
"""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from snrprobe.audio import AudioClip, CANONICAL_RATE, write_wav
from snrprobe.tensors import write_tensor

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

SNR_GRID = [-10, 0, 10, 20, 30]
NOISE_TYPES = ["babble", "hum"]
UTTERANCES = ["utt01", "utt02", "utt03", "utt04"]

# (layer_id, block, dim, drift amplitude, skip_input, skip_output, fmt, dtype)
LAYERS = [
    ("enc1_l1", "enc1", 16, 0.05, False, True, "npy", "<f4"),
    ("enc2_l1", "enc2", 16, 0.10, False, True, "npy", "<f4"),
    ("latent_l1", "latent", 12, 0.80, False, False, "npy", "<f4"),
    ("dec2_l1", "dec2", 16, 0.60, True, False, "npy", "<f4"),
    ("dec1_l1", "dec1", 16, 0.50, True, False, "npy", "<f8"),
    ("refine_l1", "refine", 16, 0.15, False, False, "tnsr", "<f4"),
]
TOKENS = 3
NOISE_SIGMA = 0.01
WOBBLE_SCALE = 16.0


def speech_like(rng, duration_s, f0_start, f0_end):
    """Harmonic tone with vibrato, amplitude modulation, and pauses."""
    n = int(round(duration_s * CANONICAL_RATE))
    t = np.arange(n) / CANONICAL_RATE
    f0 = np.linspace(f0_start, f0_end, n) + 3.0 * np.sin(2 * np.pi * 5.0 * t)
    phase = 2 * np.pi * np.cumsum(f0) / CANONICAL_RATE
    x = np.zeros(n)
    for k in range(1, 9):
        x += np.sin(k * phase + rng.uniform(0, 2 * np.pi)) / k
    x *= 0.6 + 0.4 * np.sin(2 * np.pi * 3.0 * t + rng.uniform(0, 2 * np.pi))
    # carve a few pauses so the gating paths see quiet blocks
    for _ in range(3):
        start = rng.integers(0, max(1, n - CANONICAL_RATE // 2))
        length = rng.integers(CANONICAL_RATE // 10, CANONICAL_RATE // 3)
        fade = np.ones(n)
        fade[start:start + length] = 0.02
        x *= fade
    return 0.5 * x / np.max(np.abs(x))


def babble_like(rng, duration_s):
    n = int(round(duration_s * CANONICAL_RATE))
    white = rng.normal(size=n)
    # single-pole lowpass for a speech-band weighted spectrum
    out = np.empty(n)
    state = 0.0
    for i in range(n):
        state = 0.97 * state + 0.03 * white[i]
        out[i] = state
    out += 0.05 * rng.normal(size=n)
    return 0.4 * out / np.max(np.abs(out))


def hum_like(rng, duration_s):
    n = int(round(duration_s * CANONICAL_RATE))
    t = np.arange(n) / CANONICAL_RATE
    x = (np.sin(2 * np.pi * 50.0 * t) + 0.5 * np.sin(2 * np.pi * 100.0 * t)
         + 0.25 * np.sin(2 * np.pi * 150.0 * t))
    x += 0.1 * rng.normal(size=n)
    return 0.3 * x / np.max(np.abs(x))


def make_audio():
    clean_dir = FIXTURES / "audio" / "clean"
    noise_dir = FIXTURES / "audio" / "noise"
    clean_dir.mkdir(parents=True, exist_ok=True)
    noise_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(411)
    write_wav(AudioClip(speech_like(rng, 10.0, 110.0, 180.0), CANONICAL_RATE),
              clean_dir / "utt01.wav", fmt="pcm16")
    write_wav(AudioClip(speech_like(rng, 7.0, 150.0, 120.0), CANONICAL_RATE),
              clean_dir / "utt02.wav", fmt="float32")
    write_wav(AudioClip(speech_like(rng, 4.5, 95.0, 210.0), CANONICAL_RATE),
              clean_dir / "utt03.wav", fmt="pcm16")
    write_wav(AudioClip(speech_like(rng, 5.5, 200.0, 90.0), CANONICAL_RATE),
              clean_dir / "utt04.wav", fmt="float32")
    write_wav(AudioClip(babble_like(rng, 12.0), CANONICAL_RATE),
              noise_dir / "babble.wav", fmt="float32")
    write_wav(AudioClip(hum_like(rng, 5.0), CANONICAL_RATE),
              noise_dir / "hum.wav", fmt="pcm16")
    print(f"audio fixtures -> {clean_dir.parent}")


def drift_fraction(snr_db):
    """0 at 30 dB rising to 1 at -10 dB."""
    return (30.0 - snr_db) / 40.0


def make_activations():
    out_root = FIXTURES / "activations"
    out_root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(1893)

    bases = {}      # (layer, utt) -> base vector
    directions = {}  # layer -> shared drift direction (moves centroids)
    wobbles = {}    # (layer, noise, utt) -> direction that bends row geometry
    for layer_id, _, dim, _, _, _, _, _ in LAYERS:
        d = rng.normal(size=dim)
        directions[layer_id] = d / np.linalg.norm(d)
        for utt in UTTERANCES:
            bases[(layer_id, utt)] = rng.normal(size=dim)
        for noise_type in NOISE_TYPES:
            for utt in UTTERANCES:
                w = rng.normal(size=dim)
                wobbles[(layer_id, noise_type, utt)] = WOBBLE_SCALE * w / np.linalg.norm(w)

    files = []

    def tensor_for(layer_id, dim, amplitude, noise_type, utt, snr_db, jitter_rng):
        # A purely shared drift is invisible to centered similarity measures,
        # so each (noise, utterance) pair also drifts along its own direction.
        base = bases[(layer_id, utt)]
        if snr_db is None:
            shift = 0.0
        else:
            drift = amplitude * drift_fraction(snr_db)
            shift = drift * (directions[layer_id]
                             + wobbles[(layer_id, noise_type, utt)])
        rows = []
        for _ in range(TOKENS):
            rows.append(base + shift + NOISE_SIGMA * jitter_rng.normal(size=dim))
        return np.stack(rows)

    for layer_id, block, dim, amplitude, _, _, fmt, dtype in LAYERS:
        layer_dir = out_root / layer_id
        layer_dir.mkdir(exist_ok=True)
        conditions = [("clean", None)] + [(m, s) for m in NOISE_TYPES for s in SNR_GRID]
        for noise_type, snr_db in conditions:
            for utt in UTTERANCES:
                tag = "clean" if snr_db is None else f"{noise_type}_{snr_db:+03d}"
                # one cell split into two analysis windows
                split = (layer_id == "enc1_l1" and noise_type == "babble"
                         and snr_db == 0 and utt == "utt01")
                n_windows = 2 if split else 1
                for w in range(n_windows):
                    data = tensor_for(layer_id, dim, amplitude, noise_type,
                                      utt, snr_db, rng)
                    if layer_id == "enc2_l1":
                        data = data.reshape(TOKENS, 2, dim // 2)  # pooled back to dim
                    suffix = f"_w{w}" if split else ""
                    rel = f"{layer_id}/{tag}_{utt}{suffix}.{fmt}"
                    write_tensor(data.astype(dtype), out_root / rel)
                    files.append({
                        "layer_id": layer_id,
                        "noise_type": noise_type,
                        "snr_db": snr_db,
                        "utterance_id": utt,
                        "path": rel,
                    })

    manifest = {
        "schema": "snrprobe-activations-v1",
        "layers": [{
            "layer_id": layer_id,
            "block": block,
            "token_axis": 0,
            "first_in_block": True,
            "skip_input": skip_in,
            "skip_output": skip_out,
        } for layer_id, block, _, _, skip_in, skip_out, _, _ in LAYERS],
        "noise_types": NOISE_TYPES,
        "snr_grid_db": SNR_GRID,
        "utterances": UTTERANCES,
        "files": files,
    }
    path = out_root / "activations_manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(f"activation fixtures -> {out_root} ({len(files)} tensors)")


def make_config():
    config = {
        "schema": "snrprobe-config-v1",
        "seed": 20240601,
        "jobs": 1,
        "stages": ["mix", "pool", "cka", "fit", "diffusion", "render"],
        "paths": {
            "clean_dir": "fixtures/audio/clean",
            "noise_dir": "fixtures/audio/noise",
            "activations_dir": "fixtures/activations",
            "activations_manifest": "fixtures/activations/activations_manifest.json",
            "output_dir": "out",
        },
        "sweep": {"snr_grid_db": SNR_GRID},
        "cka": {"bootstrap_resamples": 200},
        "diffusion": {"n_coords": 3},
        "render": {"representative_snrs": [-10, 0, 30]},
    }
    path = FIXTURES / "pipeline.json"
    path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    print(f"pipeline config -> {path}")


if __name__ == "__main__":
    make_audio()
    make_activations()
    make_config()
