"""Minimal mono WAV reading for extraction inputs.

The mixture sweep writes IEEE float32 WAV; clean corpora are commonly
PCM16. Both decode to float64 with full scale at 1.0, matching the level
convention of the files' producer.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import BadMixtures


def read_wav(path) -> tuple[np.ndarray, int]:
    """Return (samples as float64, sample rate) for a mono WAV file."""
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise BadMixtures(f"{path}: cannot read WAV ({exc})") from exc
    if data.ndim != 1:
        raise BadMixtures(f"{path}: expected mono, got {data.ndim} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise BadMixtures(f"{path}: unsupported sample dtype {data.dtype}")
    return samples, int(rate)


def center_trim(samples: np.ndarray, out_len: int) -> np.ndarray:
    """Trim or zero-pad symmetrically; an odd remainder lands trailing."""
    n = len(samples)
    if n == out_len:
        return samples
    if n > out_len:
        start = (n - out_len) // 2
        return samples[start:start + out_len]
    lead = (out_len - n) // 2
    out = np.zeros(out_len, dtype=samples.dtype)
    out[lead:lead + n] = samples
    return out
