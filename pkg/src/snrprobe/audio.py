"""Mono waveform container, strict WAV I/O, and SNR-exact level operations.

All audio math runs on float64 time-domain samples with full scale at 1.0.
The WAV reader is deliberately strict: PCM16 or IEEE float32, single
channel, 16 kHz. Anything else is an error rather than a silent resample.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import CorruptFile, EmptyNoise, SilentInput, UnsupportedFormat
from .util import stable_hash64

CANONICAL_RATE = 16000

_WAVE_PCM = 0x0001
_WAVE_IEEE_FLOAT = 0x0003


@dataclass
class AudioClip:
    """Mono sampled waveform; full scale corresponds to amplitude 1.0."""

    samples: np.ndarray
    sample_rate_hz: int
    padded: bool = False

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("AudioClip needs a nonempty 1-D sample array")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("AudioClip samples must be finite")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def read_wav(path) -> AudioClip:
    """Read a mono 16 kHz PCM16 or float32 RIFF/WAVE file.

    PCM16 samples are scaled by 1/32768; float32 samples pass through
    bit-exactly (widened to float64).
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptFile(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise CorruptFile(f"{path}: fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_size:
                raise CorruptFile(f"{path}: data chunk truncated")
            payload = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None or payload is None:
        raise CorruptFile(f"{path}: missing fmt or data chunk")
    tag, channels, rate, _byte_rate, _block_align, bits = fmt
    if channels != 1:
        raise UnsupportedFormat(f"{path}: {channels} channels, expected mono")
    if rate != CANONICAL_RATE:
        raise UnsupportedFormat(f"{path}: sample rate {rate}, expected {CANONICAL_RATE}")
    if tag == _WAVE_PCM and bits == 16:
        samples = np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0
    elif tag == _WAVE_IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedFormat(f"{path}: format tag {tag} with {bits} bits unsupported")
    if samples.size < 1:
        raise CorruptFile(f"{path}: empty data chunk")
    return AudioClip(samples, rate)


def write_wav(clip: AudioClip, path, fmt: str = "float32") -> None:
    """Write a mono WAV file, IEEE float32 by default (no requantization)."""
    if fmt == "float32":
        raw = clip.samples.astype("<f4").tobytes()
        tag, bits = _WAVE_IEEE_FLOAT, 32
    elif fmt == "pcm16":
        ints = np.clip(np.round(clip.samples * 32768.0), -32768, 32767)
        raw = ints.astype("<i2").tobytes()
        tag, bits = _WAVE_PCM, 16
    else:
        raise ValueError(f"unknown wav format {fmt!r}")
    block_align = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(raw), b"WAVE",
        b"fmt ", 16, tag, 1, clip.sample_rate_hz,
        clip.sample_rate_hz * block_align, block_align, bits,
        b"data", len(raw),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(raw)


def center_trim(clip: AudioClip, duration_s: float) -> AudioClip:
    """Trim (or symmetrically zero-pad) a clip to an exact duration.

    When the discard or pad count is odd the extra sample lands on the
    trailing side. Padded outputs carry ``padded=True``.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    out_len = round(duration_s * clip.sample_rate_hz)
    n = len(clip)
    if n == out_len:
        return replace(clip)
    if n > out_len:
        start = (n - out_len) // 2
        return AudioClip(clip.samples[start:start + out_len].copy(),
                         clip.sample_rate_hz, padded=clip.padded)
    pad = out_len - n
    lead = pad // 2
    out = np.zeros(out_len, dtype=np.float64)
    out[lead:lead + n] = clip.samples
    return AudioClip(out, clip.sample_rate_hz, padded=True)


def noise_offset(noise_len: int, seed: int, key: str) -> int:
    """Deterministic starting offset into a noise recording."""
    return stable_hash64(key, seed) % noise_len


def select_noise_segment(noise: AudioClip, length: int, seed: int, key: str) -> AudioClip:
    """Cut a seeded segment from a noise recording, tiling with wraparound.

    The offset is ``stable_hash64(key, seed) mod len(noise)``, so the same
    (seed, key) always selects identical samples regardless of platform.
    """
    n = len(noise)
    if n < 1:
        raise EmptyNoise("noise recording is empty")
    offset = noise_offset(n, seed, key)
    idx = (offset + np.arange(length)) % n
    return AudioClip(noise.samples[idx], noise.sample_rate_hz)


def signal_power(clip: AudioClip) -> float:
    """Mean-square power of the samples."""
    return float(np.mean(np.square(clip.samples)))


def scale_noise_to_snr(clean: AudioClip, noise: AudioClip, snr_db: float):
    """Scale noise so that 10*log10(P_clean / P_noise) hits the target SNR.

    Returns the scaled noise clip and the applied gain.
    """
    if len(clean) != len(noise):
        raise ValueError("clean and noise must have equal length")
    p_clean = signal_power(clean)
    p_noise = signal_power(noise)
    if p_clean <= 0.0 or p_noise <= 0.0:
        raise SilentInput("cannot set an SNR against a silent component")
    gain = math.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    return AudioClip(gain * noise.samples, noise.sample_rate_hz), gain


def window(clip: AudioClip, window_s: float) -> list[AudioClip]:
    """Split into consecutive non-overlapping windows; drop the partial tail."""
    if window_s <= 0:
        raise ValueError("window_s must be positive")
    wlen = round(window_s * clip.sample_rate_hz)
    count = len(clip) // wlen
    return [
        AudioClip(clip.samples[i * wlen:(i + 1) * wlen].copy(),
                  clip.sample_rate_hz, padded=clip.padded)
        for i in range(count)
    ]
