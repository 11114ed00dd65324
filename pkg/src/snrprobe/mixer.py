"""Deterministic noisy-mixture sweeps over an SNR grid.

Every (utterance, noise type, SNR) cell is a pure function of the input
bytes, the sweep configuration, and the master seed: clean is center
trimmed, a seeded noise segment of equal length is scaled to the target
SNR, the sum is loudness normalized, and the result is written as float32
WAV so no requantization perturbs the controlled SNR. The manifest records
every realized gain and offset, which is enough to reconstruct each
mixture's components exactly.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .audio import (
    AudioClip,
    center_trim,
    noise_offset,
    read_wav,
    scale_noise_to_snr,
    select_noise_segment,
    signal_power,
    write_wav,
)
from .errors import SweepError, ToolkitError
from .loudness import normalize_lufs

log = logging.getLogger(__name__)

MANIFEST_SCHEMA = "snrprobe-mixtures-v1"
MANIFEST_NAME = "manifest.json"


@dataclass
class SweepConfig:
    """Grid and level targets for one mixture sweep."""

    snr_grid_db: list[int] = field(default_factory=lambda: list(range(-10, 31)))
    clip_duration_s: float = 10.0
    window_duration_s: float = 1.9
    target_lufs: float = -23.0

    def __post_init__(self):
        if not self.snr_grid_db:
            raise ValueError("snr_grid_db is empty")
        if any(b <= a for a, b in zip(self.snr_grid_db, self.snr_grid_db[1:])):
            raise ValueError("snr_grid_db must be strictly increasing")
        if self.clip_duration_s <= 0 or self.window_duration_s <= 0:
            raise ValueError("durations must be positive")
        if self.window_duration_s > self.clip_duration_s:
            raise ValueError("window duration exceeds clip duration")

    def to_dict(self) -> dict:
        return {
            "snr_grid_db": list(self.snr_grid_db),
            "clip_duration_s": self.clip_duration_s,
            "window_duration_s": self.window_duration_s,
            "target_lufs": self.target_lufs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        return cls(**{k: d[k] for k in
                      ("snr_grid_db", "clip_duration_s", "window_duration_s", "target_lufs")
                      if k in d})


@dataclass
class MixtureSpec:
    """Realized recipe for one mixture; sufficient to rebuild it exactly."""

    utterance_id: str
    noise_type: str
    target_snr_db: int
    master_seed: int
    noise_offset: int
    noise_gain: float
    post_gain: float
    path: str
    padded: bool = False
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.noise_gain <= 0 or self.post_gain <= 0:
            raise ValueError("gains must be positive")

    def to_dict(self) -> dict:
        return {
            "utterance_id": self.utterance_id,
            "noise_type": self.noise_type,
            "target_snr_db": self.target_snr_db,
            "master_seed": self.master_seed,
            "noise_offset": self.noise_offset,
            "noise_gain": self.noise_gain,
            "post_gain": self.post_gain,
            "path": self.path,
            "padded": self.padded,
            "warnings": list(self.warnings),
        }


def offset_key(utterance_id: str, noise_type: str) -> str:
    """Key hashed with the master seed to pick a noise offset.

    The key spans (utterance, noise type) but not SNR, so one sweep reuses
    the same noise segment at every level: the grid varies only the gain.
    """
    return f"{utterance_id}|{noise_type}"


def _list_wavs(directory: Path) -> dict[str, Path]:
    return {p.stem: p for p in sorted(directory.glob("*.wav"))}


def _mix_cell(clean: AudioClip, noise: AudioClip, utt: str, noise_type: str,
              snr_db: int, seed: int, target_lufs: float,
              out_dir: Path, rel_path: str) -> MixtureSpec:
    segment = select_noise_segment(noise, len(clean), seed, offset_key(utt, noise_type))
    scaled, gain = scale_noise_to_snr(clean, segment, snr_db)
    mixture = AudioClip(clean.samples + scaled.samples, clean.sample_rate_hz,
                        padded=clean.padded)
    normalized, post_gain = normalize_lufs(mixture, target_lufs)

    warnings = []
    peak = float(abs(normalized.samples).max())
    if peak > 1.0:
        warnings.append(f"over_full_scale: peak={peak:.6f}")

    out_path = out_dir / rel_path
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_wav(normalized, out_path, fmt="float32")
    return MixtureSpec(
        utterance_id=utt,
        noise_type=noise_type,
        target_snr_db=snr_db,
        master_seed=seed,
        noise_offset=noise_offset(len(noise), seed, offset_key(utt, noise_type)),
        noise_gain=gain,
        post_gain=post_gain,
        path=rel_path,
        padded=clean.padded,
        warnings=warnings,
    )


def generate_sweep(clean_dir, noise_dir, out_dir, sweep: SweepConfig,
                   master_seed: int, jobs: int = 1) -> dict:
    """Generate the full (utterance x noise x SNR) mixture tree.

    Per-cell failures are collected rather than fatal; the run aborts only
    if some utterance produces no valid mixture at all. Returns the
    manifest dict, which is also written to ``out_dir/manifest.json``.
    """
    clean_dir, noise_dir, out_dir = Path(clean_dir), Path(noise_dir), Path(out_dir)
    clean_paths = _list_wavs(clean_dir)
    noise_paths = _list_wavs(noise_dir)
    if not clean_paths:
        raise SweepError(f"no .wav files in {clean_dir}")
    if not noise_paths:
        raise SweepError(f"no .wav files in {noise_dir}")

    errors: list[dict] = []
    cleans: dict[str, AudioClip] = {}
    for utt, path in clean_paths.items():
        try:
            cleans[utt] = center_trim(read_wav(path), sweep.clip_duration_s)
        except ToolkitError as exc:
            errors.append({"utterance_id": utt, "error": str(exc)})
    noises: dict[str, AudioClip] = {}
    for noise_type, path in noise_paths.items():
        try:
            noises[noise_type] = read_wav(path)
        except ToolkitError as exc:
            errors.append({"noise_type": noise_type, "error": str(exc)})

    cells = [
        (utt, noise_type, snr)
        for utt in sorted(cleans)
        for noise_type in sorted(noises)
        for snr in sweep.snr_grid_db
    ]

    def run_cell(cell):
        utt, noise_type, snr = cell
        rel_path = f"{noise_type}/{utt}__snr{snr:+03d}.wav"
        try:
            return cell, _mix_cell(cleans[utt], noises[noise_type], utt, noise_type,
                                   snr, master_seed, sweep.target_lufs,
                                   out_dir, rel_path), None
        except ToolkitError as exc:
            return cell, None, str(exc)

    out_dir.mkdir(parents=True, exist_ok=True)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(cell) for cell in cells]

    entries: list[MixtureSpec] = []
    ok_per_utt = {utt: 0 for utt in cleans}
    for cell, spec, err in results:
        if spec is not None:
            entries.append(spec)
            ok_per_utt[cell[0]] += 1
        else:
            errors.append({"utterance_id": cell[0], "noise_type": cell[1],
                           "target_snr_db": cell[2], "error": err})

    dead = sorted(utt for utt, n in ok_per_utt.items() if n == 0)
    if dead or not cleans:
        raise SweepError(f"utterances with zero valid mixtures: {dead or sorted(clean_paths)}")

    entries.sort(key=lambda s: (s.utterance_id, s.noise_type, s.target_snr_db))
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "master_seed": master_seed,
        "config": sweep.to_dict(),
        "clean_dir": str(clean_dir),
        "noise_dir": str(noise_dir),
        "utterances": sorted(cleans),
        "noise_types": sorted(noises),
        "entries": [s.to_dict() for s in entries],
        "errors": sorted(errors, key=lambda e: json.dumps(e, sort_keys=True)),
    }
    manifest_path = out_dir / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    log.info("wrote %d mixtures and %s", len(entries), manifest_path)
    return manifest
