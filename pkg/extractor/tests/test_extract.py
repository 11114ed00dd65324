"""Extraction over a tiny hand-built sweep (no analysis package involved)."""

import hashlib
import json

import numpy as np
import pytest
from scipy.io import wavfile

from snrprobe_extract.errors import (BadHooks, BadMixtures, HookMiss,
                                     InvalidManifest, ShapeDrift)
from snrprobe_extract.extract import extract, load_mixtures_manifest, validate_manifest
from snrprobe_extract.hooks import HookSpec
from snrprobe_extract.standin import StandinLayer, StandinModel

RATE = 8000
HOOKS = [HookSpec("a.l1", "a1", "blkA", first_in_block=True),
         HookSpec("b.l1", "b1", "blkB", first_in_block=True)]


def tiny_model():
    return StandinModel(5, 40, 4, [StandinLayer("a.l1", 3),
                                   StandinLayer("b.l1", 5)])


def write_wav(path, n, seed):
    path.parent.mkdir(parents=True, exist_ok=True)
    data = 0.1 * np.random.default_rng(seed).normal(size=n)
    wavfile.write(path, RATE, data.astype(np.float32))


def make_mixtures(root, utts=("u1", "u2"), noises=("nz",), snrs=(0, 5),
                  clip_s=0.1, window_s=0.05, clean_dir=None):
    """Sweep directory with the manifest fields extraction relies on."""
    clean = root / "clean" if clean_dir is None else clean_dir
    for i, utt in enumerate(utts):
        # slightly longer than the clip so the center trim has work to do
        write_wav(clean / f"{utt}.wav", round(1.5 * clip_s * RATE), 100 + i)
    mix = root / "mix"
    entries = []
    seed = 200
    for utt in utts:
        for noise in noises:
            for snr in snrs:
                seed += 1
                rel = f"{noise}/{utt}__snr{snr:+03d}.wav"
                write_wav(mix / rel, round(clip_s * RATE), seed)
                entries.append({"utterance_id": utt, "noise_type": noise,
                                "target_snr_db": snr, "path": rel})
    manifest = {
        "schema": "snrprobe-mixtures-v1",
        "config": {"snr_grid_db": sorted(snrs), "clip_duration_s": clip_s,
                   "window_duration_s": window_s, "target_lufs": -23.0},
        "clean_dir": str(clean),
        "utterances": sorted(utts),
        "noise_types": sorted(noises),
        "entries": entries,
    }
    (mix / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return mix


def tree_hashes(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_per_window_file_counts(tmp_path):
    mix = make_mixtures(tmp_path)
    doc = extract(tiny_model(), mix, HOOKS, tmp_path / "act")
    # 2 layers x (2 clean utts + 4 mixtures) x 2 windows per 0.1 s clip
    assert len(doc["files"]) == 2 * (2 + 4) * 2
    clean = [e for e in doc["files"] if e["noise_type"] == "clean"]
    assert len(clean) == 2 * 2 * 2
    assert all(e["snr_db"] is None for e in clean)
    arr = np.load(tmp_path / "act" / doc["files"][0]["path"])
    assert arr.dtype == np.float32
    assert arr.shape == (10, 3)  # 400-sample window, 40-sample frames, dim 3


def test_window_average_halves_files_and_matches_mean(tmp_path):
    mix = make_mixtures(tmp_path)
    per_win = extract(tiny_model(), mix, HOOKS, tmp_path / "win")
    avg = extract(tiny_model(), mix, HOOKS, tmp_path / "avg", window_average=True)
    assert len(avg["files"]) == len(per_win["files"]) // 2

    want = avg["files"][0]
    parts = [e for e in per_win["files"]
             if (e["layer_id"], e["noise_type"], e["snr_db"], e["utterance_id"])
             == (want["layer_id"], want["noise_type"], want["snr_db"],
                 want["utterance_id"])]
    stack = np.stack([np.load(tmp_path / "win" / e["path"]).astype(np.float64)
                      for e in sorted(parts, key=lambda e: e["path"])])
    got = np.load(tmp_path / "avg" / want["path"])
    assert np.allclose(got, stack.mean(axis=0), atol=1e-7)


def test_manifest_layout(tmp_path):
    mix = make_mixtures(tmp_path)
    doc = extract(tiny_model(), mix, HOOKS, tmp_path / "act")
    assert doc["schema"] == "snrprobe-activations-v1"
    assert [l["layer_id"] for l in doc["layers"]] == ["a1", "b1"]
    assert doc["layers"][0]["first_in_block"] is True
    assert doc["noise_types"] == ["nz"]
    assert doc["snr_grid_db"] == [0, 5]
    assert doc["utterances"] == ["u1", "u2"]
    keys = [(e["layer_id"], e["noise_type"], e["snr_db"] is not None,
             e["snr_db"] or 0, e["utterance_id"], e["path"]) for e in doc["files"]]
    assert keys == sorted(keys)
    on_disk = json.loads((tmp_path / "act" / "activations_manifest.json").read_text())
    assert on_disk == doc


def test_extraction_is_bit_deterministic(tmp_path):
    mix = make_mixtures(tmp_path)
    extract(tiny_model(), mix, HOOKS, tmp_path / "one")
    extract(tiny_model(), mix, HOOKS, tmp_path / "two")
    assert tree_hashes(tmp_path / "one") == tree_hashes(tmp_path / "two")


def test_relative_clean_dir_resolves_against_sweep_parent(tmp_path):
    mix = make_mixtures(tmp_path)
    manifest_path = mix / "manifest.json"
    doc = json.loads(manifest_path.read_text())
    doc["clean_dir"] = "clean"  # as if the sweep ran from tmp_path
    manifest_path.write_text(json.dumps(doc))
    out = extract(tiny_model(), mix, HOOKS, tmp_path / "act")
    assert any(e["noise_type"] == "clean" for e in out["files"])


def test_clean_dir_override(tmp_path):
    moved = tmp_path / "elsewhere"
    mix = make_mixtures(tmp_path, clean_dir=moved)
    doc = json.loads((mix / "manifest.json").read_text())
    doc["clean_dir"] = str(tmp_path / "gone")
    (mix / "manifest.json").write_text(json.dumps(doc))
    with pytest.raises(BadMixtures, match="not found|does not exist"):
        extract(tiny_model(), mix, HOOKS, tmp_path / "act")
    out = extract(tiny_model(), mix, HOOKS, tmp_path / "act", clean_dir=moved)
    assert out["utterances"] == ["u1", "u2"]


def test_missing_clean_wav_fails(tmp_path):
    mix = make_mixtures(tmp_path)
    (tmp_path / "clean" / "u2.wav").unlink()
    with pytest.raises(BadMixtures, match="u2"):
        extract(tiny_model(), mix, HOOKS, tmp_path / "act")


def test_manifest_problems_rejected(tmp_path):
    with pytest.raises(BadMixtures, match="cannot read"):
        load_mixtures_manifest(tmp_path)
    mix = make_mixtures(tmp_path)
    path = mix / "manifest.json"
    doc = json.loads(path.read_text())
    doc["schema"] = "other"
    path.write_text(json.dumps(doc))
    with pytest.raises(BadMixtures, match="schema"):
        load_mixtures_manifest(mix)
    doc["schema"] = "snrprobe-mixtures-v1"
    doc["entries"] = []
    path.write_text(json.dumps(doc))
    with pytest.raises(BadMixtures, match="no mixtures"):
        load_mixtures_manifest(mix)


def test_clip_shorter_than_window_fails(tmp_path):
    mix = make_mixtures(tmp_path, clip_s=0.1, window_s=0.2)
    with pytest.raises(BadMixtures, match="shorter than one"):
        extract(tiny_model(), mix, HOOKS, tmp_path / "act")


class _DriftModel:
    """Emits a different trailing dim every other window."""

    layer_names = ["x"]

    def __init__(self):
        self.calls = 0

    def forward(self, samples):
        self.calls += 1
        dim = 3 if self.calls % 2 else 4
        return {"x": np.zeros((len(samples) // 40, dim))}


def test_shape_drift_detected(tmp_path):
    mix = make_mixtures(tmp_path)
    with pytest.raises(ShapeDrift, match="trailing shape"):
        extract(_DriftModel(), mix, [HookSpec("x", "x", "bx")], tmp_path / "act")


class _SilentModel:
    layer_names = ["x"]

    def forward(self, samples):
        return {}


def test_hooked_layer_without_output_is_a_miss(tmp_path):
    mix = make_mixtures(tmp_path)
    with pytest.raises(HookMiss, match="emitted nothing"):
        extract(_SilentModel(), mix, [HookSpec("x", "x", "bx")], tmp_path / "act")


def test_token_axis_out_of_range(tmp_path):
    mix = make_mixtures(tmp_path)
    hooks = [HookSpec("a.l1", "a1", "blkA", token_axis=5)]
    with pytest.raises(BadHooks, match="token axis 5"):
        extract(tiny_model(), mix, hooks, tmp_path / "act")


def test_validate_manifest_mutations(tmp_path):
    mix = make_mixtures(tmp_path)
    doc = extract(tiny_model(), mix, HOOKS, tmp_path / "act")
    validate_manifest(doc, root=tmp_path / "act")  # baseline passes

    breakers = [
        (lambda d: d.update(schema="x"), "schema"),
        (lambda d: d.update(layers=[]), "layers"),
        (lambda d: d["layers"][0].pop("block"), "block"),
        (lambda d: d["layers"].append(dict(d["layers"][0])), "duplicate"),
        (lambda d: d["files"][0].update(layer_id="ghost"), "unknown layer"),
        (lambda d: d["files"][0].update(snr_db=3), "null exactly"),
        (lambda d: d["files"][-1].update(path="/abs/t.npy"), "relative"),
    ]
    for mutate, match in breakers:
        broken = json.loads(json.dumps(doc))
        mutate(broken)
        with pytest.raises(InvalidManifest, match=match):
            validate_manifest(broken)

    missing = json.loads(json.dumps(doc))
    missing["files"][0]["path"] = "a1/not_there.npy"
    with pytest.raises(InvalidManifest, match="missing"):
        validate_manifest(missing, root=tmp_path / "act")
