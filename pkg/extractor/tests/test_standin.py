import json

import numpy as np
import pytest

from snrprobe_extract.errors import BadCheckpoint
from snrprobe_extract.standin import (StandinLayer, StandinModel,
                                      bundled_checkpoint_path,
                                      bundled_hooks_path, load_checkpoint)


def small_model(seed=5):
    return StandinModel(seed, 40, 4, [StandinLayer("a.l1", 3),
                                      StandinLayer("b.l1", 5)])


def test_forward_shapes_tokens_first():
    model = small_model()
    out = model.forward(np.linspace(-0.5, 0.5, 405))
    assert set(out) == {"a.l1", "b.l1"}
    assert out["a.l1"].shape == (10, 3)  # 405 // 40 tokens, trailing samples dropped
    assert out["b.l1"].shape == (10, 5)


def test_forward_is_deterministic_across_instances():
    x = np.random.default_rng(0).normal(size=800) * 0.1
    a = small_model().forward(x)
    b = small_model().forward(x)
    for name in a:
        assert np.array_equal(a[name], b[name])


def test_different_seed_different_weights():
    x = np.random.default_rng(0).normal(size=400)
    assert not np.array_equal(small_model(5).forward(x)["b.l1"],
                              small_model(6).forward(x)["b.l1"])


def test_outputs_are_tanh_bounded():
    out = small_model().forward(np.random.default_rng(1).normal(size=2000))
    for arr in out.values():
        assert np.all(np.abs(arr) < 1.0)


def test_window_shorter_than_frame_rejected():
    with pytest.raises(ValueError, match="shorter than one"):
        small_model().forward(np.zeros(39))


def test_non_1d_input_rejected():
    with pytest.raises(ValueError, match="1-D"):
        small_model().forward(np.zeros((2, 40)))


def test_checkpoint_validation():
    with pytest.raises(BadCheckpoint, match="no layers"):
        StandinModel(1, 40, 4, [])
    with pytest.raises(BadCheckpoint, match="duplicate"):
        StandinModel(1, 40, 4, [StandinLayer("x", 3), StandinLayer("x", 4)])
    with pytest.raises(BadCheckpoint, match="positive"):
        StandinModel(1, 0, 4, [StandinLayer("x", 3)])
    with pytest.raises(BadCheckpoint, match="positive"):
        StandinModel(1, 40, 4, [StandinLayer("x", 0)])


def test_load_checkpoint_errors(tmp_path):
    with pytest.raises(BadCheckpoint, match="cannot read"):
        load_checkpoint(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(BadCheckpoint, match="not valid JSON"):
        load_checkpoint(bad)
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"schema": "other", "seed": 1}))
    with pytest.raises(BadCheckpoint, match="schema"):
        load_checkpoint(wrong)
    partial = tmp_path / "partial.json"
    partial.write_text(json.dumps({"schema": "snrprobe-standin-v1", "seed": 1,
                                   "frame_len": 40, "feature_dim": 4}))
    with pytest.raises(BadCheckpoint):
        load_checkpoint(partial)


def test_bundled_files_load():
    model = load_checkpoint(bundled_checkpoint_path())
    assert "latent.l1" in model.layer_names
    assert bundled_hooks_path().is_file()
    # 1.9 s at 16 kHz and 400-sample frames gives 76 tokens
    out = model.forward(np.zeros(30400))
    assert out["enc1.l1"].shape == (76, 32)
    assert out["latent.l1"].shape == (76, 24)
