import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from snrprobe.audio import (
    CANONICAL_RATE,
    AudioClip,
    center_trim,
    noise_offset,
    read_wav,
    scale_noise_to_snr,
    select_noise_segment,
    signal_power,
    window,
    write_wav,
)
from snrprobe.errors import CorruptFile, EmptyNoise, SilentInput, UnsupportedFormat


def clip_of(n, value=0.25, rate=CANONICAL_RATE):
    return AudioClip(np.full(n, value), rate)


# ---- container ----

def test_clip_rejects_empty():
    with pytest.raises(ValueError):
        AudioClip(np.array([]), CANONICAL_RATE)


def test_clip_rejects_2d():
    with pytest.raises(ValueError):
        AudioClip(np.zeros((4, 2)), CANONICAL_RATE)


def test_clip_rejects_nan():
    with pytest.raises(ValueError):
        AudioClip(np.array([0.0, np.nan]), CANONICAL_RATE)


def test_clip_casts_to_float64():
    clip = AudioClip(np.array([1, 2, 3], dtype=np.int32), CANONICAL_RATE)
    assert clip.samples.dtype == np.float64


def test_duration():
    assert clip_of(8000).duration_s == 0.5


# ---- wav round trips ----

def test_float32_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    samples = rng.uniform(-1, 1, 1000).astype(np.float32).astype(np.float64)
    write_wav(AudioClip(samples, CANONICAL_RATE), tmp_path / "x.wav", fmt="float32")
    back = read_wav(tmp_path / "x.wav")
    np.testing.assert_array_equal(back.samples, samples)
    assert back.sample_rate_hz == CANONICAL_RATE


def test_pcm16_round_trip_quantizes(tmp_path):
    rng = np.random.default_rng(4)
    samples = rng.uniform(-0.9, 0.9, 1000)
    write_wav(AudioClip(samples, CANONICAL_RATE), tmp_path / "x.wav", fmt="pcm16")
    back = read_wav(tmp_path / "x.wav")
    assert np.max(np.abs(back.samples - samples)) <= 0.5 / 32768 + 1e-12


def test_pcm16_clips_at_full_scale(tmp_path):
    write_wav(AudioClip(np.array([1.5, -1.5]), CANONICAL_RATE),
              tmp_path / "x.wav", fmt="pcm16")
    back = read_wav(tmp_path / "x.wav")
    assert back.samples[0] == 32767 / 32768
    assert back.samples[1] == -1.0


def test_unknown_write_format(tmp_path):
    with pytest.raises(ValueError):
        write_wav(clip_of(10), tmp_path / "x.wav", fmt="pcm24")


def test_read_rejects_non_wav(tmp_path):
    (tmp_path / "x.wav").write_bytes(b"not a riff file at all, sorry")
    with pytest.raises(CorruptFile):
        read_wav(tmp_path / "x.wav")


def test_read_rejects_wrong_rate(tmp_path):
    write_wav(AudioClip(np.zeros(100) + 0.1, 8000), tmp_path / "x.wav")
    with pytest.raises(UnsupportedFormat):
        read_wav(tmp_path / "x.wav")


def test_read_fixture_corpus(audio_dir):
    for path in sorted(audio_dir.glob("**/*.wav")):
        clip = read_wav(path)
        assert clip.sample_rate_hz == CANONICAL_RATE
        assert len(clip) > 0


# ---- trimming and windowing ----

def test_center_trim_shortens_symmetrically():
    samples = np.arange(10, dtype=float)
    out = center_trim(AudioClip(samples, 10), 0.6)
    np.testing.assert_array_equal(out.samples, [2, 3, 4, 5, 6, 7])
    assert not out.padded


def test_center_trim_odd_discard_trails():
    out = center_trim(AudioClip(np.arange(5, dtype=float), 10), 0.2)
    np.testing.assert_array_equal(out.samples, [1, 2])


def test_center_trim_pads_and_flags():
    out = center_trim(AudioClip(np.ones(4), 10), 0.8)
    assert len(out) == 8
    assert out.padded
    np.testing.assert_array_equal(out.samples[2:6], np.ones(4))
    assert out.samples[0] == out.samples[-1] == 0.0


def test_center_trim_noop_preserves_length():
    out = center_trim(clip_of(160), 160 / CANONICAL_RATE)
    assert len(out) == 160


def test_window_drops_partial_tail():
    clip = AudioClip(np.arange(10, dtype=float), 4)
    parts = window(clip, 1.0)
    assert len(parts) == 2
    np.testing.assert_array_equal(parts[0].samples, [0, 1, 2, 3])
    np.testing.assert_array_equal(parts[1].samples, [4, 5, 6, 7])


def test_window_propagates_padded_flag():
    clip = AudioClip(np.ones(8), 4, padded=True)
    assert all(w.padded for w in window(clip, 1.0))


# ---- noise selection ----

def test_noise_offset_in_range():
    for seed in range(20):
        assert 0 <= noise_offset(977, seed, "utt|babble") < 977


def test_select_noise_segment_wraps():
    noise = AudioClip(np.arange(5, dtype=float), CANONICAL_RATE)
    seg = select_noise_segment(noise, 8, 0, "k")
    start = noise_offset(5, 0, "k")
    expected = [(start + i) % 5 for i in range(8)]
    np.testing.assert_array_equal(seg.samples, expected)


def test_select_noise_segment_deterministic():
    noise = AudioClip(np.random.default_rng(1).normal(size=300), CANONICAL_RATE)
    a = select_noise_segment(noise, 100, 42, "utt01|hum")
    b = select_noise_segment(noise, 100, 42, "utt01|hum")
    np.testing.assert_array_equal(a.samples, b.samples)


def test_select_noise_segment_empty_noise():
    noise = AudioClip(np.array([0.1]), CANONICAL_RATE)
    seg = select_noise_segment(noise, 3, 0, "k")
    assert len(seg) == 3
    with pytest.raises(EmptyNoise):
        # bypass the constructor check to hit the guard
        noise.samples = np.array([])
        select_noise_segment(noise, 3, 0, "k")


# ---- SNR scaling ----

def test_scale_noise_hits_target_exactly():
    rng = np.random.default_rng(6)
    clean = AudioClip(rng.normal(size=4000), CANONICAL_RATE)
    noise = AudioClip(rng.normal(size=4000) * 3, CANONICAL_RATE)
    for target in (-10.0, 0.0, 17.5, 30.0):
        scaled, gain = scale_noise_to_snr(clean, noise, target)
        achieved = 10 * np.log10(signal_power(clean) / signal_power(scaled))
        assert achieved == pytest.approx(target, abs=1e-9)
        assert gain > 0


def test_scale_noise_rejects_silence():
    clean = clip_of(100, value=0.0)
    noise = clip_of(100, value=0.5)
    with pytest.raises(SilentInput):
        scale_noise_to_snr(clean, noise, 0.0)


def test_scale_noise_length_mismatch():
    with pytest.raises(ValueError):
        scale_noise_to_snr(clip_of(10), clip_of(11), 0.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-20, max_value=40),
       st.integers(min_value=2, max_value=50))
def test_scale_noise_snr_property(target, seed):
    rng = np.random.default_rng(seed)
    clean = AudioClip(rng.normal(size=500), CANONICAL_RATE)
    noise = AudioClip(rng.normal(size=500), CANONICAL_RATE)
    scaled, _ = scale_noise_to_snr(clean, noise, target)
    achieved = 10 * np.log10(signal_power(clean) / signal_power(scaled))
    assert abs(achieved - target) < 1e-8
