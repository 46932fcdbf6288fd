import warnings

import numpy as np
import pytest
from scipy.io import wavfile

from isacough.audio_io import (
    AudioBuffer,
    AudioError,
    ClippingWarning,
    load_audio,
    load_for_analysis,
    resample,
    save_audio,
)


def test_stereo_is_averaged_to_mono(tmp_path):
    data = np.array([[1.0, 0.0]] * 10, dtype=np.float32)
    wavfile.write(tmp_path / "st.wav", 44100, data)
    buf = load_audio(tmp_path / "st.wav")
    assert buf.sample_rate == 44100
    np.testing.assert_array_equal(buf.samples, 0.5)


def test_identical_channels_downmix_exactly(tmp_path, rng):
    ch = (rng.uniform(-1, 1, 500) * 32767).astype(np.int16)
    wavfile.write(tmp_path / "x.wav", 22050, np.stack([ch, ch, ch], axis=1))
    buf = load_audio(tmp_path / "x.wav")
    np.testing.assert_array_equal(buf.samples, ch / 32768.0)


def test_int16_full_scale(tmp_path):
    wavfile.write(tmp_path / "f.wav", 8000, np.array([-32768, 0, 32767], dtype=np.int16))
    buf = load_audio(tmp_path / "f.wav")
    assert buf.samples[0] == -1.0
    assert buf.samples[1] == 0.0


def test_ten_minutes_length(tmp_path):
    wavfile.write(tmp_path / "long.wav", 44100, np.zeros(600 * 44100, dtype=np.int16))
    assert len(load_audio(tmp_path / "long.wav")) == 26_460_000


@pytest.mark.parametrize("dtype", [np.uint8, np.int32, np.float64])
def test_unsupported_encoding(tmp_path, dtype):
    wavfile.write(tmp_path / "u.wav", 8000, np.zeros(100, dtype=dtype))
    with pytest.raises(AudioError):
        load_audio(tmp_path / "u.wav")


def test_unreadable_and_missing(tmp_path):
    (tmp_path / "junk.wav").write_bytes(b"not a wav file at all")
    with pytest.raises(AudioError):
        load_audio(tmp_path / "junk.wav")
    with pytest.raises(AudioError):
        load_audio(tmp_path / "missing.wav")


def test_zero_length_rejected(tmp_path):
    wavfile.write(tmp_path / "empty.wav", 8000, np.zeros(0, dtype=np.int16))
    with pytest.raises(AudioError):
        load_audio(tmp_path / "empty.wav")


def test_buffer_invariants():
    with pytest.raises(AudioError):
        AudioBuffer(np.array([0.0, np.nan]), 44100)
    with pytest.raises(AudioError):
        AudioBuffer(np.zeros(4), 0)


def test_resample_identity():
    buf = AudioBuffer(np.linspace(-1, 1, 100), 44100)
    assert resample(buf, 44100) is buf


def test_resample_duration(sine_48k):
    out = resample(sine_48k, 44100)
    assert out.sample_rate == 44100
    assert abs(len(out) - 44100) <= 1


def test_resample_sine_accuracy(sine_48k):
    out = resample(sine_48k, 44100)
    t = np.arange(len(out)) / 44100
    expected = 0.5 * np.sin(2 * np.pi * 1000.0 * t)
    edge = int(0.010 * 44100)
    err = np.abs(out.samples - expected)[edge:-edge]
    assert err.max() < 1e-3


def test_resample_rejects_bad_rate(sine_48k):
    with pytest.raises(AudioError):
        resample(sine_48k, 0)


def test_save_load_roundtrip(tmp_path):
    ramp = np.linspace(-1.0, 1.0, 1000)
    save_audio(AudioBuffer(ramp, 44100), tmp_path / "r.wav")
    back = load_audio(tmp_path / "r.wav")
    assert np.max(np.abs(back.samples - ramp)) <= 1 / 32768


def test_save_writes_pcm16(tmp_path):
    save_audio(AudioBuffer(np.zeros(10), 16000), tmp_path / "z.wav")
    rate, data = wavfile.read(tmp_path / "z.wav")
    assert rate == 16000 and data.dtype == np.int16


def test_save_empty_is_error(tmp_path):
    with pytest.raises(AudioError):
        save_audio(AudioBuffer(np.zeros(0), 44100), tmp_path / "e.wav")


def test_save_clamps_with_warning(tmp_path):
    with pytest.warns(ClippingWarning):
        save_audio(AudioBuffer(np.array([1.5, -2.0, 0.25]), 44100), tmp_path / "c.wav")
    back = load_audio(tmp_path / "c.wav")
    assert back.samples[0] == pytest.approx(1.0, abs=1 / 32768)
    assert back.samples[1] == -1.0


def test_in_range_save_is_silent(tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        save_audio(AudioBuffer(np.array([0.9, -0.9]), 44100), tmp_path / "ok.wav")


def test_load_for_analysis_resamples(tmp_path, sine_48k):
    save_audio(sine_48k, tmp_path / "s48.wav")
    buf = load_for_analysis(tmp_path / "s48.wav")
    assert buf.sample_rate == 44100
    assert abs(len(buf) - 44100) <= 1
