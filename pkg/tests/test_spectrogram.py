import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isacough.audio_io import AudioBuffer
from isacough.spectrogram import (
    StftParams,
    frame_to_seconds,
    hann,
    stft_magnitude,
)


def dft_oracle(x, params):
    """Direct O(N^2) evaluation of |sum_n w(n) x(n + mH) e^{-j 2 pi n k / N}|."""
    N, H = params.frame_size, params.hop_size
    w = params.window_values()
    n = np.arange(N)
    k = np.arange(N // 2 + 1)
    basis = np.exp(-2j * np.pi * np.outer(k, n) / N)
    M = (len(x) - N) // H + 1
    return np.stack([np.abs(basis @ (w * x[m * H : m * H + N])) for m in range(M)], axis=1)


def test_params_validation():
    with pytest.raises(ValueError):
        StftParams(frame_size=1000)
    with pytest.raises(ValueError):
        StftParams(hop_size=0)
    with pytest.raises(ValueError):
        StftParams(hop_size=4096)
    with pytest.raises(ValueError):
        StftParams(window="kaiser")


def test_silence_frame_count():
    spec = stft_magnitude(AudioBuffer(np.zeros(44100), 44100))
    assert spec.values.shape == (1025, 83)
    assert not spec.values.any()


def test_impulse_single_frame():
    x = np.zeros(2048)
    x[1024] = 1.0
    spec = stft_magnitude(AudioBuffer(x, 44100))
    assert spec.values.shape == (1025, 1)
    np.testing.assert_allclose(spec.values[:, 0], 1.0, atol=1e-12)


def test_bin_exact_sine():
    sr = 44100
    f = 20 * sr / 2048
    x = np.sin(2 * np.pi * f * np.arange(3 * 2048) / sr)
    params = StftParams()
    spec = stft_magnitude(AudioBuffer(x, sr), params)
    peak_rows = spec.values.argmax(axis=0)
    assert np.all(peak_rows == 20)
    # analytic peak: full-scale bin-exact sine through a periodic Hann -> N/4
    np.testing.assert_allclose(spec.values[20], 2048 / 4, rtol=1e-6)
    off = np.delete(spec.values, [19, 20, 21], axis=0)
    assert off.max() < 1e-8 * spec.values[20].max()
    np.testing.assert_allclose(spec.values, dft_oracle(x, params), atol=1e-9)


def test_symmetric_window_option_matches_oracle(rng):
    params = StftParams(window="hann_symmetric")
    x = rng.standard_normal(2048 + 2 * 512)
    np.testing.assert_allclose(
        stft_magnitude(AudioBuffer(x, 44100), params).values, dft_oracle(x, params), atol=1e-9
    )
    w = hann(2048, symmetric=True)
    assert w[0] == 0.0 and w[-1] == pytest.approx(0.0, abs=1e-15)


def test_trailing_samples_dropped():
    spec = stft_magnitude(AudioBuffer(np.ones(2048 + 511), 44100))
    assert spec.n_frames == 1


def test_too_short_raises():
    with pytest.raises(ValueError):
        stft_magnitude(AudioBuffer(np.zeros(2047), 44100))


def test_frame_to_seconds():
    p = StftParams()
    assert frame_to_seconds(0, p, 44100) == pytest.approx(1024 / 44100)
    assert frame_to_seconds(86, p, 44100) == pytest.approx((86 * 512 + 1024) / 44100)
    assert frame_to_seconds(86, p, 44100) == pytest.approx(1.0217, abs=1e-4)
    p2 = StftParams(frame_size=1024, hop_size=1024)
    assert frame_to_seconds(0, p2, 8000) == 512 / 8000
    np.testing.assert_allclose(frame_to_seconds(np.arange(3), p, 44100),
                               (np.arange(3) * 512 + 1024) / 44100)
    with pytest.raises(ValueError):
        frame_to_seconds(-1, p, 44100)


def test_spectrogram_times():
    spec = stft_magnitude(AudioBuffer(np.zeros(44100), 44100))
    assert spec.times[0] == pytest.approx(1024 / 44100)
    assert spec.times.shape == (83,)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(min_value=1e-3, max_value=1e3), seed=st.integers(0, 2**16))
def test_linearity(alpha, seed):
    x = np.random.default_rng(seed).uniform(-0.5, 0.5, 4096)
    a = stft_magnitude(AudioBuffer(x, 44100)).values
    b = stft_magnitude(AudioBuffer(alpha * x, 44100)).values
    np.testing.assert_allclose(b, alpha * a, rtol=1e-9, atol=1e-12 * alpha)


def test_nonnegative_and_finite(rng):
    spec = stft_magnitude(AudioBuffer(rng.uniform(-1, 1, 20000), 44100))
    assert np.all(spec.values >= 0) and np.all(np.isfinite(spec.values))
    assert spec.values.shape[0] == spec.params.frame_size // 2 + 1
