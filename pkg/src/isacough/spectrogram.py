"""Magnitude STFT of a mono buffer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft

from .audio_io import AudioBuffer

# frames per rfft batch; bounds peak memory on long recordings
_CHUNK_FRAMES = 4096


def hann(n: int, symmetric: bool = False) -> np.ndarray:
    """Hann window. The periodic (DFT-even) form is the default."""
    denom = n - 1 if symmetric else n
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / denom))


WINDOWS = {
    "hann": lambda n: hann(n, symmetric=False),
    "hann_symmetric": lambda n: hann(n, symmetric=True),
    "rectangular": np.ones,
}


@dataclass(frozen=True)
class StftParams:
    frame_size: int = 2048
    hop_size: int = 512
    window: str = "hann"

    def __post_init__(self):
        n, h = self.frame_size, self.hop_size
        if n <= 0 or n & (n - 1):
            raise ValueError(f"frame_size must be a positive power of two, got {n}")
        if not 0 < h <= n:
            raise ValueError(f"hop_size must satisfy 0 < hop <= frame_size, got {h}")
        if self.window not in WINDOWS:
            raise ValueError(f"unknown window {self.window!r}; choose from {sorted(WINDOWS)}")

    @property
    def n_bins(self) -> int:
        return self.frame_size // 2 + 1

    def window_values(self) -> np.ndarray:
        return WINDOWS[self.window](self.frame_size)

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.frame_size:
            return 0
        return (n_samples - self.frame_size) // self.hop_size + 1


@dataclass(frozen=True)
class MagnitudeSpectrogram:
    """``values`` is [bins x frames]; column m is centred at ``times[m]``."""

    values: np.ndarray
    params: StftParams = field(default_factory=StftParams)
    sample_rate: int = 44100

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return frame_to_seconds(np.arange(self.n_frames), self.params, self.sample_rate)


def frame_to_seconds(m, params: StftParams, sample_rate: int):
    """Centre time of frame ``m`` in seconds (works on arrays too)."""
    if np.any(np.asarray(m) < 0):
        raise ValueError("frame index must be non-negative")
    if np.ndim(m):
        m = np.asarray(m)
    return (m * params.hop_size + params.frame_size / 2) / sample_rate


def stft_magnitude(buf: AudioBuffer, params: StftParams | None = None) -> MagnitudeSpectrogram:
    """|X(k, m)| for k = 0..N/2 over every full frame of ``buf``.

    Trailing samples that do not fill a whole frame are dropped.
    """
    params = params or StftParams()
    n_frames = params.n_frames(len(buf))
    if n_frames == 0:
        raise ValueError(
            f"buffer of {len(buf)} samples is shorter than one frame ({params.frame_size})"
        )
    frames = sliding_window_view(buf.samples, params.frame_size)[:: params.hop_size][:n_frames]
    win = params.window_values()
    out = np.empty((params.n_bins, n_frames), dtype=np.float64)
    for start in range(0, n_frames, _CHUNK_FRAMES):
        block = frames[start : start + _CHUNK_FRAMES] * win
        out[:, start : start + block.shape[0]] = np.abs(fft.rfft(block, axis=1)).T
    return MagnitudeSpectrogram(out, params, buf.sample_rate)
