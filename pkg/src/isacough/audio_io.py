"""WAV loading/saving and the mono :class:`AudioBuffer` carrier."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

ANALYSIS_RATE = 44100


class AudioError(ValueError):
    """Raised for unreadable, unsupported or degenerate audio."""


class ClippingWarning(UserWarning):
    pass


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioError(f"expected mono samples, got shape {samples.shape}")
        if int(self.sample_rate) <= 0:
            raise AudioError(f"sample rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise AudioError("samples contain NaN or infinity")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def scaled(self, gain: float) -> "AudioBuffer":
        return AudioBuffer(self.samples * gain, self.sample_rate)


def to_mono(data: np.ndarray) -> np.ndarray:
    if data.ndim == 1:
        return data
    return data.mean(axis=1)


def load_audio(path) -> AudioBuffer:
    """Read a PCM16 or float32 WAV file as a mono buffer in [-1, 1].

    Multichannel files are averaged across channels. The file's sample
    rate is kept; use :func:`resample` or :func:`load_for_analysis` to
    bring it to the analysis rate.
    """
    path = Path(path)
    if not path.is_file():
        raise AudioError(f"no such file: {path}")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except (ValueError, OSError, EOFError) as exc:
        raise AudioError(f"cannot read {path}: {exc}") from exc

    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        data = data.astype(np.float64)
        if not np.all(np.isfinite(data)):
            raise AudioError(f"{path} contains non-finite samples")
        data = np.clip(data, -1.0, 1.0)
    else:
        raise AudioError(f"unsupported WAV encoding {data.dtype} in {path}")

    if data.shape[0] == 0:
        raise AudioError(f"{path} contains no audio")
    return AudioBuffer(to_mono(data), rate)


def resample(buf: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited polyphase resampling to ``target_rate``."""
    if target_rate <= 0:
        raise AudioError(f"target rate must be positive, got {target_rate}")
    if target_rate == buf.sample_rate:
        return buf
    ratio = Fraction(int(target_rate), buf.sample_rate)
    out = resample_poly(buf.samples, ratio.numerator, ratio.denominator)
    # keep duration within one output sample of the input
    n_out = math.ceil(len(buf) * ratio)
    return AudioBuffer(out[:n_out], target_rate)


def load_for_analysis(path, rate: int = ANALYSIS_RATE) -> AudioBuffer:
    return resample(load_audio(path), rate)


def save_audio(buf: AudioBuffer, path) -> None:
    """Write ``buf`` as 16-bit PCM, clamping anything outside [-1, 1]."""
    if len(buf) == 0:
        raise AudioError("refusing to write an empty buffer")
    samples = buf.samples
    n_over = int(np.count_nonzero(np.abs(samples) > 1.0))
    if n_over:
        warnings.warn(
            f"{n_over} samples outside [-1, 1] clamped while writing {path}",
            ClippingWarning,
            stacklevel=2,
        )
        samples = np.clip(samples, -1.0, 1.0)
    pcm = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(path, buf.sample_rate, pcm)
