"""Annotated test-scene synthesis.

A scene is a background bed with cough clips and foreground distractor
clips added at random, non-overlapping positions. Every clip is scaled
so its RMS over its own span sits at a requested SNR relative to the
background over that same span. When no clip libraries are supplied,
synthetic surrogates are generated instead (:func:`synth_burst` for
coughs, knocks and voiced bursts for distractors) so that scenes can be
produced without any external data.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from scipy import signal

from .audio_io import ANALYSIS_RATE, AudioBuffer, load_audio, resample, save_audio
from .config import read_config_file
from .evaluation import Annotation, AnnotationList, write_annotations

logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 10_000
CROSSFADE_S = 0.05


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class SceneSpec:
    duration_s: float = 600.0
    n_coughs: int = 20
    n_foreground: int = 10
    cough_clip_dir: str | None = None
    foreground_clip_dir: str | None = None
    background_path: str | None = None
    cough_snr_db: float = 0.0
    foreground_snr_db: float = 0.0
    min_event_gap_s: float = 2.0
    rng_seed: int = 0
    sample_rate: int = ANALYSIS_RATE
    background_rms: float = 0.05
    use_synth_bursts: bool = False

    def __post_init__(self):
        if self.duration_s <= 0:
            raise SceneError("duration_s must be positive")
        if self.n_coughs < 0 or self.n_foreground < 0:
            raise SceneError("event counts must be non-negative")
        if self.min_event_gap_s < 0:
            raise SceneError("min_event_gap_s must be non-negative")
        if self.sample_rate <= 0:
            raise SceneError("sample_rate must be positive")
        if self.background_rms <= 0:
            raise SceneError("background_rms must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        data = dict(data.get("scene", data))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SceneError(f"unknown scene keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "SceneSpec":
        return cls.from_dict(read_config_file(path))

    def to_dict(self) -> dict:
        return asdict(self)


# -- synthetic sources -------------------------------------------------------


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def synth_burst(duration_s: float = 0.4, sample_rate: int = ANALYSIS_RATE, seed=0,
                voiced: bool = True) -> AudioBuffer:
    """Cough-like surrogate: explosive burst, decaying noise, voiced tail.

    The first 60 ms are white noise behind a 2 ms attack. After that a
    band-passed noise tail decays exponentially, optionally joined by a
    low harmonic "voiced" tail. The result is peak-normalised.
    """
    if not 0.2 <= duration_s <= 1.0:
        raise ValueError("burst duration must lie in [0.2, 1.0] s")
    rng = _rng(seed)
    sr = sample_rate
    n = int(round(duration_s * sr))
    t = np.arange(n) / sr

    n_exp = int(round(0.060 * sr))
    n_att = int(round(0.002 * sr))
    env = np.zeros(n)
    env[:n_exp] = np.linspace(1.0, 0.7, n_exp)
    env[:n_att] *= np.arange(n_att) / n_att
    out = env * rng.standard_normal(n)

    tail_t = t[n_exp:] - t[n_exp]
    b, a = signal.butter(2, [400.0, min(4000.0, 0.45 * sr)], btype="bandpass", fs=sr)
    tail = signal.lfilter(b, a, rng.standard_normal(n))[n_exp:]
    tail /= np.std(tail) or 1.0
    out[n_exp:] += 0.45 * np.exp(-tail_t / 0.05) * tail

    if voiced:
        f0 = 170.0 + 10.0 * rng.standard_normal()
        start = int(round(0.08 * sr))
        vt = t[start:] - t[start]
        phase = 2 * np.pi * f0 * vt
        harmonics = sum(np.sin(k * phase) / k for k in range(1, 6))
        rise = 1.0 - np.exp(-vt / 0.01)
        out[start:] += 0.12 * rise * np.exp(-vt / 0.08) * harmonics

    out /= np.max(np.abs(out))
    return AudioBuffer(out, sr)


def synth_knock(sample_rate: int = ANALYSIS_RATE, seed=0) -> AudioBuffer:
    """Two or three door knocks: short clicks driving damped low resonances."""
    rng = _rng(seed)
    sr = sample_rate
    n_knocks = int(rng.integers(2, 4))
    spacing = rng.uniform(0.12, 0.2)
    n = int(round((spacing * n_knocks + 0.15) * sr))
    t = np.arange(n) / sr
    modes = np.array([110.0, 235.0, 470.0]) * rng.uniform(0.9, 1.1)
    out = np.zeros(n)
    for i in range(n_knocks):
        t0 = i * spacing
        tt = t - t0
        on = tt >= 0
        ring = sum(np.sin(2 * np.pi * f * tt[on]) / (j + 1) for j, f in enumerate(modes))
        out[on] += np.exp(-tt[on] / 0.03) * ring
    out /= np.max(np.abs(out))
    return AudioBuffer(out, sr)


def synth_voice(sample_rate: int = ANALYSIS_RATE, seed=0) -> AudioBuffer:
    """Voiced, speech-like harmonic burst with vibrato and syllable envelope."""
    rng = _rng(seed)
    sr = sample_rate
    dur = rng.uniform(0.6, 1.0)
    n = int(round(dur * sr))
    t = np.arange(n) / sr
    f0 = rng.uniform(110.0, 220.0) * (1 + 0.03 * np.sin(2 * np.pi * 5.0 * t))
    phase = 2 * np.pi * np.cumsum(f0) / sr
    harmonics = sum(np.sin(k * phase) / k for k in range(1, 12))
    syllables = 0.5 * (1 - np.cos(2 * np.pi * rng.uniform(2.5, 4.0) * t))
    env = np.sin(np.pi * t / dur) * (0.3 + 0.7 * syllables)
    out = env * harmonics
    out /= np.max(np.abs(out))
    return AudioBuffer(out, sr)


def pink_noise(n_samples: int, sample_rate: int = ANALYSIS_RATE, seed=0,
               rms: float = 0.05) -> AudioBuffer:
    """1/f noise by spectral shaping of white noise, scaled to ``rms``."""
    rng = _rng(seed)
    spec = np.fft.rfft(rng.standard_normal(n_samples))
    f = np.fft.rfftfreq(n_samples, 1.0 / sample_rate)
    scale = np.zeros_like(f)
    scale[1:] = 1.0 / np.sqrt(f[1:])
    x = np.fft.irfft(spec * scale, n=n_samples)
    x *= rms / np.sqrt(np.mean(x * x))
    return AudioBuffer(x, sample_rate)


# -- clip libraries ----------------------------------------------------------


def _load_dir(path: Path, sr: int) -> list[np.ndarray]:
    return [resample(load_audio(p), sr).samples for p in sorted(path.glob("*.wav"))]


def load_clip_library(path, sample_rate: int, label: str | None = None):
    """Return ``[(label, samples), ...]`` for every WAV under ``path``.

    WAVs directly inside ``path`` take ``label`` (default: the directory
    name); WAVs in a subdirectory take the subdirectory's name.
    """
    path = Path(path)
    if not path.is_dir():
        raise SceneError(f"clip directory {path} does not exist")
    clips = [(label or path.name, c) for c in _load_dir(path, sample_rate)]
    for sub in sorted(p for p in path.iterdir() if p.is_dir()):
        clips += [(sub.name, c) for c in _load_dir(sub, sample_rate)]
    if not clips:
        raise SceneError(f"clip directory {path} contains no WAV files")
    return clips


def loop_to_length(x: np.ndarray, n: int, sample_rate: int) -> np.ndarray:
    """Repeat ``x`` with linear crossfades until it is ``n`` samples long."""
    if x.shape[0] >= n:
        return x[:n].copy()
    n_fade = min(int(round(CROSSFADE_S * sample_rate)), x.shape[0] // 2)
    fade_in = np.linspace(0.0, 1.0, n_fade, endpoint=False)
    out = x.copy()
    while out.shape[0] < n:
        if n_fade:
            head = out[-n_fade:] * (1.0 - fade_in) + x[:n_fade] * fade_in
            out = np.concatenate((out[:-n_fade], head, x[n_fade:]))
        else:
            out = np.concatenate((out, x))
    return out[:n]


# -- scene assembly ----------------------------------------------------------


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x))) if x.size else 0.0


def _place(lengths: list[int], total: int, gap: int, rng: np.random.Generator) -> list[int]:
    placed: list[tuple[int, int]] = []
    onsets = []
    for n in lengths:
        if n > total:
            raise SceneError("a clip is longer than the scene")
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            s = int(rng.integers(0, total - n + 1))
            if all(s >= e + gap or s + n + gap <= b for b, e in placed):
                break
        else:
            raise SceneError(
                f"could not place event {len(onsets) + 1} without overlap after "
                f"{MAX_PLACEMENT_ATTEMPTS} attempts"
            )
        placed.append((s, s + n))
        onsets.append(s)
    return onsets


def _cough_clips(spec: SceneSpec, rng: np.random.Generator):
    sr = spec.sample_rate
    if spec.cough_clip_dir is not None and not spec.use_synth_bursts:
        library = load_clip_library(spec.cough_clip_dir, sr, label="cough")
        picks = rng.integers(0, len(library), spec.n_coughs)
        return [("cough", library[i][1]) for i in picks]
    seeds = rng.integers(0, 2**32, spec.n_coughs)
    durs = rng.uniform(0.3, 0.6, spec.n_coughs)
    return [("cough", synth_burst(d, sr, int(s)).samples) for d, s in zip(durs, seeds)]


def _foreground_clips(spec: SceneSpec, rng: np.random.Generator):
    sr = spec.sample_rate
    if spec.foreground_clip_dir is not None and not spec.use_synth_bursts:
        library = load_clip_library(spec.foreground_clip_dir, sr)
        picks = rng.integers(0, len(library), spec.n_foreground)
        return [library[i] for i in picks]
    out = []
    for s in rng.integers(0, 2**32, spec.n_foreground):
        if s % 2:
            out.append(("knock", synth_knock(sr, int(s)).samples))
        else:
            out.append(("speech", synth_voice(sr, int(s)).samples))
    return out


def _background(spec: SceneSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    sr = spec.sample_rate
    if spec.background_path is not None and not spec.use_synth_bursts:
        bed = resample(load_audio(spec.background_path), sr).samples
        return loop_to_length(bed, n, sr)
    return pink_noise(n, sr, rng, spec.background_rms).samples


def synthesize_scene(spec: SceneSpec):
    """Build one annotated scene; fully determined by ``spec.rng_seed``.

    Returns ``(AudioBuffer, AnnotationList)``.
    """
    sr = spec.sample_rate
    n_total = int(round(spec.duration_s * sr))
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(spec.rng_seed).spawn(4)]
    bg_rng, cough_rng, fg_rng, place_rng = streams

    events = [(lab, clip, spec.cough_snr_db) for lab, clip in _cough_clips(spec, cough_rng)]
    events += [(lab, clip, spec.foreground_snr_db) for lab, clip in _foreground_clips(spec, fg_rng)]
    if events:
        longest = max(c.shape[0] for _, c, _ in events) / sr
        if len(events) * (longest + spec.min_event_gap_s) > spec.duration_s:
            raise SceneError(
                f"{len(events)} events of up to {longest:.2f} s with {spec.min_event_gap_s} s gaps "
                f"do not fit in {spec.duration_s} s"
            )

    background = _background(spec, n_total, bg_rng)
    global_rms = _rms(background)
    onsets = _place([c.shape[0] for _, c, _ in events], n_total,
                    int(round(spec.min_event_gap_s * sr)), place_rng)

    scene = background.copy()
    items = []
    for (label, clip, snr_db), start in zip(events, onsets):
        stop = start + clip.shape[0]
        ref = _rms(background[start:stop]) or global_rms
        if ref == 0.0 or _rms(clip) == 0.0:
            raise SceneError("cannot set an SNR against a silent background or clip")
        gain = ref * 10 ** (snr_db / 20) / _rms(clip)
        scene[start:stop] += gain * clip
        items.append(Annotation(start / sr, stop / sr, label))

    logger.info("synthesized %.0f s scene with %d events", spec.duration_s, len(items))
    return AudioBuffer(scene, sr), AnnotationList(items, n_total / sr)


def write_scene(spec: SceneSpec, out_dir, name: str = "scene"):
    """Synthesize and write ``<name>.wav``, ``<name>.csv`` and ``<name>.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    buf, ann = synthesize_scene(spec)
    paths = out_dir / f"{name}.wav", out_dir / f"{name}.csv", out_dir / f"{name}.json"
    save_audio(buf, paths[0])
    write_annotations(ann, paths[1])
    paths[2].write_text(json.dumps({"scene": spec.to_dict()}, indent=2), encoding="utf-8")
    return paths
