"""Concatenate fixed-length clips around detected events into a summary."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import AudioBuffer

FADE_S = 0.005


@dataclass(frozen=True)
class ManifestEntry:
    summary_offset_s: float
    original_time_s: float
    candidate_rank: int
    score: float


@dataclass
class SummaryManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    clip_length_s: float = 1.0
    source_path: str | None = None

    @property
    def total_duration_s(self) -> float:
        return self.clip_length_s * len(self.entries)

    def to_dict(self) -> dict:
        return {
            "source": self.source_path,
            "clip_length_s": self.clip_length_s,
            "total_duration_s": self.total_duration_s,
            "entries": [e.__dict__ for e in self.entries],
        }

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


def _fade(n_clip: int, n_fade: int) -> np.ndarray:
    env = np.ones(n_clip)
    n_fade = min(n_fade, n_clip // 2)
    if n_fade > 0:
        ramp = np.arange(n_fade) / n_fade
        env[:n_fade] = ramp
        env[n_clip - n_fade :] = ramp[::-1]
    return env


def extract_clip(buf: AudioBuffer, center_s: float, clip_length_s: float) -> np.ndarray:
    """Samples of [center - L/2, center + L/2), zero-padded past the edges."""
    sr = buf.sample_rate
    n_clip = int(round(clip_length_s * sr))
    start = int(round((center_s - clip_length_s / 2) * sr))
    clip = np.zeros(n_clip)
    lo, hi = max(start, 0), min(start + n_clip, len(buf))
    if hi > lo:
        clip[lo - start : hi - start] = buf.samples[lo:hi]
    return clip


def summarize(buf: AudioBuffer, det, clip_length: float = 1.0, source_path=None):
    """Build the summary audio and manifest for one detection list.

    Each event contributes one clip centred on its time, with short
    linear fades at both ends. Clips are concatenated in time order.
    Returns ``(AudioBuffer, SummaryManifest)``.
    """
    if clip_length <= 0:
        raise ValueError("clip_length must be positive")
    events = sorted(det, key=lambda e: e.time)
    sr = buf.sample_rate
    env = _fade(int(round(clip_length * sr)), int(round(FADE_S * sr)))
    clips = []
    manifest = SummaryManifest(
        clip_length_s=clip_length, source_path=None if source_path is None else str(source_path)
    )
    for i, ev in enumerate(events):
        clips.append(extract_clip(buf, ev.time, clip_length) * env)
        manifest.entries.append(ManifestEntry(i * clip_length, ev.time, ev.candidate_rank, ev.score))
    samples = np.concatenate(clips) if clips else np.zeros(0)
    return AudioBuffer(samples, sr), manifest
