"""Candidate selection by kurtosis, thresholding and peak picking."""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .audio_io import AudioBuffer, resample
from .config import PipelineConfig
from .factorization import truncated_svd
from .ica import IcaResult, fastica
from .spectrogram import frame_to_seconds, stft_magnitude

logger = logging.getLogger(__name__)


def kurtosis(v) -> float:
    """Raw (non-excess) kurtosis with population moments; 3 for a Gaussian."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 4:
        raise ValueError("kurtosis needs a 1-D sequence of at least 4 values")
    d = v - v.mean()
    m2 = np.mean(d * d)
    if m2 == 0.0 or m2 <= (np.finfo(float).eps * np.max(np.abs(v))) ** 2:
        raise ValueError("kurtosis is undefined for a constant sequence")
    return float(np.mean(d**4) / (m2 * m2))


@dataclass(frozen=True)
class CandidateActivation:
    values: np.ndarray  # rectified, >= 0
    kurtosis: float
    source_index: int
    rank: int  # 1 = highest kurtosis


@dataclass(frozen=True)
class Event:
    time: float
    frame: int
    score: float
    candidate_rank: int


@dataclass
class DetectionList:
    events: list[Event] = field(default_factory=list)
    threshold_used: float = 0.0
    a: float = 6.0
    candidate_rank: int = 1

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def times(self) -> np.ndarray:
        return np.array([e.time for e in self.events], dtype=np.float64)

    @property
    def frames(self) -> list[int]:
        return [e.frame for e in self.events]


def rectify(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def select_candidates(ica, n_keep: int = 3) -> list[CandidateActivation]:
    """Keep the ``n_keep`` most kurtotic activations, rectified.

    Ranking uses the kurtosis of the sign-normalised activations before
    rectification; ties go to the lower component index.
    """
    acts = ica.activations if isinstance(ica, IcaResult) else np.asarray(ica, dtype=np.float64)
    r = acts.shape[1]
    if n_keep > r:
        raise ValueError(f"asked for {n_keep} candidates but only {r} components exist")
    k = np.array([kurtosis(acts[:, j]) for j in range(r)])
    # stable sort on -k keeps ascending index among ties
    order = np.argsort(-k, kind="stable")[:n_keep]
    return [
        CandidateActivation(rectify(acts[:, j]), float(k[j]), int(j), rank)
        for rank, j in enumerate(order, start=1)
    ]


def local_maxima(x: np.ndarray) -> np.ndarray:
    """Indices greater than the left neighbour and not less than the right.

    On a plateau only the leftmost sample qualifies. Samples beyond the
    ends count as zero.
    """
    padded = np.concatenate(([0.0], x, [0.0]))
    mid = padded[1:-1]
    return np.flatnonzero((mid > padded[:-2]) & (mid >= padded[2:]))


def pick_peaks(
    c: CandidateActivation | np.ndarray,
    a: float = 6.0,
    min_separation: float = 0.5,
    frame_map: Callable | Sequence[float] | None = None,
    candidate_rank: int | None = None,
    eligible: np.ndarray | None = None,
) -> DetectionList:
    """Threshold a rectified activation at ``a`` standard deviations.

    Peaks are local maxima above ``a * std(c)``. Peaks closer than
    ``min_separation`` seconds are resolved in favour of the larger one.
    ``frame_map`` converts frame indices to seconds, either as a callable
    or a precomputed array of frame times. ``eligible`` optionally masks
    frames that may not host a peak; it does not affect the threshold.
    """
    if not 4 < a < 8:
        warnings.warn(f"threshold multiplier a={a} outside the usual range (4, 8)", stacklevel=2)
    if min_separation <= 0:
        raise ValueError("min_separation must be positive")
    if isinstance(c, CandidateActivation):
        values, rank = c.values, c.rank
    else:
        values, rank = np.asarray(c, dtype=np.float64), 1
    if candidate_rank is not None:
        rank = candidate_rank
    if frame_map is None:
        times = np.arange(values.shape[0], dtype=np.float64)
    elif callable(frame_map):
        times = np.asarray(frame_map(np.arange(values.shape[0])), dtype=np.float64)
    else:
        times = np.asarray(frame_map, dtype=np.float64)

    tau = a * float(values.std())
    out = DetectionList(threshold_used=tau, a=a, candidate_rank=rank)
    if tau <= 0.0:
        return out

    peaks = local_maxima(values)
    peaks = peaks[values[peaks] > tau]
    if eligible is not None:
        peaks = peaks[np.asarray(eligible, dtype=bool)[peaks]]
    # larger score first, earlier frame breaks ties
    order = peaks[np.lexsort((peaks, -values[peaks]))]
    kept: list[int] = []
    for p in order:
        if all(abs(times[p] - times[q]) >= min_separation for q in kept):
            kept.append(int(p))
    kept.sort()
    out.events = [Event(float(times[p]), p, float(values[p]), rank) for p in kept]
    return out


@dataclass
class DetectionResult:
    """Everything :func:`detect` produces for one recording."""

    detections: list[DetectionList]
    candidates: list[CandidateActivation]
    frame_times: np.ndarray
    eligible: np.ndarray | None
    kurtosis: list[float]  # every ICA component, index order
    singular_values: list[float]
    converged: bool
    iterations: int
    duration_s: float
    config: PipelineConfig

    def repick(self, a: float) -> list[DetectionList]:
        """Re-threshold the same candidates with a different multiplier."""
        return [
            pick_peaks(c, a, self.config.min_separation_s, self.frame_times, eligible=self.eligible)
            for c in self.candidates
        ]

    def diagnostics(self) -> dict:
        return {
            "duration_s": self.duration_s,
            "n_frames": int(self.frame_times.shape[0]),
            "singular_values": self.singular_values,
            "kurtosis": self.kurtosis,
            "candidates": [
                {
                    "candidate": c.rank,
                    "source_index": c.source_index,
                    "kurtosis": c.kurtosis,
                    "threshold": d.threshold_used,
                    "n_events": len(d),
                }
                for c, d in zip(self.candidates, self.detections)
            ],
            "ica_converged": self.converged,
            "ica_iterations": self.iterations,
            "config": self.config.to_dict(),
        }


def frame_rms(buf: AudioBuffer, params) -> np.ndarray:
    """RMS of the raw samples in each STFT frame."""
    n_frames = params.n_frames(len(buf))
    cs = np.concatenate(([0.0], np.cumsum(buf.samples**2)))
    starts = np.arange(n_frames) * params.hop_size
    energy = cs[starts + params.frame_size] - cs[starts]
    return np.sqrt(np.maximum(energy, 0.0) / params.frame_size)


def detect(buf: AudioBuffer, cfg: PipelineConfig | None = None) -> DetectionResult:
    """Run STFT, truncated SVD, FastICA, candidate selection and peak picking."""
    cfg = cfg or PipelineConfig()
    buf = resample(buf, cfg.sample_rate)
    spec = stft_magnitude(buf, cfg.stft)
    svd = truncated_svd(spec, cfg.rank)
    ica = fastica(svd, cfg.ica)
    candidates = select_candidates(ica, cfg.n_candidates)
    times = frame_to_seconds(np.arange(spec.n_frames), cfg.stft, buf.sample_rate)
    eligible = None
    if cfg.silence_floor_dbfs is not None:
        eligible = frame_rms(buf, cfg.stft) >= 10 ** (cfg.silence_floor_dbfs / 20)
    detections = [
        pick_peaks(c, cfg.threshold_a, cfg.min_separation_s, times, eligible=eligible)
        for c in candidates
    ]
    logger.info(
        "detect: %.1f s, %d frames, events per candidate %s",
        buf.duration,
        spec.n_frames,
        [len(d) for d in detections],
    )
    return DetectionResult(
        detections=detections,
        candidates=candidates,
        frame_times=times,
        eligible=eligible,
        kurtosis=[kurtosis(ica.activations[:, j]) for j in range(ica.rank)],
        singular_values=svd.S.tolist(),
        converged=ica.converged,
        iterations=ica.iterations_used,
        duration_s=buf.duration,
        config=cfg,
    )


# -- JSON Lines interchange --------------------------------------------------


def write_detections(path, detections: Sequence[DetectionList], header: dict) -> None:
    """Write a header object followed by one object per event."""
    lines = [json.dumps({"type": "header", **header}, sort_keys=True)]
    for det in detections:
        for e in det.events:
            lines.append(json.dumps(
                {"time_s": e.time, "score": e.score, "candidate": e.candidate_rank},
                sort_keys=True,
            ))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_detections(path) -> tuple[dict, dict[int, DetectionList]]:
    """Return ``(header, {candidate: DetectionList})``; the header may be empty."""
    header: dict = {}
    groups: dict[int, DetectionList] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            if obj.get("type") == "header":
                header = obj
                continue
            try:
                rank = int(obj["candidate"])
                ev = Event(float(obj["time_s"]), int(obj.get("frame", -1)), float(obj["score"]), rank)
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed event {obj!r}") from exc
            groups.setdefault(rank, DetectionList(candidate_rank=rank)).events.append(ev)
    for det in groups.values():
        det.events.sort(key=lambda e: e.time)
    return header, groups
