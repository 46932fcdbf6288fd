"""Event-level scoring of detections against annotated intervals."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

TARGET_LABEL = "cough"


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class Annotation:
    onset_s: float
    offset_s: float
    label: str = TARGET_LABEL


@dataclass
class AnnotationList:
    items: list[Annotation] = field(default_factory=list)
    signal_duration_s: float | None = None

    def __post_init__(self):
        self.items = sorted(self.items, key=lambda a: (a.onset_s, a.offset_s))
        for a in self.items:
            if not 0 <= a.onset_s < a.offset_s:
                raise AnnotationError(f"invalid interval [{a.onset_s}, {a.offset_s}]")
            if self.signal_duration_s is not None and a.offset_s > self.signal_duration_s + 1e-9:
                raise AnnotationError(
                    f"annotation [{a.onset_s}, {a.offset_s}] exceeds signal duration "
                    f"{self.signal_duration_s}"
                )

    def __len__(self) -> int:
        return len(self.items)

    def with_label(self, label: str = TARGET_LABEL) -> list[Annotation]:
        return [a for a in self.items if a.label == label]

    def shifted(self, dt: float) -> "AnnotationList":
        dur = None if self.signal_duration_s is None else self.signal_duration_s + dt
        return AnnotationList(
            [Annotation(a.onset_s + dt, a.offset_s + dt, a.label) for a in self.items], dur
        )


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_annotations(path, signal_duration_s: float | None = None) -> AnnotationList:
    """Read ``onset_s,offset_s,label`` rows; a header row is optional."""
    items = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if lineno == 1 and not _is_number(row[0]):
                continue
            if len(row) < 2 or not (_is_number(row[0]) and _is_number(row[1])):
                raise AnnotationError(f"{path}:{lineno}: malformed row {row!r}")
            onset, offset = float(row[0]), float(row[1])
            label = row[2].strip() if len(row) > 2 else TARGET_LABEL
            if offset <= onset:
                raise AnnotationError(f"{path}:{lineno}: offset {offset} <= onset {onset}")
            items.append(Annotation(onset, offset, label))
    return AnnotationList(items, signal_duration_s)


def write_annotations(annotations: AnnotationList, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["onset_s", "offset_s", "label"])
        for a in annotations.items:
            w.writerow([repr(a.onset_s), repr(a.offset_s), a.label])


def overlap_ratio(detection_time: float, annotation, ref_window: float = 0.5,
                  det_window: float | None = None) -> float:
    """Overlap of a detection window with an annotation, over ``ref_window``.

    The detection occupies ``det_window`` seconds (``ref_window`` by
    default) centred on ``detection_time``.
    """
    if ref_window <= 0:
        raise ValueError("ref_window must be positive")
    half = (ref_window if det_window is None else det_window) / 2
    if isinstance(annotation, Annotation):
        onset, offset = annotation.onset_s, annotation.offset_s
    else:
        onset, offset = annotation
    t_o = min(detection_time + half, offset) - max(detection_time - half, onset)
    return max(t_o, 0.0) / ref_window


@dataclass
class EvalReport:
    n_tp: int
    n_fp: int
    n_fn: int
    n_annotations: int
    n_detections: int
    duration_s: float
    matched_pairs: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def r_tp(self) -> float:
        return self.n_tp / self.n_annotations if self.n_annotations else math.nan

    @property
    def r_fp_per_min(self) -> float:
        return self.n_fp / (self.duration_s / 60.0)

    def summary_minutes(self, clip_length_s: float = 1.0) -> float:
        return self.n_detections * clip_length_s / 60.0

    def to_dict(self, clip_length_s: float = 1.0) -> dict:
        r_tp = self.r_tp
        return {
            "n_tp": self.n_tp,
            "n_fp": self.n_fp,
            "n_fn": self.n_fn,
            "n_annotations": self.n_annotations,
            "n_detections": self.n_detections,
            "duration_s": self.duration_s,
            "r_tp": None if math.isnan(r_tp) else r_tp,
            "r_fp_per_min": self.r_fp_per_min,
            "summary_min": self.summary_minutes(clip_length_s),
            "matched_pairs": [list(p) for p in self.matched_pairs],
        }


def _detection_times(detections) -> list[float]:
    out = []
    for d in detections:
        out.append(float(d.time) if hasattr(d, "time") else float(d))
    return out


def match(
    detections: Iterable,
    annotations: AnnotationList,
    rho_dtc: float = 0.3,
    ref_window: float = 0.5,
    duration_s: float | None = None,
    label: str = TARGET_LABEL,
    det_window: float | None = None,
) -> EvalReport:
    """Greedy one-to-one matching of detections to ``label`` annotations.

    Detections are visited in time order. Each takes the still-unmatched
    annotation it overlaps most (lowest index on ties) and is a true
    positive when that overlap ratio exceeds ``rho_dtc``; otherwise it is
    a false positive and the annotation stays available. Detection
    indices in ``matched_pairs`` refer to the time-sorted order.
    """
    if not 0 < rho_dtc <= 1:
        raise ValueError("rho_dtc must satisfy 0 < rho_dtc <= 1")
    duration_s = annotations.signal_duration_s if duration_s is None else duration_s
    if duration_s is None or duration_s <= 0:
        raise ValueError("a positive signal duration is required for the false-positive rate")
    targets = annotations.with_label(label)
    if any(a.offset_s > duration_s + 1e-9 for a in annotations.items):
        raise AnnotationError("annotations extend past the signal duration")

    times = sorted(_detection_times(detections))
    free = set(range(len(targets)))
    pairs = []
    n_fp = 0
    for i, t in enumerate(times):
        best_j, best = -1, -1.0
        for j in sorted(free):
            ratio = overlap_ratio(t, targets[j], ref_window, det_window)
            if ratio > best:
                best_j, best = j, ratio
        if best_j >= 0 and best > rho_dtc:
            free.discard(best_j)
            pairs.append((i, best_j, best))
        else:
            n_fp += 1
    n_tp = len(pairs)
    return EvalReport(
        n_tp=n_tp,
        n_fp=n_fp,
        n_fn=len(targets) - n_tp,
        n_annotations=len(targets),
        n_detections=len(times),
        duration_s=duration_s,
        matched_pairs=pairs,
    )
