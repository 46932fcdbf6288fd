"""Pipeline configuration: defaults, TOML/JSON loading and validation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .ica import IcaOptions
from .spectrogram import StftParams

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass(frozen=True)
class PipelineConfig:
    stft: StftParams = field(default_factory=StftParams)
    rank: int = 9
    ica: IcaOptions = field(default_factory=IcaOptions)
    n_candidates: int = 3
    threshold_a: float = 6.0
    min_separation_s: float = 0.5
    clip_length_s: float = 1.0
    rho_dtc: float = 0.3
    ref_window_s: float = 0.5
    sample_rate: int = 44100
    # frames quieter than this (RMS, dB re full scale) never host a peak; None disables
    silence_floor_dbfs: float | None = -80.0

    def __post_init__(self):
        if self.rank < 2:
            raise ValueError("rank must be >= 2 (ICA needs two components)")
        if not 1 <= self.n_candidates <= self.rank:
            raise ValueError("n_candidates must lie in [1, rank]")
        if self.threshold_a <= 0:
            raise ValueError("threshold_a must be positive")
        if self.min_separation_s <= 0:
            raise ValueError("min_separation_s must be positive")
        if self.clip_length_s <= 0:
            raise ValueError("clip_length_s must be positive")
        if not 0 < self.rho_dtc <= 1:
            raise ValueError("rho_dtc must satisfy 0 < rho_dtc <= 1")
        if self.ref_window_s <= 0:
            raise ValueError("ref_window_s must be positive")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "stft" in data:
            data["stft"] = StftParams(**data["stft"])
        if "ica" in data:
            data["ica"] = IcaOptions(**data["ica"])
        return cls(**data)

    def updated(self, **changes) -> "PipelineConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self


def read_config_file(path) -> dict:
    """Parse a TOML or JSON file into a plain dict."""
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    return tomllib.loads(text.decode("utf-8"))


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    data = read_config_file(path)
    # allow either a bare table or a [pipeline] section
    data = data.get("pipeline", data)
    return PipelineConfig.from_dict(data)
