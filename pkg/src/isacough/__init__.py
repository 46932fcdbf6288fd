"""Cough-event detection in long recordings by independent subspace analysis."""

from .audio_io import AudioBuffer, load_audio, resample, save_audio
from .config import PipelineConfig, load_config
from .detection import DetectionList, detect, kurtosis, pick_peaks, select_candidates
from .evaluation import AnnotationList, load_annotations, match, overlap_ratio
from .factorization import SvdResult, reconstruct, truncated_svd
from .ica import IcaOptions, IcaResult, fastica, whiten_activations
from .spectrogram import MagnitudeSpectrogram, StftParams, frame_to_seconds, stft_magnitude
from .summarizer import SummaryManifest, summarize
from .synthesis import SceneSpec, synth_burst, synthesize_scene

__version__ = "0.1.0"
