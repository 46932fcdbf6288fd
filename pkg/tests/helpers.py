"""Shared test signal builders."""

import numpy as np
from scipy.stats import ortho_group

from isacough.audio_io import AudioBuffer
from isacough.synthesis import pink_noise, synth_burst


def laplacian_spikes(rng, n, p=0.05):
    return (rng.random(n) < p) * rng.laplace(size=n)


def mixed_sources(seed, n=5000):
    rng = np.random.default_rng(seed)
    S = np.stack([laplacian_spikes(rng, n), laplacian_spikes(rng, n)], axis=1)
    A = ortho_group.rvs(2, random_state=rng)
    return S, S @ A.T


def best_abs_correlations(est, src):
    """For each source, |corr| with the best-matching estimate (permutation search)."""
    c = np.abs(np.corrcoef(est.T, src.T)[: est.shape[1], est.shape[1] :])
    k = c.shape[0]
    if k == 2:
        straight = min(c[0, 0], c[1, 1])
        crossed = min(c[0, 1], c[1, 0])
        return max(straight, crossed)
    raise NotImplementedError


def burst_scene(seed=0, duration=60.0, n_bursts=10, snr_db=10.0, sr=44100, burst_len=0.4):
    """Pink noise with equally spaced synthetic bursts; returns (buffer, onsets_s)."""
    rng = np.random.default_rng(seed)
    n = int(duration * sr)
    bed = pink_noise(n, sr, rng, 0.05).samples
    x = bed.copy()
    spacing = duration / n_bursts
    onsets = []
    for i in range(n_bursts):
        onset = i * spacing + rng.uniform(0.5, spacing - burst_len - 0.5)
        s = int(onset * sr)
        b = synth_burst(burst_len, sr, int(rng.integers(1 << 30))).samples
        seg = bed[s : s + b.size]
        gain = np.sqrt(np.mean(seg**2)) * 10 ** (snr_db / 20) / np.sqrt(np.mean(b**2))
        x[s : s + b.size] += gain * b
        onsets.append(s / sr)
    return AudioBuffer(x, sr), np.array(onsets)
