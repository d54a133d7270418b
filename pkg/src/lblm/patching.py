"""Patch tokenization, Fourier targets and reversible instance normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_PATCH_LEN = 25
DEFAULT_STRIDE = 6
REVIN_EPS = 1e-5


def num_patches(length: int, patch_len: int, stride: int) -> int:
    if length < patch_len:
        raise ValueError(f"series of length {length} shorter than patch length {patch_len}")
    return (length - patch_len) // stride + 1


@dataclass
class PatchSequence:
    """Overlapping patches of one channel: patches[i] = x[i*stride : i*stride + patch_len]."""

    patches: np.ndarray  # (N, P)
    start_indices: np.ndarray  # (N,) int
    patch_len: int
    stride: int


def patchify(x: np.ndarray, patch_len: int = DEFAULT_PATCH_LEN,
             stride: int = DEFAULT_STRIDE) -> PatchSequence:
    """Slice a 1-D series into overlapping patches; trailing samples past the
    last full patch are dropped."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError(f"patchify expects a 1-D series, got shape {x.shape}")
    if patch_len < 1 or stride < 1:
        raise ValueError("patch_len and stride must be positive")
    n = num_patches(x.shape[0], patch_len, stride)
    windows = np.lib.stride_tricks.sliding_window_view(x, patch_len)[::stride][:n]
    starts = np.arange(n, dtype=np.int64) * stride
    return PatchSequence(patches=windows.copy(), start_indices=starts,
                         patch_len=patch_len, stride=stride)


@dataclass
class SpectroTarget:
    """Per-patch prediction targets: the raw wave plus its one-sided spectrum."""

    wave: np.ndarray       # (P,)
    amplitude: np.ndarray  # (P//2 + 1,)
    phase: np.ndarray      # (P//2 + 1,), in (-pi, pi]


def fft_components(patch: np.ndarray) -> SpectroTarget:
    """One-sided DFT amplitude |X[k]| and phase atan2(Im, Re) for k = 0..P//2.

    Amplitudes are raw transform magnitudes (no doubling of interior bins).
    """
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim != 1 or patch.shape[0] < 2:
        raise ValueError("fft_components expects a 1-D patch with P >= 2")
    spectrum = np.fft.rfft(patch)
    return SpectroTarget(
        wave=patch.copy(),
        amplitude=np.abs(spectrum),
        phase=np.arctan2(spectrum.imag, spectrum.real),
    )


@dataclass
class RevinStats:
    """Per-channel mean and (eps-floored) population standard deviation."""

    mu: np.ndarray     # (C,)
    sigma: np.ndarray  # (C,), every entry >= eps
    eps: float


def revin_normalize(seg: np.ndarray, eps: float = REVIN_EPS) -> tuple[np.ndarray, RevinStats]:
    """Standardize each channel across the time axis; constant channels map to zeros."""
    seg = np.asarray(seg, dtype=np.float64)
    if seg.ndim != 2 or seg.shape[1] < 2:
        raise ValueError(f"revin expects (C, L) with L >= 2, got {seg.shape}")
    mu = seg.mean(axis=1)
    sigma = np.maximum(seg.std(axis=1), eps)  # population std (1/L)
    normalized = (seg - mu[:, None]) / sigma[:, None]
    return normalized, RevinStats(mu=mu, sigma=sigma, eps=eps)


def revin_denormalize(pred: np.ndarray, stats: RevinStats) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    return pred * stats.sigma[:, None] + stats.mu[:, None]
