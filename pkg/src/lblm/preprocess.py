"""Signal conditioning: FIR filtering, re-referencing, decimation, epoching
and multi-band mixing.

All FIR filters are linear-phase windowed-sinc (Hamming) designs with group
delay compensated by centered convolution, so filtered outputs stay aligned
with their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve, firwin

from .data import COND_SILENT, EegRecording, TrialSegment
from .errors import ConfigError, TruncationError

WINDOW_S = 2.0
OVERLAP_S = 0.5

# Mixing bands: band tag -> (lo, hi) in Hz. "raw" keeps the wide pretraining band.
MIX_BANDS = {
    "raw": (1.0, 50.0),
    "alpha": (8.0, 13.0),
    "beta": (13.0, 30.0),
    "gamma": (30.0, 50.0),
}

# Taps for the short filters applied to 2 s segments during band mixing;
# longer designs would leave no full-overlap region in the convolution.
SEGMENT_FILTER_TAPS = 201


@dataclass
class Bandpass:
    lo: float
    hi: float


@dataclass
class Notch:
    f0: float
    half_width: float = 2.0


def _even(n: float) -> int:
    k = int(round(n))
    return k + (k % 2)


def _design_taps(kind, fs: float) -> np.ndarray:
    nyq = fs / 2.0
    if isinstance(kind, Bandpass):
        if not 0 < kind.lo < kind.hi < nyq:
            raise ConfigError(f"bandpass ({kind.lo}, {kind.hi}) invalid for fs={fs}")
        transition = min(kind.lo, nyq - kind.hi, 2.0)
        order = _even(4.0 * fs / transition)
        return firwin(order + 1, [kind.lo, kind.hi], pass_zero=False, fs=fs,
                      window="hamming")
    if isinstance(kind, Notch):
        lo, hi = kind.f0 - kind.half_width, kind.f0 + kind.half_width
        if not 0 < lo < hi < nyq:
            raise ConfigError(f"notch at {kind.f0} Hz invalid for fs={fs}")
        transition = kind.half_width
        order = _even(4.0 * fs / transition)
        return firwin(order + 1, [lo, hi], pass_zero=True, fs=fs, window="hamming")
    raise ConfigError(f"unknown filter kind {kind!r}")


def _filter_channels(data: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # Odd tap count + mode="same" centers the kernel, compensating group delay.
    return fftconvolve(data.astype(np.float64), taps[None, :], mode="same",
                       axes=1).astype(np.float32)


def fir_filter(rec: EegRecording, kind) -> EegRecording:
    """Apply a zero-phase bandpass or notch FIR filter to every channel."""
    taps = _design_taps(kind, rec.fs)
    if len(taps) > rec.n_samples:
        raise ConfigError(
            f"recording of {rec.n_samples} samples shorter than {len(taps)}-tap filter"
        )
    return rec.with_data(_filter_channels(rec.data, taps))


def average_rereference(rec: EegRecording) -> EegRecording:
    """Subtract the instantaneous cross-channel mean from every channel."""
    if rec.n_channels < 2:
        raise ConfigError("average re-reference needs at least 2 channels")
    mean = rec.data.mean(axis=0, keepdims=True)
    return rec.with_data(rec.data - mean)


def downsample(rec: EegRecording, target_fs: float) -> EegRecording:
    """Anti-alias low-pass (cutoff 0.45 * target_fs) then decimate by fs/target_fs."""
    ratio = rec.fs / target_fs
    if abs(ratio - round(ratio)) > 1e-9:
        raise ConfigError(f"fs {rec.fs} not an integer multiple of target {target_fs}")
    ratio = int(round(ratio))
    if ratio == 1:
        return rec.with_data(rec.data.copy())
    cutoff = 0.45 * target_fs
    transition = 0.1 * target_fs
    order = _even(4.0 * rec.fs / transition)
    taps = firwin(order + 1, cutoff, pass_zero=True, fs=rec.fs, window="hamming")
    filtered = _filter_channels(rec.data, taps)
    new_t = rec.n_samples // ratio
    marks = [
        type(m)(start=m.start // ratio, word=m.word, semantic=m.semantic,
                condition=m.condition)
        for m in rec.trial_marks
    ]
    return rec.with_data(filtered[:, ::ratio][:, :new_t], fs=target_fs, trial_marks=marks)


def epoch(rec: EegRecording, window_s: float = WINDOW_S, overlap_s: float = OVERLAP_S,
          *, labeled: bool = False) -> list[TrialSegment]:
    """Cut a recording into fixed windows.

    Unlabeled mode slides a window of `window_s` with hop `window_s - overlap_s`
    over the whole recording. Labeled mode cuts one window at each trial mark
    and keeps its labels.
    """
    win = int(round(window_s * rec.fs))
    segments: list[TrialSegment] = []
    if labeled:
        for m in rec.trial_marks:
            if m.start + win > rec.n_samples:
                raise TruncationError(
                    f"trial at {m.start} + window {win} exceeds length {rec.n_samples}"
                )
            segments.append(TrialSegment(
                data=rec.data[:, m.start:m.start + win], fs=rec.fs,
                subject_id=rec.subject_id, session_id=rec.session_id,
                word=m.word, semantic=m.semantic, condition=m.condition,
            ))
        return segments
    hop = int(round((window_s - overlap_s) * rec.fs))
    if hop <= 0:
        raise ConfigError("overlap must be smaller than the window")
    if rec.n_samples < win:
        return []
    count = (rec.n_samples - win) // hop + 1
    for i in range(count):
        start = i * hop
        segments.append(TrialSegment(
            data=rec.data[:, start:start + win], fs=rec.fs,
            subject_id=rec.subject_id, session_id=rec.session_id,
        ))
    return segments


def _band_taps(lo: float, hi: float, fs: float, numtaps: int) -> np.ndarray:
    nyq = fs / 2.0
    if not 0 < lo < hi < nyq:
        raise ConfigError(f"band ({lo}, {hi}) invalid for fs={fs}")
    return firwin(numtaps, [lo, hi], pass_zero=False, fs=fs, window="hamming")


def multiband_mix(segments: list[TrialSegment]) -> list[TrialSegment]:
    """Expand each raw segment into four band-tagged copies (raw/alpha/beta/gamma)."""
    if not segments:
        return []
    taps_cache: dict[tuple[str, float], np.ndarray] = {}
    mixed: list[TrialSegment] = []
    for seg in segments:
        if seg.band_tag != "raw":
            raise ValueError(f"multiband_mix expects raw segments, got {seg.band_tag!r}")
        ntaps = min(SEGMENT_FILTER_TAPS, seg.data.shape[1] // 2 * 2 + 1)
        for tag, (lo, hi) in MIX_BANDS.items():
            key = (tag, seg.fs, ntaps)
            if key not in taps_cache:
                taps_cache[key] = _band_taps(lo, hi, seg.fs, ntaps)
            mixed.append(TrialSegment(
                data=_filter_channels(seg.data, taps_cache[key]), fs=seg.fs,
                subject_id=seg.subject_id, session_id=seg.session_id,
                word=seg.word, semantic=seg.semantic, condition=seg.condition,
                band_tag=tag,
            ))
    return mixed


def preprocess_recording(rec: EegRecording, lo: float = 1.0, hi: float = 75.0,
                         notch_hz: float = 50.0, target_fs: float = 250.0) -> EegRecording:
    """The standard chain: bandpass, notch, average re-reference, downsample."""
    out = fir_filter(rec, Bandpass(lo, hi))
    out = fir_filter(out, Notch(notch_hz))
    out = average_rereference(out)
    return downsample(out, target_fs)


def silent_trials(segments: list[TrialSegment]) -> list[TrialSegment]:
    """Keep only labeled silent-production trials (the classification targets)."""
    return [s for s in segments if s.condition == COND_SILENT]
