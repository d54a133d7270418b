"""Synthetic multi-subject, multi-session EEG-like corpus with planted class
structure.

Each silent-production trial embeds an oscillatory burst whose frequency and
channel footprint identify the word (and, more coarsely, its semantic group)
on top of a pink-noise background. Session-specific gain and frequency drift
make cross-session generalization non-trivial: per-channel gain alone would
be erased by instance normalization, so drift perturbs the signature pattern
itself.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data import (COND_READ, COND_REST, COND_SILENT, NUM_WORDS, EegRecording,
                   TrialMark, semantic_group)
from .errors import ConfigError


@dataclass
class SignatureComponent:
    freq_hz: float
    channels: list[int]
    amp_scale: float = 1.0


# Base burst frequency per semantic group: alpha for group 0, beta for 1-3,
# gamma for 4-5; words within a group are offset by 1 Hz steps.
GROUP_BASE_FREQS = [10.0, 14.0, 19.0, 25.0, 33.0, 42.0]


def default_signatures(channels: int) -> dict[int, list[SignatureComponent]]:
    """One burst component per word: group sets the base frequency and the
    channel triplet, the word index within the group shifts the frequency."""
    table: dict[int, list[SignatureComponent]] = {}
    for word in range(NUM_WORDS):
        group = semantic_group(word)
        freq = GROUP_BASE_FREQS[group] + (word % 4)
        chans = [group % channels, (group + 2) % channels, (group + 5) % channels]
        table[word] = [SignatureComponent(freq_hz=freq, channels=sorted(set(chans)))]
    return table


@dataclass
class GeneratorSpec:
    subjects: int = 2
    sessions_per_subject: int = 5
    trials_per_session: int = 48
    channels: int = 8
    fs: float = 500.0
    noise_level: float = 1.0
    snr: float = 1.0                # burst amplitude relative to noise RMS
    session_drift: float = 0.2      # gain/frequency drift strength across sessions
    rest_s: float = 2.0
    read_s: float = 2.0
    silent_s: float = 2.0
    gap_s: float = 0.5
    signatures: dict[int, list[SignatureComponent]] | None = None

    def __post_init__(self):
        if self.signatures is None:
            self.signatures = default_signatures(self.channels)
        if not self.signatures:
            raise ConfigError("class-signature table must not be empty")
        if self.subjects < 1 or self.sessions_per_subject < 1 or self.trials_per_session < 1:
            raise ConfigError("subjects, sessions and trials must be positive")

    @property
    def trial_len_s(self) -> float:
        return self.rest_s + self.read_s + self.silent_s + self.gap_s

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["signatures"] = {str(w): [asdict(c) for c in comps]
                           for w, comps in self.signatures.items()}
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "GeneratorSpec":
        d = dict(d)
        sig = d.pop("signatures", None)
        spec = cls(**d, signatures=None)
        if sig is not None:
            spec.signatures = {int(w): [SignatureComponent(**c) for c in comps]
                               for w, comps in sig.items()}
        return spec


def _pink_noise(rng: np.random.Generator, channels: int, samples: int) -> np.ndarray:
    """1/f-shaped noise, unit RMS per channel."""
    white = rng.standard_normal((channels, samples))
    spectrum = np.fft.rfft(white, axis=1)
    freqs = np.fft.rfftfreq(samples)
    scale = np.ones_like(freqs)
    scale[1:] = 1.0 / np.sqrt(freqs[1:])
    scale[0] = 0.0
    shaped = np.fft.irfft(spectrum * scale[None, :], n=samples, axis=1)
    rms = shaped.std(axis=1, keepdims=True)
    return shaped / np.maximum(rms, 1e-12)


def _hann_burst(samples: int) -> np.ndarray:
    return np.hanning(samples)


def _word_sequence(rng: np.random.Generator, n_trials: int) -> np.ndarray:
    """Balanced word labels: full shuffled decks of 24, truncated to n_trials."""
    decks = []
    while sum(len(d) for d in decks) < n_trials:
        decks.append(rng.permutation(NUM_WORDS))
    return np.concatenate(decks)[:n_trials]


def synth_session(spec: GeneratorSpec, subject: int, session: int,
                  seed: int) -> EegRecording:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(subject, session))
    rng = np.random.default_rng(ss)
    fs = spec.fs
    trial_len = int(round(spec.trial_len_s * fs))
    total = spec.trials_per_session * trial_len

    data = spec.noise_level * _pink_noise(rng, spec.channels, total)

    # Session drift: per-channel signature gain and a common frequency offset.
    gain = 1.0 + spec.session_drift * rng.standard_normal(spec.channels)
    gain = np.clip(gain, 0.2, None)
    freq_offset = spec.session_drift * rng.normal(0.0, 0.5)

    words = _word_sequence(rng, spec.trials_per_session)
    rest_len = int(round(spec.rest_s * fs))
    read_len = int(round(spec.read_s * fs))
    silent_len = int(round(spec.silent_s * fs))
    t_silent = np.arange(silent_len) / fs
    t_read = np.arange(read_len) / fs
    burst_silent = _hann_burst(silent_len)
    burst_read = _hann_burst(read_len)
    marks: list[TrialMark] = []

    for i, word in enumerate(words):
        word = int(word)
        base = i * trial_len
        rest_start = base
        read_start = base + rest_len
        silent_start = base + rest_len + read_len
        group = semantic_group(word)
        for cond, start in ((COND_REST, rest_start), (COND_READ, read_start),
                            (COND_SILENT, silent_start)):
            marks.append(TrialMark(start=start, word=word, semantic=group,
                                   condition=cond))
        for comp in spec.signatures[word]:
            freq = comp.freq_hz + freq_offset
            amp = spec.snr * spec.noise_level * comp.amp_scale
            phase = rng.uniform(0.0, 2.0 * np.pi)
            wave = amp * burst_silent * np.sin(2.0 * np.pi * freq * t_silent + phase)
            for ch in comp.channels:
                data[ch, silent_start:silent_start + silent_len] += gain[ch] * wave
            # Weaker copy during reading plus a fixed 10 Hz component on the
            # last two channels, so condition pairs differ in band power.
            read_wave = 0.4 * amp * burst_read * np.sin(
                2.0 * np.pi * freq * t_read + phase)
            for ch in comp.channels:
                data[ch, read_start:read_start + read_len] += gain[ch] * read_wave
        alpha = 0.6 * spec.snr * spec.noise_level * burst_read * np.sin(
            2.0 * np.pi * 10.0 * t_read + rng.uniform(0.0, 2.0 * np.pi))
        for ch in (spec.channels - 1, spec.channels - 2):
            data[ch, read_start:read_start + read_len] += alpha

    return EegRecording(data=data.astype(np.float32), fs=fs, subject_id=subject,
                        session_id=session, trial_marks=marks)


def synth_dataset(spec: GeneratorSpec, seed: int) -> list[EegRecording]:
    """All sessions for all subjects; bit-deterministic under (spec, seed)."""
    recordings = []
    for subject in range(spec.subjects):
        for session in range(spec.sessions_per_subject):
            recordings.append(synth_session(spec, subject, session, seed))
    return recordings
