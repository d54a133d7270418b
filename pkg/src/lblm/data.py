"""Recording and segment containers plus the on-disk dataset format.

File layout (little-endian):

    magic   4 bytes  b"LBLD"
    version u16      currently 1
    count   u32      number of records
    per record:
        subject_id u16, session_id u16, C u16, T u64, fs f32, n_trials u32
        n_trials x (start u64, word u8, semantic u8, condition u8)
        C*T float32 samples, row-major by channel

A JSON sidecar (same stem, ".meta.json") carries the generator spec, seed
and config hash when available.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

MAGIC = b"LBLD"
FORMAT_VERSION = 1

# Trial conditions, in presentation order.
COND_REST = 0
COND_READ = 1
COND_SILENT = 2
CONDITION_NAMES = {COND_REST: "rest", COND_READ: "read", COND_SILENT: "silent"}
CONDITION_IDS = {v: k for k, v in CONDITION_NAMES.items()}

# 24-word vocabulary in 6 semantic groups of 4; word w belongs to group w // 4.
WORDS = [
    "jumping", "running", "swimming", "going",          # motion
    "happy", "sad", "fun", "horrible",                  # emotion
    "college", "home", "battlefield", "here",           # location
    "mother", "cowboy", "professor", "me",              # people
    "one", "three", "eleven", "million",                # number
    "spoon", "alfa", "python", "telephone",             # object
]
GROUPS = ["motion", "emotion", "location", "people", "number", "object"]
NUM_WORDS = 24
NUM_GROUPS = 6
WORDS_PER_GROUP = NUM_WORDS // NUM_GROUPS


def semantic_group(word_label: int) -> int:
    """Map a word label in [0, 24) to its semantic group in [0, 6)."""
    if not 0 <= word_label < NUM_WORDS:
        raise ValueError(f"word label {word_label} outside [0, {NUM_WORDS})")
    return word_label // WORDS_PER_GROUP


@dataclass
class TrialMark:
    start: int
    word: int
    semantic: int
    condition: int

    def __post_init__(self):
        if not 0 <= self.word < NUM_WORDS:
            raise ValueError(f"word label {self.word} outside [0, {NUM_WORDS})")
        if self.semantic != semantic_group(self.word):
            raise ValueError(
                f"semantic label {self.semantic} inconsistent with word {self.word}"
            )
        if self.condition not in CONDITION_NAMES:
            raise ValueError(f"unknown condition code {self.condition}")


@dataclass
class EegRecording:
    """One session's multi-channel signal with its trial annotations."""

    data: np.ndarray  # (C, T) float32
    fs: float
    subject_id: int
    session_id: int
    trial_marks: list[TrialMark] = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValueError(f"data must be (C, T), got shape {self.data.shape}")
        for m in self.trial_marks:
            if not 0 <= m.start < self.n_samples:
                raise ValueError(f"trial mark at {m.start} outside [0, {self.n_samples})")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.fs

    def with_data(self, data: np.ndarray, fs: float | None = None,
                  trial_marks: list[TrialMark] | None = None) -> "EegRecording":
        return EegRecording(
            data=data,
            fs=self.fs if fs is None else fs,
            subject_id=self.subject_id,
            session_id=self.session_id,
            trial_marks=self.trial_marks if trial_marks is None else trial_marks,
        )


@dataclass
class TrialSegment:
    """A fixed-length window, either an unlabeled pretraining epoch or a labeled trial."""

    data: np.ndarray  # (C, L) float32
    fs: float
    subject_id: int
    session_id: int
    word: int | None = None
    semantic: int | None = None
    condition: int | None = None
    band_tag: str = "raw"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValueError(f"segment data must be (C, L), got {self.data.shape}")

    @property
    def labeled(self) -> bool:
        return self.word is not None


def _atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def sidecar_path(path: str) -> str:
    stem, _ = os.path.splitext(path)
    return stem + ".meta.json"


def write_dataset(recordings: list[EegRecording], path: str,
                  meta: dict | None = None) -> None:
    """Serialize recordings to `path` atomically; optionally write the JSON sidecar."""
    parts = [MAGIC, struct.pack("<HI", FORMAT_VERSION, len(recordings))]
    for rec in recordings:
        c, t = rec.data.shape
        parts.append(struct.pack("<HHHQfI", rec.subject_id, rec.session_id,
                                 c, t, rec.fs, len(rec.trial_marks)))
        for m in rec.trial_marks:
            parts.append(struct.pack("<QBBB", m.start, m.word, m.semantic, m.condition))
        parts.append(np.ascontiguousarray(rec.data, dtype="<f4").tobytes())
    _atomic_write_bytes(path, b"".join(parts))
    if meta is not None:
        atomic_write_text(sidecar_path(path), json.dumps(meta, indent=2, sort_keys=True))


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.payload):
            raise FormatError(f"truncated payload while reading {what}", offset=self.offset)
        chunk = self.payload[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def read_dataset(path: str) -> list[EegRecording]:
    """Parse a dataset file, raising FormatError with byte offsets on corruption."""
    with open(path, "rb") as fh:
        payload = fh.read()
    r = _Reader(payload)
    if r.take(4, "magic") != MAGIC:
        raise FormatError(f"bad magic, expected {MAGIC!r}", offset=0)
    (version,) = r.unpack("<H", "version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    (count,) = r.unpack("<I", "record count")
    recordings = []
    for i in range(count):
        subject, session, c, t, fs, n_trials = r.unpack("<HHHQfI", f"record {i} header")
        marks = []
        for j in range(n_trials):
            start, word, semantic, condition = r.unpack("<QBBB", f"record {i} trial {j}")
            marks.append(TrialMark(start=start, word=word, semantic=semantic,
                                   condition=condition))
        raw = r.take(c * t * 4, f"record {i} samples")
        data = np.frombuffer(raw, dtype="<f4").reshape(c, t).copy()
        recordings.append(EegRecording(data=data, fs=fs, subject_id=subject,
                                       session_id=session, trial_marks=marks))
    return recordings


def read_sidecar(path: str) -> dict | None:
    sc = sidecar_path(path)
    if not os.path.exists(sc):
        return None
    with open(sc, "r", encoding="utf-8") as fh:
        return json.load(fh)
