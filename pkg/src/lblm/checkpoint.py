"""Versioned binary checkpoints.

Layout (little-endian), mirroring the dataset format conventions:

    magic   4 bytes  b"LBLC"
    version u16      currently 1
    stage   u8       0=init, 1=mstp, 2=astp, 3=finetuned
    config  u32 length + UTF-8 JSON (model configuration)
    meta    u32 length + UTF-8 JSON (seed, ancestry, training metadata)
    count   u32      number of parameter tensors
    per tensor:
        name  u16 length + UTF-8
        ndim  u8, then ndim x u32 dims
        data  float32, C-order

No timestamps are stored, so identical runs produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .data import _atomic_write_bytes
from .errors import FormatError
from .model import ModelConfig

CKPT_MAGIC = b"LBLC"
CKPT_VERSION = 1
STAGES = ("init", "mstp", "astp", "finetuned")


@dataclass
class Checkpoint:
    model_config: ModelConfig
    stage: str
    params: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")

    @classmethod
    def from_model(cls, model: torch.nn.Module, cfg: ModelConfig, stage: str,
                   meta: dict | None = None) -> "Checkpoint":
        params = {name: p.detach().cpu().to(torch.float32).numpy().copy()
                  for name, p in model.named_parameters()}
        return cls(model_config=cfg, stage=stage, params=params, meta=dict(meta or {}))

    def apply_to(self, model: torch.nn.Module) -> None:
        """Copy stored tensors into the module's parameters by name (strict)."""
        own = dict(model.named_parameters())
        missing = set(own) - set(self.params)
        unexpected = set(self.params) - set(own)
        if missing or unexpected:
            raise ValueError(f"parameter name mismatch: missing={sorted(missing)} "
                             f"unexpected={sorted(unexpected)}")
        with torch.no_grad():
            for name, arr in self.params.items():
                target = own[name]
                if tuple(target.shape) != arr.shape:
                    raise ValueError(f"shape mismatch for {name}: "
                                     f"{tuple(target.shape)} vs {arr.shape}")
                target.copy_(torch.from_numpy(arr).to(target.dtype))

    def serialize(self) -> bytes:
        config_json = json.dumps(asdict(self.model_config), sort_keys=True).encode()
        meta_json = json.dumps(self.meta, sort_keys=True).encode()
        parts = [CKPT_MAGIC,
                 struct.pack("<HB", CKPT_VERSION, STAGES.index(self.stage)),
                 struct.pack("<I", len(config_json)), config_json,
                 struct.pack("<I", len(meta_json)), meta_json,
                 struct.pack("<I", len(self.params))]
        for name, arr in self.params.items():
            encoded = name.encode()
            arr = np.ascontiguousarray(arr, dtype="<f4")
            parts.append(struct.pack("<H", len(encoded)))
            parts.append(encoded)
            parts.append(struct.pack("<B", arr.ndim))
            parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
            parts.append(arr.tobytes())
        return b"".join(parts)

    def save(self, path: str) -> str:
        """Write atomically; returns the file's sha256 hex digest."""
        payload = self.serialize()
        _atomic_write_bytes(path, payload)
        return hashlib.sha256(payload).hexdigest()

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.serialize()).hexdigest()


def checkpoint_hash(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as fh:
        payload = fh.read()
    offset = 0

    def take(n, what):
        nonlocal offset
        if offset + n > len(payload):
            raise FormatError(f"truncated checkpoint while reading {what}", offset=offset)
        chunk = payload[offset:offset + n]
        offset += n
        return chunk

    if take(4, "magic") != CKPT_MAGIC:
        raise FormatError(f"bad magic, expected {CKPT_MAGIC!r}", offset=0)
    version, stage_code = struct.unpack("<HB", take(3, "header"))
    if version != CKPT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    if stage_code >= len(STAGES):
        raise FormatError(f"unknown stage code {stage_code}", offset=6)
    (clen,) = struct.unpack("<I", take(4, "config length"))
    cfg = ModelConfig(**json.loads(take(clen, "config json")))
    (mlen,) = struct.unpack("<I", take(4, "meta length"))
    meta = json.loads(take(mlen, "meta json"))
    (count,) = struct.unpack("<I", take(4, "param count"))
    params: dict[str, np.ndarray] = {}
    for i in range(count):
        (nlen,) = struct.unpack("<H", take(2, f"param {i} name length"))
        name = take(nlen, f"param {i} name").decode()
        (ndim,) = struct.unpack("<B", take(1, f"param {i} ndim"))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim, f"param {i} dims"))
        n_items = int(np.prod(dims)) if ndim else 1
        raw = take(4 * n_items, f"param {i} data")
        params[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    return Checkpoint(model_config=cfg, stage=STAGES[stage_code],
                      params=params, meta=meta)
