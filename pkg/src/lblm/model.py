"""Backbone network: patch embedding with positional and subject terms,
gated conformer blocks, and the three token-wise prediction heads.

Channels are processed independently with shared weights: a batch of B
segments with C channels runs as B*C token sequences. Causal mode restricts
attention to past tokens and pads the depthwise convolution on the left only,
so outputs at token i never depend on tokens j > i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

BACKBONE_KINDS = ("transformer", "conformer", "gated_conformer")


@dataclass
class ModelConfig:
    d: int = 64
    layers: int = 4
    heads: int = 4
    ffn_dim: int = 64
    conv_kernel: int = 7
    patch_len: int = 25
    stride: int = 6
    k_subjects: int = 2
    n_max: int = 512
    backbone_kind: str = "gated_conformer"

    def __post_init__(self):
        if self.d % self.heads != 0:
            raise ValueError(f"d={self.d} not divisible by heads={self.heads}")
        if self.conv_kernel % 2 == 0:
            raise ValueError("conv_kernel must be odd")
        if self.backbone_kind not in BACKBONE_KINDS:
            raise ValueError(f"unknown backbone_kind {self.backbone_kind!r}")

    @property
    def num_freq_bins(self) -> int:
        return self.patch_len // 2 + 1


def sinusoidal_positions(n_max: int, d: int) -> torch.Tensor:
    """pe[pos, 2i] = sin(pos / 10000^(2i/d)), pe[pos, 2i+1] = cos(...)."""
    pos = torch.arange(n_max, dtype=torch.float64).unsqueeze(1)
    idx = torch.arange(0, d, 2, dtype=torch.float64)
    angle = pos / torch.pow(10000.0, idx / d)
    pe = torch.zeros(n_max, d, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(angle)
    pe[:, 1::2] = torch.cos(angle[:, : d // 2])
    return pe.to(torch.float32)


class MultiHeadSelfAttention(nn.Module):
    def __init__(self, d: int, heads: int):
        super().__init__()
        self.heads = heads
        self.d_head = d // heads
        self.wq = nn.Linear(d, d)
        self.wk = nn.Linear(d, d)
        self.wv = nn.Linear(d, d)
        self.wo = nn.Linear(d, d)

    def forward(self, x: torch.Tensor, causal: bool) -> torch.Tensor:
        b, n, d = x.shape
        q = self.wq(x).view(b, n, self.heads, self.d_head).transpose(1, 2)
        k = self.wk(x).view(b, n, self.heads, self.d_head).transpose(1, 2)
        v = self.wv(x).view(b, n, self.heads, self.d_head).transpose(1, 2)
        logits = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)  # (b, h, n, n)
        if causal:
            future = torch.triu(torch.ones(n, n, dtype=torch.bool, device=x.device), 1)
            logits = logits.masked_fill(future, float("-inf"))
        attn = torch.softmax(logits, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.wo(out)

    def attention_weights(self, x: torch.Tensor, causal: bool) -> torch.Tensor:
        b, n, d = x.shape
        q = self.wq(x).view(b, n, self.heads, self.d_head).transpose(1, 2)
        k = self.wk(x).view(b, n, self.heads, self.d_head).transpose(1, 2)
        logits = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        if causal:
            future = torch.triu(torch.ones(n, n, dtype=torch.bool, device=x.device), 1)
            logits = logits.masked_fill(future, float("-inf"))
        return torch.softmax(logits, dim=-1)


class FeedForward(nn.Module):
    def __init__(self, d: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(d, hidden)
        self.fc2 = nn.Linear(hidden, d)

    def forward(self, x):
        return self.fc2(F.silu(self.fc1(x)))


class ConvModule(nn.Module):
    """Pointwise expansion with GLU, depthwise conv over tokens, swish, projection."""

    def __init__(self, d: int, kernel: int):
        super().__init__()
        self.kernel = kernel
        self.pw1 = nn.Conv1d(d, 2 * d, 1)
        self.depthwise = nn.Conv1d(d, d, kernel, groups=d)
        self.pw2 = nn.Conv1d(d, d, 1)

    def forward(self, x: torch.Tensor, causal: bool) -> torch.Tensor:
        y = x.transpose(1, 2)  # (b, d, n)
        y = F.glu(self.pw1(y), dim=1)
        if causal:
            y = F.pad(y, (self.kernel - 1, 0))
        else:
            half = self.kernel // 2
            y = F.pad(y, (half, half))
        y = F.silu(self.depthwise(y))
        y = self.pw2(y)
        return y.transpose(1, 2)


class GateUnit(nn.Module):
    """Token-wise scalar gate: zero-initialized pointwise conv, affine to one
    logit per token, sigmoid. At initialization every gate value is 0.5."""

    def __init__(self, d: int):
        super().__init__()
        self.zero_conv = nn.Linear(d, d)
        nn.init.zeros_(self.zero_conv.weight)
        nn.init.zeros_(self.zero_conv.bias)
        self.proj = nn.Linear(d, 1)
        nn.init.zeros_(self.proj.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.proj(self.zero_conv(x)))  # (b, n, 1)


class ConformerInner(nn.Module):
    """Macaron conformer transform: half-step FFN, MHSA, conv module,
    half-step FFN, final layer norm; residuals inside."""

    def __init__(self, cfg: ModelConfig, with_conv: bool):
        super().__init__()
        self.ffn1 = FeedForward(cfg.d, cfg.ffn_dim)
        self.norm_ffn1 = nn.LayerNorm(cfg.d)
        self.attn = MultiHeadSelfAttention(cfg.d, cfg.heads)
        self.norm_attn = nn.LayerNorm(cfg.d)
        self.with_conv = with_conv
        if with_conv:
            self.conv = ConvModule(cfg.d, cfg.conv_kernel)
            self.norm_conv = nn.LayerNorm(cfg.d)
        self.ffn2 = FeedForward(cfg.d, cfg.ffn_dim)
        self.norm_ffn2 = nn.LayerNorm(cfg.d)
        self.norm_out = nn.LayerNorm(cfg.d)

    def forward(self, x: torch.Tensor, causal: bool) -> torch.Tensor:
        x = x + 0.5 * self.ffn1(self.norm_ffn1(x))
        x = x + self.attn(self.norm_attn(x), causal)
        if self.with_conv:
            x = x + self.conv(self.norm_conv(x), causal)
        x = x + 0.5 * self.ffn2(self.norm_ffn2(x))
        return self.norm_out(x)


class TransformerBlock(nn.Module):
    """Plain pre-norm transformer block (no conv module, no gate)."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.attn = MultiHeadSelfAttention(cfg.d, cfg.heads)
        self.norm_attn = nn.LayerNorm(cfg.d)
        self.ffn = FeedForward(cfg.d, cfg.ffn_dim)
        self.norm_ffn = nn.LayerNorm(cfg.d)

    def forward(self, x: torch.Tensor, causal: bool) -> torch.Tensor:
        x = x + self.attn(self.norm_attn(x), causal)
        return x + self.ffn(self.norm_ffn(x))


class ConformerBlock(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.inner = ConformerInner(cfg, with_conv=True)

    def forward(self, x: torch.Tensor, causal: bool) -> torch.Tensor:
        return self.inner(x, causal)


class GatedConformerBlock(nn.Module):
    """Convex blend of the conformer transform with the block input:
    out = g(x) * inner(x) + (1 - g(x)) * x."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.inner = ConformerInner(cfg, with_conv=True)
        self.gate = GateUnit(cfg.d)
        self.gate_override: float | None = None  # test hook: force a constant gate

    def forward(self, x: torch.Tensor, causal: bool) -> torch.Tensor:
        if self.gate_override == 0.0:
            return x  # exact identity at the convex-combination endpoint
        if self.gate_override is not None:
            g = torch.full_like(x[..., :1], self.gate_override)
        else:
            g = self.gate(x)
        return g * self.inner(x, causal) + (1.0 - g) * x


def _make_block(cfg: ModelConfig) -> nn.Module:
    if cfg.backbone_kind == "transformer":
        return TransformerBlock(cfg)
    if cfg.backbone_kind == "conformer":
        return ConformerBlock(cfg)
    return GatedConformerBlock(cfg)


class Backbone(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.patch_proj = nn.Linear(cfg.patch_len, cfg.d)
        self.mask_token = nn.Parameter(torch.randn(cfg.d) * 0.02)
        self.subject_embed = nn.Parameter(torch.ones(cfg.k_subjects, cfg.d))
        self.register_buffer("pos_table", sinusoidal_positions(cfg.n_max, cfg.d))
        self.blocks = nn.ModuleList(_make_block(cfg) for _ in range(cfg.layers))

    def patchify(self, x: torch.Tensor) -> torch.Tensor:
        """(..., L) -> (..., N, P) overlapping patches; trailing samples dropped."""
        if x.shape[-1] < self.cfg.patch_len:
            raise ValueError(
                f"series length {x.shape[-1]} shorter than patch length {self.cfg.patch_len}"
            )
        return x.unfold(-1, self.cfg.patch_len, self.cfg.stride)

    def embed(self, patches: torch.Tensor, subject_ids: torch.Tensor,
              masked: torch.Tensor | None = None) -> torch.Tensor:
        """(B, N, P) patches -> (B, N, d) tokens: (proj + pe) * subject row,
        with masked positions' projections replaced by the mask token."""
        b, n, _ = patches.shape
        if n > self.cfg.n_max:
            raise ValueError(f"{n} tokens exceed position table size {self.cfg.n_max}")
        if subject_ids.min() < 0 or subject_ids.max() >= self.cfg.k_subjects:
            raise ValueError("subject id out of range")
        tok = self.patch_proj(patches)
        if masked is not None:
            tok = torch.where(masked.unsqueeze(-1), self.mask_token.expand_as(tok), tok)
        tok = tok + self.pos_table[:n].unsqueeze(0)
        se = self.subject_embed[subject_ids]  # (B, d)
        return tok * se.unsqueeze(1)

    def encode(self, tokens: torch.Tensor, mask_mode: str) -> torch.Tensor:
        causal = self._causal(mask_mode)
        for block in self.blocks:
            tokens = block(tokens, causal)
        return tokens

    @staticmethod
    def _causal(mask_mode: str) -> bool:
        if mask_mode not in ("bidirectional", "causal"):
            raise ValueError(f"unknown mask_mode {mask_mode!r}")
        return mask_mode == "causal"

    def forward_patches(self, patches: torch.Tensor, subject_ids: torch.Tensor,
                        mask_mode: str = "bidirectional",
                        masked: torch.Tensor | None = None) -> torch.Tensor:
        """(B, C, N, P) patches -> (B, C, N, d) features; channels share weights."""
        b, c, n, p = patches.shape
        flat = patches.reshape(b * c, n, p)
        subj = subject_ids.repeat_interleave(c)
        flat_mask = None
        if masked is not None:
            flat_mask = masked.repeat_interleave(c, dim=0)
        tokens = self.embed(flat, subj, flat_mask)
        feats = self.encode(tokens, mask_mode)
        return feats.reshape(b, c, n, self.cfg.d)

    def forward(self, x: torch.Tensor, subject_ids: torch.Tensor,
                mask_mode: str = "bidirectional",
                masked: torch.Tensor | None = None) -> torch.Tensor:
        """(B, C, L) normalized segments -> (B, C, N, d) token features."""
        return self.forward_patches(self.patchify(x), subject_ids, mask_mode, masked)


class PredictionHeads(nn.Module):
    """Token-wise affine heads for wave, amplitude and phase. The phase head
    is squashed to (-pi, pi) by pi*tanh. Weights are shared across tokens, so
    the size is independent of sequence length."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.wave_head = nn.Linear(cfg.d, cfg.patch_len)
        self.amp_head = nn.Linear(cfg.d, cfg.num_freq_bins)
        self.phase_head = nn.Linear(cfg.d, cfg.num_freq_bins)

    def forward(self, features: torch.Tensor):
        wave = self.wave_head(features)
        amp = self.amp_head(features)
        phase = math.pi * torch.tanh(self.phase_head(features))
        return wave, amp, phase


class PretrainModel(nn.Module):
    """Backbone plus heads; `predict` is the single entry point the
    pretraining losses use."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.backbone = Backbone(cfg)
        self.heads = PredictionHeads(cfg)

    def predict(self, x: torch.Tensor, subject_ids: torch.Tensor,
                mask_mode: str = "bidirectional",
                masked: torch.Tensor | None = None):
        """(B, C, L) -> per-token (wave (B,C,N,P), amp (B,C,N,K), phase (B,C,N,K))."""
        feats = self.backbone(x, subject_ids, mask_mode, masked)
        return self.heads(feats)


def param_census(module: nn.Module) -> dict[str, int]:
    return {name: p.numel() for name, p in module.named_parameters() if p.requires_grad}


def total_params(module: nn.Module) -> int:
    return sum(param_census(module).values())
