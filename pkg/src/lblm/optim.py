"""Optimizer machinery: named parameter views, LAMB steps, cosine schedule
and global-norm gradient clipping.

The update rule per parameter block w with gradient g at step t:

    m <- b1*m + (1-b1)*g            mhat = m / (1 - b1^t)
    v <- b2*v + (1-b2)*g^2          vhat = v / (1 - b2^t)
    u = mhat / (sqrt(vhat) + eps) + weight_decay * w
    w <- w - lr * trust * u,        trust = ||w|| / ||u||

with trust = 1 whenever either norm is zero (zero-initialized blocks must
still be able to move).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from .errors import ConfigError, NonFiniteError


@dataclass
class ParamTensor:
    """Named view of one learnable tensor."""

    name: str
    data: torch.Tensor  # leaf tensor with requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def values(self) -> torch.Tensor:
        return self.data

    @property
    def grad(self) -> torch.Tensor:
        if self.data.grad is None:
            return torch.zeros_like(self.data)
        return self.data.grad


def collect_params(module: torch.nn.Module) -> list[ParamTensor]:
    params = [ParamTensor(name=n, data=p) for n, p in module.named_parameters()
              if p.requires_grad]
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        raise ValueError("duplicate parameter names")
    return params


@dataclass
class TrainHyper:
    lr_base: float = 1e-3
    lr_min: float = 0.0
    weight_decay: float = 0.01
    clip_norm: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-6
    total_steps: int = 1

    def __post_init__(self):
        if self.lr_min > self.lr_base:
            raise ConfigError("lr_min must not exceed lr_base")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("betas must lie in [0, 1)")
        if self.clip_norm <= 0 or self.total_steps <= 0:
            raise ConfigError("clip_norm and total_steps must be positive")


@dataclass
class OptimState:
    """First/second moment per parameter name plus the shared step counter."""

    m: dict[str, torch.Tensor] = field(default_factory=dict)
    v: dict[str, torch.Tensor] = field(default_factory=dict)
    step_count: int = 0

    @classmethod
    def init(cls, params: list[ParamTensor]) -> "OptimState":
        return cls(
            m={p.name: torch.zeros_like(p.data) for p in params},
            v={p.name: torch.zeros_like(p.data) for p in params},
            step_count=0,
        )


def lamb_step(params: list[ParamTensor], grads: list[torch.Tensor],
              state: OptimState, hyper: TrainHyper, lr: float) -> None:
    """One layer-wise adaptive update; mutates parameter values and state in place."""
    if lr <= 0:
        raise ConfigError("lr must be positive")
    if len(params) != len(grads):
        raise ValueError("params and grads length mismatch")
    for p, g in zip(params, grads):
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape mismatch for {p.name}")
        if not torch.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient in {p.name}; step refused")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - hyper.beta1 ** t
    bc2 = 1.0 - hyper.beta2 ** t
    with torch.no_grad():
        for p, g in zip(params, grads):
            m = state.m[p.name]
            v = state.v[p.name]
            m.mul_(hyper.beta1).add_(g, alpha=1.0 - hyper.beta1)
            v.mul_(hyper.beta2).addcmul_(g, g, value=1.0 - hyper.beta2)
            update = (m / bc1) / ((v / bc2).sqrt() + hyper.eps_opt)
            if hyper.weight_decay != 0.0:
                update = update + hyper.weight_decay * p.data
            w_norm = torch.linalg.vector_norm(p.data)
            u_norm = torch.linalg.vector_norm(update)
            if w_norm.item() == 0.0 or u_norm.item() == 0.0:
                trust = 1.0
            else:
                trust = (w_norm / u_norm).item()
            p.data.add_(update, alpha=-lr * trust)


def cosine_lr(step: int, hyper: TrainHyper) -> float:
    """Cosine annealing from lr_base (step 0) to lr_min (step total_steps)."""
    if step < 0 or step > hyper.total_steps:
        raise ConfigError(f"step {step} outside [0, {hyper.total_steps}]")
    span = hyper.lr_base - hyper.lr_min
    return hyper.lr_min + 0.5 * span * (1.0 + math.cos(math.pi * step / hyper.total_steps))


def clip_grad_norm(grads: list[torch.Tensor], max_norm: float) -> float:
    """Scale all gradients by max_norm/||g|| when the global L2 norm exceeds
    max_norm; returns the observed (pre-clip) global norm."""
    if max_norm <= 0:
        raise ConfigError("max_norm must be positive")
    for g in grads:
        if not torch.isfinite(g).all():
            raise NonFiniteError("non-finite gradient entries")
    total = torch.sqrt(sum(torch.sum(g * g) for g in grads))
    norm = total.item()
    if norm > max_norm:
        scale = max_norm / norm
        with torch.no_grad():
            for g in grads:
                g.mul_(scale)
    return norm
