"""Elementwise training losses."""

from __future__ import annotations

import torch


def huber_loss(x: torch.Tensor, xhat: torch.Tensor, delta: float = 1.0) -> torch.Tensor:
    """Mean Huber loss: quadratic inside |x - xhat| <= delta, linear outside.

    The mean runs over all elements so the magnitude is independent of patch
    length; continuous and once-differentiable at the branch boundary.
    """
    if x.shape != xhat.shape:
        raise ValueError(f"shape mismatch {tuple(x.shape)} vs {tuple(xhat.shape)}")
    if delta <= 0:
        raise ValueError("delta must be positive")
    diff = x - xhat
    absdiff = diff.abs()
    quadratic = 0.5 * diff * diff
    linear = delta * (absdiff - 0.5 * delta)
    return torch.where(absdiff <= delta, quadratic, linear).mean()


def cross_entropy(probabilities: torch.Tensor, label: int) -> torch.Tensor:
    """-log p[label] for one probability vector."""
    if probabilities.ndim != 1:
        raise ValueError("expected a single probability vector")
    if not 0 <= label < probabilities.shape[0]:
        raise ValueError(f"label {label} out of range for {probabilities.shape[0]} classes")
    return -torch.log(probabilities[label])


def cross_entropy_logits(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean -log softmax(logits)[label] via log-sum-exp; the training-path form."""
    if logits.ndim != 2 or labels.ndim != 1 or logits.shape[0] != labels.shape[0]:
        raise ValueError("expected (B, K) logits and (B,) labels")
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ValueError("label out of range")
    logp = logits - torch.logsumexp(logits, dim=1, keepdim=True)
    return -logp.gather(1, labels.view(-1, 1)).mean()
