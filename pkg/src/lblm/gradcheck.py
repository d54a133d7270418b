"""Verify reverse-mode gradients against central finite differences."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import NonFiniteError
from .optim import ParamTensor


@dataclass
class ParamCheck:
    name: str
    max_rel_err: float
    worst_index: int
    flagged: bool


@dataclass
class GradCheckReport:
    checks: list[ParamCheck]
    rel_tol: float

    @property
    def ok(self) -> bool:
        return not any(c.flagged for c in self.checks)

    @property
    def max_rel_err(self) -> float:
        return max((c.max_rel_err for c in self.checks), default=0.0)

    def flagged_names(self) -> list[str]:
        return [c.name for c in self.checks if c.flagged]


def grad_check(loss_fn, params: list[ParamTensor], eps: float = 1e-4,
               rel_tol: float = 1e-4, abs_floor: float = 1e-6) -> GradCheckReport:
    """Compare autograd gradients of `loss_fn()` with (f(w+e) - f(w-e)) / 2e.

    `loss_fn` must be deterministic and is expected to run in float64. The
    probe for entry i uses e = eps * max(1, |w_i|); relative error divides by
    max(|analytic|, |numeric|, abs_floor) so near-zero gradients are compared
    on an absolute scale.
    """
    for p in params:
        if p.data.grad is not None:
            p.data.grad = None
    loss = loss_fn()
    if not torch.isfinite(loss):
        raise NonFiniteError("loss is non-finite at the evaluation point")
    loss.backward()
    analytic = {p.name: (p.data.grad.detach().clone() if p.data.grad is not None
                         else torch.zeros_like(p.data)) for p in params}

    checks = []
    for p in params:
        flat = p.data.detach().view(-1)
        ana = analytic[p.name].view(-1)
        worst_err, worst_idx = 0.0, 0
        for i in range(flat.numel()):
            orig = flat[i].item()
            e = eps * max(1.0, abs(orig))
            with torch.no_grad():
                flat[i] = orig + e
            f_plus = float(loss_fn())
            with torch.no_grad():
                flat[i] = orig - e
            f_minus = float(loss_fn())
            with torch.no_grad():
                flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * e)
            a = ana[i].item()
            err = abs(a - numeric) / max(abs(a), abs(numeric), abs_floor)
            if err > worst_err:
                worst_err, worst_idx = err, i
        checks.append(ParamCheck(name=p.name, max_rel_err=worst_err,
                                 worst_index=worst_idx, flagged=worst_err > rel_tol))
    return GradCheckReport(checks=checks, rel_tol=rel_tol)
