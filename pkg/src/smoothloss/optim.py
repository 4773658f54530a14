"""Parameter updates: SGD with Nesterov momentum, Adam, and the step schedule.

The step schedule divides the base learning rate by a fixed factor at each
milestone epoch (inclusive: the decayed rate applies starting at the
milestone itself).  Weight decay is folded into the gradient as an L2 term
and, by default, applies to every parameter including biases.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimConfig:
    kind: str = "sgd_nesterov"  # or "adam"
    lr0: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    milestones: list = field(default_factory=lambda: [100, 150])
    gamma: float = 0.1
    decay_all_params: bool = True  # weight decay on biases/norm params too

    def validate(self):
        if self.kind not in ("sgd_nesterov", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if any(b <= a for a, b in zip(self.milestones, self.milestones[1:])):
            raise ValueError("milestones must be strictly increasing")


class OptimState:
    """Per-parameter buffers: velocity (SGD) or moment estimates (Adam)."""

    def __init__(self, params):
        self.velocity = [np.zeros_like(p.data) for p in params]
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.step_count = 0


def lr_at(config, epoch):
    """Learning rate at an epoch: lr0 * gamma^(number of milestones <= epoch)."""
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    hits = sum(1 for m in config.milestones if m <= epoch)
    return config.lr0 * config.gamma ** hits


def sgd_step(params, state, lr, momentum=0.9, weight_decay=0.0,
             decay_mask=None):
    """Nesterov momentum update.

    Per parameter: g <- grad + wd*p, v <- momentum*v + g,
    p <- p - lr*(g + momentum*v).  With momentum=0 this is plain SGD.
    ``decay_mask`` (bool per parameter) restricts which parameters receive
    weight decay; None decays all of them.
    """
    for i, (p, vel) in enumerate(zip(params, state.velocity)):
        if p.grad is None:
            continue
        g = p.grad
        if weight_decay and (decay_mask is None or decay_mask[i]):
            g = g + weight_decay * p.data
        vel *= momentum
        vel += g
        p.data -= lr * (g + momentum * vel)
    state.step_count += 1


def adam_step(params, state, lr, betas=(0.9, 0.999), eps=1e-8,
              weight_decay=0.0, decay_mask=None):
    """Bias-corrected Adam update."""
    b1, b2 = betas
    state.step_count += 1
    t = state.step_count
    for i, (p, m, v) in enumerate(zip(params, state.m, state.v)):
        if p.grad is None:
            continue
        g = p.grad
        if weight_decay and (decay_mask is None or decay_mask[i]):
            g = g + weight_decay * p.data
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        p.data -= lr * mhat / (np.sqrt(vhat) + eps)
