"""Losses and first-order optimizers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import DimensionError, DomainError, ParameterSet

P_CLAMP = 1e-7


def weighted_binary_cross_entropy(p1: float, label: int, w1: float = 1.0, w2: float = 2.0) -> float:
    """``-(w1*label*log(p1) + w2*(1-label)*log(1-p1))`` with p1 clamped away from 0 and 1."""
    if not 0.0 <= p1 <= 1.0:
        raise DomainError(f"p1 must lie in [0, 1], got {p1}")
    if label not in (0, 1):
        raise DomainError(f"label must be 0 or 1, got {label}")
    if w1 <= 0 or w2 <= 0:
        raise DomainError("class weights must be positive")
    p = min(max(p1, P_CLAMP), 1.0 - P_CLAMP)
    return float(-(w1 * label * np.log(p) + w2 * (1 - label) * np.log(1.0 - p)))


def wbce_loss_and_grad(
    p: np.ndarray, labels: np.ndarray, w1: float = 1.0, w2: float = 2.0
) -> tuple[float, np.ndarray]:
    """Mean weighted BCE over a batch and its gradient w.r.t. ``p``."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).reshape(p.shape)
    if np.any((p < 0) | (p > 1)):
        raise DomainError("probabilities outside [0, 1]")
    pc = np.clip(p, P_CLAMP, 1.0 - P_CLAMP)
    losses = -(w1 * y * np.log(pc) + w2 * (1.0 - y) * np.log(1.0 - pc))
    inside = (p > P_CLAMP) & (p < 1.0 - P_CLAMP)
    grad = -(w1 * y / pc - w2 * (1.0 - y) / (1.0 - pc)) * inside / p.size
    return float(losses.mean()), grad


def mse_loss_and_grad(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


@dataclass
class OptimizerState:
    kind: str = "adam"
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if self.lr <= 0:
            raise DomainError("step size must be positive")


def make_optimizer(params: ParameterSet, kind: str = "adam", lr: float = 1e-4) -> OptimizerState:
    opt = OptimizerState(kind=kind, lr=lr)
    if kind == "adam":
        opt.m = {k: np.zeros_like(v) for k, v in params.items()}
        opt.v = {k: np.zeros_like(v) for k, v in params.items()}
    return opt


def optimizer_step(params: ParameterSet, grads: ParameterSet, opt: OptimizerState) -> ParameterSet:
    """Apply one descent step in place and bump the parameter version."""
    params.check_compatible(grads)
    opt.step += 1
    if opt.kind == "sgd":
        for name, arr in params.items():
            arr -= opt.lr * grads[name]
    else:
        b1, b2 = opt.beta1, opt.beta2
        c1 = 1.0 - b1**opt.step
        c2 = 1.0 - b2**opt.step
        for name, arr in params.items():
            g = grads[name]
            if name not in opt.m:
                opt.m[name] = np.zeros_like(arr)
                opt.v[name] = np.zeros_like(arr)
            if opt.m[name].shape != arr.shape:
                raise DimensionError(f"optimizer moments for {name!r} have wrong shape")
            m = opt.m[name]
            v = opt.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            arr -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    params.bump()
    return params
