"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .params import ParameterSet

LossFn = Callable[[ParameterSet], float]
GradFn = Callable[[ParameterSet], ParameterSet]


@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    per_param: dict[str, float] = field(default_factory=dict)
    checked: int = 0


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    # below the floor, central differences at h=1e-5 are dominated by float64 roundoff
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def gradient_check(
    params: ParameterSet,
    loss_fn: LossFn,
    grad_fn: GradFn,
    tolerance: float = 1e-4,
    h: float = 1e-5,
    max_per_param: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare ``grad_fn`` against central differences of ``loss_fn``.

    Entries are perturbed in place and restored afterwards. With
    ``max_per_param`` set, a random subset of entries per array is probed.
    """
    analytic = grad_fn(params)
    report = GradCheckReport(0.0, True)
    rng = rng or np.random.default_rng(0)
    for name, arr in params.items():
        flat = arr.reshape(-1)
        idx = np.arange(flat.size)
        if max_per_param is not None and flat.size > max_per_param:
            idx = rng.choice(flat.size, size=max_per_param, replace=False)
        num = np.empty(len(idx))
        for j, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + h
            fp = loss_fn(params)
            flat[i] = old - h
            fm = loss_fn(params)
            flat[i] = old
            num[j] = (fp - fm) / (2.0 * h)
        ana = analytic[name].reshape(-1)[idx]
        err = float(relative_error(ana, num).max()) if len(idx) else 0.0
        report.per_param[name] = err
        report.max_rel_err = max(report.max_rel_err, err)
        report.checked += len(idx)
    report.passed = bool(report.max_rel_err < tolerance)
    return report


def network_gradient_check(net, params: ParameterSet, x: np.ndarray, loss_and_grad, **kw) -> GradCheckReport:
    """Gradient check for ``loss(net(x))`` where ``loss_and_grad(out) -> (loss, dout)``."""

    def loss_fn(p):
        return loss_and_grad(net.predict(p, x))[0]

    def grad_fn(p):
        out, tape = net.forward(p, x)
        _, g = loss_and_grad(out)
        return net.backward(p, tape, g)[0]

    return gradient_check(params, loss_fn, grad_fn, **kw)
