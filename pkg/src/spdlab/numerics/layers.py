"""Dense, gated-recurrent and softmax layers with hand-written backward passes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import expit

from .params import DimensionError, ParameterSet

ACTIVATIONS = ("linear", "relu", "tanh", "sigmoid")


def sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _activate(kind: str, a: np.ndarray) -> np.ndarray:
    if kind == "linear":
        return a
    if kind == "relu":
        return np.maximum(a, 0.0)
    if kind == "tanh":
        return np.tanh(a)
    if kind == "sigmoid":
        return sigmoid(a)
    raise ValueError(f"unknown activation {kind!r}")


def _activation_grad(kind: str, a: np.ndarray, y: np.ndarray, gy: np.ndarray) -> np.ndarray:
    if kind == "linear":
        return gy
    if kind == "relu":
        return gy * (a > 0)
    if kind == "tanh":
        return gy * (1.0 - y * y)
    if kind == "sigmoid":
        return gy * y * (1.0 - y)
    raise ValueError(f"unknown activation {kind!r}")


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class Dense:
    """Affine map over the last axis followed by an elementwise activation."""

    name: str
    n_in: int
    n_out: int
    activation: str = "linear"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.n_in

    @property
    def out_dim(self) -> int:
        return self.n_out

    def init(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        return {
            f"{self.name}.W": glorot_uniform(rng, self.n_in, self.n_out, (self.n_in, self.n_out)),
            f"{self.name}.b": np.zeros(self.n_out),
        }

    def forward(self, params: ParameterSet, x: np.ndarray):
        if x.shape[-1] != self.n_in:
            raise DimensionError(
                f"layer {self.name!r} expects last dim {self.n_in}, got {x.shape}"
            )
        a = x @ params[f"{self.name}.W"] + params[f"{self.name}.b"]
        y = _activate(self.activation, a)
        return y, (x, a, y)

    def backward(self, params: ParameterSet, cache, gy: np.ndarray):
        x, a, y = cache
        ga = _activation_grad(self.activation, a, y, gy)
        x2 = x.reshape(-1, self.n_in)
        ga2 = ga.reshape(-1, self.n_out)
        grads = {f"{self.name}.W": x2.T @ ga2, f"{self.name}.b": ga2.sum(axis=0)}
        gx = ga @ params[f"{self.name}.W"].T
        return grads, gx

    def describe(self) -> dict[str, Any]:
        return {"kind": "dense", "name": self.name, "n_in": self.n_in,
                "n_out": self.n_out, "activation": self.activation}


@dataclass
class SoftmaxHead:
    """Parameter-free softmax over the last axis."""

    name: str
    classes: int

    @property
    def in_dim(self) -> int:
        return self.classes

    @property
    def out_dim(self) -> int:
        return self.classes

    def init(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        return {}

    def forward(self, params: ParameterSet, x: np.ndarray):
        if x.shape[-1] != self.classes:
            raise DimensionError(
                f"layer {self.name!r} expects {self.classes} logits, got {x.shape}"
            )
        p = softmax(x)
        return p, p

    def backward(self, params: ParameterSet, cache, gy: np.ndarray):
        p = cache
        gx = p * (gy - np.sum(gy * p, axis=-1, keepdims=True))
        return {}, gx

    def describe(self) -> dict[str, Any]:
        return {"kind": "softmax", "name": self.name, "classes": self.classes}


@dataclass
class GRU:
    """Gated recurrent cell unrolled over a (batch, time, features) input.

    Returns the hidden state after the final timestep. Gate parameters are
    packed column-wise in update/reset/candidate order.
    """

    name: str
    n_in: int
    hidden: int

    @property
    def in_dim(self) -> int:
        return self.n_in

    @property
    def out_dim(self) -> int:
        return self.hidden

    def init(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        h = self.hidden
        return {
            f"{self.name}.W": glorot_uniform(rng, self.n_in, h, (self.n_in, 3 * h)),
            f"{self.name}.U": glorot_uniform(rng, h, h, (h, 3 * h)),
            f"{self.name}.b": np.zeros(3 * h),
        }

    def forward(self, params: ParameterSet, x: np.ndarray):
        if x.ndim != 3 or x.shape[-1] != self.n_in:
            raise DimensionError(
                f"layer {self.name!r} expects (batch, time, {self.n_in}), got {x.shape}"
            )
        W = params[f"{self.name}.W"]
        U = params[f"{self.name}.U"]
        b = params[f"{self.name}.b"]
        H = self.hidden
        B, T, _ = x.shape
        xw = x @ W + b  # (B, T, 3H)
        h = np.zeros((B, H))
        steps = []
        for t in range(T):
            hu = h @ U[:, : 2 * H]
            z = sigmoid(xw[:, t, :H] + hu[:, :H])
            r = sigmoid(xw[:, t, H : 2 * H] + hu[:, H:])
            rh = r * h
            n = np.tanh(xw[:, t, 2 * H :] + rh @ U[:, 2 * H :])
            h_new = (1.0 - z) * n + z * h
            steps.append((h, z, r, rh, n))
            h = h_new
        return h, (x, steps)

    def backward(self, params: ParameterSet, cache, gy: np.ndarray):
        x, steps = cache
        W = params[f"{self.name}.W"]
        U = params[f"{self.name}.U"]
        H = self.hidden
        B, T, _ = x.shape
        gW = np.zeros_like(W)
        gU = np.zeros_like(U)
        gb = np.zeros(3 * H)
        gx = np.zeros_like(x)
        gh = gy
        for t in range(T - 1, -1, -1):
            h, z, r, rh, n = steps[t]
            gz = gh * (h - n)
            gn = gh * (1.0 - z)
            gh_prev = gh * z
            gan = gn * (1.0 - n * n)
            gU[:, 2 * H :] += rh.T @ gan
            grh = gan @ U[:, 2 * H :].T
            gr = grh * h
            gh_prev += grh * r
            gaz = gz * z * (1.0 - z)
            gar = gr * r * (1.0 - r)
            gzr = np.concatenate([gaz, gar], axis=1)
            gU[:, : 2 * H] += h.T @ gzr
            gh_prev += gzr @ U[:, : 2 * H].T
            gall = np.concatenate([gaz, gar, gan], axis=1)
            gW += x[:, t, :].T @ gall
            gb += gall.sum(axis=0)
            gx[:, t, :] = gall @ W.T
            gh = gh_prev
        grads = {f"{self.name}.W": gW, f"{self.name}.U": gU, f"{self.name}.b": gb}
        return grads, gx

    def describe(self) -> dict[str, Any]:
        return {"kind": "gru", "name": self.name, "n_in": self.n_in, "hidden": self.hidden}


def layer_from_description(desc: dict[str, Any]):
    kind = desc["kind"]
    if kind == "dense":
        return Dense(desc["name"], int(desc["n_in"]), int(desc["n_out"]), desc.get("activation", "linear"))
    if kind == "softmax":
        return SoftmaxHead(desc["name"], int(desc["classes"]))
    if kind == "gru":
        return GRU(desc["name"], int(desc["n_in"]), int(desc["hidden"]))
    raise ValueError(f"unknown layer kind {kind!r}")


@dataclass
class Tape:
    """Activation record produced by :func:`forward`."""

    params_id: int
    version: int
    caches: list = field(default_factory=list)
