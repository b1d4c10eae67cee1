"""Sequential networks built from the layer primitives."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .layers import GRU, Dense, SoftmaxHead, Tape, layer_from_description
from .params import DimensionError, ParameterSet


class StaleTapeError(RuntimeError):
    """The parameters changed between forward and backward."""


@dataclass
class NetworkSpec:
    layers: list[dict[str, Any]]
    seed: int = 0

    def __post_init__(self):
        built = [layer_from_description(d) for d in self.layers]
        for prev, nxt in zip(built, built[1:]):
            if prev.out_dim != nxt.in_dim:
                raise DimensionError(
                    f"layer {nxt.name!r} expects {nxt.in_dim} inputs but "
                    f"{prev.name!r} produces {prev.out_dim}"
                )

    def to_dict(self) -> dict[str, Any]:
        return {"layers": [dict(d) for d in self.layers], "seed": int(self.seed)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "NetworkSpec":
        return cls([dict(x) for x in d["layers"]], int(d.get("seed", 0)))


def mlp_spec(
    prefix: str,
    n_in: int,
    hidden: Sequence[int],
    n_out: int,
    out_activation: str = "linear",
    softmax_head: bool = False,
    seed: int = 0,
    hidden_activation: str = "relu",
) -> NetworkSpec:
    layers: list[dict[str, Any]] = []
    dims = [n_in, *hidden]
    for i, (a, b) in enumerate(zip(dims, dims[1:])):
        layers.append({"kind": "dense", "name": f"{prefix}.h{i}", "n_in": a, "n_out": b,
                       "activation": hidden_activation})
    layers.append({"kind": "dense", "name": f"{prefix}.out", "n_in": dims[-1], "n_out": n_out,
                   "activation": out_activation})
    if softmax_head:
        layers.append({"kind": "softmax", "name": f"{prefix}.softmax", "classes": n_out})
    return NetworkSpec(layers, seed)


class Network:
    """A chain of layers; parameters live outside in a :class:`ParameterSet`."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self.layers: list[Dense | GRU | SoftmaxHead] = [
            layer_from_description(d) for d in spec.layers
        ]

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def init_params(self, seed: int | None = None) -> ParameterSet:
        rng = np.random.default_rng(self.spec.seed if seed is None else seed)
        arrays: dict[str, np.ndarray] = {}
        for layer in self.layers:
            arrays.update(layer.init(rng))
        return ParameterSet(arrays)

    def forward(self, params: ParameterSet, x: np.ndarray) -> tuple[np.ndarray, Tape]:
        x = np.asarray(x, dtype=np.float64)
        tape = Tape(id(params), params.version)
        for layer in self.layers:
            x, cache = layer.forward(params, x)
            tape.caches.append(cache)
        return x, tape

    def predict(self, params: ParameterSet, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            x, _ = layer.forward(params, x)
        return x

    def backward(
        self, params: ParameterSet, tape: Tape, upstream: np.ndarray
    ) -> tuple[ParameterSet, np.ndarray]:
        """Gradients of ``sum(upstream * output)`` w.r.t. parameters and input.

        Arrays in ``params`` that no layer of this network reads get zero
        gradients, so several networks may share one parameter set.
        """
        if tape.params_id != id(params) or tape.version != params.version:
            raise StaleTapeError(
                f"tape recorded at version {tape.version}, parameters now at {params.version}"
            )
        grads: dict[str, np.ndarray] = {}
        g = np.asarray(upstream, dtype=np.float64)
        for layer, cache in zip(reversed(self.layers), reversed(tape.caches)):
            lg, g = layer.backward(params, cache, g)
            grads.update(lg)
        out = {k: grads[k] if k in grads else np.zeros_like(v) for k, v in params.items()}
        return ParameterSet(out), g


def forward(net: Network, params: ParameterSet, x: np.ndarray):
    return net.forward(params, x)


def backward(net: Network, params: ParameterSet, tape: Tape, upstream: np.ndarray) -> ParameterSet:
    return net.backward(params, tape, upstream)[0]
