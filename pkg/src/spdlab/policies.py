"""Policy abstractions: parametric softmax policies, joint-policy
marginalization and cooperation-degree mixtures."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Protocol

import numpy as np

from .numerics import (
    DimensionError,
    DomainError,
    Network,
    NetworkSpec,
    ParameterSet,
    dumps_params,
    loads_params,
    mlp_spec,
)


class Policy(Protocol):
    n_actions: int

    def action_distribution(self, obs: np.ndarray) -> np.ndarray: ...


def clamp_degree(value: float) -> float:
    return float(min(1.0, max(0.0, value)))


def sample_action(dist: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw with the fixed action ordering of ``dist``."""
    u = rng.random()
    return sample_with_uniform(dist, u)


def sample_with_uniform(dist: np.ndarray, u: float) -> int:
    """Inverse-CDF draw: the first index whose running sum exceeds ``u``."""
    # sequential sums, as np.cumsum computes them; a loop beats numpy at this size
    probs = dist.tolist() if isinstance(dist, np.ndarray) else list(dist)
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


class ParametricPolicy:
    """Softmax policy network over one agent's action set."""

    kind = "parametric"

    def __init__(self, network: Network, params: ParameterSet, game_id: str = ""):
        if not network.layers or network.layers[-1].describe()["kind"] != "softmax":
            raise DimensionError("policy network must end with a softmax head")
        self.network = network
        self.params = params
        self.game_id = game_id
        self.n_actions = network.out_dim

    @classmethod
    def create(cls, obs_size: int, n_actions: int, hidden=(64, 64), seed: int = 0, game_id: str = ""):
        net = Network(mlp_spec("actor", obs_size, hidden, n_actions, softmax_head=True, seed=seed))
        return cls(net, net.init_params(), game_id)

    def action_distribution(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape[-1] != self.network.in_dim:
            raise DimensionError(f"policy expects {self.network.in_dim} inputs, got {obs.shape}")
        return self.network.predict(self.params, obs)

    def describe(self) -> dict:
        return {"kind": "parametric", "game": self.game_id, "network": self.network.spec.to_dict()}


class JointPolicy:
    """One network over the joint action space, read as an (|A1|, |A2|) table.

    The network is fed agent 0's view; ``swap`` maps agent 1's observation
    into that view so each agent can marginalize from its own observation.
    """

    kind = "joint"

    def __init__(self, network: Network, params: ParameterSet, n1: int, n2: int, swap=None, game_id: str = ""):
        if network.out_dim != n1 * n2:
            raise DimensionError(f"joint head has {network.out_dim} outputs, need {n1 * n2}")
        self.network = network
        self.params = params
        self.n1, self.n2 = n1, n2
        self.swap = swap
        self.game_id = game_id
        self.n_actions = n1 * n2

    def action_distribution(self, obs: np.ndarray) -> np.ndarray:
        return self.network.predict(self.params, np.asarray(obs, dtype=np.float64))

    def joint_table(self, obs: np.ndarray) -> np.ndarray:
        p = self.action_distribution(obs)
        return p.reshape(p.shape[:-1] + (self.n1, self.n2))

    def marginal(self, agent: int) -> "MarginalPolicy":
        return MarginalPolicy(self, agent)


def marginalize(joint, agent: int, obs: np.ndarray | None = None) -> np.ndarray:
    """Sum joint probabilities over the other agent's actions.

    ``joint`` is either a :class:`JointPolicy` (evaluated at ``obs``, which
    must already be in agent 0's view) or an explicit (|A1|, |A2|) table.
    """
    if agent not in (0, 1):
        raise ValueError(f"agent must be 0 or 1, got {agent}")
    table = joint.joint_table(obs) if isinstance(joint, JointPolicy) else np.asarray(joint, dtype=np.float64)
    return table.sum(axis=-1) if agent == 0 else table.sum(axis=-2)


class MarginalPolicy:
    """Agent ``agent``'s individual policy extracted from a joint policy."""

    kind = "marginal"

    def __init__(self, joint: JointPolicy, agent: int):
        self.joint = joint
        self.agent = agent
        self.n_actions = joint.n1 if agent == 0 else joint.n2

    def action_distribution(self, obs: np.ndarray) -> np.ndarray:
        view = obs
        if self.agent == 1 and self.joint.swap is not None:
            view = self.joint.swap(obs)
        return marginalize(self.joint, self.agent, view)


class MixturePolicy:
    """Pointwise convex combination ``w * coop + (1 - w) * defect``."""

    kind = "mixture"

    def __init__(self, coop, defect, degree: float):
        if not 0.0 <= degree <= 1.0:
            raise DomainError(f"cooperation degree must lie in [0, 1], got {degree}")
        if coop.n_actions != defect.n_actions:
            raise DimensionError("mixture bases must share one action space")
        self.coop = coop
        self.defect = defect
        self.degree = float(degree)
        self.n_actions = coop.n_actions

    def action_distribution(self, obs: np.ndarray) -> np.ndarray:
        w = self.degree
        if w == 1.0:
            return self.coop.action_distribution(obs)
        if w == 0.0:
            return self.defect.action_distribution(obs)
        return w * self.coop.action_distribution(obs) + (1.0 - w) * self.defect.action_distribution(obs)

    def with_degree(self, degree: float) -> "MixturePolicy":
        return MixturePolicy(self.coop, self.defect, degree)


def mix(coop, defect, w_c: float) -> MixturePolicy:
    return MixturePolicy(coop, defect, w_c)


class FixedPolicy:
    """Observation-independent distribution; handy in tests and fixtures."""

    kind = "fixed"

    def __init__(self, probs):
        p = np.asarray(probs, dtype=np.float64)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise DomainError(f"not a probability vector: {probs}")
        p.flags.writeable = False
        self.probs = p
        self.n_actions = len(p)

    def action_distribution(self, obs: np.ndarray) -> np.ndarray:
        return self.probs


def network_from_dict(d: dict) -> Network:
    return Network(NetworkSpec.from_dict(d))


# -- bundles -------------------------------------------------------------------

BUNDLE_FORMAT = "spdlab-policy/1"


def _bundle_header(policy) -> tuple[dict, ParameterSet | None]:
    if isinstance(policy, ParametricPolicy):
        return {"kind": "parametric", "network": policy.network.spec.to_dict()}, policy.params
    if isinstance(policy, MarginalPolicy):
        j = policy.joint
        return ({"kind": "marginal", "agent": policy.agent, "n1": j.n1, "n2": j.n2,
                 "network": j.network.spec.to_dict()}, j.params)
    if getattr(policy, "kind", "") == "scripted":
        return dict(policy.describe()), None
    raise TypeError(f"cannot persist a {type(policy).__name__}")


def save_policy_bundle(path, policy, metadata: dict | None = None) -> None:
    """One file: 4-byte header length, JSON header, then the parameter blob."""
    header, params = _bundle_header(policy)
    header = {"format": BUNDLE_FORMAT, **header, "metadata": dict(metadata or {})}
    head = json.dumps(header, sort_keys=True).encode()
    blob = dumps_params(params) if params is not None else b""
    Path(path).write_bytes(len(head).to_bytes(4, "little") + head + blob)


def load_policy_bundle(path, env=None):
    """Inverse of :func:`save_policy_bundle`; scripted bundles need ``env``."""
    data = Path(path).read_bytes()
    size = int.from_bytes(data[:4], "little")
    header = json.loads(data[4 : 4 + size])
    if header.get("format") != BUNDLE_FORMAT:
        raise ValueError(f"unsupported policy bundle format {header.get('format')!r}")
    kind = header["kind"]
    game = header.get("metadata", {}).get("game", "")
    if kind == "scripted":
        from .envs.scripted import scripted_policy

        if env is None:
            raise ValueError("scripted bundles need the environment")
        return scripted_policy(env, int(header["role"]), header["mode"])
    params = loads_params(data[4 + size :])
    net = network_from_dict(header["network"])
    if kind == "parametric":
        return ParametricPolicy(net, params, game)
    if kind == "marginal":
        swap = env.swap_perspective if env is not None else None
        joint = JointPolicy(net, params, int(header["n1"]), int(header["n2"]), swap, game)
        return joint.marginal(int(header["agent"]))
    raise ValueError(f"unknown policy kind {kind!r}")


def bundle_metadata(path) -> dict:
    data = Path(path).read_bytes()
    size = int.from_bytes(data[:4], "little")
    return json.loads(data[4 : 4 + size])
