"""Markov-game rollouts, Monte-Carlo payoffs and the SPD verifier."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .envs.base import TwoPlayerEnv
from .numerics import DimensionError, DomainError
from .policies import sample_with_uniform

TRAJECTORY_FORMAT = "spdlab-trajectory/1"


def derive_seed(root: int, *keys: int) -> int:
    """Stable 63-bit child seed for (root, keys...)."""
    ss = np.random.SeedSequence([int(root) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return int((int(hi) << 32 | int(lo)) & 0x7FFFFFFFFFFFFFFF)


@dataclass
class StepRecord:
    state: Any
    observations: tuple[np.ndarray, np.ndarray]
    actions: tuple[int, int]
    rewards: tuple[float, float]


@dataclass
class Trajectory:
    game: str
    seed: int
    records: list[StepRecord] = field(default_factory=list)
    final_state: Any = None
    final_observations: tuple[np.ndarray, np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.records)

    def rewards(self) -> np.ndarray:
        return np.array([r.rewards for r in self.records], dtype=np.float64).reshape(-1, 2)

    def observations(self, agent: int) -> np.ndarray:
        """Observation sequence s_0..s_T seen by ``agent`` (includes the final state)."""
        obs = [r.observations[agent] for r in self.records]
        if self.final_observations is not None:
            obs.append(self.final_observations[agent])
        return np.stack(obs)

    def discounted_returns(self, gamma: float) -> np.ndarray:
        """Sum of gamma^t r_t, accumulated step by step like the batch kernels."""
        out = [0.0, 0.0]
        disc = 1.0
        for rec in self.records:
            out[0] += disc * rec.rewards[0]
            out[1] += disc * rec.rewards[1]
            disc *= gamma
        return np.array(out)


def _check_policy(env: TwoPlayerEnv, policy, agent: int) -> None:
    if getattr(policy, "n_actions", env.n_actions) != env.n_actions:
        raise DimensionError(
            f"policy for agent {agent} has {policy.n_actions} actions, env has {env.n_actions}"
        )


def _play(env: TwoPlayerEnv, policy1, policy2, max_steps: int | None, seed: int,
          traj: Trajectory | None, gamma: float = 1.0) -> tuple[float, float]:
    """Run one episode, appending to ``traj`` when given; returns discounted rewards."""
    rng = np.random.default_rng(seed)
    res = env.reset(rng=rng)
    limit = env.max_steps if max_steps is None else min(max_steps, env.max_steps)
    state, obs = res.state, res.observations
    dist1, dist2, step = policy1.action_distribution, policy2.action_distribution, env.step
    ret0 = ret1 = 0.0
    disc = 1.0
    # the env never touches the RNG after reset, so drawing every uniform up front keeps the stream
    for u0, u1 in rng.random((limit, 2)).tolist():
        acts = (sample_with_uniform(dist1(obs[0]), u0), sample_with_uniform(dist2(obs[1]), u1))
        res = step(acts)
        r0, r1 = res.rewards
        if not (math.isfinite(r0) and math.isfinite(r1)):
            raise DomainError("non-finite reward")
        if traj is not None:
            traj.records.append(StepRecord(state, obs, acts, res.rewards))
        ret0 += disc * r0
        ret1 += disc * r1
        disc *= gamma
        state, obs = res.state, res.observations
        if res.done:
            break
    if traj is not None:
        traj.final_state = state
        traj.final_observations = obs
    return ret0, ret1


def rollout(env: TwoPlayerEnv, policy1, policy2, max_steps: int | None = None, seed: int = 0) -> Trajectory:
    """Sample one episode; each step draws one uniform per agent from the episode RNG."""
    _check_policy(env, policy1, 0)
    _check_policy(env, policy2, 1)
    traj = Trajectory(env.game_id, int(seed))
    _play(env, policy1, policy2, max_steps, seed, traj)
    return traj


@dataclass
class ValueEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    returns: np.ndarray

    @property
    def episodes(self) -> int:
        return len(self.returns)


def summarize_returns(returns: np.ndarray) -> ValueEstimate:
    returns = np.asarray(returns, dtype=np.float64).reshape(-1, 2)
    n = len(returns)
    mean = returns.mean(axis=0)
    se = returns.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(2)
    return ValueEstimate(mean, se, returns)


def estimate_value(
    env: TwoPlayerEnv,
    policies: Sequence,
    gamma: float = 0.99,
    episodes: int = 100,
    seed: int = 0,
    max_steps: int | None = None,
) -> ValueEstimate:
    """Mean discounted return per agent over independent seeded episodes."""
    if episodes < 1:
        raise DomainError("episodes must be >= 1")
    if not 0.0 <= gamma < 1.0:
        raise DomainError(f"gamma must lie in [0, 1), got {gamma}")
    p1, p2 = policies
    _check_policy(env, p1, 0)
    _check_policy(env, p2, 1)
    returns = np.empty((episodes, 2))
    for k in range(episodes):
        returns[k] = _play(env, p1, p2, max_steps, derive_seed(seed, k), None, gamma)
    return summarize_returns(returns)


@dataclass
class EmpiricalPayoffMatrix:
    R: float
    P: float
    S: float
    T: float
    se: dict[str, float] = field(default_factory=dict)
    episodes: int = 0
    start: str = "reset distribution"
    discrepancy: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {"R": self.R, "P": self.P, "S": self.S, "T": self.T, "se": dict(self.se),
                "episodes": self.episodes, "start": self.start, "discrepancy": dict(self.discrepancy)}


def payoff_matrix_from_values(cc: ValueEstimate, dd: ValueEstimate, cd: ValueEstimate, dc: ValueEstimate,
                              start: str = "reset distribution") -> EmpiricalPayoffMatrix:
    """Combine the four pairings, averaging the two agents' views of each entry.

    ``cd`` is (agent 0 cooperates, agent 1 defects); ``dc`` the reverse.
    """
    def same_episodes(est: ValueEstimate) -> tuple[float, float, float]:
        per_ep = est.returns.mean(axis=1)
        se = float(per_ep.std(ddof=1) / np.sqrt(len(per_ep))) if len(per_ep) > 1 else 0.0
        return float(per_ep.mean()), se, float(abs(est.mean[0] - est.mean[1]))

    def cross(a: float, sa: float, b: float, sb: float) -> tuple[float, float, float]:
        return float(0.5 * (a + b)), 0.5 * float(np.hypot(sa, sb)), float(abs(a - b))

    R, seR, dR = same_episodes(cc)
    P, seP, dP = same_episodes(dd)
    S, seS, dS = cross(cd.mean[0], cd.stderr[0], dc.mean[1], dc.stderr[1])
    T, seT, dT = cross(dc.mean[0], dc.stderr[0], cd.mean[1], cd.stderr[1])
    return EmpiricalPayoffMatrix(
        R, P, S, T,
        se={"R": seR, "P": seP, "S": seS, "T": seT},
        episodes=cc.episodes,
        start=start,
        discrepancy={"R": dR, "P": dP, "S": dS, "T": dT},
    )


def induce_payoff_matrix(
    env: TwoPlayerEnv,
    coop: Sequence,
    defect: Sequence,
    gamma: float = 0.99,
    episodes: int = 200,
    seed: int = 0,
) -> EmpiricalPayoffMatrix:
    """Empirical (R, P, S, T) from the four baseline pairings.

    ``coop`` and ``defect`` are per-role policy pairs; the caller asserts
    ``coop`` is the more cooperative one.
    """
    pairs = {
        "cc": (coop[0], coop[1]),
        "dd": (defect[0], defect[1]),
        "cd": (coop[0], defect[1]),
        "dc": (defect[0], coop[1]),
    }
    est = {k: estimate_value(env, p, gamma, episodes, derive_seed(seed, i))
           for i, (k, p) in enumerate(pairs.items())}
    return payoff_matrix_from_values(est["cc"], est["dd"], est["cd"], est["dc"])


INEQUALITIES = ("R>P", "R>S", "2R>S+T", "T>R", "P>S")


@dataclass
class SpdVerdict:
    margins: dict[str, float]
    holds: dict[str, bool]
    overall: bool

    def as_dict(self) -> dict[str, Any]:
        return {"margins": dict(self.margins), "holds": dict(self.holds), "overall": self.overall}


def check_spd(m: EmpiricalPayoffMatrix) -> SpdVerdict:
    margins = {
        "R>P": m.R - m.P,
        "R>S": m.R - m.S,
        "2R>S+T": 2 * m.R - (m.S + m.T),
        "T>R": m.T - m.R,
        "P>S": m.P - m.S,
    }
    holds = {k: bool(v > 0) for k, v in margins.items()}
    return SpdVerdict(margins, holds, all(holds.values()))


# -- trajectory files -------------------------------------------------------

def _state_to_jsonable(state: Any) -> Any:
    if hasattr(state, "__dataclass_fields__"):
        return {k: _state_to_jsonable(getattr(state, k)) for k in state.__dataclass_fields__}
    if isinstance(state, (frozenset, set)):
        return sorted(_state_to_jsonable(x) for x in state)
    if isinstance(state, (tuple, list)):
        return [_state_to_jsonable(x) for x in state]
    if isinstance(state, (np.integer,)):
        return int(state)
    if isinstance(state, (np.floating,)):
        return float(state)
    return state


def write_trajectory(traj: Trajectory, env: TwoPlayerEnv, path: str | Path) -> None:
    """JSON-lines file: one header line, then one record per step.

    Observations are not stored; they are a pure function of the state and
    are recomputed by ``env.observe`` on load.
    """
    header = {
        "format": TRAJECTORY_FORMAT,
        "game": env.game_id,
        "grid": list(env.obs_shape[1:]) if len(env.obs_shape) == 3 else list(env.obs_shape),
        "channels": list(env.channels),
        "actions": list(env.action_names),
        "seed": traj.seed,
        "steps": len(traj),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for t, rec in enumerate(traj.records):
            row = {"t": t, "state": _state_to_jsonable(rec.state),
                   "actions": list(rec.actions), "rewards": [float(x) for x in rec.rewards]}
            fh.write(json.dumps(row, sort_keys=True) + "\n")
        fh.write(json.dumps({"final_state": _state_to_jsonable(traj.final_state)}, sort_keys=True) + "\n")


def read_trajectory(path: str | Path) -> tuple[dict, list[dict], dict]:
    with open(path, encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    header = lines[0]
    if header.get("format") != TRAJECTORY_FORMAT:
        raise ValueError(f"unsupported trajectory format {header.get('format')!r}")
    return header, lines[1:-1], lines[-1]


def replay_trajectory(env: TwoPlayerEnv, path: str | Path) -> tuple[bool, list[dict]]:
    """Re-simulate a trajectory file from its seed and recorded actions.

    Returns whether every state, reward and the final state matched, plus
    one row per step with the re-simulated rewards and a match flag.
    """
    header, records, final = read_trajectory(path)
    if header["game"] != env.game_id:
        raise ValueError(f"trajectory is for {header['game']!r}, env is {env.game_id!r}")
    rng = np.random.default_rng(header["seed"])
    res = env.reset(rng=rng)
    rows = []
    ok = True
    for rec in records:
        rng.random(2)  # keep the stream aligned with rollout
        same_state = _state_to_jsonable(res.state) == rec["state"]
        res = env.step(tuple(rec["actions"]))
        rewards = [float(x) for x in res.rewards]
        match = same_state and rewards == rec["rewards"]
        ok = ok and match
        rows.append({"t": rec["t"], "action_1": rec["actions"][0], "action_2": rec["actions"][1],
                     "reward_1": rewards[0], "reward_2": rewards[1], "match": match})
    ok = ok and _state_to_jsonable(res.state) == final.get("final_state")
    return ok, rows
