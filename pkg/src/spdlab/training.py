"""Offline baseline training with weighted target rewards.

Actor-critic with a replay-fed state-value critic, a soft-updated target
critic, and actor steps on the most recent transitions reweighted by the
truncated ratio between the current policy and the epsilon-greedy behaviour
that generated them.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .envs.base import TwoPlayerEnv
from .gamecore import derive_seed
from .numerics import (
    DimensionError,
    DomainError,
    Network,
    ParameterSet,
    make_optimizer,
    mlp_spec,
    mse_loss_and_grad,
    optimizer_step,
    soft_update,
)
from .policies import JointPolicy, ParametricPolicy, sample_with_uniform, save_policy_bundle


class TrainingDivergence(RuntimeError):
    pass


# -- weighted rewards --------------------------------------------------------------

def _check_attitude(att: float) -> float:
    if not 0.0 <= att <= 1.0:
        raise DomainError(f"attitude must lie in [0, 1], got {att}")
    return float(att)


def weighted_reward_iac(r_i: float, r_j: float, att_ij: float) -> float:
    """Agent i's training reward: its own reward plus att_ij times the other's."""
    return float(r_i + _check_attitude(att_ij) * r_j)


def weighted_reward_jac(rewards: Sequence[float], attitudes: Sequence[float]) -> float:
    """Joint training reward: attitude-weighted sum of the agents' rewards."""
    if len(rewards) != len(attitudes):
        raise DimensionError(f"{len(rewards)} rewards but {len(attitudes)} attitudes")
    total = 0.0
    for r, a in zip(rewards, attitudes):
        total += _check_attitude(a) * r
    return float(total)


@dataclass(frozen=True)
class AttitudeConfig:
    scheme: str
    values: tuple[float, float]

    def __post_init__(self):
        if self.scheme not in ("IAC", "JAC"):
            raise ValueError(f"scheme must be IAC or JAC, got {self.scheme!r}")
        for a in self.values:
            _check_attitude(a)

    @property
    def label(self) -> str:
        return f"{self.scheme.lower()}_{self.values[0]:g}_{self.values[1]:g}"

    def training_rewards(self, r: tuple[float, float]) -> tuple[float, float]:
        """Per-learner training reward; JAC has a single learner, repeated."""
        if self.scheme == "IAC":
            return (weighted_reward_iac(r[0], r[1], self.values[0]),
                    weighted_reward_iac(r[1], r[0], self.values[1]))
        total = weighted_reward_jac(r, self.values)
        return total, total


# -- schedule and replay ---------------------------------------------------------

@dataclass
class TrainingSchedule:
    episodes: int = 3000
    steps_per_episode: int = 100
    epsilon_start: float = 1.0
    epsilon_end: float = 0.1
    anneal_steps: int = 20000
    lr: float = 1e-4
    actor_lr: float | None = None
    batch: int = 128
    replay_capacity: int = 25000
    gamma: float = 0.99
    tau: float = 0.05
    update_every: int = 4
    hidden: tuple[int, ...] = (64, 64)
    log_every: int = 10

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.epsilon_end > self.epsilon_start:
            raise DomainError("exploration must anneal downward")
        positive = (self.episodes, self.steps_per_episode, self.anneal_steps, self.lr, self.batch,
                    self.replay_capacity, self.update_every, self.log_every)
        if any(v <= 0 for v in positive) or self.epsilon_end < 0:
            raise DomainError("schedule values must be positive")
        if not 0.0 <= self.tau <= 1.0 or not 0.0 <= self.gamma < 1.0:
            raise DomainError("tau must lie in [0, 1] and gamma in [0, 1)")

    @property
    def policy_lr(self) -> float:
        return self.lr if self.actor_lr is None else self.actor_lr

    @classmethod
    def for_game(cls, game: str, **overrides) -> "TrainingSchedule":
        """Per-game target cadence: soft update 0.05 every 4 steps, or 0.001 every step."""
        base = {"tau": 0.05, "update_every": 4} if game != "gathering" else {"tau": 0.001, "update_every": 1}
        base.update(overrides)
        return cls(**base)


def exploration_rate(schedule: TrainingSchedule, step: int) -> float:
    if step < 0:
        raise DomainError("step must be >= 0")
    frac = min(step / schedule.anneal_steps, 1.0)
    return schedule.epsilon_start + frac * (schedule.epsilon_end - schedule.epsilon_start)


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray
    behaviour: np.ndarray  # probability the behaviour policy gave the taken action

    def __len__(self) -> int:
        return len(self.actions)


class ReplayBuffer:
    """Fixed-capacity ring; the oldest transition is overwritten first."""

    def __init__(self, capacity: int, obs_size: int):
        if capacity < 1:
            raise DomainError("capacity must be >= 1")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_size))
        self.next_obs = np.zeros((capacity, obs_size))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.done = np.zeros(capacity)
        self.behaviour = np.ones(capacity)
        self.size = 0
        self.head = 0  # next slot to write
        self.added = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, action: int, reward: float, next_obs, done: bool, behaviour: float = 1.0) -> None:
        i = self.head
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.behaviour[i] = behaviour
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.added += 1

    def _take(self, idx: np.ndarray) -> Batch:
        return Batch(self.obs[idx], self.actions[idx], self.rewards[idx], self.next_obs[idx],
                     self.done[idx], self.behaviour[idx])

    def sample(self, rng: np.random.Generator, batch: int) -> Batch:
        if self.size == 0:
            raise DomainError("cannot sample an empty buffer")
        return self._take(rng.integers(self.size, size=batch))

    def recent(self, k: int) -> Batch:
        """The ``k`` most recent transitions, oldest first."""
        k = min(k, self.size)
        idx = (self.head - k + np.arange(k)) % self.capacity
        return self._take(idx)

    def ordered(self) -> Batch:
        return self.recent(self.size)


# -- learner ------------------------------------------------------------------------

@dataclass
class LossReport:
    critic_loss: float
    actor_loss: float
    mean_advantage: float


class ActorCriticLearner:
    """Softmax actor and scalar critic over one observation vector."""

    def __init__(self, obs_size: int, n_actions: int, schedule: TrainingSchedule | None = None,
                 seed: int = 0):
        self.schedule = schedule = schedule or TrainingSchedule()
        self.obs_size = obs_size
        self.n_actions = n_actions
        self.actor = Network(mlp_spec("actor", obs_size, schedule.hidden, n_actions,
                                      softmax_head=True, seed=derive_seed(seed, 0)))
        self.critic = Network(mlp_spec("critic", obs_size, schedule.hidden, 1, seed=derive_seed(seed, 1)))
        self.actor_params = self.actor.init_params()
        self.critic_params = self.critic.init_params()
        self.target_params = self.critic_params.copy()
        self.actor_opt = make_optimizer(self.actor_params, "adam", schedule.policy_lr)
        self.critic_opt = make_optimizer(self.critic_params, "adam", schedule.lr)
        self.updates = 0

    def policy(self, game_id: str = "") -> ParametricPolicy:
        return ParametricPolicy(self.actor, self.actor_params, game_id)

    def td_targets(self, batch: Batch) -> np.ndarray:
        v_next = self.critic.predict(self.target_params, batch.next_obs)[:, 0]
        return batch.rewards + self.schedule.gamma * (1.0 - batch.done) * v_next

    def critic_loss_and_grad(self, params: ParameterSet, batch: Batch,
                             targets: np.ndarray | None = None) -> tuple[float, ParameterSet]:
        """Mean squared TD error against a fixed target."""
        y = self.td_targets(batch) if targets is None else targets
        v, tape = self.critic.forward(params, batch.obs)
        loss, g = mse_loss_and_grad(v[:, 0], y)
        grads, _ = self.critic.backward(params, tape, g[:, None])
        return loss, grads

    def actor_loss_and_grad(self, params: ParameterSet, batch: Batch,
                            advantages: np.ndarray) -> tuple[float, ParameterSet]:
        """``-mean(rho * A * log pi(a|s))`` with rho = min(1, pi/mu) held fixed."""
        p, tape = self.actor.forward(params, batch.obs)
        rows = np.arange(len(batch))
        pa = p[rows, batch.actions]
        rho = np.minimum(1.0, pa / np.maximum(batch.behaviour, 1e-12))
        coef = rho * advantages / len(batch)
        loss = float(-np.sum(coef * np.log(np.maximum(pa, 1e-300))))
        g = np.zeros_like(p)
        g[rows, batch.actions] = -coef / np.maximum(pa, 1e-300)
        grads, _ = self.actor.backward(params, tape, g)
        return loss, grads

    def advantages(self, batch: Batch) -> np.ndarray:
        return self.td_targets(batch) - self.critic.predict(self.critic_params, batch.obs)[:, 0]

    def ac_update(self, critic_batch: Batch, actor_batch: Batch | None = None) -> LossReport:
        """One critic step, one actor step, then the scheduled target update."""
        actor_batch = critic_batch if actor_batch is None else actor_batch
        adv = self.advantages(actor_batch)
        a_loss, a_grads = self.actor_loss_and_grad(self.actor_params, actor_batch, adv)
        c_loss, c_grads = self.critic_loss_and_grad(self.critic_params, critic_batch)
        if not (np.isfinite(c_loss) and np.isfinite(a_loss)):
            raise TrainingDivergence(
                f"non-finite loss after {self.updates} updates: critic={c_loss}, actor={a_loss}, "
                f"max |advantage|={float(np.max(np.abs(adv)))}"
            )
        optimizer_step(self.critic_params, c_grads, self.critic_opt)
        # an all-zero actor gradient leaves the actor and its moments untouched
        if any(np.any(g) for g in a_grads.values()):
            optimizer_step(self.actor_params, a_grads, self.actor_opt)
        self.updates += 1
        soft_update(self.target_params, self.critic_params, self.schedule.tau)
        return LossReport(float(c_loss), float(a_loss), float(np.mean(adv)))


def act_epsilon_greedy(dist: np.ndarray, epsilon: float, u_explore: float, u_action: float) -> tuple[int, float]:
    """Action and its behaviour probability under epsilon-greedy over ``dist``."""
    n = len(dist)
    if u_explore < epsilon:
        a = min(int(u_action * n), n - 1)
    else:
        a = sample_with_uniform(dist, u_action)
    return a, float(epsilon / n + (1.0 - epsilon) * dist[a])


# -- training runs --------------------------------------------------------------------

@dataclass
class BaselineBundle:
    """Trained policies for both roles under one attitude setting."""

    setting: AttitudeConfig
    policies: tuple
    learners: list
    metrics: list[dict] = field(default_factory=list)

    def save(self, directory: str | Path, game_id: str) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for agent, pol in enumerate(self.policies):
            path = directory / f"{self.setting.label}_agent{agent}.policy"
            save_policy_bundle(path, pol, {"game": game_id, "agent": agent,
                                           "scheme": self.setting.scheme,
                                           "attitude": list(self.setting.values)})
            paths.append(path)
        return paths


def _train_setting(env: TwoPlayerEnv, setting: AttitudeConfig, schedule: TrainingSchedule,
                   seed: int) -> BaselineBundle:
    rng = np.random.default_rng(derive_seed(seed, 0))
    n = env.n_actions
    if setting.scheme == "JAC":
        learners = [ActorCriticLearner(env.obs_size, n * n, schedule, derive_seed(seed, 1))]
    else:
        learners = [ActorCriticLearner(env.obs_size, n, schedule, derive_seed(seed, 1 + i)) for i in (0, 1)]
    buffers = [ReplayBuffer(schedule.replay_capacity, env.obs_size) for _ in learners]
    step = 0
    metrics = []
    window = []
    reports: list[LossReport] = []
    for ep in range(schedule.episodes):
        res = env.reset(seed=derive_seed(seed, 1000, ep))
        obs = res.observations
        totals = np.zeros(2)
        for _ in range(min(schedule.steps_per_episode, env.max_steps)):
            eps = exploration_rate(schedule, step)
            u = rng.random(4)
            if setting.scheme == "JAC":
                dist = learners[0].actor.predict(learners[0].actor_params, obs[0])
                joint, mu = act_epsilon_greedy(dist, eps, u[0], u[1])
                acts = divmod(joint, n)
                picks = [(joint, mu)]
            else:
                picks = []
                for i in (0, 1):
                    dist = learners[i].actor.predict(learners[i].actor_params, obs[i])
                    picks.append(act_epsilon_greedy(dist, eps, u[2 * i], u[2 * i + 1]))
                acts = (picks[0][0], picks[1][0])
            res = env.step(acts)
            train_r = setting.training_rewards(res.rewards)
            for i, buf in enumerate(buffers):
                buf.add(obs[i], picks[i][0], train_r[i], res.observations[i], res.done, picks[i][1])
            totals += res.rewards
            obs = res.observations
            step += 1
            if step % schedule.update_every == 0 and len(buffers[0]) >= schedule.batch:
                for learner, buf in zip(learners, buffers):
                    try:
                        reports.append(learner.ac_update(buf.sample(rng, schedule.batch),
                                                         buf.recent(schedule.batch)))
                    except TrainingDivergence as exc:
                        raise TrainingDivergence(f"setting {setting.label}: {exc}") from exc
            if res.done:
                break
        window.append(totals)
        if (ep + 1) % schedule.log_every == 0 or ep + 1 == schedule.episodes:
            mean = np.mean(window, axis=0)
            metrics.append({
                "episode": ep + 1,
                "reward_1": float(mean[0]),
                "reward_2": float(mean[1]),
                "critic_loss": float(np.mean([r.critic_loss for r in reports])) if reports else float("nan"),
                "actor_loss": float(np.mean([r.actor_loss for r in reports])) if reports else float("nan"),
                "epsilon": exploration_rate(schedule, step),
            })
            window, reports = [], []
    if setting.scheme == "JAC":
        joint = JointPolicy(learners[0].actor, learners[0].actor_params, n, n,
                            swap=env.swap_perspective, game_id=env.game_id)
        policies = (joint.marginal(0), joint.marginal(1))
    else:
        policies = tuple(learner.policy(env.game_id) for learner in learners)
    return BaselineBundle(setting, policies, learners, metrics)


def train_baselines(env: TwoPlayerEnv, scheme: str, settings: Sequence[Sequence[float]],
                    schedule: TrainingSchedule | None = None, seed: int = 0,
                    out_dir: str | Path | None = None) -> dict[str, BaselineBundle]:
    """Train one bundle per attitude setting; deterministic given ``seed``.

    JAC trains a joint learner per attitude pair and extracts each agent's
    policy by marginalization. IAC trains one learner per agent.
    """
    schedule = schedule or TrainingSchedule.for_game(env.game_id)
    bundles = {}
    for k, values in enumerate(settings):
        setting = AttitudeConfig(scheme, tuple(float(v) for v in values))
        bundles[setting.label] = _train_setting(env, setting, schedule, derive_seed(seed, k))
    if out_dir is not None:
        write_training_outputs(out_dir, env, bundles, schedule, seed)
    return bundles


def write_training_outputs(out_dir: str | Path, env: TwoPlayerEnv, bundles: dict[str, BaselineBundle],
                           schedule: TrainingSchedule, seed: int, stamp: dict | None = None,
                           manifest_name: str = "manifest.json") -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = stamp or {}
    manifest = {"game": env.game_id, "env": env.describe(), "seed": seed,
                "schedule": {**asdict(schedule), "hidden": list(schedule.hidden)},
                "bundles": {}, **stamp}
    for label, bundle in bundles.items():
        paths = bundle.save(out, env.game_id)
        manifest["bundles"][label] = {"scheme": bundle.setting.scheme,
                                      "attitude": list(bundle.setting.values),
                                      "files": [p.name for p in paths]}
        with open(out / f"{label}_metrics.csv", "w", newline="") as fh:
            for key, value in stamp.items():
                fh.write(f"# {key}: {value}\n")
            writer = csv.DictWriter(fh, ["episode", "reward_1", "reward_2", "critic_loss",
                                         "actor_loss", "epsilon"], lineterminator="\n")
            writer.writeheader()
            for row in bundle.metrics:
                writer.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in row.items()})
    (out / manifest_name).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
