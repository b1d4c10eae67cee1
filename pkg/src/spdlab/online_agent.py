"""Reciprocal online adaptation: detect, smooth, add the reciprocation level,
and act with the resulting policy mixture."""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .detector import CalibrationTable, DetectorModel, calibrated_value, pad_window
from .envs.base import TwoPlayerEnv
from .gamecore import derive_seed
from .numerics import DomainError
from .policies import MixturePolicy, clamp_degree, mix, sample_with_uniform


# -- degree estimators -------------------------------------------------------------

class TrainedDetector:
    """Raw detector score mapped through the calibration table.

    The mapped value is left unclamped; the agent clamps after smoothing.
    """

    def __init__(self, model: DetectorModel, table: CalibrationTable):
        self.model = model
        self.table = table

    @property
    def n(self) -> int:
        return self.model.n

    def estimate(self, window: Sequence[np.ndarray], own_degree: float) -> tuple[float, float]:
        raw = float(self.model.scores(pad_window(window, self.model.n)[None])[0])
        return raw, calibrated_value(self.table, own_degree, raw)


def true_degree(policy) -> float:
    """The cooperation degree a policy is actually playing."""
    if hasattr(policy, "current_degree"):
        return float(policy.current_degree())
    if isinstance(policy, MixturePolicy):
        return policy.degree
    mode = getattr(policy, "mode", None)
    if mode is not None:
        return 1.0 if mode == "cooperate" else 0.0
    raise TypeError(f"no known cooperation degree for {type(policy).__name__}")


class OracleDetector:
    """Reads the opponent's true degree; isolates the online loop from detection error."""

    def __init__(self, opponent=None, n: int = 1):
        self.opponent = opponent
        self.n = n

    def estimate(self, window, own_degree: float) -> tuple[float, float]:
        if self.opponent is None:
            raise DomainError("oracle detector is not bound to an opponent")
        d = true_degree(self.opponent)
        return d, d


# -- adaptive agent ------------------------------------------------------------------

@dataclass
class AgentConfig:
    n: int = 8
    alpha: float = 1.0
    delta: float = 0.1
    initial_degree: float = 0.5
    literal_update: bool = False
    reset_window_each_episode: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.delta < 0:
            raise DomainError("delta must be >= 0")
        if self.n < 1:
            raise DomainError("window length must be >= 1")
        self.initial_degree = clamp_degree(self.initial_degree)


def smooth(previous: float, detected: float, alpha: float) -> float:
    return clamp_degree((1.0 - alpha) * previous + alpha * detected)


class AdaptiveAgent:
    """Generalized tit-for-tat over cooperation degrees.

    Default update: ``signal <- (1 - alpha) * signal + alpha * detected``,
    ``smoothed = clamp(signal)`` and ``own = min(1, smoothed + delta)``.
    The signal itself is not clamped, so clamping does not bias the average
    of noisy detections. With ``literal_update`` the own degree is smoothed
    directly toward the clamped detection and no offset is added.
    """

    def __init__(self, coop, defect, estimator, config: AgentConfig | None = None):
        self.config = config or AgentConfig()
        self.coop = coop
        self.defect = defect
        self.estimator = estimator
        self.n_actions = coop.n_actions
        self.window: deque = deque(maxlen=self.config.n)
        self.own_degree = self.config.initial_degree
        self.smoothed = self.config.initial_degree
        self.signal = self.config.initial_degree
        self.detected = float("nan")
        self.raw = float("nan")

    def current_degree(self) -> float:
        return self.own_degree

    def start_episode(self) -> None:
        if self.config.reset_window_each_episode:
            self.window.clear()

    def observe(self, observation: np.ndarray) -> None:
        self.window.append(np.asarray(observation))

    def detect(self) -> float:
        if not self.window:
            raise DomainError("no observations to detect from")
        self.raw, self.detected = self.estimator.estimate(list(self.window), self.own_degree)
        return self.detected

    def apply(self, detected: float | None = None) -> float:
        d = self.detected if detected is None else detected
        cfg = self.config
        if cfg.literal_update:
            self.own_degree = smooth(self.own_degree, clamp_degree(d), cfg.alpha)
            self.smoothed = self.signal = self.own_degree
        else:
            self.signal = (1.0 - cfg.alpha) * self.signal + cfg.alpha * d
            self.smoothed = clamp_degree(self.signal)
            self.own_degree = clamp_degree(self.smoothed + cfg.delta)
        return self.own_degree

    def update_degree(self) -> float:
        self.detect()
        return self.apply()

    def policy(self) -> MixturePolicy:
        return mix(self.coop, self.defect, self.own_degree)

    def action_distribution(self, obs: np.ndarray) -> np.ndarray:
        return self.policy().action_distribution(obs)

    def act(self, obs: np.ndarray, rng: np.random.Generator) -> int:
        return sample_with_uniform(self.action_distribution(obs), rng.random())


# -- opponents ----------------------------------------------------------------------

@dataclass
class SwitchingOpponentSpec:
    """Alternates cooperative and defecting baselines every ``period`` units."""

    coop: Any
    defect: Any
    period: int
    unit: str = "episodes"
    start: str = "cooperate"

    def __post_init__(self):
        if self.period < 1:
            raise DomainError("switch period must be >= 1")
        if self.unit not in ("episodes", "steps"):
            raise ValueError(f"unit must be 'episodes' or 'steps', got {self.unit!r}")
        if self.start not in ("cooperate", "defect"):
            raise ValueError("start must be 'cooperate' or 'defect'")


class SwitchingOpponent:
    def __init__(self, spec: SwitchingOpponentSpec):
        self.spec = spec
        self.n_actions = spec.coop.n_actions
        self.episode = 0
        self.global_step = 0

    def phase(self) -> str:
        counter = self.episode if self.spec.unit == "episodes" else self.global_step
        flip = (counter // self.spec.period) % 2 == 1
        if self.spec.start == "cooperate":
            return "defect" if flip else "cooperate"
        return "cooperate" if flip else "defect"

    def current_degree(self) -> float:
        return 1.0 if self.phase() == "cooperate" else 0.0

    def action_distribution(self, obs: np.ndarray) -> np.ndarray:
        pol = self.spec.coop if self.phase() == "cooperate" else self.spec.defect
        return pol.action_distribution(obs)


def _degree_or_nan(player) -> float:
    try:
        return true_degree(player)
    except TypeError:
        return float("nan")


def _phase_of(player) -> str:
    if isinstance(player, SwitchingOpponent):
        return player.phase()
    try:
        return f"{true_degree(player):g}"
    except TypeError:
        return ""


# -- matches -------------------------------------------------------------------------

LOG_COLUMNS = ("episode", "step", "reward_1", "reward_2", "detected_cd", "smoothed_cd",
               "own_cd", "opponent_phase")


@dataclass
class MatchLog:
    rows: list[dict] = field(default_factory=list)
    # per-agent degree traces for self-play: (episode, step, cd_1, cd_2)
    degrees: list[tuple[int, int, float, float]] = field(default_factory=list)
    # clamped per-step detections of each adaptive player (nan otherwise)
    detections: list[tuple[float, float]] = field(default_factory=list)

    def episode_table(self) -> dict[str, np.ndarray]:
        """Per-episode reward sums and mean degrees."""
        eps = sorted({r["episode"] for r in self.rows})
        out = {k: np.zeros(len(eps)) for k in ("reward_1", "reward_2", "own_cd", "other_cd")}
        by_ep: dict[int, list] = {e: [] for e in eps}
        for r in self.rows:
            by_ep[r["episode"]].append(r)
        deg_by_ep: dict[int, list] = {e: [] for e in eps}
        for e, _s, c1, c2 in self.degrees:
            deg_by_ep[e].append((c1, c2))
        for i, e in enumerate(eps):
            rs = by_ep[e]
            out["reward_1"][i] = sum(r["reward_1"] for r in rs)
            out["reward_2"][i] = sum(r["reward_2"] for r in rs)
            out["own_cd"][i] = np.mean([r["own_cd"] for r in rs])
            if deg_by_ep[e]:
                out["other_cd"][i] = np.mean([c2 for _, c2 in deg_by_ep[e]])
            else:
                out["other_cd"][i] = np.nan
        return out

    def to_csv(self, path: str | Path, stamp: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            for key, value in (stamp or {}).items():
                fh.write(f"# {key}: {value}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(r[c]) for c in LOG_COLUMNS])


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if np.isnan(v) else repr(round(v, 12))
    return str(v)


def run_match(
    env: TwoPlayerEnv,
    agent,
    opponent,
    episodes: int,
    seed: int = 0,
    agent_role: int = 0,
    max_steps: int | None = None,
) -> MatchLog:
    """Play ``episodes`` episodes between ``agent`` and ``opponent``.

    Either side may be an :class:`AdaptiveAgent`; adaptive players detect and
    update every step before acting, and simultaneous updates read the other
    side's degree from before the step. The opponent may be a policy, an
    adaptive agent or a :class:`SwitchingOpponentSpec`.
    """
    if episodes < 1:
        raise DomainError("episodes must be >= 1")
    if isinstance(opponent, SwitchingOpponentSpec):
        opponent = SwitchingOpponent(opponent)
    players = [None, None]
    players[agent_role] = agent
    players[1 - agent_role] = opponent
    for p, other in ((agent, opponent), (opponent, agent)):
        est = getattr(p, "estimator", None)
        if isinstance(est, OracleDetector) and est.opponent is None:
            est.opponent = other
    adaptive = [isinstance(p, AdaptiveAgent) for p in players]
    limit = env.max_steps if max_steps is None else min(max_steps, env.max_steps)
    log = MatchLog()
    for ep in range(episodes):
        rng = np.random.default_rng(derive_seed(seed, ep))
        res = env.reset(rng=rng)
        obs = res.observations
        for i, p in enumerate(players):
            if adaptive[i]:
                p.start_episode()
            if isinstance(p, SwitchingOpponent):
                p.episode = ep
        for t in range(limit):
            for i, p in enumerate(players):
                if adaptive[i]:
                    p.observe(obs[i])
            detections = [p.detect() if adaptive[i] else None for i, p in enumerate(players)]
            for i, p in enumerate(players):
                if adaptive[i]:
                    p.apply(detections[i])
            phase = _phase_of(opponent)
            u = rng.random(2)
            acts = tuple(sample_with_uniform(players[i].action_distribution(obs[i]), u[i]) for i in (0, 1))
            res = env.step(acts)
            me = agent
            log.rows.append({
                "episode": ep,
                "step": t,
                "reward_1": float(res.rewards[0]),
                "reward_2": float(res.rewards[1]),
                "detected_cd": clamp_degree(me.detected) if isinstance(me, AdaptiveAgent) else float("nan"),
                "smoothed_cd": me.smoothed if isinstance(me, AdaptiveAgent) else float("nan"),
                "own_cd": _degree_or_nan(me),
                "opponent_phase": phase,
            })
            log.degrees.append((ep, t, _degree_or_nan(players[0]), _degree_or_nan(players[1])))
            log.detections.append(tuple(clamp_degree(d) if d is not None else float("nan")
                                        for d in detections))
            for p in players:
                if isinstance(p, SwitchingOpponent):
                    p.global_step += 1
            obs = res.observations
            if res.done:
                break
    return log
