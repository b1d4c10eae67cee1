"""Shared environment types."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np


class GridPos(NamedTuple):
    row: int
    col: int


@dataclass(slots=True)
class StepResult:
    state: Any
    observations: tuple[np.ndarray, np.ndarray]
    rewards: tuple[float, float]
    done: bool
    info: dict[str, Any] = field(default_factory=dict)


class InvalidActionError(ValueError):
    """An action outside the game's action set."""


class TwoPlayerEnv:
    """Common interface for the two-player Markov games.

    Subclasses implement ``initial_state``, ``transition`` and ``observe`` as
    pure functions; this base keeps the current state for convenience.
    """

    game_id: str = ""
    n_agents = 2
    action_names: tuple[str, ...] = ()
    channels: tuple[str, ...] = ()
    max_steps: int = 100

    def __init__(self):
        self.state = None

    @property
    def n_actions(self) -> int:
        return len(self.action_names)

    @property
    def obs_shape(self) -> tuple[int, ...]:
        raise NotImplementedError

    @property
    def obs_size(self) -> int:
        return int(np.prod(self.obs_shape))

    def initial_state(self, rng: np.random.Generator):
        raise NotImplementedError

    def transition(self, state, actions) -> tuple[Any, tuple[float, float], bool, dict]:
        raise NotImplementedError

    def observe(self, state, agent: int) -> np.ndarray:
        raise NotImplementedError

    def swap_perspective(self, obs: np.ndarray) -> np.ndarray:
        """Map agent 1's observation to the equivalent view from agent 0's seat."""
        raise NotImplementedError

    def observation_symmetries(self) -> list[np.ndarray]:
        """Index maps of flat observations that preserve episode probabilities."""
        return [np.arange(self.obs_size)]

    def check_actions(self, actions) -> tuple[int, int]:
        if len(actions) != 2:
            raise InvalidActionError(f"need one action per agent, got {actions!r}")
        a0, a1 = int(actions[0]), int(actions[1])
        n = self.n_actions
        for a in (a0, a1):
            if not 0 <= a < n:
                raise InvalidActionError(f"action {a} outside {self.game_id} action set of size {n}")
        return a0, a1

    def reset(self, seed: int | None = None, rng: np.random.Generator | None = None) -> StepResult:
        if rng is None:
            rng = np.random.default_rng(seed)
        self.state = self.initial_state(rng)
        obs = (self.observe(self.state, 0), self.observe(self.state, 1))
        return StepResult(self.state, obs, (0.0, 0.0), False, {})

    def step(self, actions) -> StepResult:
        if self.state is None:
            raise RuntimeError("reset() must be called before step()")
        state, rewards, done, info = self.transition(self.state, actions)
        self.state = state
        obs = (self.observe(state, 0), self.observe(state, 1))
        return StepResult(state, obs, rewards, done, info)

    def describe(self) -> dict[str, Any]:
        return {"game": self.game_id, "obs_shape": list(self.obs_shape),
                "channels": list(self.channels), "actions": list(self.action_names)}
