"""One-state repeated matrix game, used as an exact oracle fixture."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .base import TwoPlayerEnv

COOPERATE, DEFECT = 0, 1


class MatrixState(NamedTuple):
    step: int = 0


class MatrixGameEnv(TwoPlayerEnv):
    """Repeated 2x2 game with the classic (R, S, T, P) payoff layout."""

    game_id = "matrix"
    action_names = ("cooperate", "defect")
    channels = ("bias",)

    def __init__(self, R: float = 3.0, S: float = 0.0, T: float = 5.0, P: float = 1.0, horizon: int = 200):
        super().__init__()
        self.payoffs = (R, S, T, P)
        self.max_steps = horizon
        self.table = np.array(
            [[(R, R), (S, T)],
             [(T, S), (P, P)]],
            dtype=np.float64,
        )
        self._rewards = {(i, j): (float(self.table[i, j, 0]), float(self.table[i, j, 1]))
                         for i in (0, 1) for j in (0, 1)}
        self._obs = np.ones(1)
        self._obs.flags.writeable = False

    @property
    def obs_shape(self) -> tuple[int, ...]:
        return (1,)

    def initial_state(self, rng: np.random.Generator) -> MatrixState:
        return MatrixState(0)

    def transition(self, state: MatrixState, actions):
        if state.step >= self.max_steps:
            raise RuntimeError("step() called on a terminal state")
        a0, a1 = self.check_actions(actions)
        new = MatrixState(state.step + 1)
        return new, self._rewards[a0, a1], new.step >= self.max_steps, {}

    def observe(self, state: MatrixState, agent: int) -> np.ndarray:
        return self._obs

    def swap_perspective(self, obs: np.ndarray) -> np.ndarray:
        return np.asarray(obs)
