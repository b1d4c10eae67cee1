"""Hand-written cooperate/defect policies that need no training.

Each policy is a pure function of the acting agent's observation, so it
can be dropped in wherever a trained policy is expected.
"""

from __future__ import annotations

import numpy as np

from .applepear import ApplePearEnv, bfs_distances, clip_move, fruit_value
from .base import GridPos
from .gathering import (
    BEAM,
    DIRECTIONS,
    FORWARD,
    ROTATE_LEFT,
    ROTATE_RIGHT,
    STAND,
    STEP_LEFT,
    STEP_RIGHT,
    BACKWARD,
    GatheringEnv,
    beam_cells,
)
from .matrix import COOPERATE, DEFECT, MatrixGameEnv

MODES = ("cooperate", "defect")


class ScriptedPolicy:
    kind = "scripted"

    def __init__(self, env, role: int, mode: str):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if role not in (0, 1):
            raise ValueError(f"role must be 0 or 1, got {role}")
        self.env = env
        self.role = role
        self.mode = mode

    @property
    def n_actions(self) -> int:
        return self.env.n_actions

    def action_distribution(self, obs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": "scripted", "game": self.env.game_id, "role": self.role, "mode": self.mode}

    def __repr__(self) -> str:
        return f"{type(self).__name__}(role={self.role}, mode={self.mode!r})"


def _uniform_over(mask: np.ndarray) -> np.ndarray:
    return mask / mask.sum()


class ApplePearScripted(ScriptedPolicy):
    """Cooperate: shortest path to the preferred fruit only, never touching
    the other fruit. Defect: collect both fruits, the contested one first,
    skipping any fruit worth less than the walk to it."""

    def target(self, me: GridPos, apple, pear):
        cfg = self.env.config
        cells = (apple, pear)
        if self.mode == "cooperate":
            order = (self.role,)
        else:
            # the rival's fruit goes first: the own fruit is never at risk
            order = (1 - self.role, self.role)
        for kind in order:
            cell = cells[kind]
            if cell is None:
                continue
            dist = abs(cell.row - me.row) + abs(cell.col - me.col)
            if fruit_value(cfg, self.role, kind) > cfg.move_cost * dist:
                return kind, cell
        return None

    def action_distribution(self, obs: np.ndarray) -> np.ndarray:
        cfg = self.env.config
        me, _other, apple, pear = self.env.decode(obs)
        present = [c for c in (apple, pear) if c is not None]
        tgt = self.target(me, apple, pear)
        dests = [clip_move(cfg, me, a) for a in range(4)]
        if tgt is None:
            mask = np.array([d not in present for d in dests], dtype=np.float64)
            if mask.sum() == 0:
                mask[:] = 1.0
            return _uniform_over(mask)
        kind, cell = tgt
        blocked = None
        if self.mode == "cooperate":
            blocked = pear if kind == 0 else apple
        dist = bfs_distances(cfg.rows, cfg.cols, cell, blocked)
        scores = np.array(
            [dist[d] if d != blocked else np.iinfo(np.int64).max for d in dests], dtype=np.float64
        )
        mask = (scores == scores.min()).astype(np.float64)
        return _uniform_over(mask)


class GatheringScripted(ScriptedPolicy):
    """Cooperate: walk to the nearest available apple, never beam.
    Defect: beam when the rival is in the beam line, turn toward it when it
    shares a row or column, otherwise collect like the cooperator."""

    def action_distribution(self, obs: np.ndarray) -> np.ndarray:
        env: GatheringEnv = self.env
        cfg = env.config
        me, other, apples = env.decode(obs)
        dist = np.zeros(8)
        if me is None:
            dist[STAND] = 1.0
            return dist
        pos, orient = me
        if self.mode == "defect" and other is not None:
            opos = other[0]
            if opos in beam_cells(cfg, pos, orient):
                dist[BEAM] = 1.0
                return dist
            if opos.row == pos.row or opos.col == pos.col:
                want = _direction_to(pos, opos)
                if want == (orient + 1) % 4:
                    dist[ROTATE_RIGHT] = 1.0
                elif want == (orient + 3) % 4:
                    dist[ROTATE_LEFT] = 1.0
                else:
                    dist[ROTATE_RIGHT] = 1.0
                return dist
        if not apples:
            dist[STAND] = 1.0
            return dist
        d_min = min(abs(a.row - pos.row) + abs(a.col - pos.col) for a in apples)
        nearest = [a for a in apples if abs(a.row - pos.row) + abs(a.col - pos.col) == d_min]
        offsets = {FORWARD: 0, STEP_RIGHT: 1, BACKWARD: 2, STEP_LEFT: 3}
        for action, off in offsets.items():
            dr, dc = DIRECTIONS[(orient + off) % 4]
            r, c = pos.row + dr, pos.col + dc
            if not (0 <= r < cfg.rows and 0 <= c < cfg.cols):
                continue
            if any(abs(a.row - r) + abs(a.col - c) < d_min for a in nearest):
                dist[action] = 1.0
        if dist.sum() == 0:
            dist[STAND] = 1.0
        return _uniform_over(dist)


def _direction_to(src: GridPos, dst: GridPos) -> int:
    if dst.row < src.row:
        return 0
    if dst.col > src.col:
        return 1
    if dst.row > src.row:
        return 2
    return 3


class MatrixScripted(ScriptedPolicy):
    def action_distribution(self, obs: np.ndarray) -> np.ndarray:
        out = np.zeros(2)
        out[COOPERATE if self.mode == "cooperate" else DEFECT] = 1.0
        return out


def scripted_policy(env, role: int, mode: str) -> ScriptedPolicy:
    """Training-free baseline for ``env`` in the given role and mode."""
    if isinstance(env, ApplePearEnv):
        return ApplePearScripted(env, role, mode)
    if isinstance(env, GatheringEnv):
        return GatheringScripted(env, role, mode)
    if isinstance(env, MatrixGameEnv):
        return MatrixScripted(env, role, mode)
    raise TypeError(f"no scripted policies for {type(env).__name__}")

