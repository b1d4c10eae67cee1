"""Apple-Pear: two agents with opposite fruit preferences on a small grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import GridPos, TwoPlayerEnv

UP, DOWN, LEFT, RIGHT = range(4)
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
APPLE, PEAR = 0, 1


@dataclass(frozen=True)
class ApplePearConfig:
    rows: int = 5
    cols: int = 5
    move_cost: float = 0.01
    max_steps: int = 100
    high_value: float = 1.0
    low_value: float = 0.5


@dataclass(frozen=True)
class ApplePearState:
    positions: tuple[GridPos, GridPos]
    apple: GridPos | None
    pear: GridPos | None
    step: int = 0

    @property
    def terminal(self) -> bool:
        return self.apple is None and self.pear is None


def fruit_value(cfg: ApplePearConfig, agent: int, fruit: int) -> float:
    """Agent 0 (blue) prefers the apple, agent 1 (red) the pear."""
    return cfg.high_value if agent == fruit else cfg.low_value


def clip_move(cfg: ApplePearConfig, pos: GridPos, action: int) -> GridPos:
    dr, dc = MOVES[action]
    r, c = pos.row + dr, pos.col + dc
    if 0 <= r < cfg.rows and 0 <= c < cfg.cols:
        return GridPos(r, c)
    return pos


def resolve_moves(
    current: tuple[GridPos, GridPos], proposed: list[GridPos], shareable: set
) -> tuple[GridPos, GridPos]:
    """Lower agent id wins contested cells; fruit cells may be entered jointly.

    Agents already sharing a cell (after a joint collection) may both stay.
    """
    final = list(proposed)
    while final[0] == final[1] and final[0] not in shareable and not current[0] == current[1] == final[0]:
        if final[0] == current[1] and final[0] != current[0]:
            final[0] = current[0]
        elif final[1] == current[0] and final[1] != current[1]:
            final[1] = current[1]
        else:
            final[1] = current[1]
    return final[0], final[1]


class ApplePearEnv(TwoPlayerEnv):
    game_id = "applepear"
    action_names = ("up", "down", "left", "right")
    channels = ("self", "other", "apple", "pear")

    def __init__(self, config: ApplePearConfig | None = None):
        super().__init__()
        self.config = config or ApplePearConfig()
        self.max_steps = self.config.max_steps
        cfg = self.config
        self.starts = (GridPos(0, 0), GridPos(cfg.rows - 1, cfg.cols - 1))
        self.spawn_cells = [
            GridPos(r, c)
            for r in range(cfg.rows)
            for c in range(cfg.cols)
            if GridPos(r, c) not in self.starts
        ]

    @property
    def obs_shape(self) -> tuple[int, ...]:
        return (len(self.channels), self.config.rows, self.config.cols)

    def initial_state(self, rng: np.random.Generator) -> ApplePearState:
        i, j = rng.choice(len(self.spawn_cells), size=2, replace=False)
        return ApplePearState(self.starts, self.spawn_cells[int(i)], self.spawn_cells[int(j)], 0)

    def transition(self, state: ApplePearState, actions):
        cfg = self.config
        if state.terminal or state.step >= cfg.max_steps:
            raise RuntimeError("step() called on a terminal state")
        a0, a1 = self.check_actions(actions)
        proposed = [clip_move(cfg, state.positions[0], a0), clip_move(cfg, state.positions[1], a1)]
        fruits = {f for f in (state.apple, state.pear) if f is not None}
        positions = resolve_moves(state.positions, proposed, fruits)
        rewards = [-cfg.move_cost, -cfg.move_cost]
        apple, pear = state.apple, state.pear
        collected = []
        for kind, cell in ((APPLE, state.apple), (PEAR, state.pear)):
            if cell is None:
                continue
            takers = [i for i in (0, 1) if positions[i] == cell]
            if not takers:
                continue
            share = 0.5 if len(takers) == 2 else 1.0
            for i in takers:
                rewards[i] += share * fruit_value(cfg, i, kind)
            collected.append((("apple", "pear")[kind], tuple(takers)))
            if kind == APPLE:
                apple = None
            else:
                pear = None
        new = ApplePearState(positions, apple, pear, state.step + 1)
        done = new.terminal or new.step >= cfg.max_steps
        info = {"collected": collected, "shared": any(len(t) == 2 for _, t in collected)}
        return new, (rewards[0], rewards[1]), done, info

    def observe(self, state: ApplePearState, agent: int) -> np.ndarray:
        cfg = self.config
        grid = np.zeros((4, cfg.rows, cfg.cols))
        me, other = state.positions[agent], state.positions[1 - agent]
        grid[0, me.row, me.col] = 1.0
        grid[1, other.row, other.col] = 1.0
        if state.apple is not None:
            grid[2, state.apple.row, state.apple.col] = 1.0
        if state.pear is not None:
            grid[3, state.pear.row, state.pear.col] = 1.0
        return grid.reshape(-1)

    def swap_perspective(self, obs: np.ndarray) -> np.ndarray:
        g = np.asarray(obs).reshape((-1,) + self.obs_shape)
        g = g[:, [1, 0, 2, 3]]
        return g.reshape(np.asarray(obs).shape)

    def observation_symmetries(self) -> list[np.ndarray]:
        """Index maps of flat observations under symmetries of the game.

        Transposing the grid fixes both start corners and commutes with the
        dynamics and the scripted policies, so it maps episodes to episodes
        of equal probability. Only square grids have it.
        """
        cfg = self.config
        idx = np.arange(self.obs_size).reshape(self.obs_shape)
        maps = [idx.reshape(-1)]
        if cfg.rows == cfg.cols:
            maps.append(idx.transpose(0, 2, 1).reshape(-1))
        return maps

    def decode(self, obs: np.ndarray):
        """Recover (self, other, apple, pear) positions from an observation."""
        g = np.asarray(obs).reshape(self.obs_shape)
        out = []
        for ch in range(4):
            idx = np.flatnonzero(g[ch])
            out.append(GridPos(*divmod(int(idx[0]), self.config.cols)) if idx.size else None)
        return tuple(out)

    def state_from_arrays(self, blue, red, apple, pear, step=0) -> ApplePearState:
        return ApplePearState(
            (GridPos(*blue), GridPos(*red)),
            None if apple is None else GridPos(*apple),
            None if pear is None else GridPos(*pear),
            step,
        )


def bfs_distances(rows: int, cols: int, target: GridPos, blocked: GridPos | None = None) -> np.ndarray:
    """Shortest 4-neighbour path lengths to ``target`` avoiding ``blocked``."""
    dist = np.full((rows, cols), -1, dtype=np.int64)
    dist[target] = 0
    frontier = [target]
    while frontier:
        nxt = []
        for r, c in frontier:
            for dr, dc in MOVES:
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols and dist[rr, cc] < 0:
                    if blocked is not None and (rr, cc) == tuple(blocked):
                        continue
                    dist[rr, cc] = dist[r, c] + 1
                    nxt.append((rr, cc))
        frontier = nxt
    return dist

